#include "gridfm/powerflow.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

#include "gridfm/errors.hpp"
#include "gridfm/topology.hpp"

namespace gridfm {

namespace {

using SparseReal = Eigen::SparseMatrix<double>;

// Below this size the Newton step uses a dense LU.
constexpr std::size_t kDenseThreshold = 50;
constexpr double kDenseRcondFloor = 1e-14;

void check_dimension(std::size_t expected, std::size_t got) {
    if (expected != got) {
        throw DimensionMismatch("expected " + std::to_string(expected) + " node states, got " +
                                std::to_string(got));
    }
}

Eigen::VectorXcd voltages(std::span<const NodeState> states) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::polar(states[i].v, states[i].delta);
    return v;
}

class LinearSolver {
public:
    LinearSolver(bool dense) : dense_(dense) {}

    Eigen::VectorXd solve(const SparseReal& a, const Eigen::VectorXd& rhs) {
        if (dense_) {
            Eigen::PartialPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(a)};
            if (!(lu.rcond() > kDenseRcondFloor)) throw SingularJacobian("Jacobian is singular");
            Eigen::VectorXd x = lu.solve(rhs);
            if (!x.allFinite()) throw SingularJacobian("Jacobian is singular");
            return x;
        }
        if (!analyzed_) {
            sparse_.analyzePattern(a);
            analyzed_ = true;
        }
        sparse_.factorize(a);
        if (sparse_.info() != Eigen::Success) throw SingularJacobian("Jacobian is singular: " + sparse_.lastErrorMessage());
        Eigen::VectorXd x = sparse_.solve(rhs);
        if (sparse_.info() != Eigen::Success || !x.allFinite()) throw SingularJacobian("Jacobian is singular");
        return x;
    }

private:
    bool dense_;
    bool analyzed_ = false;
    Eigen::SparseLU<SparseReal, Eigen::COLAMDOrdering<int>> sparse_;
};

}  // namespace

void SolverOptions::validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("solver tolerance must be positive");
    if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
}

void calculated_injections(const AdmittanceMatrix& ybus, std::span<const NodeState> states,
                           std::vector<double>& p, std::vector<double>& q) {
    check_dimension(ybus.dimension(), states.size());
    const Eigen::VectorXcd v = voltages(states);
    const Eigen::VectorXcd current = ybus.matrix() * v;
    p.resize(states.size());
    q.resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const Complex s = v[k] * std::conj(current[k]);
        p[i] = s.real();
        q[i] = s.imag();
    }
}

Mismatch compute_mismatch(const AdmittanceMatrix& ybus, std::span<const NodeState> states) {
    Mismatch m;
    calculated_injections(ybus, states, m.dp, m.dq);
    for (std::size_t i = 0; i < states.size(); ++i) {
        m.dp[i] = states[i].p - m.dp[i];
        m.dq[i] = states[i].q - m.dq[i];
    }
    return m;
}

Mismatch compute_mismatch(const Network& net, std::span<const NodeState> states) {
    check_dimension(net.bus_count(), states.size());
    return compute_mismatch(build_ybus(net), states);
}

double max_specified_mismatch(const Network& net, const Mismatch& mismatch) {
    double worst = 0.0;
    const auto buses = net.buses();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].type == BusType::Slack) continue;
        worst = std::max(worst, std::abs(mismatch.dp[i]));
        if (buses[i].type == BusType::PQ) worst = std::max(worst, std::abs(mismatch.dq[i]));
        if (std::isnan(mismatch.dp[i]) || std::isnan(mismatch.dq[i])) return std::numeric_limits<double>::infinity();
    }
    return worst;
}

JacobianLayout JacobianLayout::for_network(const Network& net) {
    JacobianLayout layout;
    const auto buses = net.buses();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].type != BusType::Slack) layout.angle_buses.push_back(i);
        if (buses[i].type == BusType::PQ) layout.magnitude_buses.push_back(i);
    }
    return layout;
}

JacobianLayout JacobianLayout::all_buses(std::size_t n) {
    JacobianLayout layout;
    for (std::size_t i = 0; i < n; ++i) {
        layout.angle_buses.push_back(i);
        layout.magnitude_buses.push_back(i);
    }
    return layout;
}

SparseReal build_jacobian(const AdmittanceMatrix& ybus, std::span<const NodeState> states,
                          const JacobianLayout& layout) {
    const std::size_t n = ybus.dimension();
    check_dimension(n, states.size());
    constexpr long kAbsent = -1;
    std::vector<long> angle_pos(n, kAbsent);
    std::vector<long> mag_pos(n, kAbsent);
    const auto n_angle = static_cast<long>(layout.angle_buses.size());
    for (std::size_t k = 0; k < layout.angle_buses.size(); ++k) angle_pos[layout.angle_buses[k]] = static_cast<long>(k);
    for (std::size_t k = 0; k < layout.magnitude_buses.size(); ++k) {
        mag_pos[layout.magnitude_buses[k]] = n_angle + static_cast<long>(k);
    }

    const Eigen::VectorXcd v = voltages(states);
    const SparseComplex& y = ybus.matrix();
    const Eigen::VectorXcd current = y * v;

    // dS_i/dd_j and dS_i/dv_j; P rows take the real part, Q rows the imaginary.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(4 * static_cast<std::size_t>(y.nonZeros()) + 4 * n);
    auto emit = [&](std::size_t i, std::size_t j, Complex ds_dd, Complex ds_dv) {
        const long p_row = angle_pos[i];
        const long q_row = mag_pos[i];
        const long d_col = angle_pos[j];
        const long v_col = mag_pos[j];
        if (p_row != kAbsent) {
            if (d_col != kAbsent) triplets.emplace_back(p_row, d_col, ds_dd.real());
            if (v_col != kAbsent) triplets.emplace_back(p_row, v_col, ds_dv.real());
        }
        if (q_row != kAbsent) {
            if (d_col != kAbsent) triplets.emplace_back(q_row, d_col, ds_dd.imag());
            if (v_col != kAbsent) triplets.emplace_back(q_row, v_col, ds_dv.imag());
        }
    };
    const Complex j_unit(0.0, 1.0);
    for (int col = 0; col < y.outerSize(); ++col) {
        const auto jb = static_cast<std::size_t>(col);
        const Complex unit_j = std::polar(1.0, states[jb].delta);
        for (SparseComplex::InnerIterator it(y, col); it; ++it) {
            const auto ib = static_cast<std::size_t>(it.row());
            const Complex yij = it.value();
            emit(ib, jb, -j_unit * v[it.row()] * std::conj(yij * v[col]), v[it.row()] * std::conj(yij * unit_j));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const Complex unit_i = std::polar(1.0, states[i].delta);
        emit(i, i, j_unit * v[k] * std::conj(current[k]), std::conj(current[k]) * unit_i);
    }

    const auto dim = static_cast<Eigen::Index>(layout.size());
    SparseReal jac(dim, dim);
    jac.setFromTriplets(triplets.begin(), triplets.end());
    jac.makeCompressed();
    return jac;
}

SparseReal build_jacobian(const Network& net, std::span<const NodeState> states) {
    check_dimension(net.bus_count(), states.size());
    return build_jacobian(build_ybus(net), states, JacobianLayout::for_network(net));
}

SolvedCase solve_ac_pf(const Network& net, const SolverOptions& opts) {
    opts.validate();
    const auto start = std::chrono::steady_clock::now();
    if (!slack_spans_all_buses(net)) throw Islanded("network '" + net.name() + "' is islanded");

    const AdmittanceMatrix ybus = build_ybus(net);
    const JacobianLayout layout = JacobianLayout::for_network(net);
    std::vector<NodeState> states = initial_states(net, opts.flat_start);

    const auto n_angle = layout.angle_buses.size();
    const auto dim = static_cast<Eigen::Index>(layout.size());
    Eigen::VectorXd rhs(dim);
    auto residual = [&] {
        const Mismatch m = compute_mismatch(ybus, states);
        double worst = 0.0;
        for (std::size_t k = 0; k < n_angle; ++k) {
            rhs[static_cast<Eigen::Index>(k)] = m.dp[layout.angle_buses[k]];
        }
        for (std::size_t k = 0; k < layout.magnitude_buses.size(); ++k) {
            rhs[static_cast<Eigen::Index>(n_angle + k)] = m.dq[layout.magnitude_buses[k]];
        }
        for (Eigen::Index k = 0; k < dim; ++k) {
            if (!std::isfinite(rhs[k])) return std::numeric_limits<double>::infinity();
            worst = std::max(worst, std::abs(rhs[k]));
        }
        return worst;
    };

    LinearSolver solver(net.bus_count() < kDenseThreshold);
    double norm = residual();
    int iterations = 0;
    while (!(norm <= opts.tol)) {
        if (iterations == opts.max_iter || !std::isfinite(norm)) throw NoConvergence(iterations, norm);
        ++iterations;
        const SparseReal jac = build_jacobian(ybus, states, layout);
        const Eigen::VectorXd step = solver.solve(jac, rhs);
        for (std::size_t k = 0; k < n_angle; ++k) {
            states[layout.angle_buses[k]].delta += step[static_cast<Eigen::Index>(k)];
        }
        for (std::size_t k = 0; k < layout.magnitude_buses.size(); ++k) {
            states[layout.magnitude_buses[k]].v += step[static_cast<Eigen::Index>(n_angle + k)];
        }
        norm = residual();
    }

    // Slack (p, q) and PV q are whatever the converged voltages imply.
    std::vector<double> p_calc;
    std::vector<double> q_calc;
    calculated_injections(ybus, states, p_calc, q_calc);
    const auto buses = net.buses();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].type == BusType::Slack) states[i].p = p_calc[i];
        if (buses[i].type != BusType::PQ) states[i].q = q_calc[i];
    }

    SolvedCase out{.net = net, .states = std::move(states), .iterations = iterations, .max_mismatch = norm,
                   .wall_time = 0.0, .tol = opts.tol};
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

DcSolution solve_dc_pf(const Network& net) {
    if (!slack_spans_all_buses(net)) throw SingularMatrix("DC susceptance matrix is singular: network is islanded");
    const std::size_t n = net.bus_count();
    const std::size_t slack = net.slack_index();
    const auto branches = net.branches();
    const auto buses = net.buses();

    std::vector<double> susceptance(branches.size(), 0.0);
    std::vector<double> injection(n, 0.0);
    const auto specified = net_injections(net);
    for (std::size_t i = 0; i < n; ++i) injection[i] = specified[i].p - buses[i].gs;

    // Reduced index: buses other than the slack, in bus order.
    auto reduced = [slack](std::size_t i) { return static_cast<int>(i < slack ? i : i - 1); };
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(4 * branches.size() + n);
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const Branch& br = branches[k];
        if (!br.in_service) continue;
        if (br.x == 0.0) throw ZeroImpedanceBranch(k);
        const double b = 1.0 / (br.x * br.tap);
        susceptance[k] = b;
        const std::size_t f = net.bus_index(br.from_bus);
        const std::size_t t = net.bus_index(br.to_bus);
        const double shift_injection = -b * br.shift;
        injection[f] -= shift_injection;
        injection[t] += shift_injection;
        const double slack_angle = buses[slack].va_init;
        if (f != slack && t != slack) {
            triplets.emplace_back(reduced(f), reduced(f), b);
            triplets.emplace_back(reduced(t), reduced(t), b);
            triplets.emplace_back(reduced(f), reduced(t), -b);
            triplets.emplace_back(reduced(t), reduced(f), -b);
        } else if (f != slack) {
            triplets.emplace_back(reduced(f), reduced(f), b);
            injection[f] += b * slack_angle;
        } else {
            triplets.emplace_back(reduced(t), reduced(t), b);
            injection[t] += b * slack_angle;
        }
    }

    DcSolution out;
    out.delta.assign(n, 0.0);
    out.delta[slack] = buses[slack].va_init;
    if (n > 1) {
        const auto m = static_cast<Eigen::Index>(n - 1);
        SparseReal b_prime(m, m);
        b_prime.setFromTriplets(triplets.begin(), triplets.end());
        b_prime.makeCompressed();
        Eigen::VectorXd rhs(m);
        for (std::size_t i = 0; i < n; ++i) {
            if (i != slack) rhs[reduced(i)] = injection[i];
        }
        Eigen::SparseLU<SparseReal, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(b_prime);
        if (lu.info() != Eigen::Success) throw SingularMatrix("DC susceptance matrix is singular");
        const Eigen::VectorXd theta = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !theta.allFinite()) throw SingularMatrix("DC susceptance matrix is singular");
        for (std::size_t i = 0; i < n; ++i) {
            if (i != slack) out.delta[i] = theta[reduced(i)];
        }
    }

    out.branch_flow.assign(branches.size(), 0.0);
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const Branch& br = branches[k];
        if (!br.in_service) continue;
        const double df = out.delta[net.bus_index(br.from_bus)];
        const double dt = out.delta[net.bus_index(br.to_bus)];
        out.branch_flow[k] = susceptance[k] * (df - dt - br.shift);
    }
    return out;
}

}  // namespace gridfm
