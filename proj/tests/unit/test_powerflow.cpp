#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "gridfm/errors.hpp"
#include "gridfm/powerflow.hpp"
#include "test_data.hpp"

using namespace gridfm;
using gridfm::testing::load_test_case;
using gridfm::testing::two_bus;

namespace {

const char* kCorpus[] = {"case14", "case30", "case57", "case118", "case1354pegase", "case2869pegase"};

Network scale_loads(const Network& net, double factor) {
    std::vector<Bus> buses(net.buses().begin(), net.buses().end());
    for (Bus& b : buses) {
        b.pd *= factor;
        b.qd *= factor;
    }
    return net.with_buses(buses);
}

std::vector<NodeState> perturbed_state(const Network& net, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dv(-0.05, 0.05);
    std::uniform_real_distribution<double> dd(-0.2, 0.2);
    std::vector<NodeState> s = initial_states(net, false);
    for (NodeState& x : s) {
        x.v += dv(gen);
        x.delta += dd(gen);
    }
    return s;
}

}  // namespace

TEST(Mismatch, ZeroInjectionFlatStateIsFixedPoint) {
    const Network net = two_bus();
    const Mismatch m = compute_mismatch(net, initial_states(net, true));
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(m.dp[i], 0.0);
        EXPECT_EQ(m.dq[i], 0.0);
    }
}

TEST(Mismatch, DimensionMismatch) {
    const Network net = two_bus();
    std::vector<NodeState> states(3);
    EXPECT_THROW(compute_mismatch(net, states), DimensionMismatch);
}

TEST(Mismatch, MatchesDenseLoopOracleAtFlatStart) {
    const Network net = load_test_case("case14");
    const auto ref = gridfm::testing::reference("case14_ybus.json");
    std::vector<std::vector<std::complex<double>>> y(14, std::vector<std::complex<double>>(14));
    for (const auto& e : ref["entries"]) {
        y[e[0].get<std::size_t>()][e[1].get<std::size_t>()] = {e[2].get<double>(), e[3].get<double>()};
    }
    for (bool flat : {true, false}) {
        const std::vector<NodeState> s = flat ? initial_states(net, true) : perturbed_state(net, 3);
        const Mismatch m = compute_mismatch(net, s);
        for (std::size_t i = 0; i < 14; ++i) {
            double p = 0.0;
            double q = 0.0;
            for (std::size_t j = 0; j < 14; ++j) {
                const double g = y[i][j].real();
                const double b = y[i][j].imag();
                const double d = s[i].delta - s[j].delta;
                p += s[i].v * s[j].v * (g * std::cos(d) + b * std::sin(d));
                q += s[i].v * s[j].v * (g * std::sin(d) - b * std::cos(d));
            }
            EXPECT_NEAR(m.dp[i], s[i].p - p, 1e-12);
            EXPECT_NEAR(m.dq[i], s[i].q - q, 1e-12);
        }
    }
}

TEST(Jacobian, MatchesCentralDifferences) {
    for (const char* name : {"case14", "case30", "case57"}) {
        const Network net = load_test_case(name);
        const std::vector<NodeState> s = perturbed_state(net, 11);
        const JacobianLayout layout = JacobianLayout::for_network(net);
        const Eigen::MatrixXd j = Eigen::MatrixXd(build_jacobian(net, s));
        ASSERT_EQ(static_cast<std::size_t>(j.rows()), layout.size());
        const double h = 1e-6;
        const std::size_t na = layout.angle_buses.size();
        for (std::size_t c = 0; c < layout.size(); ++c) {
            auto plus = s;
            auto minus = s;
            if (c < na) {
                plus[layout.angle_buses[c]].delta += h;
                minus[layout.angle_buses[c]].delta -= h;
            } else {
                plus[layout.magnitude_buses[c - na]].v += h;
                minus[layout.magnitude_buses[c - na]].v -= h;
            }
            const Mismatch mp = compute_mismatch(net, plus);
            const Mismatch mm = compute_mismatch(net, minus);
            for (std::size_t r = 0; r < layout.size(); ++r) {
                const double fd = r < na ? -(mp.dp[layout.angle_buses[r]] - mm.dp[layout.angle_buses[r]]) / (2 * h)
                                         : -(mp.dq[layout.magnitude_buses[r - na]] -
                                             mm.dq[layout.magnitude_buses[r - na]]) /
                                               (2 * h);
                EXPECT_NEAR(j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), fd, 1e-5)
                    << name << " row " << r << " col " << c;
            }
        }
    }
}

TEST(Jacobian, TwoBusLosslessAngleDerivative) {
    const Network net = two_bus(0.0, 0.1);
    const Eigen::MatrixXd j = Eigen::MatrixXd(build_jacobian(net, initial_states(net, true)));
    ASSERT_EQ(j.rows(), 2);
    EXPECT_NEAR(j(0, 0), 10.0, 1e-12);
}

TEST(Jacobian, Dimensions) {
    const Network net = load_test_case("case14");
    std::size_t pv = 0;
    std::size_t pq = 0;
    for (const Bus& b : net.buses()) {
        pv += b.type == BusType::PV ? 1 : 0;
        pq += b.type == BusType::PQ ? 1 : 0;
    }
    EXPECT_EQ(pv, 4u);
    EXPECT_EQ(pq, 9u);
    const auto j = build_jacobian(net, initial_states(net, true));
    EXPECT_EQ(static_cast<std::size_t>(j.rows()), pv + pq + pq);
    EXPECT_EQ(static_cast<std::size_t>(j.cols()), pv + pq + pq);
}

TEST(SolveAc, TwoBusZeroInjection) {
    const SolvedCase s = solve_ac_pf(two_bus());
    EXPECT_NEAR(s.states[1].p, 0.0, 1e-12);
    EXPECT_NEAR(s.states[1].q, 0.0, 1e-12);
    EXPECT_NEAR(s.states[1].v, 1.0, 1e-12);
    EXPECT_NEAR(s.states[1].delta, 0.0, 1e-12);
}

TEST(SolveAc, MatchesReferenceSolver) {
    for (const char* name : kCorpus) {
        const Network net = load_test_case(name);
        const SolvedCase s = solve_ac_pf(net);
        const auto ref = gridfm::testing::reference(std::string(name) + "_pf.json");
        const auto ids = ref["bus_id"].get<std::vector<int>>();
        const auto vm = ref["vm"].get<std::vector<double>>();
        const auto va = ref["va_rad"].get<std::vector<double>>();
        double worst_v = 0.0;
        double worst_a = 0.0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const std::size_t i = net.bus_index(ids[k]);
            worst_v = std::max(worst_v, std::abs(s.states[i].v - vm[k]));
            worst_a = std::max(worst_a, std::abs(s.states[i].delta - va[k]));
        }
        EXPECT_LE(worst_v, 1e-6) << name;
        EXPECT_LE(worst_a, 1e-8) << name;
        EXPECT_LE(s.max_mismatch, 1e-8) << name;
    }
}

TEST(SolveAc, SpecifiedQuantitiesRetained) {
    const Network net = load_test_case("case118");
    const SolvedCase s = solve_ac_pf(net);
    const auto inj = net_injections(net);
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        const Bus& b = net.buses()[i];
        if (b.type != BusType::PQ) EXPECT_EQ(s.states[i].v, net.voltage_setpoint(i));
        if (b.type == BusType::Slack) EXPECT_EQ(s.states[i].delta, b.va_init);
        if (b.type != BusType::Slack) EXPECT_EQ(s.states[i].p, inj[i].p);
        if (b.type == BusType::PQ) EXPECT_EQ(s.states[i].q, inj[i].q);
    }
    // Every bus, including back-computed ones, balances.
    const Mismatch m = compute_mismatch(net, s.states);
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        EXPECT_LE(std::abs(m.dp[i]), 1e-8);
        EXPECT_LE(std::abs(m.dq[i]), 1e-8);
    }
}

TEST(SolveAc, HeavyLoadingDiverges) {
    const auto ref = gridfm::testing::reference("divergence.json");
    ASSERT_FALSE(ref["case14_x10"].get<bool>());
    EXPECT_THROW(solve_ac_pf(scale_loads(load_test_case("case14"), 10.0)), NoConvergence);
    try {
        solve_ac_pf(scale_loads(load_test_case("case14"), 10.0));
    } catch (const NoConvergence& e) {
        EXPECT_EQ(e.iterations(), 20);
        EXPECT_GT(e.last_mismatch(), 1e-8);
    }
}

TEST(SolveAc, IslandedInput) {
    const Network net = two_bus().with_branch_status(0, false);
    EXPECT_THROW(solve_ac_pf(net), Islanded);
}

TEST(SolveAc, OptionsValidated) {
    EXPECT_THROW(solve_ac_pf(two_bus(), SolverOptions{.tol = 0.0}), InvalidArgument);
    EXPECT_THROW(solve_ac_pf(two_bus(), SolverOptions{.max_iter = 0}), InvalidArgument);
}

TEST(SolveAc, SlackBalanceEqualsLosses) {
    for (const char* name : {"case14", "case30", "case57", "case118"}) {
        const Network net = load_test_case(name);
        const SolvedCase s = solve_ac_pf(net);
        double sum_p = 0.0;
        for (const NodeState& x : s.states) sum_p += x.p;
        double losses = 0.0;
        for (const Branch& br : net.branches()) {
            if (!br.in_service) continue;
            const NodeState& f = s.states[net.bus_index(br.from_bus)];
            const NodeState& t = s.states[net.bus_index(br.to_bus)];
            const std::complex<double> vf = std::polar(f.v, f.delta);
            const std::complex<double> vt = std::polar(t.v, t.delta);
            const std::complex<double> i = (vf / std::polar(br.tap, br.shift) - vt) / std::complex<double>(br.r, br.x);
            losses += std::norm(i) * br.r;
        }
        for (std::size_t k = 0; k < net.bus_count(); ++k) losses += net.buses()[k].gs * s.states[k].v * s.states[k].v;
        EXPECT_NEAR(sum_p, losses, 1e-8) << name;
    }
}

TEST(SolveAc, LosslessNetworkBalances) {
    const Network net = load_test_case("case30");
    std::vector<Bus> buses(net.buses().begin(), net.buses().end());
    for (Bus& b : buses) b.gs = 0.0;
    std::vector<Branch> branches(net.branches().begin(), net.branches().end());
    for (Branch& b : branches) b.r = 0.0;
    const Network lossless(net.name(), net.base_mva(), buses, branches,
                           std::vector<Generator>(net.generators().begin(), net.generators().end()));
    const SolvedCase s = solve_ac_pf(lossless);
    double sum_p = 0.0;
    for (const NodeState& x : s.states) sum_p += x.p;
    EXPECT_NEAR(sum_p, 0.0, 1e-10);
}

TEST(SolveAc, Deterministic) {
    const Network net = load_test_case("case118");
    const SolvedCase a = solve_ac_pf(net);
    const SolvedCase b = solve_ac_pf(net);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(SolveDc, TwoBusAnalytic) {
    const DcSolution dc = solve_dc_pf(two_bus(0.0, 0.1, 1.0));
    EXPECT_NEAR(dc.delta[0], 0.0, 1e-15);
    EXPECT_NEAR(dc.delta[1], -0.1, 1e-12);
    EXPECT_NEAR(dc.branch_flow[0], 1.0, 1e-12);
}

TEST(SolveDc, ZeroInjections) {
    const DcSolution dc = solve_dc_pf(two_bus());
    for (double d : dc.delta) EXPECT_EQ(d, 0.0);
}

TEST(SolveDc, MatchesReference) {
    for (const char* name : kCorpus) {
        const Network net = load_test_case(name);
        const DcSolution dc = solve_dc_pf(net);
        const auto ref = gridfm::testing::reference(std::string(name) + "_pf.json");
        const auto ids = ref["bus_id"].get<std::vector<int>>();
        const auto va = ref["dc_va_rad"].get<std::vector<double>>();
        for (std::size_t k = 0; k < ids.size(); ++k) {
            EXPECT_NEAR(dc.delta[net.bus_index(ids[k])], va[k], 1e-9) << name << " bus " << ids[k];
        }
        const auto pf = ref["dc_branch_pf"].get<std::vector<double>>();
        for (std::size_t k = 0; k < pf.size(); ++k) EXPECT_NEAR(dc.branch_flow[k], pf[k], 1e-9) << name;
    }
}

TEST(SolveDc, IslandedIsSingular) {
    EXPECT_THROW(solve_dc_pf(two_bus().with_branch_status(0, false)), SingularMatrix);
}
