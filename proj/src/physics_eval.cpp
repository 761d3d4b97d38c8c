#include "gridfm/physics_eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "gridfm/errors.hpp"

namespace gridfm {

namespace {

FieldStats summarize(std::vector<double> abs_errors, std::vector<double> rel_errors) {
    FieldStats s;
    s.count = abs_errors.size();
    if (!abs_errors.empty()) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (double e : abs_errors) {
            sum += e;
            sum_sq += e * e;
        }
        s.mae = sum / static_cast<double>(abs_errors.size());
        s.rmse = std::sqrt(sum_sq / static_cast<double>(abs_errors.size()));
    }
    if (!rel_errors.empty()) {
        std::sort(rel_errors.begin(), rel_errors.end());
        const std::size_t mid = rel_errors.size() / 2;
        s.median_relative = rel_errors.size() % 2 == 1 ? rel_errors[mid]
                                                       : 0.5 * (rel_errors[mid - 1] + rel_errors[mid]);
    }
    return s;
}

}  // namespace

SceResult sce_loss(std::span<const Feature> truth, std::span<const Feature> pred, double gamma) {
    if (truth.size() != pred.size()) {
        throw DimensionMismatch("sce_loss: " + std::to_string(truth.size()) + " truth rows vs " +
                                std::to_string(pred.size()) + " predicted rows");
    }
    if (!(gamma >= 1.0)) throw InvalidArgument("sce_loss: gamma must be >= 1");
    SceResult out;
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double dot = 0.0;
        double nx = 0.0;
        double nz = 0.0;
        for (std::size_t f = 0; f < 4; ++f) {
            dot += truth[i][f] * pred[i][f];
            nx += truth[i][f] * truth[i][f];
            nz += pred[i][f] * pred[i][f];
        }
        if (nx == 0.0 || nz == 0.0) {
            ++out.degenerate_rows;
            continue;
        }
        // sqrt(a * a) == a exactly, so identical rows give a cosine of exactly 1.
        const double cosine = std::clamp(dot / std::sqrt(nx * nz), -1.0, 1.0);
        sum += std::pow(1.0 - cosine, gamma);
        ++out.rows;
    }
    out.value = out.rows == 0 ? 0.0 : sum / static_cast<double>(out.rows);
    return out;
}

Feature FeatureScaler::apply(const Feature& x) const {
    Feature out{};
    for (std::size_t f = 0; f < 4; ++f) out[f] = (x[f] - mean[f]) / scale[f];
    return out;
}

void ScalerAccumulator::add(const DatasetRecord& record) {
    for (const NodeRow& row : record.nodes) {
        const Feature x{row.p, row.q, row.v, row.delta};
        ++n_;
        for (std::size_t f = 0; f < 4; ++f) {
            const double d = x[f] - mean_[f];
            mean_[f] += d / static_cast<double>(n_);
            m2_[f] += d * (x[f] - mean_[f]);
        }
    }
}

FeatureScaler ScalerAccumulator::finish() const {
    FeatureScaler s;
    if (n_ == 0) return s;
    s.mean = mean_;
    for (std::size_t f = 0; f < 4; ++f) {
        const double sd = std::sqrt(m2_[f] / static_cast<double>(n_));
        s.scale[f] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

FeatureScaler FeatureScaler::fit(std::span<const DatasetRecord> records) {
    ScalerAccumulator acc;
    for (const DatasetRecord& r : records) acc.add(r);
    return acc.finish();
}

PfResidual pf_residual(const AdmittanceMatrix& ybus, std::span<const NodeState> states) {
    PfResidual out;
    out.mismatch = compute_mismatch(ybus, states);
    out.per_bus.resize(states.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        out.per_bus[i] = out.mismatch.dp[i] * out.mismatch.dp[i] + out.mismatch.dq[i] * out.mismatch.dq[i];
        sum += out.per_bus[i];
    }
    out.value = states.empty() ? 0.0 : sum / (2.0 * static_cast<double>(states.size()));
    return out;
}

PfResidual pf_residual(const Network& net, std::span<const NodeState> states) {
    if (states.size() != net.bus_count()) {
        throw DimensionMismatch("pf_residual: state count does not match bus count");
    }
    return pf_residual(build_ybus(net), states);
}

std::vector<Feature> pf_residual_gradient(const Network& net, std::span<const NodeState> states) {
    const std::size_t n = net.bus_count();
    if (states.size() != n) throw DimensionMismatch("pf_residual_gradient: state count does not match bus count");
    const AdmittanceMatrix ybus = build_ybus(net);
    const Mismatch m = compute_mismatch(ybus, states);
    const auto jac = build_jacobian(ybus, states, JacobianLayout::all_buses(n));

    Eigen::VectorXd residual(static_cast<Eigen::Index>(2 * n));
    for (std::size_t i = 0; i < n; ++i) {
        residual[static_cast<Eigen::Index>(i)] = m.dp[i];
        residual[static_cast<Eigen::Index>(n + i)] = m.dq[i];
    }
    const Eigen::VectorXd jt_r = jac.transpose() * residual;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<Feature> grad(n);
    for (std::size_t i = 0; i < n; ++i) {
        grad[i][0] = m.dp[i] * inv_n;
        grad[i][1] = m.dq[i] * inv_n;
        grad[i][2] = -jt_r[static_cast<Eigen::Index>(n + i)] * inv_n;
        grad[i][3] = -jt_r[static_cast<Eigen::Index>(i)] * inv_n;
    }
    return grad;
}

std::vector<BranchFlow> branch_flows(const Network& net, std::span<const NodeState> states) {
    if (states.size() != net.bus_count()) throw DimensionMismatch("branch_flows: state count does not match bus count");
    const auto branches = net.branches();
    std::vector<BranchFlow> out(branches.size(), BranchFlow{Complex{}, Complex{}});
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const Branch& br = branches[k];
        if (!br.in_service) continue;
        const BranchAdmittance y = branch_admittance(br, k);
        const NodeState& sf = states[net.bus_index(br.from_bus)];
        const NodeState& st = states[net.bus_index(br.to_bus)];
        const Complex vf = std::polar(sf.v, sf.delta);
        const Complex vt = std::polar(st.v, st.delta);
        out[k].from = vf * std::conj(y.ff * vf + y.ft * vt);
        out[k].to = vt * std::conj(y.tf * vf + y.tt * vt);
    }
    return out;
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::VoltageHigh: return "voltage_high";
        case ViolationKind::VoltageLow: return "voltage_low";
        case ViolationKind::PgHigh: return "pg_high";
        case ViolationKind::PgLow: return "pg_low";
        case ViolationKind::QgHigh: return "qg_high";
        case ViolationKind::QgLow: return "qg_low";
        case ViolationKind::Overload: return "overload";
    }
    return "unknown";
}

std::vector<Violation> check_feasibility(const Network& net, std::span<const NodeState> states) {
    if (states.size() != net.bus_count()) throw DimensionMismatch("check_feasibility: state count does not match bus count");
    std::vector<Violation> out;
    const auto buses = net.buses();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const double v = states[i].v;
        if (v > buses[i].vmax) out.push_back({ViolationKind::VoltageHigh, i, buses[i].id, v - buses[i].vmax});
        if (v < buses[i].vmin) out.push_back({ViolationKind::VoltageLow, i, buses[i].id, buses[i].vmin - v});
    }

    struct Bounds {
        int count = 0;
        double pmin = 0.0, pmax = 0.0, qmin = 0.0, qmax = 0.0;
    };
    std::vector<Bounds> bounds(buses.size());
    for (const Generator& g : net.generators()) {
        if (!g.in_service) continue;
        Bounds& b = bounds[net.bus_index(g.bus)];
        ++b.count;
        b.pmin += g.pmin;
        b.pmax += g.pmax;
        b.qmin += g.qmin;
        b.qmax += g.qmax;
    }
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const Bounds& b = bounds[i];
        if (b.count == 0) continue;
        const double pg = states[i].p + buses[i].pd;
        const double qg = states[i].q + buses[i].qd;
        const int id = buses[i].id;
        if (pg > b.pmax) out.push_back({ViolationKind::PgHigh, i, id, pg - b.pmax});
        if (pg < b.pmin) out.push_back({ViolationKind::PgLow, i, id, b.pmin - pg});
        if (qg > b.qmax) out.push_back({ViolationKind::QgHigh, i, id, qg - b.qmax});
        if (qg < b.qmin) out.push_back({ViolationKind::QgLow, i, id, b.qmin - qg});
    }

    const auto branches = net.branches();
    const bool any_limit = std::any_of(branches.begin(), branches.end(),
                                       [](const Branch& br) { return br.in_service && br.rate_a > 0.0; });
    if (any_limit) {
        const auto flows = branch_flows(net, states);
        for (std::size_t k = 0; k < branches.size(); ++k) {
            const Branch& br = branches[k];
            if (!br.in_service || br.rate_a <= 0.0) continue;
            const double s = std::max(std::abs(flows[k].from), std::abs(flows[k].to));
            if (s > br.rate_a) out.push_back({ViolationKind::Overload, k, br.from_bus, s - br.rate_a});
        }
    }
    return out;
}

std::vector<Violation> check_branch_limits(const Network& net, std::span<const double> active_flows) {
    const auto branches = net.branches();
    if (active_flows.size() != branches.size()) throw DimensionMismatch("check_branch_limits: flow count does not match branch count");
    std::vector<Violation> out;
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const Branch& br = branches[k];
        if (!br.in_service || br.rate_a <= 0.0) continue;
        const double s = std::abs(active_flows[k]);
        if (s > br.rate_a) out.push_back({ViolationKind::Overload, k, br.from_bus, s - br.rate_a});
    }
    return out;
}

SolutionCheck verify_solved_case(const SolvedCase& solved) {
    const Network& net = solved.net;
    SolutionCheck check;
    const Mismatch m = compute_mismatch(net, solved.states);
    for (std::size_t i = 0; i < m.dp.size(); ++i) {
        const double worst = std::max(std::abs(m.dp[i]), std::abs(m.dq[i]));
        check.max_mismatch = std::isnan(worst) ? INFINITY : std::max(check.max_mismatch, worst);
    }
    const auto injections = net_injections(net);
    const auto buses = net.buses();
    auto deviate = [&check](double a, double b) {
        const double d = std::abs(a - b);
        check.max_spec_deviation = std::isnan(d) ? INFINITY : std::max(check.max_spec_deviation, d);
    };
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const NodeState& s = solved.states[i];
        switch (buses[i].type) {
            case BusType::PQ:
                deviate(s.p, injections[i].p);
                deviate(s.q, injections[i].q);
                break;
            case BusType::PV:
                deviate(s.p, injections[i].p);
                deviate(s.v, net.voltage_setpoint(i));
                break;
            case BusType::Slack:
                deviate(s.v, net.voltage_setpoint(i));
                deviate(s.delta, buses[i].va_init);
                break;
        }
    }
    return check;
}

// ---------------------------------------------------------------------------

void PredictionSet::add(const std::string& case_id, int bus_id, const NodeState& state, const std::string& source) {
    auto [it, inserted] = cases_.try_emplace(case_id);
    if (inserted) {
        it->second.case_id = case_id;
        it->second.source = source;
        order_.push_back(case_id);
    }
    if (!it->second.by_bus.emplace(bus_id, state).second) {
        throw IoError("duplicate prediction for case '" + case_id + "' bus " + std::to_string(bus_id));
    }
}

const Prediction* PredictionSet::find(const std::string& case_id) const {
    const auto it = cases_.find(case_id);
    return it == cases_.end() ? nullptr : &it->second;
}

PredictionSet read_predictions(std::istream& in) {
    PredictionSet set;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw IoError("prediction line " + std::to_string(line_number) + ": malformed JSON");
        }
        try {
            const NodeState s{j.at("p").get<double>(), j.at("q").get<double>(), j.at("v").get<double>(),
                              j.at("delta").get<double>()};
            set.add(j.at("case_id").get<std::string>(), j.at("bus_id").get<int>(), s, j.value("source", std::string{}));
        } catch (const nlohmann::json::exception& e) {
            throw IoError("prediction line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    if (in.bad()) throw IoError("failed reading predictions");
    return set;
}

void write_prediction(std::ostream& out, const std::string& case_id, int bus_id, const NodeState& state,
                      const std::string& source) {
    const nlohmann::ordered_json j{{"case_id", case_id}, {"bus_id", bus_id}, {"p", state.p}, {"q", state.q},
                                   {"v", state.v},       {"delta", state.delta}, {"source", source}};
    out << j.dump() << '\n';
    if (!out) throw IoError("failed writing predictions");
}

Evaluator::Evaluator(EvalConfig config) : config_(std::move(config)) {
    if (!(config_.gamma >= 1.0)) throw InvalidArgument("gamma must be >= 1");
    if (!(config_.lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
}

EvalReport Evaluator::evaluate(const DatasetRecord& record, const Prediction& prediction) {
    if (prediction.by_bus.size() != record.nodes.size()) {
        throw ShapeMismatch("case '" + record.case_id + "': " + std::to_string(prediction.by_bus.size()) +
                            " predicted buses, record has " + std::to_string(record.nodes.size()));
    }
    std::vector<NodeState> predicted;
    predicted.reserve(record.nodes.size());
    for (const NodeRow& row : record.nodes) {
        const auto it = prediction.by_bus.find(row.bus_id);
        if (it == prediction.by_bus.end()) {
            throw ShapeMismatch("case '" + record.case_id + "': no prediction for bus " + std::to_string(row.bus_id));
        }
        const NodeState& s = it->second;
        if (!std::isfinite(s.p) || !std::isfinite(s.q) || !std::isfinite(s.v) || !std::isfinite(s.delta)) {
            throw ShapeMismatch("case '" + record.case_id + "': non-finite prediction at bus " + std::to_string(row.bus_id));
        }
        predicted.push_back(s);
    }

    EvalReport report;
    report.case_id = record.case_id;
    std::array<std::vector<double>, 4> abs_errors;
    std::array<std::vector<double>, 4> rel_errors;
    std::vector<Feature> truth_rows;
    std::vector<Feature> pred_rows;
    for (std::size_t i = 0; i < record.nodes.size(); ++i) {
        const FieldMask mask = i < record.mask.size() ? record.mask[i] : FieldMask{};
        if (!mask.any()) continue;
        const NodeRow& row = record.nodes[i];
        const Feature truth{row.p, row.q, row.v, row.delta};
        const Feature pred = to_feature(predicted[i]);
        for (NodeField f : kNodeFields) {
            if (!mask.test(f)) continue;
            const auto k = static_cast<std::size_t>(f);
            const double err = std::abs(pred[k] - truth[k]);
            abs_errors[k].push_back(err);
            if (std::abs(truth[k]) > kRelativeErrorFloor) rel_errors[k].push_back(err / std::abs(truth[k]));
        }
        truth_rows.push_back(config_.scaler ? config_.scaler->apply(truth) : truth);
        pred_rows.push_back(config_.scaler ? config_.scaler->apply(pred) : pred);
    }
    for (std::size_t k = 0; k < 4; ++k) report.fields[k] = summarize(abs_errors[k], rel_errors[k]);
    report.sce = sce_loss(truth_rows, pred_rows, config_.gamma);

    const Network net = network_from_record(record);
    report.pf_residual = pf_residual(net, predicted).value;
    report.total = report.sce.value + config_.lambda * report.pf_residual;
    report.violations = check_feasibility(net, predicted);

    ++cases_;
    sum_sce_ += report.sce.value;
    sum_pf_ += report.pf_residual;
    max_pf_ = std::max(max_pf_, report.pf_residual);
    sum_total_ += report.total;
    degenerate_ += report.sce.degenerate_rows;
    for (const Violation& v : report.violations) ++violations_[std::string(to_string(v.kind))];
    for (std::size_t k = 0; k < 4; ++k) {
        abs_errors_[k].insert(abs_errors_[k].end(), abs_errors[k].begin(), abs_errors[k].end());
        rel_errors_[k].insert(rel_errors_[k].end(), rel_errors[k].begin(), rel_errors[k].end());
    }
    return report;
}

AggregateReport Evaluator::aggregate() const {
    AggregateReport out;
    out.cases = cases_;
    for (std::size_t k = 0; k < 4; ++k) out.fields[k] = summarize(abs_errors_[k], rel_errors_[k]);
    if (cases_ > 0) {
        const auto n = static_cast<double>(cases_);
        out.mean_sce = sum_sce_ / n;
        out.mean_pf_residual = sum_pf_ / n;
        out.mean_total = sum_total_ / n;
    }
    out.max_pf_residual = max_pf_;
    out.degenerate_rows = degenerate_;
    out.violation_counts = violations_;
    return out;
}

AggregateReport evaluate_predictions(RecordReader& dataset, const PredictionSet& predictions,
                                     const EvalConfig& config,
                                     const std::function<void(const EvalReport&)>& sink) {
    Evaluator evaluator(config);
    std::set<std::string> seen;
    while (auto record = dataset.next()) {
        const Prediction* prediction = predictions.find(record->case_id);
        if (prediction == nullptr) continue;
        seen.insert(record->case_id);
        const EvalReport report = evaluator.evaluate(*record, *prediction);
        if (sink) sink(report);
    }
    for (const std::string& id : predictions.case_ids()) {
        if (!seen.contains(id)) throw MissingCase(id);
    }
    return evaluator.aggregate();
}

}  // namespace gridfm
