#include "gridfm/contingency.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "gridfm/dataset.hpp"
#include "gridfm/errors.hpp"
#include "gridfm/topology.hpp"

namespace gridfm {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(r);
}

NkEnumerator::NkEnumerator(std::vector<std::size_t> candidates, int k)
    : candidates_(std::move(candidates)), total_(0) {
    if (k < 1 || static_cast<std::size_t>(k) > candidates_.size()) {
        throw InvalidArgument("k must lie in [1, " + std::to_string(candidates_.size()) + "], got " +
                              std::to_string(k));
    }
    positions_.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < positions_.size(); ++i) positions_[i] = i;
    total_ = binomial(candidates_.size(), positions_.size());
}

bool NkEnumerator::next(OutageSet& out) {
    if (exhausted_) return false;
    out.index = produced_;
    out.branches.resize(positions_.size());
    for (std::size_t i = 0; i < positions_.size(); ++i) out.branches[i] = candidates_[positions_[i]];
    ++produced_;

    const std::size_t k = positions_.size();
    const std::size_t m = candidates_.size();
    std::size_t i = k;
    while (i > 0 && positions_[i - 1] == m - k + (i - 1)) --i;
    if (i == 0) {
        exhausted_ = true;
    } else {
        ++positions_[i - 1];
        for (std::size_t j = i; j < k; ++j) positions_[j] = positions_[j - 1] + 1;
    }
    return true;
}

std::optional<OutageSet> NkEnumerator::next() {
    OutageSet out;
    if (!next(out)) return std::nullopt;
    return out;
}

NkEnumerator enumerate_nk(const Network& net, int k) {
    std::vector<std::size_t> candidates;
    const auto branches = net.branches();
    for (std::size_t i = 0; i < branches.size(); ++i) {
        if (branches[i].in_service) candidates.push_back(i);
    }
    return NkEnumerator(std::move(candidates), k);
}

std::string_view to_string(Engine engine) { return engine == Engine::AC ? "ac" : "dc"; }

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::Converged: return "CONVERGED";
        case Outcome::Diverged: return "DIVERGED";
        case Outcome::Islanded: return "ISLANDED";
    }
    return "";
}

Engine engine_from_string(std::string_view text) {
    if (text == "ac" || text == "AC") return Engine::AC;
    if (text == "dc" || text == "DC") return Engine::DC;
    throw InvalidArgument("unknown engine '" + std::string(text) + "' (expected ac or dc)");
}

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::ordered_json;

Outcome outcome_from_string(std::string_view text) {
    if (text == "CONVERGED") return Outcome::Converged;
    if (text == "DIVERGED") return Outcome::Diverged;
    if (text == "ISLANDED") return Outcome::Islanded;
    throw IoError("checkpoint: unknown outcome '" + std::string(text) + "'");
}

ViolationKind violation_kind_from_string(std::string_view text) {
    for (ViolationKind k : {ViolationKind::VoltageHigh, ViolationKind::VoltageLow, ViolationKind::PgHigh,
                            ViolationKind::PgLow, ViolationKind::QgHigh, ViolationKind::QgLow,
                            ViolationKind::Overload}) {
        if (to_string(k) == text) return k;
    }
    throw IoError("checkpoint: unknown violation kind '" + std::string(text) + "'");
}

double max_dc_gap(const Network& net, std::span<const NodeState> states) {
    const DcSolution dc = solve_dc_pf(net);
    const std::vector<BranchFlow> ac = branch_flows(net, states);
    double gap = 0.0;
    const auto branches = net.branches();
    for (std::size_t i = 0; i < branches.size(); ++i) {
        if (branches[i].in_service) gap = std::max(gap, std::abs(ac[i].from.real() - dc.branch_flow[i]));
    }
    return gap;
}

OutageResult evaluate_outage(const Network& base, const OutageSet& outage, const ScreenOptions& options) {
    const auto t0 = Clock::now();
    OutageResult result{.index = outage.index, .branches = outage.branches};
    std::vector<Branch> branches(base.branches().begin(), base.branches().end());
    for (std::size_t b : outage.branches) branches[b].in_service = false;
    const Network net(base.name(), base.base_mva(), std::vector<Bus>(base.buses().begin(), base.buses().end()),
                      std::move(branches),
                      std::vector<Generator>(base.generators().begin(), base.generators().end()));

    if (!slack_spans_all_buses(net)) {
        result.outcome = Outcome::Islanded;
    } else if (options.engine == Engine::DC) {
        try {
            const DcSolution dc = solve_dc_pf(net);
            result.violations = check_branch_limits(net, dc.branch_flow);
        } catch (const SingularMatrix&) {
            result.outcome = Outcome::Diverged;
        }
    } else {
        try {
            const SolvedCase solved = solve_ac_pf(net, options.solver);
            result.iterations = solved.iterations;
            result.violations = check_feasibility(net, solved.states);
            if (options.compare_dc) result.dc_flow_gap = max_dc_gap(net, solved.states);
        } catch (const NoConvergence& e) {
            result.outcome = Outcome::Diverged;
            result.iterations = e.iterations();
        } catch (const SingularJacobian&) {
            result.outcome = Outcome::Diverged;
        }
    }
    result.solve_time = std::chrono::duration<double>(Clock::now() - t0).count();
    return result;
}

void validate_outage(const Network& net, const OutageSet& outage) {
    const auto branches = net.branches();
    std::vector<std::size_t> sorted = outage.branches;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidArgument("outage " + std::to_string(outage.index) + " repeats a branch");
    }
    for (std::size_t b : sorted) {
        if (b >= branches.size() || !branches[b].in_service) {
            throw InvalidArgument("outage " + std::to_string(outage.index) + " names branch " + std::to_string(b) +
                                  ", which is not an in-service branch");
        }
    }
}

json result_to_json(const OutageResult& r) {
    json v = json::array();
    for (const Violation& x : r.violations) {
        v.push_back({{"kind", to_string(x.kind)}, {"element", x.element}, {"bus_id", x.bus_id},
                     {"magnitude", x.magnitude}});
    }
    json j = {{"kind", "result"},       {"index", r.index},
              {"branches", r.branches}, {"outcome", to_string(r.outcome)},
              {"iterations", r.iterations}, {"solve_time", r.solve_time},
              {"violations", std::move(v)}};
    if (r.dc_flow_gap) j["dc_flow_gap"] = *r.dc_flow_gap;
    return j;
}

OutageResult result_from_json(const json& j) {
    OutageResult r;
    r.index = j.at("index").get<std::uint64_t>();
    r.branches = j.at("branches").get<std::vector<std::size_t>>();
    r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    r.iterations = j.at("iterations").get<int>();
    r.solve_time = j.at("solve_time").get<double>();
    for (const json& v : j.at("violations")) {
        r.violations.push_back(Violation{.kind = violation_kind_from_string(v.at("kind").get<std::string>()),
                                         .element = v.at("element").get<std::size_t>(),
                                         .bus_id = v.at("bus_id").get<int>(),
                                         .magnitude = v.at("magnitude").get<double>()});
    }
    if (j.contains("dc_flow_gap")) r.dc_flow_gap = j.at("dc_flow_gap").get<double>();
    return r;
}

json checkpoint_header(const Network& net, const ScreenOptions& options) {
    return {{"kind", "header"},
            {"case", net.name()},
            {"topology_id", topology_id(net)},
            {"engine", to_string(options.engine)},
            {"compare_dc", options.compare_dc}};
}

// Results up to the last commit marker. Anything after it was cut off
// mid-chunk and is recomputed.
std::vector<OutageResult> read_checkpoint(const std::filesystem::path& path, const json& expected_header) {
    std::ifstream in(path);
    if (!in) return {};
    std::vector<OutageResult> committed;
    std::vector<OutageResult> pending;
    std::string line;
    bool header_seen = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            break;  // torn final line
        }
        try {
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "header") {
                if (j != expected_header) {
                    throw IoError("checkpoint " + path.string() + " was written for a different screen");
                }
                header_seen = true;
            } else if (kind == "result") {
                pending.push_back(result_from_json(j));
            } else if (kind == "commit") {
                if (j.at("count").get<std::size_t>() != committed.size() + pending.size()) {
                    throw IoError("checkpoint " + path.string() + ": commit count does not match line " +
                                  std::to_string(lineno));
                }
                std::move(pending.begin(), pending.end(), std::back_inserter(committed));
                pending.clear();
            }
        } catch (const json::exception& e) {
            throw IoError("checkpoint " + path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!header_seen && !committed.empty()) throw IoError("checkpoint " + path.string() + " has no header");
    return committed;
}

class CheckpointWriter {
public:
    CheckpointWriter(const std::filesystem::path& path, const json& header,
                     std::span<const OutageResult> committed)
        : out_(path, std::ios::trunc) {
        if (!out_) throw IoError("cannot open checkpoint " + path.string());
        out_ << header.dump() << '\n';
        for (const OutageResult& r : committed) out_ << result_to_json(r).dump() << '\n';
        count_ = committed.size();
        commit();
    }

    void append(std::span<const OutageResult> results) {
        for (const OutageResult& r : results) out_ << result_to_json(r).dump() << '\n';
        count_ += results.size();
        commit();
    }

private:
    void commit() {
        out_ << json{{"kind", "commit"}, {"count", count_}}.dump() << '\n';
        out_.flush();
    }

    std::ofstream out_;
    std::size_t count_ = 0;
};

void summarize(ContingencyReport& report, std::size_t worst_count) {
    report.converged = report.diverged = report.islanded = 0;
    std::vector<double> gaps;
    report.worst.clear();
    for (const OutageResult& r : report.outcomes) {
        switch (r.outcome) {
            case Outcome::Converged: ++report.converged; break;
            case Outcome::Diverged: ++report.diverged; break;
            case Outcome::Islanded: ++report.islanded; break;
        }
        for (const Violation& v : r.violations) report.worst.push_back({r.index, v});
        if (r.dc_flow_gap) gaps.push_back(*r.dc_flow_gap);
    }
    std::stable_sort(report.worst.begin(), report.worst.end(), [](const WorstViolation& a, const WorstViolation& b) {
        return a.violation.magnitude > b.violation.magnitude;
    });
    if (report.worst.size() > worst_count) report.worst.resize(worst_count);
    report.dc_flow_gap_quantiles.clear();
    if (!gaps.empty()) {
        std::sort(gaps.begin(), gaps.end());
        report.dc_flow_gap_quantiles = {gaps.front(), gaps[gaps.size() / 2], gaps.back()};
    }
}

void check_base_case(const Network& net, const ScreenOptions& options) {
    try {
        if (options.engine == Engine::AC) {
            solve_ac_pf(net, options.solver);
        } else {
            solve_dc_pf(net);
        }
    } catch (const InputError&) {
        throw;
    } catch (const Error& e) {
        throw BaseCaseUnsolvable(std::string("base case does not solve: ") + e.what());
    }
}

}  // namespace

ContingencyReport screen(const Network& net, const OutageSource& outages, const ScreenOptions& options) {
    options.solver.validate();
    if (options.checkpoint_every == 0) throw InvalidArgument("checkpoint interval must be positive");
    check_base_case(net, options);

    const auto t0 = Clock::now();
    ContingencyReport report;
    report.engine = options.engine;

    std::optional<CheckpointWriter> writer;
    if (options.checkpoint) {
        const json header = checkpoint_header(net, options);
        if (options.resume) report.outcomes = read_checkpoint(*options.checkpoint, header);
        writer.emplace(*options.checkpoint, header, report.outcomes);
    }

    OutageSet scratch;
    for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
        if (!outages(scratch)) throw IoError("checkpoint holds more scenarios than the outage source");
        if (scratch.index != report.outcomes[i].index || scratch.branches != report.outcomes[i].branches) {
            throw IoError("checkpoint does not match the outage source at scenario " + std::to_string(i));
        }
    }

    const unsigned workers = std::max(1u, options.workers);
    const std::size_t chunk =
        options.checkpoint ? static_cast<std::size_t>(options.checkpoint_every) : std::size_t{4096};
    std::uint64_t budget = options.stop_after.value_or(std::numeric_limits<std::uint64_t>::max());
    std::size_t processed = 0;
    std::vector<OutageSet> pending;
    std::vector<OutageResult> results;
    bool exhausted = false;

    while (!exhausted && budget > 0) {
        pending.clear();
        while (pending.size() < chunk && budget > 0) {
            OutageSet next;
            if (!outages(next)) {
                exhausted = true;
                break;
            }
            validate_outage(net, next);
            pending.push_back(std::move(next));
            --budget;
        }
        if (pending.empty()) break;

        results.assign(pending.size(), OutageResult{});
        if (workers == 1) {
            for (std::size_t i = 0; i < pending.size(); ++i) results[i] = evaluate_outage(net, pending[i], options);
        } else {
            std::atomic<std::size_t> cursor{0};
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t i = cursor++; i < pending.size(); i = cursor++) {
                        results[i] = evaluate_outage(net, pending[i], options);
                    }
                });
            }
        }
        if (writer) writer->append(results);
        processed += results.size();
        std::move(results.begin(), results.end(), std::back_inserter(report.outcomes));
    }
    if (!exhausted) {
        OutageSet probe;
        exhausted = !outages(probe);
    }
    report.complete = exhausted;

    summarize(report, options.worst_count);
    report.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
    report.scenarios_per_second =
        report.wall_time > 0.0 ? static_cast<double>(processed) / report.wall_time : 0.0;
    return report;
}

ContingencyReport screen(const Network& net, NkEnumerator& outages, const ScreenOptions& options) {
    return screen(net, OutageSource([&outages](OutageSet& out) { return outages.next(out); }), options);
}

ContingencyReport screen(const Network& net, std::span<const OutageSet> outages, const ScreenOptions& options) {
    std::size_t cursor = 0;
    return screen(net, OutageSource([&](OutageSet& out) {
                      if (cursor == outages.size()) return false;
                      out = outages[cursor++];
                      return true;
                  }),
                  options);
}

bool same_outcomes(const ContingencyReport& a, const ContingencyReport& b) {
    if (a.engine != b.engine || a.complete != b.complete || a.outcomes.size() != b.outcomes.size()) return false;
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        const OutageResult& x = a.outcomes[i];
        const OutageResult& y = b.outcomes[i];
        if (x.index != y.index || x.branches != y.branches || x.outcome != y.outcome ||
            x.iterations != y.iterations || x.dc_flow_gap != y.dc_flow_gap ||
            x.violations.size() != y.violations.size()) {
            return false;
        }
        for (std::size_t v = 0; v < x.violations.size(); ++v) {
            const Violation& p = x.violations[v];
            const Violation& q = y.violations[v];
            if (p.kind != q.kind || p.element != q.element || p.bus_id != q.bus_id || p.magnitude != q.magnitude) {
                return false;
            }
        }
    }
    return a.converged == b.converged && a.diverged == b.diverged && a.islanded == b.islanded;
}

namespace {

json branch_ids(const Network& net, std::span<const std::size_t> branches) {
    json out = json::array();
    for (std::size_t b : branches) {
        const Branch& br = net.branches()[b];
        out.push_back({{"index", b}, {"from", br.from_bus}, {"to", br.to_bus}});
    }
    return out;
}

}  // namespace

std::string report_json(const ContingencyReport& report, const Network& net) {
    json j;
    j["case"] = net.name();
    j["engine"] = to_string(report.engine);
    j["complete"] = report.complete;
    j["scenarios"] = report.outcomes.size();
    j["counts"] = {{"CONVERGED", report.converged}, {"DIVERGED", report.diverged}, {"ISLANDED", report.islanded}};
    json worst = json::array();
    for (const WorstViolation& w : report.worst) {
        worst.push_back({{"scenario", w.scenario},
                         {"kind", to_string(w.violation.kind)},
                         {"element", w.violation.element},
                         {"bus_id", w.violation.bus_id},
                         {"magnitude", w.violation.magnitude}});
    }
    j["worst_violations"] = std::move(worst);
    if (!report.dc_flow_gap_quantiles.empty()) {
        j["dc_flow_gap"] = {{"min", report.dc_flow_gap_quantiles[0]},
                            {"median", report.dc_flow_gap_quantiles[1]},
                            {"max", report.dc_flow_gap_quantiles[2]}};
    }
    json outcomes = json::array();
    for (const OutageResult& r : report.outcomes) {
        outcomes.push_back({{"scenario", r.index},
                            {"branches", branch_ids(net, r.branches)},
                            {"outcome", to_string(r.outcome)},
                            {"violations", r.violations.size()}});
    }
    j["outcomes"] = std::move(outcomes);
    return j.dump(2);
}

void write_report_table(std::ostream& out, const ContingencyReport& report, const Network& net) {
    out << fmt::format("{} {} screen: {} scenarios{}\n", net.name(), to_string(report.engine),
                       report.outcomes.size(), report.complete ? "" : " (partial)");
    out << fmt::format("  CONVERGED {:>8}\n  DIVERGED  {:>8}\n  ISLANDED  {:>8}\n", report.converged,
                       report.diverged, report.islanded);
    out << fmt::format("  wall time {:.3f} s, {:.1f} scenarios/s\n", report.wall_time, report.scenarios_per_second);
    if (!report.dc_flow_gap_quantiles.empty()) {
        out << fmt::format("  |P_ac - P_dc| min {:.3e} median {:.3e} max {:.3e} pu\n", report.dc_flow_gap_quantiles[0],
                           report.dc_flow_gap_quantiles[1], report.dc_flow_gap_quantiles[2]);
    }
    if (!report.worst.empty()) {
        out << "  worst violations:\n";
        out << fmt::format("    {:>8}  {:<13} {:>7} {:>7}  {:>10}\n", "scenario", "kind", "element", "bus",
                           "magnitude");
        for (const WorstViolation& w : report.worst) {
            out << fmt::format("    {:>8}  {:<13} {:>7} {:>7}  {:>10.5f}\n", w.scenario, to_string(w.violation.kind),
                               w.violation.element, w.violation.bus_id, w.violation.magnitude);
        }
    }
}

}  // namespace gridfm
