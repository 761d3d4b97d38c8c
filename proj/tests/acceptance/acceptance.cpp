// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "bridges.hpp"
#include "compare.hpp"
#include "fuzz.hpp"
#include "gridfm/case_format.hpp"
#include "gridfm/contingency.hpp"
#include "gridfm/dataset.hpp"
#include "gridfm/errors.hpp"
#include "gridfm/masking.hpp"
#include "gridfm/physics_eval.hpp"
#include "gridfm/powerflow.hpp"
#include "gridfm/scenarios.hpp"
#include "test_data.hpp"

namespace fs = std::filesystem;
using namespace gridfm;
using gridfm::testing::case_path;
using gridfm::testing::load_test_case;
using gridfm::testing::read_text;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = true;
    std::string detail;
};

const std::vector<std::string> kIeee{"case14", "case30", "case57", "case118"};

std::vector<NodeState> random_state(const Network& net, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<NodeState> s = initial_states(net, false);
    for (NodeState& x : s) {
        x.p = u(gen);
        x.q = 0.5 * u(gen);
        x.v = 1.0 + 0.1 * u(gen);
        x.delta += 0.3 * u(gen);
    }
    return s;
}

// ---------------------------------------------------------------------------

Verdict solver_oracle() {
    Verdict v;
    std::vector<std::string> parts;
    for (const std::string& name : kIeee) {
        const auto t0 = Clock::now();
        const Network net = load_test_case(name);
        const SolvedCase solved = solve_ac_pf(net);
        const double secs = seconds_since(t0);
        const auto ref = gridfm::testing::reference(name + "_pf.json");
        double dv = 0.0;
        double da = 0.0;
        for (std::size_t k = 0; k < ref["bus_id"].size(); ++k) {
            const std::size_t i = net.bus_index(ref["bus_id"][k].get<int>());
            dv = std::max(dv, std::abs(solved.states[i].v - ref["vm"][k].get<double>()));
            da = std::max(da, std::abs(solved.states[i].delta - ref["va_rad"][k].get<double>()));
        }
        const bool ok = dv <= 1e-6 && da <= 1e-8 && secs < 1.0;
        v.pass = v.pass && ok;
        parts.push_back(fmt::format("{} |dv| {:.1e} |da| {:.1e} {:.3f}s", name, dv, da, secs));
    }
    v.detail = fmt::format("{}", fmt::join(parts, "; "));
    return v;
}

Verdict dataset_self_consistency() {
    const auto t0 = Clock::now();
    std::size_t records = 0;
    std::size_t failed = 0;
    double worst = 0.0;
    for (std::size_t c = 0; c < kIeee.size(); ++c) {
        const Network net = load_test_case(kIeee[c]);
        const PerturbationSpec spec{.topology_drop_k = static_cast<int>(c % 2), .seed = 1000 + c, .count = 2500};
        generate_dataset(net, spec, GenerateOptions{}, [&](GeneratedCase&& g) {
            // Check the record as emitted: serialized, parsed back, rebuilt.
            const DatasetRecord r = from_json_line(to_json_line(to_record(g, net, spec)));
            const SolvedCase back = solved_case_from_record(r);
            const Mismatch m = compute_mismatch(back.net, back.states);
            const double mm = max_specified_mismatch(back.net, m);
            worst = std::max(worst, mm);
            if (!(mm <= 1e-8)) ++failed;
            ++records;
        });
    }
    const double secs = seconds_since(t0);
    return {records == 10000 && failed == 0 && secs < 600.0,
            fmt::format("{} records, {} above 1e-8, worst mismatch {:.2e}, {:.1f}s single-threaded", records, failed,
                        worst, secs)};
}

Verdict jacobian_fd() {
    double worst = 0.0;
    std::size_t states = 0;
    for (const std::string& name : kIeee) {
        const Network net = load_test_case(name);
        const JacobianLayout layout = JacobianLayout::for_network(net);
        const AdmittanceMatrix y = build_ybus(net);
        const std::size_t na = layout.angle_buses.size();
        std::mt19937_64 gen(std::hash<std::string>{}(name) ^ 0x5eedu);
        for (int trial = 0; trial < 100; ++trial, ++states) {
            const std::vector<NodeState> s = random_state(net, gen);
            const Eigen::MatrixXd j = Eigen::MatrixXd(build_jacobian(y, s, layout));
            const double h = 1e-6;
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
                const Mismatch mp = compute_mismatch(y, plus);
                const Mismatch mm = compute_mismatch(y, minus);
                for (std::size_t r = 0; r < layout.size(); ++r) {
                    const double fd = r < na ? -(mp.dp[layout.angle_buses[r]] - mm.dp[layout.angle_buses[r]]) / (2 * h)
                                             : -(mp.dq[layout.magnitude_buses[r - na]] -
                                                 mm.dq[layout.magnitude_buses[r - na]]) /
                                                   (2 * h);
                    worst = std::max(worst, std::abs(j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - fd));
                }
            }
        }
    }
    return {worst <= 1e-5, fmt::format("{} random states over 4 cases, max |J - FD| {:.2e}", states, worst)};
}

Verdict enumeration_counts() {
    std::vector<std::size_t> candidates(1000);
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
    NkEnumerator k1(candidates, 1);
    OutageSet s;
    std::uint64_t n1 = 0;
    while (k1.next(s)) ++n1;
    const auto t0 = Clock::now();
    NkEnumerator k2(candidates, 2);
    std::uint64_t n2 = 0;
    while (k2.next(s)) ++n2;
    const double secs = seconds_since(t0);
    return {n1 == 1000 && n2 == 499500 && secs < 1.0,
            fmt::format("m=1000: k=1 -> {}, k=2 -> {} streamed in {:.3f}s", n1, n2, secs)};
}

Verdict contingency_bridges() {
    const Network net = load_test_case("case14");
    const auto t0 = Clock::now();
    NkEnumerator outages = enumerate_nk(net, 1);
    const ContingencyReport report = screen(net, outages, ScreenOptions{});
    const double secs = seconds_since(t0);
    std::set<std::size_t> islanded;
    for (const OutageResult& r : report.outcomes) {
        if (r.outcome == Outcome::Islanded) islanded.insert(r.branches[0]);
    }
    const std::set<std::size_t> bridges = gridfm::testing::bridge_branches(net);
    return {report.outcomes.size() == 20 && islanded == bridges && secs < 5.0,
            fmt::format("{} scenarios, islanded {{{}}}, oracle bridges {{{}}}, {:.3f}s", report.outcomes.size(),
                        fmt::join(islanded, ","), fmt::join(bridges, ","), secs)};
}

Verdict parser_round_trip() {
    std::vector<std::string> bad;
    std::size_t cases = 0;
    for (const auto& entry : fs::directory_iterator(gridfm::testing::data_dir() / "cases")) {
        if (entry.path().extension() != ".m") continue;
        const Network a = load_case(entry.path().string());
        const Network b = parse_case(write_case(a));
        const std::string diff = gridfm::testing::network_difference(a, b, 1e-12);
        if (!diff.empty()) bad.push_back(entry.path().filename().string() + ": " + diff);
        ++cases;
    }
    const std::string seed14 = read_text(case_path("case14"));
    const std::string seed30 = read_text(case_path("case30"));
    std::mt19937_64 gen(99);
    std::size_t crashes = 0;
    std::size_t accepted = 0;
    constexpr int kFuzz = 100000;
    for (int i = 0; i < kFuzz; ++i) {
        const std::string input = gridfm::testing::fuzz_input(gen, i % 2 ? seed14 : seed30);
        try {
            parse_case(input);
            ++accepted;
        } catch (const gridfm::Error&) {
        } catch (...) {
            ++crashes;
        }
    }
    return {bad.empty() && cases >= 6 && crashes == 0,
            fmt::format("{} corpus files round-trip at 1e-12{}; fuzz {} inputs, {} accepted, {} crashes", cases,
                        bad.empty() ? "" : " except " + fmt::format("{}", fmt::join(bad, ", ")), kFuzz, accepted,
                        crashes)};
}

Verdict mask_counting() {
    const SolvedCase solved = solve_ac_pf(load_test_case("case14"));
    const MaskedRecord pf = apply_mask(solved, MaskSpec{}, "case14");
    std::size_t masked = 0;
    for (const FieldMask& m : pf.mask) masked += static_cast<std::size_t>(m.count());
    const DatasetRecord base = make_record(solved, "case14:000000", {});
    const MaskSpec spec{.mode = MaskMode::Random, .ratio = 0.3, .seed = 2024};
    MaskStatistics stats;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        DatasetRecord r = base;
        r.case_id = scenario_case_id(solved.net, i);
        stats.add(apply_mask(std::move(r), spec));
    }
    const double ratio = stats.overall_ratio();
    return {masked == 28 && std::abs(ratio - 0.3) <= 0.01,
            fmt::format("PF_TASK case14 masks {} entries; RANDOM 0.3 over {} records -> {:.4f}", masked,
                        stats.records, ratio)};
}

Verdict loss_identities() {
    const std::vector<Feature> x{{1.0, 2.0, 3.0, 4.0}, {0.3, -0.1, 1.02, -0.2}};
    const std::vector<Feature> a{{1.0, 0.0, 0.0, 0.0}};
    const std::vector<Feature> b{{0.0, 1.0, 0.0, 0.0}};
    const std::vector<Feature> c{{-1.0, 0.0, 0.0, 0.0}};
    const double s_id = sce_loss(x, x, 1.0).value;
    const double s_orth = sce_loss(a, b, 1.0).value;
    const double s_anti = sce_loss(a, c, 2.0).value;
    const bool sce_ok = s_id == 0.0 && s_orth == 1.0 && s_anti == 4.0;

    double worst_pf = 0.0;
    for (const std::string& name : kIeee) {
        const Network net = load_test_case(name);
        worst_pf = std::max(worst_pf, pf_residual(net, solve_ac_pf(net).states).value);
    }

    double worst_grad = 0.0;
    const Network net = load_test_case("case14");
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 5; ++trial) {
        const std::vector<NodeState> s = random_state(net, gen);
        const auto grad = pf_residual_gradient(net, s);
        const double h = 1e-6;
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (std::size_t k = 0; k < 4; ++k) {
                auto plus = s;
                auto minus = s;
                Feature xp = to_feature(plus[i]);
                Feature xm = to_feature(minus[i]);
                xp[k] += h;
                xm[k] -= h;
                plus[i] = from_feature(xp);
                minus[i] = from_feature(xm);
                const double fd = (pf_residual(net, plus).value - pf_residual(net, minus).value) / (2 * h);
                worst_grad = std::max(worst_grad, std::abs(grad[i][k] - fd));
            }
        }
    }
    return {sce_ok && worst_pf <= 1e-16 && worst_grad <= 1e-5,
            fmt::format("sce {{{}, {}, {}}}; max pf_residual of solved cases {:.1e}; max |grad - FD| {:.1e}", s_id,
                        s_orth, s_anti, worst_pf, worst_grad)};
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

int gridfm_exe(const std::string& args, const fs::path& log) {
    const std::string cmd = fmt::format("{} {} >{} 2>&1", quoted(GRIDFM_EXE), args, quoted(log));
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict replay_identical() {
    const fs::path dir = fs::temp_directory_path() / "gridfm_acceptance_replay";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path log = dir / "log.txt";
    const std::vector<std::pair<std::string, std::string>> runs{
        {"d.jsonl", fmt::format("generate --case {} --count 200 --seed 31 --drop-k 1 --workers 2 --out {}",
                                quoted(case_path("case30")), quoted(dir / "d.jsonl"))},
        {"m.jsonl", fmt::format("mask --in {} --out {} --mode random --ratio 0.25 --seed 8", quoted(dir / "d.jsonl"),
                                quoted(dir / "m.jsonl"))},
    };
    std::vector<std::string> parts;
    bool ok = true;
    for (const auto& [file, args] : runs) {
        if (gridfm_exe(args, log) != 0) return {false, file + " run failed: " + read_text(log)};
        const fs::path copy = dir / ("replayed_" + file);
        const fs::path manifest = dir / (file + ".manifest.json");
        const int code =
            gridfm_exe(fmt::format("replay --manifest {} --out {}", quoted(manifest), quoted(copy)), log);
        const bool same = code == 0 && fs::exists(copy) && read_text(copy) == read_text(dir / file);
        ok = ok && same;
        parts.push_back(fmt::format("{} {}", file, same ? "byte-identical" : "DIFFERS"));
    }
    fs::remove_all(dir);
    return {ok, fmt::format("replay from manifest: {}", fmt::join(parts, ", "))};
}

Verdict scaling_report() {
    const fs::path dir = fs::temp_directory_path() / "gridfm_acceptance_bench";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path out = dir / "bench.json";
    const std::string cases = fmt::format("{},{},{}", case_path("case14").string(), case_path("case118").string(),
                                          case_path("case1354pegase").string());
    if (gridfm_exe(fmt::format("bench --cases '{}' --reps 10 --out {}", cases, quoted(out)), dir / "log.txt") != 0) {
        return {false, "bench failed: " + read_text(dir / "log.txt")};
    }
    const auto j = nlohmann::json::parse(read_text(out));
    std::vector<std::string> parts;
    for (const auto& row : j["cases"]) {
        parts.push_back(fmt::format("{} buses {:.3f} ms", row["buses"].get<int>(),
                                    1e3 * row["ac"]["mean_s"].get<double>()));
    }
    const bool increasing = j["ac_strictly_increasing"].get<bool>();
    const bool slope = j["ac_loglog_slope"].is_number();
    fs::remove_all(dir);
    return {increasing && slope,
            fmt::format("AC mean {}; log-log slope {}", fmt::join(parts, " < "),
                        slope ? fmt::format("{:.3f}", j["ac_loglog_slope"].get<double>()) : "missing")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"solver-oracle equivalence", solver_oracle},
        {"physics self-consistency", dataset_self_consistency},
        {"jacobian correctness", jacobian_fd},
        {"enumeration arithmetic", enumeration_counts},
        {"contingency classification", contingency_bridges},
        {"parser round-trips", parser_round_trip},
        {"mask-protocol counting", mask_counting},
        {"loss identities", loss_identities},
        {"determinism and reproducibility", replay_identical},
        {"scaling report", scaling_report},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failures;
        std::cout << fmt::format("{} {:>2} {}: {}", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail)
                  << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failures, criteria.size()) << std::endl;
    return failures == 0 ? 0 : 1;
}
