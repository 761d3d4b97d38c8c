#include "cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "gridfm/errors.hpp"
#include "gridfm/powerflow.hpp"

namespace gridfm::cli {

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_once(F&& f) {
    const auto t0 = Clock::now();
    f();
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

Timing summarize_times(std::span<const double> seconds) {
    Timing t;
    if (seconds.empty()) return t;
    const double n = static_cast<double>(seconds.size());
    t.mean = std::accumulate(seconds.begin(), seconds.end(), 0.0) / n;
    if (seconds.size() > 1) {
        double ss = 0.0;
        for (double s : seconds) ss += (s - t.mean) * (s - t.mean);
        t.stdev = std::sqrt(ss / (n - 1.0));
    }
    return t;
}

bool BenchResult::ac_strictly_increasing() const {
    std::vector<const BenchRow*> sorted;
    for (const BenchRow& r : rows) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->buses < b->buses; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (!(sorted[i]->ac.mean > sorted[i - 1]->ac.mean)) return false;
    }
    return true;
}

std::optional<double> loglog_slope(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) return std::nullopt;
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [x, y] : points) {
        mx += std::log(x);
        my += std::log(y);
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& [x, y] : points) {
        const double dx = std::log(x) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y) - my);
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

BenchResult run_bench(std::span<const Network> cases, int repetitions, const std::optional<BenchEvalInputs>& eval) {
    if (repetitions < 1) throw InvalidArgument("repetitions must be at least 1");
    BenchResult result;
    result.repetitions = repetitions;
    std::vector<std::pair<double, double>> points;
    for (const Network& net : cases) {
        BenchRow row;
        row.name = net.name();
        row.buses = net.bus_count();
        // Untimed warm-up; also surfaces solver errors before timing.
        row.ac_iterations = solve_ac_pf(net).iterations;
        solve_dc_pf(net);

        std::vector<double> ac;
        std::vector<double> dc;
        for (int r = 0; r < repetitions; ++r) {
            ac.push_back(time_once([&] { solve_ac_pf(net); }));
            dc.push_back(time_once([&] { solve_dc_pf(net); }));
        }
        row.ac = summarize_times(ac);
        row.dc = summarize_times(dc);

        if (eval && eval->predictions != nullptr) {
            std::vector<const DatasetRecord*> mine;
            for (const DatasetRecord& rec : eval->records) {
                if (rec.meta.source_case == net.name() && eval->predictions->find(rec.case_id) != nullptr) {
                    mine.push_back(&rec);
                }
            }
            if (!mine.empty()) {
                std::vector<double> per_record;
                for (int r = 0; r < repetitions; ++r) {
                    Evaluator evaluator(eval->config);
                    const double t = time_once([&] {
                        for (const DatasetRecord* rec : mine) {
                            evaluator.evaluate(*rec, *eval->predictions->find(rec->case_id));
                        }
                    });
                    per_record.push_back(t / static_cast<double>(mine.size()));
                }
                row.eval = summarize_times(per_record);
                row.eval_records = mine.size();
            }
        }
        points.emplace_back(static_cast<double>(row.buses), row.ac.mean);
        result.rows.push_back(std::move(row));
    }
    result.ac_slope = loglog_slope(points);
    return result;
}

void write_bench_table(std::ostream& out, const BenchResult& result) {
    const bool with_eval = std::any_of(result.rows.begin(), result.rows.end(), [](const BenchRow& r) { return r.eval; });
    out << fmt::format("{:<16} {:>6} {:>5} {:>12} {:>12} {:>12} {:>12}", "case", "buses", "iter", "ac_mean_ms",
                       "ac_stdev_ms", "dc_mean_ms", "dc_stdev_ms");
    if (with_eval) out << fmt::format(" {:>13} {:>13}", "eval_mean_ms", "eval_stdev_ms");
    out << '\n';
    for (const BenchRow& r : result.rows) {
        out << fmt::format("{:<16} {:>6} {:>5} {:>12.4f} {:>12.4f} {:>12.4f} {:>12.4f}", r.name, r.buses,
                           r.ac_iterations, 1e3 * r.ac.mean, 1e3 * r.ac.stdev, 1e3 * r.dc.mean, 1e3 * r.dc.stdev);
        if (with_eval) {
            if (r.eval) {
                out << fmt::format(" {:>13.4f} {:>13.4f}", 1e3 * r.eval->mean, 1e3 * r.eval->stdev);
            } else {
                out << fmt::format(" {:>13} {:>13}", "-", "-");
            }
        }
        out << '\n';
    }
    out << fmt::format("repetitions: {}\n", result.repetitions);
    if (result.ac_slope) {
        out << fmt::format("ac log-log slope vs buses: {:.3f}\n", *result.ac_slope);
    } else {
        out << "ac log-log slope vs buses: n/a\n";
    }
    out << fmt::format("ac mean strictly increasing with buses: {}\n", result.ac_strictly_increasing() ? "yes" : "no");
}

nlohmann::ordered_json bench_json(const BenchResult& result) {
    auto timing = [](const Timing& t) { return nlohmann::ordered_json{{"mean_s", t.mean}, {"stdev_s", t.stdev}}; };
    nlohmann::ordered_json j;
    j["repetitions"] = result.repetitions;
    auto rows = nlohmann::ordered_json::array();
    for (const BenchRow& r : result.rows) {
        nlohmann::ordered_json row;
        row["case"] = r.name;
        row["buses"] = r.buses;
        row["ac_iterations"] = r.ac_iterations;
        row["ac"] = timing(r.ac);
        row["dc"] = timing(r.dc);
        if (r.eval) {
            row["eval_per_record"] = timing(*r.eval);
            row["eval_records"] = r.eval_records;
        }
        rows.push_back(std::move(row));
    }
    j["cases"] = std::move(rows);
    j["ac_loglog_slope"] = result.ac_slope ? nlohmann::ordered_json(*result.ac_slope) : nlohmann::ordered_json(nullptr);
    j["ac_strictly_increasing"] = result.ac_strictly_increasing();
    return j;
}

}  // namespace gridfm::cli
