#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridfm/dataset.hpp"
#include "gridfm/network.hpp"
#include "gridfm/physics_eval.hpp"

namespace gridfm::cli {

struct Timing {
    double mean = 0.0;   ///< seconds
    double stdev = 0.0;  ///< sample standard deviation; 0 for one repetition
};

Timing summarize_times(std::span<const double> seconds);

struct BenchRow {
    std::string name;
    std::size_t buses = 0;
    int ac_iterations = 0;
    Timing ac;
    Timing dc;
    std::optional<Timing> eval;  ///< per record
    std::size_t eval_records = 0;
};

struct BenchResult {
    int repetitions = 0;
    std::vector<BenchRow> rows;
    std::optional<double> ac_slope;  ///< least-squares d log(time) / d log(buses)

    /// Rows sorted by bus count show strictly increasing mean AC time.
    bool ac_strictly_increasing() const;
};

struct BenchEvalInputs {
    std::span<const DatasetRecord> records;
    const PredictionSet* predictions = nullptr;
    EvalConfig config;
};

/// Least-squares slope of log y against log x; nullopt with fewer than two
/// distinct x.
std::optional<double> loglog_slope(std::span<const std::pair<double, double>> points);

/// Times AC and DC solves of every case. With evaluation inputs, also times
/// scoring each case's predicted records. Throws InvalidArgument for
/// repetitions < 1; solver errors propagate.
BenchResult run_bench(std::span<const Network> cases, int repetitions,
                      const std::optional<BenchEvalInputs>& eval = std::nullopt);

void write_bench_table(std::ostream& out, const BenchResult& result);
nlohmann::ordered_json bench_json(const BenchResult& result);

}  // namespace gridfm::cli
