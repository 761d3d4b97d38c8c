#pragma once

// Loss terms and physical checks for reconstructed grid states.
//
// Scaled cosine error over rows x_i (truth) and z_i (prediction):
//   sce = mean_i (1 - cos(x_i, z_i))^gamma
// Power-flow residual over n buses, with dP and dQ from compute_mismatch:
//   pf = (sum_i dP_i^2 + sum_i dQ_i^2) / (2 n)
// Total loss = sce + lambda * pf.

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridfm/dataset.hpp"
#include "gridfm/network.hpp"
#include "gridfm/node_fields.hpp"
#include "gridfm/powerflow.hpp"
#include "gridfm/ybus.hpp"

namespace gridfm {

struct SceResult {
    double value = 0.0;
    std::size_t rows = 0;             ///< rows that entered the mean
    std::size_t degenerate_rows = 0;  ///< rows skipped for a zero-norm side
};

/// Mean of (1 - cos)^gamma over row pairs. Zero-norm rows are skipped and
/// counted. Throws DimensionMismatch or InvalidArgument (gamma < 1).
SceResult sce_loss(std::span<const Feature> truth, std::span<const Feature> pred, double gamma);

/// Per-field affine standardization applied before the cosine.
struct FeatureScaler {
    Feature mean{0.0, 0.0, 0.0, 0.0};
    Feature scale{1.0, 1.0, 1.0, 1.0};

    Feature apply(const Feature& x) const;
    /// Mean and population standard deviation of every node row; a zero
    /// deviation leaves the field unscaled.
    static FeatureScaler fit(std::span<const DatasetRecord> records);
};

/// Streaming form of FeatureScaler::fit (Welford updates per field).
class ScalerAccumulator {
public:
    void add(const DatasetRecord& record);
    FeatureScaler finish() const;
    std::size_t rows() const noexcept { return n_; }

private:
    std::size_t n_ = 0;
    Feature mean_{};
    Feature m2_{};
};

struct PfResidual {
    double value = 0.0;
    std::vector<double> per_bus;  ///< dP_i^2 + dQ_i^2
    Mismatch mismatch;
};

PfResidual pf_residual(const AdmittanceMatrix& ybus, std::span<const NodeState> states);
PfResidual pf_residual(const Network& net, std::span<const NodeState> states);

/// Gradient of pf_residual with respect to (p, q, v, delta) of every bus:
/// d/dp_i = dP_i / n, d/dq_i = dQ_i / n, and
/// d/d(v, delta) = -(1/n) J^T [dP; dQ] with J the full injection Jacobian.
std::vector<Feature> pf_residual_gradient(const Network& net, std::span<const NodeState> states);

struct BranchFlow {
    Complex from;  ///< power entering the branch at the from end
    Complex to;    ///< power entering the branch at the to end
};

/// Pi-model end flows; zero for out-of-service branches.
std::vector<BranchFlow> branch_flows(const Network& net, std::span<const NodeState> states);

enum class ViolationKind { VoltageHigh, VoltageLow, PgHigh, PgLow, QgHigh, QgLow, Overload };

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind = ViolationKind::VoltageHigh;
    std::size_t element = 0;  ///< bus position, or branch position for Overload
    int bus_id = 0;           ///< bus id; from-bus id for Overload
    double magnitude = 0.0;   ///< amount beyond the bound, per-unit

    bool on_branch() const { return kind == ViolationKind::Overload; }
};

/// Voltage bounds, bus-aggregate generator bounds, and rate_a (where
/// positive). Bounds are closed: a value exactly at a bound is feasible.
std::vector<Violation> check_feasibility(const Network& net, std::span<const NodeState> states);

/// rate_a checks against DC active flows.
std::vector<Violation> check_branch_limits(const Network& net, std::span<const double> active_flows);

struct SolutionCheck {
    double max_mismatch = 0.0;        ///< over every bus and both equations
    double max_spec_deviation = 0.0;  ///< stored specified values vs the network
    bool passes(double tol) const { return max_mismatch <= tol && max_spec_deviation <= tol; }
};

/// Recomputes the residual of a solved case from a freshly built Ybus and
/// compares the fixed quantities (PQ injections, PV p and v, slack v and
/// delta) against the network.
SolutionCheck verify_solved_case(const SolvedCase& solved);

// ---------------------------------------------------------------------------
// Prediction scoring

struct Prediction {
    std::string case_id;
    std::string source;
    std::map<int, NodeState> by_bus;
};

/// Predictions keyed by case id, in order of first appearance.
class PredictionSet {
public:
    void add(const std::string& case_id, int bus_id, const NodeState& state, const std::string& source);
    const Prediction* find(const std::string& case_id) const;
    std::size_t size() const noexcept { return order_.size(); }
    const std::vector<std::string>& case_ids() const noexcept { return order_; }

private:
    std::map<std::string, Prediction> cases_;
    std::vector<std::string> order_;
};

/// Reads lines {case_id, bus_id, p, q, v, delta, source}. Throws IoError.
PredictionSet read_predictions(std::istream& in);
void write_prediction(std::ostream& out, const std::string& case_id, int bus_id, const NodeState& state,
                      const std::string& source);

struct EvalConfig {
    double gamma = 2.0;
    double lambda = 1.0;
    std::optional<FeatureScaler> scaler;
};

/// Relative errors are taken only where |truth| exceeds this floor.
inline constexpr double kRelativeErrorFloor = 1e-9;

struct FieldStats {
    std::size_t count = 0;
    double mae = 0.0;
    double rmse = 0.0;
    double median_relative = 0.0;
};

struct EvalReport {
    std::string case_id;
    std::array<FieldStats, 4> fields;
    SceResult sce;
    double pf_residual = 0.0;
    double total = 0.0;
    std::vector<Violation> violations;
};

struct AggregateReport {
    std::size_t cases = 0;
    std::array<FieldStats, 4> fields;
    double mean_sce = 0.0;
    double mean_pf_residual = 0.0;
    double max_pf_residual = 0.0;
    double mean_total = 0.0;
    std::size_t degenerate_rows = 0;
    std::map<std::string, std::size_t> violation_counts;
};

/// Scores predictions against masked ground truth. Errors and the SCE are
/// taken over masked entries (rows with any masked field) only; the
/// residual and the feasibility checks use the full predicted state.
class Evaluator {
public:
    explicit Evaluator(EvalConfig config);

    /// Throws ShapeMismatch when the prediction's buses differ from the record's.
    EvalReport evaluate(const DatasetRecord& record, const Prediction& prediction);
    AggregateReport aggregate() const;

private:
    EvalConfig config_;
    std::array<std::vector<double>, 4> abs_errors_;
    std::array<std::vector<double>, 4> rel_errors_;
    std::size_t cases_ = 0;
    double sum_sce_ = 0.0;
    double sum_pf_ = 0.0;
    double max_pf_ = 0.0;
    double sum_total_ = 0.0;
    std::size_t degenerate_ = 0;
    std::map<std::string, std::size_t> violations_;
};

/// Streams the dataset, scoring every record that has predictions. Throws
/// MissingCase if a prediction's case id never appears in the dataset.
AggregateReport evaluate_predictions(RecordReader& dataset, const PredictionSet& predictions,
                                     const EvalConfig& config,
                                     const std::function<void(const EvalReport&)>& sink = {});

}  // namespace gridfm
