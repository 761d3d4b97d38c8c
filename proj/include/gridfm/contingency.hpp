#pragma once

// N-k branch outage enumeration and screening.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridfm/network.hpp"
#include "gridfm/physics_eval.hpp"
#include "gridfm/powerflow.hpp"

namespace gridfm {

struct OutageSet {
    std::uint64_t index = 0;
    std::vector<std::size_t> branches;  ///< branch positions in the base network

    bool operator==(const OutageSet&) const = default;
};

/// C(n, k); saturates at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// All k-subsets of the candidates in lexicographic order, produced one at
/// a time from O(k) state.
class NkEnumerator {
public:
    /// Throws InvalidArgument unless 1 <= k <= candidates.size().
    NkEnumerator(std::vector<std::size_t> candidates, int k);

    /// Writes the next set into `out` (reusing its storage); false at the end.
    bool next(OutageSet& out);
    std::optional<OutageSet> next();

    std::uint64_t total() const noexcept { return total_; }
    std::uint64_t produced() const noexcept { return produced_; }

private:
    std::vector<std::size_t> candidates_;
    std::vector<std::size_t> positions_;
    std::uint64_t total_;
    std::uint64_t produced_ = 0;
    bool exhausted_ = false;
};

/// Enumerates outages of k in-service branches of `net`.
NkEnumerator enumerate_nk(const Network& net, int k);

enum class Engine { AC, DC };
enum class Outcome { Converged, Diverged, Islanded };

std::string_view to_string(Engine engine);
std::string_view to_string(Outcome outcome);
Engine engine_from_string(std::string_view text);

struct OutageResult {
    std::uint64_t index = 0;
    std::vector<std::size_t> branches;
    Outcome outcome = Outcome::Converged;
    std::vector<Violation> violations;
    int iterations = 0;
    double solve_time = 0.0;  ///< seconds
    /// AC screens with DC comparison: largest |p_ac - p_dc| over branch
    /// from-end active flows.
    std::optional<double> dc_flow_gap;
};

struct WorstViolation {
    std::uint64_t scenario = 0;
    Violation violation;
};

struct ContingencyReport {
    Engine engine = Engine::AC;
    std::vector<OutageResult> outcomes;  ///< ordered by scenario index
    std::size_t converged = 0;
    std::size_t diverged = 0;
    std::size_t islanded = 0;
    std::vector<WorstViolation> worst;  ///< largest magnitudes first
    std::vector<double> dc_flow_gap_quantiles;  ///< min, median, max when compared
    double wall_time = 0.0;
    double scenarios_per_second = 0.0;
    bool complete = true;
};

struct ScreenOptions {
    Engine engine = Engine::AC;
    SolverOptions solver;
    unsigned workers = 1;
    bool compare_dc = false;
    std::size_t worst_count = 10;
    std::optional<std::filesystem::path> checkpoint;
    std::uint64_t checkpoint_every = 10000;
    bool resume = false;
    /// Process at most this many scenarios in this run (the rest can be
    /// resumed from the checkpoint).
    std::optional<std::uint64_t> stop_after;
};

using OutageSource = std::function<bool(OutageSet&)>;

/// Applies each outage to the base network and classifies it. Islanded
/// scenarios are not solved. Throws BaseCaseUnsolvable if the intact
/// network does not solve with the chosen engine.
ContingencyReport screen(const Network& net, const OutageSource& outages, const ScreenOptions& options);
ContingencyReport screen(const Network& net, NkEnumerator& outages, const ScreenOptions& options);
ContingencyReport screen(const Network& net, std::span<const OutageSet> outages, const ScreenOptions& options);

/// Equality of everything except timing.
bool same_outcomes(const ContingencyReport& a, const ContingencyReport& b);

std::string report_json(const ContingencyReport& report, const Network& net);
void write_report_table(std::ostream& out, const ContingencyReport& report, const Network& net);

}  // namespace gridfm
