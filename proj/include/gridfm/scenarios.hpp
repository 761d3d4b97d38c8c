#pragma once

// Solved-scenario generation: perturb loads, generation, and topology of a
// base case, solve, and keep only converged and re-verified draws.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "gridfm/dataset.hpp"
#include "gridfm/network.hpp"
#include "gridfm/powerflow.hpp"
#include "gridfm/random.hpp"

namespace gridfm {

struct PerturbationSpec {
    double load_scale_lo = 0.8;
    double load_scale_hi = 1.2;
    double load_noise_sigma = 0.05;
    int topology_drop_k = 0;
    bool redispatch = true;
    std::uint64_t seed = 0;
    std::size_t count = 1;
    int max_attempts_per_scenario = 10;

    /// Throws InvalidArgument.
    void validate() const;
};

struct LoadDraw {
    Network net;
    double scale = 1.0;  ///< the global factor drawn for this scenario
};

/// pd_i' = pd_i * s * e_i with s ~ U(lo, hi) and e_i ~ lognormal(0, sigma);
/// qd scales with pd. With redispatch, in-service pg is scaled by the
/// change in total demand and the slack absorbs the rest.
LoadDraw draw_loads(const Network& net, const PerturbationSpec& spec, Rng& rng);
Network perturb_loads(const Network& net, const PerturbationSpec& spec, Rng& rng);

struct TopologyDraw {
    Network net;
    std::vector<std::size_t> dropped;  ///< branch positions, ascending
};

/// Takes k distinct in-service branches out of service, redrawing until the
/// slack's component spans every bus. Throws CannotPreserveConnectivity
/// after max_attempts draws, InvalidArgument if k exceeds the in-service
/// branch count.
TopologyDraw draw_topology(const Network& net, int k, Rng& rng, int max_attempts = 10);
Network perturb_topology(const Network& net, int k, Rng& rng, int max_attempts = 10);

struct GeneratedCase {
    SolvedCase solved;
    std::uint64_t scenario = 0;
    std::uint64_t seed = 0;
    int attempts = 0;
    double load_scale = 1.0;
    std::vector<std::size_t> dropped;
};

struct GenerateOptions {
    SolverOptions solver;
    unsigned workers = 1;
};

/// Emits exactly spec.count cases in scenario order. Scenario i draws from
/// its own stream seeded with mix_seed(spec.seed, i), so the output does not
/// depend on the worker count. Throws BudgetExhausted when a scenario fails
/// every attempt; the base case must solve or its solver error propagates.
void generate_dataset(const Network& net, const PerturbationSpec& spec, const GenerateOptions& options,
                      const std::function<void(GeneratedCase&&)>& sink);
std::vector<GeneratedCase> generate_dataset(const Network& net, const PerturbationSpec& spec,
                                            const GenerateOptions& options = {});

std::string scenario_case_id(const Network& base, std::uint64_t scenario);
DatasetRecord to_record(const GeneratedCase& generated, const Network& base, const PerturbationSpec& spec);

}  // namespace gridfm
