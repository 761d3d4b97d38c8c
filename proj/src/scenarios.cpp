#include "gridfm/scenarios.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <optional>
#include <thread>

#include "gridfm/errors.hpp"
#include "gridfm/physics_eval.hpp"
#include "gridfm/topology.hpp"

namespace gridfm {

void PerturbationSpec::validate() const {
    if (!(load_scale_lo > 0.0) || !(load_scale_lo <= load_scale_hi) || !std::isfinite(load_scale_hi)) {
        throw InvalidArgument("load scale range must satisfy 0 < lo <= hi");
    }
    if (!(load_noise_sigma >= 0.0) || !std::isfinite(load_noise_sigma)) {
        throw InvalidArgument("load noise sigma must be non-negative");
    }
    if (topology_drop_k < 0) throw InvalidArgument("topology drop k must be non-negative");
    if (count < 1) throw InvalidArgument("scenario count must be at least 1");
    if (max_attempts_per_scenario < 1) throw InvalidArgument("max attempts per scenario must be at least 1");
}

LoadDraw draw_loads(const Network& net, const PerturbationSpec& spec, Rng& rng) {
    spec.validate();
    const double scale = rng.uniform(spec.load_scale_lo, spec.load_scale_hi);
    std::vector<Bus> buses(net.buses().begin(), net.buses().end());
    double before = 0.0;
    double after = 0.0;
    for (Bus& b : buses) {
        const double factor = scale * rng.lognormal(spec.load_noise_sigma);
        before += b.pd;
        b.pd *= factor;
        b.qd *= factor;
        after += b.pd;
    }
    std::vector<Generator> generators(net.generators().begin(), net.generators().end());
    if (spec.redispatch && before != 0.0) {
        const double ratio = after / before;
        for (Generator& g : generators) {
            if (g.in_service) g.pg *= ratio;
        }
    }
    return LoadDraw{Network(net.name(), net.base_mva(), std::move(buses),
                            std::vector<Branch>(net.branches().begin(), net.branches().end()),
                            std::move(generators)),
                    scale};
}

Network perturb_loads(const Network& net, const PerturbationSpec& spec, Rng& rng) {
    return draw_loads(net, spec, rng).net;
}

TopologyDraw draw_topology(const Network& net, int k, Rng& rng, int max_attempts) {
    if (k < 0) throw InvalidArgument("k must be non-negative");
    if (k == 0) return TopologyDraw{net, {}};
    std::vector<std::size_t> candidates;
    const auto branches = net.branches();
    for (std::size_t i = 0; i < branches.size(); ++i) {
        if (branches[i].in_service) candidates.push_back(i);
    }
    const auto kk = static_cast<std::size_t>(k);
    if (kk > candidates.size()) {
        throw InvalidArgument("cannot drop " + std::to_string(k) + " of " + std::to_string(candidates.size()) +
                              " in-service branches");
    }
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<std::size_t> pool = candidates;
        for (std::size_t i = 0; i < kk; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        std::vector<std::size_t> dropped(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(kk));
        std::sort(dropped.begin(), dropped.end());
        std::vector<Branch> next(branches.begin(), branches.end());
        for (std::size_t b : dropped) next[b].in_service = false;
        Network candidate(net.name(), net.base_mva(), std::vector<Bus>(net.buses().begin(), net.buses().end()),
                          std::move(next), std::vector<Generator>(net.generators().begin(), net.generators().end()));
        if (slack_spans_all_buses(candidate)) return TopologyDraw{std::move(candidate), std::move(dropped)};
    }
    throw CannotPreserveConnectivity("no connected outage of " + std::to_string(k) + " branches found in " +
                                     std::to_string(max_attempts) + " draws");
}

Network perturb_topology(const Network& net, int k, Rng& rng, int max_attempts) {
    return draw_topology(net, k, rng, max_attempts).net;
}

namespace {

// One scenario: redraw until a draw solves and re-verifies, or the budget
// is spent.
std::optional<GeneratedCase> run_scenario(const Network& net, const PerturbationSpec& spec,
                                          const SolverOptions& solver, std::uint64_t index) {
    const std::uint64_t seed = mix_seed(spec.seed, index);
    Rng rng(seed);
    for (int attempt = 1; attempt <= spec.max_attempts_per_scenario; ++attempt) {
        LoadDraw loads = draw_loads(net, spec, rng);
        TopologyDraw topology{loads.net, {}};
        if (spec.topology_drop_k > 0) {
            try {
                topology = draw_topology(loads.net, spec.topology_drop_k, rng, spec.max_attempts_per_scenario);
            } catch (const CannotPreserveConnectivity&) {
                continue;
            }
        }
        try {
            SolvedCase solved = solve_ac_pf(topology.net, solver);
            if (!verify_solved_case(solved).passes(solver.tol)) continue;
            return GeneratedCase{.solved = std::move(solved), .scenario = index, .seed = seed, .attempts = attempt,
                                 .load_scale = loads.scale, .dropped = std::move(topology.dropped)};
        } catch (const NoConvergence&) {
        } catch (const SingularJacobian&) {
        } catch (const Islanded&) {
        }
    }
    return std::nullopt;
}

}  // namespace

void generate_dataset(const Network& net, const PerturbationSpec& spec, const GenerateOptions& options,
                      const std::function<void(GeneratedCase&&)>& sink) {
    spec.validate();
    options.solver.validate();
    solve_ac_pf(net, options.solver);

    const unsigned workers = std::max(1u, options.workers);
    const std::size_t batch = workers == 1 ? 1 : static_cast<std::size_t>(workers) * 8;
    std::vector<std::optional<GeneratedCase>> slots;
    for (std::size_t begin = 0; begin < spec.count; begin += batch) {
        const std::size_t end = std::min(spec.count, begin + batch);
        slots.assign(end - begin, std::nullopt);
        if (workers == 1) {
            slots[0] = run_scenario(net, spec, options.solver, begin);
        } else {
            std::atomic<std::size_t> next{begin};
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < end; i = next++) {
                        slots[i - begin] = run_scenario(net, spec, options.solver, i);
                    }
                });
            }
        }
        for (std::size_t i = begin; i < end; ++i) {
            if (!slots[i - begin]) throw BudgetExhausted(i, spec.count);
            sink(std::move(*slots[i - begin]));
        }
    }
}

std::vector<GeneratedCase> generate_dataset(const Network& net, const PerturbationSpec& spec,
                                            const GenerateOptions& options) {
    std::vector<GeneratedCase> out;
    out.reserve(spec.count);
    generate_dataset(net, spec, options, [&out](GeneratedCase&& c) { out.push_back(std::move(c)); });
    return out;
}

std::string scenario_case_id(const Network& base, std::uint64_t scenario) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ":%06llu", static_cast<unsigned long long>(scenario));
    return base.name() + buf;
}

DatasetRecord to_record(const GeneratedCase& generated, const Network& base, const PerturbationSpec& spec) {
    RecordMeta meta;
    meta.source_case = base.name();
    meta.master_seed = spec.seed;
    meta.seed = generated.seed;
    meta.scenario = generated.scenario;
    meta.attempts = generated.attempts;
    meta.load_scale = generated.load_scale;
    meta.load_scale_lo = spec.load_scale_lo;
    meta.load_scale_hi = spec.load_scale_hi;
    meta.load_noise_sigma = spec.load_noise_sigma;
    meta.drop_k = spec.topology_drop_k;
    meta.redispatch = spec.redispatch;
    for (std::size_t b : generated.dropped) meta.dropped_branches.push_back(static_cast<int>(b));
    return make_record(generated.solved, scenario_case_id(base, generated.scenario), std::move(meta));
}

}  // namespace gridfm
