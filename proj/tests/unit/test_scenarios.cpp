#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "bridges.hpp"
#include "gridfm/errors.hpp"
#include "gridfm/physics_eval.hpp"
#include "gridfm/scenarios.hpp"
#include "gridfm/topology.hpp"
#include "test_data.hpp"

using namespace gridfm;
using gridfm::testing::load_test_case;
using gridfm::testing::two_bus;

TEST(Rng, EngineMatchesStandardSequence) {
    // The standard fixes the 10000th output of a default-seeded mt19937_64.
    Rng rng(5489u);
    std::uint64_t x = 0;
    for (int i = 0; i < 10000; ++i) x = rng.bits();
    EXPECT_EQ(x, 9981545732273789042ull);
}

TEST(Rng, UniformFromTopBits) {
    Rng a(1);
    Rng b(1);
    const double u = a.uniform();
    EXPECT_EQ(u, static_cast<double>(b.bits() >> 11) / 9007199254740992.0);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
}

TEST(PerturbLoads, DegenerateRangeIsIdentity) {
    const Network net = load_test_case("case14");
    PerturbationSpec spec{.load_scale_lo = 1.0, .load_scale_hi = 1.0, .load_noise_sigma = 0.0};
    Rng rng(42);
    EXPECT_TRUE(perturb_loads(net, spec, rng) == net);
}

TEST(PerturbLoads, GlobalFactorBoundsAndMean) {
    const Network net = load_test_case("case14");
    PerturbationSpec spec{.load_scale_lo = 0.8, .load_scale_hi = 1.2, .load_noise_sigma = 0.0};
    Rng rng(7);
    double sum = 0.0;
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) {
        const LoadDraw d = draw_loads(net, spec, rng);
        ASSERT_GE(d.scale, 0.8);
        ASSERT_LE(d.scale, 1.2);
        // With sigma 0 every bus scales by the global factor.
        EXPECT_DOUBLE_EQ(d.net.buses()[1].pd, net.buses()[1].pd * d.scale);
        sum += d.scale;
    }
    EXPECT_NEAR(sum / kDraws, 1.0, 0.01);
}

TEST(PerturbLoads, ConstantPowerFactorAndRedispatch) {
    const Network net = load_test_case("case14");
    PerturbationSpec spec;
    Rng rng(3);
    const Network out = perturb_loads(net, spec, rng);
    double before = 0.0;
    double after = 0.0;
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        const Bus& a = net.buses()[i];
        const Bus& b = out.buses()[i];
        before += a.pd;
        after += b.pd;
        if (a.pd != 0.0 && a.qd != 0.0) EXPECT_NEAR(b.qd / b.pd, a.qd / a.pd, 1e-12);
    }
    for (std::size_t g = 0; g < net.generators().size(); ++g) {
        EXPECT_NEAR(out.generators()[g].pg, net.generators()[g].pg * after / before, 1e-12);
    }
}

TEST(PerturbLoads, SeededDrawIsReproducible) {
    const Network net = load_test_case("case14");
    PerturbationSpec spec;
    Rng a(42);
    Rng b(42);
    EXPECT_TRUE(perturb_loads(net, spec, a) == perturb_loads(net, spec, b));
}

TEST(PerturbTopology, ZeroIsIdentity) {
    const Network net = load_test_case("case14");
    Rng rng(1);
    EXPECT_TRUE(perturb_topology(net, 0, rng) == net);
}

TEST(PerturbTopology, TwoBusCannotDropItsOnlyLine) {
    Rng rng(1);
    EXPECT_THROW(perturb_topology(two_bus(), 1, rng), CannotPreserveConnectivity);
    EXPECT_THROW(perturb_topology(two_bus(), 2, rng), InvalidArgument);
}

TEST(PerturbTopology, Case14SingleDropsStayConnected) {
    const Network net = load_test_case("case14");
    const std::set<std::size_t> bridges = gridfm::testing::bridge_branches(net);
    ASSERT_EQ(bridges, (std::set<std::size_t>{13}));  // 7-8, the radial line to the condenser
    std::set<std::size_t> seen;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        Rng rng(seed);
        const TopologyDraw d = draw_topology(net, 1, rng);
        ASSERT_EQ(d.dropped.size(), 1u);
        EXPECT_FALSE(bridges.contains(d.dropped[0]));
        EXPECT_TRUE(slack_spans_all_buses(d.net));
        EXPECT_EQ(net.in_service_branch_count() - 1, d.net.in_service_branch_count());
        seen.insert(d.dropped[0]);
    }
    EXPECT_EQ(seen.size(), net.branch_count() - bridges.size());
}

TEST(GenerateDataset, HundredRecordsWithinTolerance) {
    const Network net = load_test_case("case14");
    PerturbationSpec spec{.seed = 9, .count = 100};
    const auto cases = generate_dataset(net, spec);
    ASSERT_EQ(cases.size(), 100u);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const GeneratedCase& c = cases[i];
        EXPECT_EQ(c.scenario, i);
        EXPECT_EQ(c.seed, mix_seed(9, i));
        EXPECT_LE(c.solved.max_mismatch, 1e-8);
        const Mismatch m = compute_mismatch(c.solved.net, c.solved.states);
        EXPECT_LE(max_specified_mismatch(c.solved.net, m), 1e-8);
        EXPECT_TRUE(verify_solved_case(c.solved).passes(1e-8));
    }
}

TEST(GenerateDataset, SameSeedSameStream) {
    const Network net = load_test_case("case30");
    PerturbationSpec spec{.topology_drop_k = 1, .seed = 123, .count = 20};
    const auto a = generate_dataset(net, spec);
    const auto b = generate_dataset(net, spec, GenerateOptions{.workers = 3});
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(to_json_line(to_record(a[i], net, spec)), to_json_line(to_record(b[i], net, spec)));
    }
}

TEST(GenerateDataset, OverloadExhaustsBudget) {
    const auto ref = gridfm::testing::reference("divergence.json");
    ASSERT_FALSE(ref["case14_x5_redispatch"].get<bool>());
    PerturbationSpec spec{.load_scale_lo = 5.0, .load_scale_hi = 5.0, .count = 3};
    try {
        generate_dataset(load_test_case("case14"), spec);
        FAIL() << "expected BudgetExhausted";
    } catch (const BudgetExhausted& e) {
        EXPECT_EQ(e.produced(), 0u);
        EXPECT_EQ(e.requested(), 3u);
    }
}

TEST(GenerateDataset, InvalidSpec) {
    const Network net = two_bus();
    EXPECT_THROW(generate_dataset(net, PerturbationSpec{.load_scale_lo = 0.0}), InvalidArgument);
    EXPECT_THROW(generate_dataset(net, PerturbationSpec{.load_scale_lo = 1.2, .load_scale_hi = 1.1}),
                 InvalidArgument);
    EXPECT_THROW(generate_dataset(net, PerturbationSpec{.load_noise_sigma = -1.0}), InvalidArgument);
    EXPECT_THROW(generate_dataset(net, PerturbationSpec{.count = 0}), InvalidArgument);
}

TEST(GenerateDataset, RecordCarriesPerturbation) {
    const Network net = load_test_case("case14");
    PerturbationSpec spec{.topology_drop_k = 1, .seed = 5, .count = 2};
    const auto cases = generate_dataset(net, spec);
    const DatasetRecord r = to_record(cases[1], net, spec);
    EXPECT_EQ(r.case_id, "case14:000001");
    EXPECT_EQ(r.meta.seed, mix_seed(5, 1));
    EXPECT_EQ(r.meta.master_seed, 5u);
    EXPECT_EQ(r.meta.drop_k, 1);
    ASSERT_EQ(r.meta.dropped_branches.size(), 1u);
    EXPECT_FALSE(r.edges[static_cast<std::size_t>(r.meta.dropped_branches[0])].status);
    EXPECT_EQ(r.meta.load_scale, cases[1].load_scale);
    EXPECT_LE(r.meta.max_mismatch, r.meta.tol);
}
