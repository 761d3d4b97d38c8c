#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "bridges.hpp"
#include "gridfm/contingency.hpp"
#include "gridfm/errors.hpp"
#include "test_data.hpp"

using namespace gridfm;
using gridfm::testing::load_test_case;

namespace {

std::vector<std::size_t> iota_candidates(std::size_t m) {
    std::vector<std::size_t> c(m);
    for (std::size_t i = 0; i < m; ++i) c[i] = i;
    return c;
}

std::filesystem::path temp_file(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove(p);
    return p;
}

}  // namespace

TEST(EnumerateNk, SmallLexicographic) {
    NkEnumerator e(iota_candidates(4), 2);
    EXPECT_EQ(e.total(), 6u);
    std::vector<std::vector<std::size_t>> got;
    while (auto s = e.next()) {
        EXPECT_EQ(s->index, got.size());
        got.push_back(s->branches);
    }
    const std::vector<std::vector<std::size_t>> want{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    EXPECT_EQ(got, want);
    EXPECT_FALSE(e.next().has_value());
}

TEST(EnumerateNk, ThousandBranches) {
    for (auto [k, expected] : {std::pair{1, 1000ull}, std::pair{2, 499500ull}}) {
        NkEnumerator e(iota_candidates(1000), k);
        EXPECT_EQ(e.total(), expected);
        OutageSet s;
        std::uint64_t n = 0;
        while (e.next(s)) ++n;
        EXPECT_EQ(n, expected);
        EXPECT_EQ(e.produced(), expected);
    }
}

TEST(EnumerateNk, SkipsOutOfServiceBranches) {
    const Network net = load_test_case("case14").with_branch_status(3, false);
    NkEnumerator e = enumerate_nk(net, 1);
    EXPECT_EQ(e.total(), 19u);
    while (auto s = e.next()) EXPECT_NE(s->branches[0], 3u);
}

TEST(EnumerateNk, InvalidK) {
    EXPECT_THROW(NkEnumerator(iota_candidates(3), 0), InvalidArgument);
    EXPECT_THROW(NkEnumerator(iota_candidates(3), 4), InvalidArgument);
    EXPECT_EQ(binomial(1000, 2), 499500u);
    EXPECT_EQ(binomial(5, 7), 0u);
}

TEST(Screen, Case14SingleOutagesIslandOnBridges) {
    const Network net = load_test_case("case14");
    NkEnumerator outages = enumerate_nk(net, 1);
    const ContingencyReport report = screen(net, outages, ScreenOptions{});
    ASSERT_EQ(report.outcomes.size(), 20u);
    EXPECT_EQ(report.converged + report.diverged + report.islanded, 20u);
    std::set<std::size_t> islanded;
    for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
        const OutageResult& r = report.outcomes[i];
        EXPECT_EQ(r.index, i);
        EXPECT_EQ(r.branches, std::vector<std::size_t>{i});
        if (r.outcome == Outcome::Islanded) islanded.insert(r.branches[0]);
    }
    EXPECT_EQ(islanded, gridfm::testing::bridge_branches(net));
    EXPECT_TRUE(report.complete);
    EXPECT_LE(report.worst.size(), 10u);
    for (std::size_t i = 1; i < report.worst.size(); ++i) {
        EXPECT_GE(report.worst[i - 1].violation.magnitude, report.worst[i].violation.magnitude);
    }
}

TEST(Screen, EmptyStream) {
    const Network net = load_test_case("case14");
    const ContingencyReport report = screen(net, std::span<const OutageSet>{}, ScreenOptions{});
    EXPECT_TRUE(report.outcomes.empty());
    EXPECT_EQ(report.converged + report.diverged + report.islanded, 0u);
}

TEST(Screen, DcNeverDiverges) {
    const Network net = load_test_case("case30");
    NkEnumerator outages = enumerate_nk(net, 2);
    const ContingencyReport report = screen(net, outages, ScreenOptions{.engine = Engine::DC});
    EXPECT_EQ(report.outcomes.size(), binomial(net.branch_count(), 2));
    EXPECT_EQ(report.diverged, 0u);
    EXPECT_GT(report.islanded, 0u);
}

TEST(Screen, DcComparisonReported) {
    const Network net = load_test_case("case14");
    NkEnumerator outages = enumerate_nk(net, 1);
    const ContingencyReport report = screen(net, outages, ScreenOptions{.compare_dc = true});
    ASSERT_EQ(report.dc_flow_gap_quantiles.size(), 3u);
    EXPECT_LE(report.dc_flow_gap_quantiles[0], report.dc_flow_gap_quantiles[1]);
    EXPECT_LE(report.dc_flow_gap_quantiles[1], report.dc_flow_gap_quantiles[2]);
    for (const OutageResult& r : report.outcomes) {
        EXPECT_EQ(r.dc_flow_gap.has_value(), r.outcome == Outcome::Converged);
    }
}

TEST(Screen, PairsOnCase14) {
    const Network net = load_test_case("case14");
    NkEnumerator outages = enumerate_nk(net, 2);
    const ContingencyReport report = screen(net, outages, ScreenOptions{});
    EXPECT_EQ(report.outcomes.size(), 190u);
    EXPECT_EQ(report.converged + report.diverged + report.islanded, 190u);
}

TEST(Screen, WorkersDoNotChangeOutcomes) {
    const Network net = load_test_case("case30");
    NkEnumerator a = enumerate_nk(net, 1);
    NkEnumerator b = enumerate_nk(net, 1);
    EXPECT_TRUE(same_outcomes(screen(net, a, ScreenOptions{}), screen(net, b, ScreenOptions{.workers = 4})));
}

TEST(Screen, ResumeEqualsUninterrupted) {
    const Network net = load_test_case("case14");
    NkEnumerator full = enumerate_nk(net, 2);
    const ContingencyReport reference = screen(net, full, ScreenOptions{});

    const auto path = temp_file("gridfm_checkpoint_test.jsonl");
    ScreenOptions opts{.checkpoint = path, .checkpoint_every = 25, .stop_after = 60};
    NkEnumerator first = enumerate_nk(net, 2);
    const ContingencyReport partial = screen(net, first, opts);
    EXPECT_FALSE(partial.complete);
    EXPECT_EQ(partial.outcomes.size(), 60u);

    // A torn tail (results past the last commit) is discarded on resume.
    {
        std::ofstream out(path, std::ios::app);
        out << "{\"kind\":\"result\",\"index\":60,\"branches\":[3,9],\"outcome\":\"CONVERGED\","
               "\"iterations\":1,\"solve_time\":0,\"violations\":[]}\n{\"kind\":\"res";
    }
    opts.stop_after.reset();
    opts.resume = true;
    NkEnumerator second = enumerate_nk(net, 2);
    const ContingencyReport resumed = screen(net, second, opts);
    EXPECT_TRUE(resumed.complete);
    EXPECT_TRUE(same_outcomes(resumed, reference));

    // Resuming a finished checkpoint recomputes nothing.
    NkEnumerator third = enumerate_nk(net, 2);
    EXPECT_TRUE(same_outcomes(screen(net, third, opts), reference));
    std::filesystem::remove(path);
}

TEST(Screen, CheckpointForDifferentScreenRejected) {
    const Network net = load_test_case("case14");
    const auto path = temp_file("gridfm_checkpoint_mismatch.jsonl");
    NkEnumerator a = enumerate_nk(net, 1);
    screen(net, a, ScreenOptions{.checkpoint = path, .stop_after = 5});
    NkEnumerator b = enumerate_nk(net, 1);
    EXPECT_THROW(screen(net, b, ScreenOptions{.engine = Engine::DC, .checkpoint = path, .resume = true}), IoError);
    std::filesystem::remove(path);
}

TEST(Screen, BaseCaseMustSolve) {
    const Network net = load_test_case("case14");
    std::vector<Bus> buses(net.buses().begin(), net.buses().end());
    for (Bus& b : buses) {
        b.pd *= 10.0;
        b.qd *= 10.0;
    }
    NkEnumerator outages = enumerate_nk(net, 1);
    EXPECT_THROW(screen(net.with_buses(buses), outages, ScreenOptions{}), BaseCaseUnsolvable);
}

TEST(Screen, OutageMustNameInServiceBranches) {
    const Network net = load_test_case("case14");
    const std::vector<OutageSet> bad{{.index = 0, .branches = {25}}};
    EXPECT_THROW(screen(net, bad, ScreenOptions{}), InvalidArgument);
    const std::vector<OutageSet> repeated{{.index = 0, .branches = {2, 2}}};
    EXPECT_THROW(screen(net, repeated, ScreenOptions{}), InvalidArgument);
}

TEST(Screen, ReportRendering) {
    const Network net = load_test_case("case14");
    NkEnumerator outages = enumerate_nk(net, 1);
    const ContingencyReport report = screen(net, outages, ScreenOptions{});
    const auto j = nlohmann::json::parse(report_json(report, net));
    EXPECT_EQ(j["scenarios"].get<std::size_t>(), 20u);
    EXPECT_EQ(j["counts"]["ISLANDED"].get<std::size_t>(), report.islanded);
    std::ostringstream table;
    write_report_table(table, report, net);
    EXPECT_NE(table.str().find("ISLANDED"), std::string::npos);
}
