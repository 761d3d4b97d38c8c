#include "cli/commands.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cli/app.hpp"
#include "cli/bench.hpp"
#include "gridfm/case_format.hpp"
#include "gridfm/contingency.hpp"
#include "gridfm/dataset.hpp"
#include "gridfm/errors.hpp"
#include "gridfm/masking.hpp"
#include "gridfm/physics_eval.hpp"
#include "gridfm/powerflow.hpp"
#include "gridfm/scenarios.hpp"

namespace gridfm::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void Context::add_input(const fs::path& path) {
    manifest.inputs.push_back({fs::absolute(path).lexically_normal().string(), sha256_file(path)});
}

void Context::add_output(const fs::path& path) {
    manifest.outputs.push_back({fs::absolute(path).lexically_normal().string(), sha256_file(path)});
    if (!primary_output) primary_output = path;
}

const std::set<std::string>& path_options() {
    static const std::set<std::string> names{"in", "out", "case", "cases", "dataset", "pred", "manifest"};
    return names;
}

namespace {

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    return in;
}

/// Integer options that must be at least 1.
const CLI::Validator kAtLeastOne(
    [](std::string& text) -> std::string {
        long long x = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
        if (ec != std::errc{} || ptr != text.data() + text.size() || x < 1) {
            return "must be an integer of at least 1, got '" + text + "'";
        }
        return {};
    },
    "INT>=1");

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

double parse_double(std::string_view text, std::string_view what) {
    double x = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, x);
    if (ec != std::errc{} || ptr != end) throw InvalidArgument(fmt::format("{}: '{}' is not a number", what, text));
    return x;
}

std::pair<double, double> parse_range(const std::string& text, std::string_view what) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw InvalidArgument(fmt::format("{} expects LO,HI, got '{}'", what, text));
    return {parse_double(std::string_view(text).substr(0, comma), what),
            parse_double(std::string_view(text).substr(comma + 1), what)};
}

Network load_input_case(Context& ctx, const std::string& path) {
    Network net = load_case(path);
    ctx.add_input(path);
    return net;
}

ojson violation_json(const Violation& v) {
    ojson j;
    j["kind"] = std::string(to_string(v.kind));
    j[v.on_branch() ? "branch" : "bus"] = v.on_branch() ? static_cast<long long>(v.element) : v.bus_id;
    j["magnitude"] = v.magnitude;
    return j;
}

// ---------------------------------------------------------------------------

Command convert_command(CLI::App& root) {
    struct Settings {
        std::string in;
        std::string out;
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("convert", "Parse a case file and rewrite it in normalized form");
    app->add_option("--in", s->in, "Input case file")->required()->check(CLI::ExistingFile);
    app->add_option("--out", s->out, "Output case file")->required();
    return {app, [s](Context& ctx) {
                const Network net = load_input_case(ctx, s->in);
                write_file_atomic(s->out, write_case(net));
                ctx.add_output(s->out);
                ctx.out << fmt::format("{}: {} buses, {} branches, {} generators -> {}\n", net.name(), net.bus_count(),
                                       net.branch_count(), net.generators().size(), s->out);
            }};
}

Command solve_command(CLI::App& root) {
    struct Settings {
        std::string case_path;
        std::string engine = "ac";
        double tol = SolverOptions{}.tol;
        int max_iter = SolverOptions{}.max_iter;
        bool warm_start = false;
        bool buses = false;
        std::string out;
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("solve", "Solve AC or DC power flow on one case");
    app->add_option("--case", s->case_path, "Case file")->required()->check(CLI::ExistingFile);
    app->add_option("--engine", s->engine, "ac or dc")->check(CLI::IsMember({"ac", "dc"}));
    app->add_option("--tol", s->tol, "Mismatch tolerance, per-unit")->check(CLI::PositiveNumber);
    app->add_option("--max-iter", s->max_iter, "Newton iteration cap")->check(kAtLeastOne);
    app->add_flag("--warm-start", s->warm_start, "Start from the case's stored voltages");
    app->add_flag("--buses", s->buses, "Print the per-bus solution");
    app->add_option("--out", s->out, "Write the solution as JSON");
    return {app, [s](Context& ctx) {
                const Network net = load_input_case(ctx, s->case_path);
                ojson j;
                j["case"] = net.name();
                j["engine"] = s->engine;
                auto buses = ojson::array();
                auto branches = ojson::array();
                if (s->engine == "dc") {
                    const auto t0 = std::chrono::steady_clock::now();
                    const DcSolution dc = solve_dc_pf(net);
                    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    for (std::size_t i = 0; i < net.bus_count(); ++i) {
                        buses.push_back({{"bus_id", net.buses()[i].id}, {"delta", dc.delta[i]}});
                    }
                    for (std::size_t k = 0; k < net.branch_count(); ++k) {
                        const Branch& br = net.branches()[k];
                        branches.push_back({{"index", k}, {"from", br.from_bus}, {"to", br.to_bus},
                                            {"p", dc.branch_flow[k]}});
                    }
                    const std::vector<double> flows(dc.branch_flow.begin(), dc.branch_flow.end());
                    const auto violations = check_branch_limits(net, flows);
                    auto v = ojson::array();
                    for (const Violation& x : violations) v.push_back(violation_json(x));
                    j["violations"] = std::move(v);
                    ctx.out << fmt::format("{}: dc solve, {} buses, {} overloads, {:.3f} ms\n", net.name(),
                                           net.bus_count(), violations.size(), 1e3 * secs);
                    if (s->buses) {
                        for (std::size_t i = 0; i < net.bus_count(); ++i) {
                            ctx.out << fmt::format("{:>6} {:>12.6f}\n", net.buses()[i].id, dc.delta[i]);
                        }
                    }
                } else {
                    SolverOptions opts{.tol = s->tol, .max_iter = s->max_iter, .flat_start = !s->warm_start};
                    const SolvedCase solved = solve_ac_pf(net, opts);
                    j["iterations"] = solved.iterations;
                    j["max_mismatch"] = solved.max_mismatch;
                    j["tol"] = solved.tol;
                    for (std::size_t i = 0; i < net.bus_count(); ++i) {
                        const NodeState& st = solved.states[i];
                        buses.push_back({{"bus_id", net.buses()[i].id},
                                         {"type", std::string(to_string(net.buses()[i].type))},
                                         {"p", st.p},
                                         {"q", st.q},
                                         {"v", st.v},
                                         {"delta", st.delta}});
                    }
                    const auto flows = branch_flows(net, solved.states);
                    for (std::size_t k = 0; k < net.branch_count(); ++k) {
                        const Branch& br = net.branches()[k];
                        branches.push_back({{"index", k},
                                            {"from", br.from_bus},
                                            {"to", br.to_bus},
                                            {"pf", flows[k].from.real()},
                                            {"qf", flows[k].from.imag()},
                                            {"pt", flows[k].to.real()},
                                            {"qt", flows[k].to.imag()}});
                    }
                    const auto violations = check_feasibility(net, solved.states);
                    auto v = ojson::array();
                    for (const Violation& x : violations) v.push_back(violation_json(x));
                    j["violations"] = std::move(v);
                    ctx.out << fmt::format("{}: converged in {} iterations, max mismatch {:.3e}, {} violations, "
                                           "{:.3f} ms\n",
                                           net.name(), solved.iterations, solved.max_mismatch, violations.size(),
                                           1e3 * solved.wall_time);
                    if (s->buses) {
                        ctx.out << fmt::format("{:>6} {:>5} {:>12} {:>12} {:>10} {:>12}\n", "bus", "type", "p", "q",
                                               "v", "delta");
                        for (std::size_t i = 0; i < net.bus_count(); ++i) {
                            const NodeState& st = solved.states[i];
                            ctx.out << fmt::format("{:>6} {:>5} {:>12.6f} {:>12.6f} {:>10.6f} {:>12.6f}\n",
                                                   net.buses()[i].id, to_string(net.buses()[i].type), st.p, st.q,
                                                   st.v, st.delta);
                        }
                    }
                }
                j["buses"] = std::move(buses);
                j["branches"] = std::move(branches);
                if (!s->out.empty()) {
                    write_file_atomic(s->out, dump(j));
                    ctx.add_output(s->out);
                }
            }};
}

Command generate_command(CLI::App& root) {
    struct Settings {
        std::string case_path;
        std::size_t count = 1;
        std::uint64_t seed = 0;
        std::string load_scale = "0.8,1.2";
        double load_noise = PerturbationSpec{}.load_noise_sigma;
        int drop_k = 0;
        bool no_redispatch = false;
        int max_attempts = PerturbationSpec{}.max_attempts_per_scenario;
        double tol = SolverOptions{}.tol;
        int max_iter = SolverOptions{}.max_iter;
        unsigned workers = 1;
        std::string out;
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("generate", "Generate a dataset of perturbed solved scenarios");
    app->add_option("--case", s->case_path, "Base case file")->required()->check(CLI::ExistingFile);
    app->add_option("--count", s->count, "Number of scenarios")->required()->check(kAtLeastOne);
    app->add_option("--seed", s->seed, "Master seed");
    app->add_option("--load-scale", s->load_scale, "Global load factor range LO,HI");
    app->add_option("--load-noise", s->load_noise, "Per-bus multiplicative noise sigma")->check(CLI::NonNegativeNumber);
    app->add_option("--drop-k", s->drop_k, "Branches dropped per scenario")->check(CLI::NonNegativeNumber);
    app->add_flag("--no-redispatch", s->no_redispatch, "Keep generator dispatch fixed");
    app->add_option("--max-attempts", s->max_attempts, "Draws per scenario before giving up")
        ->check(kAtLeastOne);
    app->add_option("--tol", s->tol, "Mismatch tolerance, per-unit")->check(CLI::PositiveNumber);
    app->add_option("--max-iter", s->max_iter, "Newton iteration cap")->check(kAtLeastOne);
    app->add_option("--workers", s->workers, "Worker threads")->check(kAtLeastOne);
    app->add_option("--out", s->out, "Output dataset (JSON lines)")->required();
    return {app, [s](Context& ctx) {
                const Network net = load_input_case(ctx, s->case_path);
                const auto [lo, hi] = parse_range(s->load_scale, "--load-scale");
                const PerturbationSpec spec{.load_scale_lo = lo,
                                            .load_scale_hi = hi,
                                            .load_noise_sigma = s->load_noise,
                                            .topology_drop_k = s->drop_k,
                                            .redispatch = !s->no_redispatch,
                                            .seed = s->seed,
                                            .count = s->count,
                                            .max_attempts_per_scenario = s->max_attempts};
                spec.validate();
                const GenerateOptions options{.solver = {.tol = s->tol, .max_iter = s->max_iter},
                                              .workers = s->workers};
                ctx.manifest.seed = s->seed;

                AtomicOutput out(s->out);
                RecordWriter writer(out.stream());
                std::uint64_t attempts = 0;
                double worst = 0.0;
                const auto t0 = std::chrono::steady_clock::now();
                generate_dataset(net, spec, options, [&](GeneratedCase&& c) {
                    attempts += static_cast<std::uint64_t>(c.attempts);
                    worst = std::max(worst, c.solved.max_mismatch);
                    writer.write(to_record(c, net, spec));
                });
                out.commit();
                ctx.add_output(s->out);
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                ctx.out << fmt::format("{}: {} scenarios ({} attempts), max mismatch {:.3e}, {:.2f} s -> {}\n",
                                       net.name(), writer.written(), attempts, worst, secs, s->out);
            }};
}

Command mask_command(CLI::App& root) {
    struct Settings {
        std::string in;
        std::string out;
        std::string mode = "pf";
        double ratio = 0.0;
        std::uint64_t seed = 0;
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("mask", "Attach masks to a dataset");
    app->add_option("--in", s->in, "Input dataset")->required()->check(CLI::ExistingFile);
    app->add_option("--out", s->out, "Output dataset")->required();
    app->add_option("--mode", s->mode, "pf (bus-type driven) or random")->check(CLI::IsMember({"pf", "random"}));
    app->add_option("--ratio", s->ratio, "Per-field masking probability (random mode)")->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", s->seed, "Mask seed (random mode)");
    return {app, [s](Context& ctx) {
                const MaskSpec spec{.mode = mask_mode_from_string(s->mode), .ratio = s->ratio, .seed = s->seed};
                spec.validate();
                ctx.manifest.seed = s->seed;
                std::ifstream in = open_input(s->in);
                RecordReader reader(in);
                AtomicOutput out(s->out);
                RecordWriter writer(out.stream());
                MaskStatistics stats;
                while (auto record = reader.next()) {
                    DatasetRecord masked = apply_mask(std::move(*record), spec);
                    stats.add(masked);
                    writer.write(masked);
                }
                out.commit();
                ctx.add_input(s->in);
                ctx.add_output(s->out);
                ctx.out << fmt::format("{} records, {} rows, {} masked entries ({:.4f} of fields)\n", stats.records,
                                       stats.rows, stats.total_masked(), stats.overall_ratio());
                for (NodeField f : kNodeFields) {
                    ctx.out << fmt::format("  {:<6} {:.4f}\n", field_name(f), stats.ratio(f));
                }
            }};
}

ojson field_stats_json(const std::array<FieldStats, 4>& fields) {
    ojson j;
    for (NodeField f : kNodeFields) {
        const FieldStats& s = fields[static_cast<std::size_t>(f)];
        j[std::string(field_name(f))] = {
            {"count", s.count}, {"mae", s.mae}, {"rmse", s.rmse}, {"median_relative", s.median_relative}};
    }
    return j;
}

Command evaluate_command(CLI::App& root) {
    struct Settings {
        std::string dataset;
        std::string pred;
        double gamma = EvalConfig{}.gamma;
        double lambda = EvalConfig{}.lambda;
        bool standardize = false;
        std::string out;
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("evaluate", "Score predictions against a masked dataset");
    app->add_option("--dataset", s->dataset, "Masked dataset")->required()->check(CLI::ExistingFile);
    app->add_option("--pred", s->pred, "Predictions (JSON lines)")->required()->check(CLI::ExistingFile);
    app->add_option("--gamma", s->gamma, "SCE exponent")->check(CLI::PositiveNumber);
    app->add_option("--lambda", s->lambda, "Weight of the power-flow term")->check(CLI::NonNegativeNumber);
    app->add_flag("--standardize", s->standardize, "Standardize features with dataset statistics before the SCE");
    app->add_option("--out", s->out, "Write the report as JSON");
    return {app, [s](Context& ctx) {
                EvalConfig config{.gamma = s->gamma, .lambda = s->lambda};
                if (s->standardize) {
                    std::ifstream in = open_input(s->dataset);
                    RecordReader reader(in);
                    ScalerAccumulator acc;
                    while (auto r = reader.next()) acc.add(*r);
                    config.scaler = acc.finish();
                }
                PredictionSet predictions = [&] {
                    std::ifstream in = open_input(s->pred);
                    return read_predictions(in);
                }();
                std::ifstream in = open_input(s->dataset);
                RecordReader reader(in);
                auto cases = ojson::array();
                const AggregateReport agg = evaluate_predictions(reader, predictions, config, [&](const EvalReport& r) {
                    ojson c;
                    c["case_id"] = r.case_id;
                    c["fields"] = field_stats_json(r.fields);
                    c["sce"] = r.sce.value;
                    c["pf_residual"] = r.pf_residual;
                    c["total"] = r.total;
                    auto v = ojson::array();
                    for (const Violation& x : r.violations) v.push_back(violation_json(x));
                    c["violations"] = std::move(v);
                    cases.push_back(std::move(c));
                });
                ctx.add_input(s->dataset);
                ctx.add_input(s->pred);

                ctx.out << fmt::format("{} cases scored\n", agg.cases);
                ctx.out << fmt::format("{:<6} {:>8} {:>12} {:>12} {:>14}\n", "field", "count", "mae", "rmse",
                                       "median_rel");
                for (NodeField f : kNodeFields) {
                    const FieldStats& fs = agg.fields[static_cast<std::size_t>(f)];
                    ctx.out << fmt::format("{:<6} {:>8} {:>12.4e} {:>12.4e} {:>14.4e}\n", field_name(f), fs.count,
                                           fs.mae, fs.rmse, fs.median_relative);
                }
                ctx.out << fmt::format("mean sce {:.6e}, mean pf residual {:.6e} (max {:.6e}), mean total {:.6e}\n",
                                       agg.mean_sce, agg.mean_pf_residual, agg.max_pf_residual, agg.mean_total);
                if (agg.degenerate_rows > 0) {
                    ctx.out << fmt::format("{} degenerate rows skipped in the sce\n", agg.degenerate_rows);
                }
                for (const auto& [kind, n] : agg.violation_counts) ctx.out << fmt::format("  {:<12} {}\n", kind, n);

                if (!s->out.empty()) {
                    ojson j;
                    j["gamma"] = s->gamma;
                    j["lambda"] = s->lambda;
                    if (config.scaler) {
                        ojson sc;
                        for (NodeField f : kNodeFields) {
                            const auto i = static_cast<std::size_t>(f);
                            sc[std::string(field_name(f))] = {{"mean", config.scaler->mean[i]},
                                                              {"scale", config.scaler->scale[i]}};
                        }
                        j["scaler"] = std::move(sc);
                    }
                    ojson a;
                    a["cases"] = agg.cases;
                    a["fields"] = field_stats_json(agg.fields);
                    a["mean_sce"] = agg.mean_sce;
                    a["mean_pf_residual"] = agg.mean_pf_residual;
                    a["max_pf_residual"] = agg.max_pf_residual;
                    a["mean_total"] = agg.mean_total;
                    a["degenerate_rows"] = agg.degenerate_rows;
                    a["violations"] = agg.violation_counts;
                    j["aggregate"] = std::move(a);
                    j["cases"] = std::move(cases);
                    write_file_atomic(s->out, dump(j));
                    ctx.add_output(s->out);
                }
            }};
}

Command baseline_command(CLI::App& root) {
    struct Settings {
        std::string dataset;
        std::string out;
        std::string kind = "flat";
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("baseline", "Write reference predictions for a dataset");
    app->add_option("--dataset", s->dataset, "Dataset")->required()->check(CLI::ExistingFile);
    app->add_option("--out", s->out, "Predictions file")->required();
    app->add_option("--kind", s->kind, "truth (stored solution) or flat (v = 1, delta = 0 where masked)")
        ->check(CLI::IsMember({"truth", "flat"}));
    return {app, [s](Context& ctx) {
                std::ifstream in = open_input(s->dataset);
                RecordReader reader(in);
                AtomicOutput out(s->out);
                const std::string source = "baseline-" + s->kind;
                std::size_t n = 0;
                while (auto record = reader.next()) {
                    for (std::size_t i = 0; i < record->nodes.size(); ++i) {
                        const NodeRow& row = record->nodes[i];
                        NodeState st{row.p, row.q, row.v, row.delta};
                        if (s->kind == "flat" && i < record->mask.size()) {
                            const FieldMask& m = record->mask[i];
                            if (m.test(NodeField::P)) st.p = 0.0;
                            if (m.test(NodeField::Q)) st.q = 0.0;
                            if (m.test(NodeField::V)) st.v = 1.0;
                            if (m.test(NodeField::Delta)) st.delta = 0.0;
                        }
                        write_prediction(out.stream(), record->case_id, row.bus_id, st, source);
                    }
                    ++n;
                }
                out.commit();
                ctx.add_input(s->dataset);
                ctx.add_output(s->out);
                ctx.out << fmt::format("{} predictions ({}) -> {}\n", n, s->kind, s->out);
            }};
}

Command contingency_command(CLI::App& root) {
    struct Settings {
        std::string case_path;
        int k = 1;
        std::string engine = "ac";
        unsigned workers = 1;
        std::string out;
        bool compare_dc = false;
        std::uint64_t checkpoint_every = ScreenOptions{}.checkpoint_every;
        bool resume = false;
        std::uint64_t stop_after = 0;
        double tol = SolverOptions{}.tol;
        int max_iter = SolverOptions{}.max_iter;
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("contingency", "Screen every N-k branch outage of a case");
    app->add_option("--case", s->case_path, "Case file")->required()->check(CLI::ExistingFile);
    app->add_option("--k", s->k, "Branches out per scenario")->check(kAtLeastOne);
    app->add_option("--engine", s->engine, "ac or dc")->check(CLI::IsMember({"ac", "dc"}));
    app->add_option("--workers", s->workers, "Worker threads")->check(kAtLeastOne);
    app->add_option("--out", s->out, "Report (JSON)")->required();
    app->add_flag("--compare-dc", s->compare_dc, "Also report the AC vs DC active-flow gap");
    app->add_option("--checkpoint-every", s->checkpoint_every, "Scenarios per checkpoint commit")
        ->check(kAtLeastOne);
    app->add_flag("--resume", s->resume, "Continue from the checkpoint beside --out");
    app->add_option("--stop-after", s->stop_after, "Stop after this many new scenarios (0: no limit)");
    app->add_option("--tol", s->tol, "Mismatch tolerance, per-unit")->check(CLI::PositiveNumber);
    app->add_option("--max-iter", s->max_iter, "Newton iteration cap")->check(kAtLeastOne);
    return {app, [s](Context& ctx) {
                const Network net = load_input_case(ctx, s->case_path);
                NkEnumerator outages = enumerate_nk(net, s->k);
                if (s->k > 2 && outages.total() > 1'000'000) {
                    ctx.err << fmt::format("warning: k = {} on {} branches is {} scenarios\n", s->k,
                                           net.in_service_branch_count(), outages.total());
                }
                fs::path checkpoint = s->out;
                checkpoint += ".checkpoint.jsonl";
                ScreenOptions options{.engine = engine_from_string(s->engine),
                                      .solver = {.tol = s->tol, .max_iter = s->max_iter},
                                      .workers = s->workers,
                                      .compare_dc = s->compare_dc,
                                      .checkpoint = checkpoint,
                                      .checkpoint_every = s->checkpoint_every,
                                      .resume = s->resume};
                if (s->stop_after > 0) options.stop_after = s->stop_after;
                const ContingencyReport report = screen(net, outages, options);
                write_file_atomic(s->out, report_json(report, net));
                ctx.add_output(s->out);
                if (report.complete) {
                    std::error_code ec;
                    fs::remove(checkpoint, ec);
                } else {
                    ctx.err << fmt::format("stopped after {} of {} scenarios; continue with --resume\n",
                                           report.outcomes.size(), outages.total());
                }
                write_report_table(ctx.out, report, net);
            }};
}

Command bench_command(CLI::App& root) {
    struct Settings {
        std::vector<std::string> cases;
        int reps = 10;
        std::string dataset;
        std::string pred;
        std::string out;
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("bench", "Time AC and DC solves over a ladder of cases");
    app->add_option("--cases", s->cases, "Case files, comma separated")
        ->required()
        ->delimiter(',')
        ->check(CLI::ExistingFile);
    app->add_option("--reps", s->reps, "Repetitions per case")->check(kAtLeastOne);
    app->add_option("--dataset", s->dataset, "Dataset for timing evaluation")->check(CLI::ExistingFile);
    app->add_option("--pred", s->pred, "Predictions for timing evaluation")->check(CLI::ExistingFile);
    app->add_option("--out", s->out, "Write the timing table as JSON");
    return {app, [s](Context& ctx) {
                ctx.deterministic = false;
                if (s->dataset.empty() != s->pred.empty()) {
                    throw InvalidArgument("--dataset and --pred must be given together");
                }
                std::vector<Network> cases;
                for (const std::string& p : s->cases) cases.push_back(load_input_case(ctx, p));
                std::vector<DatasetRecord> records;
                PredictionSet predictions;
                std::optional<BenchEvalInputs> eval;
                if (!s->dataset.empty()) {
                    std::ifstream din = open_input(s->dataset);
                    records = read_records(din);
                    std::ifstream pin = open_input(s->pred);
                    predictions = read_predictions(pin);
                    ctx.add_input(s->dataset);
                    ctx.add_input(s->pred);
                    eval = BenchEvalInputs{.records = records, .predictions = &predictions};
                }
                const BenchResult result = run_bench(cases, s->reps, eval);
                write_bench_table(ctx.out, result);
                if (!s->out.empty()) {
                    write_file_atomic(s->out, dump(bench_json(result)));
                    ctx.add_output(s->out);
                }
            }};
}

Command replay_command(CLI::App& root) {
    struct Settings {
        std::string manifest;
        std::string out;
    };
    auto s = std::make_shared<Settings>();
    CLI::App* app = root.add_subcommand("replay", "Re-run a recorded command and compare its outputs");
    app->add_option("--manifest", s->manifest, "Manifest of the original run")->required()->check(CLI::ExistingFile);
    app->add_option("--out", s->out, "Write the primary output here instead of the recorded path");
    return {app, [s](Context& ctx) {
                const RunManifest original = read_manifest(s->manifest);
                if (original.subcommand == "replay") throw InvalidArgument("cannot replay a replay");
                nlohmann::json config = original.config;
                if (!s->out.empty()) {
                    if (!config.contains("out")) throw InvalidArgument("the recorded command has no --out");
                    config["out"] = fs::absolute(s->out).lexically_normal().string();
                }
                std::vector<std::string> args{original.subcommand};
                for (const auto& [key, value] : config.items()) {
                    if (value.is_boolean()) {
                        if (value.get<bool>()) args.push_back("--" + key);
                    } else if (value.is_string()) {
                        args.push_back("--" + key);
                        args.push_back(value.get<std::string>());
                    } else if (!value.is_null()) {
                        throw IoError(fmt::format("malformed manifest: config value for '{}'", key));
                    }
                }
                ctx.out << "replaying: gridfm";
                for (const std::string& a : args) ctx.out << ' ' << a;
                ctx.out << '\n';
                const int code = run(args, ctx.out, ctx.err);
                if (code != kExitOk) {
                    ctx.exit_code = code;
                    return;
                }
                const fs::path out_path = config.contains("out") ? fs::path(config["out"].get<std::string>()) : fs::path{};
                if (out_path.empty()) {
                    ctx.out << "no recorded outputs to compare\n";
                    return;
                }
                const RunManifest replayed = read_manifest(manifest_path(out_path));
                if (original.subcommand == "bench") {
                    ctx.out << "outputs of '" << original.subcommand << "' carry timings; not compared\n";
                    return;
                }
                bool same = replayed.outputs.size() == original.outputs.size();
                for (std::size_t i = 0; same && i < original.outputs.size(); ++i) {
                    same = replayed.outputs[i].sha256 == original.outputs[i].sha256;
                }
                for (std::size_t i = 0; i < replayed.outputs.size(); ++i) {
                    const std::string want = i < original.outputs.size() ? original.outputs[i].sha256 : "(none)";
                    ctx.out << fmt::format("{} {} {}\n", replayed.outputs[i].sha256 == want ? "same   " : "differs",
                                           replayed.outputs[i].path, replayed.outputs[i].sha256);
                }
                for (std::size_t i = 0; i < original.inputs.size() && i < replayed.inputs.size(); ++i) {
                    if (original.inputs[i].sha256 != replayed.inputs[i].sha256) {
                        ctx.err << fmt::format("note: input {} changed since the recorded run\n",
                                               original.inputs[i].path);
                    }
                }
                ctx.out << (same ? "replay identical\n" : "replay differs\n");
                if (!same) ctx.exit_code = kExitDomain;
            }};
}

}  // namespace

std::vector<Command> register_commands(CLI::App& root) {
    return {convert_command(root),  solve_command(root),       generate_command(root),
            mask_command(root),     evaluate_command(root),    baseline_command(root),
            contingency_command(root), bench_command(root),    replay_command(root)};
}

}  // namespace gridfm::cli
