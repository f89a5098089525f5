#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <thread>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "goxn/analysis.hpp"
#include "goxn/csv.hpp"
#include "goxn/error.hpp"
#include "goxn/runner.hpp"
#include "goxn/simenv.hpp"

namespace goxn::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailed = 1;
constexpr int kUsage = 2;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct UsageError : Error {
    using Error::Error;
};

std::string default_output_root() {
    if (const char* env = std::getenv("GOXN_OUTPUT_DIR"); env && *env) return env;
    return "goxn-output";
}

struct EnvFlags {
    std::string env;  // "", "sim" or "external"
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string command;
    std::string prometheus;
};

void add_env_flags(CLI::App* app, EnvFlags& f) {
    app->add_option("--env", f.env, "Environment: sim (built-in simulator) or external (command + Prometheus)")
        ->check(CLI::IsMember({"sim", "external"}));
    app->add_option("--seed", f.seed, "Seed for load routes and trace sampling draws");
    app->add_option("--command", f.command,
                    "External mode: shell command template receiving one ACTION line on stdin; "
                    "{action} is replaced by the action name");
    app->add_option("--prometheus", f.prometheus, "External mode: Prometheus-compatible endpoint URL");
}

std::unique_ptr<Environment> make_environment(const EnvFlags& f, const std::string& sue) {
    const bool sim = f.env.empty() ? sue.rfind("sim:", 0) == 0 : f.env == "sim";
    if (sim) {
        const std::string descriptor = sue.rfind("sim:", 0) == 0 ? sue : "sim:default";
        sim::SimSettings settings;
        settings.seed = f.seed;
        return std::make_unique<sim::SimEnvironment>(sim::TopologySpec::from_descriptor(descriptor), settings);
    }
    if (f.command.empty()) throw UsageError("--env external needs --command");
    if (f.prometheus.empty()) throw UsageError("--env external needs --prometheus");
    return std::make_unique<ExternalCommandEnvironment>(f.command, f.prometheus);
}

void apply_seed(ExperimentSpec& spec, const EnvFlags& f) {
    if (f.seed_given) spec.load.seed = f.seed;
}

bool spec_names_output(const std::string& path) {
    try {
        return static_cast<bool>(YAML::LoadFile(path)["output_dir"]);
    } catch (const YAML::Exception&) {
        return false;
    }
}

ServiceMap load_map(const std::string& path) { return path.empty() ? ServiceMap::defaults() : ServiceMap::load(path); }

ModelConfig load_config(const std::string& path) { return path.empty() ? ModelConfig{} : ModelConfig::load(path); }

void print_run(std::ostream& out, const ExperimentReport& r, const std::string& dir) {
    out << r.name << ": " << to_string(r.status);
    if (r.status == RunStatus::complete) {
        out << " -> " << dir << " (window " << format_seconds(r.window->start) << "-"
            << format_seconds(r.window->end) << " s, " << r.load_stats.sent << " requests)";
    } else {
        out << " -> " << dir << ": " << r.error;
    }
    out << "\n";
}

std::string report_dir(const ExperimentSpec& spec, const ExperimentReport& r) {
    return r.status == RunStatus::complete ? spec.run_dir()
                                           : (fs::path(spec.output_dir) / "failed" / spec.name).string();
}

void print_breakdowns(std::ostream& out, const ProcessedRun& run) {
    out << "scenario " << run.scenario_key << "\n";
    for (const auto& b : run.breakdowns) {
        out << "  " << b.service << ": total " << format_number(b.total_joules) << " J (compute "
            << format_number(b.compute_joules) << ", network " << format_number(b.network_joules) << ", storage "
            << format_number(b.storage_joules) << "), compute-only underestimation "
            << format_number(compute_only_underestimation(b)) << " %\n";
    }
}

void write_comparison(const std::vector<ProcessedRun>& runs, const std::string& baseline,
                      const fs::path& out_dir, std::ostream& out) {
    const auto table = compare(runs, baseline);
    fs::create_directories(out_dir);
    write_comparison_csv(table, (out_dir / kComparisonCsv).string());
    emit_plot_data(table, (out_dir / kPlotDataCsv).string());
    out << "wrote " << (out_dir / kComparisonCsv).string() << " and " << (out_dir / kPlotDataCsv).string() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"goxn: energy experiments over a metric source with a component-level additive model"};
    app.name("goxn");
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "Run one experiment spec");
    std::string spec_path;
    std::string run_output;
    EnvFlags run_env;
    run_cmd->add_option("spec", spec_path, "Experiment spec YAML")->required();
    run_cmd->add_option("--output", run_output, "Output root (overrides the spec and GOXN_OUTPUT_DIR)");
    add_env_flags(run_cmd, run_env);

    // suite
    auto* suite_cmd = app.add_subcommand("suite", "Run a directory of specs, or 'catalog' for the seven scenarios");
    std::string suite_source;
    std::string suite_output;
    std::string suite_sue = "sim:default";
    double suite_duration = 60.0;
    double suite_step = 5.0;
    std::string suite_factors;
    std::string suite_map;
    EnvFlags suite_env;
    suite_cmd->add_option("source", suite_source, "Directory of spec YAML files, or 'catalog'")->required();
    suite_cmd->add_option("--output", suite_output, "Output root (default: GOXN_OUTPUT_DIR or goxn-output)");
    suite_cmd->add_option("--sue", suite_sue, "Catalog mode: SUE descriptor (sim:default, sim:<topology.yaml> or URL)");
    suite_cmd->add_option("--duration", suite_duration, "Catalog mode: measurement duration in seconds")
        ->check(CLI::PositiveNumber);
    suite_cmd->add_option("--step", suite_step, "Catalog mode: query step in seconds")->check(CLI::PositiveNumber);
    suite_cmd->add_option("--factors", suite_factors, "Catalog mode: intensity factors YAML used for processing");
    suite_cmd->add_option("--service-map", suite_map, "Catalog mode: service map YAML used for processing");
    add_env_flags(suite_cmd, suite_env);

    // process
    auto* process_cmd = app.add_subcommand("process", "Turn a run directory into the model CSV files");
    std::string process_dir;
    std::string process_factors;
    std::string process_map;
    process_cmd->add_option("run_dir", process_dir, "Run directory holding report.yaml")->required();
    process_cmd->add_option("--factors", process_factors, "Intensity factors YAML (default 0.06 / 0.002 kWh/GB)");
    process_cmd->add_option("--service-map", process_map, "Service map YAML (default: app label, then pod name)");

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "Compare processed runs against a baseline scenario");
    std::vector<std::string> compare_dirs;
    std::string compare_baseline;
    std::string compare_output;
    compare_cmd->add_option("dirs", compare_dirs, "Processed run directories")->required();
    compare_cmd->add_option("--baseline", compare_baseline, "Scenario key of the baseline run")->required();
    compare_cmd->add_option("--output", compare_output, "Where comparison.csv and plot_data.csv go");

    // sim serve
    auto* sim_cmd = app.add_subcommand("sim", "Simulated environment tools");
    sim_cmd->require_subcommand(1);
    auto* serve_cmd = sim_cmd->add_subcommand("serve", "Serve the simulator over HTTP (routes + /api/v1/query_range)");
    std::string serve_topology;
    std::string serve_bind = "127.0.0.1:9090";
    double serve_scrape = 5.0;
    double serve_sampling = 1.0;
    bool serve_mesh = false;
    std::uint64_t serve_seed = 1;
    serve_cmd->add_option("--topology", serve_topology, "Topology YAML (default: built-in demo)");
    serve_cmd->add_option("--bind", serve_bind, "host:port to listen on");
    serve_cmd->add_option("--scrape", serve_scrape, "Scrape interval in seconds")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--sampling", serve_sampling, "Trace sampling percent")->check(CLI::Range(0.0, 100.0));
    serve_cmd->add_flag("--mesh", serve_mesh, "Enable the service mesh");
    serve_cmd->add_option("--seed", serve_seed, "Sampling seed");

    std::vector<std::string> argv_store{"goxn"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help("", CLI::AppFormatMode::Normal);
        return kOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kOk;
        }
        if (args.empty()) {
            err << app.help();
        } else {
            app.exit(e, out, err);
        }
        return kUsage;
    }
    run_env.seed_given = run_cmd->count("--seed") > 0;
    suite_env.seed_given = suite_cmd->count("--seed") > 0;

    try {
        if (*run_cmd) {
            ExperimentSpec spec = load_spec(spec_path);
            if (!run_output.empty()) {
                spec.output_dir = run_output;
            } else if (!spec_names_output(spec_path)) {
                spec.output_dir = default_output_root();
            }
            apply_seed(spec, run_env);
            auto env = make_environment(run_env, spec.sue);
            if (env->kind() == EnvironmentKind::simulated && !spec.simulated()) {
                spec.sue = "sim:default";
            }
            const auto report = run_experiment(spec, *env);
            print_run(out, report, report_dir(spec, report));
            return report.status == RunStatus::complete ? kOk : kRunFailed;
        }

        if (*suite_cmd) {
            const std::string root = suite_output.empty() ? default_output_root() : suite_output;
            std::vector<ExperimentSpec> specs;
            const bool catalog = suite_source == "catalog";
            if (catalog) {
                CatalogOptions options;
                options.sue = suite_env.env == "external" ? suite_sue : (suite_sue.rfind("sim:", 0) == 0 ? suite_sue : "sim:default");
                options.duration = suite_duration;
                options.step_seconds = suite_step;
                options.output_dir = root;
                options.seed = suite_env.seed;
                for (const auto& e : scenario_catalog()) specs.push_back(catalog_spec(e.key, options));
            } else {
                if (!fs::is_directory(suite_source)) {
                    throw UsageError("suite source '" + suite_source + "' is neither 'catalog' nor a directory");
                }
                std::vector<fs::path> files;
                for (const auto& entry : fs::directory_iterator(suite_source)) {
                    const auto ext = entry.path().extension();
                    if (entry.is_regular_file() && (ext == ".yaml" || ext == ".yml")) files.push_back(entry.path());
                }
                std::sort(files.begin(), files.end());
                if (files.empty()) throw UsageError("no spec files (*.yaml) in " + suite_source);
                for (const auto& f : files) {
                    auto spec = load_spec(f.string());
                    if (!suite_output.empty() || !spec_names_output(f.string())) spec.output_dir = root;
                    apply_seed(spec, suite_env);
                    specs.push_back(std::move(spec));
                }
            }
            auto env = make_environment(suite_env, specs.front().sue);
            const auto result = run_suite(specs, *env, root);
            for (std::size_t i = 0; i < specs.size(); ++i) {
                print_run(out, result.reports[i], report_dir(specs[i], result.reports[i]));
            }
            out << "wrote " << (fs::path(root) / kSuiteManifest).string() << "\n";
            bool ok = result.all_complete();
            if (catalog) {
                const auto config = load_config(suite_factors);
                const auto map = load_map(suite_map);
                std::vector<ProcessedRun> runs;
                for (std::size_t i = 0; i < specs.size(); ++i) {
                    if (result.reports[i].status != RunStatus::complete) continue;
                    try {
                        runs.push_back(process_run(specs[i].run_dir(), config, map));
                    } catch (const Error& e) {
                        err << "goxn: processing " << specs[i].name << " failed: " << e.what() << "\n";
                        ok = false;
                    }
                }
                if (!runs.empty()) write_comparison(runs, "baseline", root, out);
            }
            return ok ? kOk : kRunFailed;
        }

        if (*process_cmd) {
            const auto run = process_run(process_dir, load_config(process_factors), load_map(process_map));
            print_breakdowns(out, run);
            return kOk;
        }

        if (*compare_cmd) {
            std::vector<ProcessedRun> runs;
            for (const auto& d : compare_dirs) runs.push_back(load_processed(d));
            write_comparison(runs, compare_baseline, compare_output.empty() ? default_output_root() : compare_output,
                             out);
            return kOk;
        }

        if (*serve_cmd) {
            sim::SimSettings settings;
            settings.scrape_interval_s = serve_scrape;
            settings.trace_sampling_fraction = serve_sampling / 100.0;
            settings.mesh_enabled = serve_mesh;
            settings.seed = serve_seed;
            auto topology = serve_topology.empty() ? sim::TopologySpec::default_demo()
                                                   : sim::TopologySpec::load(serve_topology);
            sim::Simulator simulator(std::move(topology), settings);
            sim::ServeOptions options;
            options.realtime = true;
            options.origin_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::system_clock::now().time_since_epoch())
                                    .count();
            auto server = sim::serve_http(simulator, serve_bind, options);
            out << "serving simulator on " << server->base_url() << " (Ctrl-C to stop)\n" << std::flush;
            g_interrupted = false;
            auto previous_int = std::signal(SIGINT, on_signal);
            auto previous_term = std::signal(SIGTERM, on_signal);
            while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server->stop();
            std::signal(SIGINT, previous_int);
            std::signal(SIGTERM, previous_term);
            return kOk;
        }
    } catch (const UsageError& e) {
        err << "goxn: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "goxn: " << e.what() << "\n";
        return kRunFailed;
    }
    err << app.help();
    return kUsage;
}

}  // namespace goxn::cli
