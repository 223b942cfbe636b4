/**
 * @file cli_main.cpp
 * @brief `pcd` command-line tool: simulate event streams, calibrate critical
 * values, run change detectors, and reproduce the benchmark tables.
 *
 * Subcommands:
 *   - `simulate`  draw one event sample from a piecewise-constant intensity
 *                 and write it in the event-file format;
 *   - `test`      run one detector on an event file;
 *   - `calibrate` pre-compute critical values into a persistent store;
 *   - `bench`     reproduce the benchmark size/power tables with deviation
 *                 flagging against the embedded reference values.
 *
 * Exit codes: 0 = accepted (or clean bench run), 1 = rejected (or flagged
 * deviations under `bench --check`), 2 = any error.  Randomized decisions
 * are realized with an auxiliary uniform derived from the seed, so `test`
 * always exits 0 or 1 on success.
 *
 * The critical-value store path can be set per invocation with `--store`
 * or globally with the environment variable `PCD_STORE_PATH` (the flag
 * wins).  `bench` deliberately ignores the environment variable: full table
 * sweeps would write very large stores, so persistence there is opt-in.
 */

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcd/bench.hpp"
#include "pcd/calibration.hpp"
#include "pcd/detectors.hpp"
#include "pcd/errors.hpp"
#include "pcd/event_sample.hpp"
#include "pcd/grids.hpp"
#include "pcd/rng.hpp"
#include "pcd/store.hpp"

namespace {

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitError = 2;

// ============================================================================
// Shared helpers
// ============================================================================

/// Resolves the store path: explicit flag first, then $PCD_STORE_PATH.
[[nodiscard]] std::string resolve_store_path(const std::string & flag_value,
                                             bool allow_env) {
    if (!flag_value.empty()) {
        return flag_value;
    }
    if (allow_env) {
        if (const char * env = std::getenv("PCD_STORE_PATH");
            env != nullptr && *env != '\0') {
            return env;
        }
    }
    return {};
}

/// One line per detector family id, for the --help footer.
[[nodiscard]] std::string family_catalogue() {
    std::ostringstream out;
    out << "Detector families (--family):";
    int column = 0;
    for (const pcd::Family family : pcd::all_families()) {
        if (column == 0) {
            out << "\n  ";
        }
        out << std::setw(22) << std::left << pcd::family_id(family);
        column = (column + 1) % 3;
    }
    out << "\nWindow grids (--grid): ";
    out << pcd::grid_preset_id(pcd::GridPreset::theta_d) << ", "
        << pcd::grid_preset_id(pcd::GridPreset::theta_r) << ", "
        << pcd::grid_preset_id(pcd::GridPreset::theta_d_u) << ", "
        << pcd::grid_preset_id(pcd::GridPreset::theta_r_u) << ", "
        << pcd::grid_preset_id(pcd::GridPreset::theta_1) << ", "
        << pcd::grid_preset_id(pcd::GridPreset::theta_2);
    return out.str();
}

/// Renders a sample in the text event-file format (same bytes as the file
/// writer: "L=<scale>" header, then one time per line at 17 digits).
void print_events_text(const pcd::EventSample & sample, std::ostream & out) {
    out << std::setprecision(17);
    out << "L=" << sample.scale() << "\n";
    for (const double t : sample.times()) {
        out << t << "\n";
    }
}

// ============================================================================
// simulate
// ============================================================================

struct SimulateArgs {
    double lambda0 = 1.0;
    double delta = 0.0;
    double tau = 0.0;
    double ell = 0.0;
    bool has_ell = false;
    double scale = 100.0;
    std::uint64_t seed = 1;
    std::string out_path;
    bool as_json = false;
};

int cmd_simulate(const SimulateArgs & args) {
    pcd::IntensityProfile profile = pcd::IntensityProfile::constant(
        args.lambda0);
    if (args.delta != 0.0) {
        profile = args.has_ell
                      ? pcd::IntensityProfile::bump(args.lambda0, args.delta,
                                                    args.tau, args.ell)
                      : pcd::IntensityProfile::jump(args.lambda0, args.delta,
                                                    args.tau);
    }
    pcd::Rng rng(args.seed);
    const pcd::EventSample sample = pcd::simulate(rng, profile, args.scale);
    if (args.out_path.empty()) {
        if (args.as_json) {
            nlohmann::json j;
            j["L"] = sample.scale();
            j["times"] = sample.times();
            std::cout << j.dump(2) << "\n";
        } else {
            print_events_text(sample, std::cout);
        }
    } else if (args.as_json) {
        pcd::save_events_json(sample, args.out_path);
    } else {
        pcd::save_events_text(sample, args.out_path);
    }
    return kExitAccept;
}

// ============================================================================
// Detector spec assembly (shared by test and calibrate)
// ============================================================================

struct SpecArgs {
    std::string spec_path;
    std::string family;
    double alpha = 0.05;
    double lambda0 = 1.0;
    double bound = 1.0;
    bool has_bound = false;
    double tau_star = 0.0;
    bool has_tau_star = false;
    double ell_star = 0.0;
    bool has_ell_star = false;
    double delta_star = 0.0;
    bool has_delta_star = false;
    std::string grid;
    std::string correction = "bonferroni";
    std::uint64_t budget = 200000;
    std::uint64_t seed = 1;
    std::uint64_t aux_seed = 0;
    bool has_aux_seed = false;
};

/// Registers the inline spec flags on a subcommand.
void add_spec_options(CLI::App * cmd, SpecArgs & args) {
    cmd->add_option("--spec", args.spec_path,
                    "Detector spec as a JSON document (overrides the inline "
                    "flags below)");
    cmd->add_option("--family", args.family,
                    "Detector family id (see the list at the bottom of "
                    "--help)");
    cmd->add_option("--alpha", args.alpha, "Test level in (0,1)")
        ->capture_default_str();
    cmd->add_option("--lambda0", args.lambda0,
                    "Known baseline rate (known-baseline families)")
        ->capture_default_str();
    cmd->add_option("--bound", args.bound,
                    "Baseline upper bound R; selects the unknown-baseline "
                    "regime when given");
    cmd->add_option("--tau-star", args.tau_star,
                    "Change location parameter, when the family needs one");
    cmd->add_option("--ell-star", args.ell_star,
                    "Change length parameter, when the family needs one");
    cmd->add_option("--delta-star", args.delta_star,
                    "Target change height, when the family needs one");
    cmd->add_option("--grid", args.grid,
                    "Window-grid preset for the grid-restricted families");
    cmd->add_option("--correction", args.correction,
                    "Multiple-testing correction: bonferroni or min_p")
        ->capture_default_str();
    cmd->add_option("--budget", args.budget,
                    "Monte-Carlo calibration replications B")
        ->capture_default_str();
    cmd->add_option("--seed", args.seed, "Calibration seed")
        ->capture_default_str();
    cmd->add_option("--aux-seed", args.aux_seed,
                    "Seed of the auxiliary uniform that realizes randomized "
                    "decisions (derived from --seed when absent)");
}

/// Reads the flag-presence bits CLI11 tracked for the optional parameters.
void capture_spec_presence(const CLI::App * cmd, SpecArgs & args) {
    args.has_bound = cmd->count("--bound") > 0;
    args.has_tau_star = cmd->count("--tau-star") > 0;
    args.has_ell_star = cmd->count("--ell-star") > 0;
    args.has_delta_star = cmd->count("--delta-star") > 0;
    args.has_aux_seed = cmd->count("--aux-seed") > 0;
}

/// Builds the DetectorSpec from a JSON document or the inline flags.
[[nodiscard]] pcd::DetectorSpec build_spec(const SpecArgs & args) {
    if (!args.spec_path.empty()) {
        std::ifstream in(args.spec_path);
        if (!in) {
            throw pcd::InvalidParameterError("cannot open spec file '" +
                                             args.spec_path + "'");
        }
        std::ostringstream text;
        text << in.rdbuf();
        return pcd::DetectorSpec::from_json(text.str());
    }
    if (args.family.empty()) {
        throw pcd::InvalidParameterError(
            "either --spec or --family is required");
    }
    pcd::DetectorSpec spec;
    spec.family = pcd::family_from_id(args.family);
    if (args.has_bound) {
        spec.baseline = pcd::Baseline::unknown_bounded(args.bound);
    } else if (pcd::family_is_conditional(spec.family) &&
               spec.family != pcd::Family::laplace &&
               spec.family != pcd::Family::z_test) {
        spec.baseline = pcd::Baseline::unknown_bounded(args.bound);
    } else {
        spec.baseline = pcd::Baseline::known_rate(args.lambda0);
    }
    spec.alpha = args.alpha;
    spec.correction = pcd::correction_from_id(args.correction);
    if (args.has_tau_star) {
        spec.tau_star = args.tau_star;
    }
    if (args.has_ell_star) {
        spec.ell_star = args.ell_star;
    }
    if (args.has_delta_star) {
        spec.delta_star = args.delta_star;
    }
    if (!args.grid.empty()) {
        spec.location_grid = pcd::grid_preset_from_id(args.grid);
    }
    spec.budget = args.budget;
    spec.seed = args.seed;
    if (args.has_aux_seed) {
        spec.aux_seed = args.aux_seed;
    }
    return spec;
}

// ============================================================================
// test
// ============================================================================

struct TestArgs {
    SpecArgs spec;
    std::string events_path;
    std::string store_path;
    std::string report_path;
    bool no_calibrate = false;
    std::uint64_t max_n = 10000;
};

/// Human-readable report: one header block plus one line per ledger window.
void print_report_table(const pcd::TestReport & report, std::ostream & out) {
    out << "family:     " << report.family << "\n";
    out << "decision:   " << pcd::decision_id(report.decision) << "\n";
    out << std::setprecision(10);
    out << "reject_prob: " << report.reject_probability << "\n";
    out << "level:      " << report.resolved_level << "\n";
    if (report.aux_uniform.has_value()) {
        out << "aux_uniform: " << *report.aux_uniform << "\n";
    }
    for (const std::string & warning : report.warnings) {
        out << "warning:    " << warning << "\n";
    }
    out << "windows (" << report.windows.size() << "):\n";
    out << "  " << std::setw(10) << "tau1" << std::setw(11) << "tau2"
        << std::setw(14) << "stat" << std::setw(14) << "threshold"
        << std::setw(14) << "margin" << "  label\n";
    const std::size_t shown =
        report.windows.size() <= 24 ? report.windows.size() : 20;
    out << std::setprecision(6);
    for (std::size_t i = 0; i < shown; ++i) {
        const pcd::WindowEntry & w = report.windows[i];
        out << "  " << std::setw(10) << w.tau1 << std::setw(11) << w.tau2
            << std::setw(14) << w.stat << std::setw(14) << w.threshold
            << std::setw(14) << w.margin << "  " << w.label << "\n";
    }
    if (shown < report.windows.size()) {
        out << "  ... " << (report.windows.size() - shown)
            << " more windows (see the JSON report)\n";
    }
}

int cmd_test(const TestArgs & args) {
    const pcd::EventSample sample = pcd::load_events(args.events_path);
    pcd::DetectorSpec spec = build_spec(args.spec);
    if (!spec.aux_seed.has_value()) {
        // Realize randomized decisions deterministically so that the exit
        // code is always a plain accept/reject.
        spec.aux_seed = pcd::Rng(spec.seed).substream("cli-aux").seed();
    }
    const std::string store_path =
        resolve_store_path(args.store_path, /*allow_env=*/true);
    pcd::CriticalValueStore store{std::filesystem::path(store_path)};
    pcd::CalibrationEngine engine(store_path.empty() ? nullptr : &store);
    pcd::RunOptions options;
    options.allow_calibration = !args.no_calibrate;
    options.max_conditional_n = args.max_n;
    const pcd::TestReport report =
        pcd::run_detector(spec, sample, engine, options);
    print_report_table(report, std::cout);
    if (args.report_path.empty()) {
        std::cout << report.to_json() << "\n";
    } else {
        std::ofstream out(args.report_path);
        if (!out) {
            throw pcd::InvalidParameterError("cannot open report file '" +
                                             args.report_path +
                                             "' for writing");
        }
        out << report.to_json() << "\n";
    }
    return report.decision == pcd::Decision::accept ? kExitAccept
                                                    : kExitReject;
}

// ============================================================================
// calibrate
// ============================================================================

struct CalibrateArgs {
    SpecArgs spec;
    std::vector<std::string> spec_paths;
    std::vector<std::uint64_t> totals;
    double scale = 100.0;
    std::string store_path;
};

/// A synthetic sample with exactly n evenly spaced events, used to drive the
/// per-total calibration of the conditional families.
[[nodiscard]] pcd::EventSample synthetic_sample(std::uint64_t n,
                                                double scale) {
    std::vector<double> times;
    times.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        times.push_back(static_cast<double>(i + 1) /
                        static_cast<double>(n + 1));
    }
    return pcd::EventSample(scale, std::move(times));
}

int cmd_calibrate(const CalibrateArgs & args) {
    std::vector<pcd::DetectorSpec> specs;
    for (const std::string & path : args.spec_paths) {
        SpecArgs one;
        one.spec_path = path;
        specs.push_back(build_spec(one));
    }
    if (!args.spec.family.empty()) {
        specs.push_back(build_spec(args.spec));
    }
    if (specs.empty()) {
        throw pcd::InvalidParameterError(
            "nothing to calibrate: give --spec files and/or an inline "
            "--family");
    }
    const std::string store_path =
        resolve_store_path(args.store_path, /*allow_env=*/true);
    if (store_path.empty()) {
        throw pcd::InvalidParameterError(
            "calibrate requires a store path (--store or PCD_STORE_PATH)");
    }
    pcd::CriticalValueStore store{std::filesystem::path(store_path)};
    pcd::CalibrationEngine engine(&store);
    const std::size_t before = store.size();
    for (const pcd::DetectorSpec & spec : specs) {
        const bool conditional = pcd::family_is_conditional(spec.family) &&
                                 spec.family != pcd::Family::z_test;
        if (conditional) {
            if (args.totals.empty()) {
                throw pcd::InvalidParameterError(
                    "family " + std::string(pcd::family_id(spec.family)) +
                    " calibrates per observed total; give the totals to "
                    "pre-compute with --n");
            }
            for (const std::uint64_t n : args.totals) {
                (void)pcd::run_detector(spec, synthetic_sample(n, args.scale),
                                        engine);
            }
        } else {
            (void)pcd::run_detector(
                spec, pcd::EventSample(args.scale, {}), engine);
        }
    }
    const std::size_t added = store.size() - before;
    std::cout << "calibrated " << added << " new critical values ("
              << store.size() << " in store at " << store.path().string()
              << ")\n";
    return kExitAccept;
}

// ============================================================================
// bench
// ============================================================================

struct BenchArgs {
    std::vector<std::string> tables;
    bool paper_scale = false;
    std::uint64_t reps = 0;
    bool has_reps = false;
    std::uint64_t size_reps = 0;
    bool has_size_reps = false;
    std::uint64_t power_reps = 0;
    bool has_power_reps = false;
    std::uint64_t budget = 0;
    bool has_budget = false;
    std::uint64_t seed = 1;
    double alpha = 0.05;
    double lambda0 = 1.0;
    double scale = 100.0;
    std::string out_dir = "bench_out";
    std::string store_path;
    bool check = false;
};

int cmd_bench(const BenchArgs & args) {
    pcd::BenchConfig config = args.paper_scale ? pcd::BenchConfig::paper_scale()
                                               : pcd::BenchConfig{};
    config.table_ids = args.tables;
    if (args.has_reps) {
        config.size_reps = args.reps;
        config.power_reps = args.reps;
    }
    if (args.has_size_reps) {
        config.size_reps = args.size_reps;
    }
    if (args.has_power_reps) {
        config.power_reps = args.power_reps;
    }
    if (args.has_budget) {
        config.budget = args.budget;
    }
    config.seed = args.seed;
    config.alpha = args.alpha;
    config.lambda0 = args.lambda0;
    config.scale = args.scale;
    config.output_dir = std::filesystem::path(args.out_dir);
    // No environment fallback here: a full sweep would persist a very large
    // number of per-total records, so the store is opt-in for bench.
    const std::string store_path =
        resolve_store_path(args.store_path, /*allow_env=*/false);
    pcd::CriticalValueStore store{std::filesystem::path(store_path)};
    pcd::CalibrationEngine engine(store_path.empty() ? nullptr : &store);
    const pcd::BenchOutcome outcome =
        pcd::reproduce_tables(config, engine, &std::cerr);
    std::cout << "tables:  " << outcome.tables.size() << "\n";
    std::cout << "cells:   " << outcome.cell_count << "\n";
    std::cout << "flagged: " << outcome.flagged_count << "\n";
    std::cout << "output:  " << args.out_dir << "\n";
    if (args.check && outcome.flagged_count > 0) {
        std::cout << "check: FAILED (" << outcome.flagged_count
                  << " cells deviate by more than 3 pooled stderr)\n";
        return kExitReject;
    }
    if (args.check) {
        std::cout << "check: OK\n";
    }
    return kExitAccept;
}

}  // namespace

// ============================================================================
// Entry point
// ============================================================================

int main(int argc, char ** argv) {
    CLI::App app{
        "pcd: detection of an abrupt intensity change in an event stream "
        "observed on (0,1] at scale L"};
    app.require_subcommand(1);
    app.footer(family_catalogue());

    SimulateArgs sim;
    CLI::App * sim_cmd = app.add_subcommand(
        "simulate", "Draw one event sample and write an event file");
    sim_cmd->add_option("--lambda0", sim.lambda0, "Baseline rate")
        ->capture_default_str();
    sim_cmd->add_option("--delta", sim.delta,
                        "Change height (0 means no change)")
        ->capture_default_str();
    sim_cmd->add_option("--tau", sim.tau, "Change start location")
        ->capture_default_str();
    sim_cmd->add_option("--ell", sim.ell,
                        "Change length; when absent a nonzero --delta is a "
                        "persistent change on (tau, 1]");
    sim_cmd->add_option("--L", sim.scale, "Observation scale L")
        ->capture_default_str();
    sim_cmd->add_option("--seed", sim.seed, "Simulation seed")
        ->capture_default_str();
    sim_cmd->add_option("--out,-o", sim.out_path,
                        "Output file (stdout when absent)");
    sim_cmd->add_flag("--json", sim.as_json,
                      "Write the JSON event format instead of text");

    TestArgs test;
    CLI::App * test_cmd = app.add_subcommand(
        "test", "Run one detector on an event file (exit 0 accept, 1 reject)");
    test_cmd->add_option("--events", test.events_path, "Event file to test")
        ->required();
    add_spec_options(test_cmd, test.spec);
    test_cmd->add_option("--store", test.store_path,
                         "Critical-value store path (default: "
                         "$PCD_STORE_PATH, else in-memory)");
    test_cmd->add_flag("--no-calibrate", test.no_calibrate,
                       "Fail instead of computing missing critical values");
    test_cmd->add_option("--report", test.report_path,
                         "Write the JSON report here instead of stdout");
    test_cmd->add_option("--max-n", test.max_n,
                         "Largest observed total the conditional families "
                         "will calibrate for")
        ->capture_default_str();

    CalibrateArgs cal;
    CLI::App * cal_cmd = app.add_subcommand(
        "calibrate", "Pre-compute critical values into a persistent store");
    cal_cmd->add_option("--spec-file", cal.spec_paths,
                        "Detector spec JSON documents (repeatable)");
    add_spec_options(cal_cmd, cal.spec);
    cal_cmd->add_option("--n", cal.totals,
                        "Observed totals to pre-calibrate the conditional "
                        "families for (repeatable)");
    cal_cmd->add_option("--L", cal.scale, "Observation scale L")
        ->capture_default_str();
    cal_cmd->add_option("--store", cal.store_path,
                        "Critical-value store path (default: "
                        "$PCD_STORE_PATH)");

    BenchArgs bench;
    CLI::App * bench_cmd = app.add_subcommand(
        "bench", "Reproduce the benchmark tables and flag deviations");
    bench_cmd->add_option("--table", bench.tables,
                          "Table ids to run (repeatable; default: all)");
    bench_cmd->add_flag("--paper-scale", bench.paper_scale,
                        "Replication scale 5000/1000 with B=200000 (default "
                        "desk scale: 2000/500 with B=50000)");
    bench_cmd->add_option("--reps", bench.reps,
                          "Override both the size and power replications");
    bench_cmd->add_option("--size-reps", bench.size_reps,
                          "Override the size replications only");
    bench_cmd->add_option("--power-reps", bench.power_reps,
                          "Override the power replications only");
    bench_cmd->add_option("--budget", bench.budget,
                          "Override the calibration replications B");
    bench_cmd->add_option("--seed", bench.seed, "Master seed")
        ->capture_default_str();
    bench_cmd->add_option("--alpha", bench.alpha, "Test level")
        ->capture_default_str();
    bench_cmd->add_option("--lambda0", bench.lambda0, "Baseline rate")
        ->capture_default_str();
    bench_cmd->add_option("--L", bench.scale, "Observation scale L")
        ->capture_default_str();
    bench_cmd->add_option("--out", bench.out_dir,
                          "Directory for the CSV/JSON table files")
        ->capture_default_str();
    bench_cmd->add_option("--store", bench.store_path,
                          "Opt-in critical-value store path");
    bench_cmd->add_flag("--check", bench.check,
                        "Exit nonzero when any cell deviates from the "
                        "embedded reference beyond 3 pooled stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        const int code = app.exit(e);
        return code == 0 ? kExitAccept : kExitError;
    }

    try {
        if (app.got_subcommand(sim_cmd)) {
            sim.has_ell = sim_cmd->count("--ell") > 0;
            return cmd_simulate(sim);
        }
        if (app.got_subcommand(test_cmd)) {
            capture_spec_presence(test_cmd, test.spec);
            return cmd_test(test);
        }
        if (app.got_subcommand(cal_cmd)) {
            capture_spec_presence(cal_cmd, cal.spec);
            return cmd_calibrate(cal);
        }
        if (app.got_subcommand(bench_cmd)) {
            bench.has_reps = bench_cmd->count("--reps") > 0;
            bench.has_size_reps = bench_cmd->count("--size-reps") > 0;
            bench.has_power_reps = bench_cmd->count("--power-reps") > 0;
            bench.has_budget = bench_cmd->count("--budget") > 0;
            return cmd_bench(bench);
        }
    } catch (const pcd::Error & e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception & e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
