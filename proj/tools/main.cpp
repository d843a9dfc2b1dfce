// Command-line front end: fit, cross-validate, bootstrap, simulate,
// ingest raw interval files, and benchmark the update paths.  Every
// subcommand writes a manifest next to its outputs recording options,
// seeds, and content digests of everything read and written.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <bsccs/bsccs.hpp>

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct PriorOptions {
    std::string kind = "laplace";
    double variance = 1.0;
    bool variance_is_scale = false;
};

void add_prior_options(CLI::App* cmd, PriorOptions& opt) {
    cmd->add_option("--prior", opt.kind, "Prior family")
        ->check(CLI::IsMember({"none", "normal", "laplace"}))
        ->capture_default_str();
    cmd->add_option("--variance", opt.variance, "Prior variance sigma^2")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_flag("--laplace-scale", opt.variance_is_scale,
                  "Treat --variance as the Laplace scale b directly");
}

bsccs::PriorSpec to_prior(const PriorOptions& opt) {
    bsccs::PriorSpec prior;
    prior.kind = opt.kind == "normal"    ? bsccs::PriorKind::normal
                 : opt.kind == "laplace" ? bsccs::PriorKind::laplace
                                         : bsccs::PriorKind::none;
    prior.variance = opt.variance;
    prior.variance_is_laplace_scale = opt.variance_is_scale;
    return prior;
}

struct SolverOptions {
    double epsilon = 0.0005;
    int max_cycles = 1000;
    double trust_init = 1.0;
    std::string convergence = "raw";
    std::string precision = "double";
    std::string path = "sparse";
    int partitions = 1;
    bool random_cycle = false;
};

void add_solver_options(CLI::App* cmd, SolverOptions& opt) {
    cmd->add_option("--epsilon", opt.epsilon, "Convergence tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--max-cycles", opt.max_cycles, "Cycle cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--trust-init", opt.trust_init,
                    "Initial trust region half-width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--convergence", opt.convergence, "Criterion scaling")
        ->check(CLI::IsMember({"raw", "normalized"}))
        ->capture_default_str();
    cmd->add_option("--precision", opt.precision, "Floating-point width")
        ->check(CLI::IsMember({"single", "double"}))
        ->capture_default_str();
    cmd->add_option("--path", opt.path, "Coordinate update path")
        ->check(CLI::IsMember({"sparse", "dense"}))
        ->capture_default_str();
    cmd->add_option("--partitions", opt.partitions,
                    "Chunk count for partitioned reductions")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_flag("--random-cycle", opt.random_cycle,
                  "Shuffle the coordinate visit order each cycle");
}

bsccs::SolverConfig to_config(const SolverOptions& opt, std::uint64_t seed) {
    bsccs::SolverConfig cfg;
    cfg.epsilon = opt.epsilon;
    cfg.max_cycles = opt.max_cycles;
    cfg.trust_init = opt.trust_init;
    cfg.convergence = opt.convergence == "normalized"
                          ? bsccs::ConvergenceMode::normalized
                          : bsccs::ConvergenceMode::raw_sum; // "raw"
    cfg.precision = opt.precision == "single" ? bsccs::Precision::Single
                                              : bsccs::Precision::Double;
    cfg.path = opt.path == "dense" ? bsccs::UpdatePath::dense
                                   : bsccs::UpdatePath::sparse;
    cfg.partitions = opt.partitions;
    cfg.random_cycle = opt.random_cycle;
    cfg.cycle_seed = seed;
    return cfg;
}

void record_prior(bsccs::RunManifest& manifest, const PriorOptions& opt) {
    manifest.set("prior", opt.kind);
    manifest.set("variance", opt.variance);
    manifest.set("laplace_scale_convention",
                 opt.variance_is_scale ? "scale" : "variance");
}

void record_solver(bsccs::RunManifest& manifest, const SolverOptions& opt) {
    manifest.set("epsilon", opt.epsilon);
    manifest.set("max_cycles", opt.max_cycles);
    manifest.set("trust_init", opt.trust_init);
    manifest.set("convergence", opt.convergence);
    manifest.set("precision", opt.precision);
    manifest.set("path", opt.path);
    manifest.set("partitions", opt.partitions);
    manifest.set("random_cycle", opt.random_cycle ? 1 : 0);
}

std::string joined_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void ensure_output_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw bsccs::input_error("cannot create output directory '" + dir +
                                 "': " + ec.message());
    }
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& flag) {
    std::vector<double> out;
    std::stringstream stream(text);
    std::string piece;
    while (std::getline(stream, piece, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(piece, &used));
            if (used != piece.size()) {
                throw std::invalid_argument(piece);
            }
        } catch (const std::exception&) {
            throw bsccs::input_error(flag + ": '" + piece +
                                     "' is not a number");
        }
    }
    if (out.empty()) {
        throw bsccs::input_error(flag + ": empty list");
    }
    return out;
}

bsccs::LongFormatData load_input(const std::string& input,
                                 const std::string& dict) {
    std::vector<std::string> labels;
    if (!dict.empty()) {
        labels = bsccs::read_dictionary(dict);
    }
    return bsccs::read_long_format(input, std::move(labels));
}

void write_coefficients(const std::string& path,
                        const bsccs::Dataset& ds,
                        const std::vector<double>& beta) {
    auto out = bsccs::detail::open_for_write(path);
    out << "drug_id\tbeta_map\n";
    for (std::size_t j = 0; j < beta.size(); ++j) {
        const std::string label = ds.drug_ids.empty()
                                      ? "drug_" + std::to_string(j)
                                      : ds.drug_ids[j];
        out << label << '\t' << bsccs::format_double(beta[j]) << '\n';
    }
    if (!out) {
        throw bsccs::input_error("failed while writing '" + path + "'");
    }
}

// ---------------------------------------------------------------------
// subcommand bodies

struct FitArgs {
    std::string input;
    std::string dict;
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    PriorOptions prior;
    SolverOptions solver;
};

int cmd_fit(const FitArgs& args) {
    const auto data = load_input(args.input, args.dict);
    const bsccs::Dataset ds = bsccs::build_dataset(
        data.records, static_cast<bsccs::index_t>(data.drug_ids.size()),
        data.drug_ids);

    const bsccs::FitResult result =
        bsccs::fit(ds, to_prior(args.prior), to_config(args.solver, args.seed));

    ensure_output_dir(args.output_dir);
    const std::string coef_path = joined_path(args.output_dir, "coefficients.tsv");
    write_coefficients(coef_path, ds, result.beta_map);

    bsccs::RunManifest manifest;
    manifest.set("tool_version", kToolVersion);
    manifest.set("command", "fit");
    manifest.set_file("input", args.input);
    if (!args.dict.empty()) {
        manifest.set_file("dictionary", args.dict);
    }
    record_prior(manifest, args.prior);
    record_solver(manifest, args.solver);
    manifest.set("seed", args.seed);
    manifest.set("subjects", static_cast<int>(ds.num_subjects));
    manifest.set("drugs", static_cast<int>(ds.num_drugs));
    manifest.set("eras", static_cast<int>(ds.num_eras));
    manifest.set("converged", result.converged ? 1 : 0);
    manifest.set("cycles_run", result.cycles_run);
    manifest.set("final_criterion", result.final_criterion);
    manifest.set("log_posterior", result.log_posterior);
    manifest.set_file("coefficients", coef_path);
    manifest.write(joined_path(args.output_dir, "manifest.tsv"));

    std::cout << "subjects=" << ds.num_subjects << " drugs=" << ds.num_drugs
              << " eras=" << ds.num_eras << '\n'
              << "converged=" << (result.converged ? 1 : 0)
              << " cycles=" << result.cycles_run
              << " log_posterior=" << bsccs::format_double(result.log_posterior)
              << '\n';
    if (!result.converged) {
        std::cerr << "warning: cycle cap reached before convergence\n";
        return 3;
    }
    return 0;
}

struct CvArgs {
    std::string input;
    std::string dict;
    std::string output_dir = ".";
    std::string grid;
    int folds = 10;
    int threads = 0;
    std::uint64_t seed = 0;
    bool cold_start = false;
    PriorOptions prior;
    SolverOptions solver;
};

int cmd_cv(const CvArgs& args) {
    if (args.prior.kind == "none") {
        throw bsccs::input_error(
            "cv: hyperparameter search needs a prior family");
    }
    const auto data = load_input(args.input, args.dict);
    const bsccs::Dataset ds = bsccs::build_dataset(
        data.records, static_cast<bsccs::index_t>(data.drug_ids.size()),
        data.drug_ids);

    bsccs::CVConfig cfg;
    cfg.folds = args.folds;
    if (!args.grid.empty()) {
        cfg.variance_grid = parse_double_list(args.grid, "--grid");
    }
    cfg.prior_kind = args.prior.kind == "normal" ? bsccs::PriorKind::normal
                                                 : bsccs::PriorKind::laplace;
    cfg.variance_is_laplace_scale = args.prior.variance_is_scale;
    cfg.seed = args.seed;
    cfg.solver = to_config(args.solver, args.seed);
    cfg.warm_start = !args.cold_start;

    bsccs::ThreadPool pool(args.threads);
    const bsccs::CVResult result = bsccs::grid_search_cv(ds, cfg, &pool);

    ensure_output_dir(args.output_dir);
    const std::string table_path = joined_path(args.output_dir, "cv.tsv");
    {
        auto out = bsccs::detail::open_for_write(table_path);
        out << "variance\tmean_predictive_ll";
        for (int f = 0; f < cfg.folds; ++f) {
            out << "\tfold_" << f;
        }
        out << '\n';
        for (std::size_t g = 0; g < result.variance_grid.size(); ++g) {
            out << bsccs::format_double(result.variance_grid[g]) << '\t'
                << bsccs::format_double(result.mean_predictive_ll[g]);
            for (std::size_t f = 0; f < result.cells[g].size(); ++f) {
                const bsccs::CVCell& cell = result.cells[g][f];
                out << '\t'
                    << (cell.valid ? bsccs::format_double(cell.predictive_ll)
                                   : std::string("invalid"));
            }
            out << '\n';
        }
        if (!out) {
            throw bsccs::input_error("failed while writing '" + table_path + "'");
        }
    }

    bsccs::RunManifest manifest;
    manifest.set("tool_version", kToolVersion);
    manifest.set("command", "cv");
    manifest.set_file("input", args.input);
    if (!args.dict.empty()) {
        manifest.set_file("dictionary", args.dict);
    }
    record_prior(manifest, args.prior);
    record_solver(manifest, args.solver);
    manifest.set("folds", args.folds);
    manifest.set("seed", args.seed);
    manifest.set("threads", args.threads);
    manifest.set("warm_start", cfg.warm_start ? 1 : 0);
    {
        std::string grid_text;
        for (std::size_t g = 0; g < result.variance_grid.size(); ++g) {
            if (g != 0) {
                grid_text += ',';
            }
            grid_text += bsccs::format_double(result.variance_grid[g]);
        }
        manifest.set("grid", grid_text);
    }
    manifest.set("selected_variance", result.selected_variance);
    manifest.set("total_cycles", static_cast<long long>(result.total_cycles));
    manifest.set_file("cv_table", table_path);
    manifest.write(joined_path(args.output_dir, "manifest.tsv"));

    std::cout << "selected_variance="
              << bsccs::format_double(result.selected_variance)
              << " total_cycles=" << result.total_cycles << '\n';
    return 0;
}

struct BootstrapArgs {
    std::string input;
    std::string dict;
    std::string output_dir = ".";
    int replicates = 200;
    double level = 0.95;
    double min_p_hat = 0.5;
    int threads = 0;
    std::uint64_t seed = 0;
    PriorOptions prior;
    SolverOptions solver;
};

int cmd_bootstrap(const BootstrapArgs& args) {
    const auto data = load_input(args.input, args.dict);
    const bsccs::Dataset ds = bsccs::build_dataset(
        data.records, static_cast<bsccs::index_t>(data.drug_ids.size()),
        data.drug_ids);

    bsccs::BootstrapConfig cfg;
    cfg.replicates = args.replicates;
    cfg.level = args.level;
    cfg.seed = args.seed;
    cfg.prior = to_prior(args.prior);
    cfg.solver = to_config(args.solver, args.seed);

    bsccs::ThreadPool pool(args.threads);
    const bsccs::BootstrapResult result = bsccs::run_bootstrap(ds, cfg, &pool);
    const auto ranked =
        bsccs::report_ranked_intervals(ds, result, args.min_p_hat);

    ensure_output_dir(args.output_dir);
    const std::string table_path = joined_path(args.output_dir, "bootstrap.tsv");
    {
        // the ranked stability report: drugs retained in more than
        // --min-p-hat of the replicates, strongest estimate first
        auto out = bsccs::detail::open_for_write(table_path);
        out << "drug_id\tbeta_map\tci_lower\tci_upper\tp_hat\n";
        for (const auto& row : ranked) {
            out << row.drug_id << '\t' << bsccs::format_double(row.beta)
                << '\t' << bsccs::format_double(row.lower) << '\t'
                << bsccs::format_double(row.upper) << '\t'
                << bsccs::format_double(row.p_hat) << '\n';
        }
        if (!out) {
            throw bsccs::input_error("failed while writing '" + table_path + "'");
        }
    }
    const std::string full_path = joined_path(args.output_dir, "intervals.tsv");
    {
        // every drug, unfiltered, in dictionary order
        auto out = bsccs::detail::open_for_write(full_path);
        out << "drug_id\tbeta_map\tci_lower\tci_upper\tp_hat\n";
        for (std::size_t j = 0; j < result.beta_full.size(); ++j) {
            const std::string label = ds.drug_ids.empty()
                                          ? "drug_" + std::to_string(j)
                                          : ds.drug_ids[j];
            out << label << '\t' << bsccs::format_double(result.beta_full[j])
                << '\t' << bsccs::format_double(result.lower[j]) << '\t'
                << bsccs::format_double(result.upper[j]) << '\t'
                << bsccs::format_double(result.p_hat[j]) << '\n';
        }
        if (!out) {
            throw bsccs::input_error("failed while writing '" + full_path + "'");
        }
    }

    bsccs::RunManifest manifest;
    manifest.set("tool_version", kToolVersion);
    manifest.set("command", "bootstrap");
    manifest.set_file("input", args.input);
    if (!args.dict.empty()) {
        manifest.set_file("dictionary", args.dict);
    }
    record_prior(manifest, args.prior);
    record_solver(manifest, args.solver);
    manifest.set("replicates", args.replicates);
    manifest.set("level", args.level);
    manifest.set("seed", args.seed);
    manifest.set("threads", args.threads);
    manifest.set("min_p_hat", args.min_p_hat);
    manifest.set("used_replicates", result.used);
    manifest.set("non_converged_replicates", result.non_converged);
    manifest.set_file("bootstrap_table", table_path);
    manifest.set_file("intervals_table", full_path);
    manifest.write(joined_path(args.output_dir, "manifest.tsv"));

    std::cout << "drug_id\tbeta_map\tci_lower\tci_upper\tp_hat\n";
    for (const auto& row : ranked) {
        std::cout << row.drug_id << '\t' << bsccs::format_double(row.beta)
                  << '\t' << bsccs::format_double(row.lower) << '\t'
                  << bsccs::format_double(row.upper) << '\t'
                  << bsccs::format_double(row.p_hat) << '\n';
    }
    if (result.non_converged > 0) {
        std::cerr << "warning: " << result.non_converged << " of "
                  << result.replicates << " replicates hit the cycle cap\n";
    }
    if (!result.full_converged) {
        std::cerr << "warning: full-data fit hit the cycle cap\n";
        return 3;
    }
    return 0;
}

struct SimulateArgs {
    std::string output_dir = ".";
    int subjects = 1000;
    int drugs = 4;
    int min_eras = 2;
    int max_eras = 6;
    int min_length = 10;
    int max_length = 60;
    std::string prevalence = "0.25";
    std::string true_beta;
    double baseline_mean = -5.0;
    double baseline_sd = 0.5;
    std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& args) {
    bsccs::SimConfig cfg;
    cfg.subjects = args.subjects;
    cfg.drugs = args.drugs;
    cfg.min_eras = args.min_eras;
    cfg.max_eras = args.max_eras;
    cfg.min_era_length = args.min_length;
    cfg.max_era_length = args.max_length;
    cfg.baseline_log_rate_mean = args.baseline_mean;
    cfg.baseline_log_rate_sd = args.baseline_sd;
    cfg.seed = args.seed;

    cfg.prevalence = parse_double_list(args.prevalence, "--prevalence");
    if (cfg.prevalence.size() == 1) {
        cfg.prevalence = bsccs::uniform_prevalence(args.drugs, cfg.prevalence[0]);
    }
    if (args.true_beta.empty()) {
        cfg.true_beta.assign(static_cast<std::size_t>(args.drugs), 0.0);
    } else {
        cfg.true_beta = parse_double_list(args.true_beta, "--true-beta");
        if (cfg.true_beta.size() == 1 && args.drugs > 1) {
            cfg.true_beta.resize(static_cast<std::size_t>(args.drugs), 0.0);
        }
    }

    const bsccs::SimOutput sim = bsccs::simulate(cfg);

    ensure_output_dir(args.output_dir);
    const std::string data_path = joined_path(args.output_dir, "data.tsv");
    const std::string truth_path = joined_path(args.output_dir, "truth.tsv");
    bsccs::write_long_format(data_path, sim.records, sim.dataset.drug_ids);
    bsccs::write_truth(truth_path, sim.dataset.drug_ids, sim.truth.true_beta);

    bsccs::RunManifest manifest;
    manifest.set("tool_version", kToolVersion);
    manifest.set("command", "simulate");
    manifest.set("subjects_attempted", args.subjects);
    manifest.set("drugs", args.drugs);
    manifest.set("min_eras", args.min_eras);
    manifest.set("max_eras", args.max_eras);
    manifest.set("min_era_length", args.min_length);
    manifest.set("max_era_length", args.max_length);
    manifest.set("prevalence", args.prevalence);
    manifest.set("true_beta", args.true_beta.empty() ? "0" : args.true_beta);
    manifest.set("baseline_log_rate_mean", args.baseline_mean);
    manifest.set("baseline_log_rate_sd", args.baseline_sd);
    manifest.set("seed", args.seed);
    manifest.set("kept", sim.truth.kept);
    manifest.set("discarded", sim.truth.discarded);
    manifest.set_file("data", data_path);
    manifest.set_file("truth", truth_path);
    manifest.write(joined_path(args.output_dir, "manifest.tsv"));

    std::cout << "kept=" << sim.truth.kept
              << " discarded=" << sim.truth.discarded << '\n';
    return 0;
}

struct IngestArgs {
    std::string observation;
    std::string exposures;
    std::string events;
    std::string dict;
    std::string output_dir = ".";
};

int cmd_ingest(const IngestArgs& args) {
    const bsccs::RawData raw =
        bsccs::read_raw_files(args.observation, args.exposures, args.events);
    std::vector<std::string> dictionary;
    if (!args.dict.empty()) {
        dictionary = bsccs::read_dictionary(args.dict);
    }
    const bsccs::IngestResult result = bsccs::build_records(raw, dictionary);

    ensure_output_dir(args.output_dir);
    const std::string eras_path = joined_path(args.output_dir, "eras.tsv");
    bsccs::write_long_format(eras_path, result.records, result.drug_ids);

    bsccs::RunManifest manifest;
    manifest.set("tool_version", kToolVersion);
    manifest.set("command", "ingest");
    manifest.set_file("observation", args.observation);
    manifest.set_file("exposures", args.exposures);
    manifest.set_file("events", args.events);
    if (!args.dict.empty()) {
        manifest.set_file("dictionary", args.dict);
    }
    manifest.set("subjects", static_cast<int>(result.records.size()));
    manifest.set("drugs", static_cast<int>(result.drug_ids.size()));
    manifest.set("dropped_intervals", result.dropped_intervals);
    manifest.set("subjects_without_observation",
                 result.subjects_without_observation);
    manifest.set_file("eras", eras_path);
    manifest.write(joined_path(args.output_dir, "manifest.tsv"));

    std::cout << "subjects=" << result.records.size()
              << " drugs=" << result.drug_ids.size()
              << " dropped_intervals=" << result.dropped_intervals
              << " subjects_without_observation="
              << result.subjects_without_observation << '\n';
    if (result.dropped_intervals > 0) {
        std::cerr << "warning: " << result.dropped_intervals
                  << " exposure intervals fell outside the observation period\n";
    }
    if (result.subjects_without_observation > 0) {
        std::cerr << "warning: " << result.subjects_without_observation
                  << " subjects had rows but no observation period\n";
    }
    return 0;
}

struct BenchArgs {
    std::string input;
    std::string dict;
    std::string output_dir = ".";
    int partitions = 4;
    int threads = 4;
    std::uint64_t seed = 7;
    PriorOptions prior;
    SolverOptions solver;
};

// Built-in load for `bench` when no input file is given: a large sparse
// case series sized so the dense path visibly pays for its full sweeps.
bsccs::Dataset bench_dataset(std::uint64_t seed) {
    bsccs::SimConfig cfg;
    cfg.subjects = 33000;
    cfg.drugs = 500;
    cfg.min_eras = 3;
    cfg.max_eras = 7;
    cfg.min_era_length = 20;
    cfg.max_era_length = 60;
    cfg.prevalence = bsccs::uniform_prevalence(cfg.drugs, 0.015);
    cfg.true_beta.assign(500, 0.0);
    for (std::size_t j = 0; j < 10; ++j) {
        cfg.true_beta[j * 50] = (j % 2 == 0) ? 1.0 : -1.0;
    }
    cfg.baseline_log_rate_mean = -5.3;
    cfg.baseline_log_rate_sd = 0.5;
    cfg.seed = seed;
    bsccs::SimOutput sim = bsccs::simulate(cfg);
    if (sim.truth.kept < 20000) {
        throw bsccs::internal_error("bench scenario produced too few subjects");
    }
    std::vector<bsccs::index_t> first(20000);
    for (std::size_t i = 0; i < first.size(); ++i) {
        first[i] = static_cast<bsccs::index_t>(i);
    }
    return bsccs::subset_dataset(sim.dataset, first);
}

int cmd_bench(const BenchArgs& args) {
    bsccs::Dataset ds;
    if (args.input.empty()) {
        ds = bench_dataset(args.seed);
    } else {
        const auto data = load_input(args.input, args.dict);
        ds = bsccs::build_dataset(
            data.records, static_cast<bsccs::index_t>(data.drug_ids.size()),
            data.drug_ids);
    }
    std::cout << "subjects=" << ds.num_subjects << " drugs=" << ds.num_drugs
              << " eras=" << ds.num_eras
              << " max_column_nnz=" << ds.max_column_nnz << '\n';

    const bsccs::BenchReport report =
        bsccs::run_bench(ds, to_prior(args.prior), to_config(args.solver, 0),
                         args.partitions, args.threads);

    ensure_output_dir(args.output_dir);
    const std::string table_path = joined_path(args.output_dir, "bench.tsv");
    {
        auto out = bsccs::detail::open_for_write(table_path);
        out << "route\tseconds\tcycles\tconverged\n";
        for (const auto& row : report.rows) {
            out << row.label << '\t' << bsccs::format_double(row.seconds)
                << '\t' << row.cycles << '\t' << (row.converged ? 1 : 0)
                << '\n';
        }
        if (!out) {
            throw bsccs::input_error("failed while writing '" + table_path + "'");
        }
    }

    bsccs::RunManifest manifest;
    manifest.set("tool_version", kToolVersion);
    manifest.set("command", "bench");
    if (!args.input.empty()) {
        manifest.set_file("input", args.input);
    } else {
        manifest.set("scenario", "built-in");
        manifest.set("seed", args.seed);
    }
    record_prior(manifest, args.prior);
    record_solver(manifest, args.solver);
    manifest.set("partitions", args.partitions);
    manifest.set("threads", args.threads);
    manifest.set("dense_over_sparse", report.dense_over_sparse);
    manifest.set("parallel_over_sparse", report.parallel_over_sparse);
    manifest.set("gap_dense_sparse", report.gap_dense_sparse);
    manifest.set("gap_parallel_sparse", report.gap_parallel_sparse);
    manifest.set_file("bench_table", table_path);
    manifest.write(joined_path(args.output_dir, "manifest.tsv"));

    for (const auto& row : report.rows) {
        std::cout << row.label << ": " << row.seconds << " s in "
                  << row.cycles << " cycles"
                  << (row.converged ? "" : " (cycle cap)") << '\n';
    }
    std::cout << "dense/sparse=" << report.dense_over_sparse
              << " parallel/sparse=" << report.parallel_over_sparse << '\n';

    if (report.gap_dense_sparse > 1e-8 || report.gap_parallel_sparse > 1e-8) {
        std::cerr << "error: update paths disagree (dense gap "
                  << report.gap_dense_sparse << ", parallel gap "
                  << report.gap_parallel_sparse << ")\n";
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-controlled case series regression toolkit"};
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Fit one penalized model");
    fit_cmd->add_option("--input", fit_args.input, "Era-level long-format file")
        ->required();
    fit_cmd->add_option("--dict", fit_args.dict, "Drug dictionary file");
    fit_cmd->add_option("--output-dir", fit_args.output_dir, "Output directory")
        ->capture_default_str();
    fit_cmd->add_option("--seed", fit_args.seed, "Seed for --random-cycle");
    add_prior_options(fit_cmd, fit_args.prior);
    add_solver_options(fit_cmd, fit_args.solver);

    CvArgs cv_args;
    auto* cv_cmd =
        app.add_subcommand("cv", "Select the prior variance by cross-validation");
    cv_cmd->add_option("--input", cv_args.input, "Era-level long-format file")
        ->required();
    cv_cmd->add_option("--dict", cv_args.dict, "Drug dictionary file");
    cv_cmd->add_option("--output-dir", cv_args.output_dir, "Output directory")
        ->capture_default_str();
    cv_cmd->add_option("--k", cv_args.folds, "Fold count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cv_cmd->add_option("--grid", cv_args.grid,
                       "Comma-separated variance grid (default: 13 points, "
                       "log-uniform on [0.001, 10])");
    cv_cmd->add_option("--threads", cv_args.threads, "Worker threads for folds")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cv_cmd->add_option("--seed", cv_args.seed, "Fold assignment seed");
    cv_cmd->add_flag("--cold-start", cv_args.cold_start,
                     "Restart every grid point from zero");
    add_prior_options(cv_cmd, cv_args.prior);
    add_solver_options(cv_cmd, cv_args.solver);

    BootstrapArgs boot_args;
    auto* boot_cmd = app.add_subcommand(
        "bootstrap", "Resample subjects for intervals and stability");
    boot_cmd->add_option("--input", boot_args.input, "Era-level long-format file")
        ->required();
    boot_cmd->add_option("--dict", boot_args.dict, "Drug dictionary file");
    boot_cmd->add_option("--output-dir", boot_args.output_dir, "Output directory")
        ->capture_default_str();
    boot_cmd->add_option("--replicates", boot_args.replicates, "Resample count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    boot_cmd->add_option("--level", boot_args.level, "Interval coverage")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    boot_cmd->add_option("--min-p-hat", boot_args.min_p_hat,
                         "Keep drugs retained in more than this share")
        ->capture_default_str();
    boot_cmd->add_option("--threads", boot_args.threads,
                         "Worker threads for replicates")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    boot_cmd->add_option("--seed", boot_args.seed, "Resampling seed");
    add_prior_options(boot_cmd, boot_args.prior);
    add_solver_options(boot_cmd, boot_args.solver);

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic case series");
    sim_cmd->add_option("--output-dir", sim_args.output_dir, "Output directory")
        ->capture_default_str();
    sim_cmd->add_option("--subjects", sim_args.subjects, "Subjects to attempt")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim_cmd->add_option("--drugs", sim_args.drugs, "Drug count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim_cmd->add_option("--min-eras", sim_args.min_eras, "")->capture_default_str();
    sim_cmd->add_option("--max-eras", sim_args.max_eras, "")->capture_default_str();
    sim_cmd->add_option("--min-era-length", sim_args.min_length, "Days")
        ->capture_default_str();
    sim_cmd->add_option("--max-era-length", sim_args.max_length, "Days")
        ->capture_default_str();
    sim_cmd->add_option("--prevalence", sim_args.prevalence,
                        "Per-era exposure probability, one value or a list")
        ->capture_default_str();
    sim_cmd->add_option("--true-beta", sim_args.true_beta,
                        "Generating coefficients, comma separated (default 0)");
    sim_cmd->add_option("--baseline-mean", sim_args.baseline_mean,
                        "Mean log events per day")
        ->capture_default_str();
    sim_cmd->add_option("--baseline-sd", sim_args.baseline_sd,
                        "Spread of the subject baseline")
        ->capture_default_str();
    sim_cmd->add_option("--seed", sim_args.seed, "Simulation seed");

    IngestArgs ingest_args;
    auto* ingest_cmd = app.add_subcommand(
        "ingest", "Cut raw day-interval files into constant-exposure eras");
    ingest_cmd
        ->add_option("--observation", ingest_args.observation,
                     "subject, start_day, end_day")
        ->required();
    ingest_cmd
        ->add_option("--exposures", ingest_args.exposures,
                     "subject, drug, start_day, end_day")
        ->required();
    ingest_cmd->add_option("--events", ingest_args.events, "subject, day")
        ->required();
    ingest_cmd->add_option("--dict", ingest_args.dict, "Drug dictionary file");
    ingest_cmd->add_option("--output-dir", ingest_args.output_dir, "Output directory")
        ->capture_default_str();

    BenchArgs bench_args;
    bench_args.prior.kind = "laplace";
    bench_args.prior.variance = 0.1;
    bench_args.solver.epsilon = 0.0002;
    bench_args.solver.max_cycles = 300;
    auto* bench_cmd = app.add_subcommand(
        "bench", "Time the dense, sparse, and parallel update paths");
    bench_cmd->add_option("--input", bench_args.input,
                          "Era-level long-format file (default: built-in scenario)");
    bench_cmd->add_option("--dict", bench_args.dict, "Drug dictionary file");
    bench_cmd->add_option("--output-dir", bench_args.output_dir, "Output directory")
        ->capture_default_str();
    bench_cmd->add_option("--partitions", bench_args.partitions,
                          "Chunks for the parallel route")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench_cmd->add_option("--threads", bench_args.threads,
                          "Workers for the parallel route")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    bench_cmd->add_option("--seed", bench_args.seed, "Built-in scenario seed")
        ->capture_default_str();
    add_prior_options(bench_cmd, bench_args.prior);
    {
        // bench owns --partitions; register the remaining solver knobs only
        auto& solver = bench_args.solver;
        bench_cmd->add_option("--epsilon", solver.epsilon, "Convergence tolerance")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        bench_cmd->add_option("--max-cycles", solver.max_cycles, "Cycle cap")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        bench_cmd
            ->add_option("--convergence", solver.convergence, "Criterion scaling")
            ->check(CLI::IsMember({"raw", "normalized"}))
            ->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e); // --help and friends
        }
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (fit_cmd->parsed()) {
            return cmd_fit(fit_args);
        }
        if (cv_cmd->parsed()) {
            return cmd_cv(cv_args);
        }
        if (boot_cmd->parsed()) {
            return cmd_bootstrap(boot_args);
        }
        if (sim_cmd->parsed()) {
            return cmd_simulate(sim_args);
        }
        if (ingest_cmd->parsed()) {
            return cmd_ingest(ingest_args);
        }
        if (bench_cmd->parsed()) {
            return cmd_bench(bench_args);
        }
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const bsccs::input_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const bsccs::convergence_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
}
