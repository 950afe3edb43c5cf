#include "mlhat/cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mlhat/evaluation.hpp"
#include "mlhat/io.hpp"
#include "mlhat/models.hpp"
#include "mlhat/synth.hpp"
#include "mlhat/tree.hpp"

namespace fs = std::filesystem;

namespace mlhat {

namespace {

struct SourceOptions {
    std::string data;
    std::string format;
    std::string labels;
    bool no_header = false;
    std::vector<std::string> categorical;
    std::vector<std::string> numeric;
    std::optional<std::uint64_t> shuffle_seed;

    std::string preset;
    std::string kind;
    std::string drift = "sudden";
    std::uint64_t n = 50'000;
    std::uint64_t gen_seed = 1;
    std::uint64_t width = 0;
    std::size_t gen_labels = 0;
    std::optional<std::size_t> gen_numeric;
    std::optional<std::size_t> gen_categorical;
    std::optional<double> noise;
};

struct RunOptions {
    std::string model = "mlhat";
    std::string models = "mlhat,majority";
    std::string out;
    std::size_t report_every = 50;
    double alpha = 0.995;
    std::uint64_t max_instances = 0;
    std::string save_model;
    std::string resume;
    bool parallel = false;
    MLHATConfig config;
};

bool uses_generator(const SourceOptions& s) { return !s.preset.empty() || !s.kind.empty(); }

GeneratorSpec build_spec(const SourceOptions& s) {
    GeneratorSpec spec;
    if (!s.preset.empty()) {
        spec = preset(s.preset, s.n, s.gen_seed);
    } else {
        spec = default_spec(parse_generator_kind(s.kind), parse_drift_type(s.drift), s.n, s.gen_seed);
    }
    if (s.width > 0) {
        spec.schedule = DriftSchedule::standard(spec.schedule.type, s.n, s.width);
    }
    if (s.gen_labels > 0) spec.labels = s.gen_labels;
    if (s.gen_numeric) spec.numeric = *s.gen_numeric;
    if (s.gen_categorical) spec.categorical = *s.gen_categorical;
    if (s.noise) spec.label_noise = *s.noise;
    spec.validate();
    return spec;
}

DatasetSource build_source(const SourceOptions& s) {
    DatasetSource src;
    src.path = s.data;
    if (!s.format.empty()) {
        if (s.format == "arff") src.format = DatasetFormat::Arff;
        else if (s.format == "csv") src.format = DatasetFormat::Csv;
        else if (s.format == "native" || s.format == "stream") src.format = DatasetFormat::Native;
        else throw std::invalid_argument("unknown --format '" + s.format + "' (arff, csv, native)");
    }
    if (!s.labels.empty()) src.labels = LabelSpec::parse(s.labels);
    src.csv_header = !s.no_header;
    src.force_categorical = s.categorical;
    src.force_numeric = s.numeric;
    src.shuffle_seed = s.shuffle_seed;
    return src;
}

std::unique_ptr<InstanceStream> open_source(const SourceOptions& s, const StreamSchema* known) {
    if (uses_generator(s)) return std::make_unique<SyntheticStream>(build_spec(s));
    if (s.data.empty()) throw std::invalid_argument("no input: give --data, --generator or --kind");
    return open_dataset(build_source(s), known);
}

ConfigEntries echo(const std::string& command, const SourceOptions& s, const RunOptions& r,
                   const std::string& model) {
    ConfigEntries e;
    e.emplace_back("command", command);
    e.emplace_back("model", model);
    if (uses_generator(s)) {
        const auto spec = build_spec(s);
        SyntheticStream probe(spec);
        for (const auto& [k, v] : probe.metadata()) e.emplace_back("generator." + k, v);
    } else {
        e.emplace_back("data", s.data);
        e.emplace_back("format", s.format.empty() ? "auto" : s.format);
        e.emplace_back("labels", s.labels.empty() ? "auto" : s.labels);
        e.emplace_back("csv_header", s.no_header ? "false" : "true");
        if (s.shuffle_seed) e.emplace_back("shuffle_seed", std::to_string(*s.shuffle_seed));
    }
    e.emplace_back("report_every", std::to_string(r.report_every));
    e.emplace_back("alpha", format_number(r.alpha));
    e.emplace_back("max_instances", std::to_string(r.max_instances));
    if (!r.resume.empty()) e.emplace_back("resume", r.resume);
    for (const auto& [k, v] : describe(r.config)) e.emplace_back("mlhat." + k, v);
    return e;
}

fs::path output_dir(const RunOptions& r) {
    std::string dir = r.out;
    if (dir.empty()) {
        const char* env = std::getenv("MLHAT_OUT_DIR");
        dir = env && *env ? env : ".";
    }
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw std::runtime_error("cannot create output directory '" + dir + "'");
    return p;
}

void add_source_options(CLI::App* app, SourceOptions& s, bool with_files) {
    CLI::Option* data = nullptr;
    if (with_files) {
        data = app->add_option("--data", s.data, "Dataset file (.arff, .csv or native stream)");
        app->add_option("--format", s.format, "Force the dataset format: arff, csv, native");
        app->add_option("--labels", s.labels, "Label columns: first:C, last:C or names:a,b");
        app->add_flag("--no-header", s.no_header, "CSV file has no header row");
        app->add_option("--categorical", s.categorical, "CSV columns forced categorical")->delimiter(',');
        app->add_option("--numeric", s.numeric, "CSV columns forced numeric")->delimiter(',');
        app->add_option("--shuffle-seed", s.shuffle_seed, "Load the whole file and shuffle it with this seed");
    }
    auto* pre = app->add_option("--generator", s.preset, "Generator preset, e.g. SynHPSud");
    auto* kind = app->add_option("--kind", s.kind, "Generator family: randomtree, rbf, hyperplane");
    app->add_option("--drift", s.drift, "Drift type: none, sudden, gradual, incremental, recurrent")
        ->capture_default_str();
    app->add_option("-n,--n", s.n, "Generated stream length")->capture_default_str();
    app->add_option("--gen-seed", s.gen_seed, "Generator seed")->capture_default_str();
    app->add_option("--width", s.width, "Drift width (0: default of the drift type)")->capture_default_str();
    app->add_option("--gen-labels", s.gen_labels, "Override the generator's label count");
    app->add_option("--gen-numeric", s.gen_numeric, "Override the number of numeric features");
    app->add_option("--gen-categorical", s.gen_categorical, "Override the number of categorical features");
    app->add_option("--noise", s.noise, "Latent score noise of the generator");
    pre->excludes(kind);
    if (data) {
        data->excludes(pre);
        data->excludes(kind);
    }
}

void add_run_options(CLI::App* app, RunOptions& r) {
    auto& c = r.config;
    app->add_option("--out", r.out, "Output directory (default: $MLHAT_OUT_DIR or .)");
    app->add_option("--report-every", r.report_every, "Instances between report rows")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--alpha", r.alpha, "Forgetting factor of the faded metrics")->capture_default_str();
    app->add_option("--max-instances", r.max_instances, "Stop after this many instances (0: all)")
        ->capture_default_str();
    app->add_option("--split-confidence", c.split_confidence, "Split confidence delta_spl")->capture_default_str();
    app->add_option("--split-grace", c.split_grace, "Instances between split attempts")->capture_default_str();
    app->add_option("--replace-confidence", c.replace_confidence, "Alternate replacement confidence delta_alt")
        ->capture_default_str();
    app->add_option("--alternate-grace", c.alternate_grace, "Instances an alternate sees before comparison")
        ->capture_default_str();
    app->add_option("--cardinality-threshold", c.cardinality_threshold, "Leaf weight switching kNN to bagging (eta)")
        ->capture_default_str();
    app->add_option("--poisson-lambda", c.poisson_lambda, "Poisson parameter of the learning weight")
        ->capture_default_str();
    app->add_option("--threshold", c.decision_threshold, "Decision threshold on label probabilities")
        ->capture_default_str();
    app->add_option("--tie-threshold", c.tie_threshold, "Split when the bound drops below this (0: off)")
        ->capture_default_str();
    app->add_option("--combine-alternates", c.combine_alternates, "Blend alternate predictions (true/false)")
        ->capture_default_str();
    app->add_option("--drift-adaptation", c.drift_adaptation, "Spawn and promote alternates (true/false)")
        ->capture_default_str();
    app->add_option("--knn-k", c.knn_k, "Neighbours of the leaf kNN")->capture_default_str();
    app->add_option("--knn-window", c.knn_window, "kNN window (0: same as eta)")->capture_default_str();
    app->add_option("--lr", c.lr_learning_rate, "Logistic regression step size")->capture_default_str();
    app->add_option("--ensemble-size", c.ensemble_size, "Bagging members per label")->capture_default_str();
    app->add_option("--adwin-delta", c.adwin_delta, "Drift detector confidence")->capture_default_str();
    app->add_option("--adwin-buckets", c.adwin_buckets, "Drift detector buckets per row")->capture_default_str();
    app->add_option("--numeric-bins", c.numeric_bins, "Candidate thresholds per numeric feature")
        ->capture_default_str();
    app->add_option("--seed", c.seed, "Model seed")->capture_default_str();
}

struct RunResult {
    EvalReport report;
    std::unique_ptr<StreamClassifier> model;
    std::unique_ptr<InstanceStream> stream;
};

RunResult evaluate(const std::string& model_name, const SourceOptions& s, const RunOptions& r,
                   std::ostream* csv, bool model_column) {
    RunResult res;
    std::unique_ptr<MLHAT> resumed;
    if (!r.resume.empty()) {
        if (model_name != "mlhat") throw std::invalid_argument("--resume only applies to --model mlhat");
        std::ifstream in(r.resume, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open snapshot '" + r.resume + "'");
        resumed = std::make_unique<MLHAT>(MLHAT::load(in));
    }
    res.stream = open_source(s, resumed ? &resumed->schema() : nullptr);
    if (resumed) {
        if (!resumed->schema().same_shape(res.stream->schema())) {
            throw SchemaError("snapshot schema does not match the input stream");
        }
        res.model = std::move(resumed);
    } else {
        res.model = make_model(model_name, res.stream->schema(), r.config);
    }
    EvalConfig ec;
    ec.report_every = r.report_every;
    ec.alpha = r.alpha;
    ec.max_instances = r.max_instances;
    const std::string name = model_name;
    res.report = run_prequential(*res.model, *res.stream, ec, [&](const ReportRow& row) {
        if (csv) {
            write_report_row(*csv, row, model_column ? &name : nullptr);
            csv->flush();
        }
    });
    return res;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw std::runtime_error("failed writing '" + path.string() + "'");
}

int cmd_run(const SourceOptions& s, const RunOptions& r, std::ostream& out, std::ostream& err) {
    const auto dir = output_dir(r);
    const auto csv_path = dir / "report.csv";
    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
    csv << report_csv_header() << '\n';
    auto res = evaluate(r.model, s, r, &csv, false);
    csv.close();
    write_text(dir / "summary.json", report_summary_json(res.report, echo("run", s, r, r.model)));

    if (!r.save_model.empty()) {
        auto* tree = dynamic_cast<MLHAT*>(res.model.get());
        if (!tree) throw std::invalid_argument("--save-model only applies to --model mlhat");
        tree->refresh_schema(res.stream->schema());
        std::ofstream f(r.save_model, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write snapshot '" + r.save_model + "'");
        tree->save(f);
    }
    if (!res.report.complete()) {
        err << "error: " << res.report.error << " (partial report written to " << dir.string() << ")\n";
        return 1;
    }
    const auto& row = res.report.final_row();
    out << r.model << ": " << res.report.instances << " instances, example_f1=" << row.exact[4]
        << " micro_f1=" << row.exact[7] << " subset_accuracy=" << row.exact[0] << "\n";
    out << "report: " << csv_path.string() << "\n";
    return 0;
}

std::vector<std::string> split_models(const std::string& list) {
    std::vector<std::string> names;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        make_model(item, StreamSchema({FeatureKind::Numerical}, 1), MLHATConfig{});  // validates the name
        names.push_back(item);
    }
    if (names.empty()) throw std::invalid_argument("--models lists no model");
    return names;
}

int run_one_for_compare(const std::string& model, const SourceOptions& s, const RunOptions& r, const fs::path& dir,
                        const fs::path& part, std::ostream& err) {
    std::ofstream csv(part, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write '" + part.string() + "'");
    auto res = evaluate(model, s, r, &csv, true);
    csv.close();
    write_text(dir / ("summary_" + model + ".json"), report_summary_json(res.report, echo("compare", s, r, model)));
    if (!res.report.complete()) {
        err << "error (" << model << "): " << res.report.error << "\n";
        return 1;
    }
    return 0;
}

int cmd_compare(const SourceOptions& s, RunOptions r, std::ostream& out, std::ostream& err) {
    if (!r.resume.empty() || !r.save_model.empty()) {
        throw std::invalid_argument("compare does not support --resume or --save-model");
    }
    const auto models = split_models(r.models);
    const auto dir = output_dir(r);
    std::vector<fs::path> parts;
    for (const auto& m : models) parts.push_back(dir / ("compare_" + m + ".part"));

    int status = 0;
    if (r.parallel) {
        std::vector<pid_t> children;
        for (std::size_t i = 0; i < models.size(); ++i) {
            out.flush();
            err.flush();
            std::cout.flush();
            std::cerr.flush();
            const pid_t pid = fork();
            if (pid < 0) throw std::runtime_error("fork failed");
            if (pid == 0) {
                int code = 1;
                try {
                    code = run_one_for_compare(models[i], s, r, dir, parts[i], std::cerr);
                } catch (const std::exception& e) {
                    std::cerr << "error (" << models[i] << "): " << e.what() << "\n";
                }
                std::cerr.flush();
                _exit(code);
            }
            children.push_back(pid);
        }
        for (auto pid : children) {
            int ws = 0;
            if (waitpid(pid, &ws, 0) < 0 || !WIFEXITED(ws) || WEXITSTATUS(ws) != 0) status = 1;
        }
    } else {
        for (std::size_t i = 0; i < models.size(); ++i) {
            if (run_one_for_compare(models[i], s, r, dir, parts[i], err) != 0) status = 1;
        }
    }

    const auto merged = dir / "compare.csv";
    std::ofstream csv(merged, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write '" + merged.string() + "'");
    csv << report_csv_header(true) << '\n';
    for (const auto& p : parts) {
        std::ifstream in(p, std::ios::binary);
        csv << in.rdbuf();
        in.close();
        std::error_code ec;
        fs::remove(p, ec);
    }
    csv.close();
    out << "compare: " << merged.string() << "\n";
    return status;
}

int cmd_generate(const SourceOptions& s, const std::string& output, const RunOptions& r, std::ostream& out) {
    if (!uses_generator(s)) throw std::invalid_argument("generate needs --generator or --kind");
    const auto spec = build_spec(s);
    fs::path path = output;
    if (path.empty()) path = output_dir(r) / (spec.name + "-s" + std::to_string(spec.seed) + ".stream");
    SyntheticStream gen(spec);
    const auto n = write_stream(gen, path.string());
    out << "wrote " << n << " instances to " << path.string() << "\n";
    return 0;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open snapshot '" + path + "'");
    const MLHAT model = MLHAT::load(in);
    const auto r = model.report();
    out << "instances: " << r.instances << "\n"
        << "nodes: " << r.nodes << "\n"
        << "leaves: " << r.leaves << "\n"
        << "depth: " << r.depth << "\n"
        << "alternates: " << r.alternates << "\n"
        << "splits: " << r.splits << "\n"
        << "split_attempts: " << r.split_attempts << "\n"
        << "warnings: " << r.warnings << "\n"
        << "replacements: " << r.replacements << "\n"
        << "prunes: " << r.prunes << "\n"
        << "features: " << model.schema().feature_count() << "\n"
        << "labels: " << model.schema().label_count << "\n";
    for (const auto& [k, v] : describe(model.config())) out << "config." << k << ": " << v << "\n";
    return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-label Hoeffding adaptive trees on data streams", "mlhat"};
    app.require_subcommand(1);

    SourceOptions run_src, cmp_src, gen_src;
    RunOptions run_opts, cmp_opts, gen_opts;
    std::string gen_output, inspect_path;

    auto* run = app.add_subcommand("run", "Prequential evaluation of one model");
    run->add_option("--model", run_opts.model, "mlhat, majority, br-knn, br-bagging-lr")->capture_default_str();
    add_source_options(run, run_src, true);
    add_run_options(run, run_opts);
    run->add_option("--save-model", run_opts.save_model, "Write an mlhat snapshot after the run");
    run->add_option("--resume", run_opts.resume, "Continue from an mlhat snapshot");

    auto* cmp = app.add_subcommand("compare", "Run several models on the same source");
    cmp->add_option("--models", cmp_opts.models, "Comma separated model names")->capture_default_str();
    cmp->add_flag("--parallel", cmp_opts.parallel, "One process per model");
    add_source_options(cmp, cmp_src, true);
    add_run_options(cmp, cmp_opts);

    auto* gen = app.add_subcommand("generate", "Write a synthetic stream in the native format");
    add_source_options(gen, gen_src, false);
    gen->add_option("--output,-o", gen_output, "Output file (default: <out>/<name>-s<seed>.stream)");
    gen->add_option("--out", gen_opts.out, "Output directory when --output is not given");

    auto* inspect = app.add_subcommand("inspect", "Print the structure report of an mlhat snapshot");
    inspect->add_option("--model", inspect_path, "Snapshot file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*run) {
            run_opts.config.validate();
            return cmd_run(run_src, run_opts, out, err);
        }
        if (*cmp) {
            cmp_opts.config.validate();
            return cmd_compare(cmp_src, cmp_opts, out, err);
        }
        if (*gen) return cmd_generate(gen_src, gen_output, gen_opts, out);
        if (*inspect) return cmd_inspect(inspect_path, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace mlhat
