// rbff: command-line front end for significance analysis, feature
// extraction, evaluation and reporting.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rbff/config.hpp"
#include "rbff/dataset.hpp"
#include "rbff/error.hpp"
#include "rbff/fixtures.hpp"
#include "rbff/fusion.hpp"
#include "rbff/mobilenet.hpp"
#include "rbff/pipeline.hpp"
#include "rbff/significance.hpp"
#include "rbff/toy_weights.hpp"

namespace fs = std::filesystem;
using namespace rbff;

namespace {

struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
};

constexpr FlagSpec kRunFlags[] = {
    {"--weights", "weights", "weight container (.rbff)"},
    {"--dataset", "dataset", "dataset root, one subdirectory per class"},
    {"--blocks", "blocks", "comma-separated block indices, e.g. 3,6,13,16"},
    {"--pca", "pca", "PCA components or 'none'"},
    {"--lda", "lda", "true|false"},
    {"--train-frac", "train_frac", "training fraction per class"},
    {"--repeats", "repeats", "number of random splits"},
    {"--kfold", "kfold", "use repeated stratified K-fold with K folds, or 'none'"},
    {"--svm-c", "svm_c", "SVM regularisation C"},
    {"--seed-pca", "seed_pca", "PCA seed"},
    {"--seed-split", "seed_split", "split seed"},
    {"--seed-svm", "seed_svm", "SVM seed"},
    {"--per-class", "per_class", "images per class for significance analysis"},
    {"--seed-sample", "seed_sample", "sampling seed for significance analysis"},
    {"--cache", "cache", "feature cache directory"},
    {"--out", "out", "output directory"},
};

struct RunFlags {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_file;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
    for (const auto& f : kRunFlags) flags.options[f.key] = cmd->add_option(f.flag, flags.values[f.key], f.help);
    cmd->add_option("--config", flags.config_file, "key = value config file; flags override it")
        ->check(CLI::ExistingFile);
}

RunConfig resolve(const RunFlags& flags) {
    RunConfig cfg;
    if (!flags.config_file.empty())
        for (const auto& [k, v] : read_config_file(flags.config_file)) cfg.set(k, v);
    for (const auto& [key, opt] : flags.options)
        if (opt->count() > 0) cfg.set(key, flags.values.at(key));
    return cfg;
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw ArgumentError(std::string(flag) + " is required");
}

fs::path out_dir(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    return cfg.out;
}

/// Writes `body` after the config header and checks the bytes landed.
void write_text(const fs::path& path, const RunConfig& cfg, const std::string& verb, const std::string& body) {
    std::ostringstream text;
    write_config_header(cfg, verb, text);
    text << body;
    {
        std::ofstream out(path, std::ios::binary);
        out << text.str();
        if (!out) throw Error("failed writing " + path.string());
    }
    if (fs::file_size(path) != text.str().size()) throw Error("short write to " + path.string());
    std::cout << "wrote " << path.string() << '\n';
}

nlohmann::json config_json(const RunConfig& cfg, const std::string& verb) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : cfg.entries()) j[k] = v;
    j["tool"] = "rbff " + std::string(kToolVersion);
    j["verb"] = verb;
    return j;
}

void write_container(const fs::path& path, const Container& c) {
    c.write(path);
    if (Container::read(path).serialize() != c.serialize()) throw Error("verification failed for " + path.string());
    std::cout << "wrote " << path.string() << '\n';
}

void progress(std::size_t done, std::size_t total) {
    if (done == total || done % 50 == 0) std::cerr << "\rextracting " << done << "/" << total << std::flush;
    if (done == total) std::cerr << '\n';
}

FeatureMatrix load_features(const RunConfig& cfg, const std::string& features_file) {
    if (!features_file.empty()) {
        const FeatureMatrix all = feature_matrix_from_container(Container::read(features_file));
        return all.block_set == cfg.blocks ? all : select_blocks(all, cfg.blocks);
    }
    require(cfg.weights, "--weights");
    require(cfg.dataset, "--dataset");
    const WeightContainer weights = load_weights(cfg.weights);
    const DatasetManifest dataset = ingest(cfg.dataset);
    if (!cfg.cache.empty()) return extract_batch_cached(weights, dataset, cfg.blocks, cfg.cache, progress);
    return extract_batch(weights, dataset, cfg.blocks, progress);
}

SignificanceReport run_analysis(const RunConfig& cfg) {
    require(cfg.weights, "--weights");
    require(cfg.dataset, "--dataset");
    const WeightContainer weights = load_weights(cfg.weights);
    check_preprocessing(weights);
    const DatasetManifest dataset = ingest(cfg.dataset);
    const auto sample = sample_images(dataset, cfg.per_class, cfg.seed_sample);
    std::vector<Tensor> images;
    images.reserve(sample.size());
    for (const auto& e : sample) images.push_back(preprocess_file(e.path));
    return analyze_significance(weights, images, {cfg.per_class, cfg.seed_sample});
}

std::string dataset_name(const RunConfig& cfg) {
    if (cfg.dataset.empty()) return "features";
    fs::path p = fs::path(cfg.dataset).lexically_normal();
    if (p.filename().empty()) p = p.parent_path();
    return p.filename().string();
}

void cmd_analyze(const RunConfig& cfg) {
    const SignificanceReport report = run_analysis(cfg);
    std::ostringstream body;
    write_significance_csv(report, body);
    write_text(out_dir(cfg) / "significance.csv", cfg, "analyze", body.str());
    std::cout << "ranking:";
    for (int b : report.ranking) std::cout << ' ' << b;
    std::cout << "\ntop 4 blocks: " << format_block_list(report.top_blocks(4)) << '\n';
}

void cmd_extract(const RunConfig& cfg) {
    require(cfg.weights, "--weights");
    require(cfg.dataset, "--dataset");
    const WeightContainer weights = load_weights(cfg.weights);
    const DatasetManifest dataset = ingest(cfg.dataset);
    const FeatureMatrix m = cfg.cache.empty() ? extract_batch(weights, dataset, cfg.blocks, progress)
                                              : extract_batch_cached(weights, dataset, cfg.blocks, cfg.cache, progress);
    Container c = to_container(m);
    c.metadata()["weights_hash"] = weights.hash();
    c.metadata()["dataset_hash"] = dataset.content_hash;
    c.metadata()["run_config"] = config_json(cfg, "extract");
    const fs::path dir = out_dir(cfg);
    write_container(dir / "features.rbff", c);
    std::ostringstream body;
    write_features_csv(m, body);
    write_text(dir / "features.csv", cfg, "extract", body.str());
}

void cmd_train(const RunConfig& cfg, const std::string& features_file) {
    const FeatureMatrix m = load_features(cfg, features_file);
    const ExperimentConfig ec = experiment_config(cfg);
    PipelineBundle bundle;
    bundle.models = fit_pipeline(to_matrix(m), m.labels, static_cast<int>(m.num_classes()), ec);
    bundle.block_set = m.block_set;
    bundle.class_names = m.class_names;
    bundle.weights_ref = cfg.weights;
    if (!cfg.weights.empty()) bundle.weights_hash = load_weights(cfg.weights).hash();
    bundle.run_config = config_json(cfg, "train");
    const fs::path dir = out_dir(cfg);
    write_container(dir / "bundle.rbff", bundle_to_container(bundle));

    const auto predicted = predict_pipeline(bundle.models, to_matrix(m));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == m.labels[i];
    char buf[128];
    std::snprintf(buf, sizeof buf, "samples: %zu\nfeature_dim: %zu\ntrain_accuracy: %.4f\n", m.rows, m.cols,
                  100.0 * static_cast<double>(correct) / static_cast<double>(m.rows));
    write_text(dir / "train.txt", cfg, "train", buf);
}

void cmd_evaluate(const RunConfig& cfg, const std::string& features_file) {
    const FeatureMatrix m = load_features(cfg, features_file);
    const EvalReport report = run_experiment(m, experiment_config(cfg));
    const fs::path dir = out_dir(cfg);
    std::ostringstream csv, text;
    write_eval_report_csv(report, csv);
    write_eval_report_text(report, text);
    write_text(dir / "report.csv", cfg, "evaluate", csv.str());
    write_text(dir / "report.txt", cfg, "evaluate", text.str());
    std::cout << "accuracy " << format_accuracy(report.accuracy_mean, report.accuracy_std) << " %\n";
}

void cmd_ablate(const RunConfig& cfg, const std::string& features_file) {
    const FeatureMatrix m = load_features(cfg, features_file);
    const auto rows = ablation_sweep(m, cfg.blocks, experiment_config(cfg));
    std::ostringstream body;
    write_ablation_csv(rows, cfg.blocks, dataset_name(cfg), body);
    write_text(out_dir(cfg) / "ablation.csv", cfg, "ablate", body.str());
}

void cmd_size_report(const RunConfig& cfg, const std::string& bundle_file) {
    require(cfg.weights, "--weights");
    require(bundle_file, "--bundle");
    const PipelineBundle bundle = bundle_from_container(Container::read(bundle_file));
    const SizeBreakdown sizes = size_report(bundle, load_weights(cfg.weights));
    std::ostringstream body;
    write_size_csv(sizes, body);
    write_text(out_dir(cfg) / "size.csv", cfg, "size-report", body.str());
}

void cmd_plot_data(const RunConfig& cfg, const std::string& features_file, const std::string& sweep) {
    const fs::path dir = out_dir(cfg);
    const SignificanceReport report = run_analysis(cfg);
    std::ostringstream sig;
    write_significance_csv(report, sig);
    write_text(dir / "plot_significance.csv", cfg, "plot-data", sig.str());

    const FeatureMatrix m = load_features(cfg, features_file);
    std::ostringstream body;
    body << "n_pca,accuracy_mean,accuracy_std\n";
    std::stringstream ss(sweep);
    std::string item;
    while (std::getline(ss, item, ',')) {
        ExperimentConfig ec = experiment_config(cfg);
        ec.n_pca = item == "none" ? std::nullopt : std::optional<int>(std::stoi(item));
        const EvalReport r = run_experiment(m, ec);
        char buf[96];
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", r.accuracy_mean, r.accuracy_std);
        body << item << buf;
    }
    write_text(dir / "plot_pca_sweep.csv", cfg, "plot-data", body.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RBFF aerial scene classification"};
    app.set_version_flag("--version", "rbff " + std::string(kToolVersion));
    app.require_subcommand(1);

    struct Verb {
        CLI::App* cmd;
        RunFlags flags;
    };
    std::map<std::string, Verb> verbs;
    const std::pair<const char*, const char*> run_verbs[] = {
        {"analyze", "rank blocks by ReLU significance"},
        {"extract", "extract fused block features"},
        {"train", "fit PCA/LDA/SVM on all images and write a bundle"},
        {"evaluate", "repeated stratified split evaluation"},
        {"ablate", "accuracy for each prefix of the block set"},
        {"size-report", "model size breakdown of a bundle"},
        {"plot-data", "CSV data for significance and PCA-component plots"},
    };
    for (const auto& [name, help] : run_verbs) {
        Verb& v = verbs[name];
        v.cmd = app.add_subcommand(name, help);
        add_run_flags(v.cmd, v.flags);
    }
    std::string features_file, bundle_file, pca_sweep = "50,100,200,400,600";
    for (const char* name : {"train", "evaluate", "ablate", "plot-data"})
        verbs[name].cmd->add_option("--features", features_file, "features container from 'extract'");
    verbs["size-report"].cmd->add_option("--bundle", bundle_file, "bundle from 'train'");
    verbs["plot-data"].cmd->add_option("--pca-sweep", pca_sweep, "comma-separated PCA component counts");

    std::uint64_t toy_seed = 0;
    std::string toy_out;
    auto* toy = app.add_subcommand("toy-weights", "write a seeded random weight container");
    toy->add_option("--seed", toy_seed, "RNG seed");
    toy->add_option("output", toy_out, "output file")->required();

    std::string fx_weights, fx_file;
    std::optional<double> fx_tolerance;
    auto* fx = app.add_subcommand("verify-fixtures", "compare forward taps with exporter fixtures");
    fx->add_option("--weights", fx_weights, "weight container")->required();
    fx->add_option("--fixtures", fx_file, "fixture container")->required();
    fx->add_option("--tolerance", fx_tolerance, "max abs difference (default from fixtures)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (toy->parsed()) {
            const WeightContainer w = make_toy_weights(toy_seed);
            write_container(toy_out, w.raw());
            return 0;
        }
        if (fx->parsed()) {
            const FixtureReport r = verify_fixtures(load_weights(fx_weights), Container::read(fx_file), fx_tolerance);
            for (const auto& c : r.checks)
                std::printf("%s %s block %d %s max_abs_diff=%.3g\n", c.passed ? "PASS" : "FAIL", c.image_id.c_str(),
                            c.tap.block, std::string(to_string(c.tap.site)).c_str(), c.max_abs_diff);
            std::printf("%zu checks, worst %.3g, tolerance %.3g\n", r.checks.size(), r.worst(), r.tolerance);
            return r.passed() ? 0 : 1;
        }
        for (auto& [name, verb] : verbs) {
            if (!verb.cmd->parsed()) continue;
            const RunConfig cfg = resolve(verb.flags);
            if (name == "analyze") cmd_analyze(cfg);
            else if (name == "extract") cmd_extract(cfg);
            else if (name == "train") cmd_train(cfg, features_file);
            else if (name == "evaluate") cmd_evaluate(cfg, features_file);
            else if (name == "ablate") cmd_ablate(cfg, features_file);
            else if (name == "size-report") cmd_size_report(cfg, bundle_file);
            else if (name == "plot-data") cmd_plot_data(cfg, features_file, pca_sweep);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
