#include "rbff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "rbff/error.hpp"
#include "rbff/parallel.hpp"

namespace rbff {

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(std::span<const int> labels) {
    int k = 0;
    for (int l : labels) {
        if (l < 0) throw ArgumentError("negative label");
        k = std::max(k, l + 1);
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].size() < 2)
            throw ArgumentError("class " + std::to_string(c) + " has " +
                                std::to_string(by_class[c].size()) +
                                " samples; stratified splitting needs at least 2");
    return by_class;
}

std::vector<float> to_floats(const Matrix& m) {
    // Row-major flattening.
    std::vector<float> out(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
    return out;
}

std::vector<float> to_floats(const Vector& v) {
    std::vector<float> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
    return out;
}

void add_matrix(Container& c, const std::string& name, const Matrix& m) {
    c.add(name, {m.rows(), m.cols()}, to_floats(m));
}

void add_vector(Container& c, const std::string& name, const Vector& v) {
    c.add(name, {v.size()}, to_floats(v));
}

Matrix get_matrix(const Container& c, const std::string& name) {
    const auto v = c.get(name);
    if (v.shape.size() != 2) throw FormatError("bundle tensor '" + name + "' must be 2-D");
    Matrix m(v.shape[0], v.shape[1]);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index col = 0; col < m.cols(); ++col)
            m(r, col) = v.values[static_cast<std::size_t>(r * m.cols() + col)];
    return m;
}

Vector get_vector(const Container& c, const std::string& name) {
    const auto v = c.get(name);
    if (v.shape.size() != 1) throw FormatError("bundle tensor '" + name + "' must be 1-D");
    Vector out(v.shape[0]);
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = v.values[static_cast<std::size_t>(i)];
    return out;
}

void add_pca(Container& c, const PcaModel& m) {
    add_vector(c, "pca/mean", m.mean);
    add_matrix(c, "pca/components", m.components);
    add_vector(c, "pca/explained_variance", m.explained_variance);
}

void add_lda(Container& c, const LdaModel& m) {
    add_vector(c, "lda/mean", m.mean);
    add_matrix(c, "lda/projection", m.projection);
    add_matrix(c, "lda/class_means", m.class_means);
    add_vector(c, "lda/priors", m.priors);
}

void add_svm(Container& c, const SvmModel& m) {
    add_matrix(c, "svm/weights", m.weights);
    add_vector(c, "svm/biases", m.biases);
}

nlohmann::json config_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["n_pca"] = c.n_pca ? nlohmann::json(*c.n_pca) : nlohmann::json("none");
    j["use_lda"] = c.use_lda;
    j["svm_c"] = c.svm.c;
    j["svm_tolerance"] = c.svm.tolerance;
    j["svm_max_epochs"] = c.svm.max_epochs;
    j["seed_pca"] = c.pca_seed;
    j["seed_split"] = c.split.seed;
    j["seed_svm"] = c.svm.seed;
    j["train_fraction"] = c.split.train_fraction;
    j["repeats"] = c.split.repeats;
    if (c.split.kfold) j["kfold"] = *c.split.kfold;
    return j;
}

}  // namespace

std::vector<Split> make_splits(std::span<const int> labels, const SplitSpec& spec) {
    if (spec.kfold) return make_kfold_splits(labels, *spec.kfold, spec.repeats, spec.seed);
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ArgumentError("train_fraction must lie in (0, 1)");
    if (spec.repeats < 1) throw ArgumentError("repeats must be positive");
    auto by_class = rows_by_class(labels);
    std::mt19937_64 rng(spec.seed);
    std::vector<Split> splits;
    for (int r = 0; r < spec.repeats; ++r) {
        Split s;
        for (auto& rows : by_class) {
            const auto n = rows.size();
            auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
            n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
            std::shuffle(rows.begin(), rows.end(), rng);
            s.train.insert(s.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
            s.test.insert(s.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
        }
        std::sort(s.train.begin(), s.train.end());
        std::sort(s.test.begin(), s.test.end());
        splits.push_back(std::move(s));
    }
    return splits;
}

std::vector<Split> make_kfold_splits(std::span<const int> labels, int folds, int repeats,
                                     std::uint64_t seed) {
    if (folds < 2) throw ArgumentError("k-fold needs at least 2 folds");
    if (repeats < 1) throw ArgumentError("repeats must be positive");
    auto by_class = rows_by_class(labels);
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].size() < static_cast<std::size_t>(folds))
            throw ArgumentError("class " + std::to_string(c) + " has fewer samples than folds");
    std::mt19937_64 rng(seed);
    std::vector<Split> splits;
    for (int r = 0; r < repeats; ++r) {
        std::vector<int> fold_of(labels.size(), 0);
        for (auto& rows : by_class) {
            std::shuffle(rows.begin(), rows.end(), rng);
            for (std::size_t i = 0; i < rows.size(); ++i) fold_of[rows[i]] = static_cast<int>(i % folds);
        }
        for (int f = 0; f < folds; ++f) {
            Split s;
            for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? s.test : s.train).push_back(i);
            splits.push_back(std::move(s));
        }
    }
    return splits;
}

Matrix to_matrix(const FeatureMatrix& m) {
    Matrix x(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.values[r * m.cols + c];
    return x;
}

Matrix gather_rows(const FeatureMatrix& m, std::span<const std::size_t> rows) {
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= m.rows) throw ArgumentError("row index out of range");
        const auto src = m.row(rows[i]);
        for (std::size_t c = 0; c < m.cols; ++c) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = src[c];
    }
    return x;
}

FittedPipeline fit_pipeline(const Matrix& x, std::span<const int> labels, int num_classes,
                            const ExperimentConfig& config) {
    FittedPipeline p;
    Matrix z = x;
    if (config.n_pca) {
        p.pca = pca_fit(z, *config.n_pca, config.pca_seed);
        z = pca_transform(*p.pca, z);
    }
    if (config.use_lda) {
        p.lda = lda_fit(z, labels, num_classes);
        z = lda_transform(*p.lda, z);
    }
    p.svm = svm_fit(z, labels, num_classes, config.svm);
    return p;
}

Matrix transform_pipeline(const FittedPipeline& p, const Matrix& x) {
    Matrix z = x;
    if (p.pca) z = pca_transform(*p.pca, z);
    if (p.lda) z = lda_transform(*p.lda, z);
    return z;
}

std::vector<int> predict_pipeline(const FittedPipeline& p, const Matrix& x) {
    return svm_predict(p.svm, transform_pipeline(p, x));
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

std::string format_accuracy(double mean, double std) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f", mean, std);
    return buf;
}

EvalReport run_experiment(const FeatureMatrix& features, const ExperimentConfig& config) {
    features.validate();
    const int k = static_cast<int>(features.num_classes());
    if (k < 2) throw ArgumentError("run_experiment needs at least 2 classes");
    const auto splits = make_splits(features.labels, config.split);

    struct SplitResult {
        double accuracy = 0.0;
        std::vector<std::vector<long>> confusion;
    };
    std::vector<SplitResult> results(splits.size());

    parallel_for(splits.size(), [&](std::size_t s) {
        const Split& split = splits[s];
        std::vector<std::size_t> overlap;
        std::set_intersection(split.train.begin(), split.train.end(), split.test.begin(), split.test.end(),
                              std::back_inserter(overlap));
        if (!overlap.empty())
            throw LeakageError("split " + std::to_string(s) + ": test row " + std::to_string(overlap.front()) +
                               " is also a training row");
        if (split.test.empty()) throw ArgumentError("split " + std::to_string(s) + " has no test rows");

        std::vector<int> y_train;
        for (auto i : split.train) y_train.push_back(features.labels[i]);
        const FittedPipeline fitted = fit_pipeline(gather_rows(features, split.train), y_train, k, config);

        Matrix x_test = gather_rows(features, split.test);
        if (config.test_feature_hook) config.test_feature_hook(x_test, split.test);
        const auto predicted = predict_pipeline(fitted, x_test);

        SplitResult& r = results[s];
        r.confusion.assign(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
        std::size_t correct = 0;
        for (std::size_t i = 0; i < split.test.size(); ++i) {
            const int truth = features.labels[split.test[i]];
            correct += predicted[i] == truth;
            ++r.confusion[truth][predicted[i]];
        }
        r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(split.test.size());
    });

    EvalReport report;
    report.config = config;
    report.block_set = features.block_set;
    report.class_names = features.class_names;
    report.feature_dim = features.cols;
    report.confusion.assign(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
    for (const auto& r : results) {
        report.split_accuracies.push_back(r.accuracy);
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) report.confusion[a][b] += r.confusion[a][b];
    }
    const auto ms = mean_std(report.split_accuracies);
    report.accuracy_mean = ms.mean;
    report.accuracy_std = ms.std;
    return report;
}

Container bundle_to_container(const PipelineBundle& b) {
    Container c{std::string(kBundleKind)};
    auto& meta = c.metadata();
    meta["block_set"] = b.block_set;
    meta["class_names"] = b.class_names;
    meta["weights_ref"] = b.weights_ref;
    meta["weights_hash"] = b.weights_hash;
    meta["run_config"] = b.run_config;
    meta["components"] = nlohmann::json::array();
    if (b.models.pca) {
        meta["components"].push_back("pca");
        meta["pca_seed"] = b.models.pca->seed;
        add_pca(c, *b.models.pca);
    }
    if (b.models.lda) {
        meta["components"].push_back("lda");
        meta["lda_ridge"] = b.models.lda->ridge;
        add_lda(c, *b.models.lda);
    }
    meta["components"].push_back("svm");
    const auto& sp = b.models.svm.params;
    meta["svm_params"] = {{"c", sp.c}, {"tolerance", sp.tolerance}, {"max_epochs", sp.max_epochs}, {"seed", sp.seed}};
    add_svm(c, b.models.svm);
    return c;
}

PipelineBundle bundle_from_container(const Container& c) {
    if (c.kind() != kBundleKind) throw FormatError("container kind is '" + c.kind() + "', expected 'bundle'");
    PipelineBundle b;
    try {
        const auto& meta = c.metadata();
        b.block_set = meta.at("block_set").get<std::vector<int>>();
        b.class_names = meta.at("class_names").get<std::vector<std::string>>();
        b.weights_ref = meta.at("weights_ref").get<std::string>();
        b.weights_hash = meta.at("weights_hash").get<std::string>();
        b.run_config = meta.at("run_config");
        const auto components = meta.at("components").get<std::vector<std::string>>();
        auto has = [&](const char* name) { return std::find(components.begin(), components.end(), name) != components.end(); };
        if (has("pca")) {
            PcaModel p;
            p.mean = get_vector(c, "pca/mean");
            p.components = get_matrix(c, "pca/components");
            p.explained_variance = get_vector(c, "pca/explained_variance");
            p.seed = meta.at("pca_seed").get<std::uint64_t>();
            b.models.pca = std::move(p);
        }
        if (has("lda")) {
            LdaModel l;
            l.mean = get_vector(c, "lda/mean");
            l.projection = get_matrix(c, "lda/projection");
            l.class_means = get_matrix(c, "lda/class_means");
            l.priors = get_vector(c, "lda/priors");
            l.ridge = meta.at("lda_ridge").get<double>();
            b.models.lda = std::move(l);
        }
        const auto& sp = meta.at("svm_params");
        b.models.svm.params = {sp.at("c").get<double>(), sp.at("tolerance").get<double>(),
                               sp.at("max_epochs").get<int>(), sp.at("seed").get<std::uint64_t>()};
        b.models.svm.weights = get_matrix(c, "svm/weights");
        b.models.svm.biases = get_vector(c, "svm/biases");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bundle metadata: ") + e.what());
    }
    return b;
}

SizeBreakdown size_report(const PipelineBundle& bundle, const WeightContainer& weights) {
    check_block_set(bundle.block_set);
    SizeBreakdown s;
    s.base = serialized_size_bytes(truncate(weights, bundle.block_set.back()));
    if (bundle.models.pca) {
        Container c{std::string(kBundleKind)};
        add_pca(c, *bundle.models.pca);
        s.pca = c.serialized_size();
    }
    if (bundle.models.lda) {
        Container c{std::string(kBundleKind)};
        add_lda(c, *bundle.models.lda);
        s.lda = c.serialized_size();
    }
    Container c{std::string(kBundleKind)};
    add_svm(c, bundle.models.svm);
    s.svm = c.serialized_size();
    s.total = s.base + s.pca + s.lda + s.svm;
    return s;
}

std::vector<AblationRow> ablation_sweep(const FeatureMatrix& features, std::span<const int> order,
                                        const ExperimentConfig& config) {
    if (order.empty()) throw ArgumentError("ablation_sweep: empty block order");
    std::vector<AblationRow> rows;
    for (std::size_t i = 1; i <= order.size(); ++i) {
        std::vector<int> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(i));
        std::sort(subset.begin(), subset.end());
        rows.push_back({subset, run_experiment(select_blocks(features, subset), config)});
    }
    return rows;
}

void write_eval_report_csv(const EvalReport& r, std::ostream& out) {
    char buf[96];
    out << "split,accuracy\n";
    for (std::size_t i = 0; i < r.split_accuracies.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", i, r.split_accuracies[i]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "mean,%.6f\nstd,%.6f\n", r.accuracy_mean, r.accuracy_std);
    out << buf;
}

void write_eval_report_text(const EvalReport& r, std::ostream& out) {
    out << "accuracy: " << format_accuracy(r.accuracy_mean, r.accuracy_std) << " %\n";
    out << "splits: " << r.split_accuracies.size() << "\n";
    out << "feature_dim: " << r.feature_dim << "\n";
    out << "blocks:";
    for (int b : r.block_set) out << ' ' << b;
    out << "\nconfig: " << config_json(r.config).dump() << "\n";
    out << "confusion (rows = true class, columns = predicted):\n";
    for (std::size_t a = 0; a < r.confusion.size(); ++a) {
        out << "  " << (a < r.class_names.size() ? r.class_names[a] : std::to_string(a)) << ':';
        for (long v : r.confusion[a]) out << ' ' << v;
        out << '\n';
    }
}

void write_ablation_csv(const std::vector<AblationRow>& rows, std::span<const int> all_blocks,
                        const std::string& dataset_name, std::ostream& out) {
    out << "dataset";
    for (int b : all_blocks) out << ",layer_" << b;
    out << ",feature_dim,accuracy_mean,accuracy_std,accuracy\n";
    char buf[64];
    for (const auto& row : rows) {
        out << dataset_name;
        for (int b : all_blocks)
            out << ',' << (std::find(row.blocks.begin(), row.blocks.end(), b) != row.blocks.end() ? 1 : 0);
        std::snprintf(buf, sizeof buf, ",%zu,%.6f,%.6f,", row.report.feature_dim, row.report.accuracy_mean,
                      row.report.accuracy_std);
        out << buf << format_accuracy(row.report.accuracy_mean, row.report.accuracy_std) << '\n';
    }
}

void write_size_csv(const SizeBreakdown& s, std::ostream& out) {
    char buf[64];
    out << "component,bytes,megabytes\n";
    const std::pair<const char*, std::size_t> parts[] = {
        {"base", s.base}, {"pca", s.pca}, {"lda", s.lda}, {"svm", s.svm}, {"total", s.total}};
    for (const auto& [name, bytes] : parts) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.4f\n", name, bytes, static_cast<double>(bytes) / 1e6);
        out << buf;
    }
}

}  // namespace rbff
