#include "rbff/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "rbff/error.hpp"
#include "rbff/log.hpp"
#include "rbff/parallel.hpp"

namespace rbff {

namespace {

struct Objective {
    double primal;
    double dual;
};

/// w_aug is [w; b]; it is recomputed from alpha so the gap is not polluted
/// by drift from the incremental updates.
Objective objectives(const Matrix& x, std::span<const double> y, const Vector& alpha, double c,
                     Vector& w, double& b) {
    const Eigen::Index n = x.rows();
    w.setZero();
    b = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (alpha(i) == 0.0) continue;
        w.noalias() += (alpha(i) * y[i]) * x.row(i).transpose();
        b += alpha(i) * y[i];
    }
    const double norm2 = w.squaredNorm() + b * b;
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        hinge += std::max(0.0, 1.0 - y[i] * (x.row(i).dot(w) + b));
    return {0.5 * norm2 + c * hinge, alpha.sum() - 0.5 * norm2};
}

}  // namespace

BinarySolveInfo solve_binary_svm(const Matrix& x, std::span<const double> y, const SvmParams& params,
                                 Vector& w, double& bias, Vector& alpha) {
    const Eigen::Index n = x.rows();
    if (static_cast<Eigen::Index>(y.size()) != n) throw ShapeError("solve_binary_svm: label count mismatch");
    if (!(params.c > 0.0)) throw ArgumentError("SVM C must be positive");

    const double c = params.c;
    alpha = Vector::Zero(n);
    w = Vector::Zero(x.cols());
    bias = 0.0;
    Vector q_diag(n);
    for (Eigen::Index i = 0; i < n; ++i) q_diag(i) = x.row(i).squaredNorm() + 1.0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(params.seed);

    BinarySolveInfo info;
    Vector w_check(x.cols());
    double b_check = 0.0;
    for (int epoch = 1; epoch <= params.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index i : order) {
            const double g = y[i] * (x.row(i).dot(w) + bias) - 1.0;
            double pg = g;
            if (alpha(i) <= 0.0) pg = std::min(g, 0.0);
            else if (alpha(i) >= c) pg = std::max(g, 0.0);
            if (pg == 0.0) continue;
            const double old = alpha(i);
            alpha(i) = std::clamp(old - g / q_diag(i), 0.0, c);
            const double step = (alpha(i) - old) * y[i];
            if (step != 0.0) {
                w.noalias() += step * x.row(i).transpose();
                bias += step;
            }
        }
        const Objective obj = objectives(x, y, alpha, c, w_check, b_check);
        info = {obj.primal, obj.dual, obj.primal - obj.dual, epoch, false};
        w = w_check;
        bias = b_check;
        if (info.gap <= params.tolerance * std::abs(info.primal)) {
            info.converged = true;
            break;
        }
    }
    if (!info.converged)
        warn("svm: no convergence after " + std::to_string(params.max_epochs) +
             " epochs, duality gap " + std::to_string(info.gap));
    return info;
}

SvmModel svm_fit(const Matrix& x, std::span<const int> labels, int num_classes, const SvmParams& params) {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw ShapeError("svm_fit: one label per row required");
    if (num_classes < 2) throw ArgumentError("svm_fit needs at least 2 classes");
    if (!x.allFinite()) throw ArgumentError("svm_fit: input contains NaN or Inf");
    for (int l : labels)
        if (l < 0 || l >= num_classes) throw ArgumentError("svm_fit: label out of range");

    SvmModel m;
    m.params = params;
    m.weights = Matrix::Zero(num_classes, x.cols());
    m.biases = Vector::Zero(num_classes);
    m.solve_info.resize(static_cast<std::size_t>(num_classes));

    parallel_for(static_cast<std::size_t>(num_classes), [&](std::size_t c) {
        std::vector<double> y(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
        SvmParams p = params;
        p.seed = params.seed + c;
        Vector w, alpha;
        double b = 0.0;
        m.solve_info[c] = solve_binary_svm(x, y, p, w, b, alpha);
        m.weights.row(static_cast<Eigen::Index>(c)) = w.transpose();
        m.biases(static_cast<Eigen::Index>(c)) = b;
    });
    return m;
}

Matrix svm_decision(const SvmModel& model, const Matrix& x) {
    if (x.cols() != model.input_dim())
        throw ShapeError("svm_decision: expected " + std::to_string(model.input_dim()) +
                         " features, got " + std::to_string(x.cols()));
    return (x * model.weights.transpose()).rowwise() + model.biases.transpose();
}

std::vector<int> svm_predict(const SvmModel& model, const Matrix& x) {
    const Matrix scores = svm_decision(model, x);
    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        int best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c)
            if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

}  // namespace rbff
