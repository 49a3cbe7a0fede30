#include "rbff/reduce.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "rbff/error.hpp"
#include "rbff/log.hpp"

namespace rbff {

namespace {

constexpr double kMinReciprocalCondition = 1e-10;
constexpr double kRidgeScale = 1e-6;

void check_finite(const Matrix& x, const char* what) {
    if (!x.allFinite()) throw ArgumentError(std::string(what) + ": input contains NaN or Inf");
}

/// Flip the sign of each row so its largest-magnitude entry is positive.
void canonicalize_row_signs(Matrix& rows) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        Eigen::Index arg = 0;
        rows.row(r).cwiseAbs().maxCoeff(&arg);
        if (rows(r, arg) < 0) rows.row(r) *= -1.0;
    }
}

std::vector<Eigen::Index> class_counts(std::span<const int> labels, int num_classes) {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(num_classes), 0);
    for (int l : labels) {
        if (l < 0 || l >= num_classes)
            throw ArgumentError("label " + std::to_string(l) + " outside [0, " +
                                std::to_string(num_classes) + ")");
        ++counts[static_cast<std::size_t>(l)];
    }
    return counts;
}

Matrix class_means_of(const Matrix& x, std::span<const int> labels, int k,
                      const std::vector<Eigen::Index>& counts) {
    Matrix means = Matrix::Zero(k, x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) means.row(labels[i]) += x.row(i);
    for (int c = 0; c < k; ++c)
        if (counts[c] > 0) means.row(c) /= static_cast<double>(counts[c]);
    return means;
}

}  // namespace

PcaModel pca_fit(const Matrix& x, int n_components, std::uint64_t seed) {
    check_finite(x, "pca_fit");
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (n < 2) throw ArgumentError("pca_fit needs at least 2 samples");
    if (n_components < 1 || n_components > std::min(n, d))
        throw ArgumentError("pca_fit: n_components=" + std::to_string(n_components) +
                            " must be in 1..min(n_samples, n_features)=" +
                            std::to_string(std::min(n, d)));

    PcaModel m;
    m.seed = seed;
    m.mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - m.mean.transpose();
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    m.components = svd.matrixV().leftCols(n_components).transpose();
    canonicalize_row_signs(m.components);
    m.explained_variance = s.head(n_components).array().square() / static_cast<double>(n - 1);
    return m;
}

Matrix pca_transform(const PcaModel& model, const Matrix& x) {
    if (x.cols() != model.input_dim())
        throw ShapeError("pca_transform: expected " + std::to_string(model.input_dim()) +
                         " features, got " + std::to_string(x.cols()));
    return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Matrix pca_inverse_transform(const PcaModel& model, const Matrix& z) {
    if (z.cols() != model.n_components())
        throw ShapeError("pca_inverse_transform: expected " + std::to_string(model.n_components()) +
                         " components, got " + std::to_string(z.cols()));
    return (z * model.components).rowwise() + model.mean.transpose();
}

LdaModel lda_fit(const Matrix& x, std::span<const int> labels, int num_classes,
                 std::optional<int> n_components) {
    check_finite(x, "lda_fit");
    if (static_cast<Eigen::Index>(labels.size()) != x.rows())
        throw ShapeError("lda_fit: one label per row required");
    if (num_classes < 2) throw ArgumentError("lda_fit needs at least 2 classes");
    const auto counts = class_counts(labels, num_classes);
    for (int c = 0; c < num_classes; ++c)
        if (counts[c] < 2)
            throw ArgumentError("lda_fit: class " + std::to_string(c) + " has fewer than 2 samples");

    const Eigen::Index p = x.cols();
    int r = static_cast<int>(std::min<Eigen::Index>(num_classes - 1, p));
    if (n_components) {
        if (*n_components < 1 || *n_components > r)
            throw ArgumentError("lda_fit: n_components must be in 1.." + std::to_string(r));
        r = *n_components;
    }

    const Matrix means = class_means_of(x, labels, num_classes, counts);
    const Vector overall = x.colwise().mean().transpose();

    Matrix centered = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) centered.row(i) -= means.row(labels[i]);
    Matrix within = Matrix::Zero(p, p);
    within.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    within = within.selfadjointView<Eigen::Lower>();

    // S_b = B B^T with one column per class.
    Matrix between_factor(p, num_classes);
    for (int c = 0; c < num_classes; ++c)
        between_factor.col(c) =
            std::sqrt(static_cast<double>(counts[c])) * (means.row(c).transpose() - overall);

    LdaModel m;
    Eigen::LLT<Matrix> llt(within);
    if (llt.info() != Eigen::Success || llt.rcond() < kMinReciprocalCondition) {
        const double trace = within.trace();
        m.ridge = trace > 0.0 ? kRidgeScale * trace / static_cast<double>(p) : kRidgeScale;
        warn("lda_fit: within-class scatter is ill-conditioned; adding ridge " + std::to_string(m.ridge));
        within.diagonal().array() += m.ridge;
        llt.compute(within);
        if (llt.info() != Eigen::Success) throw Error("lda_fit: regularised scatter is not positive definite");
    }

    // Non-zero eigenpairs of S_w^-1 B B^T come from the k x k matrix
    // G = B^T S_w^-1 B: if G q = mu q then v = S_w^-1 B q satisfies
    // S_w^-1 S_b v = mu v. Each axis is scaled to unit variance over the
    // training rows.
    const Matrix solved = llt.solve(between_factor);
    Matrix gram = between_factor.transpose() * solved;
    gram = 0.5 * (gram + gram.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector& mu = eig.eigenvalues();  // ascending
    const double mu_max = std::max(mu.maxCoeff(), 0.0);

    m.projection = Matrix::Zero(r, p);
    for (int j = 0; j < r; ++j) {
        const Eigen::Index col = num_classes - 1 - j;
        if (!(mu(col) > 1e-12 * mu_max) || mu(col) <= 0.0) {
            warn("lda_fit: discriminant direction " + std::to_string(j) + " is degenerate");
            continue;
        }
        const Vector v = solved * eig.eigenvectors().col(col);
        const double total = ((centered * v).squaredNorm() + (between_factor.transpose() * v).squaredNorm()) /
                             static_cast<double>(x.rows() - 1);
        m.projection.row(j) = v.transpose() / std::sqrt(total);
    }
    canonicalize_row_signs(m.projection);

    m.mean = overall;
    m.class_means = (means.rowwise() - overall.transpose()) * m.projection.transpose();
    m.priors.resize(num_classes);
    for (int c = 0; c < num_classes; ++c)
        m.priors(c) = static_cast<double>(counts[c]) / static_cast<double>(x.rows());
    return m;
}

Matrix lda_transform(const LdaModel& model, const Matrix& x) {
    if (x.cols() != model.input_dim())
        throw ShapeError("lda_transform: expected " + std::to_string(model.input_dim()) +
                         " features, got " + std::to_string(x.cols()));
    return (x.rowwise() - model.mean.transpose()) * model.projection.transpose();
}

}  // namespace rbff
