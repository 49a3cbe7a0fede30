#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Dense>

namespace rbff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kDefaultPcaComponents = 600;
inline constexpr std::uint64_t kDefaultPcaSeed = 3;

struct PcaModel {
    Vector mean;                // d
    Matrix components;          // p x d, orthonormal rows
    Vector explained_variance;  // p, non-increasing
    std::uint64_t seed = kDefaultPcaSeed;

    int n_components() const { return static_cast<int>(components.rows()); }
    int input_dim() const { return static_cast<int>(mean.size()); }
};

/// Exact thin SVD of the centred data. The seed is carried for
/// configuration parity only; the solver is deterministic. Each component
/// is sign-flipped so its largest-magnitude entry is positive.
PcaModel pca_fit(const Matrix& x, int n_components = kDefaultPcaComponents,
                 std::uint64_t seed = kDefaultPcaSeed);
Matrix pca_transform(const PcaModel& model, const Matrix& x);
Matrix pca_inverse_transform(const PcaModel& model, const Matrix& z);

struct LdaModel {
    Vector mean;         // p, training mean subtracted before projecting
    Matrix projection;   // r x p, rows scaled to unit projected training variance
    Matrix class_means;  // k x r, projected class means
    Vector priors;       // k, empirical class frequencies
    /// Ridge added to the within-class scatter (0 when it was well conditioned).
    double ridge = 0.0;

    int output_dim() const { return static_cast<int>(projection.rows()); }
    int input_dim() const { return static_cast<int>(projection.cols()); }
};

/// Fisher discriminant directions: eigenvectors of S_w^-1 S_b with the
/// largest eigenvalues. Output dimension is min(k - 1, p) unless
/// `n_components` asks for fewer. When S_w is singular or its reciprocal
/// condition estimate drops below 1e-10 a ridge of 1e-6 * trace(S_w) / p is
/// added and a warning emitted.
LdaModel lda_fit(const Matrix& x, std::span<const int> labels, int num_classes,
                 std::optional<int> n_components = std::nullopt);
Matrix lda_transform(const LdaModel& model, const Matrix& x);

}  // namespace rbff
