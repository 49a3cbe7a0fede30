#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rbff/reduce.hpp"

namespace rbff {

inline constexpr std::uint64_t kDefaultSvmSeed = 333;

struct SvmParams {
    double c = 1.0;
    /// Stop when primal - dual <= tolerance * |primal|.
    double tolerance = 1e-4;
    int max_epochs = 10000;
    std::uint64_t seed = kDefaultSvmSeed;
};

struct BinarySolveInfo {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    int epochs = 0;
    bool converged = false;
};

/// Linear one-vs-rest SVM. Row c of `weights` with `biases(c)` scores class c.
struct SvmModel {
    Matrix weights;  // k x dim
    Vector biases;   // k
    SvmParams params;
    std::vector<BinarySolveInfo> solve_info;

    int num_classes() const { return static_cast<int>(weights.rows()); }
    int input_dim() const { return static_cast<int>(weights.cols()); }
};

/// L2-regularised hinge-loss binary SVM solved by dual coordinate descent,
/// the bias handled as an extra constant-1 feature:
///
///   min_w 1/2 |w|^2 + C sum_i max(0, 1 - y_i w^T [x_i; 1])
///
/// `y` holds +1/-1. Coordinates are visited in a fresh seeded random order
/// every epoch. `alpha` receives the dual variables.
BinarySolveInfo solve_binary_svm(const Matrix& x, std::span<const double> y, const SvmParams& params,
                                 Vector& w, double& bias, Vector& alpha);

SvmModel svm_fit(const Matrix& x, std::span<const int> labels, int num_classes,
                 const SvmParams& params = {});

/// n x k matrix of w_c^T x + b_c.
Matrix svm_decision(const SvmModel& model, const Matrix& x);

/// Argmax of the decision scores; ties go to the lower class id.
std::vector<int> svm_predict(const SvmModel& model, const Matrix& x);

}  // namespace rbff
