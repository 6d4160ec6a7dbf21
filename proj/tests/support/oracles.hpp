#pragma once

// Independent reference implementations used only by tests. Each one takes
// a deliberately different computational route from the library code.

#include <array>
#include <vector>

#include "vfiq/backbone.hpp"
#include "vfiq/coherence.hpp"
#include "vfiq/core.hpp"
#include "vfiq/trainer.hpp"

namespace vfiq::oracle {

/// Scalar-loop similarity features with moments from E[x^2] - E[x]^2.
SimilarityFeatures similarity_features(const FeatureStack& f0, const FeatureStack& ft,
                                       const FeatureStack& f1, double c1 = 1e-6,
                                       double c2 = 1e-6);

double coherence_score(const SimilarityFeatures& f, const ModelWeights& w, bool left_only = false);

/// Ranks by counting: 1 + #smaller + (#equal - 1) / 2.
std::vector<double> count_ranks(const std::vector<double>& v);
/// Pearson from raw sums.
double pearson_sums(const std::vector<double>& x, const std::vector<double>& y);
double srcc(const std::vector<double>& x, const std::vector<double>& y);
/// Tau-b by enumerating all pairs.
double krcc(const std::vector<double>& x, const std::vector<double>& y);

/// Direct 2D windowed SSIM with a 2D Gaussian built from exp(-(dx^2+dy^2)/2s^2).
double ssim(const Frame& a, const Frame& b);

/// Direct convolution with explicit zero-padding checks, accumulated in double.
FeatureMap conv2d(const FeatureMap& in, const Tensor& kernel, int stride, int pad);

/// Solves (X^T X + ridge I) w = X^T y with Gaussian elimination and partial
/// pivoting.
std::vector<double> normal_equations(const std::vector<std::vector<double>>& x,
                                     const std::vector<double>& y, double ridge);

}  // namespace vfiq::oracle
