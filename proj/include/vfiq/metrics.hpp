#pragma once

#include <array>
#include <span>
#include <vector>

#include "vfiq/core.hpp"

namespace vfiq {

/// Spearman correlation: Pearson of mid-ranks (ties share their mean rank).
/// Throws InputError on length mismatch or n < 2, NumericError when either
/// input is constant.
double srcc(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b in O(n log n): (C - D) / sqrt((n0 - n1)(n0 - n2)).
double krcc(std::span<const double> x, std::span<const double> y);

double plcc(std::span<const double> x, std::span<const double> y);

double rmse(std::span<const double> x, std::span<const double> y);

/// Mid-ranks, 1-based.
std::vector<double> fractional_ranks(std::span<const double> v);

/// Q' = (b1 - b2) / (1 + exp(-(Q - b3) / |b4|)) + b2
struct LogisticParams {
  std::array<double, 4> b{};
  double operator()(double q) const;
};

struct LogisticFit {
  LogisticParams params;
  std::vector<double> mapped;  ///< equals the raw predictions when !converged
  bool converged = false;
  int iterations = 0;
};

/// Gauss-Newton least squares of the four-parameter logistic, started at
/// b1 = max(mos), b2 = min(mos), b3 = median(pred), b4 = std(pred). Each step
/// is halved until the squared error does not increase. Gives up after 200
/// iterations and returns the raw predictions with converged = false.
LogisticFit logistic_map(std::span<const double> pred, std::span<const double> mos);

/// 10 log10(1 / mse) over all three channels. +infinity when identical.
double psnr(const Frame& a, const Frame& b);

/// Mean SSIM on BT.601 luma, 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2, valid windows only.
double ssim(const Frame& a, const Frame& b);

/// Planar luma Y = 0.299 R + 0.587 G + 0.114 B.
std::vector<double> luma(const Frame& f);

/// Normalized 11x11 Gaussian used by ssim(), separable form (11 taps).
std::array<double, 11> ssim_gaussian_taps();

}  // namespace vfiq
