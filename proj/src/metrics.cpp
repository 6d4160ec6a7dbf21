#include "vfiq/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vfiq/errors.hpp"

namespace vfiq {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, std::size_t min_n,
                const char* what) {
  if (x.size() != y.size()) throw InputError(std::string(what) + ": length mismatch");
  if (x.size() < min_n) {
    throw InputError(std::string(what) + ": needs at least " + std::to_string(min_n) + " values");
  }
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
}

void check_not_constant(std::span<const double> x, std::span<const double> y, const char* what) {
  if (is_constant(x) || is_constant(y)) {
    throw NumericError(std::string(what) + " undefined for constant input");
  }
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Sum over tie groups of t(t-1)/2 in an already sorted sequence.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq equal) {
  std::int64_t total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      total += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Stable merge sort of v counting the inversions it removes.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

}  // namespace

std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i + 1;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = mid_rank;
    i = j;
  }
  return ranks;
}

double srcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "srcc");
  check_not_constant(x, y, "srcc");
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

double krcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "krcc");
  check_not_constant(x, y, "krcc");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const std::int64_t n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t n1 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[order[a]] == x[order[b]]; });
  const std::int64_t n3 = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[order[a]] == x[order[b]] && y[order[a]] == y[order[b]];
  });

  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::vector<double> buf(n);
  const std::int64_t swaps = merge_count(ys, buf, 0, n);
  const std::int64_t n2 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });

  // Pairs untied in both: C + D = n0 - n1 - n2 + n3, and D = swaps.
  const std::int64_t c_minus_d = n0 - n1 - n2 + n3 - 2 * swaps;
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return std::clamp(static_cast<double>(c_minus_d) / denom, -1.0, 1.0);
}

double plcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2, "plcc");
  check_not_constant(x, y, "plcc");
  return pearson(x, y);
}

double rmse(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 1, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double LogisticParams::operator()(double q) const {
  return (b[0] - b[1]) / (1.0 + std::exp(-(q - b[2]) / std::abs(b[3]))) + b[1];
}

LogisticFit logistic_map(std::span<const double> pred, std::span<const double> mos) {
  check_pair(pred, mos, 5, "logistic_map");
  if (is_constant(pred)) throw NumericError("logistic_map undefined for constant predictions");
  constexpr int kMaxIterations = 200;
  constexpr double kTolerance = 1e-10;
  const std::size_t n = pred.size();

  std::vector<double> sorted(pred.begin(), pred.end());
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const double mp = mean(pred);
  double var = 0.0;
  for (double p : pred) var += (p - mp) * (p - mp);
  const double stddev = std::sqrt(var / static_cast<double>(n));

  LogisticParams params;
  params.b = {*std::max_element(mos.begin(), mos.end()), *std::min_element(mos.begin(), mos.end()),
              median, stddev};

  auto sse = [&](const LogisticParams& p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = p(pred[i]) - mos[i];
      acc += d * d;
    }
    return acc;
  };

  LogisticFit fit;
  double current = sse(params);
  Eigen::MatrixXd jac(n, 4);
  Eigen::VectorXd res(n);
  for (int it = 1; it <= kMaxIterations; ++it) {
    fit.iterations = it;
    const double b1 = params.b[0], b2 = params.b[1], b3 = params.b[2], b4 = params.b[3];
    const double s = std::abs(b4);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = (pred[i] - b3) / s;
      const double g = 1.0 / (1.0 + std::exp(-z));
      const double dg = g * (1.0 - g);
      res[static_cast<Eigen::Index>(i)] = mos[i] - ((b1 - b2) * g + b2);
      jac(static_cast<Eigen::Index>(i), 0) = g;
      jac(static_cast<Eigen::Index>(i), 1) = 1.0 - g;
      jac(static_cast<Eigen::Index>(i), 2) = -(b1 - b2) * dg / s;
      jac(static_cast<Eigen::Index>(i), 3) = -(b1 - b2) * dg * z / s * (b4 < 0 ? -1.0 : 1.0);
    }
    const Eigen::Vector4d step = jac.colPivHouseholderQr().solve(res);
    if (!step.allFinite()) break;

    double scale = 1.0;
    LogisticParams trial;
    double trial_sse = current;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
      for (int k = 0; k < 4; ++k) trial.b[k] = params.b[k] + scale * step[k];
      if (trial.b[3] == 0.0) continue;
      trial_sse = sse(trial);
      if (std::isfinite(trial_sse) && trial_sse <= current) {
        improved = true;
        break;
      }
    }
    if (!improved) {
      // No descent direction left: a stationary point of the squared error.
      fit.converged = std::isfinite(current);
      break;
    }
    const double change = current - trial_sse;
    params = trial;
    current = trial_sse;
    const double step_norm = scale * step.norm();
    const double param_norm = std::sqrt(params.b[0] * params.b[0] + params.b[1] * params.b[1] +
                                        params.b[2] * params.b[2] + params.b[3] * params.b[3]);
    if (change <= kTolerance * std::max(current, 1e-300) || step_norm <= kTolerance * (param_norm + kTolerance)) {
      fit.converged = true;
      break;
    }
  }

  fit.params = params;
  if (fit.converged) {
    fit.mapped.resize(n);
    for (std::size_t i = 0; i < n; ++i) fit.mapped[i] = params(pred[i]);
  } else {
    fit.mapped.assign(pred.begin(), pred.end());
  }
  return fit;
}

double psnr(const Frame& a, const Frame& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InputError("psnr: frames differ in size");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.data().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> luma(const Frame& f) {
  const std::size_t plane = static_cast<std::size_t>(f.width()) * f.height();
  std::vector<double> y(plane);
  const float* d = f.data().data();
  for (std::size_t p = 0; p < plane; ++p) {
    y[p] = 0.299 * d[p] + 0.587 * d[plane + p] + 0.114 * d[2 * plane + p];
  }
  return y;
}

std::array<double, 11> ssim_gaussian_taps() {
  std::array<double, 11> taps{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    taps[i] = std::exp(-(d * d) / (2.0 * 1.5 * 1.5));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

double ssim(const Frame& a, const Frame& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InputError("ssim: frames differ in size");
  }
  constexpr int kWin = 11;
  const int w = a.width();
  const int h = a.height();
  if (std::min(w, h) < kWin) throw InputError("ssim: image smaller than the 11x11 window");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const auto taps = ssim_gaussian_taps();
  const auto ya = luma(a);
  const auto yb = luma(b);

  const int ow = w - kWin + 1;
  const int oh = h - kWin + 1;
  // Separable valid filtering of the five moment images: rows first, then columns.
  std::array<std::vector<double>, 5> rows;
  for (auto& r : rows) r.assign(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s[5] = {};
      for (int k = 0; k < kWin; ++k) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x + k;
        const double t = taps[k];
        s[0] += t * ya[p];
        s[1] += t * yb[p];
        s[2] += t * ya[p] * ya[p];
        s[3] += t * yb[p] * yb[p];
        s[4] += t * ya[p] * yb[p];
      }
      for (int m = 0; m < 5; ++m) rows[m][static_cast<std::size_t>(y) * ow + x] = s[m];
    }
  }
  double total = 0.0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s[5] = {};
      for (int k = 0; k < kWin; ++k) {
        const std::size_t p = static_cast<std::size_t>(y + k) * ow + x;
        for (int m = 0; m < 5; ++m) s[m] += taps[k] * rows[m][p];
      }
      const double mu_a = s[0];
      const double mu_b = s[1];
      const double var_a = s[2] - mu_a * mu_a;
      const double var_b = s[3] - mu_b * mu_b;
      const double cov = s[4] - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
    }
  }
  return total / (static_cast<double>(ow) * oh);
}

}  // namespace vfiq
