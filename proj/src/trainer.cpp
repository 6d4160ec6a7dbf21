#include "vfiq/trainer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "vfiq/errors.hpp"
#include "vfiq/imageio.hpp"

namespace vfiq {

namespace {
constexpr int kParams = 2 * kNumStages;
constexpr double kRidge = 1e-9;
}  // namespace

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw InputError("initial_lr must be positive");
  if (lr_halving_interval <= 0) throw InputError("lr_halving_interval must be positive");
  if (max_iterations < 0) throw InputError("max_iterations must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InputError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InputError("adam_eps must be positive");
}

SimilarityTable SimilarityTable::select(const DatasetManifest& manifest) const {
  std::map<std::string, const SimilarityRow*> by_id;
  for (const auto& r : rows) by_id.emplace(r.id, &r);
  SimilarityTable out;
  for (const auto& rec : manifest.records) {
    const auto it = by_id.find(rec.id);
    if (it == by_id.end()) throw InputError("no similarity row for '" + rec.id + "'");
    out.rows.push_back(*it->second);
  }
  return out;
}

double learning_rate(const TrainConfig& cfg, int iteration) {
  return std::ldexp(cfg.initial_lr, -(iteration / cfg.lr_halving_interval));
}

double mse_loss(std::span<const double> pred, std::span<const double> mos) {
  if (pred.size() != mos.size()) throw InputError("mse_loss length mismatch");
  if (pred.empty()) throw InputError("mse_loss on empty lists");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - mos[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

SimilarityTable precompute_similarities(const DatasetManifest& manifest, const Backbone& backbone,
                                        const SimilarityConstants& constants, int threads) {
  for (const auto& r : manifest.records) {
    if (!r.mos) throw InputError("record '" + r.id + "' has no mos");
  }
  SimilarityTable table;
  table.rows.resize(manifest.size());

  auto work = [&](std::size_t i) {
    const auto& r = manifest.records[i];
    try {
      const Frame i0 = load_frame(r.path_i0);
      const Frame it = load_frame(r.path_it);
      const Frame i1 = load_frame(r.path_i1);
      table.rows[i] = {r.id, score_triplet_features(backbone, i0, it, i1, constants), *r.mos};
    } catch (const Error& e) {
      throw InputError("triplet '" + r.id + "': " + e.what());
    }
  };

  const auto n = manifest.size();
  const auto workers = static_cast<std::size_t>(std::clamp<int>(threads, 1, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return table;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::size_t first_error_index = n;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (i < first_error_index) {
            first_error_index = i;
            first_error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return table;
}

SimilarityTable precompute_similarities(const DatasetManifest& manifest,
                                        const BackboneWeights& weights) {
  return precompute_similarities(manifest, Backbone(weights));
}

std::vector<double> predict(const SimilarityTable& table, const ModelWeights& w, ScoreMode mode) {
  std::vector<double> out;
  out.reserve(table.size());
  for (const auto& r : table.rows) out.push_back(coherence_score(r.features, w, mode));
  return out;
}

std::vector<double> targets(const SimilarityTable& table) {
  std::vector<double> out;
  out.reserve(table.size());
  for (const auto& r : table.rows) out.push_back(r.mos);
  return out;
}

TrainResult train(const SimilarityTable& table, const TrainConfig& cfg,
                  const std::function<void(const TrainLogEntry&)>& on_step) {
  cfg.validate();
  if (table.empty()) throw InputError("cannot train on an empty table");

  const std::size_t n = table.size();
  std::vector<std::array<double, kParams>> x(n);
  std::vector<double> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    x[r] = design_row(table.rows[r].features, cfg.mode);
    y[r] = table.rows[r].mos;
  }

  std::array<double, kParams> theta{};
  for (int i = 0; i < kNumStages; ++i) {
    theta[i] = cfg.init_alpha;
    theta[kNumStages + i] = cfg.init_beta;
  }
  std::array<double, kParams> m{};
  std::array<double, kParams> v{};
  std::vector<double> residual(n);

  auto evaluate = [&](std::array<double, kParams>& grad) {
    double loss = 0.0;
    grad.fill(0.0);
    for (std::size_t r = 0; r < n; ++r) {
      double pred = 0.0;
      for (int p = 0; p < kParams; ++p) pred += theta[p] * x[r][p];
      residual[r] = pred - y[r];
      loss += residual[r] * residual[r];
      for (int p = 0; p < kParams; ++p) grad[p] += residual[r] * x[r][p];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& g : grad) g *= 2.0 * inv_n;
    return loss * inv_n;
  };

  TrainResult result;
  result.log.reserve(cfg.max_iterations);
  std::array<double, kParams> grad{};
  double b1_pow = 1.0;
  double b2_pow = 1.0;
  for (int k = 0; k < cfg.max_iterations; ++k) {
    const double loss = evaluate(grad);
    const double lr = learning_rate(cfg, k);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "training diverged: loss " << loss << " at iteration " << k << " (lr " << lr << ")";
      throw NumericError(os.str());
    }
    const TrainLogEntry entry{k, lr, loss};
    result.log.push_back(entry);
    if (on_step) on_step(entry);

    b1_pow *= cfg.adam_beta1;
    b2_pow *= cfg.adam_beta2;
    for (int p = 0; p < kParams; ++p) {
      m[p] = cfg.adam_beta1 * m[p] + (1.0 - cfg.adam_beta1) * grad[p];
      v[p] = cfg.adam_beta2 * v[p] + (1.0 - cfg.adam_beta2) * grad[p] * grad[p];
      const double m_hat = m[p] / (1.0 - b1_pow);
      const double v_hat = v[p] / (1.0 - b2_pow);
      theta[p] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
  result.final_loss = evaluate(grad);
  if (!std::isfinite(result.final_loss)) throw NumericError("training produced a non-finite loss");

  for (int i = 0; i < kNumStages; ++i) {
    result.weights.alpha[i] = theta[i];
    result.weights.beta[i] = theta[kNumStages + i];
  }
  return result;
}

ModelWeights least_squares_fit(const SimilarityTable& table, ScoreMode mode) {
  if (table.empty()) throw InputError("cannot fit an empty table");
  // Ridge least squares as the stacked system [X; sqrt(ridge) I] w = [y; 0].
  // It has the same minimizer as (X^T X + ridge I) w = X^T y but QR on it
  // keeps the accuracy the squared condition number of X^T X would lose.
  const auto n = static_cast<Eigen::Index>(table.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + kParams, kParams);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + kParams);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = design_row(table.rows[r].features, mode);
    for (int p = 0; p < kParams; ++p) a(r, p) = row[p];
    b[r] = table.rows[r].mos;
  }
  a.bottomRows(kParams).diagonal().setConstant(std::sqrt(kRidge));
  const Eigen::VectorXd sol = a.householderQr().solve(b);
  ModelWeights w;
  for (int i = 0; i < kNumStages; ++i) {
    w.alpha[i] = sol[i];
    w.beta[i] = sol[kNumStages + i];
  }
  return w;
}

void save_table(const SimilarityTable& table, const std::filesystem::path& path, ScoreMode mode) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write table " + path.string());
  out << "id,l0,l1,l2,l3,l4,l5,s0,s1,s2,s3,s4,s5,mos\n";
  out.precision(17);
  for (const auto& r : table.rows) {
    out << detail::quote_csv(r.id);
    for (double v : design_row(r.features, mode)) out << ',' << v;
    out << ',' << r.mos << '\n';
  }
}

SimilarityTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open table " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,l0,l1,l2,l3,l4,l5,s0,s1,s2,s3,s4,s5,mos", 0) != 0) {
    throw InputError("table header must be id,l0..l5,s0..s5,mos");
  }
  SimilarityTable table;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2 + kParams) {
      throw InputError("table row " + std::to_string(line_no) + ": expected 14 fields");
    }
    SimilarityRow row;
    row.id = cells[0];
    std::array<double, kParams + 1> values{};
    for (int c = 0; c <= kParams; ++c) {
      try {
        std::size_t used = 0;
        values[c] = std::stod(cells[c + 1], &used);
        if (used != cells[c + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw InputError("table row " + std::to_string(line_no) + ": malformed number '" +
                         cells[c + 1] + "'");
      }
    }
    for (int i = 0; i < kNumStages; ++i) {
      row.features.l_product[i] = row.features.l_left[i] = values[i];
      row.features.s_product[i] = row.features.s_left[i] = values[kNumStages + i];
    }
    row.mos = values[kParams];
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace vfiq
