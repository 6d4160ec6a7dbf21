#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vfiq/backbone.hpp"
#include "vfiq/coherence.hpp"
#include "vfiq/core.hpp"

namespace vfiq {

struct TrainConfig {
  double initial_lr = 1e-4;
  int lr_halving_interval = 50;
  int max_iterations = 500;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double init_alpha = 1.0 / 12.0;
  double init_beta = 1.0 / 12.0;
  std::uint64_t seed = 0;
  ScoreMode mode = ScoreMode::kBoth;

  void validate() const;
};

struct SimilarityRow {
  std::string id;
  SimilarityFeatures features;
  double mos = 0.0;
};

struct SimilarityTable {
  std::vector<SimilarityRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  /// Rows whose ids appear in the manifest, in manifest order.
  SimilarityTable select(const DatasetManifest& manifest) const;
};

struct TrainLogEntry {
  int iteration;
  double lr;
  double loss;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<TrainLogEntry> log;  ///< loss before each update
  double final_loss = 0.0;         ///< loss at the returned weights
};

/// Step-decay schedule: initial_lr * 2^-floor(iteration / interval).
double learning_rate(const TrainConfig& cfg, int iteration);

double mse_loss(std::span<const double> pred, std::span<const double> mos);

/// Backbone features for every record, in manifest order. Frames that fail
/// to load abort with an InputError naming the triplet. `threads` > 1 fans
/// out across triplets; the result does not depend on it.
SimilarityTable precompute_similarities(const DatasetManifest& manifest, const Backbone& backbone,
                                        const SimilarityConstants& constants = {},
                                        int threads = 1);
SimilarityTable precompute_similarities(const DatasetManifest& manifest,
                                        const BackboneWeights& weights);

std::vector<double> predict(const SimilarityTable& table, const ModelWeights& w,
                            ScoreMode mode = ScoreMode::kBoth);
std::vector<double> targets(const SimilarityTable& table);

/// Full-batch Adam on the 12 weights minimizing MSE against MOS.
TrainResult train(const SimilarityTable& table, const TrainConfig& cfg,
                  const std::function<void(const TrainLogEntry&)>& on_step = {});

/// Closed-form minimizer of the same objective with ridge damping 1e-9,
/// i.e. the solution of (X^T X + 1e-9 I) w = X^T y, computed by Householder
/// QR of the stacked system.
ModelWeights least_squares_fit(const SimilarityTable& table, ScoreMode mode = ScoreMode::kBoth);

/// CSV `id,l0..l5,s0..s5,mos`. In left_only mode the l/s columns carry the
/// single-side terms instead of the products.
void save_table(const SimilarityTable& table, const std::filesystem::path& path,
                ScoreMode mode = ScoreMode::kBoth);
/// Loaded columns populate both the product and single-side fields, so the
/// table trains identically in either mode.
SimilarityTable load_table(const std::filesystem::path& path);

}  // namespace vfiq
