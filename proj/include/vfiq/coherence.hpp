#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vfiq/backbone.hpp"
#include "vfiq/tensor.hpp"

namespace vfiq {

/// Stabilizing constants of the luminance and structure terms.
struct SimilarityConstants {
  double c1 = 1e-6;
  double c2 = 1e-6;
};

/// Per-channel global spatial mean and population variance.
struct StageStats {
  std::vector<double> mu;
  std::vector<double> var;
};

/// Per-channel global population covariance of two same-shape maps.
struct PairStats {
  std::vector<double> cov;
};

using StageVector = std::array<double, kNumStages>;

/// Channel-averaged similarity terms per stage. The *_product entries pair
/// both neighbors (It vs I0 times It vs I1); the *_left entries hold the
/// It vs I0 term alone, used by the single-side ablation.
struct SimilarityFeatures {
  StageVector l_product{};
  StageVector s_product{};
  StageVector l_left{};
  StageVector s_left{};
};

enum class ScoreMode { kBoth, kLeftOnly };

ScoreMode parse_score_mode(const std::string& text);
std::string to_string(ScoreMode mode);

/// Learnable per-stage weights: alpha scales luminance, beta structure.
struct ModelWeights {
  StageVector alpha{};
  StageVector beta{};
  std::string backbone = kReferenceTag;
  SimilarityConstants constants;

  static ModelWeights uniform(double alpha, double beta);
  bool operator==(const ModelWeights& o) const {
    return alpha == o.alpha && beta == o.beta && backbone == o.backbone &&
           constants.c1 == o.constants.c1 && constants.c2 == o.constants.c2;
  }
};

StageStats stage_stats(const FeatureMap& fmap);
PairStats pair_cov(const FeatureMap& a, const FeatureMap& b);

/// (mu0 * mut + c1) / (mu0^2 + mut^2 + c1) per channel.
std::vector<double> luminance_similarity(const StageStats& s0, const StageStats& st,
                                         double c1 = SimilarityConstants{}.c1);

/// (cov + c2) / (var0 + vart + c2) per channel.
std::vector<double> structure_similarity(const StageStats& s0, const StageStats& st,
                                         const PairStats& cov,
                                         double c2 = SimilarityConstants{}.c2);

SimilarityFeatures similarity_features(const FeatureStack& f0, const FeatureStack& ft,
                                       const FeatureStack& f1,
                                       const SimilarityConstants& constants = {});

/// The 12 regressors the weights multiply, alpha terms first.
std::array<double, 2 * kNumStages> design_row(const SimilarityFeatures& feat, ScoreMode mode);

/// sum_i alpha_i * L_i + beta_i * S_i over the mode's terms.
double coherence_score(const SimilarityFeatures& feat, const ModelWeights& w,
                       ScoreMode mode = ScoreMode::kBoth);

/// JSON: {"alpha": [6], "beta": [6], "backbone": tag, "c1": x, "c2": x}.
ModelWeights load_model(const std::filesystem::path& path);
void save_model(const ModelWeights& model, const std::filesystem::path& path);
std::string model_to_json(const ModelWeights& model);
ModelWeights model_from_json(const std::string& text);

/// Runs the backbone on a triplet and reduces to similarity features.
/// Frames must share dimensions (InputError otherwise).
SimilarityFeatures score_triplet_features(const Backbone& backbone, const Frame& i0,
                                          const Frame& it, const Frame& i1,
                                          const SimilarityConstants& constants = {});

}  // namespace vfiq
