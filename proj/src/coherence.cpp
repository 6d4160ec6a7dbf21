#include "vfiq/coherence.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "vfiq/errors.hpp"

namespace vfiq {

using nlohmann::json;

ScoreMode parse_score_mode(const std::string& text) {
  if (text == "both") return ScoreMode::kBoth;
  if (text == "left_only") return ScoreMode::kLeftOnly;
  throw InputError("unknown score mode '" + text + "' (expected both or left_only)");
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::kBoth ? "both" : "left_only"; }

ModelWeights ModelWeights::uniform(double alpha, double beta) {
  ModelWeights w;
  w.alpha.fill(alpha);
  w.beta.fill(beta);
  return w;
}

StageStats stage_stats(const FeatureMap& fmap) {
  if (fmap.empty() || fmap.plane_size() == 0) throw InputError("stage_stats on an empty map");
  const auto n = static_cast<double>(fmap.plane_size());
  StageStats s;
  s.mu.resize(fmap.channels);
  s.var.resize(fmap.channels);
  for (int c = 0; c < fmap.channels; ++c) {
    const auto ch = fmap.channel(c);
    double sum = 0.0;
    for (float v : ch) sum += v;
    const double mu = sum / n;
    double sq = 0.0;
    for (float v : ch) {
      const double d = v - mu;
      sq += d * d;
    }
    s.mu[c] = mu;
    s.var[c] = sq / n;
  }
  return s;
}

namespace {

std::vector<double> channel_means(const FeatureMap& m) {
  std::vector<double> mu(m.channels);
  const auto n = static_cast<double>(m.plane_size());
  for (int c = 0; c < m.channels; ++c) {
    double sum = 0.0;
    for (float v : m.channel(c)) sum += v;
    mu[c] = sum / n;
  }
  return mu;
}

PairStats covariance_with_means(const FeatureMap& a, const std::vector<double>& mu_a,
                                const FeatureMap& b, const std::vector<double>& mu_b) {
  PairStats p;
  p.cov.resize(a.channels);
  const auto n = static_cast<double>(a.plane_size());
  for (int c = 0; c < a.channels; ++c) {
    const auto ca = a.channel(c);
    const auto cb = b.channel(c);
    double acc = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) acc += (ca[i] - mu_a[c]) * (cb[i] - mu_b[c]);
    p.cov[c] = acc / n;
  }
  return p;
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InputError(std::string(what) + ": channel count mismatch");
}

double channel_mean(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

PairStats pair_cov(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) {
    throw InputError("pair_cov shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  if (a.empty()) throw InputError("pair_cov on an empty map");
  return covariance_with_means(a, channel_means(a), b, channel_means(b));
}

std::vector<double> luminance_similarity(const StageStats& s0, const StageStats& st, double c1) {
  require_same_length(s0.mu.size(), st.mu.size(), "luminance_similarity");
  std::vector<double> out(s0.mu.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double a = s0.mu[c];
    const double b = st.mu[c];
    out[c] = (a * b + c1) / (a * a + b * b + c1);
  }
  return out;
}

std::vector<double> structure_similarity(const StageStats& s0, const StageStats& st,
                                         const PairStats& cov, double c2) {
  require_same_length(s0.var.size(), st.var.size(), "structure_similarity");
  require_same_length(s0.var.size(), cov.cov.size(), "structure_similarity");
  std::vector<double> out(s0.var.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = (cov.cov[c] + c2) / (s0.var[c] + st.var[c] + c2);
  }
  return out;
}

SimilarityFeatures similarity_features(const FeatureStack& f0, const FeatureStack& ft,
                                       const FeatureStack& f1, const SimilarityConstants& k) {
  SimilarityFeatures feat;
  for (int i = 0; i < kNumStages; ++i) {
    if (!f0[i].same_shape(ft[i]) || !f1[i].same_shape(ft[i])) {
      throw InputError("stage " + std::to_string(i) + " shape mismatch: " + f0[i].shape_string() +
                       ", " + ft[i].shape_string() + ", " + f1[i].shape_string());
    }
    const StageStats st = stage_stats(ft[i]);
    const StageStats s0 = stage_stats(f0[i]);
    const StageStats s1 = stage_stats(f1[i]);
    const PairStats c0 = covariance_with_means(f0[i], s0.mu, ft[i], st.mu);
    const PairStats c1 = covariance_with_means(f1[i], s1.mu, ft[i], st.mu);

    const auto l0 = luminance_similarity(s0, st, k.c1);
    const auto l1 = luminance_similarity(s1, st, k.c1);
    const auto g0 = structure_similarity(s0, st, c0, k.c2);
    const auto g1 = structure_similarity(s1, st, c1, k.c2);

    std::vector<double> lp(l0.size());
    std::vector<double> sp(l0.size());
    for (std::size_t c = 0; c < l0.size(); ++c) {
      lp[c] = l0[c] * l1[c];
      sp[c] = g0[c] * g1[c];
    }
    feat.l_product[i] = channel_mean(lp);
    feat.s_product[i] = channel_mean(sp);
    feat.l_left[i] = channel_mean(l0);
    feat.s_left[i] = channel_mean(g0);
  }
  return feat;
}

std::array<double, 2 * kNumStages> design_row(const SimilarityFeatures& feat, ScoreMode mode) {
  std::array<double, 2 * kNumStages> row{};
  const auto& l = mode == ScoreMode::kBoth ? feat.l_product : feat.l_left;
  const auto& s = mode == ScoreMode::kBoth ? feat.s_product : feat.s_left;
  for (int i = 0; i < kNumStages; ++i) {
    row[i] = l[i];
    row[kNumStages + i] = s[i];
  }
  return row;
}

double coherence_score(const SimilarityFeatures& feat, const ModelWeights& w, ScoreMode mode) {
  const auto row = design_row(feat, mode);
  double score = 0.0;
  for (int i = 0; i < kNumStages; ++i) {
    score += w.alpha[i] * row[i] + w.beta[i] * row[kNumStages + i];
  }
  return score;
}

std::string model_to_json(const ModelWeights& model) {
  json j;
  j["alpha"] = model.alpha;
  j["beta"] = model.beta;
  j["backbone"] = model.backbone;
  j["c1"] = model.constants.c1;
  j["c2"] = model.constants.c2;
  return j.dump(2) + "\n";
}

ModelWeights model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelError(std::string("model file is not valid JSON: ") + e.what());
  }
  ModelWeights m;
  auto read_vector = [&](const char* key, StageVector& dst) {
    if (!j.contains(key) || !j[key].is_array()) throw ModelError(std::string("model lacks '") + key + "'");
    const auto& arr = j[key];
    if (arr.size() != kNumStages) {
      throw ModelError(std::string("model '") + key + "' must have 6 entries, has " +
                       std::to_string(arr.size()));
    }
    for (int i = 0; i < kNumStages; ++i) {
      if (!arr[i].is_number()) throw ModelError(std::string("model '") + key + "' has a non-number");
      dst[i] = arr[i].get<double>();
      if (!std::isfinite(dst[i])) throw ModelError(std::string("model '") + key + "' is not finite");
    }
  };
  read_vector("alpha", m.alpha);
  read_vector("beta", m.beta);
  if (j.contains("backbone")) {
    if (!j["backbone"].is_string()) throw ModelError("model 'backbone' must be a string");
    m.backbone = j["backbone"].get<std::string>();
  }
  for (auto [key, dst] : {std::pair{"c1", &m.constants.c1}, std::pair{"c2", &m.constants.c2}}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_number()) throw ModelError(std::string("model '") + key + "' must be a number");
    *dst = j[key].get<double>();
    if (!std::isfinite(*dst) || *dst <= 0.0) {
      throw ModelError(std::string("model '") + key + "' must be finite and positive");
    }
  }
  return m;
}

ModelWeights load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

void save_model(const ModelWeights& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file " + path.string());
  out << model_to_json(model);
}

SimilarityFeatures score_triplet_features(const Backbone& backbone, const Frame& i0,
                                          const Frame& it, const Frame& i1,
                                          const SimilarityConstants& constants) {
  if (i0.width() != it.width() || i0.height() != it.height() || i1.width() != it.width() ||
      i1.height() != it.height()) {
    throw InputError("triplet frames differ in size");
  }
  const FeatureStack f0 = backbone.extract(i0);
  const FeatureStack ft = backbone.extract(it);
  const FeatureStack f1 = backbone.extract(i1);
  return similarity_features(f0, ft, f1, constants);
}

}  // namespace vfiq
