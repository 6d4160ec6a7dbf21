#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vfiq/backbone.hpp"
#include "vfiq/coherence.hpp"
#include "vfiq/core.hpp"
#include "vfiq/metrics.hpp"
#include "vfiq/trainer.hpp"

namespace vfiq {

/// SRCC/KRCC plus PLCC/RMSE both raw and after logistic mapping. The mapped
/// values are the headline numbers.
struct Criteria {
  double srcc = 0.0;
  double krcc = 0.0;
  double plcc = 0.0;
  double rmse = 0.0;
  double plcc_raw = 0.0;
  double rmse_raw = 0.0;
  LogisticParams logistic;
  bool logistic_converged = false;
};

/// Needs n >= 5 for the logistic fit; with fewer points the mapped values
/// fall back to raw and logistic_converged is false.
Criteria compute_criteria(std::span<const double> pred, std::span<const double> mos);

struct RepeatResult {
  int index = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> test_ids;
  std::vector<double> pred;
  std::vector<double> mos;
  ModelWeights weights;
  double train_loss = 0.0;
  Criteria criteria;
};

struct CriteriaMeans {
  double srcc = 0.0;
  double krcc = 0.0;
  double plcc = 0.0;
  double rmse = 0.0;
  double plcc_raw = 0.0;
  double rmse_raw = 0.0;
};

struct EvalReport {
  std::string method;
  std::vector<RepeatResult> repeats;
  CriteriaMeans average;
  SplitConfig split;
  TrainConfig train;
};

CriteriaMeans average_criteria(const std::vector<RepeatResult>& repeats);

/// Repeated random split protocol on precomputed features: per repeat, split
/// the manifest, train on the train side, score the test side, compute the
/// criteria. Repeats run in index order.
EvalReport evaluate_protocol(const DatasetManifest& manifest, const SimilarityTable& table,
                             const SplitConfig& split, const TrainConfig& train_cfg,
                             const std::string& method = "coherence");

EvalReport evaluate_protocol(const DatasetManifest& manifest, const BackboneWeights& backbone,
                             const SplitConfig& split, const TrainConfig& train_cfg,
                             const std::string& method = "coherence");

/// A full-reference baseline evaluated against MOS over the whole manifest.
struct BaselineReport {
  std::string metric;
  std::vector<std::string> ids;
  std::vector<double> values;  ///< +inf marks identical frames for psnr
  std::vector<double> mos;
  Criteria criteria;
  bool criteria_valid = false;
  std::string criteria_error;
};

/// metric is "psnr" or "ssim". Requires path_ref on every record.
BaselineReport evaluate_baseline(const DatasetManifest& manifest, const std::string& metric);

/// Per-record scores computed elsewhere (CSV `id,<score>`), for
/// side-by-side tables with methods this library does not implement.
std::map<std::string, double> load_scores(const std::filesystem::path& path);
/// Criteria of external scores against the manifest's MOS, like a baseline.
BaselineReport evaluate_scores(const DatasetManifest& manifest, const std::string& label,
                               const std::map<std::string, double>& scores);

// Report exporters.
std::string report_to_json(const EvalReport& report);
std::string baseline_to_json(const BaselineReport& report);
/// "method SRCC KRCC PLCC RMSE" header plus one row.
std::string table_row(const std::string& method, const CriteriaMeans& m);
void write_scatter_csv(const RepeatResult& r, const std::filesystem::path& path);
/// Scatter of predictions against MOS with the fitted logistic curve.
std::string scatter_svg(const RepeatResult& r, const std::string& title);

}  // namespace vfiq
