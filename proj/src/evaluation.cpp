#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "vfiq/errors.hpp"
#include "vfiq/evaluation.hpp"
#include "vfiq/imageio.hpp"
#include "csv.hpp"

namespace vfiq {

Criteria compute_criteria(std::span<const double> pred, std::span<const double> mos) {
  Criteria c;
  c.srcc = srcc(pred, mos);
  c.krcc = krcc(pred, mos);
  c.plcc_raw = plcc(pred, mos);
  c.rmse_raw = rmse(pred, mos);
  c.plcc = c.plcc_raw;
  c.rmse = c.rmse_raw;
  if (pred.size() >= 5) {
    const LogisticFit fit = logistic_map(pred, mos);
    c.logistic = fit.params;
    c.logistic_converged = fit.converged;
    if (fit.converged) {
      // A mapping that collapses to a constant leaves PLCC undefined; keep raw.
      try {
        c.plcc = plcc(fit.mapped, mos);
        c.rmse = rmse(fit.mapped, mos);
      } catch (const NumericError&) {
        c.logistic_converged = false;
      }
    }
  }
  return c;
}

CriteriaMeans average_criteria(const std::vector<RepeatResult>& repeats) {
  CriteriaMeans m;
  if (repeats.empty()) return m;
  for (const auto& r : repeats) {
    m.srcc += r.criteria.srcc;
    m.krcc += r.criteria.krcc;
    m.plcc += r.criteria.plcc;
    m.rmse += r.criteria.rmse;
    m.plcc_raw += r.criteria.plcc_raw;
    m.rmse_raw += r.criteria.rmse_raw;
  }
  const auto n = static_cast<double>(repeats.size());
  m.srcc /= n;
  m.krcc /= n;
  m.plcc /= n;
  m.rmse /= n;
  m.plcc_raw /= n;
  m.rmse_raw /= n;
  return m;
}

EvalReport evaluate_protocol(const DatasetManifest& manifest, const SimilarityTable& table,
                             const SplitConfig& split, const TrainConfig& train_cfg,
                             const std::string& method) {
  split.validate();
  train_cfg.validate();
  if (manifest.empty()) throw InputError("evaluation needs a non-empty manifest");
  if (!manifest.has_mos()) throw InputError("evaluation needs a mos value on every record");

  EvalReport report;
  report.method = method;
  report.split = split;
  report.train = train_cfg;
  for (int rep = 0; rep < split.repeats; ++rep) {
    try {
      const Split parts = split_dataset(manifest, split, rep);
      if (parts.test.size() < 2) throw InputError("test split has fewer than 2 records");
      const SimilarityTable train_rows = table.select(parts.train);
      const SimilarityTable test_rows = table.select(parts.test);

      RepeatResult r;
      r.index = rep;
      r.seed = split.seed + static_cast<std::uint64_t>(rep);
      const TrainResult fit = train(train_rows, train_cfg);
      r.weights = fit.weights;
      r.train_loss = fit.final_loss;
      r.pred = predict(test_rows, fit.weights, train_cfg.mode);
      r.mos = targets(test_rows);
      for (const auto& row : test_rows.rows) r.test_ids.push_back(row.id);
      r.criteria = compute_criteria(r.pred, r.mos);
      report.repeats.push_back(std::move(r));
    } catch (const InputError& e) {
      throw InputError("repeat " + std::to_string(rep) + ": " + e.what());
    } catch (const NumericError& e) {
      throw NumericError("repeat " + std::to_string(rep) + ": " + e.what());
    }
  }
  report.average = average_criteria(report.repeats);
  return report;
}

EvalReport evaluate_protocol(const DatasetManifest& manifest, const BackboneWeights& backbone,
                             const SplitConfig& split, const TrainConfig& train_cfg,
                             const std::string& method) {
  const SimilarityTable table = precompute_similarities(manifest, backbone);
  return evaluate_protocol(manifest, table, split, train_cfg, method);
}

namespace {

void finish_criteria(BaselineReport& out, bool has_mos) {
  if (!has_mos) {
    out.criteria_error = "manifest has no mos column";
    return;
  }
  for (double v : out.values) {
    if (!std::isfinite(v)) {
      out.criteria_error = "criteria undefined: some frames are identical to their reference";
      return;
    }
  }
  try {
    out.criteria = compute_criteria(out.values, out.mos);
    out.criteria_valid = true;
  } catch (const NumericError& e) {
    out.criteria_error = e.what();
  }
}

}  // namespace

BaselineReport evaluate_baseline(const DatasetManifest& manifest, const std::string& metric) {
  if (metric != "psnr" && metric != "ssim") {
    throw InputError("unsupported metric '" + metric + "' (supported: psnr, ssim)");
  }
  if (!manifest.has_reference()) {
    throw InputError("baseline '" + metric + "' needs a path_ref column on every record");
  }
  BaselineReport out;
  out.metric = metric;
  for (const auto& r : manifest.records) {
    try {
      const Frame it = load_frame(r.path_it);
      const Frame ref = load_frame(*r.path_ref);
      out.values.push_back(metric == "psnr" ? psnr(it, ref) : ssim(it, ref));
    } catch (const Error& e) {
      throw InputError("triplet '" + r.id + "': " + e.what());
    }
    out.ids.push_back(r.id);
    out.mos.push_back(r.mos.value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  finish_criteria(out, manifest.has_mos());
  return out;
}

std::map<std::string, double> load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open score file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError("score file " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.size() != 2 || header[0] != "id") {
    throw InputError("score file header must be id,<score>");
  }
  std::map<std::string, double> scores;
  for (int line_no = 2; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = path.string() + " line " + std::to_string(line_no);
    if (cells.size() != 2) throw InputError(where + ": expected 2 fields");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError(where + ": malformed score '" + cells[1] + "'");
    }
    if (!std::isfinite(v)) throw InputError(where + ": score is not finite");
    if (!scores.emplace(cells[0], v).second) throw InputError(where + ": duplicate id " + cells[0]);
  }
  return scores;
}

BaselineReport evaluate_scores(const DatasetManifest& manifest, const std::string& label,
                               const std::map<std::string, double>& scores) {
  BaselineReport out;
  out.metric = label;
  for (const auto& r : manifest.records) {
    const auto it = scores.find(r.id);
    if (it == scores.end()) throw InputError("no " + label + " score for '" + r.id + "'");
    out.ids.push_back(r.id);
    out.values.push_back(it->second);
    out.mos.push_back(r.mos.value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  finish_criteria(out, manifest.has_mos());
  return out;
}

}  // namespace vfiq
