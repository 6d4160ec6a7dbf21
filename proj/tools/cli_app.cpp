#include "cli_app.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "vfiq/backbone.hpp"
#include "vfiq/coherence.hpp"
#include "vfiq/errors.hpp"
#include "vfiq/evaluation.hpp"
#include "vfiq/golden.hpp"
#include "vfiq/imageio.hpp"
#include "vfiq/trainer.hpp"

namespace vfiq::cli {

namespace fs = std::filesystem;

namespace {

struct BackboneSource {
  std::string weights;
  std::optional<std::uint64_t> reference_seed;

  void add_to(CLI::App* app) {
    app->add_option("--weights", weights, "VFIW backbone weight file");
    app->add_option("--reference-seed", reference_seed,
                    "use the built-in reference backbone with this seed instead of --weights");
  }

  BackboneWeights load() const {
    if (reference_seed) return reference_backbone(*reference_seed);
    if (weights.empty()) throw InputError("either --weights or --reference-seed is required");
    return load_weights(weights);
  }
};

struct TrainFlags {
  TrainConfig cfg;
  std::string mode = "both";

  void add_to(CLI::App* app) {
    app->add_option("--initial-lr", cfg.initial_lr, "Adam initial learning rate")->capture_default_str();
    app->add_option("--lr-halving-interval", cfg.lr_halving_interval,
                    "iterations between learning-rate halvings")->capture_default_str();
    app->add_option("--max-iterations", cfg.max_iterations, "full-batch Adam iterations")
        ->capture_default_str();
    app->add_option("--adam-beta1", cfg.adam_beta1)->capture_default_str();
    app->add_option("--adam-beta2", cfg.adam_beta2)->capture_default_str();
    app->add_option("--adam-eps", cfg.adam_eps)->capture_default_str();
    app->add_option("--init-alpha", cfg.init_alpha)->capture_default_str();
    app->add_option("--init-beta", cfg.init_beta)->capture_default_str();
    app->add_option("--train-seed", cfg.seed, "trainer seed (recorded in reports)");
    app->add_option("--mode", mode, "both | left_only")->capture_default_str();
  }

  TrainConfig resolve() const {
    TrainConfig c = cfg;
    c.mode = parse_score_mode(mode);
    return c;
  }
};

struct Globals {
  bool deterministic = false;
  int threads = 1;

  int worker_count() const { return deterministic ? 1 : std::max(threads, 1); }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string fmt(double v, int precision = 10) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

DatasetManifest load_manifest_with_mos(const std::string& path) {
  DatasetManifest m = load_manifest(path);
  if (m.empty()) throw InputError("manifest " + path + " has no records");
  if (!m.has_mos()) throw InputError("manifest " + path + " lacks mos values");
  return m;
}

void check_model_backbone(const ModelWeights& model, const BackboneWeights& backbone) {
  if (model.backbone != backbone.architecture) {
    throw ModelError("model was trained for backbone '" + model.backbone + "' but weights are '" +
                     backbone.architecture + "'");
  }
}

Frame load_input(const std::string& path) {
  if (!fs::exists(path)) throw InputError("cannot read " + path);
  return load_frame(path);
}

int cmd_score(const std::string& i0_path, const std::string& it_path, const std::string& i1_path,
              const BackboneSource& source, const std::string& model_path,
              const std::string& mode_text, std::ostream& out) {
  const ScoreMode mode = parse_score_mode(mode_text);
  const Frame i0 = load_input(i0_path);
  const Frame it = load_input(it_path);
  const Frame i1 = load_input(i1_path);
  for (const auto& [frame, path] : {std::pair{&i0, &i0_path}, std::pair{&i1, &i1_path}}) {
    if (frame->width() != it.width() || frame->height() != it.height()) {
      throw InputError(*path + " is " + std::to_string(frame->width()) + "x" +
                       std::to_string(frame->height()) + " but " + it_path + " is " +
                       std::to_string(it.width()) + "x" + std::to_string(it.height()));
    }
  }
  const ModelWeights model = load_model(model_path);
  const BackboneWeights weights = source.load();
  check_model_backbone(model, weights);
  const Backbone backbone(weights);
  const SimilarityFeatures feat = score_triplet_features(backbone, i0, it, i1, model.constants);
  const double score = coherence_score(feat, model, mode);

  out << std::setprecision(17) << score << '\n';
  const auto row = design_row(feat, mode);
  out << "stage,l,s,alpha,beta\n";
  for (int i = 0; i < kNumStages; ++i) {
    out << i << ',' << fmt(row[i], 17) << ',' << fmt(row[kNumStages + i], 17) << ','
        << fmt(model.alpha[i], 17) << ',' << fmt(model.beta[i], 17) << '\n';
  }
  return kOk;
}

SimilarityTable table_for(const std::string& manifest_path, const std::string& table_path,
                          const BackboneSource& source, const Globals& g, std::ostream& err) {
  if (!table_path.empty()) return load_table(table_path);
  const DatasetManifest manifest = load_manifest_with_mos(manifest_path);
  const BackboneWeights weights = source.load();
  err << "extracting features for " << manifest.size() << " triplets (" << weights.architecture
      << " backbone)\n";
  return precompute_similarities(manifest, Backbone(weights), {}, g.worker_count());
}

int cmd_train(const std::string& manifest_path, const std::string& table_path,
              const BackboneSource& source, const std::string& table_backbone, const std::string& out_model, std::string log_path,
              const TrainFlags& flags, bool oracle, const Globals& g, std::ostream& out,
              std::ostream& err) {
  if (manifest_path.empty() == table_path.empty()) {
    throw InputError("exactly one of --manifest or --table is required");
  }
  const TrainConfig cfg = flags.resolve();
  cfg.validate();
  std::string tag = kReferenceTag;
  SimilarityTable table;
  if (!table_path.empty()) {
    table = load_table(table_path);
    tag = table_backbone;
    stage_channels(tag);  // rejects unknown tags
  } else {
    const BackboneWeights weights = source.load();
    tag = weights.architecture;
    const DatasetManifest manifest = load_manifest_with_mos(manifest_path);
    err << "extracting features for " << manifest.size() << " triplets\n";
    table = precompute_similarities(manifest, Backbone(weights), {}, g.worker_count());
  }

  TrainResult result = train(table, cfg);
  result.weights.backbone = tag;
  save_model(result.weights, out_model);

  if (log_path.empty()) log_path = fs::path(out_model).replace_extension(".train_log.csv").string();
  std::ostringstream log;
  log << "iteration,lr,loss\n" << std::setprecision(17);
  for (const auto& e : result.log) log << e.iteration << ',' << e.lr << ',' << e.loss << '\n';
  log << cfg.max_iterations << ",," << result.final_loss << '\n';
  write_text(log_path, log.str());

  err << "trained " << cfg.max_iterations << " iterations, final mse " << result.final_loss << '\n';
  out << "train_mse " << std::setprecision(17) << result.final_loss << '\n';
  if (oracle) {
    const ModelWeights ls = least_squares_fit(table, cfg.mode);
    const double ls_mse = mse_loss(predict(table, ls, cfg.mode), targets(table));
    const double gap = ls_mse > 0.0 ? (result.final_loss - ls_mse) / ls_mse : result.final_loss;
    out << "oracle_mse " << ls_mse << '\n' << "relative_gap " << gap << '\n';
  }
  return kOk;
}

int cmd_eval(const std::string& manifest_path, const std::string& table_path,
             const BackboneSource& source, const std::string& out_dir, const SplitConfig& split,
             const TrainFlags& flags, const std::string& method,
             const std::vector<std::string>& baselines, const std::vector<std::string>& externals,
             const Globals& g, std::ostream& out, std::ostream& err) {
  const DatasetManifest manifest = load_manifest_with_mos(manifest_path);
  std::vector<std::pair<std::string, std::string>> external_scores;
  for (const auto& e : externals) {
    const auto eq = e.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == e.size()) {
      throw InputError("--external expects LABEL=PATH, got '" + e + "'");
    }
    external_scores.emplace_back(e.substr(0, eq), e.substr(eq + 1));
  }
  for (const auto& b : baselines) {
    if (b != "psnr" && b != "ssim") throw InputError("unsupported baseline '" + b + "' (supported: psnr, ssim)");
  }
  if (!baselines.empty() && !manifest.has_reference()) {
    throw InputError("--baseline needs a path_ref column in the manifest");
  }
  const TrainConfig cfg = flags.resolve();
  split.validate();
  cfg.validate();
  SimilarityTable table = table_for(manifest_path, table_path, source, g, err);

  const EvalReport report = evaluate_protocol(manifest, table, split, cfg, method);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_text(dir / "report.json", report_to_json(report));
  for (const auto& r : report.repeats) {
    const std::string stem = "scatter_repeat" + std::to_string(r.index);
    write_scatter_csv(r, dir / (stem + ".csv"));
    write_text(dir / (stem + ".svg"),
               scatter_svg(r, method + " repeat " + std::to_string(r.index) + " (SRCC " +
                                  fmt(r.criteria.srcc, 4) + ")"));
  }

  std::string table_text = table_row(method, report.average);
  for (const auto& b : baselines) {
    const BaselineReport br = evaluate_baseline(manifest, b);
    write_text(dir / ("baseline_" + b + ".json"), baseline_to_json(br));
    if (!br.criteria_valid) throw NumericError("baseline " + b + ": " + br.criteria_error);
    CriteriaMeans m{br.criteria.srcc, br.criteria.krcc, br.criteria.plcc, br.criteria.rmse,
                    br.criteria.plcc_raw, br.criteria.rmse_raw};
    const std::string row = table_row(b == "psnr" ? "PSNR" : "SSIM", m);
    table_text += row.substr(row.find('\n') + 1);
  }
  for (const auto& [label, path] : external_scores) {
    const BaselineReport er = evaluate_scores(manifest, label, load_scores(path));
    write_text(dir / ("external_" + label + ".json"), baseline_to_json(er));
    if (!er.criteria_valid) throw NumericError("external " + label + ": " + er.criteria_error);
    const CriteriaMeans m{er.criteria.srcc, er.criteria.krcc, er.criteria.plcc, er.criteria.rmse,
                          er.criteria.plcc_raw, er.criteria.rmse_raw};
    const std::string row = table_row(label, m);
    table_text += row.substr(row.find('\n') + 1);
  }
  write_text(dir / "table.txt", table_text);
  out << table_text;
  err << "wrote report to " << dir.string() << '\n';
  return kOk;
}

int cmd_baseline(const std::string& manifest_path, const std::string& metric,
                 const std::string& out_path, std::ostream& out) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  const BaselineReport report = evaluate_baseline(manifest, metric);
  if (!out_path.empty()) write_text(out_path, baseline_to_json(report));
  out << "id," << metric << '\n';
  for (std::size_t i = 0; i < report.ids.size(); ++i) {
    out << report.ids[i] << ','
        << (std::isinf(report.values[i]) ? std::string("identical") : fmt(report.values[i], 12))
        << '\n';
  }
  if (!report.criteria_valid) throw NumericError(report.criteria_error);
  const CriteriaMeans m{report.criteria.srcc, report.criteria.krcc, report.criteria.plcc,
                        report.criteria.rmse, report.criteria.plcc_raw, report.criteria.rmse_raw};
  out << table_row(metric == "psnr" ? "PSNR" : "SSIM", m);
  return kOk;
}

int cmd_features(const std::string& manifest_path, const BackboneSource& source,
                 const std::string& out_path, const std::string& mode, const Globals& g,
                 std::ostream& err) {
  const SimilarityTable table = table_for(manifest_path, "", source, g, err);
  save_table(table, out_path, parse_score_mode(mode));
  err << "wrote " << table.size() << " rows to " << out_path << '\n';
  return kOk;
}

int cmd_parity(const BackboneSource& source, const std::string& image_path,
               const std::string& golden_path, double tolerance, std::ostream& out) {
  const BackboneWeights weights = source.load();
  const Frame image = load_input(image_path);
  const GoldenActivations golden = load_golden(golden_path);
  const FeatureStack stack = Backbone(weights).extract(image);
  const ParityReport report = compare_to_golden(stack, golden, tolerance);
  out << "stage,max_abs,ok\n";
  for (const auto& s : report.stages) {
    out << s.stage << ',' << fmt(s.max_abs, 6) << ',' << (s.ok ? "yes" : "no") << '\n';
  }
  if (!report.passed) throw ModelError("activations differ from golden by more than " + fmt(tolerance));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"No-reference quality assessment for interpolated video frames", "vfiq"};
  app.require_subcommand(1);
  Globals g;
  app.add_flag("--deterministic", g.deterministic, "single worker, fixed reduction order");
  app.add_option("--threads", g.threads, "worker threads")->capture_default_str();

  // score
  auto* score = app.add_subcommand("score", "score one interpolated frame against its neighbors");
  std::string i0, it, i1, model_path, score_mode = "both";
  BackboneSource score_src;
  score->add_option("--i0", i0, "first original frame (PNG)")->required();
  score->add_option("--it", it, "interpolated frame (PNG)")->required();
  score->add_option("--i1", i1, "second original frame (PNG)")->required();
  score->add_option("--model", model_path, "quality model JSON")->required();
  score->add_option("--mode", score_mode, "both | left_only")->capture_default_str();
  score_src.add_to(score);

  // train
  auto* train_cmd = app.add_subcommand("train", "fit per-stage weights to MOS");
  std::string train_manifest, train_table, out_model, log_path, table_backbone = kReferenceTag;
  bool oracle = false;
  BackboneSource train_src;
  TrainFlags train_flags;
  train_cmd->add_option("--manifest", train_manifest, "manifest CSV with mos");
  train_cmd->add_option("--table", train_table, "precomputed similarity table CSV");
  train_cmd->add_option("--backbone", table_backbone, "backbone tag recorded with --table")
      ->capture_default_str();
  train_cmd->add_option("--out-model", out_model, "output model JSON")->required();
  train_cmd->add_option("--log", log_path, "training log CSV (default: <model>.train_log.csv)");
  train_cmd->add_flag("--oracle", oracle, "also report the closed-form least-squares optimum");
  train_src.add_to(train_cmd);
  train_flags.add_to(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "repeated split train/test evaluation");
  std::string eval_manifest, eval_table, out_dir = "eval_out", method = "coherence", baseline_list;
  SplitConfig split;
  BackboneSource eval_src;
  TrainFlags eval_flags;
  eval_cmd->add_option("--manifest", eval_manifest, "manifest CSV with mos")->required();
  eval_cmd->add_option("--table", eval_table, "precomputed similarity table CSV");
  eval_cmd->add_option("--out-dir", out_dir, "report directory")->capture_default_str();
  eval_cmd->add_option("--repeats", split.repeats)->capture_default_str();
  eval_cmd->add_option("--train-fraction", split.train_fraction)->capture_default_str();
  eval_cmd->add_option("--seed", split.seed, "split seed")->capture_default_str();
  eval_cmd->add_option("--method", method, "label for the report table")->capture_default_str();
  eval_cmd->add_option("--baseline", baseline_list, "comma-separated: psnr,ssim");
  std::vector<std::string> externals;
  eval_cmd->add_option("--external", externals, "LABEL=PATH of an id,score CSV (repeatable)");
  eval_src.add_to(eval_cmd);
  eval_flags.add_to(eval_cmd);

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "full-reference baseline against MOS");
  std::string base_manifest, metric, base_out;
  base_cmd->add_option("--manifest", base_manifest, "manifest CSV with path_ref")->required();
  base_cmd->add_option("--metric", metric, "psnr | ssim")->required();
  base_cmd->add_option("--out", base_out, "optional JSON report");

  // features
  auto* feat_cmd = app.add_subcommand("features", "dump the similarity table");
  std::string feat_manifest, feat_out, feat_mode = "both";
  BackboneSource feat_src;
  feat_cmd->add_option("--manifest", feat_manifest, "manifest CSV with mos")->required();
  feat_cmd->add_option("--out", feat_out, "output CSV")->required();
  feat_cmd->add_option("--mode", feat_mode, "both | left_only")->capture_default_str();
  feat_src.add_to(feat_cmd);

  auto* parity_cmd = app.add_subcommand("parity", "compare backbone activations with a golden file");
  BackboneSource parity_src;
  std::string parity_image, parity_golden;
  double parity_tol = kParityTolerance;
  parity_cmd->add_option("--image", parity_image, "fixture image (PNG)")->required();
  parity_cmd->add_option("--golden", parity_golden, "golden activation file")->required();
  parity_cmd->add_option("--tolerance", parity_tol, "max-abs tolerance per stage")->capture_default_str();
  parity_src.add_to(parity_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  set_inference_threads(g.worker_count());
  try {
    if (*score) return cmd_score(i0, it, i1, score_src, model_path, score_mode, out);
    if (*train_cmd) {
      return cmd_train(train_manifest, train_table, train_src, table_backbone, out_model, log_path, train_flags,
                       oracle, g, out, err);
    }
    if (*eval_cmd) {
      std::vector<std::string> baselines;
      std::stringstream ss(baseline_list);
      for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) baselines.push_back(item);
      }
      return cmd_eval(eval_manifest, eval_table, eval_src, out_dir, split, eval_flags, method,
                      baselines, externals, g, out, err);
    }
    if (*base_cmd) return cmd_baseline(base_manifest, metric, base_out, out);
    if (*parity_cmd) return cmd_parity(parity_src, parity_image, parity_golden, parity_tol, out);
    if (*feat_cmd) return cmd_features(feat_manifest, feat_src, feat_out, feat_mode, g, err);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return kModelError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace vfiq::cli
