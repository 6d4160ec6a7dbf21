#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "vfiq/errors.hpp"
#include "vfiq/evaluation.hpp"

namespace vfiq {

using nlohmann::ordered_json;

namespace {

ordered_json criteria_json(const Criteria& c) {
  ordered_json j;
  j["srcc"] = c.srcc;
  j["krcc"] = c.krcc;
  j["plcc"] = c.plcc;
  j["rmse"] = c.rmse;
  j["plcc_raw"] = c.plcc_raw;
  j["rmse_raw"] = c.rmse_raw;
  j["logistic"] = {{"b1", c.logistic.b[0]}, {"b2", c.logistic.b[1]}, {"b3", c.logistic.b[2]},
                   {"b4", c.logistic.b[3]}, {"converged", c.logistic_converged}};
  return j;
}

ordered_json means_json(const CriteriaMeans& m) {
  return {{"srcc", m.srcc},         {"krcc", m.krcc},         {"plcc", m.plcc},
          {"rmse", m.rmse},         {"plcc_raw", m.plcc_raw}, {"rmse_raw", m.rmse_raw}};
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["method"] = report.method;
  j["split"] = {{"train_fraction", report.split.train_fraction},
                {"repeats", report.split.repeats},
                {"seed", report.split.seed}};
  j["train"] = {{"initial_lr", report.train.initial_lr},
                {"lr_halving_interval", report.train.lr_halving_interval},
                {"max_iterations", report.train.max_iterations},
                {"adam_beta1", report.train.adam_beta1},
                {"adam_beta2", report.train.adam_beta2},
                {"adam_eps", report.train.adam_eps},
                {"init_alpha", report.train.init_alpha},
                {"init_beta", report.train.init_beta},
                {"mode", to_string(report.train.mode)}};
  j["average"] = means_json(report.average);
  ordered_json reps = ordered_json::array();
  for (const auto& r : report.repeats) {
    ordered_json e;
    e["index"] = r.index;
    e["seed"] = r.seed;
    e["n_test"] = r.pred.size();
    e["train_loss"] = r.train_loss;
    e["criteria"] = criteria_json(r.criteria);
    e["alpha"] = r.weights.alpha;
    e["beta"] = r.weights.beta;
    e["test_ids"] = r.test_ids;
    reps.push_back(std::move(e));
  }
  j["repeats"] = std::move(reps);
  return j.dump(2) + "\n";
}

std::string baseline_to_json(const BaselineReport& report) {
  ordered_json j;
  j["metric"] = report.metric;
  ordered_json values = ordered_json::array();
  for (std::size_t i = 0; i < report.ids.size(); ++i) {
    ordered_json e;
    e["id"] = report.ids[i];
    if (std::isinf(report.values[i])) {
      e["value"] = "identical";
    } else {
      e["value"] = report.values[i];
    }
    if (std::isfinite(report.mos[i])) e["mos"] = report.mos[i];
    values.push_back(std::move(e));
  }
  j["records"] = std::move(values);
  if (report.criteria_valid) {
    j["criteria"] = criteria_json(report.criteria);
  } else {
    j["criteria_error"] = report.criteria_error;
  }
  return j.dump(2) + "\n";
}

std::string table_row(const std::string& method, const CriteriaMeans& m) {
  std::ostringstream os;
  os << "method SRCC KRCC PLCC RMSE\n"
     << method << ' ' << fmt(m.srcc) << ' ' << fmt(m.krcc) << ' ' << fmt(m.plcc) << ' '
     << fmt(m.rmse) << '\n';
  return os.str();
}

void write_scatter_csv(const RepeatResult& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "pred,mos\n";
  out.precision(17);
  for (std::size_t i = 0; i < r.pred.size(); ++i) out << r.pred[i] << ',' << r.mos[i] << '\n';
}

std::string scatter_svg(const RepeatResult& r, const std::string& title) {
  constexpr double kW = 480, kH = 360, kLeft = 60, kRight = 20, kTop = 36, kBottom = 50;
  const auto [xmin_it, xmax_it] = std::minmax_element(r.pred.begin(), r.pred.end());
  double xmin = r.pred.empty() ? 0.0 : *xmin_it;
  double xmax = r.pred.empty() ? 1.0 : *xmax_it;
  if (xmax <= xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  const double pad = 0.05 * (xmax - xmin);
  xmin -= pad;
  xmax += pad;
  const double ymin = 0.0;
  const double ymax = 100.0;
  auto sx = [&](double v) { return kLeft + (v - xmin) / (xmax - xmin) * (kW - kLeft - kRight); };
  auto sy = [&](double v) {
    v = std::clamp(v, ymin, ymax);
    return kH - kBottom - (v - ymin) / (ymax - ymin) * (kH - kTop - kBottom);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
     << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12
     << "\" text-anchor=\"middle\">Predicted score</text>\n";
  os << "<text x=\"16\" y=\"" << (kTop + kH - kBottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (kTop + kH - kBottom) / 2 << ")\">MOS</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double yv = ymin + t * (ymax - ymin) / 4;
    const double xv = xmin + t * (xmax - xmin) / 4;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv, 0)
       << "</text>\n";
    os << "<text x=\"" << sx(xv) << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">"
       << fmt(xv, 3) << "</text>\n";
  }
  for (std::size_t i = 0; i < r.pred.size(); ++i) {
    os << "<circle cx=\"" << fmt(sx(r.pred[i]), 2) << "\" cy=\"" << fmt(sy(r.mos[i]), 2)
       << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  if (r.criteria.logistic_converged) {
    os << "<polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\" points=\"";
    constexpr int kSamples = 100;
    for (int s = 0; s <= kSamples; ++s) {
      const double xv = xmin + s * (xmax - xmin) / kSamples;
      os << fmt(sx(xv), 2) << ',' << fmt(sy(r.criteria.logistic(xv)), 2) << ' ';
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace vfiq
