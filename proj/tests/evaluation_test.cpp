#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "vfiq/errors.hpp"
#include "vfiq/evaluation.hpp"
#include "vfiq/imageio.hpp"

using namespace vfiq;
namespace vt = vfiq::testing;
using vfiq::testing::TempDir;

namespace {

struct Synthetic {
  DatasetManifest manifest;
  SimilarityTable table;
};

Synthetic linear_dataset(std::uint64_t seed, int rows, double sigma) {
  SplitMix64 rng(seed);
  std::array<double, 12> hidden{};
  for (auto& h : hidden) h = rng.uniform(0.5, 8.0);
  Synthetic s;
  s.table = vt::synthetic_table(rng, rows, hidden, sigma);
  for (const auto& row : s.table.rows) {
    TripletRecord r;
    r.id = row.id;
    r.path_i0 = r.path_it = r.path_i1 = "unused.png";
    r.mos = row.mos;
    s.manifest.records.push_back(r);
  }
  return s;
}

TrainConfig converging_config() {
  TrainConfig cfg;
  cfg.initial_lr = 0.05;
  cfg.lr_halving_interval = 2000;
  cfg.max_iterations = 10000;
  return cfg;
}

DatasetManifest with_mos(DatasetManifest m, const std::vector<double>& mos) {
  for (std::size_t i = 0; i < m.size(); ++i) m.records[i].mos = mos[i];
  return m;
}

}  // namespace

TEST(ComputeCriteria, PerfectPrediction) {
  const std::vector<double> v{10, 20, 35, 40, 70, 90};
  const auto c = compute_criteria(v, v);
  EXPECT_DOUBLE_EQ(c.srcc, 1.0);
  EXPECT_DOUBLE_EQ(c.krcc, 1.0);
  EXPECT_NEAR(c.plcc, 1.0, 1e-9);
  EXPECT_NEAR(c.rmse_raw, 0.0, 1e-12);
}

TEST(EvaluateProtocol, SingleRepeatAverageEqualsRepeat) {
  const auto s = linear_dataset(1, 40, 1.0);
  const auto r = evaluate_protocol(s.manifest, s.table, SplitConfig{0.8, 1, 3}, TrainConfig{});
  ASSERT_EQ(r.repeats.size(), 1u);
  const auto& c = r.repeats[0].criteria;
  EXPECT_EQ(r.average.srcc, c.srcc);
  EXPECT_EQ(r.average.krcc, c.krcc);
  EXPECT_EQ(r.average.plcc, c.plcc);
  EXPECT_EQ(r.average.rmse, c.rmse);
  EXPECT_EQ(r.repeats[0].test_ids.size(), 8u);
}

TEST(EvaluateProtocol, NoiselessLinearMosIsRecovered) {
  const auto s = linear_dataset(2, 60, 0.0);
  const auto r = evaluate_protocol(s.manifest, s.table, SplitConfig{0.8, 10, 5}, converging_config());
  EXPECT_GE(r.average.srcc, 0.999);
  EXPECT_GE(r.average.plcc, 0.999);
}

TEST(EvaluateProtocol, AverageIsMeanOfRepeats) {
  const auto s = linear_dataset(3, 30, 2.0);
  const auto r = evaluate_protocol(s.manifest, s.table, SplitConfig{0.8, 4, 9}, TrainConfig{});
  ASSERT_EQ(r.repeats.size(), 4u);
  double srcc = 0, rmse = 0;
  for (const auto& rep : r.repeats) srcc += rep.criteria.srcc, rmse += rep.criteria.rmse;
  EXPECT_NEAR(r.average.srcc, srcc / 4, 1e-15);
  EXPECT_NEAR(r.average.rmse, rmse / 4, 1e-12);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(r.repeats[k].index, k);
    EXPECT_EQ(r.repeats[k].seed, 9u + k);
  }
}

TEST(EvaluateProtocol, RecordOrderDoesNotMatter) {
  auto s = linear_dataset(4, 25, 1.0);
  const auto a = evaluate_protocol(s.manifest, s.table, SplitConfig{0.8, 3, 1}, TrainConfig{});
  SplitMix64 rng(77);
  auto& recs = s.manifest.records;
  for (std::size_t i = recs.size(); i > 1; --i) std::swap(recs[i - 1], recs[rng.below(i)]);
  std::reverse(s.table.rows.begin(), s.table.rows.end());
  const auto b = evaluate_protocol(s.manifest, s.table, SplitConfig{0.8, 3, 1}, TrainConfig{});
  EXPECT_EQ(report_to_json(a), report_to_json(b));
}

TEST(EvaluateProtocol, Errors) {
  auto s = linear_dataset(5, 20, 1.0);
  auto no_mos = s.manifest;
  no_mos.records[3].mos.reset();
  EXPECT_THROW(evaluate_protocol(no_mos, s.table, SplitConfig{}, TrainConfig{}), InputError);
  SimilarityTable partial = s.table;
  partial.rows.pop_back();
  EXPECT_THROW(evaluate_protocol(s.manifest, partial, SplitConfig{}, TrainConfig{}), InputError);
}

TEST(Report, JsonAndTableAndScatter) {
  const auto s = linear_dataset(6, 30, 1.0);
  const auto r = evaluate_protocol(s.manifest, s.table, SplitConfig{0.8, 2, 1}, TrainConfig{});
  const auto json = report_to_json(r);
  EXPECT_NE(json.find("\"average\""), std::string::npos);
  EXPECT_NE(json.find("\"repeats\""), std::string::npos);
  const auto row = table_row("coherence", r.average);
  EXPECT_EQ(row.rfind("method", 0), 0u);
  EXPECT_NE(row.find("coherence"), std::string::npos);
  const auto svg = scatter_svg(r.repeats[0], "repeat 0");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("MOS"), std::string::npos);
  TempDir dir;
  write_scatter_csv(r.repeats[0], dir / "s.csv");
  std::ifstream in(dir / "s.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "pred,mos");
}

TEST(Baseline, ValuesMatchMetricFunctions) {
  TempDir dir;
  auto m = vt::write_synthetic_triplets(dir.path(), 5, 40, 36, 11, true);
  m = with_mos(m, {30, 80, 55, 10, 65});
  for (const std::string metric : {"psnr", "ssim"}) {
    const auto r = evaluate_baseline(m, metric);
    ASSERT_EQ(r.values.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto it = load_frame(m.records[i].path_it);
      const auto ref = load_frame(*m.records[i].path_ref);
      EXPECT_EQ(r.values[i], metric == "psnr" ? psnr(it, ref) : ssim(it, ref));
    }
    EXPECT_TRUE(r.criteria_valid) << r.criteria_error;
    EXPECT_NE(baseline_to_json(r).find(metric), std::string::npos);
  }
}

TEST(Baseline, IdenticalReferenceSurfacesError) {
  TempDir dir;
  auto m = vt::write_synthetic_triplets(dir.path(), 5, 32, 32, 12, true);
  m = with_mos(m, {1, 2, 3, 4, 5});
  for (auto& r : m.records) r.path_ref = r.path_it;
  const auto p = evaluate_baseline(m, "psnr");
  for (double v : p.values) EXPECT_TRUE(std::isinf(v));
  EXPECT_FALSE(p.criteria_valid);
  EXPECT_FALSE(p.criteria_error.empty());
  EXPECT_NE(baseline_to_json(p).find("identical"), std::string::npos);

  const auto s = evaluate_baseline(m, "ssim");
  for (double v : s.values) EXPECT_EQ(v, 1.0);
  EXPECT_FALSE(s.criteria_valid);
  EXPECT_FALSE(s.criteria_error.empty());
}

TEST(Baseline, Errors) {
  TempDir dir;
  const auto m = vt::write_synthetic_triplets(dir.path(), 2, 32, 32, 13, false);
  EXPECT_THROW(evaluate_baseline(m, "psnr"), InputError);
  try {
    evaluate_baseline(m, "fsim");
    FAIL();
  } catch (const InputError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("psnr"), std::string::npos);
    EXPECT_NE(what.find("ssim"), std::string::npos);
  }
}

TEST(ExternalScores, CriteriaAgainstMos) {
  TempDir dir;
  {
    std::ofstream out(dir / "s.csv");
    out << "id,score\nb,2.5\na,1\nc,4\nd,3\ne,9\n";
  }
  const auto scores = load_scores(dir / "s.csv");
  ASSERT_EQ(scores.size(), 5u);
  DatasetManifest m;
  const std::vector<std::pair<std::string, double>> mos{{"a", 10}, {"b", 20}, {"c", 40}, {"d", 30}, {"e", 90}};
  for (const auto& [id, v] : mos) {
    TripletRecord r;
    r.id = id;
    r.mos = v;
    m.records.push_back(r);
  }
  const auto r = evaluate_scores(m, "other", scores);
  ASSERT_TRUE(r.criteria_valid) << r.criteria_error;
  EXPECT_DOUBLE_EQ(r.criteria.srcc, 1.0);
  EXPECT_EQ(r.values, (std::vector<double>{1, 2.5, 4, 3, 9}));

  m.records[0].id = "zz";
  EXPECT_THROW(evaluate_scores(m, "other", scores), InputError);
  {
    std::ofstream out(dir / "bad.csv");
    out << "id,score\na,x\n";
  }
  EXPECT_THROW(load_scores(dir / "bad.csv"), InputError);
  {
    std::ofstream out(dir / "dup.csv");
    out << "id,score\na,1\na,2\n";
  }
  EXPECT_THROW(load_scores(dir / "dup.csv"), InputError);
}
