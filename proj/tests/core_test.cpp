#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "vfiq/core.hpp"
#include "vfiq/errors.hpp"
#include "vfiq/prng.hpp"

using namespace vfiq;
using vfiq::testing::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

DatasetManifest numbered_manifest(int n, const char* fmt = "r%02d") {
  DatasetManifest m;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), fmt, i);
    TripletRecord r;
    r.id = id;
    r.path_i0 = "/data/" + r.id + "_0.png";
    r.path_it = "/data/" + r.id + "_t.png";
    r.path_i1 = "/data/" + r.id + "_1.png";
    r.mos = 10.0 * (i % 10);
    m.records.push_back(r);
  }
  return m;
}

std::vector<std::string> ids(const DatasetManifest& m) {
  std::vector<std::string> out;
  for (const auto& r : m.records) out.push_back(r.id);
  return out;
}

}  // namespace

TEST(SplitMix64, MatchesPublishedSequence) {
  SplitMix64 rng(1234567);
  EXPECT_EQ(rng.next(), 6457827717110365317ULL);
  EXPECT_EQ(rng.next(), 3203168211198807973ULL);
  EXPECT_EQ(rng.next(), 9817491932198370423ULL);
}

TEST(Frame, RejectsSmallAndOutOfRange) {
  EXPECT_THROW(Frame::filled(16, 16, 0.5f), InputError);
  EXPECT_THROW(Frame::filled(32, 31, 0.5f), InputError);
  EXPECT_THROW(Frame::filled(32, 32, 1.5f), InputError);
  EXPECT_THROW(Frame(32, 32, std::vector<float>(10, 0.0f)), InputError);
  const Frame ok = Frame::filled(32, 40, 0.25f);
  EXPECT_EQ(ok.data().size(), 32u * 40u * 3u);
}

TEST(Manifest, LoadsThreeRowsWithRelativePaths) {
  TempDir dir;
  write(dir / "m.csv",
        "id,path_i0,path_it,path_i1,mos\n"
        "t01,a/0.png,a/t.png,a/1.png,55.5\n"
        "t02,b/0.png,b/t.png,b/1.png,10\n"
        "t03,/abs/0.png,/abs/t.png,/abs/1.png,\n");
  const auto m = load_manifest(dir / "m.csv");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.records[0].id, "t01");
  EXPECT_EQ(m.records[0].path_it, (dir.path() / "a/t.png").lexically_normal());
  EXPECT_DOUBLE_EQ(*m.records[0].mos, 55.5);
  EXPECT_DOUBLE_EQ(*m.records[1].mos, 10.0);
  EXPECT_FALSE(m.records[2].mos.has_value());
  EXPECT_EQ(m.records[2].path_i0, std::filesystem::path("/abs/0.png"));
  EXPECT_FALSE(m.has_mos());
}

TEST(Manifest, MosColumnOptional) {
  TempDir dir;
  write(dir / "m.csv", "id,path_i0,path_it,path_i1\nx,0.png,t.png,1.png\n");
  const auto m = load_manifest(dir / "m.csv");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_FALSE(m.records[0].mos.has_value());
}

TEST(Manifest, DuplicateIdIsNamed) {
  TempDir dir;
  write(dir / "m.csv",
        "id,path_i0,path_it,path_i1,mos\nt01,a,b,c,1\nt01,d,e,f,2\n");
  try {
    load_manifest(dir / "m.csv");
    FAIL() << "expected duplicate-id error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("t01"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(Manifest, MosOutOfRangeReportsRow) {
  TempDir dir;
  write(dir / "m.csv", "id,path_i0,path_it,path_i1,mos\nt01,a,b,c,50\nt02,d,e,f,103.5\n");
  try {
    load_manifest(dir / "m.csv");
    FAIL() << "expected range error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("103.5"), std::string::npos) << e.what();
  }
}

TEST(Manifest, MalformedRowsAndHeaders) {
  TempDir dir;
  write(dir / "short.csv", "id,path_i0,path_it,path_i1,mos\nt01,a,b\n");
  EXPECT_THROW(load_manifest(dir / "short.csv"), InputError);
  write(dir / "nan.csv", "id,path_i0,path_it,path_i1,mos\nt01,a,b,c,abc\n");
  EXPECT_THROW(load_manifest(dir / "nan.csv"), InputError);
  write(dir / "hdr.csv", "name,path_i0,path_it,path_i1\n");
  EXPECT_THROW(load_manifest(dir / "hdr.csv"), InputError);
  write(dir / "same.csv", "id,path_i0,path_it,path_i1\nt01,a,a,c\n");
  EXPECT_THROW(load_manifest(dir / "same.csv"), InputError);
  EXPECT_THROW(load_manifest(dir / "missing.csv"), InputError);
}

TEST(Manifest, ReferenceColumnAndQuotedFields) {
  TempDir dir;
  write(dir / "m.csv",
        "id,path_i0,path_it,path_i1,mos,path_ref\n\"a,1\",x0.png,xt.png,x1.png,3,\"r ef.png\"\n");
  const auto m = load_manifest(dir / "m.csv");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.records[0].id, "a,1");
  ASSERT_TRUE(m.records[0].path_ref.has_value());
  EXPECT_EQ(m.records[0].path_ref->filename(), "r ef.png");
  EXPECT_TRUE(m.has_reference());
}

TEST(Manifest, RoundTripProperty) {
  TempDir dir;
  SplitMix64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    DatasetManifest m;
    const int n = 1 + static_cast<int>(rng.below(12));
    const bool with_mos = rng.below(2) == 0;
    const bool with_ref = rng.below(2) == 0;
    for (int i = 0; i < n; ++i) {
      TripletRecord r;
      r.id = "id" + std::to_string(trial) + "_" + std::to_string(i) + (rng.below(4) == 0 ? ",q" : "");
      const auto sub = dir.path() / ("d" + std::to_string(rng.below(3)));
      r.path_i0 = sub / (r.id + "0.png");
      r.path_it = sub / (r.id + "t.png");
      r.path_i1 = dir.path() / "other" / (r.id + "1.png");
      if (with_mos) r.mos = rng.uniform(0.0, 100.0);
      if (with_ref) r.path_ref = sub / (r.id + "ref.png");
      m.records.push_back(r);
    }
    save_manifest(m, dir / "rt.csv");
    const auto back = load_manifest(dir / "rt.csv");
    ASSERT_EQ(back.records, m.records) << "trial " << trial;
  }
}

TEST(Split, CountsAndDisjointness) {
  const auto m = numbered_manifest(10);
  const SplitConfig cfg{0.8, 10, 42};
  const auto s = split_dataset(m, cfg, 0);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  std::set<std::string> all;
  for (const auto& id : ids(s.train)) all.insert(id);
  for (const auto& id : ids(s.test)) EXPECT_TRUE(all.insert(id).second) << id;
  EXPECT_EQ(all.size(), 10u);
}

TEST(Split, Deterministic) {
  const auto m = numbered_manifest(25);
  const SplitConfig cfg{0.8, 3, 99};
  for (int rep = 0; rep < 3; ++rep) {
    EXPECT_EQ(ids(split_dataset(m, cfg, rep).test), ids(split_dataset(m, cfg, rep).test));
  }
}

// Expected test sets come from an independent Python implementation of
// SplitMix64 + Fisher-Yates over the id-sorted order (seed + repeat_index).
TEST(Split, FrozenReferenceSplits) {
  const auto m = numbered_manifest(10);
  const SplitConfig cfg{0.8, 2, 42};
  EXPECT_EQ(ids(split_dataset(m, cfg, 0).test), (std::vector<std::string>{"r01", "r03"}));
  EXPECT_EQ(ids(split_dataset(m, cfg, 1).test), (std::vector<std::string>{"r00", "r07"}));
}

TEST(Split, IndependentOfManifestOrder) {
  auto m = numbered_manifest(30);
  const SplitConfig cfg{0.8, 5, 3};
  const auto before = ids(split_dataset(m, cfg, 4).test);
  std::reverse(m.records.begin(), m.records.end());
  std::rotate(m.records.begin(), m.records.begin() + 7, m.records.end());
  EXPECT_EQ(ids(split_dataset(m, cfg, 4).test), before);
}

TEST(Split, Errors) {
  const SplitConfig cfg{0.8, 2, 1};
  EXPECT_THROW(split_dataset(DatasetManifest{}, cfg, 0), InputError);
  EXPECT_THROW(split_dataset(numbered_manifest(5), cfg, 2), InputError);
  EXPECT_THROW(split_dataset(numbered_manifest(5), SplitConfig{1.0, 1, 0}, 0), InputError);
  EXPECT_THROW(split_dataset(numbered_manifest(5), SplitConfig{0.5, 0, 0}, 0), InputError);
}

TEST(Split, PartitionPropertyOverRandomSizes) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(60));
    const double frac = rng.uniform(0.05, 0.95);
    const auto m = numbered_manifest(n, "x%03d");
    const SplitConfig cfg{frac, 4, rng.next()};
    for (int rep = 0; rep < cfg.repeats; ++rep) {
      const auto s = split_dataset(m, cfg, rep);
      EXPECT_EQ(s.train.size(), train_size(n, frac));
      std::multiset<std::string> all;
      for (const auto& id : ids(s.train)) all.insert(id);
      for (const auto& id : ids(s.test)) all.insert(id);
      std::multiset<std::string> expected;
      for (const auto& id : ids(m)) expected.insert(id);
      EXPECT_EQ(all, expected);
    }
  }
}
