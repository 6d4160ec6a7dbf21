#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vfiq {

/// Decoded RGB image. Intensities are in [0, 1] and stored planar:
/// data[(c * height + y) * width + x] with c = 0 (R), 1 (G), 2 (B).
class Frame {
 public:
  static constexpr int kChannels = 3;
  static constexpr int kMinSide = 32;

  Frame() = default;
  /// Validates the size and range invariants; throws InputError.
  Frame(int width, int height, std::vector<float> data);

  static Frame filled(int width, int height, float value);

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<float>& data() const { return data_; }

  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

struct TripletRecord {
  std::string id;
  std::filesystem::path path_i0;
  std::filesystem::path path_it;
  std::filesystem::path path_i1;
  std::optional<double> mos;
  /// Ground-truth intermediate frame; only full-reference baselines use it.
  std::optional<std::filesystem::path> path_ref;

  bool operator==(const TripletRecord&) const = default;
};

struct DatasetManifest {
  std::vector<TripletRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool has_mos() const;
  bool has_reference() const;
};

struct SplitConfig {
  double train_fraction = 0.8;
  int repeats = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  DatasetManifest train;
  DatasetManifest test;
};

/// Reads the manifest CSV. Header: id,path_i0,path_it,path_i1 followed by the
/// optional columns mos and path_ref in any order. Relative paths resolve
/// against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes a manifest that load_manifest reads back into identical records.
/// Paths are written relative to the output file's directory.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Validates record-level invariants (unique ids, distinct paths, MOS range).
void validate_manifest(const DatasetManifest& manifest);

/// Number of training records for a manifest of n records.
std::size_t train_size(std::size_t n, double train_fraction);

/// Deterministic random split. Records are first put in id order, so the
/// result does not depend on manifest order. The order is shuffled by
/// Fisher-Yates driven by SplitMix64(cfg.seed + repeat_index) and the first
/// train_size() records go to train. Both halves are returned in id order.
Split split_dataset(const DatasetManifest& manifest, const SplitConfig& cfg,
                    int repeat_index);

}  // namespace vfiq
