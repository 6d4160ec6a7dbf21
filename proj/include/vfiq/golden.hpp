#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "vfiq/backbone.hpp"

namespace vfiq {

/// Reference activations for backbone parity checks, keyed by stage index.
struct GoldenActivations {
  std::map<int, FeatureMap> stages;
};

/// Flat little-endian container: "VFIG", u8 version (1), u32 record count,
/// then per record u8 stage, u8 ndim (3), u64 C, H, W, float32 payload.
GoldenActivations parse_golden(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_golden(const GoldenActivations& golden);
GoldenActivations load_golden(const std::filesystem::path& path);
void save_golden(const GoldenActivations& golden, const std::filesystem::path& path);

GoldenActivations golden_from_stack(const FeatureStack& stack, int first_stage = 1);

inline constexpr double kParityTolerance = 1e-4;

struct StageParity {
  int stage;
  double max_abs;
  bool ok;
};

struct ParityReport {
  std::vector<StageParity> stages;
  double tolerance = kParityTolerance;
  bool passed = false;
};

/// Max-abs difference per recorded stage. Shape mismatches throw ModelError.
ParityReport compare_to_golden(const FeatureStack& stack, const GoldenActivations& golden,
                               double tolerance = kParityTolerance);

}  // namespace vfiq
