#pragma once

// Columnar binary matrix file:
//   "FPF1" | u32 kind tag | u64 rows | u64 dim | rows*dim little-endian float32
// Used for per-sequence feature caches and MIL bag dumps.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "facepain/features.hpp"

namespace facepain {

struct FeatureMatrix {
  FeatureKind kind = FeatureKind::BlendShapes;
  std::uint64_t rows = 0;
  std::uint64_t dim = 0;
  std::vector<float> values;

  bool operator==(const FeatureMatrix&) const = default;
};

std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& m);
FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes);

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

FeatureMatrix to_feature_matrix(const SequenceSample& s);

}  // namespace facepain
