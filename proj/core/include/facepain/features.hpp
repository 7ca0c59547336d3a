#pragma once

// Per-frame feature spaces and sequence-level labels.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facepain/codec.hpp"

namespace facepain {

enum class FeatureKind { Keypoints2D, Keypoints3D, BlendShapes };

inline constexpr std::array<FeatureKind, 3> kAllFeatureKinds = {
    FeatureKind::Keypoints2D, FeatureKind::Keypoints3D, FeatureKind::BlendShapes};

constexpr std::size_t feature_dim(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Keypoints2D: return kFacePointCount * 3;   // 210
    case FeatureKind::Keypoints3D: return kFaceVertexCount * 3;  // 3660
    case FeatureKind::BlendShapes: return kBlendShapeCount;      // 52
  }
  return 0;
}

/// "2d", "3d", "blendshapes".
std::string_view to_string(FeatureKind kind);
std::optional<FeatureKind> parse_feature_kind(std::string_view name);
/// Row label used in report tables ("2D Keypoints", ...).
std::string_view display_name(FeatureKind kind);

struct FrameFeatureVector {
  FeatureKind kind = FeatureKind::BlendShapes;
  std::vector<float> values;

  bool operator==(const FrameFeatureVector&) const = default;
};

struct PainLabel {
  int raw = 0;
  double scaled = 0.0;
  bool significant = false;

  bool operator==(const PainLabel&) const = default;
};

/// Ordered frames of one rated clip in a single feature space, stored row-major.
struct SequenceSample {
  std::string sequence_id;
  int patient_id = 0;
  FeatureKind kind = FeatureKind::BlendShapes;
  std::vector<float> data;  // size() * dim()
  PainLabel label;

  std::size_t dim() const { return feature_dim(kind); }
  std::size_t size() const { return data.size() / dim(); }
  std::span<const float> frame(std::size_t i) const {
    return std::span<const float>(data).subspan(i * dim(), dim());
  }
  void push_frame(std::span<const float> values) { data.insert(data.end(), values.begin(), values.end()); }

  bool operator==(const SequenceSample&) const = default;
};

/// ARKit blend shape names in the order the capture app writes them.
extern const std::array<std::string_view, kBlendShapeCount> kArkitBlendShapeNames;

/// Picks the face with the largest bounding box over confident points.
std::optional<Face2D> select_largest_face(std::span<const Face2D> faces);

/// Maps confident points onto the unit box; nullopt for a degenerate box.
/// Coordinates of zero-confidence points are clamped into [0,1].
std::optional<FrameFeatureVector> normalize_2d(std::span<const double> points);

FrameFeatureVector flatten_3d(const PackedMatrix<float>& vertices);
PackedMatrix<float> unflatten_3d(const FrameFeatureVector& v);

struct BlendShapeVector {
  FrameFeatureVector vector;
  std::size_t clamped = 0;  // coefficients pulled back into [0,1]
};

/// Reorders coefficients from `locations` order into `canonical` order.
BlendShapeVector blendshape_vector(std::span<const float> coeffs,
                                   std::span<const std::string> locations,
                                   std::span<const std::string> canonical);

PainLabel make_label(int raw);

std::string sequence_id_of(const RecordingId& id);

struct BuildReport {
  struct Exclusion {
    std::string sequence_id;
    std::string reason;
  };
  std::vector<Exclusion> excluded;
  std::size_t frames_kept = 0;
  std::size_t frames_dropped = 0;
  std::size_t values_clamped = 0;
};

struct BuildResult {
  std::vector<SequenceSample> samples;
  BuildReport report;
};

/// One SequenceSample per labeled recording with at least one usable frame.
/// Blend shapes are reordered into `canonical` (defaults to the locations of
/// the first recording that has any).
BuildResult build_sequences(std::span<const Recording> recordings, FeatureKind kind,
                            std::vector<std::string> canonical = {});

// ---------------------------------------------------------------------------
// Label table: CSV with header `patient,collection,rating,score`.

class LabelTable {
 public:
  static LabelTable parse_csv(std::string_view text);
  std::string to_csv() const;

  void set(const RecordingId& id, int score);
  std::optional<int> find(const RecordingId& id) const;
  std::size_t size() const { return scores_.size(); }
  const std::map<RecordingId, int>& entries() const { return scores_; }

 private:
  std::map<RecordingId, int> scores_;
};

}  // namespace facepain
