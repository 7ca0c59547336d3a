#include "facepain/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace facepain {

const std::array<std::string_view, kBlendShapeCount> kArkitBlendShapeNames = {
    "browDown_L",      "browDown_R",      "browInnerUp",     "browOuterUp_L",   "browOuterUp_R",
    "cheekPuff",       "cheekSquint_L",   "cheekSquint_R",   "eyeBlink_L",      "eyeBlink_R",
    "eyeLookDown_L",   "eyeLookDown_R",   "eyeLookIn_L",     "eyeLookIn_R",     "eyeLookOut_L",
    "eyeLookOut_R",    "eyeLookUp_L",     "eyeLookUp_R",     "eyeSquint_L",     "eyeSquint_R",
    "eyeWide_L",       "eyeWide_R",       "jawForward",      "jawLeft",         "jawOpen",
    "jawRight",        "mouthClose",      "mouthDimple_L",   "mouthDimple_R",   "mouthFrown_L",
    "mouthFrown_R",    "mouthFunnel",     "mouthLeft",       "mouthLowerDown_L", "mouthLowerDown_R",
    "mouthPress_L",    "mouthPress_R",    "mouthPucker",     "mouthRight",      "mouthRollLower",
    "mouthRollUpper",  "mouthShrugLower", "mouthShrugUpper", "mouthSmile_L",    "mouthSmile_R",
    "mouthStretch_L",  "mouthStretch_R",  "mouthUpperUp_L",  "mouthUpperUp_R",  "noseSneer_L",
    "noseSneer_R",     "tongueOut",
};

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Keypoints2D: return "2d";
    case FeatureKind::Keypoints3D: return "3d";
    case FeatureKind::BlendShapes: return "blendshapes";
  }
  return "?";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view name) {
  for (auto k : kAllFeatureKinds)
    if (name == to_string(k)) return k;
  return std::nullopt;
}

std::string_view display_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Keypoints2D: return "2D Keypoints";
    case FeatureKind::Keypoints3D: return "3D Keypoints";
    case FeatureKind::BlendShapes: return "BlendShapes";
  }
  return "?";
}

namespace {

struct Box {
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -std::numeric_limits<double>::infinity();
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  std::size_t points = 0;

  double area() const { return points == 0 ? -1.0 : (xmax - xmin) * (ymax - ymin); }
};

Box confident_box(std::span<const double> pts) {
  Box b;
  for (std::size_t i = 0; i + 2 < pts.size(); i += 3) {
    if (!(pts[i + 2] > 0.0)) continue;
    b.xmin = std::min(b.xmin, pts[i]);
    b.xmax = std::max(b.xmax, pts[i]);
    b.ymin = std::min(b.ymin, pts[i + 1]);
    b.ymax = std::max(b.ymax, pts[i + 1]);
    ++b.points;
  }
  return b;
}

}  // namespace

std::optional<Face2D> select_largest_face(std::span<const Face2D> faces) {
  const Face2D* best = nullptr;
  double best_area = -std::numeric_limits<double>::infinity();
  for (const auto& f : faces) {
    if (f.empty()) continue;
    const double a = confident_box(f).area();
    if (a > best_area) {
      best = &f;
      best_area = a;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

std::optional<FrameFeatureVector> normalize_2d(std::span<const double> points) {
  if (points.size() != kFacePointCount * 3) {
    throw InvalidArgument(fmt::format("normalize_2d: expected {} values, got {}",
                                      kFacePointCount * 3, points.size()));
  }
  const Box b = confident_box(points);
  const double w = b.xmax - b.xmin;
  const double h = b.ymax - b.ymin;
  if (b.points < 2 || !(w > 0.0) || !(h > 0.0)) return std::nullopt;

  FrameFeatureVector v{FeatureKind::Keypoints2D, std::vector<float>(points.size())};
  for (std::size_t i = 0; i < points.size(); i += 3) {
    const double x = std::clamp((points[i] - b.xmin) / w, 0.0, 1.0);
    const double y = std::clamp((points[i + 1] - b.ymin) / h, 0.0, 1.0);
    v.values[i] = static_cast<float>(x);
    v.values[i + 1] = static_cast<float>(y);
    v.values[i + 2] = static_cast<float>(points[i + 2]);
  }
  return v;
}

FrameFeatureVector flatten_3d(const PackedMatrix<float>& vertices) {
  if (vertices.rows != kFaceVertexCount || vertices.cols != 3) {
    throw InvalidArgument(fmt::format("flatten_3d: expected {}x3 vertices, got {}x{}",
                                      kFaceVertexCount, vertices.rows, vertices.cols));
  }
  return {FeatureKind::Keypoints3D, vertices.values};
}

PackedMatrix<float> unflatten_3d(const FrameFeatureVector& v) {
  if (v.kind != FeatureKind::Keypoints3D || v.values.size() != feature_dim(FeatureKind::Keypoints3D))
    throw InvalidArgument("unflatten_3d: not a 3D keypoint vector");
  return {kFaceVertexCount, 3, v.values};
}

BlendShapeVector blendshape_vector(std::span<const float> coeffs,
                                   std::span<const std::string> locations,
                                   std::span<const std::string> canonical) {
  if (coeffs.size() != kBlendShapeCount || locations.size() != kBlendShapeCount ||
      canonical.size() != kBlendShapeCount) {
    throw InvalidArgument(fmt::format("blendshape_vector: expected {} coefficients and names",
                                      kBlendShapeCount));
  }
  BlendShapeVector out{{FeatureKind::BlendShapes, std::vector<float>(kBlendShapeCount)}, 0};
  std::vector<bool> seen(kBlendShapeCount, false);
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto it = std::find(canonical.begin(), canonical.end(), locations[i]);
    if (it == canonical.end())
      throw FormatError("unknown blend shape location '" + locations[i] + "'", "blendShapeLocations");
    const auto slot = static_cast<std::size_t>(it - canonical.begin());
    if (seen[slot]) throw FormatError("duplicate blend shape location '" + locations[i] + "'", "blendShapeLocations");
    seen[slot] = true;
    float c = coeffs[i];
    if (c < 0.0f || c > 1.0f) {
      c = std::clamp(c, 0.0f, 1.0f);
      ++out.clamped;
    }
    out.vector.values[slot] = c;
  }
  return out;
}

PainLabel make_label(int raw) {
  if (raw < 0 || raw > 10) throw InvalidArgument(fmt::format("pain score {} outside 0..10", raw));
  return {raw, raw / 10.0, raw > 4};
}

std::string sequence_id_of(const RecordingId& id) {
  return fmt::format("{}_{}_{}", id.patient, id.collection, id.rating);
}

BuildResult build_sequences(std::span<const Recording> recordings, FeatureKind kind,
                            std::vector<std::string> canonical) {
  BuildResult result;
  auto& report = result.report;
  for (const auto& rec : recordings) {
    const std::string sid = sequence_id_of(rec.id);
    if (!rec.raw_pain) {
      report.excluded.push_back({sid, "no pain label"});
      continue;
    }
    if (kind == FeatureKind::BlendShapes && canonical.empty() && !rec.blend_shape_locations.empty())
      canonical = rec.blend_shape_locations;

    SequenceSample s;
    s.sequence_id = sid;
    s.patient_id = rec.id.patient;
    s.kind = kind;
    s.label = make_label(*rec.raw_pain);

    for (const auto& af : rec.aligned_frames) {
      switch (kind) {
        case FeatureKind::Keypoints2D: {
          std::optional<FrameFeatureVector> v;
          if (af.face_2d) v = normalize_2d(*af.face_2d);
          if (v) s.push_frame(v->values);
          else ++report.frames_dropped;
          break;
        }
        case FeatureKind::Keypoints3D:
          if (af.face_index) s.push_frame(flatten_3d(rec.faces.at(*af.face_index).vertices).values);
          else ++report.frames_dropped;
          break;
        case FeatureKind::BlendShapes:
          if (af.face_index) {
            auto b = blendshape_vector(rec.faces.at(*af.face_index).blend_shapes,
                                       rec.blend_shape_locations, canonical);
            report.values_clamped += b.clamped;
            s.push_frame(b.vector.values);
          } else {
            ++report.frames_dropped;
          }
          break;
      }
    }
    if (s.data.empty()) {
      report.excluded.push_back({sid, fmt::format("no usable {} frames", to_string(kind))});
      continue;
    }
    report.frames_kept += s.size();
    result.samples.push_back(std::move(s));
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, std::size_t line) {
  s = trim(s);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw FormatError(fmt::format("line {}: '{}' is not an integer", line, s), "labels");
  return v;
}

}  // namespace

LabelTable LabelTable::parse_csv(std::string_view text) {
  LabelTable table;
  std::size_t line_no = 0;
  bool header = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      if (line != "patient,collection,rating,score")
        throw FormatError("expected header 'patient,collection,rating,score'", "labels");
      header = false;
      continue;
    }
    std::array<std::string_view, 4> cols;
    std::size_t n = 0;
    while (n < 4) {
      const auto comma = line.find(',');
      cols[n++] = line.substr(0, comma);
      if (comma == std::string_view::npos) {
        line = {};
        break;
      }
      line = line.substr(comma + 1);
    }
    if (n != 4 || !line.empty())
      throw FormatError(fmt::format("line {}: expected 4 columns", line_no), "labels");
    const RecordingId id{parse_int(cols[0], line_no), parse_int(cols[1], line_no),
                         parse_int(cols[2], line_no)};
    const int score = parse_int(cols[3], line_no);
    if (score < 0 || score > 10)
      throw FormatError(fmt::format("line {}: score {} outside 0..10", line_no, score), "labels");
    table.set(id, score);
  }
  if (header) throw FormatError("empty label table", "labels");
  return table;
}

std::string LabelTable::to_csv() const {
  std::string out = "patient,collection,rating,score\n";
  for (const auto& [id, score] : scores_)
    out += fmt::format("{},{},{},{}\n", id.patient, id.collection, id.rating, score);
  return out;
}

void LabelTable::set(const RecordingId& id, int score) { scores_[id] = score; }

std::optional<int> LabelTable::find(const RecordingId& id) const {
  auto it = scores_.find(id);
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

}  // namespace facepain
