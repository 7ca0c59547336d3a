#include "facepain/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "facepain/error.hpp"
#include "facepain/layout.hpp"
#include "facepain/rng.hpp"
#include "facepain/zip.hpp"

namespace facepain {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (patients < 1) throw InvalidArgument("synth: patients must be >= 1");
  if (sequences_per_patient < 1 || sequences_per_patient > 15)
    throw InvalidArgument("synth: sequences_per_patient must lie in [1, 15]");
  if (frames_per_sequence < 1) throw InvalidArgument("synth: frames_per_sequence must be >= 1");
  if (kinds.empty()) throw InvalidArgument("synth: no feature kinds requested");
  if (!(witness_fraction > 0.0 && witness_fraction <= 1.0))
    throw InvalidArgument("synth: witness_fraction must lie in (0, 1]");
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0))
    throw InvalidArgument("synth: positive_fraction must lie in [0, 1]");
  if (!(noise_scale >= 0.0)) throw InvalidArgument("synth: noise_scale must be >= 0");
  if (!(fps > 0.0)) throw InvalidArgument("synth: fps must be positive");
  for (const auto* centers : {&neutral_center, &pain_center})
    for (const auto& [kind, c] : *centers)
      if (c.size() != feature_dim(kind))
        throw InvalidArgument(fmt::format("synth: {} center needs {} values, got {}", to_string(kind),
                                          feature_dim(kind), c.size()));
}

std::size_t SynthConfig::witness_count() const {
  const auto m = static_cast<std::size_t>(std::ceil(witness_fraction * static_cast<double>(frames_per_sequence) - 1e-9));
  return std::clamp<std::size_t>(m, 1, frames_per_sequence);
}

namespace {

using Points = std::vector<std::array<double, 2>>;

// 70-point face in the OpenPose ordering, laid out in the unit box.
Points neutral_face_2d() {
  Points p(kFacePointCount);
  const double pi = std::numbers::pi;
  for (int j = 0; j <= 16; ++j) {  // jaw line
    const double u = j / 16.0;
    p[j] = {0.5 - 0.5 * std::cos(pi * u), 0.35 + 0.65 * std::sin(pi * u)};
  }
  for (int j = 0; j < 5; ++j) {  // brows
    const double t = j / 4.0;
    const double y = 0.08 - 0.08 * std::sin(pi * t);
    p[17 + j] = {0.12 + 0.30 * t, y};
    p[22 + j] = {0.58 + 0.30 * t, y};
  }
  for (int j = 0; j < 4; ++j) p[27 + j] = {0.5, 0.30 + 0.25 * j / 3.0};  // nose bridge
  for (int j = 0; j < 5; ++j) p[31 + j] = {0.40 + 0.05 * j, 0.60};        // nostrils
  for (int j = 0; j < 6; ++j) {                                            // eyes
    const double a = 2.0 * pi * j / 6.0;
    p[36 + j] = {0.30 + 0.08 * std::cos(a), 0.30 + 0.03 * std::sin(a)};
    p[42 + j] = {0.70 + 0.08 * std::cos(a), 0.30 + 0.03 * std::sin(a)};
  }
  for (int j = 0; j < 12; ++j) {  // outer lips
    const double a = 2.0 * pi * j / 12.0;
    p[48 + j] = {0.5 + 0.18 * std::cos(a), 0.78 + 0.07 * std::sin(a)};
  }
  for (int j = 0; j < 8; ++j) {  // inner lips
    const double a = 2.0 * pi * j / 8.0;
    p[60 + j] = {0.5 + 0.10 * std::cos(a), 0.78 + 0.03 * std::sin(a)};
  }
  p[68] = {0.30, 0.30};
  p[69] = {0.70, 0.30};
  return p;
}

constexpr double kConfidence = 0.9;

std::vector<double> flatten_face(const Points& p) {
  std::vector<double> v;
  v.reserve(kFacePointCount * 3);
  for (const auto& q : p) {
    v.push_back(q[0]);
    v.push_back(q[1]);
    v.push_back(kConfidence);
  }
  return v;
}

std::array<double, 3> neutral_vertex(std::size_t i) {
  const double z = 1.0 - (static_cast<double>(i) + 0.5) / static_cast<double>(kFaceVertexCount);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double theta = static_cast<double>(i) * 2.399963229728653;  // golden angle
  return {0.55 * r * std::cos(theta), 0.75 * r * std::sin(theta), 0.35 * z};
}

constexpr std::array<std::string_view, 15> kPainShapes = {
    "browDown_L",   "browDown_R",    "cheekSquint_L",  "cheekSquint_R",  "eyeSquint_L",
    "eyeSquint_R",  "eyeBlink_L",    "eyeBlink_R",     "noseSneer_L",    "noseSneer_R",
    "mouthUpperUp_L", "mouthUpperUp_R", "mouthStretch_L", "mouthStretch_R", "jawOpen"};

std::pair<double, double> legal_range(FeatureKind kind) {
  return kind == FeatureKind::Keypoints3D ? std::pair{-1.0, 1.0} : std::pair{0.0, 1.0};
}

// Draws one frame around `center`; 2D frames are re-normalized so the stored
// feature equals what normalize_2d yields from the emitted pixel coordinates.
std::vector<float> draw_frame(FeatureKind kind, const std::vector<double>& center, double noise, Rng& rng) {
  const auto [lo, hi] = legal_range(kind);
  std::vector<double> v(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) {
    if (kind == FeatureKind::Keypoints2D && i % 3 == 2) {
      v[i] = kConfidence;
      continue;
    }
    v[i] = std::clamp(center[i] + noise * rng.normal(), lo, hi);
  }
  if (kind == FeatureKind::Keypoints2D) {
    if (auto n = normalize_2d(v)) return n->values;
    throw NumericError("synth: degenerate 2D face drawn; lower noise_scale");
  }
  return {v.begin(), v.end()};
}

std::vector<double> center_for(const std::map<FeatureKind, std::vector<double>>& given, FeatureKind kind,
                               bool pain) {
  if (auto it = given.find(kind); it != given.end()) return it->second;
  return pain ? default_pain_center(kind) : default_neutral_center(kind);
}

RecordingId id_of(int patient_index, int sequence_index) {
  return {patient_index + 1, sequence_index / 5 + 1, sequence_index % 5 + 1};
}

}  // namespace

std::vector<double> default_neutral_center(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Keypoints2D: return flatten_face(neutral_face_2d());
    case FeatureKind::Keypoints3D: {
      std::vector<double> v;
      v.reserve(kFaceVertexCount * 3);
      for (std::size_t i = 0; i < kFaceVertexCount; ++i)
        for (double c : neutral_vertex(i)) v.push_back(c);
      return v;
    }
    case FeatureKind::BlendShapes: return std::vector<double>(kBlendShapeCount, 0.15);
  }
  return {};
}

std::vector<double> default_pain_center(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Keypoints2D: {
      Points p = neutral_face_2d();
      for (int j = 17; j <= 26; ++j) p[j][1] += 0.06;  // lowered brows
      for (int j = 36; j <= 47; ++j) p[j][1] = 0.30 + 0.4 * (p[j][1] - 0.30);  // squeezed eyes
      for (int j = 48; j <= 67; ++j) {  // stretched mouth, raised upper lip
        p[j][0] = 0.5 + 1.25 * (p[j][0] - 0.5);
        if (p[j][1] < 0.78) p[j][1] -= 0.03;
      }
      for (auto& q : p) q[0] = std::clamp(q[0], 0.0, 1.0);
      return flatten_face(p);
    }
    case FeatureKind::Keypoints3D: {
      std::vector<double> v = default_neutral_center(kind);
      for (std::size_t i = 0; i < kFaceVertexCount; ++i) {
        double& x = v[3 * i];
        double& y = v[3 * i + 1];
        if (y > 0.3) y -= 0.08;
        else if (y < -0.35) {
          y -= 0.06;
          x *= 1.1;
        }
      }
      return v;
    }
    case FeatureKind::BlendShapes: {
      std::vector<double> v = default_neutral_center(kind);
      for (auto name : kPainShapes) {
        const auto it = std::find(kArkitBlendShapeNames.begin(), kArkitBlendShapeNames.end(), name);
        v[static_cast<std::size_t>(it - kArkitBlendShapeNames.begin())] += 0.45;
      }
      return v;
    }
  }
  return {};
}

const SequenceTruth* GroundTruth::find(std::string_view sequence_id) const {
  for (const auto& s : sequences)
    if (s.sequence_id == sequence_id) return &s;
  return nullptr;
}

LabelTable GroundTruth::labels() const {
  LabelTable t;
  for (const auto& s : sequences) t.set(s.id, s.raw_pain);
  return t;
}

SynthDataset generate_samples(const SynthConfig& config) {
  config.validate();
  const std::size_t n = config.frames_per_sequence;
  const std::size_t m = config.witness_count();

  SynthDataset out;
  std::map<FeatureKind, std::pair<std::vector<double>, std::vector<double>>> centers;
  for (FeatureKind kind : config.kinds)
    centers[kind] = {center_for(config.neutral_center, kind, false), center_for(config.pain_center, kind, true)};

  std::uint64_t q = 0;
  for (int p = 0; p < config.patients; ++p) {
    for (int s = 0; s < config.sequences_per_patient; ++s, ++q) {
      const std::uint64_t seq_seed = derive_seed(config.seed, q);
      Rng rng(seq_seed);
      SequenceTruth truth;
      truth.id = id_of(p, s);
      truth.sequence_id = sequence_id_of(truth.id);
      const bool positive = rng.uniform() < config.positive_fraction;
      truth.raw_pain = positive ? 5 + static_cast<int>(rng.below(6)) : static_cast<int>(rng.below(5));
      if (positive) {
        const std::size_t first = rng.below(n - m + 1);
        for (std::size_t i = first; i < first + m; ++i) truth.witness_frames.push_back(i);
      }

      for (FeatureKind kind : config.kinds) {
        Rng frame_rng(derive_seed(seq_seed, 1 + static_cast<std::uint64_t>(kind)));
        const auto& [neutral, pain] = centers.at(kind);
        SequenceSample sample;
        sample.sequence_id = truth.sequence_id;
        sample.patient_id = truth.id.patient;
        sample.kind = kind;
        sample.label = make_label(truth.raw_pain);
        sample.data.reserve(n * feature_dim(kind));
        for (std::size_t i = 0; i < n; ++i) {
          const bool witness = std::binary_search(truth.witness_frames.begin(), truth.witness_frames.end(), i);
          sample.push_frame(draw_frame(kind, witness ? pain : neutral, config.noise_scale, frame_rng));
        }
        out.samples[kind].push_back(std::move(sample));
      }
      out.truth.sequences.push_back(std::move(truth));
    }
  }
  return out;
}

namespace {

constexpr double kPixelWidth = 180.0;
constexpr double kPixelHeight = 220.0;
constexpr double kPixelLeft = 300.0;
constexpr double kPixelTop = 400.0;

Mat4f identity4() {
  Mat4f m{};
  for (std::size_t i = 0; i < 4; ++i) m[i][i] = 1.0f;
  return m;
}

std::vector<float> as_floats(const std::vector<double>& v) { return {v.begin(), v.end()}; }

std::vector<double> to_pixels(std::span<const float> features, double scale, double left, double top) {
  std::vector<double> px(features.size());
  for (std::size_t i = 0; i < features.size(); i += 3) {
    px[i] = left + static_cast<double>(features[i]) * kPixelWidth * scale;
    px[i + 1] = top + static_cast<double>(features[i + 1]) * kPixelHeight * scale;
    px[i + 2] = static_cast<double>(features[i + 2]);
  }
  return px;
}

std::vector<double> body_keypoints() {
  std::vector<double> v;
  for (int j = 0; j < 25; ++j) {
    v.push_back(kPixelLeft + 90.0 + 6.0 * (j % 5));
    v.push_back(kPixelTop + 260.0 + 40.0 * (j / 5));
    v.push_back(0.8);
  }
  return v;
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory " + dir.string());
}

}  // namespace

GroundTruth generate(const SynthConfig& config, const fs::path& root, SynthLayout layout) {
  const SynthDataset data = generate_samples(config);
  const std::size_t n = config.frames_per_sequence;
  ensure_writable(root);

  const auto fallback = [&](FeatureKind kind) { return as_floats(default_neutral_center(kind)); };
  const std::vector<float> neutral_2d = fallback(FeatureKind::Keypoints2D);
  const std::vector<float> neutral_3d = fallback(FeatureKind::Keypoints3D);
  const std::vector<float> neutral_bs = fallback(FeatureKind::BlendShapes);
  const std::vector<std::string> locations(kArkitBlendShapeNames.begin(), kArkitBlendShapeNames.end());

  PackedMatrix<float> texture{kFaceVertexCount, 2, {}};
  texture.values.reserve(kFaceVertexCount * 2);
  for (std::size_t i = 0; i < kFaceVertexCount; ++i) {
    texture.values.push_back(static_cast<float>(0.5 + neutral_3d[3 * i] / 1.1));
    texture.values.push_back(static_cast<float>(0.5 - neutral_3d[3 * i + 1] / 1.5));
  }
  PackedMatrix<std::int16_t> triangles{8, 3, {}};
  for (std::int16_t t = 0; t < 8; ++t)
    for (std::int16_t c = 0; c < 3; ++c) triangles.values.push_back(static_cast<std::int16_t>(t * 3 + c));

  const auto base = std::chrono::sys_days{std::chrono::year{2021} / 3 / 1} + std::chrono::hours{9};
  const auto frames_for = [&](FeatureKind kind, std::size_t q) -> const SequenceSample* {
    auto it = data.samples.find(kind);
    return it == data.samples.end() ? nullptr : &it->second[q];
  };

  for (std::size_t q = 0; q < data.truth.sequences.size(); ++q) {
    const SequenceTruth& truth = data.truth.sequences[q];
    VideoInfo info;
    info.id = truth.id;
    info.start.value = std::chrono::time_point_cast<std::chrono::milliseconds>(base) +
                       std::chrono::days{truth.id.patient} +
                       std::chrono::minutes{10 * (5 * (truth.id.collection - 1) + truth.id.rating)} +
                       std::chrono::milliseconds{static_cast<long long>(q % 1000)};
    info.timestamp = 1000.0 + 100.0 * static_cast<double>(q);
    info.duration = static_cast<double>(n) / config.fps;
    for (std::size_t i = 0; i < n; ++i)
      info.frame_timestamps.push_back(info.timestamp + static_cast<double>(i) / config.fps);
    const RecordingKey key{truth.id, stamp_of(info.start)};

    const SequenceSample* s2d = frames_for(FeatureKind::Keypoints2D, q);
    const SequenceSample* s3d = frames_for(FeatureKind::Keypoints3D, q);
    const SequenceSample* sbs = frames_for(FeatureKind::BlendShapes, q);

    std::vector<FaceChunk> chunks;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>((info.frame_timestamps[i] - info.timestamp) / 10.0);
      while (chunks.size() <= c) chunks.push_back({truth.id, info.start, locations, {}});
      FaceFrame f;
      f.timestamp = info.frame_timestamps[i];
      f.transform = identity4();
      f.camera_transform = identity4();
      f.left_eye_transform = identity4();
      f.right_eye_transform = identity4();
      f.look_at_point = Vec3f{0.0f, 0.0f, 1.0f};
      const auto bs = sbs ? sbs->frame(i) : std::span<const float>(neutral_bs);
      f.blend_shapes.assign(bs.begin(), bs.end());
      const auto vx = s3d ? s3d->frame(i) : std::span<const float>(neutral_3d);
      f.vertices = {kFaceVertexCount, 3, {vx.begin(), vx.end()}};
      f.texture_coordinates = texture;
      f.triangle_indices = triangles;
      chunks[c].data.push_back(std::move(f));
    }

    std::vector<std::pair<std::string, std::string>> pose_files;
    for (std::size_t i = 0; i < n; ++i) {
      const auto face = s2d ? s2d->frame(i) : std::span<const float>(neutral_2d);
      PoseFrame pf;
      pf.people.push_back({-1, body_keypoints(), to_pixels(face, 1.0, kPixelLeft, kPixelTop)});
      // A smaller face in the background; the largest-face rule must skip it.
      pf.people.push_back({-1, {}, to_pixels(std::span<const float>(neutral_2d), 0.3, 40.0, 60.0)});
      pose_files.emplace_back(pose_frame_file_name(key, static_cast<long long>(i)), encode_pose_frame(pf));
    }
    const ClipMarkers clip{0.0, info.duration};

    const fs::path stage = stage_dir(root, truth.id.patient);
    ensure_writable(stage);
    write_text_file(stage / clip_file_name(key), encode_clip_markers(clip));
    if (layout == SynthLayout::Tree) {
      const fs::path dir = recording_dir(root, truth.id);
      ensure_writable(dir);
      write_text_file(dir / video_info_file_name(key), encode_video_info(info));
      for (std::size_t c = 0; c < chunks.size(); ++c)
        write_text_file(dir / face_chunk_file_name(key, static_cast<int>(c)), encode_face_chunk(chunks[c]));
      const fs::path pdir = pose_dir(root, key);
      ensure_writable(pdir);
      for (const auto& [name, text] : pose_files) write_text_file(pdir / name, text);
    } else {
      std::vector<zip::Entry> face_entries;
      const auto bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
      face_entries.push_back({video_info_file_name(key), bytes(encode_video_info(info))});
      for (std::size_t c = 0; c < chunks.size(); ++c)
        face_entries.push_back({face_chunk_file_name(key, static_cast<int>(c)), bytes(encode_face_chunk(chunks[c]))});
      zip::write_archive(stage / face_zip_file_name(key), face_entries);
      std::vector<zip::Entry> pose_entries;
      for (const auto& [name, text] : pose_files) pose_entries.push_back({name, bytes(text)});
      zip::write_archive(stage / pose_zip_file_name(key), pose_entries);
    }
  }

  write_text_file(labels_path(root), data.truth.labels().to_csv());
  write_text_file(root / "manifest.json", manifest_json(config, data.truth));
  return data.truth;
}

std::string manifest_json(const SynthConfig& config, const GroundTruth& truth) {
  nlohmann::ordered_json doc;
  doc["format"] = "facepain-synth-manifest";
  doc["version"] = 1;
  nlohmann::ordered_json cfg;
  cfg["patients"] = config.patients;
  cfg["sequences_per_patient"] = config.sequences_per_patient;
  cfg["frames_per_sequence"] = config.frames_per_sequence;
  std::vector<std::string> kinds;
  for (FeatureKind k : config.kinds) kinds.emplace_back(to_string(k));
  cfg["kinds"] = kinds;
  cfg["witness_fraction"] = config.witness_fraction;
  cfg["positive_fraction"] = config.positive_fraction;
  cfg["noise_scale"] = config.noise_scale;
  cfg["fps"] = config.fps;
  cfg["seed"] = config.seed;
  doc["config"] = cfg;
  auto& seqs = doc["sequences"] = nlohmann::ordered_json::array();
  for (const auto& s : truth.sequences) {
    nlohmann::ordered_json e;
    e["sequence_id"] = s.sequence_id;
    e["raw_pain"] = s.raw_pain;
    e["witness_frames"] = s.witness_frames;
    seqs.push_back(std::move(e));
  }
  return doc.dump(2) + "\n";
}

double witness_recovery_rate(const MilModel& model, std::span<const Bag> bags, const GroundTruth& truth) {
  if (model.positive_bags.empty()) throw InvalidArgument("witness_recovery_rate: model has no positive bags");
  if (model.witnesses.size() != model.positive_bags.size())
    throw InvalidArgument("witness_recovery_rate: model has no final witness assignment");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < model.positive_bags.size(); ++i) {
    if (model.positive_bags[i] >= bags.size()) throw InvalidArgument("witness_recovery_rate: bag list does not match model");
    const Bag& bag = bags[model.positive_bags[i]];
    if (bag.source_indices.size() != static_cast<std::size_t>(bag.instances.rows()))
      throw InvalidArgument(fmt::format("bag {} carries no source frame indices", bag.bag_id));
    const SequenceTruth* t = truth.find(bag.bag_id);
    if (!t) throw InvalidArgument(fmt::format("bag {} is not in the ground truth", bag.bag_id));
    const std::size_t frame = bag.source_indices.at(model.witnesses[i]);
    if (std::binary_search(t->witness_frames.begin(), t->witness_frames.end(), frame)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(model.positive_bags.size());
}

}  // namespace facepain
