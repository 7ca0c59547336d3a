#include "facepain/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "facepain/base64.hpp"
#include "facepain/features.hpp"

namespace facepain {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "packed buffers are reinterpreted in place; big-endian hosts need byte swapping");

namespace {

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
}

const json& require(const json& obj, const char* key, std::string_view where = {}) {
  if (!obj.is_object()) throw FormatError("expected a JSON object", std::string(where));
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw FormatError("missing property",
                      where.empty() ? std::string(key) : fmt::format("{}.{}", where, key));
  }
  return *it;
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) throw FormatError("expected a number", field);
  return v.get<double>();
}

int integer(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw FormatError("expected an integer", field);
  return v.get<int>();
}

std::string string_of(const json& v, const std::string& field) {
  if (!v.is_string()) throw FormatError("expected a string", field);
  return v.get<std::string>();
}

Mat4f mat4(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 4) throw FormatError("expected a 4x4 matrix", field);
  Mat4f m{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!v[i].is_array() || v[i].size() != 4) throw FormatError("expected a 4x4 matrix", field);
    for (std::size_t j = 0; j < 4; ++j)
      m[i][j] = static_cast<float>(number(v[i][j], field));
  }
  return m;
}

json mat4_json(const Mat4f& m) {
  json rows = json::array();
  for (const auto& r : m) rows.push_back(json(r));
  return rows;
}

RecordingId read_id(const json& doc) {
  return {integer(require(doc, "patient"), "patient"),
          integer(require(doc, "collection"), "collection"),
          integer(require(doc, "rating"), "rating")};
}

void write_id(json& doc, const RecordingId& id) {
  doc["patient"] = id.patient;
  doc["collection"] = id.collection;
  doc["rating"] = id.rating;
}

template <typename T>
T load_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

FaceFrame parse_face_frame(const json& entry, std::size_t index, std::size_t n_locations) {
  const std::string where = fmt::format("data[{}]", index);
  auto field = [&](const char* key) { return fmt::format("{}.{}", where, key); };

  FaceFrame f;
  f.timestamp = number(require(entry, "timestamp", where), field("timestamp"));

  auto optional_mat = [&](const char* key, std::optional<Mat4f>& out) {
    if (auto it = entry.find(key); it != entry.end()) out = mat4(*it, field(key));
  };
  optional_mat("transform", f.transform);
  optional_mat("cameraTransform", f.camera_transform);
  optional_mat("leftEyeTransform", f.left_eye_transform);
  optional_mat("rightEyeTransform", f.right_eye_transform);
  if (auto it = entry.find("lookAtPoint"); it != entry.end()) {
    if (!it->is_array() || it->size() != 3) throw FormatError("expected 3 numbers", field("lookAtPoint"));
    Vec3f p{};
    for (std::size_t i = 0; i < 3; ++i) p[i] = static_cast<float>(number((*it)[i], field("lookAtPoint")));
    f.look_at_point = p;
  }

  auto packed_string = [&](const char* key) -> std::string {
    return string_of(require(entry, key, where), field(key));
  };

  auto blend = decode_packed_array<float>(packed_string("blendShapes"), 1, 1, field("blendShapes"));
  f.blend_shapes = std::move(blend.values);
  if (f.blend_shapes.size() != n_locations) {
    throw FormatError(fmt::format("{} coefficients but {} blendShapeLocations",
                                  f.blend_shapes.size(), n_locations),
                      field("blendShapes"));
  }

  // simd_float3 occupies 16 bytes: three floats and one float of padding.
  f.vertices = decode_packed_array<float>(packed_string("vertices"), 3, 4, field("vertices"));
  if (f.vertices.rows != kFaceVertexCount) {
    throw FormatError(fmt::format("expected {} vertices, got {}", kFaceVertexCount, f.vertices.rows),
                      field("vertices"));
  }

  if (entry.contains("textureCoordinates")) {
    f.texture_coordinates = decode_packed_array<float>(packed_string("textureCoordinates"), 2, 2,
                                                       field("textureCoordinates"));
    if (f.texture_coordinates.rows != kFaceVertexCount) {
      throw FormatError(fmt::format("expected {} texture coordinates, got {}", kFaceVertexCount,
                                    f.texture_coordinates.rows),
                        field("textureCoordinates"));
    }
  }
  if (entry.contains("triangleIndices")) {
    f.triangle_indices = decode_packed_array<std::int16_t>(packed_string("triangleIndices"), 3, 3,
                                                           field("triangleIndices"));
    for (auto idx : f.triangle_indices.values) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= kFaceVertexCount)
        throw FormatError(fmt::format("vertex index {} out of range", idx), field("triangleIndices"));
    }
  }
  return f;
}

json face_frame_json(const FaceFrame& f) {
  json e = json::object();
  e["timestamp"] = f.timestamp;
  if (f.transform) e["transform"] = mat4_json(*f.transform);
  if (f.camera_transform) e["cameraTransform"] = mat4_json(*f.camera_transform);
  if (f.left_eye_transform) e["leftEyeTransform"] = mat4_json(*f.left_eye_transform);
  if (f.right_eye_transform) e["rightEyeTransform"] = mat4_json(*f.right_eye_transform);
  if (f.look_at_point) e["lookAtPoint"] = json(*f.look_at_point);
  e["blendShapes"] = encode_packed_array(
      PackedMatrix<float>{f.blend_shapes.size(), 1, f.blend_shapes}, 1);
  e["vertices"] = encode_packed_array(f.vertices, 4);
  if (f.texture_coordinates.rows > 0) e["textureCoordinates"] = encode_packed_array(f.texture_coordinates, 2);
  if (f.triangle_indices.rows > 0) e["triangleIndices"] = encode_packed_array(f.triangle_indices, 3);
  return e;
}

double median_interval(const std::vector<double>& ts) {
  if (ts.size() < 2) return 1.0 / 60.0;
  std::vector<double> gaps(ts.size() - 1);
  for (std::size_t i = 1; i < ts.size(); ++i) gaps[i - 1] = ts[i] - ts[i - 1];
  const std::size_t mid = gaps.size() / 2;
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid), gaps.end());
  double m = gaps[mid];
  if (gaps.size() % 2 == 0) {
    const double lower = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Packed buffers

template <typename T>
PackedMatrix<T> decode_packed_array(std::string_view b64, std::size_t components,
                                    std::size_t stride, std::string_view field) {
  if (components == 0 || stride < components)
    throw InvalidArgument("decode_packed_array: need 0 < components <= stride");
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64::decode(b64);
  } catch (const FormatError& e) {
    throw FormatError(e.what(), std::string(field));
  }
  const std::size_t row_bytes = stride * sizeof(T);
  if (bytes.size() % row_bytes != 0) {
    throw FormatError(fmt::format("{} bytes is not a multiple of the {}-byte row size",
                                  bytes.size(), row_bytes),
                      std::string(field));
  }
  PackedMatrix<T> m;
  m.rows = bytes.size() / row_bytes;
  m.cols = components;
  m.values.resize(m.rows * components);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < components; ++c)
      m.values[r * components + c] = load_le<T>(bytes.data() + r * row_bytes + c * sizeof(T));
  return m;
}

template <typename T>
std::string encode_packed_array(const PackedMatrix<T>& m, std::size_t stride) {
  if (stride < m.cols) throw InvalidArgument("encode_packed_array: stride < cols");
  std::vector<std::uint8_t> bytes(m.rows * stride * sizeof(T), 0);
  for (std::size_t r = 0; r < m.rows; ++r)
    std::memcpy(bytes.data() + r * stride * sizeof(T), m.values.data() + r * m.cols,
                m.cols * sizeof(T));
  return base64::encode(bytes);
}

template PackedMatrix<float> decode_packed_array<float>(std::string_view, std::size_t,
                                                        std::size_t, std::string_view);
template PackedMatrix<std::int16_t> decode_packed_array<std::int16_t>(std::string_view,
                                                                      std::size_t, std::size_t,
                                                                      std::string_view);
template std::string encode_packed_array<float>(const PackedMatrix<float>&, std::size_t);
template std::string encode_packed_array<std::int16_t>(const PackedMatrix<std::int16_t>&,
                                                       std::size_t);

// ---------------------------------------------------------------------------
// Time

UtcTime UtcTime::parse(std::string_view iso) {
  // YYYY-MM-DDTHH:MM:SS[.mmm]Z
  auto digits = [&](std::size_t at, std::size_t n) -> int {
    if (at + n > iso.size()) throw FormatError("malformed ISO time", "start");
    int v = 0;
    for (std::size_t i = at; i < at + n; ++i) {
      if (iso[i] < '0' || iso[i] > '9') throw FormatError("malformed ISO time", "start");
      v = v * 10 + (iso[i] - '0');
    }
    return v;
  };
  auto expect = [&](std::size_t at, char c) {
    if (at >= iso.size() || iso[at] != c) throw FormatError("malformed ISO time", "start");
  };
  using namespace std::chrono;
  const int y = digits(0, 4);
  expect(4, '-');
  const int mo = digits(5, 2);
  expect(7, '-');
  const int d = digits(8, 2);
  expect(10, 'T');
  const int h = digits(11, 2);
  expect(13, ':');
  const int mi = digits(14, 2);
  expect(16, ':');
  const int s = digits(17, 2);
  std::size_t pos = 19;
  int ms = 0;
  if (pos < iso.size() && iso[pos] == '.') {
    std::size_t n = 0;
    while (pos + 1 + n < iso.size() && iso[pos + 1 + n] >= '0' && iso[pos + 1 + n] <= '9') ++n;
    if (n == 0) throw FormatError("malformed ISO time", "start");
    const int frac = digits(pos + 1, std::min<std::size_t>(n, 3));
    ms = n >= 3 ? frac : frac * (n == 1 ? 100 : 10);
    pos += 1 + n;
  }
  expect(pos, 'Z');
  if (pos + 1 != iso.size()) throw FormatError("malformed ISO time", "start");

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw FormatError("invalid calendar time", "start");
  UtcTime t;
  t.value = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms};
  return t;
}

std::string UtcTime::to_string() const {
  using namespace std::chrono;
  const auto day_point = floor<days>(value);
  const year_month_day ymd{day_point};
  auto rest = value - day_point;
  const auto h = duration_cast<hours>(rest);
  rest -= h;
  const auto mi = duration_cast<minutes>(rest);
  rest -= mi;
  const auto s = duration_cast<seconds>(rest);
  rest -= s;
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:03d}Z", int(ymd.year()),
                     unsigned(ymd.month()), unsigned(ymd.day()), h.count(), mi.count(), s.count(),
                     rest.count());
}

// ---------------------------------------------------------------------------
// Video information

VideoInfo parse_video_info(std::string_view json_text) {
  const json doc = parse_json(json_text);
  VideoInfo info;
  info.id = read_id(doc);
  info.start = UtcTime::parse(string_of(require(doc, "start"), "start"));
  info.duration = number(require(doc, "duration"), "duration");
  info.timestamp = number(require(doc, "timestamp"), "timestamp");
  const json& frames = require(doc, "frameTimestamps");
  if (!frames.is_array()) throw FormatError("expected an array", "frameTimestamps");
  info.frame_timestamps.reserve(frames.size());
  for (const auto& v : frames) info.frame_timestamps.push_back(number(v, "frameTimestamps"));

  if (!(info.duration > 0.0)) throw FormatError("duration must be positive", "duration");
  for (std::size_t i = 0; i < info.frame_timestamps.size(); ++i) {
    if (info.frame_timestamps[i] < info.timestamp)
      throw FormatError(fmt::format("frame {} precedes the video timestamp", i), "frameTimestamps");
    if (i > 0 && !(info.frame_timestamps[i] > info.frame_timestamps[i - 1]))
      throw FormatError(fmt::format("timestamps not strictly increasing at frame {}", i),
                        "frameTimestamps");
  }
  return info;
}

std::string encode_video_info(const VideoInfo& info) {
  json doc = json::object();
  write_id(doc, info.id);
  doc["start"] = info.start.to_string();
  doc["duration"] = info.duration;
  doc["timestamp"] = info.timestamp;
  doc["frameTimestamps"] = info.frame_timestamps;
  return doc.dump();
}

// ---------------------------------------------------------------------------
// Face chunks

FaceChunk parse_face_chunk(std::string_view json_text) {
  const json doc = parse_json(json_text);
  FaceChunk chunk;
  chunk.id = read_id(doc);
  chunk.start = UtcTime::parse(string_of(require(doc, "start"), "start"));

  const json& locations = require(doc, "blendShapeLocations");
  if (!locations.is_array()) throw FormatError("expected an array", "blendShapeLocations");
  for (const auto& name : locations) chunk.blend_shape_locations.push_back(string_of(name, "blendShapeLocations"));
  if (chunk.blend_shape_locations.size() != kBlendShapeCount) {
    throw FormatError(fmt::format("expected {} names, got {}", kBlendShapeCount,
                                  chunk.blend_shape_locations.size()),
                      "blendShapeLocations");
  }

  const json& data = require(doc, "data");
  if (!data.is_array()) throw FormatError("expected an array", "data");
  chunk.data.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    chunk.data.push_back(parse_face_frame(data[i], i, chunk.blend_shape_locations.size()));
    if (i > 0 && !(chunk.data[i].timestamp > chunk.data[i - 1].timestamp))
      throw FormatError("face timestamps not strictly increasing", fmt::format("data[{}].timestamp", i));
  }
  return chunk;
}

std::string encode_face_chunk(const FaceChunk& chunk) {
  json doc = json::object();
  write_id(doc, chunk.id);
  doc["start"] = chunk.start.to_string();
  doc["blendShapeLocations"] = chunk.blend_shape_locations;
  json data = json::array();
  for (const auto& f : chunk.data) data.push_back(face_frame_json(f));
  doc["data"] = std::move(data);
  return doc.dump();
}

std::vector<FaceFrame> merge_face_chunks(std::vector<FaceChunk> chunks) {
  if (chunks.empty()) return {};
  for (const auto& c : chunks) {
    if (c.id != chunks.front().id || c.start != chunks.front().start)
      throw FormatError("face chunks belong to different recordings");
  }
  std::erase_if(chunks, [](const FaceChunk& c) { return c.data.empty(); });
  std::stable_sort(chunks.begin(), chunks.end(), [](const FaceChunk& a, const FaceChunk& b) {
    return a.data.front().timestamp < b.data.front().timestamp;
  });

  std::vector<FaceFrame> frames;
  for (auto& c : chunks) {
    if (!frames.empty() && !(c.data.front().timestamp > frames.back().timestamp))
      throw FormatError("face chunks overlap in time");
    std::move(c.data.begin(), c.data.end(), std::back_inserter(frames));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Pose

PoseFrame parse_pose_frame(std::string_view json_text) {
  const json doc = parse_json(json_text);
  PoseFrame frame;
  if (auto it = doc.find("version"); it != doc.end() && it->is_number()) frame.version = it->get<double>();
  const json& people = require(doc, "people");
  if (!people.is_array()) throw FormatError("expected an array", "people");

  for (std::size_t i = 0; i < people.size(); ++i) {
    const json& p = people[i];
    const std::string where = fmt::format("people[{}]", i);
    PosePerson person;
    if (auto it = p.find("person_id"); it != p.end()) {
      // OpenPose writes person_id as a one-element array.
      if (it->is_array() && !it->empty()) person.person_id = integer((*it)[0], where + ".person_id");
      else if (it->is_number_integer()) person.person_id = it->get<int>();
    }
    auto floats = [&](const char* key, std::vector<double>& out) {
      auto it = p.find(key);
      if (it == p.end()) return;
      if (!it->is_array()) throw FormatError("expected an array", where + "." + key);
      out.reserve(it->size());
      for (const auto& v : *it) out.push_back(number(v, where + "." + key));
    };
    floats("pose_keypoints_2d", person.pose_keypoints_2d);
    floats("face_keypoints_2d", person.face_keypoints_2d);

    const std::string face_field = where + ".face_keypoints_2d";
    if (!person.face_keypoints_2d.empty() && person.face_keypoints_2d.size() != kFacePointCount * 3) {
      throw FormatError(fmt::format("expected 0 or {} values, got {}", kFacePointCount * 3,
                                    person.face_keypoints_2d.size()),
                        face_field);
    }
    for (std::size_t k = 2; k < person.face_keypoints_2d.size(); k += 3) {
      const double c = person.face_keypoints_2d[k];
      if (!(c >= 0.0 && c <= 1.0)) throw FormatError("confidence outside [0,1]", face_field);
    }
    frame.people.push_back(std::move(person));
  }
  return frame;
}

std::string encode_pose_frame(const PoseFrame& frame) {
  json doc = json::object();
  doc["version"] = frame.version;
  json people = json::array();
  for (const auto& p : frame.people) {
    json e = json::object();
    e["person_id"] = json::array({p.person_id});
    e["pose_keypoints_2d"] = p.pose_keypoints_2d;
    e["face_keypoints_2d"] = p.face_keypoints_2d;
    people.push_back(std::move(e));
  }
  doc["people"] = std::move(people);
  return doc.dump();
}

// ---------------------------------------------------------------------------
// Clip markers

ClipMarkers parse_clip_markers(std::string_view json_text) {
  const json doc = parse_json(json_text);
  ClipMarkers m{number(require(doc, "start"), "start"), number(require(doc, "end"), "end")};
  if (!(m.start >= 0.0 && m.start < m.end)) throw FormatError("need 0 <= start < end", "start");
  return m;
}

std::string encode_clip_markers(const ClipMarkers& markers) {
  return json{{"start", markers.start}, {"end", markers.end}}.dump();
}

Recording apply_clip(const Recording& rec, const ClipMarkers& markers) {
  Recording out = rec;
  std::erase_if(out.aligned_frames, [&](const AlignedFrame& f) {
    const double t = f.video_timestamp - rec.origin;
    return t < markers.start || t > markers.end;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Alignment

Recording align_streams(const VideoInfo& info, std::vector<FaceFrame> faces,
                        std::span<const PoseFrame> pose,
                        std::vector<std::string> blend_shape_locations) {
  const auto& ts = info.frame_timestamps;
  if (!pose.empty() && pose.size() != ts.size()) {
    throw InvalidArgument(fmt::format("align_streams: {} pose frames for {} video frames",
                                      pose.size(), ts.size()));
  }

  Recording rec;
  rec.id = info.id;
  rec.origin = ts.empty() ? info.timestamp : ts.front();
  rec.blend_shape_locations = std::move(blend_shape_locations);
  rec.aligned_frames.resize(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) rec.aligned_frames[i].video_timestamp = ts[i];

  const double tolerance = 0.5 * median_interval(ts);
  // For every face mesh keep only the closest video frame within tolerance;
  // ties go to the earlier frame.
  std::map<std::size_t, std::pair<std::size_t, double>> claim;  // face -> (frame, |dt|)
  for (std::size_t i = 0; i < ts.size() && !faces.empty(); ++i) {
    auto it = std::lower_bound(faces.begin(), faces.end(), ts[i],
                               [](const FaceFrame& f, double t) { return f.timestamp < t; });
    std::size_t best = faces.size();
    double best_dt = std::numeric_limits<double>::infinity();
    if (it != faces.end()) {
      best = static_cast<std::size_t>(it - faces.begin());
      best_dt = it->timestamp - ts[i];
    }
    if (it != faces.begin()) {
      const auto prev = static_cast<std::size_t>(it - faces.begin()) - 1;
      const double dt = ts[i] - faces[prev].timestamp;
      if (dt <= best_dt) {
        best = prev;
        best_dt = dt;
      }
    }
    if (best == faces.size() || best_dt > tolerance) continue;
    auto [slot, inserted] = claim.try_emplace(best, i, best_dt);
    if (!inserted && best_dt < slot->second.second) slot->second = {i, best_dt};
  }
  for (const auto& [face, frame] : claim) rec.aligned_frames[frame.first].face_index = face;
  rec.faces = std::move(faces);

  for (std::size_t i = 0; i < pose.size(); ++i) {
    std::vector<Face2D> candidates;
    for (const auto& person : pose[i].people) candidates.push_back(person.face_keypoints_2d);
    rec.aligned_frames[i].face_2d = select_largest_face(candidates);
  }
  return rec;
}

}  // namespace facepain
