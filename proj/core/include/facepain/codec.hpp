#pragma once

// Readers and writers for the capture formats: video information JSON,
// 10-second face mesh chunks with Base64 packed buffers, per-frame OpenPose
// JSON and clip markers. Everything here is a pure function of its inputs.

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facepain/error.hpp"

namespace facepain {

inline constexpr std::size_t kFaceVertexCount = 1220;
inline constexpr std::size_t kBlendShapeCount = 52;
inline constexpr std::size_t kFacePointCount = 70;

/// Row-major `rows x cols` buffer decoded from a packed Base64 field.
template <typename T>
struct PackedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;

  const T& operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  T& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }

  bool operator==(const PackedMatrix&) const = default;
};

/// Decodes little-endian `T` elements laid out in rows of `stride` elements and
/// keeps the first `components` of every row. Throws FormatError naming
/// `field` when the byte count is not a whole number of rows.
template <typename T>
PackedMatrix<T> decode_packed_array(std::string_view b64, std::size_t components,
                                    std::size_t stride, std::string_view field = {});

/// Inverse of decode_packed_array; padding elements are written as zero.
template <typename T>
std::string encode_packed_array(const PackedMatrix<T>& m, std::size_t stride);

extern template PackedMatrix<float> decode_packed_array<float>(std::string_view, std::size_t,
                                                               std::size_t, std::string_view);
extern template PackedMatrix<std::int16_t> decode_packed_array<std::int16_t>(
    std::string_view, std::size_t, std::size_t, std::string_view);
extern template std::string encode_packed_array<float>(const PackedMatrix<float>&, std::size_t);
extern template std::string encode_packed_array<std::int16_t>(const PackedMatrix<std::int16_t>&,
                                                              std::size_t);

/// Wall-clock instant with millisecond precision, serialized as
/// "2019-08-04T03:04:13.906Z".
struct UtcTime {
  std::chrono::sys_time<std::chrono::milliseconds> value{};

  static UtcTime parse(std::string_view iso);
  std::string to_string() const;

  auto operator<=>(const UtcTime&) const = default;
};

struct RecordingId {
  int patient = 0;
  int collection = 0;
  int rating = 0;

  auto operator<=>(const RecordingId&) const = default;
};

struct VideoInfo {
  RecordingId id;
  UtcTime start;
  double duration = 0.0;
  double timestamp = 0.0;
  std::vector<double> frame_timestamps;

  bool operator==(const VideoInfo&) const = default;
};

using Mat4f = std::array<std::array<float, 4>, 4>;
using Vec3f = std::array<float, 3>;

struct FaceFrame {
  double timestamp = 0.0;
  std::optional<Mat4f> transform;
  std::optional<Mat4f> camera_transform;
  std::optional<Mat4f> left_eye_transform;
  std::optional<Mat4f> right_eye_transform;
  std::optional<Vec3f> look_at_point;
  std::vector<float> blend_shapes;
  PackedMatrix<float> vertices;             // kFaceVertexCount x 3
  PackedMatrix<float> texture_coordinates;  // kFaceVertexCount x 2, may be empty
  PackedMatrix<std::int16_t> triangle_indices;  // T x 3, may be empty

  bool operator==(const FaceFrame&) const = default;
};

struct FaceChunk {
  RecordingId id;
  UtcTime start;
  std::vector<std::string> blend_shape_locations;
  std::vector<FaceFrame> data;

  bool operator==(const FaceChunk&) const = default;
};

struct PosePerson {
  int person_id = -1;
  std::vector<double> pose_keypoints_2d;
  std::vector<double> face_keypoints_2d;  // empty or kFacePointCount * 3

  bool operator==(const PosePerson&) const = default;
};

struct PoseFrame {
  double version = 1.3;
  std::vector<PosePerson> people;

  bool operator==(const PoseFrame&) const = default;
};

struct ClipMarkers {
  double start = 0.0;
  double end = 0.0;

  bool operator==(const ClipMarkers&) const = default;
};

/// 70 points as (x, y, confidence) triples.
using Face2D = std::vector<double>;

struct AlignedFrame {
  double video_timestamp = 0.0;
  std::optional<std::size_t> face_index;  // into Recording::faces
  std::optional<Face2D> face_2d;

  bool operator==(const AlignedFrame&) const = default;
};

struct Recording {
  RecordingId id;
  double origin = 0.0;  // capture-clock time of the first video frame
  std::vector<std::string> blend_shape_locations;
  std::vector<FaceFrame> faces;
  std::vector<AlignedFrame> aligned_frames;
  std::optional<int> raw_pain;

  bool operator==(const Recording&) const = default;
};

VideoInfo parse_video_info(std::string_view json_text);
std::string encode_video_info(const VideoInfo& info);

FaceChunk parse_face_chunk(std::string_view json_text);
std::string encode_face_chunk(const FaceChunk& chunk);

/// Concatenates chunk frames in capture order. Chunks are ordered by their
/// first timestamp, so the order of `chunks` does not matter.
std::vector<FaceFrame> merge_face_chunks(std::vector<FaceChunk> chunks);

PoseFrame parse_pose_frame(std::string_view json_text);
std::string encode_pose_frame(const PoseFrame& frame);

ClipMarkers parse_clip_markers(std::string_view json_text);
std::string encode_clip_markers(const ClipMarkers& markers);

/// Keeps frames whose time relative to `rec.origin` lies in [start, end].
Recording apply_clip(const Recording& rec, const ClipMarkers& markers);

/// Pairs each video frame with the nearest face mesh (within half the median
/// frame interval) and with the largest detected 2D face. `pose` must be empty
/// or hold one entry per video frame.
Recording align_streams(const VideoInfo& info, std::vector<FaceFrame> faces,
                        std::span<const PoseFrame> pose,
                        std::vector<std::string> blend_shape_locations = {});

}  // namespace facepain
