#pragma once

// On-disk tree layout:
//   <root>/pA/B/C/A_B_C_<stamp>.json              video information
//   <root>/pA/B/C/A_B_C_<stamp>_face_N.json       face mesh chunks
//   <root>/pose/pA/B/C/A_B_C_<stamp>/A_B_C_<stamp>_NNNNNNNNNNNN.json
//   <root>/stage/pA/A_B_C_<stamp>-{clip.json,face.zip,pose.zip}
//   <root>/labels.csv
// where <stamp> is YYYY-MM-DD_HH-MM-SS. A recording may live in the tree, in
// the stage archives, or both; the tree wins.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facepain/codec.hpp"
#include "facepain/features.hpp"

namespace facepain {

struct RecordingKey {
  RecordingId id;
  std::string stamp;  // YYYY-MM-DD_HH-MM-SS

  std::string stem() const;
  auto operator<=>(const RecordingKey&) const = default;
};

enum class FileRole { VideoInfo, FaceChunk, PoseFrame, Clip, FaceZip, PoseZip, Encrypted };

struct ParsedFileName {
  RecordingKey key;
  FileRole role = FileRole::VideoInfo;
  long long index = -1;  // chunk number or pose frame number
};

std::optional<ParsedFileName> parse_file_name(std::string_view filename);

std::string stamp_of(const UtcTime& t);

std::string video_info_file_name(const RecordingKey& key);
std::string face_chunk_file_name(const RecordingKey& key, int n);
std::string pose_frame_file_name(const RecordingKey& key, long long frame);
std::string clip_file_name(const RecordingKey& key);
std::string face_zip_file_name(const RecordingKey& key);
std::string pose_zip_file_name(const RecordingKey& key);

std::filesystem::path recording_dir(const std::filesystem::path& root, const RecordingId& id);
std::filesystem::path pose_dir(const std::filesystem::path& root, const RecordingKey& key);
std::filesystem::path stage_dir(const std::filesystem::path& root, int patient);
std::filesystem::path labels_path(const std::filesystem::path& root);

/// Raw documents of one recording, in capture order.
struct RecordingFiles {
  RecordingKey key;
  std::string video_info;
  std::vector<std::pair<std::string, std::string>> face_chunks;  // (name, text)
  std::vector<std::pair<std::string, std::string>> pose_frames;  // ordered by frame number
  std::optional<std::string> clip;
};

std::vector<RecordingKey> discover_recordings(const std::filesystem::path& root);
RecordingFiles read_recording_files(const std::filesystem::path& root, const RecordingKey& key);

/// Parses, merges, aligns and clips one recording; attaches the label if present.
Recording load_recording(const RecordingFiles& files, const LabelTable* labels = nullptr);
Recording load_recording(const std::filesystem::path& root, const RecordingKey& key,
                         const LabelTable* labels = nullptr);

struct FileCheck {
  std::string path;
  bool ok = true;
  std::string error;
};

struct ValidationReport {
  std::vector<FileCheck> checks;
  std::size_t files_seen = 0;

  bool ok() const;
  std::size_t failures() const;
};

/// Parses every recognised file under `root`; never stops at the first error.
ValidationReport validate_tree(const std::filesystem::path& root);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace facepain
