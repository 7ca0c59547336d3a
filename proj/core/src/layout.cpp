#include "facepain/layout.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "facepain/zip.hpp"

namespace fs = std::filesystem;

namespace facepain {

std::string RecordingKey::stem() const {
  return fmt::format("{}_{}_{}_{}", id.patient, id.collection, id.rating, stamp);
}

std::optional<ParsedFileName> parse_file_name(std::string_view filename) {
  static const std::regex pattern(
      R"(^(\d+)_(\d+)_(\d+)_(\d{4}-\d{2}-\d{2}_\d{2}-\d{2}-\d{2})(.*)$)");
  static const std::regex chunk(R"(^_face_(\d+)\.json$)");
  static const std::regex pose(R"(^_(\d{12})(_keypoints)?\.json$)");

  const std::string name(filename);
  std::smatch m;
  if (!std::regex_match(name, m, pattern)) return std::nullopt;

  ParsedFileName out;
  out.key.id = {std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
  out.key.stamp = m[4];
  const std::string suffix = m[5];
  std::smatch s;
  if (suffix == ".json") {
    out.role = FileRole::VideoInfo;
  } else if (std::regex_match(suffix, s, chunk)) {
    out.role = FileRole::FaceChunk;
    out.index = std::stoll(s[1]);
  } else if (std::regex_match(suffix, s, pose)) {
    out.role = FileRole::PoseFrame;
    out.index = std::stoll(s[1]);
  } else if (suffix == "-clip.json") {
    out.role = FileRole::Clip;
  } else if (suffix == "-face.zip") {
    out.role = FileRole::FaceZip;
  } else if (suffix == "-pose.zip") {
    out.role = FileRole::PoseZip;
  } else if (suffix == "-face.zip.gpg" || suffix == "-pose.zip.gpg") {
    out.role = FileRole::Encrypted;
  } else {
    return std::nullopt;
  }
  return out;
}

std::string stamp_of(const UtcTime& t) {
  // "2019-08-04T03:04:13.906Z" -> "2019-08-04_03-04-13"
  std::string iso = t.to_string();
  std::string s = iso.substr(0, 10) + "_" + iso.substr(11, 8);
  std::replace(s.begin() + 11, s.end(), ':', '-');
  return s;
}

std::string video_info_file_name(const RecordingKey& key) { return key.stem() + ".json"; }
std::string face_chunk_file_name(const RecordingKey& key, int n) {
  return fmt::format("{}_face_{}.json", key.stem(), n);
}
std::string pose_frame_file_name(const RecordingKey& key, long long frame) {
  return fmt::format("{}_{:012d}.json", key.stem(), frame);
}
std::string clip_file_name(const RecordingKey& key) { return key.stem() + "-clip.json"; }
std::string face_zip_file_name(const RecordingKey& key) { return key.stem() + "-face.zip"; }
std::string pose_zip_file_name(const RecordingKey& key) { return key.stem() + "-pose.zip"; }

fs::path recording_dir(const fs::path& root, const RecordingId& id) {
  return root / fmt::format("p{}", id.patient) / std::to_string(id.collection) /
         std::to_string(id.rating);
}

fs::path pose_dir(const fs::path& root, const RecordingKey& key) {
  return root / "pose" / fmt::format("p{}", key.id.patient) / std::to_string(key.id.collection) /
         std::to_string(key.id.rating) / key.stem();
}

fs::path stage_dir(const fs::path& root, int patient) {
  return root / "stage" / fmt::format("p{}", patient);
}

fs::path labels_path(const fs::path& root) { return root / "labels.csv"; }

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::string as_text(const std::vector<std::uint8_t>& bytes) {
  return std::string(bytes.begin(), bytes.end());
}

std::string base_name(const std::string& entry) {
  const auto slash = entry.find_last_of('/');
  return slash == std::string::npos ? entry : entry.substr(slash + 1);
}

template <typename Pairs>
void sort_by_index(Pairs& items) {
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    const auto pa = parse_file_name(base_name(a.first));
    const auto pb = parse_file_name(base_name(b.first));
    return pa->index < pb->index;
  });
}

}  // namespace

std::vector<RecordingKey> discover_recordings(const fs::path& root) {
  std::set<RecordingKey> keys;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return {};
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const auto parsed = parse_file_name(it->path().filename().string());
    if (!parsed) continue;
    const bool in_tree = it->path().parent_path() == recording_dir(root, parsed->key.id);
    if ((parsed->role == FileRole::VideoInfo && in_tree) || parsed->role == FileRole::FaceZip)
      keys.insert(parsed->key);
  }
  return {keys.begin(), keys.end()};
}

RecordingFiles read_recording_files(const fs::path& root, const RecordingKey& key) {
  RecordingFiles files;
  files.key = key;

  const fs::path tree_info = recording_dir(root, key.id) / video_info_file_name(key);
  const fs::path stage = stage_dir(root, key.id.patient);
  if (fs::exists(tree_info)) {
    files.video_info = read_text_file(tree_info);
    for (const auto& p : sorted_files(recording_dir(root, key.id))) {
      const auto parsed = parse_file_name(p.filename().string());
      if (parsed && parsed->key == key && parsed->role == FileRole::FaceChunk)
        files.face_chunks.emplace_back(p.filename().string(), read_text_file(p));
    }
  } else {
    const fs::path zip_path = stage / face_zip_file_name(key);
    bool found_info = false;
    for (auto& e : zip::read_archive(zip_path)) {
      const auto parsed = parse_file_name(base_name(e.name));
      if (!parsed || parsed->key != key) continue;
      if (parsed->role == FileRole::VideoInfo) {
        files.video_info = as_text(e.data);
        found_info = true;
      } else if (parsed->role == FileRole::FaceChunk) {
        files.face_chunks.emplace_back(e.name, as_text(e.data));
      }
    }
    if (!found_info) throw FormatError("no video information in " + zip_path.string());
  }
  sort_by_index(files.face_chunks);

  const fs::path tree_pose = pose_dir(root, key);
  const fs::path pose_zip = stage / pose_zip_file_name(key);
  if (fs::is_directory(tree_pose)) {
    for (const auto& p : sorted_files(tree_pose)) {
      const auto parsed = parse_file_name(p.filename().string());
      if (parsed && parsed->key == key && parsed->role == FileRole::PoseFrame)
        files.pose_frames.emplace_back(p.filename().string(), read_text_file(p));
    }
  } else if (fs::exists(pose_zip)) {
    for (auto& e : zip::read_archive(pose_zip)) {
      const auto parsed = parse_file_name(base_name(e.name));
      if (parsed && parsed->key == key && parsed->role == FileRole::PoseFrame)
        files.pose_frames.emplace_back(e.name, as_text(e.data));
    }
  }
  sort_by_index(files.pose_frames);

  const fs::path clip = stage / clip_file_name(key);
  if (fs::exists(clip)) files.clip = read_text_file(clip);
  return files;
}

Recording load_recording(const RecordingFiles& files, const LabelTable* labels) {
  const VideoInfo info = parse_video_info(files.video_info);
  if (info.id != files.key.id) throw FormatError("video information does not match its file name", "patient");

  std::vector<FaceChunk> chunks;
  chunks.reserve(files.face_chunks.size());
  for (const auto& [name, text] : files.face_chunks) {
    try {
      chunks.push_back(parse_face_chunk(text));
    } catch (const FormatError& e) {
      throw FormatError(fmt::format("{}: {}", name, e.what()), e.field());
    }
    if (chunks.back().id != info.id) throw FormatError(name + ": chunk belongs to another recording");
  }
  std::vector<std::string> locations;
  for (const auto& c : chunks) {
    if (locations.empty()) locations = c.blend_shape_locations;
    else if (c.blend_shape_locations != locations)
      throw FormatError("blend shape locations differ between chunks", "blendShapeLocations");
  }

  std::vector<PoseFrame> pose;
  pose.reserve(files.pose_frames.size());
  for (const auto& [name, text] : files.pose_frames) {
    try {
      pose.push_back(parse_pose_frame(text));
    } catch (const FormatError& e) {
      throw FormatError(fmt::format("{}: {}", name, e.what()), e.field());
    }
  }

  Recording rec = align_streams(info, merge_face_chunks(std::move(chunks)), pose, std::move(locations));
  if (files.clip) rec = apply_clip(rec, parse_clip_markers(*files.clip));
  if (labels) rec.raw_pain = labels->find(rec.id);
  return rec;
}

Recording load_recording(const fs::path& root, const RecordingKey& key, const LabelTable* labels) {
  return load_recording(read_recording_files(root, key), labels);
}

bool ValidationReport::ok() const { return failures() == 0; }

std::size_t ValidationReport::failures() const {
  return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(),
                                                [](const FileCheck& c) { return !c.ok; }));
}

namespace {

void check_document(FileRole role, std::string_view text) {
  switch (role) {
    case FileRole::VideoInfo: parse_video_info(text); break;
    case FileRole::FaceChunk: parse_face_chunk(text); break;
    case FileRole::PoseFrame: parse_pose_frame(text); break;
    case FileRole::Clip: parse_clip_markers(text); break;
    default: break;
  }
}

std::string describe(const std::exception& e) {
  if (auto* fe = dynamic_cast<const FormatError*>(&e); fe && !fe->field().empty())
    return fmt::format("[field {}] {}", fe->field(), fe->what());
  return e.what();
}

}  // namespace

ValidationReport validate_tree(const fs::path& root) {
  ValidationReport report;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    report.checks.push_back({root.string(), false, "not a directory"});
    return report;
  }
  std::vector<fs::path> paths;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it)
    if (it->is_regular_file()) paths.push_back(it->path());
  std::sort(paths.begin(), paths.end());

  std::map<RecordingKey, bool> recording_ok;
  for (const auto& path : paths) {
    const std::string rel = fs::relative(path, root).generic_string();
    const std::string name = path.filename().string();
    if (name == "labels.csv") {
      ++report.files_seen;
      FileCheck c{rel, true, {}};
      try {
        LabelTable::parse_csv(read_text_file(path));
      } catch (const std::exception& e) {
        c.ok = false;
        c.error = describe(e);
      }
      report.checks.push_back(std::move(c));
      continue;
    }
    const auto parsed = parse_file_name(name);
    if (!parsed) continue;
    ++report.files_seen;
    auto& rec_ok = recording_ok.try_emplace(parsed->key, true).first->second;

    if (parsed->role == FileRole::FaceZip || parsed->role == FileRole::PoseZip) {
      std::vector<zip::Entry> entries;
      try {
        entries = zip::read_archive(path);
      } catch (const std::exception& e) {
        report.checks.push_back({rel, false, describe(e)});
        rec_ok = false;
        continue;
      }
      for (const auto& e : entries) {
        const auto inner = parse_file_name(base_name(e.name));
        if (!inner) continue;
        FileCheck c{rel + "!" + e.name, true, {}};
        try {
          check_document(inner->role, as_text(e.data));
        } catch (const std::exception& ex) {
          c.ok = false;
          c.error = describe(ex);
          rec_ok = false;
        }
        report.checks.push_back(std::move(c));
      }
      continue;
    }
    FileCheck c{rel, true, {}};
    if (parsed->role == FileRole::Encrypted) {
      c.ok = false;
      c.error = "encrypted archives are not supported";
    } else {
      try {
        check_document(parsed->role, read_text_file(path));
      } catch (const std::exception& e) {
        c.ok = false;
        c.error = describe(e);
      }
    }
    if (!c.ok) rec_ok = false;
    report.checks.push_back(std::move(c));
  }

  // Cross-file consistency only for recordings whose files all parsed.
  for (const auto& key : discover_recordings(root)) {
    auto it = recording_ok.find(key);
    if (it != recording_ok.end() && !it->second) continue;
    FileCheck c{"recording " + key.stem(), true, {}};
    try {
      load_recording(root, key);
    } catch (const std::exception& e) {
      c.ok = false;
      c.error = describe(e);
    }
    report.checks.push_back(std::move(c));
  }
  return report;
}

}  // namespace facepain
