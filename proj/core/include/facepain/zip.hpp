#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace facepain::zip {

struct Entry {
  std::string name;
  std::vector<std::uint8_t> data;
};

// Minimal PKZIP reader/writer: stored and deflate entries, no zip64, no
// encryption. Enough for the face.zip / pose.zip stage archives.

std::vector<Entry> read_archive(std::span<const std::uint8_t> archive);
std::vector<Entry> read_archive(const std::filesystem::path& path);

std::vector<std::uint8_t> write_archive(const std::vector<Entry>& entries);
void write_archive(const std::filesystem::path& path,
                   const std::vector<Entry>& entries);

}  // namespace facepain::zip
