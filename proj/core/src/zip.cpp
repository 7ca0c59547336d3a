#include "facepain/zip.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

#include "facepain/error.hpp"

namespace facepain::zip {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kStored = 0;
constexpr std::uint16_t kDeflate = 8;
// 1980-01-01 00:00, so archives are byte-identical across runs.
constexpr std::uint16_t kDosDate = 0x0021;
constexpr std::uint16_t kDosTime = 0;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 2 > b.size()) throw FormatError("truncated zip archive");
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 4 > b.size()) throw FormatError("truncated zip archive");
  return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) |
         (std::uint32_t{b[at + 2]} << 16) | (std::uint32_t{b[at + 3]} << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("zlib inflateInit failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) throw FormatError("corrupt deflate stream");
  return out;
}

std::vector<std::uint8_t> deflate_raw(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("zlib deflateInit failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("zlib deflate failed");
  return out;
}

std::uint32_t crc_of(std::span<const std::uint8_t> data) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), data.data(), static_cast<uInt>(data.size())));
}

}  // namespace

std::vector<Entry> read_archive(std::span<const std::uint8_t> archive) {
  if (archive.size() < 22) throw FormatError("not a zip archive");
  // End-of-central-directory record sits in the last 22 + 65535 bytes.
  std::size_t eocd = archive.size() - 22;
  const std::size_t floor = archive.size() > 22 + 65535 ? archive.size() - 22 - 65535 : 0;
  while (read_u32(archive, eocd) != kEndSig) {
    if (eocd == floor) throw FormatError("zip end-of-central-directory not found");
    --eocd;
  }
  const std::uint16_t count = read_u16(archive, eocd + 10);
  std::size_t pos = read_u32(archive, eocd + 16);

  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    if (read_u32(archive, pos) != kCentralSig) throw FormatError("bad zip central directory");
    const std::uint16_t method = read_u16(archive, pos + 10);
    const std::uint32_t crc = read_u32(archive, pos + 16);
    const std::uint32_t comp_size = read_u32(archive, pos + 20);
    const std::uint32_t size = read_u32(archive, pos + 24);
    const std::uint16_t name_len = read_u16(archive, pos + 28);
    const std::uint16_t extra_len = read_u16(archive, pos + 30);
    const std::uint16_t comment_len = read_u16(archive, pos + 32);
    const std::uint32_t local = read_u32(archive, pos + 42);
    if (pos + 46 + name_len > archive.size()) throw FormatError("truncated zip archive");
    std::string name(reinterpret_cast<const char*>(archive.data() + pos + 46), name_len);
    pos += 46 + name_len + extra_len + comment_len;

    if (read_u32(archive, local) != kLocalSig) throw FormatError("bad zip local header", name);
    const std::size_t data_at =
        local + 30 + read_u16(archive, local + 26) + read_u16(archive, local + 28);
    if (data_at + comp_size > archive.size()) throw FormatError("truncated zip entry", name);
    const auto payload = archive.subspan(data_at, comp_size);

    Entry e{std::move(name), {}};
    if (method == kStored) {
      e.data.assign(payload.begin(), payload.end());
    } else if (method == kDeflate) {
      e.data = inflate_raw(payload, size);
    } else {
      throw FormatError("unsupported zip compression method", e.name);
    }
    if (crc_of(e.data) != crc) throw FormatError("zip CRC mismatch", e.name);
    if (!e.name.empty() && e.name.back() == '/') continue;  // directory entry
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<Entry> read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open zip archive " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return read_archive(std::span<const std::uint8_t>(bytes));
}

std::vector<std::uint8_t> write_archive(const std::vector<Entry>& entries) {
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> central;
  for (const auto& e : entries) {
    const auto compressed = deflate_raw(e.data);
    const bool store = compressed.size() >= e.data.size();
    const std::uint16_t method = store ? kStored : kDeflate;
    const auto& payload = store ? e.data : compressed;
    const std::uint32_t crc = crc_of(e.data);
    const auto offset = static_cast<std::uint32_t>(out.size());
    const auto name_len = static_cast<std::uint16_t>(e.name.size());

    put_u32(out, kLocalSig);
    put_u16(out, 20);
    put_u16(out, 0);
    put_u16(out, method);
    put_u16(out, kDosTime);
    put_u16(out, kDosDate);
    put_u32(out, crc);
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    put_u32(out, static_cast<std::uint32_t>(e.data.size()));
    put_u16(out, name_len);
    put_u16(out, 0);
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.insert(out.end(), payload.begin(), payload.end());

    put_u32(central, kCentralSig);
    put_u16(central, 20);
    put_u16(central, 20);
    put_u16(central, 0);
    put_u16(central, method);
    put_u16(central, kDosTime);
    put_u16(central, kDosDate);
    put_u32(central, crc);
    put_u32(central, static_cast<std::uint32_t>(payload.size()));
    put_u32(central, static_cast<std::uint32_t>(e.data.size()));
    put_u16(central, name_len);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u16(central, 0);
    put_u32(central, 0);
    put_u32(central, offset);
    central.insert(central.end(), e.name.begin(), e.name.end());
  }
  const auto central_at = static_cast<std::uint32_t>(out.size());
  out.insert(out.end(), central.begin(), central.end());
  put_u32(out, kEndSig);
  put_u16(out, 0);
  put_u16(out, 0);
  put_u16(out, static_cast<std::uint16_t>(entries.size()));
  put_u16(out, static_cast<std::uint16_t>(entries.size()));
  put_u32(out, static_cast<std::uint32_t>(central.size()));
  put_u32(out, central_at);
  put_u16(out, 0);
  return out;
}

void write_archive(const std::filesystem::path& path, const std::vector<Entry>& entries) {
  const auto bytes = write_archive(entries);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace facepain::zip
