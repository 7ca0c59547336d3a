#include "facepain/feature_cache.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace facepain {
namespace {

constexpr char kMagic[4] = {'F', 'P', 'F', '1'};
constexpr std::size_t kHeaderSize = 4 + 4 + 8 + 8;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> b, std::size_t at) {
  T v;
  std::memcpy(&v, b.data() + at, sizeof(T));
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& m) {
  if (m.values.size() != m.rows * m.dim) throw InvalidArgument("feature matrix shape mismatch");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + m.values.size() * sizeof(float));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.kind));
  put<std::uint64_t>(out, m.rows);
  put<std::uint64_t>(out, m.dim);
  for (float v : m.values) put<float>(out, v);
  return out;
}

FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a feature matrix file", "magic");
  FeatureMatrix m;
  const auto tag = get<std::uint32_t>(bytes, 4);
  if (tag > static_cast<std::uint32_t>(FeatureKind::BlendShapes))
    throw FormatError(fmt::format("unknown kind tag {}", tag), "kind");
  m.kind = static_cast<FeatureKind>(tag);
  m.rows = get<std::uint64_t>(bytes, 8);
  m.dim = get<std::uint64_t>(bytes, 16);
  if (m.dim != 0 && m.rows > (bytes.size() - kHeaderSize) / (m.dim * sizeof(float)))
    throw FormatError("payload shorter than header claims", "rows");
  if (bytes.size() != kHeaderSize + m.rows * m.dim * sizeof(float))
    throw FormatError("payload length does not match rows x dim", "rows");
  m.values.resize(m.rows * m.dim);
  if (!m.values.empty())
    std::memcpy(m.values.data(), bytes.data() + kHeaderSize, m.values.size() * sizeof(float));
  return m;
}

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m) {
  const auto bytes = encode_feature_matrix(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_feature_matrix(bytes);
}

FeatureMatrix to_feature_matrix(const SequenceSample& s) {
  return {s.kind, s.size(), s.dim(), s.data};
}

}  // namespace facepain
