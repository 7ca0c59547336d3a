#pragma once

// Randomized inputs shared by unit and acceptance tests.

#include <cstdint>
#include <string>
#include <vector>

#include "facepain/codec.hpp"
#include "facepain/features.hpp"
#include "facepain/rng.hpp"

namespace fixtures {

inline facepain::Mat4f random_mat4(facepain::Rng& rng) {
  facepain::Mat4f m{};
  for (auto& row : m)
    for (auto& v : row) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  return m;
}

inline std::vector<std::string> blend_shape_names() {
  return {facepain::kArkitBlendShapeNames.begin(), facepain::kArkitBlendShapeNames.end()};
}

inline facepain::FaceFrame random_face_frame(facepain::Rng& rng, double timestamp, bool with_topology) {
  using namespace facepain;
  FaceFrame f;
  f.timestamp = timestamp;
  f.transform = random_mat4(rng);
  if (rng.uniform() < 0.5) f.camera_transform = random_mat4(rng);
  if (rng.uniform() < 0.5) {
    f.left_eye_transform = random_mat4(rng);
    f.right_eye_transform = random_mat4(rng);
    f.look_at_point = Vec3f{static_cast<float>(rng.normal()), static_cast<float>(rng.normal()),
                            static_cast<float>(rng.normal())};
  }
  f.blend_shapes.resize(kBlendShapeCount);
  for (auto& b : f.blend_shapes) b = static_cast<float>(rng.uniform());
  f.vertices = {kFaceVertexCount, 3, std::vector<float>(kFaceVertexCount * 3)};
  for (auto& v : f.vertices.values) v = static_cast<float>(rng.normal() * 0.1);
  if (with_topology) {
    f.texture_coordinates = {kFaceVertexCount, 2, std::vector<float>(kFaceVertexCount * 2)};
    for (auto& v : f.texture_coordinates.values) v = static_cast<float>(rng.uniform());
    const std::size_t triangles = 1 + rng.below(40);
    f.triangle_indices = {triangles, 3, std::vector<std::int16_t>(triangles * 3)};
    for (auto& v : f.triangle_indices.values) v = static_cast<std::int16_t>(rng.below(kFaceVertexCount));
  }
  return f;
}

inline facepain::FaceChunk random_face_chunk(facepain::Rng& rng, std::size_t frames, double t0 = 1000.0) {
  using namespace facepain;
  FaceChunk c;
  c.id = {static_cast<int>(1 + rng.below(40)), static_cast<int>(1 + rng.below(3)), static_cast<int>(1 + rng.below(5))};
  c.start = UtcTime::parse("2019-08-04T03:04:13.906Z");
  c.blend_shape_locations = blend_shape_names();
  double t = t0;
  for (std::size_t i = 0; i < frames; ++i) {
    t += rng.uniform(0.02, 0.05);
    c.data.push_back(random_face_frame(rng, t, i == 0));
  }
  return c;
}

/// 70 (x, y, confidence) triples with a few undetected points.
inline std::vector<double> random_face_2d(facepain::Rng& rng) {
  std::vector<double> p(facepain::kFacePointCount * 3);
  const double cx = rng.uniform(100.0, 900.0);
  const double cy = rng.uniform(100.0, 900.0);
  const double size = rng.uniform(20.0, 300.0);
  for (std::size_t i = 0; i < facepain::kFacePointCount; ++i) {
    p[3 * i] = cx + size * rng.uniform(-1.0, 1.0);
    p[3 * i + 1] = cy + size * rng.uniform(-1.2, 1.2);
    p[3 * i + 2] = rng.uniform() < 0.05 ? 0.0 : rng.uniform(0.2, 1.0);
  }
  return p;
}

}  // namespace fixtures
