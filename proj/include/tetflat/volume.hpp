#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tetflat/mesh.hpp"

namespace tetflat {

/// Unsupported or malformed volume file.
class VolumeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned scalar raster. Sample (i, j, k) sits at world position
/// origin + (i, j, k) * spacing; samples are stored x-fastest.
struct ScalarVolume {
  std::array<int, 3> dims{1, 1, 1};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  std::vector<double> samples;
  std::map<std::string, std::string> metadata;

  ScalarVolume() = default;
  ScalarVolume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin, double fill = 0.0);

  std::size_t size() const { return samples.size(); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  double& at(int i, int j, int k) { return samples[index(i, j, k)]; }
  double at(int i, int j, int k) const { return samples[index(i, j, k)]; }
  Vec3 world(int i, int j, int k) const {
    return origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
  }

  /// Trilinear interpolation at a world position; positions outside the
  /// raster clamp to the nearest edge sample.
  double sample_trilinear(const Vec3& p) const;

  /// Throws VolumeError unless dims, spacing and sample count agree.
  void validate() const;
};

enum class VolumeFormat { Nrrd, RawJson };

/// NRRD subset: dimension 3, float/double, raw encoding, little endian,
/// diagonal spacing. Anything else is rejected with the offending field named.
/// RawJson: `<name>.json` header {dims, spacing, origin, dtype} next to
/// `<name>.raw`; the path may name either file.
ScalarVolume load_volume(const std::filesystem::path& path, VolumeFormat format);
ScalarVolume load_volume(const std::filesystem::path& path);  // from extension

/// Samples are written as double; metadata entries become `key:=value`
/// NRRD lines (or a "metadata" object in the JSON header).
void write_volume(const ScalarVolume& vol, const std::filesystem::path& path, VolumeFormat format);
void write_volume(const ScalarVolume& vol, const std::filesystem::path& path);

}  // namespace tetflat
