#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hwnas/ops.hpp"
#include "hwnas/tensor.hpp"

namespace hwnas {

struct VolumeSample {
  Tensor image;       // [1, D, H, W], values in [0, 1]
  LabelVolume label;  // D*H*W class ids in [0, num_classes)
  int num_classes = 2;

  std::array<std::size_t, 3> spatial() const { return {image.extent(1), image.extent(2), image.extent(3)}; }
};

struct Dataset {
  std::vector<VolumeSample> samples;
  int num_classes = 2;
  std::string provenance;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

struct SyntheticConfig {
  double noise = 0.2;         // std-dev of additive Gaussian noise before clamping
  double radius_min = 0.25;   // ellipsoid semi-axes as fractions of each extent
  double radius_max = 0.40;
};

// Class intensity used by the generator (background is class 0).
double class_intensity(int class_id, int num_classes);

// K-1 random ellipsoids over a noisy background. For K >= 3 class 1 is a
// free-standing ellipsoid and classes 2.. are nested concentric shells. The
// label is the exact generating mask; each sample is derived from (seed, i).
Dataset gen_synthetic(std::size_t count, std::array<std::size_t, 3> shape, int num_classes, std::uint64_t seed,
                      const SyntheticConfig& config = {});

// Seeded shuffle, then halves; odd sizes give the extra sample to the first.
std::pair<Dataset, Dataset> split_half(const Dataset& data, std::uint64_t seed);

// Balanced partition of sample indices into `folds` groups (sizes differ by
// at most one, larger folds first).
std::vector<std::vector<std::size_t>> kfold(std::size_t count, int folds, std::uint64_t seed);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

// [N,1,D,H,W] image batch plus concatenated labels.
std::pair<Tensor, LabelVolume> make_batch(const Dataset& data, std::span<const std::size_t> indices);

// Random flips along H and W plus a crop-and-pad shift of up to 10% per axis,
// applied identically to image and label.
VolumeSample augment(const VolumeSample& sample, std::mt19937_64& rng);

// V3DS: "V3DS", u16 version, u32 D,H,W,K, f32 image raster, u8 label raster,
// all little-endian.
inline constexpr std::uint16_t kVolumeFormatVersion = 1;
inline constexpr std::size_t kVolumeHeaderBytes = 4 + 2 + 4 * 4;

void save_volume(const VolumeSample& sample, const std::filesystem::path& path);
VolumeSample load_volume(const std::filesystem::path& path);

// Manifest: {"num_classes": K, "volumes": [paths relative to the manifest]}.
void save_dataset(const Dataset& data, const std::filesystem::path& dir, const std::string& manifest_name = "manifest.json");
Dataset load_dataset(const std::filesystem::path& manifest);

}  // namespace hwnas
