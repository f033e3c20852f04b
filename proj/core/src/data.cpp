#include "hwnas/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hwnas/errors.hpp"

namespace hwnas {

namespace {

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> radii;

  bool contains(std::size_t d, std::size_t h, std::size_t w) const {
    const double p[3] = {static_cast<double>(d) + 0.5, static_cast<double>(h) + 0.5, static_cast<double>(w) + 0.5};
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double z = (p[i] - center[i]) / radii[i];
      acc += z * z;
    }
    return acc <= 1.0;
  }
};

Ellipsoid random_ellipsoid(const std::array<std::size_t, 3>& shape, const SyntheticConfig& cfg, std::mt19937_64& rng) {
  Ellipsoid e{};
  std::uniform_real_distribution<double> frac(cfg.radius_min, cfg.radius_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 3; ++i) {
    const double extent = static_cast<double>(shape[static_cast<std::size_t>(i)]);
    e.radii[i] = frac(rng) * extent;
    e.center[i] = e.radii[i] + unit(rng) * (extent - 2.0 * e.radii[i]);
  }
  return e;
}

void put_u16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

double class_intensity(int class_id, int num_classes) {
  return 0.1 + 0.8 * static_cast<double>(class_id) / static_cast<double>(num_classes - 1);
}

Dataset gen_synthetic(std::size_t count, std::array<std::size_t, 3> shape, int num_classes, std::uint64_t seed,
                      const SyntheticConfig& config) {
  if (num_classes < 2 || num_classes > 255) throw ConfigError("gen_synthetic: num_classes must be in [2, 255]");
  if (!(config.radius_min > 0.0) || config.radius_min > config.radius_max)
    throw ConfigError("gen_synthetic: need 0 < radius_min <= radius_max");
  if (config.radius_max > 0.5) throw ConfigError("gen_synthetic: ellipsoid radii exceed the volume (radius_max > 0.5)");
  for (auto e : shape)
    if (e == 0 || config.radius_min * static_cast<double>(e) < 0.5)
      throw ConfigError("gen_synthetic: ellipsoids smaller than one voxel for extent " + std::to_string(e));
  if (config.noise < 0.0) throw ConfigError("gen_synthetic: noise must be non-negative");

  Dataset data;
  data.num_classes = num_classes;
  data.provenance = "synthetic(seed=" + std::to_string(seed) + ",count=" + std::to_string(count) + ")";
  const std::size_t voxels = shape[0] * shape[1] * shape[2];
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = derived_rng(seed, i);
    LabelVolume label(voxels, 0);
    auto paint = [&](const Ellipsoid& e, std::uint8_t cls) {
      for (std::size_t d = 0; d < shape[0]; ++d)
        for (std::size_t h = 0; h < shape[1]; ++h)
          for (std::size_t w = 0; w < shape[2]; ++w)
            if (e.contains(d, h, w)) label[(d * shape[1] + h) * shape[2] + w] = cls;
    };
    if (num_classes == 2) {
      paint(random_ellipsoid(shape, config, rng), 1);
    } else {
      paint(random_ellipsoid(shape, config, rng), 1);
      Ellipsoid shell = random_ellipsoid(shape, config, rng);
      for (int c = 2; c < num_classes; ++c) {
        paint(shell, static_cast<std::uint8_t>(c));
        for (auto& r : shell.radii) r *= 0.6;
      }
    }
    std::normal_distribution<double> noise(0.0, config.noise);
    std::vector<double> image(voxels);
    for (std::size_t v = 0; v < voxels; ++v) {
      double value = class_intensity(label[v], num_classes);
      if (config.noise > 0.0) value += noise(rng);
      image[v] = std::clamp(value, 0.0, 1.0);
    }
    data.samples.push_back({Tensor({1, shape[0], shape[1], shape[2]}, std::move(image)), std::move(label), num_classes});
  }
  return data;
}

std::pair<Dataset, Dataset> split_half(const Dataset& data, std::uint64_t seed) {
  if (data.size() < 2) throw DataError("split_half: need at least 2 samples, got " + std::to_string(data.size()));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t first = (data.size() + 1) / 2;
  std::span<const std::size_t> all(order);
  return {subset(data, all.first(first)), subset(data, all.subspan(first))};
}

std::vector<std::vector<std::size_t>> kfold(std::size_t count, int folds, std::uint64_t seed) {
  if (folds < 2) throw DataError("kfold: need at least 2 folds");
  if (count < static_cast<std::size_t>(folds))
    throw DataError("kfold: " + std::to_string(count) + " samples cannot fill " + std::to_string(folds) + " folds");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto k = static_cast<std::size_t>(folds);
  std::vector<std::vector<std::size_t>> out(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = count / k + (f < count % k ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return out;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.provenance = data.provenance;
  for (auto i : indices) out.samples.push_back(data.samples.at(i));
  return out;
}

std::pair<Tensor, LabelVolume> make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("make_batch: empty batch");
  const auto sp = data.samples.at(indices[0]).spatial();
  const std::size_t voxels = sp[0] * sp[1] * sp[2];
  std::vector<double> image;
  image.reserve(indices.size() * voxels);
  LabelVolume labels;
  labels.reserve(indices.size() * voxels);
  for (auto i : indices) {
    const auto& s = data.samples.at(i);
    if (s.spatial() != sp) throw DataError("make_batch: heterogeneous volume shapes");
    image.insert(image.end(), s.image.data().begin(), s.image.data().end());
    labels.insert(labels.end(), s.label.begin(), s.label.end());
  }
  return {Tensor({indices.size(), 1, sp[0], sp[1], sp[2]}, std::move(image)), std::move(labels)};
}

VolumeSample augment(const VolumeSample& sample, std::mt19937_64& rng) {
  const auto sp = sample.spatial();
  std::bernoulli_distribution coin(0.5);
  const bool flip_h = coin(rng), flip_w = coin(rng);
  std::array<long, 3> shift{};
  for (std::size_t a = 0; a < 3; ++a) {
    const long limit = static_cast<long>(static_cast<double>(sp[a]) * 0.1);
    std::uniform_int_distribution<long> dist(-limit, limit);
    shift[a] = dist(rng);
  }
  const std::size_t voxels = sp[0] * sp[1] * sp[2];
  std::vector<double> image(voxels, 0.0);
  LabelVolume label(voxels, 0);
  auto src_image = sample.image.data();
  for (std::size_t d = 0; d < sp[0]; ++d)
    for (std::size_t h = 0; h < sp[1]; ++h)
      for (std::size_t w = 0; w < sp[2]; ++w) {
        // Output voxel reads the flipped source shifted by `shift`; outside reads pad.
        const long sd = static_cast<long>(d) + shift[0];
        long sh = static_cast<long>(h) + shift[1];
        long sw = static_cast<long>(w) + shift[2];
        if (sd < 0 || sh < 0 || sw < 0 || sd >= static_cast<long>(sp[0]) || sh >= static_cast<long>(sp[1]) ||
            sw >= static_cast<long>(sp[2]))
          continue;
        if (flip_h) sh = static_cast<long>(sp[1]) - 1 - sh;
        if (flip_w) sw = static_cast<long>(sp[2]) - 1 - sw;
        const std::size_t src = (static_cast<std::size_t>(sd) * sp[1] + static_cast<std::size_t>(sh)) * sp[2] +
                                static_cast<std::size_t>(sw);
        const std::size_t dst = (d * sp[1] + h) * sp[2] + w;
        image[dst] = src_image[src];
        label[dst] = sample.label[src];
      }
  return {Tensor(sample.image.shape(), std::move(image)), std::move(label), sample.num_classes};
}

// ---------------------------------------------------------------------------
// V3DS

void save_volume(const VolumeSample& sample, const std::filesystem::path& path) {
  const auto sp = sample.spatial();
  const std::size_t voxels = sp[0] * sp[1] * sp[2];
  std::vector<char> bytes;
  bytes.reserve(kVolumeHeaderBytes + 5 * voxels);
  bytes.insert(bytes.end(), {'V', '3', 'D', 'S'});
  put_u16(bytes, kVolumeFormatVersion);
  for (auto e : sp) put_u32(bytes, static_cast<std::uint32_t>(e));
  put_u32(bytes, static_cast<std::uint32_t>(sample.num_classes));
  for (double v : sample.image.data()) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  for (auto l : sample.label) bytes.push_back(static_cast<char>(l));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write volume " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

VolumeSample load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open volume " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) throw FormatError("truncated V3DS header in " + path.string(), bytes.size());
  if (std::memcmp(bytes.data(), "V3DS", 4) != 0) throw FormatError("bad V3DS magic in " + path.string(), 0);
  if (bytes.size() < kVolumeHeaderBytes) throw FormatError("truncated V3DS header in " + path.string(), bytes.size());
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kVolumeFormatVersion)
    throw FormatError("unsupported V3DS version " + std::to_string(version) + " in " + path.string(), 4);
  const std::size_t d = get_u32(&bytes[6]), h = get_u32(&bytes[10]), w = get_u32(&bytes[14]);
  const std::uint32_t k = get_u32(&bytes[18]);
  if (k < 2 || k > 255) throw FormatError("invalid class count " + std::to_string(k) + " in " + path.string(), 18);
  const std::size_t voxels = d * h * w;
  const std::size_t expected = kVolumeHeaderBytes + 5 * voxels;
  if (bytes.size() < expected) throw FormatError("truncated V3DS payload in " + path.string(), bytes.size());
  if (bytes.size() > expected) throw FormatError("trailing bytes in " + path.string(), expected);

  std::vector<double> image(voxels);
  for (std::size_t i = 0; i < voxels; ++i)
    image[i] = static_cast<double>(std::bit_cast<float>(get_u32(&bytes[kVolumeHeaderBytes + 4 * i])));
  LabelVolume label(voxels);
  const std::size_t label_base = kVolumeHeaderBytes + 4 * voxels;
  for (std::size_t i = 0; i < voxels; ++i) {
    label[i] = bytes[label_base + i];
    if (label[i] >= k)
      throw FormatError("label " + std::to_string(label[i]) + " out of range in " + path.string(), label_base + i);
  }
  return {Tensor({1, d, h, w}, std::move(image)), std::move(label), static_cast<int>(k)};
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir, const std::string& manifest_name) {
  std::filesystem::create_directories(dir);
  nlohmann::json volumes = nlohmann::json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "vol_%04zu.v3ds", i);
    save_volume(data.samples[i], dir / name);
    volumes.push_back(name);
  }
  nlohmann::json manifest{{"num_classes", data.num_classes}, {"volumes", volumes}, {"provenance", data.provenance}};
  std::ofstream out(dir / manifest_name);
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open dataset manifest " + manifest.string());
  Dataset data;
  try {
    const auto doc = nlohmann::json::parse(in);
    data.num_classes = doc.at("num_classes").get<int>();
    data.provenance = doc.value("provenance", manifest.string());
    for (const auto& entry : doc.at("volumes")) {
      std::filesystem::path p = entry.get<std::string>();
      if (p.is_relative()) p = manifest.parent_path() / p;
      VolumeSample s = load_volume(p);
      if (s.num_classes != data.num_classes)
        throw DataError("volume " + p.string() + " declares " + std::to_string(s.num_classes) + " classes, manifest " +
                        std::to_string(data.num_classes));
      data.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("malformed manifest " + manifest.string() + ": " + ex.what());
  }
  return data;
}

}  // namespace hwnas
