#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "hwnas/data.hpp"
#include "hwnas/errors.hpp"

using namespace hwnas;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::size_t count_class(const LabelVolume& v, int c) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), static_cast<std::uint8_t>(c)));
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Synthetic, DeterministicForSeed) {
  const auto a = gen_synthetic(4, {8, 16, 16}, 4, 11);
  const auto b = gen_synthetic(4, {8, 16, 16}, 4, 11);
  const auto c = gen_synthetic(4, {8, 16, 16}, 4, 12);
  ASSERT_EQ(a.size(), 4u);
  bool differs = false;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
    for (std::size_t k = 0; k < a.samples[i].image.numel(); ++k)
      ASSERT_EQ(a.samples[i].image.data()[k], b.samples[i].image.data()[k]);
    differs |= a.samples[i].label != c.samples[i].label;
  }
  EXPECT_TRUE(differs);
}

TEST(Synthetic, NoiselessThresholdRecoversLabel) {
  SyntheticConfig cfg;
  cfg.noise = 0.0;
  const auto d = gen_synthetic(5, {8, 16, 16}, 2, 3, cfg);
  const double mid = 0.5 * (class_intensity(0, 2) + class_intensity(1, 2));
  for (const auto& s : d.samples) {
    ASSERT_EQ(s.image.shape(), (Shape{1, 8, 16, 16}));
    for (std::size_t i = 0; i < s.label.size(); ++i) EXPECT_EQ(s.label[i], s.image.data()[i] > mid ? 1 : 0);
  }
}

TEST(Synthetic, ImageRangeAndLabels) {
  const auto d = gen_synthetic(10, {8, 16, 16}, 4, 5);
  for (const auto& s : d.samples) {
    for (double v : s.image.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    std::set<int> seen(s.label.begin(), s.label.end());
    for (int c : seen) EXPECT_LT(c, 4);
    EXPECT_EQ(seen.size(), 4u);  // every class present
  }
}

TEST(Synthetic, ForegroundFractionWithinBounds) {
  const auto d = gen_synthetic(100, {8, 16, 16}, 2, 7);
  for (const auto& s : d.samples) {
    const double frac = static_cast<double>(count_class(s.label, 1)) / static_cast<double>(s.label.size());
    EXPECT_GE(frac, 0.05);
    EXPECT_LE(frac, 0.40);
  }
}

TEST(Synthetic, InfeasibleGeometryThrows) {
  SyntheticConfig big;
  big.radius_max = 0.6;
  EXPECT_THROW(gen_synthetic(1, {8, 16, 16}, 2, 0, big), ConfigError);
  EXPECT_THROW(gen_synthetic(1, {1, 16, 16}, 2, 0), ConfigError);
  EXPECT_THROW(gen_synthetic(1, {8, 16, 16}, 1, 0), ConfigError);
}

TEST(SplitHalf, SizesAndPartition) {
  const auto d50 = gen_synthetic(50, {2, 4, 4}, 2, 1, {0.2, 0.25, 0.25});
  auto [a, b] = split_half(d50, 3);
  EXPECT_EQ(a.size(), 25u);
  EXPECT_EQ(b.size(), 25u);
  const auto d5 = gen_synthetic(5, {2, 4, 4}, 2, 1, {0.2, 0.25, 0.25});
  auto [c, e] = split_half(d5, 3);
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(e.size(), 2u);
  // Union is the original multiset, intersection empty (samples identified by their image data).
  auto key = [](const VolumeSample& s) { return std::vector<double>(s.image.data().begin(), s.image.data().end()); };
  std::multiset<std::vector<double>> orig, halves;
  for (const auto& s : d5.samples) orig.insert(key(s));
  for (const auto& s : c.samples) halves.insert(key(s));
  for (const auto& s : e.samples) halves.insert(key(s));
  EXPECT_EQ(orig, halves);
  EXPECT_THROW(split_half(subset(d5, std::vector<std::size_t>{0}), 0), DataError);
}

TEST(KFold, BalancedPartition) {
  auto f = kfold(100, 5, 9);
  ASSERT_EQ(f.size(), 5u);
  for (const auto& g : f) EXPECT_EQ(g.size(), 20u);
  auto seven = kfold(7, 5, 9);
  std::vector<std::size_t> sizes;
  for (const auto& g : seven) sizes.push_back(g.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 1, 1, 1}));
  std::vector<std::size_t> all;
  for (const auto& g : seven) all.insert(all.end(), g.begin(), g.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(kfold(7, 5, 9), seven);
  EXPECT_THROW(kfold(3, 5, 0), DataError);
  EXPECT_THROW(kfold(10, 1, 0), DataError);
}

TEST(Batch, StacksSamples) {
  const auto d = gen_synthetic(3, {2, 4, 4}, 2, 1, {0.2, 0.25, 0.25});
  const std::vector<std::size_t> idx = {2, 0};
  auto [x, y] = make_batch(d, idx);
  EXPECT_EQ(x.shape(), (Shape{2, 1, 2, 4, 4}));
  ASSERT_EQ(y.size(), 64u);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_EQ(x.data()[i], d.samples[2].image.data()[i]);
    EXPECT_EQ(y[i], d.samples[2].label[i]);
    EXPECT_EQ(y[32 + i], d.samples[0].label[i]);
  }
}

TEST(Augment, ImageAndLabelStayConsistent) {
  SyntheticConfig cfg;
  cfg.noise = 0.0;
  const auto d = gen_synthetic(20, {8, 16, 16}, 2, 13, cfg);
  const double mid = 0.5 * (class_intensity(0, 2) + class_intensity(1, 2));
  std::mt19937_64 rng(14);
  for (const auto& s : d.samples) {
    const auto t = augment(s, rng);
    ASSERT_EQ(t.image.shape(), s.image.shape());
    // The same transform on both keeps the noiseless threshold exact; padding is background.
    for (std::size_t i = 0; i < t.label.size(); ++i) EXPECT_EQ(t.label[i], t.image.data()[i] > mid ? 1 : 0);
    // A shift of at most 10% per axis can drop at most those slabs.
    const std::size_t before = count_class(s.label, 1), after = count_class(t.label, 1);
    const std::size_t lost_bound = 1 * 16 * 16 + 8 * 2 * 16 + 8 * 16 * 2;
    EXPECT_LE(after, before);
    EXPECT_GE(after + lost_bound, before);
  }
}

TEST(Volume, RoundTripAndSize) {
  TempDir tmp("hwnas_volume_rt");
  const auto d = gen_synthetic(1, {4, 6, 8}, 3, 2);
  const auto& s = d.samples[0];
  const auto path = tmp.path / "a.v3ds";
  save_volume(s, path);
  EXPECT_EQ(fs::file_size(path), kVolumeHeaderBytes + 4 * 192 + 192);
  const auto back = load_volume(path);
  EXPECT_EQ(back.label, s.label);
  EXPECT_EQ(back.num_classes, 3);
  ASSERT_EQ(back.image.shape(), s.image.shape());
  for (std::size_t i = 0; i < 192; ++i)
    EXPECT_EQ(back.image.data()[i], static_cast<double>(static_cast<float>(s.image.data()[i])));
  const auto bytes = read_bytes(path);
  EXPECT_EQ(std::string(bytes.data(), 4), "V3DS");
}

TEST(Volume, CorruptionsReportOffsets) {
  TempDir tmp("hwnas_volume_bad");
  const auto d = gen_synthetic(1, {2, 4, 4}, 2, 2, {0.2, 0.25, 0.25});
  const auto good = tmp.path / "good.v3ds";
  save_volume(d.samples[0], good);
  const auto bytes = read_bytes(good);
  auto expect_offset = [&](std::vector<char> b, std::size_t offset) {
    const auto p = tmp.path / "bad.v3ds";
    write_bytes(p, b);
    try {
      load_volume(p);
      ADD_FAILURE() << "expected FormatError at " << offset;
    } catch (const FormatError& e) {
      EXPECT_EQ(e.offset(), offset) << e.what();
    }
  };
  auto b = bytes;
  b[0] = 'X';
  expect_offset(b, 0);
  b = bytes;
  b[4] = 9;
  expect_offset(b, 4);
  b = bytes;
  b.resize(bytes.size() - 3);
  expect_offset(b, b.size());
  b = bytes;
  b.resize(10);
  expect_offset(b, 10);
  b = bytes;
  b.push_back(0);
  expect_offset(b, bytes.size());
  b = bytes;
  b.back() = 7;  // label beyond K
  expect_offset(b, bytes.size() - 1);
}

TEST(Manifest, DatasetRoundTrip) {
  TempDir tmp("hwnas_manifest_rt");
  const auto d = gen_synthetic(3, {2, 4, 4}, 2, 8, {0.2, 0.25, 0.25});
  save_dataset(d, tmp.path);
  const auto back = load_dataset(tmp.path / "manifest.json");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.num_classes, 2);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.samples[i].label, d.samples[i].label);
  EXPECT_THROW(load_dataset(tmp.path / "missing.json"), DataError);
}
