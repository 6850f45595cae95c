#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>
#include <tiffio.h>

#include "firelabel/image_io.hpp"
#include "firelabel/radiometric.hpp"
#include "firelabel/synth.hpp"
#include "oracles/brute_force.hpp"
#include "test_support.hpp"

using namespace firelabel;
using firelabel::testing::TempDir;

namespace {

// Writes a TIFF with arbitrary sample layout via libtiff directly.
template <typename T>
void write_raw_tiff(const std::filesystem::path& p, std::uint32_t w, std::uint32_t h, std::uint16_t spp,
                    std::uint16_t format, const std::vector<T>& samples) {
  TIFF* t = TIFFOpen(p.c_str(), "w");
  ASSERT_NE(t, nullptr);
  TIFFSetField(t, TIFFTAG_IMAGEWIDTH, w);
  TIFFSetField(t, TIFFTAG_IMAGELENGTH, h);
  TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, spp);
  TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, static_cast<std::uint16_t>(sizeof(T) * 8));
  TIFFSetField(t, TIFFTAG_SAMPLEFORMAT, format);
  TIFFSetField(t, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(t, TIFFTAG_PHOTOMETRIC, spp == 1 ? PHOTOMETRIC_MINISBLACK : PHOTOMETRIC_RGB);
  TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, h);
  for (std::uint32_t y = 0; y < h; ++y)
    TIFFWriteScanline(t, const_cast<T*>(samples.data() + y * w * spp), y, 0);
  TIFFClose(t);
}

TemperatureGrid grid_of(std::vector<double> v, std::size_t w, std::size_t h) { return {w, h, std::move(v)}; }

}  // namespace

TEST(LoadTiff, FloatSamplesDecodeVerbatim) {
  TempDir dir;
  write_raw_tiff<float>(dir / "a.tif", 2, 2, 1, SAMPLEFORMAT_IEEEFP, {-5.0f, 20.0f, 237.4f, 650.0f});
  const auto g = load_tiff(dir / "a.tif");
  ASSERT_EQ(g.width(), 2u);
  ASSERT_EQ(g.height(), 2u);
  EXPECT_EQ(g[0], -5.0);
  EXPECT_EQ(g[1], 20.0);
  EXPECT_EQ(g[2], static_cast<double>(237.4f));
  EXPECT_EQ(g[3], 650.0);
}

TEST(LoadTiff, DoubleSamplesDecodeVerbatim) {
  TempDir dir;
  write_raw_tiff<double>(dir / "a.tif", 2, 2, 1, SAMPLEFORMAT_IEEEFP, {-5.0, 20.0, 237.4, 650.0});
  const auto g = load_tiff(dir / "a.tif");
  EXPECT_EQ(std::vector<double>(g.begin(), g.end()), (std::vector<double>{-5.0, 20.0, 237.4, 650.0}));
}

TEST(LoadTiff, EmptyFileIsCorrupt) {
  TempDir dir;
  std::ofstream(dir / "empty.tif").close();
  try {
    load_tiff(dir / "empty.tif");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported/corrupt TIFF"), std::string::npos) << e.what();
  }
}

TEST(LoadTiff, MissingFileIsIoError) {
  EXPECT_THROW(load_tiff("/nonexistent/dir/none.tif"), IoError);
}

TEST(LoadTiff, MultiBandRejected) {
  TempDir dir;
  write_raw_tiff<std::uint8_t>(dir / "rgb.tif", 2, 1, 3, SAMPLEFORMAT_UINT, {1, 2, 3, 4, 5, 6});
  EXPECT_THROW(load_tiff(dir / "rgb.tif", IntegerScale{1.0, 0.0}), ValidationError);
}

TEST(LoadTiff, IntegerNeedsDeclaredScale) {
  TempDir dir;
  write_raw_tiff<std::uint16_t>(dir / "i.tif", 2, 1, 1, SAMPLEFORMAT_UINT, {100, 2500});
  EXPECT_THROW(load_tiff(dir / "i.tif"), ValidationError);
  const auto g = load_tiff(dir / "i.tif", IntegerScale{0.1, -10.0});
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], 240.0);
}

TEST(LoadTiff, NonFiniteReportsPixelIndex) {
  TempDir dir;
  write_raw_tiff<float>(dir / "nan.tif", 3, 1, 1, SAMPLEFORMAT_IEEEFP,
                        {1.0f, 2.0f, std::numeric_limits<float>::quiet_NaN()});
  try {
    load_tiff(dir / "nan.tif");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos) << e.what();
  }
}

TEST(LoadTiff, SynthRoundTripIsBitExact) {
  TempDir dir;
  SceneSpec spec;
  spec.width = spec.height = 64;
  spec.noise_sigma = 3.0;
  spec.seed = 17;
  spec.blobs.push_back({32, 32, 8, 430, BlobShape::gaussian});
  const auto scene = gen_scene(spec);
  const auto paths = write_scene(scene, dir.path(), "s");
  EXPECT_EQ(load_tiff(paths.tiff), scene.temperature);
}

TEST(Calibrate, ClipsSkyAndSaturation) {
  const auto out = calibrate(grid_of({-5.0, 20.0, 237.4, 650.0}, 2, 2), {});
  EXPECT_EQ(std::vector<double>(out.begin(), out.end()), (std::vector<double>{0.0, 20.0, 237.4, 500.0}));
}

TEST(Calibrate, InRangeIsUntouched) {
  std::mt19937_64 rng(1);
  const auto g = firelabel::testing::random_grid(16, 16, rng, 0.0, 500.0);
  EXPECT_EQ(calibrate(g, {}), g);
}

TEST(Calibrate, IdempotentAndMonotone) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    auto a = firelabel::testing::random_grid(12, 9, rng, -100.0, 700.0);
    auto b = a;
    std::uniform_real_distribution<double> bump(0.0, 80.0);
    for (auto& v : b) v += bump(rng);
    const auto ca = calibrate(a, {}), cb = calibrate(b, {});
    EXPECT_EQ(calibrate(ca, {}), ca);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_LE(ca[i], cb[i]);
      EXPECT_GE(ca[i], 0.0);
      EXPECT_LE(ca[i], 500.0);
    }
  }
}

TEST(CalibrationPolicy, RejectsBadOrdering) {
  EXPECT_THROW((CalibrationPolicy{0, 500, 0}.validate()), ValidationError);
  EXPECT_THROW((CalibrationPolicy{0, 400, 450}.validate()), ValidationError);
  EXPECT_NO_THROW((CalibrationPolicy{0, 500, 500}.validate()));
}

TEST(Saturation, CoolGrid) {
  const auto s = saturation_report(TemperatureGrid(4, 4, 20.0), {});
  EXPECT_EQ(s.pixels_above_caution, 0u);
  EXPECT_EQ(s.pixels_at_or_above_clip_max, 0u);
  EXPECT_EQ(s.fraction_caution, 0.0);
}

TEST(Saturation, DirectCount) {
  const auto s = saturation_report(grid_of({440, 460, 500, 510}, 4, 1), {});
  EXPECT_EQ(s.pixels_above_caution, 3u);
  EXPECT_EQ(s.pixels_at_or_above_clip_max, 2u);
  EXPECT_DOUBLE_EQ(s.fraction_caution, 0.75);
}

TEST(Saturation, MatchesLoopOnRandomGrid) {
  std::mt19937_64 rng(3);
  const auto g = firelabel::testing::random_grid(128, 128, rng, 300.0, 600.0);
  std::size_t above = 0, sat = 0;
  for (double v : g) {
    above += v > 450.0;
    sat += v >= 500.0;
  }
  const auto s = saturation_report(g, {});
  EXPECT_EQ(s.pixels_above_caution, above);
  EXPECT_EQ(s.pixels_at_or_above_clip_max, sat);
  EXPECT_DOUBLE_EQ(s.fraction_caution, double(above) / double(g.size()));
}

TEST(GridStats, ConstantGrid) {
  const auto s = grid_stats(TemperatureGrid(5, 5, 100.0), {});
  EXPECT_EQ(s.min, 100.0);
  EXPECT_EQ(s.max, 100.0);
  EXPECT_EQ(s.mean, 100.0);
  EXPECT_EQ(std::count_if(s.histogram.begin(), s.histogram.end(), [](auto c) { return c != 0; }), 1);
  EXPECT_EQ(s.histogram[51], 25u);  // 100 / (500/256) = 51.2
}

TEST(GridStats, RangeEndsHitOuterBins) {
  const auto s = grid_stats(grid_of({0.0, 500.0}, 2, 1), {});
  EXPECT_EQ(s.histogram.front(), 1u);
  EXPECT_EQ(s.histogram.back(), 1u);
}

TEST(GridStats, HistogramMatchesBruteForce) {
  std::mt19937_64 rng(4);
  const auto g = firelabel::testing::random_grid(40, 30, rng, 0.0, 500.0);
  std::array<std::size_t, 256> expect{};
  for (double v : g) ++expect[oracle::bin_of(v, 0.0, 500.0)];
  const auto s = grid_stats(g, {});
  EXPECT_EQ(s.histogram, expect);
  std::size_t total = 0;
  for (auto c : s.histogram) total += c;
  EXPECT_EQ(total, g.size());
}
