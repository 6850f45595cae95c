#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "firelabel/cv_kernels.hpp"
#include "oracles/brute_force.hpp"
#include "test_support.hpp"

using namespace firelabel;
namespace ft = firelabel::testing;

namespace {

TemperatureGrid vertical_step(std::size_t w, std::size_t h, std::size_t col, double lo, double hi) {
  TemperatureGrid g(w, h, lo);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = col; x < w; ++x) g(x, y) = hi;
  return g;
}

}  // namespace

// ---- Otsu ----

TEST(Otsu, SplitsBimodalPopulations) {
  std::vector<double> v(200);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i % 2 ? 400.0 : 20.0;
  const auto r = otsu_threshold(v, 0.0, 500.0);
  EXPECT_GT(r.tau, 20.0);
  EXPECT_LE(r.tau, 400.0);
  TemperatureGrid g(20, 10, v);
  const auto m = binarize(g, r.tau);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(m[i], v[i] == 400.0);
}

TEST(Otsu, ConstantInputIsDegenerate) {
  std::vector<double> v(64, 20.0);
  try {
    otsu_threshold(v, 0.0, 500.0);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate histogram"), std::string::npos);
  }
}

TEST(Otsu, Preconditions) {
  EXPECT_THROW(otsu_threshold(std::vector<double>{1.0}, 0.0, 500.0), ValidationError);
  EXPECT_THROW(otsu_threshold(std::vector<double>{1.0, 2.0}, 5.0, 5.0), ValidationError);
}

TEST(Otsu, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    const auto g = ft::random_grid(32, 32, rng, 0.0, 500.0);
    const std::vector<double> values(g.begin(), g.end());
    const auto r = otsu_threshold(g, CalibrationPolicy{});
    const auto o = oracle::otsu_exhaustive(values, 0.0, 500.0);
    EXPECT_EQ(r.bin_index, o.bin);
    EXPECT_DOUBLE_EQ(r.tau, (o.bin + 1) * 500.0 / 256.0);
    for (double var : o.per_bin) EXPECT_GE(r.between_class_variance + 1e-9, var);
  }
}

TEST(Otsu, TauWithinInputRange) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 20; ++k) {
    const auto g = ft::random_grid(16, 16, rng, 100.0, 300.0);
    const auto r = otsu_threshold(g, CalibrationPolicy{});
    const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
    EXPECT_GE(r.tau, *lo);
    EXPECT_LE(r.tau, *hi);
  }
}

TEST(Otsu, GrayImageUsesByteRange) {
  GrayImage img(4, 4, 10);
  for (std::size_t i = 8; i < 16; ++i) img[i] = 200;
  const auto r = otsu_threshold(img);
  const auto m = binarize(img, r.tau);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(m[i], i >= 8);
}

// ---- binarize ----

TEST(Binarize, Examples) {
  TemperatureGrid g(2, 1, std::vector<double>{10, 300});
  const auto m = binarize(g, 200);
  EXPECT_EQ(m[0], 0);
  EXPECT_EQ(m[1], 1);
  EXPECT_EQ(count_nonzero(binarize(g, 10.0)), 2u);
}

TEST(Binarize, MatchesLoop) {
  std::mt19937_64 rng(13);
  const auto g = ft::random_grid(20, 20, rng);
  const auto m = binarize(g, 250.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(m[i], g[i] >= 250.0 ? 1 : 0);
}

// ---- Gaussian ----

TEST(Gaussian, ConstantGridUnchanged) {
  const auto out = gaussian_blur(TemperatureGrid(9, 7, 123.5), 1.3);
  for (double v : out) EXPECT_NEAR(v, 123.5, 1e-9);
}

TEST(Gaussian, ImpulseGivesSampledKernel) {
  TemperatureGrid g(11, 11, 0.0);
  g(5, 5) = 1.0;
  const auto out = gaussian_blur(g, 1.0);
  // Sampled 2-D Gaussian, radius 3, normalized over its support.
  double norm = 0.0;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) norm += std::exp(-(dx * dx + dy * dy) / 2.0);
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const int dx = x - 5, dy = y - 5;
      const double expect = std::abs(dx) <= 3 && std::abs(dy) <= 3 ? std::exp(-(dx * dx + dy * dy) / 2.0) / norm : 0.0;
      EXPECT_NEAR(out(x, y), expect, 1e-12);
    }
}

TEST(Gaussian, InteriorImpulsePreservesMass) {
  TemperatureGrid g(21, 21, 0.0);
  g(10, 10) = 7.0;
  double sum = 0.0;
  for (double v : gaussian_blur(g, 2.0)) sum += v;
  EXPECT_NEAR(sum, 7.0, 1e-6);
}

TEST(Gaussian, RejectsNonPositiveSigma) {
  EXPECT_THROW(gaussian_blur(TemperatureGrid(3, 3), 0.0), ValidationError);
  EXPECT_THROW(gaussian_blur(TemperatureGrid(3, 3), -1.0), ValidationError);
}

TEST(Gaussian, KernelRadius) {
  EXPECT_EQ(gaussian_kernel(1.0).size(), 7u);
  EXPECT_EQ(gaussian_kernel(1.1).size(), 9u);
}

// ---- Canny ----

TEST(Canny, ConstantGridHasNoEdges) {
  EXPECT_EQ(count_nonzero(BinaryMask(32, 32, 0)), 0u);
  const auto e = canny(TemperatureGrid(32, 32, 80.0), 10, 20, 1.0);
  EXPECT_EQ(std::count(e.begin(), e.end(), 1), 0);
}

TEST(Canny, StepMatchesReferenceAndIsThin) {
  const auto g = vertical_step(32, 32, 16, 20.0, 420.0);
  const auto e = canny(g, 100, 200, 1.0);
  EXPECT_EQ(e, oracle::canny_reference(gaussian_blur(g, 1.0), 100, 200));
  for (std::size_t y = 0; y < 32; ++y) {
    std::size_t row_edges = 0;
    for (std::size_t x = 0; x < 32; ++x) {
      if (!e(x, y)) continue;
      ++row_edges;
      EXPECT_TRUE(x == 15 || x == 16) << "edge at column " << x;
    }
    EXPECT_EQ(row_edges, 1u) << "row " << y;
  }
}

TEST(Canny, SmallStepBelowLowThreshold) {
  const auto g = vertical_step(32, 32, 16, 20.0, 70.0);
  // Across the step the blurred profile is 20 + 50 * (cumulative kernel), so
  // b(x+1) - b(x-1) is 50 times two adjacent kernel taps; the Sobel column
  // weights add a factor of 4.
  const auto k = gaussian_kernel(1.0);
  double pair = 0.0;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) pair = std::max(pair, k[i] + k[i + 1]);
  const double analytic = 4.0 * 50.0 * pair;
  const auto grad = sobel(gaussian_blur(g, 1.0));
  EXPECT_NEAR(*std::max_element(grad.magnitude.begin(), grad.magnitude.end()), analytic, 1e-9);
  EXPECT_LT(analytic, 200.0);
  const auto e = canny(g, 100, 200, 1.0);
  EXPECT_EQ(std::count(e.begin(), e.end(), 1), 0);
}

TEST(Canny, RejectsInvertedThresholds) {
  EXPECT_THROW(canny(TemperatureGrid(8, 8), 50, 10, 1.0), ValidationError);
  EXPECT_THROW(canny(TemperatureGrid(8, 8), -1, 10, 1.0), ValidationError);
}

TEST(Canny, WeakPixelsAreAlwaysConnected) {
  std::mt19937_64 rng(14);
  for (int k = 0; k < 5; ++k) {
    const auto g = ft::random_grid(24, 24, rng, 0.0, 500.0);
    const auto e = canny(g, 150, 600, 1.0);
    EXPECT_EQ(e, oracle::canny_reference(gaussian_blur(g, 1.0), 150, 600));
  }
}

// ---- EDT ----

TEST(Edt, ThreeFourFive) {
  EdgeMap e(8, 8);
  e(0, 0) = 1;
  const auto d = euclidean_distance_transform(e);
  EXPECT_DOUBLE_EQ(d(3, 4), 5.0);
  EXPECT_EQ(d(0, 0), 0.0);
}

TEST(Edt, EmptyMapIsInfinite) {
  const auto d = euclidean_distance_transform(EdgeMap(5, 4));
  for (double v : d) EXPECT_EQ(v, kNoEdgeDistance);
  EXPECT_TRUE(std::isinf(kNoEdgeDistance));
}

TEST(Edt, MatchesBruteForce) {
  std::mt19937_64 rng(15);
  for (int k = 0; k < 6; ++k) {
    const auto e = ft::random_mask<EdgeTag>(31, 23, rng, 0.02 * (k + 1));
    const auto d = euclidean_distance_transform(e);
    const auto b = oracle::edt_brute(e);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (std::isinf(b[i])) EXPECT_TRUE(std::isinf(d[i]));
      else EXPECT_NEAR(d[i], b[i], 1e-6);
    }
  }
}

TEST(Edt, OneLipschitz) {
  std::mt19937_64 rng(16);
  const auto e = ft::random_mask<EdgeTag>(40, 40, rng, 0.01);
  const auto d = euclidean_distance_transform(e);
  std::uniform_int_distribution<std::size_t> pick(0, 39);
  for (int k = 0; k < 2000; ++k) {
    const auto x1 = pick(rng), y1 = pick(rng), x2 = pick(rng), y2 = pick(rng);
    const double lhs = std::abs(d(x1, y1) - d(x2, y2));
    EXPECT_LE(lhs, std::hypot(double(x1) - double(x2), double(y1) - double(y2)) + 1e-9);
  }
}

// ---- IoU ----

TEST(Iou, Examples) {
  const auto a = ft::rect_mask(4, 4, 0, 0, 2, 2);
  const auto b = ft::rect_mask(4, 4, 1, 0, 3, 2);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, ft::rect_mask(4, 4, 2, 2, 4, 4)), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(iou(BinaryMask(4, 4), BinaryMask(4, 4)), 1.0);
  EXPECT_DOUBLE_EQ(iou(BinaryMask(4, 4), a), 0.0);
  EXPECT_THROW(iou(a, BinaryMask(3, 4)), ValidationError);
}

TEST(Iou, SymmetricAndBounded) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 50; ++k) {
    const auto a = ft::random_mask(10, 10, rng), b = ft::random_mask(10, 10, rng);
    EXPECT_EQ(iou(a, b), iou(b, a));
    EXPECT_LE(iou(a, b), 1.0);
    if (a != b) {
      EXPECT_LT(iou(a, b), 1.0);
    }
  }
}

// ---- SSIM ----

TEST(Ssim, IdentityAndConstant) {
  std::mt19937_64 rng(18);
  GrayImage a(16, 16);
  std::uniform_int_distribution<int> px(0, 255);
  for (auto& v : a) v = static_cast<std::uint8_t>(px(rng));
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(GrayImage(9, 9, 77), GrayImage(9, 9, 77)), 1.0, 1e-12);
}

TEST(Ssim, MatchesWindowByWindowFormula) {
  GrayImage a(16, 16), b(16, 16);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      a(x, y) = static_cast<std::uint8_t>((x * 16 + y * 7) % 256);
      b(x, y) = static_cast<std::uint8_t>(((x ^ y) * 13 + 40) % 256);
    }
  const std::vector<double> va(a.begin(), a.end()), vb(b.begin(), b.end());
  EXPECT_NEAR(ssim(a, b), oracle::ssim_direct(va, vb, 16, 16), 1e-9);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
}

TEST(Ssim, MasksCompareAsBytes) {
  const auto a = ft::rect_mask(12, 12, 2, 2, 8, 8), b = ft::rect_mask(12, 12, 3, 3, 9, 9);
  std::vector<double> va(144), vb(144);
  for (std::size_t i = 0; i < 144; ++i) {
    va[i] = a[i] * 255.0;
    vb[i] = b[i] * 255.0;
  }
  EXPECT_NEAR(ssim(a, b), oracle::ssim_direct(va, vb, 12, 12), 1e-9);
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(GrayImage(7, 8), GrayImage(7, 8)), ValidationError);
  EXPECT_THROW(ssim(GrayImage(8, 8), GrayImage(9, 8)), ValidationError);
}

// ---- thermal gray ----

TEST(ThermalGray, Examples) {
  auto img = make_image(3, 1, 3);
  const std::uint8_t px[] = {255, 255, 255, 255, 0, 0, 0, 0, 0};
  std::copy(std::begin(px), std::end(px), img.data.begin());
  const auto g = thermal_jpg_to_gray(img);
  EXPECT_EQ(g[0], 255);
  EXPECT_EQ(g[1], 76);
  EXPECT_EQ(g[2], 0);
}

TEST(ThermalGray, GrayIsFixedPoint) {
  auto img = make_image(256, 1, 3);
  for (std::size_t v = 0; v < 256; ++v) img.data[3 * v] = img.data[3 * v + 1] = img.data[3 * v + 2] = std::uint8_t(v);
  const auto g = thermal_jpg_to_gray(img);
  for (std::size_t v = 0; v < 256; ++v) EXPECT_EQ(g[v], v);
}

TEST(ThermalGray, RejectsOtherChannelCounts) {
  Image8 img{2, 2, 4, std::vector<std::uint8_t>(16)};
  EXPECT_THROW(thermal_jpg_to_gray(img), ValidationError);
}

// ---- morphology and masked mean ----

TEST(Morphology, ErodeDilateNesting) {
  std::mt19937_64 rng(19);
  for (int k = 0; k < 20; ++k) {
    const auto m = ft::random_mask(15, 11, rng, 0.6);
    const auto er = erode3x3(m), di = dilate3x3(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_LE(er[i], m[i]);
      EXPECT_LE(m[i], di[i]);
    }
  }
  const auto sq = ft::rect_mask(9, 9, 2, 2, 7, 7);
  EXPECT_EQ(erode3x3(sq), ft::rect_mask(9, 9, 3, 3, 6, 6));
  EXPECT_EQ(dilate3x3(sq), ft::rect_mask(9, 9, 1, 1, 8, 8));
}

TEST(MaskedMean, EmptyIsNullopt) {
  TemperatureGrid g(2, 2, std::vector<double>{1, 2, 3, 4});
  EXPECT_FALSE(masked_mean(g, BinaryMask(2, 2)).has_value());
  EXPECT_DOUBLE_EQ(*masked_mean(g, ft::rect_mask(2, 2, 1, 0, 2, 2)), 3.0);
}
