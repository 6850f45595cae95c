#pragma once

// Synthetic paired scenes with known geometry: temperature grid, thermal
// gray, tinted RGB and the ground-truth fire mask.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firelabel/grid.hpp"
#include "firelabel/image_io.hpp"
#include "firelabel/rng.hpp"

namespace firelabel {

enum class BlobShape { square, gaussian };

struct Blob {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;  // half-extent for squares, standard deviation for gaussians
  double peak_temp = 400.0;
  BlobShape shape = BlobShape::square;
};

struct SceneSpec {
  std::size_t width = 128;
  std::size_t height = 128;
  double background_temp = 20.0;
  std::vector<Blob> blobs;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double fire_threshold = 100.0;  // gt mask = noiseless temperature >= this

  void validate() const {
    if (width == 0 || height == 0) throw ValidationError("scene dimensions must be positive");
    if (!(background_temp >= 0.0 && background_temp <= 500.0))
      throw ValidationError("background temperature must lie in [0, 500]");
    if (!(noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
    for (const auto& b : blobs) {
      if (!(b.cx >= 0.0 && b.cy >= 0.0 && b.cx < static_cast<double>(width) && b.cy < static_cast<double>(height)))
        throw ValidationError("blob center out of bounds");
      if (!(b.radius > 0.0)) throw ValidationError("blob radius must be > 0");
      if (!(b.peak_temp >= 0.0 && b.peak_temp <= 500.0)) throw ValidationError("blob peak must lie in [0, 500]");
    }
  }
};

struct Scene {
  TemperatureGrid temperature;
  GrayImage thermal;
  Image8 rgb;
  BinaryMask truth;
};

inline TemperatureGrid noiseless_field(const SceneSpec& spec) {
  TemperatureGrid field(spec.width, spec.height, spec.background_temp);
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      double t = spec.background_temp;
      for (const auto& b : spec.blobs) {
        const double dx = static_cast<double>(x) - b.cx, dy = static_cast<double>(y) - b.cy;
        const double amp = b.peak_temp - spec.background_temp;
        if (b.shape == BlobShape::square) {
          if (std::abs(dx) <= b.radius && std::abs(dy) <= b.radius) t += amp;
        } else {
          t += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
        }
      }
      field(x, y) = t;
    }
  }
  return field;
}

inline std::uint8_t temperature_to_gray(double t) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 500.0) * 255.0 / 500.0));
}

inline Scene gen_scene(const SceneSpec& spec) {
  spec.validate();
  const auto clean = noiseless_field(spec);
  Rng rng(spec.seed);
  Scene s{TemperatureGrid(spec.width, spec.height), GrayImage(spec.width, spec.height),
          make_image(spec.width, spec.height, 3), BinaryMask(spec.width, spec.height)};
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
    s.temperature[i] = std::clamp(clean[i] + noise, 0.0, 500.0);
    s.truth[i] = clean[i] >= spec.fire_threshold ? 1 : 0;
    const std::uint8_t g = temperature_to_gray(s.temperature[i]);
    s.thermal[i] = g;
    if (s.truth[i]) {
      s.rgb.data[3 * i] = static_cast<std::uint8_t>(std::min(255, g + 96));
      s.rgb.data[3 * i + 1] = static_cast<std::uint8_t>(std::lround(g * 0.6));
      s.rgb.data[3 * i + 2] = static_cast<std::uint8_t>(std::lround(g * 0.15));
    } else {
      s.rgb.data[3 * i] = s.rgb.data[3 * i + 1] = s.rgb.data[3 * i + 2] = g;
    }
  }
  return s;
}

/// A random layout of 1-3 hot square blobs (each 400 degC +/- 80) on a cool
/// background with 4 degC sensor noise.
inline SceneSpec random_scene_spec(std::size_t width, std::size_t height, std::uint64_t seed) {
  Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
  SceneSpec spec;
  spec.width = width;
  spec.height = height;
  spec.seed = seed;
  spec.background_temp = rng.uniform(10.0, 35.0);
  spec.noise_sigma = 4.0;
  const auto count = 1 + rng.below(3);
  const double min_dim = static_cast<double>(std::min(width, height));
  for (std::uint64_t i = 0; i < count; ++i) {
    Blob b;
    b.shape = BlobShape::square;
    b.radius = std::floor(rng.uniform(min_dim / 16.0, min_dim / 7.0));
    b.cx = std::floor(rng.uniform(b.radius + 2.0, static_cast<double>(width) - b.radius - 2.0));
    b.cy = std::floor(rng.uniform(b.radius + 2.0, static_cast<double>(height) - b.radius - 2.0));
    b.peak_temp = rng.uniform(320.0, 480.0);
    spec.blobs.push_back(b);
  }
  return spec;
}

struct ScenePaths {
  std::filesystem::path tiff, thermal, rgb, truth;
};

/// Layout: <dir>/{tiff,thermal,rgb,gt}/<name>.{tif,png,png,png}.
inline ScenePaths write_scene(const Scene& scene, const std::filesystem::path& dir, const std::string& name) {
  ScenePaths p{dir / "tiff" / (name + ".tif"), dir / "thermal" / (name + ".png"), dir / "rgb" / (name + ".png"),
               dir / "gt" / (name + ".png")};
  std::error_code ec;
  for (const auto* sub : {"tiff", "thermal", "rgb", "gt"}) {
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  write_tiff(p.tiff, scene.temperature);
  save_png(p.thermal, gray_to_image(scene.thermal));
  save_png(p.rgb, scene.rgb);
  save_mask(p.truth, scene.truth);
  return p;
}

// ---- JSON ----

inline nlohmann::json to_json(const SceneSpec& s) {
  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& b : s.blobs)
    blobs.push_back({{"cx", b.cx},
                     {"cy", b.cy},
                     {"radius", b.radius},
                     {"peak_temp", b.peak_temp},
                     {"shape", b.shape == BlobShape::square ? "square" : "gaussian"}});
  return {{"width", s.width},         {"height", s.height}, {"background_temp", s.background_temp},
          {"blobs", blobs},           {"noise_sigma", s.noise_sigma}, {"seed", s.seed},
          {"fire_threshold", s.fire_threshold}};
}

inline SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  try {
    SceneSpec s;
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.background_temp = j.value("background_temp", s.background_temp);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    s.fire_threshold = j.value("fire_threshold", s.fire_threshold);
    for (const auto& b : j.value("blobs", nlohmann::json::array())) {
      Blob blob;
      blob.cx = b.at("cx").get<double>();
      blob.cy = b.at("cy").get<double>();
      blob.radius = b.at("radius").get<double>();
      blob.peak_temp = b.value("peak_temp", blob.peak_temp);
      const auto shape = b.value("shape", std::string("square"));
      if (shape == "square") blob.shape = BlobShape::square;
      else if (shape == "gaussian") blob.shape = BlobShape::gaussian;
      else throw ValidationError("unknown blob shape: " + shape);
      s.blobs.push_back(blob);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scene spec: ") + e.what());
  }
}

}  // namespace firelabel
