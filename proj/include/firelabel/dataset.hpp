#pragma once

// Image records, the JSON Lines manifest, and review bookkeeping.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "firelabel/image_io.hpp"
#include "firelabel/rng.hpp"

namespace firelabel {

namespace fs = std::filesystem;

enum class Decision { pending, accepted, excluded };

inline std::string to_string(Decision d) {
  switch (d) {
    case Decision::pending: return "pending";
    case Decision::accepted: return "accepted";
    case Decision::excluded: return "excluded";
  }
  return "pending";
}

inline std::optional<Decision> parse_decision(const std::string& s) {
  if (s == "pending") return Decision::pending;
  if (s == "accepted") return Decision::accepted;
  if (s == "excluded") return Decision::excluded;
  return std::nullopt;
}

/// Nothing moves back to pending; repeating the current decision is allowed.
inline bool legal_transition(Decision from, Decision to) {
  return to != Decision::pending || from == Decision::pending;
}

struct ImageRecord {
  std::string id;
  std::string burn_location;
  std::string rgb_path;
  std::string thermal_path;
  std::string tiff_path;
  std::optional<std::string> mask_path;
  std::optional<std::string> points_path;
  Decision decision = Decision::pending;
  std::optional<std::string> selection_report_path;
  std::optional<int> chosen_override;
  std::optional<std::string> reason;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Manifest {
  std::vector<ImageRecord> records;
  nlohmann::json config_snapshot = nlohmann::json::object();

  friend bool operator==(const Manifest&, const Manifest&) = default;

  const ImageRecord* find(const std::string& id) const {
    for (const auto& r : records)
      if (r.id == id) return &r;
    return nullptr;
  }
  ImageRecord* find(const std::string& id) {
    for (auto& r : records)
      if (r.id == id) return &r;
    return nullptr;
  }
};

inline constexpr const char* kManifestFormat = "firelabel-manifest/1";

inline nlohmann::json to_json(const ImageRecord& r) {
  nlohmann::json j{{"id", r.id},
                   {"burn_location", r.burn_location},
                   {"rgb_path", r.rgb_path},
                   {"thermal_path", r.thermal_path},
                   {"tiff_path", r.tiff_path},
                   {"decision", to_string(r.decision)}};
  j["mask_path"] = r.mask_path ? nlohmann::json(*r.mask_path) : nlohmann::json(nullptr);
  j["points_path"] = r.points_path ? nlohmann::json(*r.points_path) : nlohmann::json(nullptr);
  j["selection_report_path"] =
      r.selection_report_path ? nlohmann::json(*r.selection_report_path) : nlohmann::json(nullptr);
  j["chosen_override"] = r.chosen_override ? nlohmann::json(*r.chosen_override) : nlohmann::json(nullptr);
  j["reason"] = r.reason ? nlohmann::json(*r.reason) : nlohmann::json(nullptr);
  return j;
}

inline ImageRecord record_from_json(const nlohmann::json& j) {
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
  };
  ImageRecord r;
  r.id = j.at("id").get<std::string>();
  r.burn_location = j.value("burn_location", std::string());
  r.rgb_path = j.at("rgb_path").get<std::string>();
  r.thermal_path = j.at("thermal_path").get<std::string>();
  r.tiff_path = j.at("tiff_path").get<std::string>();
  r.mask_path = opt_string("mask_path");
  r.points_path = opt_string("points_path");
  r.selection_report_path = opt_string("selection_report_path");
  r.reason = opt_string("reason");
  if (j.contains("chosen_override") && !j["chosen_override"].is_null())
    r.chosen_override = j["chosen_override"].get<int>();
  const auto d = parse_decision(j.value("decision", std::string("pending")));
  if (!d) throw ValidationError("record " + r.id + ": unknown decision value");
  r.decision = *d;
  return r;
}

inline std::string serialize_manifest(const Manifest& m) {
  std::string out = nlohmann::json{{"format", kManifestFormat}, {"config_snapshot", m.config_snapshot}}.dump();
  out += '\n';
  for (const auto& r : m.records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline Manifest parse_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("format")) {
      m.config_snapshot = j.value("config_snapshot", nlohmann::json::object());
      continue;
    }
    try {
      auto r = record_from_json(j);
      if (!ids.insert(r.id).second) throw ValidationError("duplicate record id " + r.id);
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

inline Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  return parse_manifest(in);
}

/// Write-temp-fsync-rename so readers never observe a partial manifest.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw IoError("cannot write " + tmp.string());
    std::size_t off = 0;
    while (off < content.size()) {
      const auto n = ::write(fd, content.data() + off, content.size() - off);
      if (n <= 0) {
        ::close(fd);
        throw IoError("short write to " + tmp.string());
      }
      off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline void save_manifest(const fs::path& path, const Manifest& m) { write_file_atomic(path, serialize_manifest(m)); }

/// Relative paths in a manifest are relative to the manifest's directory.
inline fs::path resolve_path(const fs::path& manifest_path, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute()) return path;
  return manifest_path.parent_path() / path;
}

// ---- discovery ----

struct PairingRule {
  // Applied to file stems; capture group 1 is the pairing key.
  std::string pattern = R"(^(.+?)(?:[_-](?:rgb|RGB|thermal|Thermal|THERMAL|tiff|TIFF|Tiff))?$)";
  std::string rgb_dir = "rgb";
  std::string thermal_dir = "thermal";
  std::string tiff_dir = "tiff";
};

struct DiscoveryResult {
  Manifest manifest;
  std::vector<std::string> warnings;  // unpaired files
};

namespace detail {

inline std::map<std::string, fs::path> index_dir(const fs::path& dir, const std::regex& re) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::smatch m;
    const std::string stem = f.stem().string();
    const std::string key = std::regex_match(stem, m, re) && m.size() > 1 ? m[1].str() : stem;
    if (!out.emplace(key, f).second)
      throw ValidationError("duplicate stem '" + key + "' in " + dir.string());
  }
  return out;
}

inline void discover_location(const fs::path& dir, const std::string& location, const std::string& id_prefix,
                              const PairingRule& rule, DiscoveryResult& result) {
  const std::regex re(rule.pattern);
  const auto rgb = index_dir(dir / rule.rgb_dir, re);
  const auto thermal = index_dir(dir / rule.thermal_dir, re);
  const auto tiff = index_dir(dir / rule.tiff_dir, re);
  std::set<std::string> keys;
  for (const auto* m : {&rgb, &thermal, &tiff})
    for (const auto& [k, _] : *m) keys.insert(k);
  for (const auto& key : keys) {
    const auto r = rgb.find(key), t = thermal.find(key), f = tiff.find(key);
    if (r == rgb.end() || t == thermal.end() || f == tiff.end()) {
      std::string present;
      if (r != rgb.end()) present += " " + r->second.string();
      if (t != thermal.end()) present += " " + t->second.string();
      if (f != tiff.end()) present += " " + f->second.string();
      result.warnings.push_back("unpaired '" + key + "':" + present);
      continue;
    }
    ImageRecord rec;
    rec.id = id_prefix + key;
    rec.burn_location = location;
    rec.rgb_path = fs::absolute(r->second).lexically_normal().string();
    rec.thermal_path = fs::absolute(t->second).lexically_normal().string();
    rec.tiff_path = fs::absolute(f->second).lexically_normal().string();
    result.manifest.records.push_back(std::move(rec));
  }
}

}  // namespace detail

/// Pair files sharing a key across rgb/, thermal/ and tiff/. If root has no
/// such subdirectories, each child directory is treated as a burn location.
inline DiscoveryResult discover(const fs::path& root, const PairingRule& rule = {}) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("unreadable root directory: " + root.string());
  DiscoveryResult result;
  const bool flat = fs::is_directory(root / rule.rgb_dir) || fs::is_directory(root / rule.thermal_dir) ||
                    fs::is_directory(root / rule.tiff_dir);
  if (flat) {
    const auto name = fs::absolute(root).lexically_normal().filename().string();
    detail::discover_location(root, name.empty() ? "default" : name, "", rule, result);
  } else {
    std::vector<fs::path> locations;
    for (const auto& e : fs::directory_iterator(root, ec))
      if (e.is_directory()) locations.push_back(e.path());
    if (ec) throw IoError("unreadable root directory: " + root.string());
    std::sort(locations.begin(), locations.end());
    for (const auto& dir : locations) {
      const auto loc = dir.filename().string();
      detail::discover_location(dir, loc, loc + "__", rule, result);
    }
  }
  return result;
}

// ---- counts ----

struct LocationCounts {
  std::size_t excluded = 0;
  std::size_t final_count = 0;  // accepted
  std::size_t pending = 0;

  std::size_t total() const noexcept { return excluded + final_count + pending; }
  friend bool operator==(const LocationCounts&, const LocationCounts&) = default;
};

struct CountsTable {
  std::vector<std::pair<std::string, LocationCounts>> rows;  // first-appearance order
  LocationCounts total;
};

inline CountsTable counts(const Manifest& m) {
  CountsTable t;
  for (const auto& r : m.records) {
    auto it = std::find_if(t.rows.begin(), t.rows.end(), [&](const auto& row) { return row.first == r.burn_location; });
    if (it == t.rows.end()) {
      t.rows.emplace_back(r.burn_location, LocationCounts{});
      it = std::prev(t.rows.end());
    }
    for (auto* c : {&it->second, &t.total}) {
      switch (r.decision) {
        case Decision::excluded: ++c->excluded; break;
        case Decision::accepted: ++c->final_count; break;
        case Decision::pending: ++c->pending; break;
      }
    }
  }
  return t;
}

inline constexpr const char* kAllLocationsLabel = "All Burn Locations";

inline std::string format_counts(const CountsTable& t) {
  std::size_t name_w = std::string("Burn Location").size();
  for (const auto& [name, _] : t.rows) name_w = std::max(name_w, name.size());
  name_w = std::max(name_w, std::string(kAllLocationsLabel).size());
  std::ostringstream os;
  auto row = [&](const std::string& name, const std::string& a, const std::string& b, const std::string& c) {
    os << std::left << std::setw(static_cast<int>(name_w)) << name << "  " << std::right << std::setw(14) << a << "  "
       << std::setw(11) << b << "  " << std::setw(13) << c << '\n';
  };
  row("Burn Location", "Excluded Count", "Final Count", "Pending Count");
  for (const auto& [name, c] : t.rows)
    row(name, std::to_string(c.excluded), std::to_string(c.final_count), std::to_string(c.pending));
  row(kAllLocationsLabel, std::to_string(t.total.excluded), std::to_string(t.total.final_count),
      std::to_string(t.total.pending));
  return os.str();
}

inline nlohmann::json to_json(const CountsTable& t) {
  nlohmann::json j;
  j["locations"] = nlohmann::json::array();
  auto entry = [](const std::string& name, const LocationCounts& c) {
    return nlohmann::json{{"burn_location", name}, {"excluded", c.excluded}, {"final", c.final_count},
                          {"pending", c.pending}};
  };
  for (const auto& [name, c] : t.rows) j["locations"].push_back(entry(name, c));
  j["total"] = entry(kAllLocationsLabel, t.total);
  return j;
}

inline std::string excluded_ids(const Manifest& m) {
  std::string out;
  for (const auto& r : m.records)
    if (r.decision == Decision::excluded) out += r.id + "\n";
  return out;
}

// ---- split ----

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded shuffle of the accepted ids, then a prefix of round(fraction * n)
/// for training.
inline Split split(const Manifest& m, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ValidationError("train fraction must lie in [0,1]");
  std::vector<std::string> ids;
  for (const auto& r : m.records)
    if (r.decision == Decision::accepted) ids.push_back(r.id);
  if (ids.empty()) throw ValidationError("split: no accepted records");
  Rng rng(seed);
  rng.shuffle(ids);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return s;
}

// ---- validation ----

struct Violation {
  std::string record_id;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<Violation> warnings;

  bool ok() const noexcept { return violations.empty(); }
};

inline std::optional<std::pair<std::size_t, std::size_t>> image_dims(const fs::path& p) {
  try {
    const auto img = load_image(p);
    return std::pair{img.width, img.height};
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Check file presence, TIFF loadability, mask/TIFF agreement and decision
/// consistency. RGB/thermal size differences are warnings only.
inline ValidationReport validate(const Manifest& m, const fs::path& manifest_path,
                                 std::optional<IntegerScale> integer_scale = std::nullopt) {
  ValidationReport rep;
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    auto bad = [&](const std::string& msg) { rep.violations.push_back({r.id, msg}); };
    if (!seen.insert(r.id).second) bad("duplicate id");
    if (r.rgb_path == r.thermal_path || r.rgb_path == r.tiff_path || r.thermal_path == r.tiff_path)
      bad("paths are not distinct");
    const auto rgb = resolve_path(manifest_path, r.rgb_path);
    const auto thermal = resolve_path(manifest_path, r.thermal_path);
    const auto tiff = resolve_path(manifest_path, r.tiff_path);
    for (const auto& p : {rgb, thermal, tiff})
      if (!fs::exists(p)) bad("missing file " + p.string());

    std::optional<std::pair<std::size_t, std::size_t>> tiff_dims;
    if (fs::exists(tiff)) {
      try {
        const auto g = load_tiff(tiff, integer_scale);
        tiff_dims = std::pair{g.width(), g.height()};
      } catch (const Error& e) {
        bad(std::string("TIFF not loadable: ") + e.what());
      }
    }
    if (r.mask_path) {
      const auto mask = resolve_path(manifest_path, *r.mask_path);
      if (!fs::exists(mask)) {
        bad("missing mask " + mask.string());
      } else if (const auto md = image_dims(mask); !md) {
        bad("mask not loadable: " + mask.string());
      } else if (tiff_dims && *md != *tiff_dims) {
        bad("mask dimensions " + std::to_string(md->first) + "x" + std::to_string(md->second) +
            " differ from TIFF " + std::to_string(tiff_dims->first) + "x" + std::to_string(tiff_dims->second));
      }
    }
    if (r.decision == Decision::accepted && !r.mask_path) bad("accepted record has no mask");
    if (r.chosen_override && (*r.chosen_override < 0 || *r.chosen_override > 2)) bad("chosen_override out of range");

    if (fs::exists(rgb) && fs::exists(thermal)) {
      const auto a = image_dims(rgb), b = image_dims(thermal);
      if (a && b && *a != *b) rep.warnings.push_back({r.id, "rgb and thermal dimensions differ"});
    }
  }
  return rep;
}

}  // namespace firelabel
