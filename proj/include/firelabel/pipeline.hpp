#pragma once

// End-to-end orchestration: calibrate -> locate prompts -> propose -> select,
// per record, with outputs under one run directory.

#include <atomic>
#include <functional>
#include <iomanip>
#include <mutex>
#include <semaphore>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "firelabel/autopoint.hpp"
#include "firelabel/dataset.hpp"
#include "firelabel/image_io.hpp"
#include "firelabel/metrics.hpp"
#include "firelabel/proposer.hpp"
#include "firelabel/radiometric.hpp"
#include "firelabel/topsis.hpp"

namespace firelabel {

struct PipelineConfig {
  CalibrationPolicy calibration;
  std::optional<IntegerScale> integer_scale;
  AutopointConfig autopoint;
  std::vector<double> weights{0.15, 0.40, 0.15, 0.15, 0.15};
  std::optional<int> thermal_thresh;  // fixed gray threshold instead of Otsu
  bool baseline = true;
  std::string endpoint;
  int timeout_s = 120;
  std::size_t max_in_flight = 4;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t jobs = 0;  // 0 = hardware concurrency
  PairingRule pairing;

  void validate() const {
    calibration.validate();
    autopoint.validate();
    if (weights.size() != 5) throw ValidationError("exactly five TOPSIS weights are required");
    for (double w : weights)
      if (!(w > 0.0)) throw ValidationError("TOPSIS weights must be > 0");
    if (thermal_thresh && (*thermal_thresh < 0 || *thermal_thresh > 255))
      throw ValidationError("thermal threshold must lie in [0,255]");
    if (!baseline && endpoint.empty()) throw ValidationError("external proposer needs --endpoint (or use --baseline)");
    if (timeout_s <= 0) throw ValidationError("timeout must be positive");
    if (max_in_flight == 0) throw ValidationError("in-flight limit must be >= 1");
    if (batch_size == 0) throw ValidationError("batch size must be >= 1");
    if (integer_scale && !std::isfinite(integer_scale->scale)) throw ValidationError("integer scale must be finite");
  }

  std::vector<CriterionSpec> criteria() const {
    auto specs = default_mask_criteria();
    for (std::size_t i = 0; i < specs.size(); ++i) specs[i].weight = weights[i];
    return specs;
  }

  std::size_t worker_count() const {
    if (jobs > 0) return jobs;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

// Snapshot embedded in manifests. Run-local knobs (jobs) are left out so that
// identical runs produce identical manifests.
inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["calibration"] = {{"clip_min", c.calibration.clip_min},
                      {"clip_max", c.calibration.clip_max},
                      {"caution", c.calibration.caution_threshold}};
  j["integer_scale"] = c.integer_scale ? nlohmann::json{{"scale", c.integer_scale->scale},
                                                        {"offset", c.integer_scale->offset}}
                                       : nlohmann::json(nullptr);
  const auto& a = c.autopoint;
  j["autopoint"] = {{"pos_patch", a.pos_patch},       {"neg_patch", a.neg_patch},
                    {"epsilon", a.epsilon},           {"canny_high", a.canny_high},
                    {"canny_sigma", a.canny_sigma},   {"d_max", a.d_max},
                    {"max_positive", a.max_positive}, {"max_negative", a.max_negative},
                    {"tau_source", "otsu"}};
  j["weights"] = c.weights;
  j["thermal_thresh"] = c.thermal_thresh ? nlohmann::json(*c.thermal_thresh) : nlohmann::json(nullptr);
  j["proposer"] = {{"baseline", c.baseline},
                   {"endpoint", c.endpoint},
                   {"timeout_s", c.timeout_s},
                   {"max_in_flight", c.max_in_flight}};
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["train_fraction"] = c.train_fraction;
  j["pairing"] = {{"pattern", c.pairing.pattern},
                  {"rgb_dir", c.pairing.rgb_dir},
                  {"thermal_dir", c.pairing.thermal_dir},
                  {"tiff_dir", c.pairing.tiff_dir}};
  return j;
}

/// Missing keys keep their defaults.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    if (auto it = j.find("calibration"); it != j.end()) {
      c.calibration.clip_min = it->value("clip_min", c.calibration.clip_min);
      c.calibration.clip_max = it->value("clip_max", c.calibration.clip_max);
      c.calibration.caution_threshold = it->value("caution", c.calibration.caution_threshold);
    }
    if (auto it = j.find("integer_scale"); it != j.end() && !it->is_null())
      c.integer_scale = IntegerScale{it->value("scale", 1.0), it->value("offset", 0.0)};
    if (auto it = j.find("autopoint"); it != j.end()) {
      auto& a = c.autopoint;
      a.pos_patch = it->value("pos_patch", a.pos_patch);
      a.neg_patch = it->value("neg_patch", a.neg_patch);
      a.epsilon = it->value("epsilon", a.epsilon);
      a.canny_high = it->value("canny_high", a.canny_high);
      a.canny_sigma = it->value("canny_sigma", a.canny_sigma);
      a.d_max = it->value("d_max", a.d_max);
      a.max_positive = it->value("max_positive", a.max_positive);
      a.max_negative = it->value("max_negative", a.max_negative);
    }
    if (auto it = j.find("weights"); it != j.end()) c.weights = it->get<std::vector<double>>();
    if (auto it = j.find("thermal_thresh"); it != j.end() && !it->is_null()) c.thermal_thresh = it->get<int>();
    if (auto it = j.find("proposer"); it != j.end()) {
      c.baseline = it->value("baseline", c.baseline);
      c.endpoint = it->value("endpoint", c.endpoint);
      c.timeout_s = it->value("timeout_s", c.timeout_s);
      c.max_in_flight = it->value("max_in_flight", c.max_in_flight);
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.jobs = j.value("jobs", c.jobs);
    if (auto it = j.find("pairing"); it != j.end()) {
      c.pairing.pattern = it->value("pattern", c.pairing.pattern);
      c.pairing.rgb_dir = it->value("rgb_dir", c.pairing.rgb_dir);
      c.pairing.thermal_dir = it->value("thermal_dir", c.pairing.thermal_dir);
      c.pairing.tiff_dir = it->value("tiff_dir", c.pairing.tiff_dir);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed pipeline config: ") + e.what());
  }
  return c;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

/// Run fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (first) std::rethrow_exception(first);
}

// ---- proposer with content-addressed response cache ----

class MaskProposer {
 public:
  MaskProposer(const PipelineConfig& config, fs::path cache_dir)
      : config_(config), cache_dir_(std::move(cache_dir)), in_flight_(static_cast<std::ptrdiff_t>(config.max_in_flight)) {}

  ProposalSet propose(const Image8& thermal, const GrayImage& gray, const PointSet& points) {
    if (config_.baseline) return propose_baseline(gray, points);
    const auto request = build_predict_request(to_3channel(thermal), points).dump();
    const auto key = sha256_hex(request);
    const auto cached = cache_dir_ / (key + ".json");
    if (fs::exists(cached)) {
      std::ifstream in(cached);
      try {
        return parse_predict_response(nlohmann::json::parse(in), thermal.width, thermal.height);
      } catch (const std::exception&) {
        // fall through and refetch
      }
    }
    ProposalSet set;
    {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      set = propose_external(to_3channel(thermal), points,
                             {config_.endpoint, std::chrono::seconds(config_.timeout_s)});
    }
    std::error_code ec;
    fs::create_directories(cache_dir_, ec);
    write_file_atomic(cached, to_wire_json(set).dump());
    return set;
  }

  static Image8 to_3channel(const Image8& img) {
    if (img.channels == 3) return img;
    Image8 out = make_image(img.width, img.height, 3);
    for (std::size_t i = 0; i < img.width * img.height; ++i)
      out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = img.data[i];
    return out;
  }

 private:
  const PipelineConfig& config_;
  fs::path cache_dir_;
  std::counting_semaphore<> in_flight_;
};

struct RecordOutcome {
  bool no_fire = false;
  std::optional<double> closeness;
  std::string error;  // empty on success
  ErrorKind error_kind = ErrorKind::validation;
};

inline std::string proposal_mask_rel(const std::string& id, std::size_t k) {
  return "masks/" + id + ".p" + std::to_string(k) + ".png";
}

/// Run every stage for one record, writing points/, masks/ and reports/
/// under out_dir and filling in the record's output paths.
inline RecordOutcome process_record(ImageRecord& rec, const fs::path& manifest_path, const PipelineConfig& config,
                                    const fs::path& out_dir, MaskProposer& source) {
  RecordOutcome outcome;
  const auto raw = load_tiff(resolve_path(manifest_path, rec.tiff_path), config.integer_scale);
  const auto saturation = saturation_report(raw, config.calibration);
  const auto grid = calibrate(raw, config.calibration);
  const auto points = autolocate(grid, config.autopoint, config.calibration);

  const std::string points_rel = "points/" + rec.id + ".json";
  const std::string mask_rel = "masks/" + rec.id + ".png";
  const std::string report_rel = "reports/" + rec.id + ".json";
  write_file_atomic(out_dir / points_rel, (points ? to_json(*points) : no_fire_points_json()).dump(2) + "\n");

  nlohmann::json report;
  report["id"] = rec.id;
  report["saturation"] = {{"pixels_above_caution", saturation.pixels_above_caution},
                          {"pixels_at_or_above_clip_max", saturation.pixels_at_or_above_clip_max},
                          {"fraction_caution", saturation.fraction_caution}};

  if (!points || points->empty()) {
    outcome.no_fire = true;
    save_mask(out_dir / mask_rel, BinaryMask(grid.width(), grid.height(), 0));
    report["no_fire"] = true;
    report["reason"] = points ? "no point prompts survived filtering" : "degenerate temperature histogram";
    report["tau"] = points ? nlohmann::json(points->tau) : nlohmann::json(nullptr);
    report["chosen"] = -1;
  } else {
    const auto thermal = load_image(resolve_path(manifest_path, rec.thermal_path));
    const auto gray = thermal_jpg_to_gray(thermal);
    if (gray.width() != grid.width() || gray.height() != grid.height())
      throw ValidationError(rec.id + ": thermal image and TIFF dimensions differ");
    const auto proposals = source.propose(thermal, gray, *points);
    const auto otsu_mask = binarize(grid, points->tau);
    const auto thermal_mask = config.thermal_thresh ? binarize(gray, *config.thermal_thresh) : thermal_otsu_mask(gray);
    const auto sel = select_mask(proposals, otsu_mask, thermal_mask, grid, config.criteria(), config.calibration);

    report.update(selection_report(sel));
    report["no_fire"] = false;
    report["tau"] = points->tau;
    report["source"] = proposals.source == ProposalSource::baseline ? "baseline" : "external";
    report["scores"] = nlohmann::json::array();
    report["proposal_masks"] = nlohmann::json::array();
    for (std::size_t k = 0; k < kProposalCount; ++k) {
      save_mask(out_dir / proposal_mask_rel(rec.id, k), proposals.proposals[k].mask);
      report["scores"].push_back(proposals.proposals[k].confidence);
      report["proposal_masks"].push_back(proposal_mask_rel(rec.id, k));
    }
    save_mask(out_dir / mask_rel, sel.mask);
    outcome.closeness = sel.result.closeness[sel.result.chosen_index];
  }
  write_file_atomic(out_dir / report_rel, report.dump(2) + "\n");

  rec.points_path = points_rel;
  rec.mask_path = mask_rel;
  rec.selection_report_path = report_rel;
  return outcome;
}

struct PipelineSummary {
  std::size_t records = 0;
  std::size_t no_fire = 0;
  std::size_t failed = 0;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::string>> failures;
  ErrorKind worst = ErrorKind::validation;
};

/// Discover records under root and process them into out_dir. Input paths
/// in the manifest are absolute; outputs are relative to out_dir.
inline PipelineSummary run_pipeline(const fs::path& root, const PipelineConfig& config, const fs::path& out_dir) {
  config.validate();
  auto discovered = discover(root, config.pairing);
  std::error_code ec;
  for (const auto* sub : {"masks", "points", "reports"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  Manifest manifest = std::move(discovered.manifest);
  manifest.config_snapshot = to_json(config);
  const fs::path manifest_path = out_dir / "manifest.jsonl";

  MaskProposer source(config, out_dir / "cache");
  std::vector<RecordOutcome> outcomes(manifest.records.size());
  parallel_for(manifest.records.size(), config.worker_count(), [&](std::size_t i) {
    try {
      outcomes[i] = process_record(manifest.records[i], manifest_path, config, out_dir, source);
    } catch (const Error& e) {
      outcomes[i].error = e.what();
      outcomes[i].error_kind = e.kind();
    }
  });

  PipelineSummary summary;
  summary.records = manifest.records.size();
  summary.warnings = std::move(discovered.warnings);
  nlohmann::json per_record = nlohmann::json::array();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (!o.error.empty()) {
      ++summary.failed;
      summary.failures.emplace_back(manifest.records[i].id, o.error);
      if (o.error_kind != ErrorKind::validation) summary.worst = o.error_kind;
    }
    summary.no_fire += o.no_fire;
  }
  save_manifest(manifest_path, manifest);

  nlohmann::json agg{{"records", summary.records},
                     {"no_fire", summary.no_fire},
                     {"failed", summary.failed},
                     {"unpaired_warnings", summary.warnings},
                     {"counts", to_json(counts(manifest))}};
  write_file_atomic(out_dir / "aggregate.json", agg.dump(2) + "\n");
  return summary;
}

// ---- evaluation over directories of predictions ----

struct EvaluationRow {
  std::string id;
  SegScores seg;
  std::optional<TempAccuracy> within25, within50;
};

struct EvaluationResult {
  std::vector<EvaluationRow> rows;
  SegScores seg;
  std::optional<TempAccuracy> within25, within50;
};

/// Match files by stem across the directories; gt masks double as the
/// temperature-evaluation region unless region_dir is given.
inline EvaluationResult evaluate_dirs(const fs::path& pred_masks, const fs::path& gt_masks,
                                      const std::optional<fs::path>& pred_temps,
                                      const std::optional<fs::path>& gt_temps,
                                      const std::optional<fs::path>& region_dir, std::size_t batch_size) {
  auto by_stem = [](const fs::path& dir) {
    std::map<std::string, fs::path> m;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) m.emplace(e.path().stem().string(), e.path());
    return m;
  };
  const auto preds = by_stem(pred_masks);
  const auto gts = by_stem(gt_masks);
  std::map<std::string, fs::path> pt, gtt, regions;
  const bool temps = pred_temps && gt_temps;
  if (temps) {
    pt = by_stem(*pred_temps);
    gtt = by_stem(*gt_temps);
  }
  if (region_dir) regions = by_stem(*region_dir);

  EvaluationResult res;
  std::vector<SegScores> seg;
  std::vector<TempAccuracy> t25, t50;
  for (const auto& [stem, gt_path] : gts) {
    const auto p = preds.find(stem);
    if (p == preds.end()) continue;
    EvaluationRow row;
    row.id = stem;
    const auto gt = load_mask(gt_path);
    row.seg = seg_scores(load_mask(p->second), gt);
    seg.push_back(row.seg);
    if (temps && pt.count(stem) && gtt.count(stem)) {
      const auto a = load_tiff(pt.at(stem)), b = load_tiff(gtt.at(stem));
      const auto region = region_dir && regions.count(stem) ? load_mask(regions.at(stem)) : gt;
      row.within25 = temp_tolerance_accuracy(a, b, region, 25.0);
      row.within50 = temp_tolerance_accuracy(a, b, region, 50.0);
      t25.push_back(*row.within25);
      t50.push_back(*row.within50);
    }
    res.rows.push_back(std::move(row));
  }
  if (seg.empty()) throw ValidationError("evaluate: no prediction/ground-truth pairs matched");
  res.seg = batch_aggregate(seg, batch_size);
  if (!t25.empty()) {
    res.within25 = batch_aggregate(t25, batch_size);
    res.within50 = batch_aggregate(t50, batch_size);
  }
  return res;
}

inline std::string evaluation_csv(const EvaluationResult& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "id,IoU 0,IoU 1,mIoU,Acc 0,Acc 1,mAcc,+-25,+-50\n";
  for (const auto& row : r.rows) {
    os << row.id << ',' << row.seg.iou_background << ',' << row.seg.iou_fire << ',' << row.seg.miou << ','
       << row.seg.acc_background << ',' << row.seg.acc_fire << ',' << row.seg.macc << ',';
    if (row.within25 && row.within25->pixels_evaluated > 0) os << row.within25->fraction_within;
    os << ',';
    if (row.within50 && row.within50->pixels_evaluated > 0) os << row.within50->fraction_within;
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json evaluation_json(const EvaluationResult& r, std::size_t batch_size) {
  nlohmann::json j{{"IoU 0", r.seg.iou_background}, {"IoU 1", r.seg.iou_fire}, {"mIoU", r.seg.miou},
                   {"Acc 0", r.seg.acc_background}, {"Acc 1", r.seg.acc_fire}, {"mAcc", r.seg.macc},
                   {"images", r.rows.size()},       {"batch_size", batch_size}};
  j["+-25"] = r.within25 ? nlohmann::json(r.within25->fraction_within) : nlohmann::json(nullptr);
  j["+-50"] = r.within50 ? nlohmann::json(r.within50->fraction_within) : nlohmann::json(nullptr);
  return j;
}

}  // namespace firelabel
