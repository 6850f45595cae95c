#pragma once

// Command-line front end. run_cli() is the whole program; tools/firelabel.cpp
// only forwards argv.

#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "firelabel/autopoint.hpp"
#include "firelabel/dataset.hpp"
#include "firelabel/image_io.hpp"
#include "firelabel/losses.hpp"
#include "firelabel/pipeline.hpp"
#include "firelabel/proposer.hpp"
#include "firelabel/radiometric.hpp"
#include "firelabel/review_service.hpp"
#include "firelabel/synth.hpp"
#include "firelabel/topsis.hpp"

namespace firelabel::cli {

namespace detail {

struct IntScaleFlags {
  double scale = 1.0;
  double offset = 0.0;
  CLI::Option* scale_opt = nullptr;

  void apply(PipelineConfig& cfg) const {
    if (scale_opt && scale_opt->count() > 0) cfg.integer_scale = IntegerScale{scale, offset};
  }
};

inline void add_calibration(CLI::App* app, PipelineConfig& cfg, IntScaleFlags& ints) {
  app->add_option("--clip-min", cfg.calibration.clip_min, "Lower clip bound, degC");
  app->add_option("--clip-max", cfg.calibration.clip_max, "Upper clip bound, degC");
  app->add_option("--caution", cfg.calibration.caution_threshold, "Saturation caution level, degC");
  ints.scale_opt = app->add_option("--int-scale", ints.scale, "Integer TIFFs: degC = sample*scale + offset");
  app->add_option("--int-offset", ints.offset, "Integer TIFFs: offset, degC")->needs(ints.scale_opt);
}

inline void add_autopoint(CLI::App* app, AutopointConfig& a) {
  app->add_option("--pos-patch", a.pos_patch, "Positive patch size (odd)");
  app->add_option("--neg-patch", a.neg_patch, "Negative patch size (odd)");
  app->add_option("--epsilon", a.epsilon, "Margin around the Otsu threshold, degC");
  app->add_option("--canny-high", a.canny_high, "Canny strong threshold (gradient magnitude)");
  app->add_option("--canny-sigma", a.canny_sigma, "Gaussian sigma before Canny, pixels");
  app->add_option("--d-max", a.d_max, "Max distance from a Canny edge, pixels");
  app->add_option("--max-positive", a.max_positive, "Cap on positive prompts");
  app->add_option("--max-negative", a.max_negative, "Cap on negative prompts");
}

inline void add_selection(CLI::App* app, PipelineConfig& cfg) {
  app->add_option("--weights", cfg.weights, "Five TOPSIS weights")->expected(5);
  app->add_option("--thermal-thresh", cfg.thermal_thresh, "Fixed thermal gray threshold instead of Otsu");
}

inline CLI::Option* add_proposer(CLI::App* app, PipelineConfig& cfg, bool& baseline_flag) {
  auto* baseline = app->add_flag("--baseline", baseline_flag, "Use the built-in classical proposer");
  auto* endpoint = app->add_option("--endpoint", cfg.endpoint, "External proposer base URL")->excludes(baseline);
  app->add_option("--timeout", cfg.timeout_s, "External request timeout, seconds");
  app->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent external requests");
  return endpoint;
}

inline nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

// Pre-scan for --config so file values become defaults that flags override.
inline PipelineConfig initial_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    if (!path.empty()) return pipeline_config_from_json(read_json_file(path));
  }
  return {};
}

template <typename Tag>
Grid<double, Tag> load_real_grid(const fs::path& p) {
  const auto g = load_tiff(p);
  return Grid<double, Tag>(g.width(), g.height(), std::vector<double>(g.begin(), g.end()));
}

}  // namespace detail

inline std::atomic<httplib::Server*>& active_server() {
  static std::atomic<httplib::Server*> s{nullptr};
  return s;
}

/// Returns the process exit code: 0 ok, 1 usage/validation, 2 I/O or protocol.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  PipelineConfig cfg;
  try {
    cfg = detail::initial_config(args);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  }

  CLI::App app{"Fire-segmentation pseudo-label toolkit for radiometric UAV imagery", "firelabel"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Pipeline config JSON (flags override it)");
  detail::IntScaleFlags ints;
  bool baseline_flag = false;

  // calibrate
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Clip a radiometric TIFF and report saturation");
  std::string tiff_in, out_path;
  calibrate_cmd->add_option("--tiff", tiff_in, "Input TIFF")->required();
  calibrate_cmd->add_option("--out", out_path, "Calibrated float TIFF to write");
  detail::add_calibration(calibrate_cmd, cfg, ints);

  // points
  auto* points_cmd = app.add_subcommand("points", "Locate positive/negative point prompts");
  points_cmd->add_option("--tiff", tiff_in, "Input TIFF")->required();
  points_cmd->add_option("--out", out_path, "Point-set JSON to write")->required();
  detail::add_calibration(points_cmd, cfg, ints);
  detail::add_autopoint(points_cmd, cfg.autopoint);

  // propose
  auto* propose_cmd = app.add_subcommand("propose", "Produce three candidate masks");
  std::string thermal_in, points_in, id = "image";
  propose_cmd->add_option("--thermal", thermal_in, "Thermal image (PNG/JPEG)")->required();
  propose_cmd->add_option("--points", points_in, "Point-set JSON")->required();
  propose_cmd->add_option("--out", out_path, "Output directory")->required();
  propose_cmd->add_option("--id", id, "Output file stem");
  std::vector<CLI::Option*> endpoint_opts;
  endpoint_opts.push_back(detail::add_proposer(propose_cmd, cfg, baseline_flag));

  // select
  auto* select_cmd = app.add_subcommand("select", "Pick one of three proposals with TOPSIS");
  std::vector<std::string> proposal_paths;
  std::string scores_in;
  select_cmd->add_option("--tiff", tiff_in, "Input TIFF")->required();
  select_cmd->add_option("--thermal", thermal_in, "Thermal image")->required();
  select_cmd->add_option("--proposals", proposal_paths, "Three proposal mask PNGs")->expected(3)->required();
  select_cmd->add_option("--scores", scores_in, "Scores JSON written by 'propose'")->required();
  select_cmd->add_option("--out", out_path, "Output directory")->required();
  select_cmd->add_option("--id", id, "Output file stem");
  detail::add_calibration(select_cmd, cfg, ints);
  detail::add_selection(select_cmd, cfg);

  // pipeline
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run every stage over a dataset root");
  std::string root;
  pipeline_cmd->add_option("--root", root, "Dataset root with rgb/, thermal/, tiff/")->required();
  pipeline_cmd->add_option("--out", out_path, "Run directory")->required();
  pipeline_cmd->add_option("--jobs", cfg.jobs, "Worker threads (default: CPU count)");
  pipeline_cmd->add_option("--pattern", cfg.pairing.pattern, "Pairing regex over file stems");
  detail::add_calibration(pipeline_cmd, cfg, ints);
  detail::add_autopoint(pipeline_cmd, cfg.autopoint);
  detail::add_selection(pipeline_cmd, cfg);
  endpoint_opts.push_back(detail::add_proposer(pipeline_cmd, cfg, baseline_flag));
  pipeline_cmd->add_option("--config", config_path, "Pipeline config JSON (flags override it)");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predicted masks/temperatures");
  std::string pred_masks, gt_masks, pred_temps, gt_temps, regions;
  evaluate_cmd->add_option("--pred-masks", pred_masks, "Predicted mask directory")->required();
  evaluate_cmd->add_option("--gt-masks", gt_masks, "Ground-truth mask directory")->required();
  evaluate_cmd->add_option("--pred-temps", pred_temps, "Predicted temperature TIFF directory");
  evaluate_cmd->add_option("--gt-temps", gt_temps, "Ground-truth temperature TIFF directory");
  evaluate_cmd->add_option("--regions", regions, "Fire-region masks for temperature accuracy (default: gt masks)");
  evaluate_cmd->add_option("--batch-size", cfg.batch_size, "Batch size for mean-of-batch-means");
  evaluate_cmd->add_option("--out", out_path, "Output directory for per_image.csv and aggregate.json");

  // losses eval
  auto* losses_cmd = app.add_subcommand("losses", "Reference loss evaluation");
  losses_cmd->require_subcommand(1);
  auto* losses_eval = losses_cmd->add_subcommand("eval", "Evaluate losses on files");
  std::string prob_in, target_in, pred_temp_in, gt_temp_in, fire_in, logits_in;
  LossWeights weights;
  double smooth = 1.0, t_max = 500.0;
  losses_eval->add_option("--prob", prob_in, "Fire-probability TIFF in [0,1]");
  losses_eval->add_option("--target", target_in, "Target mask PNG");
  losses_eval->add_option("--pred-temp", pred_temp_in, "Predicted temperature TIFF");
  losses_eval->add_option("--logits", logits_in, "Temperature logits TIFF (scaled by t_max*sigmoid)");
  losses_eval->add_option("--gt-temp", gt_temp_in, "Ground-truth temperature TIFF");
  losses_eval->add_option("--fire", fire_in, "Fire-region mask PNG");
  losses_eval->add_option("--lambda-dice", weights.lambda_dice, "Teacher Dice weight");
  losses_eval->add_option("--lambda-student-dice", weights.lambda_student_dice, "Student Dice weight");
  losses_eval->add_option("--lambda-flame-l1", weights.lambda_flame_l1, "Fire-region L1 weight");
  losses_eval->add_option("--smooth", smooth, "Dice smoothing constant");
  losses_eval->add_option("--t-max", t_max, "Temperature head range, degC");

  // counts
  auto* counts_cmd = app.add_subcommand("counts", "Tally review decisions per burn location");
  std::string manifest_in, excluded_out;
  bool as_json = false;
  counts_cmd->add_option("manifest", manifest_in, "manifest.jsonl")->required();
  counts_cmd->add_flag("--json", as_json, "Print JSON instead of a table");
  counts_cmd->add_option("--excluded-out", excluded_out, "Write excluded ids, one per line");

  // split
  auto* split_cmd = app.add_subcommand("split", "Seeded train/test split of accepted records");
  split_cmd->add_option("manifest", manifest_in, "manifest.jsonl")->required();
  split_cmd->add_option("--seed", cfg.seed, "Shuffle seed");
  split_cmd->add_option("--fraction", cfg.train_fraction, "Training fraction");
  split_cmd->add_option("--out", out_path, "Write split JSON here instead of stdout");

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "Check a manifest against the files on disk");
  validate_cmd->add_option("manifest", manifest_in, "manifest.jsonl")->required();

  // synth gen
  auto* synth_cmd = app.add_subcommand("synth", "Synthetic scenes");
  synth_cmd->require_subcommand(1);
  auto* synth_gen = synth_cmd->add_subcommand("gen", "Generate synthetic scenes");
  std::string spec_in;
  std::size_t count = 1;
  bool randomize = false;
  synth_gen->add_option("--spec", spec_in, "Scene spec JSON (optional with --random)");
  synth_gen->add_option("--out", out_path, "Output root")->required();
  synth_gen->add_option("--count", count, "Number of scenes (seed increments per scene)");
  synth_gen->add_flag("--random", randomize, "Random blob layout per scene, derived from the seed");

  // review serve
  auto* review_cmd = app.add_subcommand("review", "Human review service");
  review_cmd->require_subcommand(1);
  auto* review_serve = review_cmd->add_subcommand("serve", "Serve the review API");
  std::string host = "127.0.0.1";
  int port = 8080;
  review_serve->add_option("--manifest", manifest_in, "manifest.jsonl")->required();
  review_serve->add_option("--port", port, "TCP port");
  review_serve->add_option("--host", host, "Bind address");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    if (app.get_subcommands().empty()) err << app.help();
    return 1;
  }

  try {
    ints.apply(cfg);
    if (baseline_flag) cfg.baseline = true;
    for (const auto* opt : endpoint_opts)
      if (opt->count() > 0) cfg.baseline = false;

    if (calibrate_cmd->parsed()) {
      cfg.calibration.validate();
      const auto raw = load_tiff(tiff_in, cfg.integer_scale);
      const auto sat = saturation_report(raw, cfg.calibration);
      const auto cal = calibrate(raw, cfg.calibration);
      const auto stats = grid_stats(raw, cfg.calibration);
      if (!out_path.empty()) write_tiff(out_path, cal);
      nlohmann::json j{{"width", raw.width()},
                       {"height", raw.height()},
                       {"min", stats.min},
                       {"max", stats.max},
                       {"mean", stats.mean},
                       {"saturation",
                        {{"pixels_above_caution", sat.pixels_above_caution},
                         {"pixels_at_or_above_clip_max", sat.pixels_at_or_above_clip_max},
                         {"fraction_caution", sat.fraction_caution}}},
                       {"histogram", stats.histogram}};
      out << j.dump() << "\n";
      return 0;
    }

    if (points_cmd->parsed()) {
      const auto grid = calibrate(load_tiff(tiff_in, cfg.integer_scale), cfg.calibration);
      const auto points = autolocate(grid, cfg.autopoint, cfg.calibration);
      const auto j = points ? to_json(*points) : no_fire_points_json();
      write_file_atomic(out_path, j.dump(2) + "\n");
      out << (points ? std::to_string(points->positives.size()) + " positive, " +
                           std::to_string(points->negatives.size()) + " negative prompts (tau " +
                           std::to_string(points->tau) + ")"
                     : std::string("no-fire frame"))
          << "\n";
      return 0;
    }

    if (propose_cmd->parsed()) {
      cfg.validate();
      const auto points = point_set_from_json(detail::read_json_file(points_in));
      if (!points) throw ValidationError("point set is a no-fire frame; nothing to propose");
      const auto thermal = load_image(thermal_in);
      detail::ensure_dir(out_path);
      MaskProposer proposer(cfg, fs::path(out_path) / "cache");
      const auto set = proposer.propose(thermal, thermal_jpg_to_gray(thermal), *points);
      nlohmann::json scores{{"source", set.source == ProposalSource::baseline ? "baseline" : "external"},
                            {"scores", nlohmann::json::array()},
                            {"masks", nlohmann::json::array()}};
      for (std::size_t k = 0; k < kProposalCount; ++k) {
        const auto name = id + ".p" + std::to_string(k) + ".png";
        save_mask(fs::path(out_path) / name, set.proposals[k].mask);
        scores["scores"].push_back(set.proposals[k].confidence);
        scores["masks"].push_back(name);
      }
      write_file_atomic(fs::path(out_path) / (id + ".scores.json"), scores.dump(2) + "\n");
      return 0;
    }

    if (select_cmd->parsed()) {
      cfg.calibration.validate();
      const auto grid = calibrate(load_tiff(tiff_in, cfg.integer_scale), cfg.calibration);
      const auto gray = thermal_jpg_to_gray(load_image(thermal_in));
      const auto scores = detail::read_json_file(scores_in);
      ProposalSet set;
      for (std::size_t k = 0; k < kProposalCount; ++k) {
        set.proposals[k].mask = load_mask(proposal_paths[k]);
        set.proposals[k].confidence = scores.at("scores").at(k).get<double>();
      }
      const auto otsu = otsu_threshold(grid, cfg.calibration);
      const auto thermal_mask = cfg.thermal_thresh ? binarize(gray, *cfg.thermal_thresh) : thermal_otsu_mask(gray);
      const auto sel =
          select_mask(set, binarize(grid, otsu.tau), thermal_mask, grid, cfg.criteria(), cfg.calibration);
      detail::ensure_dir(out_path);
      save_mask(fs::path(out_path) / (id + ".png"), sel.mask);
      auto report = selection_report(sel);
      report["tau"] = otsu.tau;
      write_file_atomic(fs::path(out_path) / (id + ".json"), report.dump(2) + "\n");
      out << "chosen proposal " << sel.result.chosen_index << "\n";
      return 0;
    }

    if (pipeline_cmd->parsed()) {
      const auto summary = run_pipeline(root, cfg, out_path);
      for (const auto& w : summary.warnings) err << "warning: " << w << "\n";
      for (const auto& [rid, msg] : summary.failures) err << "error: " << rid << ": " << msg << "\n";
      out << summary.records << " records, " << summary.no_fire << " no-fire, " << summary.failed << " failed\n";
      return summary.failed == 0 ? 0 : exit_code(summary.worst);
    }

    if (evaluate_cmd->parsed()) {
      std::optional<fs::path> pt, gt, rg;
      if (!pred_temps.empty()) pt = pred_temps;
      if (!gt_temps.empty()) gt = gt_temps;
      if (!regions.empty()) rg = regions;
      const auto res = evaluate_dirs(pred_masks, gt_masks, pt, gt, rg, cfg.batch_size);
      const auto agg = evaluation_json(res, cfg.batch_size);
      if (!out_path.empty()) {
        detail::ensure_dir(out_path);
        write_file_atomic(fs::path(out_path) / "per_image.csv", evaluation_csv(res));
        write_file_atomic(fs::path(out_path) / "aggregate.json", agg.dump(2) + "\n");
      } else {
        out << evaluation_csv(res);
      }
      out << agg.dump() << "\n";
      return 0;
    }

    if (losses_eval->parsed()) {
      weights.validate();
      nlohmann::json j;
      double ce = 0.0, dice = 0.0, fl1 = 0.0;
      if (!prob_in.empty() || !target_in.empty()) {
        if (prob_in.empty() || target_in.empty()) throw ValidationError("--prob and --target go together");
        const auto prob = detail::load_real_grid<ProbTag>(prob_in);
        for (double p : prob)
          if (p < 0.0 || p > 1.0) throw ValidationError("probabilities must lie in [0,1]");
        const auto target = load_mask(target_in);
        ce = cross_entropy(prob, target);
        dice = dice_loss(prob, target, smooth);
        j["cross_entropy"] = ce;
        j["dice"] = dice;
        j["teacher"] = teacher_loss(ce, dice, weights);
      }
      if (!gt_temp_in.empty()) {
        if (fire_in.empty() || (pred_temp_in.empty() && logits_in.empty()))
          throw ValidationError("--gt-temp needs --fire and one of --pred-temp/--logits");
        const auto pred = logits_in.empty() ? load_tiff(pred_temp_in)
                                            : scale_temperature(detail::load_real_grid<LogitTag>(logits_in), t_max);
        fl1 = flame_l1(pred, load_tiff(gt_temp_in), load_mask(fire_in));
        j["flame_l1"] = fl1;
      }
      if (j.empty()) throw ValidationError("nothing to evaluate: pass --prob/--target and/or --gt-temp");
      j["student_total"] = student_total(ce, dice, fl1, weights);
      j["weights"] = {{"lambda_dice", weights.lambda_dice},
                      {"lambda_student_dice", weights.lambda_student_dice},
                      {"lambda_flame_l1", weights.lambda_flame_l1}};
      out << j.dump() << "\n";
      return 0;
    }

    if (counts_cmd->parsed()) {
      const auto m = load_manifest(manifest_in);
      const auto table = counts(m);
      out << (as_json ? to_json(table).dump(2) + "\n" : format_counts(table));
      if (!excluded_out.empty()) write_file_atomic(excluded_out, excluded_ids(m));
      return 0;
    }

    if (split_cmd->parsed()) {
      const auto s = split(load_manifest(manifest_in), cfg.train_fraction, cfg.seed);
      const nlohmann::json j{{"seed", cfg.seed}, {"fraction", cfg.train_fraction}, {"train", s.train}, {"test", s.test}};
      if (out_path.empty()) out << j.dump(2) << "\n";
      else write_file_atomic(out_path, j.dump(2) + "\n");
      return 0;
    }

    if (validate_cmd->parsed()) {
      const auto m = load_manifest(manifest_in);
      const auto cfg_m = pipeline_config_from_json(m.config_snapshot);
      const auto rep = validate(m, manifest_in, cfg_m.integer_scale);
      for (const auto& w : rep.warnings) err << "warning: " << w.record_id << ": " << w.message << "\n";
      for (const auto& v : rep.violations) out << v.record_id << ": " << v.message << "\n";
      out << rep.violations.size() << " violation(s)\n";
      return rep.ok() ? 0 : 1;
    }

    if (synth_gen->parsed()) {
      SceneSpec base;
      if (!spec_in.empty()) base = scene_spec_from_json(detail::read_json_file(spec_in));
      else if (!randomize) throw ValidationError("synth gen needs --spec or --random");
      if (count == 0) throw ValidationError("--count must be >= 1");
      for (std::size_t i = 0; i < count; ++i) {
        SceneSpec spec = randomize ? random_scene_spec(base.width, base.height, base.seed + i) : base;
        spec.seed = base.seed + i;
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu", i);
        write_scene(gen_scene(spec), out_path, name);
      }
      out << count << " scene(s) written to " << out_path << "\n";
      return 0;
    }

    if (review_serve->parsed()) {
      ReviewService service(manifest_in);
      httplib::Server server;
      service.bind(server);
      active_server() = &server;
      std::signal(SIGINT, [](int) {
        if (auto* s = active_server().load()) s->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (auto* s = active_server().load()) s->stop();
      });
      out << "review service on http://" << host << ":" << port << "\n" << std::flush;
      const bool ok = server.listen(host, port);
      active_server() = nullptr;
      if (!ok) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

inline int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args);
}

}  // namespace firelabel::cli
