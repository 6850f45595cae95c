#pragma once

// HTTP backend for the manual mask-review pass. Reads go to an immutable
// manifest snapshot; decisions are serialized through one writer that
// persists the manifest before acknowledging.

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "firelabel/dataset.hpp"
#include "firelabel/pipeline.hpp"
#include "firelabel/render.hpp"

namespace firelabel {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

inline HttpReply json_reply(int status, const nlohmann::json& j) { return {status, "application/json", j.dump()}; }

inline HttpReply error_reply(int status, const std::string& message) {
  return json_reply(status, {{"error", message}});
}

class ReviewService {
 public:
  static constexpr std::size_t kDefaultPageSize = 50;

  explicit ReviewService(fs::path manifest_path) : manifest_path_(std::move(manifest_path)) {
    snapshot_ = std::make_shared<const Manifest>(load_manifest(manifest_path_));
    config_ = pipeline_config_from_json(snapshot_->config_snapshot);
  }

  std::shared_ptr<const Manifest> snapshot() const {
    std::lock_guard lock(snapshot_mu_);
    return snapshot_;
  }

  /// GET /items?status=&location=&page=&page_size=
  HttpReply list_items(const std::map<std::string, std::string>& query) const {
    std::optional<Decision> status;
    std::optional<std::string> location;
    std::size_t page = 1, page_size = kDefaultPageSize;
    for (const auto& [key, value] : query) {
      if (key == "status") {
        if (value.empty()) continue;
        status = parse_decision(value);
        if (!status) return error_reply(400, "unknown status '" + value + "'");
      } else if (key == "location") {
        if (!value.empty()) location = value;
      } else if (key == "page" || key == "page_size") {
        std::size_t parsed = 0;
        try {
          std::size_t used = 0;
          const long v = std::stol(value, &used);
          if (used != value.size() || v < 1) throw std::invalid_argument(value);
          parsed = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
          return error_reply(400, key + " must be a positive integer");
        }
        (key == "page" ? page : page_size) = parsed;
      } else {
        return error_reply(400, "unknown query parameter '" + key + "'");
      }
    }

    const auto m = snapshot();
    std::vector<const ImageRecord*> matched;
    for (const auto& r : m->records)
      if ((!status || r.decision == *status) && (!location || r.burn_location == *location)) matched.push_back(&r);

    nlohmann::json items = nlohmann::json::array();
    const std::size_t begin = (page - 1) * page_size;
    for (std::size_t i = begin; i < std::min(matched.size(), begin + page_size); ++i) {
      const auto& r = *matched[i];
      items.push_back({{"id", r.id},
                       {"burn_location", r.burn_location},
                       {"decision", to_string(r.decision)},
                       {"processed", r.selection_report_path.has_value()},
                       {"url", "/items/" + r.id}});
    }
    const std::size_t pages = (matched.size() + page_size - 1) / page_size;
    return json_reply(200, {{"items", items},
                            {"page", page},
                            {"page_size", page_size},
                            {"pages", pages},
                            {"total", matched.size()}});
  }

  /// GET /items/{id}
  HttpReply get_item(const std::string& id) const {
    const auto m = snapshot();
    const auto* r = m->find(id);
    if (!r) return error_reply(404, "unknown id " + id);
    if (!r->selection_report_path) return error_reply(409, "not yet processed");
    nlohmann::json report, points;
    try {
      report = read_json(*r->selection_report_path);
      if (r->points_path) points = read_json(*r->points_path);
    } catch (const Error& e) {
      return error_reply(500, e.what());
    }
    nlohmann::json j = to_json(*r);
    j["report"] = report;
    j["points"] = points;
    const std::string base = "/items/" + id + "/images/";
    nlohmann::json images{{"rgb", base + "rgb.png"}, {"thermal", base + "thermal.png"}, {"tiff", base + "tiff.png"}};
    const bool has_proposals = report.contains("proposal_masks");
    for (const char* layer : {"rgb", "tiff"}) {
      nlohmann::json overlays = nlohmann::json::object();
      if (has_proposals)
        for (std::size_t k = 0; k < kProposalCount; ++k)
          overlays["p" + std::to_string(k)] = base + layer + "_overlay_p" + std::to_string(k) + ".png";
      overlays["chosen"] = base + layer + "_overlay_chosen.png";
      images[std::string(layer) + "_overlays"] = overlays;
    }
    j["images"] = images;
    return json_reply(200, j);
  }

  /// GET /items/{id}/images/{kind}.png
  HttpReply get_image(const std::string& id, const std::string& kind) const {
    const auto m = snapshot();
    const auto* r = m->find(id);
    if (!r) return error_reply(404, "unknown id " + id);
    const std::string cache_key = id + "|" + kind + "|" + r->mask_path.value_or("");
    {
      std::lock_guard lock(cache_mu_);
      if (auto it = image_cache_.find(cache_key); it != image_cache_.end()) return {200, "image/png", it->second};
    }
    std::string png;
    try {
      const auto img = render(*r, kind);
      if (!img) return error_reply(404, "unknown image kind " + kind);
      const auto bytes = encode_png(*img);
      png.assign(bytes.begin(), bytes.end());
    } catch (const Error& e) {
      return error_reply(409, e.what());
    }
    std::lock_guard lock(cache_mu_);
    image_cache_.emplace(cache_key, png);
    return {200, "image/png", png};
  }

  /// POST /items/{id}/decision {"decision", "chosen_override"?, "reason"?}
  HttpReply post_decision(const std::string& id, const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return error_reply(422, "body is not JSON");
    }
    if (!j.is_object() || !j.contains("decision") || !j["decision"].is_string())
      return error_reply(422, "body needs a string 'decision'");
    const auto decision = parse_decision(j["decision"].get<std::string>());
    if (!decision) return error_reply(422, "decision must be 'accepted' or 'excluded'");
    std::optional<int> override_index;
    if (j.contains("chosen_override") && !j["chosen_override"].is_null()) {
      if (!j["chosen_override"].is_number_integer()) return error_reply(422, "chosen_override must be 0, 1 or 2");
      const int k = j["chosen_override"].get<int>();
      if (k < 0 || k > 2) return error_reply(422, "chosen_override must be 0, 1 or 2");
      override_index = k;
    }
    std::optional<std::string> reason;
    if (j.contains("reason") && !j["reason"].is_null()) {
      if (!j["reason"].is_string()) return error_reply(422, "reason must be a string");
      reason = j["reason"].get<std::string>();
    }

    std::lock_guard writer(write_mu_);
    Manifest next = *snapshot();
    auto* r = next.find(id);
    if (!r) return error_reply(404, "unknown id " + id);
    if (*decision == Decision::pending || !legal_transition(r->decision, *decision))
      return error_reply(409, "illegal transition " + to_string(r->decision) + " -> " + to_string(*decision));
    if (override_index) {
      if (!r->selection_report_path) return error_reply(409, "not yet processed");
      nlohmann::json report;
      try {
        report = read_json(*r->selection_report_path);
      } catch (const Error& e) {
        return error_reply(500, e.what());
      }
      if (!report.contains("proposal_masks") || report["proposal_masks"].size() != kProposalCount)
        return error_reply(409, "item has no proposals to override");
      r->mask_path = report["proposal_masks"][static_cast<std::size_t>(*override_index)].get<std::string>();
      r->chosen_override = override_index;
    }
    r->decision = *decision;
    if (reason) r->reason = reason;
    try {
      save_manifest(manifest_path_, next);
    } catch (const Error& e) {
      return error_reply(500, e.what());
    }
    const auto updated = to_json(*r);
    {
      std::lock_guard lock(snapshot_mu_);
      snapshot_ = std::make_shared<const Manifest>(std::move(next));
    }
    return json_reply(200, updated);
  }

  /// GET /counts
  HttpReply get_counts() const { return json_reply(200, to_json(counts(*snapshot()))); }

  void bind(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/items", [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> q;
      for (const auto& [k, v] : req.params) q[k] = v;
      apply(list_items(q), res);
    });
    server.Get(R"(/items/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) { apply(get_item(req.matches[1]), res); });
    server.Get(R"(/items/([^/]+)/images/([a-z0-9_]+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
      apply(get_image(req.matches[1], req.matches[2]), res);
    });
    server.Post(R"(/items/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
      apply(post_decision(req.matches[1], req.body), res);
    });
    server.Get("/counts", [this](const httplib::Request&, httplib::Response& res) { apply(get_counts(), res); });
  }

 private:
  static void apply(const HttpReply& reply, httplib::Response& res) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  }

  nlohmann::json read_json(const std::string& rel) const {
    const auto path = resolve_path(manifest_path_, rel);
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ": " + e.what());
    }
  }

  std::optional<Image8> render(const ImageRecord& r, const std::string& kind) const {
    auto tiff_render = [&] {
      return render_jet(calibrate(load_tiff(resolve_path(manifest_path_, r.tiff_path), config_.integer_scale),
                                  config_.calibration),
                        config_.calibration);
    };
    if (kind == "rgb") return to_rgb(load_image(resolve_path(manifest_path_, r.rgb_path)));
    if (kind == "thermal") return to_rgb(load_image(resolve_path(manifest_path_, r.thermal_path)));
    if (kind == "tiff") return tiff_render();

    for (const char* layer : {"rgb", "tiff"}) {
      const std::string prefix = std::string(layer) + "_overlay_";
      if (kind.rfind(prefix, 0) != 0) continue;
      const std::string which = kind.substr(prefix.size());
      std::string mask_rel;
      if (which == "chosen") {
        if (!r.mask_path) throw ValidationError("not yet processed");
        mask_rel = *r.mask_path;
      } else if (which == "p0" || which == "p1" || which == "p2") {
        if (!r.selection_report_path) throw ValidationError("not yet processed");
        const auto report = read_json(*r.selection_report_path);
        if (!report.contains("proposal_masks")) throw ValidationError("item has no proposals");
        mask_rel = report["proposal_masks"][static_cast<std::size_t>(which[1] - '0')].get<std::string>();
      } else {
        return std::nullopt;
      }
      const auto mask = load_mask(resolve_path(manifest_path_, mask_rel));
      const Image8 base = std::string(layer) == "rgb" ? load_image(resolve_path(manifest_path_, r.rgb_path))
                                                      : tiff_render();
      return overlay_boundary(base, mask);
    }
    return std::nullopt;
  }

  fs::path manifest_path_;
  PipelineConfig config_;
  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const Manifest> snapshot_;
  std::mutex write_mu_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::string, std::string> image_cache_;
};

}  // namespace firelabel
