#pragma once

// Candidate mask proposals: the external promptable-segmentation service
// (HTTP/JSON wire protocol) and the built-in classical baseline.

#include <array>
#include <chrono>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "firelabel/autopoint.hpp"
#include "firelabel/base64.hpp"
#include "firelabel/cv_kernels.hpp"
#include "firelabel/image_io.hpp"

namespace firelabel {

struct MaskProposal {
  BinaryMask mask;
  double confidence = 0.0;

  friend bool operator==(const MaskProposal&, const MaskProposal&) = default;
};

enum class ProposalSource { external, baseline };

inline constexpr std::size_t kProposalCount = 3;

struct ProposalSet {
  std::array<MaskProposal, kProposalCount> proposals;
  ProposalSource source = ProposalSource::baseline;
};

// Otsu on the thermal gray; a degenerate histogram gives an empty mask.
inline BinaryMask thermal_otsu_mask(const GrayImage& gray) {
  try {
    return binarize(gray, otsu_threshold(gray).tau);
  } catch (const ValidationError&) {
    return BinaryMask(gray.width(), gray.height(), 0);
  }
}

inline double positive_coverage(const BinaryMask& mask, const PointSet& points) {
  if (points.positives.empty()) return 0.0;
  std::size_t covered = 0;
  for (const auto& p : points.positives) covered += mask(p.x, p.y) != 0;
  return std::clamp(static_cast<double>(covered) / static_cast<double>(points.positives.size()), 0.0, 1.0);
}

/// Three nested masks: Otsu, Otsu eroded, Otsu dilated. Confidence is the
/// fraction of positive prompts each mask covers.
inline ProposalSet propose_baseline(const GrayImage& thermal_gray, const PointSet& points) {
  const auto raw = thermal_otsu_mask(thermal_gray);
  ProposalSet set;
  set.source = ProposalSource::baseline;
  set.proposals[0].mask = raw;
  set.proposals[1].mask = erode3x3(raw);
  set.proposals[2].mask = dilate3x3(raw);
  for (auto& p : set.proposals) p.confidence = positive_coverage(p.mask, points);
  return set;
}

// ---- wire protocol ----

/// POST {endpoint}/predict request body. Label 1 = positive.
inline nlohmann::json build_predict_request(const Image8& image, const PointSet& points) {
  nlohmann::json req;
  req["image_png_b64"] = base64::encode(encode_png(image));
  auto& pts = req["points"] = nlohmann::json::array();
  for (const auto& p : points.positives) pts.push_back({{"x", p.x}, {"y", p.y}, {"label", 1}});
  for (const auto& p : points.negatives) pts.push_back({{"x", p.x}, {"y", p.y}, {"label", 0}});
  return req;
}

/// Validate a /predict response and decode its masks. Mask bytes are taken
/// verbatim: any nonzero level is foreground, anything but {0,255} is rejected.
inline ProposalSet parse_predict_response(const nlohmann::json& body, std::size_t width, std::size_t height) {
  if (!body.is_object() || !body.contains("masks_png_b64") || !body.contains("scores"))
    throw ProtocolError("malformed response: expected masks_png_b64 and scores");
  const auto& masks = body["masks_png_b64"];
  const auto& scores = body["scores"];
  if (!masks.is_array() || !scores.is_array()) throw ProtocolError("malformed response: masks/scores must be arrays");
  if (masks.size() != kProposalCount)
    throw ProtocolError("protocol error: expected 3 masks, got " + std::to_string(masks.size()));
  if (scores.size() != kProposalCount)
    throw ProtocolError("protocol error: expected 3 scores, got " + std::to_string(scores.size()));

  ProposalSet set;
  set.source = ProposalSource::external;
  for (std::size_t k = 0; k < kProposalCount; ++k) {
    if (!scores[k].is_number()) throw ProtocolError("score " + std::to_string(k) + " is not a number");
    const double score = scores[k].get<double>();
    if (!(score >= 0.0 && score <= 1.0))
      throw ProtocolError("score " + std::to_string(k) + " out of [0,1]: " + std::to_string(score));
    if (!masks[k].is_string()) throw ProtocolError("mask " + std::to_string(k) + " is not a string");

    Image8 img;
    try {
      img = decode_png(base64::decode(masks[k].get<std::string>()));
    } catch (const Error& e) {
      throw ProtocolError("mask " + std::to_string(k) + ": " + e.what());
    }
    if (img.channels != 1) throw ProtocolError("mask " + std::to_string(k) + " is not single-channel");
    if (img.width != width || img.height != height)
      throw ProtocolError("mask " + std::to_string(k) + " has dimensions " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + ", expected " + std::to_string(width) + "x" +
                          std::to_string(height));
    for (auto v : img.data)
      if (v != 0 && v != 255) throw ProtocolError("mask " + std::to_string(k) + " has values outside {0,255}");
    set.proposals[k].mask = image_to_mask(img);
    set.proposals[k].confidence = score;
  }
  return set;
}

struct ExternalProposerOptions {
  std::string endpoint;  // scheme://host:port[/base]
  std::chrono::seconds timeout{120};
};

namespace detail {

struct Endpoint {
  std::string origin;  // scheme://host:port
  std::string base;    // path prefix, no trailing slash
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("endpoint must be a URL: " + url);
  const auto path = url.find('/', scheme + 3);
  Endpoint e{url.substr(0, path), path == std::string::npos ? "" : url.substr(path)};
  while (!e.base.empty() && e.base.back() == '/') e.base.pop_back();
  return e;
}

}  // namespace detail

/// Call the external service. Network failures and contract violations
/// raise ProtocolError.
inline ProposalSet propose_external(const Image8& image, const PointSet& points, const ExternalProposerOptions& opts) {
  if (points.empty()) throw ValidationError("external proposer needs at least one point prompt");
  const auto ep = detail::split_endpoint(opts.endpoint);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(opts.timeout);
  client.set_read_timeout(opts.timeout);
  client.set_write_timeout(opts.timeout);

  const auto body = build_predict_request(image, points).dump();
  auto res = client.Post(ep.base + "/predict", body, "application/json");
  if (!res) throw ProtocolError("proposer request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw ProtocolError("proposer returned HTTP " + std::to_string(res->status));
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  return parse_predict_response(parsed, image.width, image.height);
}

// Response body in wire format; used by the cache and the reference stub.
inline nlohmann::json to_wire_json(const ProposalSet& set) {
  nlohmann::json j;
  j["masks_png_b64"] = nlohmann::json::array();
  j["scores"] = nlohmann::json::array();
  for (const auto& p : set.proposals) {
    j["masks_png_b64"].push_back(base64::encode(encode_png(mask_to_image(p.mask))));
    j["scores"].push_back(p.confidence);
  }
  return j;
}

}  // namespace firelabel
