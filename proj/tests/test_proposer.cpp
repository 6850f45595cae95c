#include <random>

#include <gtest/gtest.h>

#include "firelabel/proposer.hpp"
#include "firelabel/radiometric.hpp"
#include "firelabel/synth.hpp"
#include "stub_server.hpp"
#include "test_support.hpp"

using namespace firelabel;
namespace ft = firelabel::testing;

namespace {

PointSet some_points() {
  PointSet p;
  p.tau = 200;
  p.positives.push_back({3, 4, PointLabel::positive, 400, 1});
  p.positives.push_back({5, 6, PointLabel::positive, 410, 2});
  p.negatives.push_back({20, 20, PointLabel::negative, 20, 3});
  return p;
}

Image8 test_image(std::size_t w, std::size_t h) {
  auto img = make_image(w, h, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 7);
  return img;
}

}  // namespace

TEST(Base64, RoundTripAndErrors) {
  const std::vector<unsigned char> bytes{0, 1, 2, 250, 255, 17, 'a'};
  for (std::size_t n = 0; n <= bytes.size(); ++n) {
    std::vector<unsigned char> part(bytes.begin(), bytes.begin() + n);
    EXPECT_EQ(base64::decode(base64::encode(part)), part);
  }
  EXPECT_EQ(base64::encode({'M', 'a', 'n'}), "TWFu");
  EXPECT_EQ(base64::encode({'M'}), "TQ==");
  EXPECT_THROW(base64::decode("TW@u"), ProtocolError);
  EXPECT_THROW(base64::decode("TWF"), ProtocolError);
}

TEST(Baseline, ThreeNestedProposals) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 10; ++k) {
    GrayImage g(20, 16);
    std::uniform_int_distribution<int> px(0, 255);
    for (auto& v : g) v = static_cast<std::uint8_t>(px(rng));
    const auto set = propose_baseline(g, some_points());
    EXPECT_EQ(set.proposals.size(), 3u);
    EXPECT_EQ(set.source, ProposalSource::baseline);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_LE(set.proposals[1].mask[i], set.proposals[0].mask[i]);
      EXPECT_LE(set.proposals[0].mask[i], set.proposals[2].mask[i]);
    }
    for (const auto& p : set.proposals) {
      EXPECT_GE(p.confidence, 0.0);
      EXPECT_LE(p.confidence, 1.0);
    }
  }
}

TEST(Baseline, FullCoverageGivesConfidenceOne) {
  GrayImage g(24, 24, 10);
  for (std::size_t y = 0; y < 12; ++y)
    for (std::size_t x = 0; x < 12; ++x) g(x, y) = 220;
  const auto set = propose_baseline(g, some_points());
  EXPECT_DOUBLE_EQ(set.proposals[0].confidence, 1.0);
  PointSet none;
  EXPECT_DOUBLE_EQ(propose_baseline(g, none).proposals[0].confidence, 0.0);
}

TEST(Baseline, HotSquareMatchesTruth) {
  SceneSpec spec;
  spec.width = spec.height = 80;
  spec.noise_sigma = 2.0;
  spec.seed = 3;
  spec.blobs.push_back({40, 40, 12, 400, BlobShape::square});
  const auto scene = gen_scene(spec);
  const auto set = propose_baseline(scene.thermal, some_points());
  EXPECT_GE(iou(set.proposals[0].mask, scene.truth), 0.95);
}

TEST(Baseline, ConstantImageGivesEmptyMasks) {
  const auto set = propose_baseline(GrayImage(10, 10, 5), PointSet{});
  for (const auto& p : set.proposals) EXPECT_EQ(count_nonzero(p.mask), 0u);
}

TEST(Wire, RequestShape) {
  const auto req = build_predict_request(test_image(8, 6), some_points());
  ASSERT_TRUE(req.contains("image_png_b64"));
  ASSERT_EQ(req["points"].size(), 3u);
  EXPECT_EQ(req["points"][0], (nlohmann::json{{"x", 3}, {"y", 4}, {"label", 1}}));
  EXPECT_EQ(req["points"][2]["label"], 0);
  EXPECT_EQ(decode_png(base64::decode(req["image_png_b64"].get<std::string>())), test_image(8, 6));
}

TEST(Wire, ResponseValidation) {
  ProposalSet set;
  for (std::size_t k = 0; k < 3; ++k) {
    set.proposals[k].mask = ft::rect_mask(8, 8, 0, 0, k + 1, 8);
    set.proposals[k].confidence = 0.25 * double(k);
  }
  const auto good = to_wire_json(set);
  const auto parsed = parse_predict_response(good, 8, 8);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(parsed.proposals[k], set.proposals[k]);

  EXPECT_THROW(parse_predict_response(good, 9, 8), ProtocolError);
  auto bad = good;
  bad["scores"][2] = -0.1;
  EXPECT_THROW(parse_predict_response(bad, 8, 8), ProtocolError);
  bad = good;
  bad["masks_png_b64"][0] = "!!!";
  EXPECT_THROW(parse_predict_response(bad, 8, 8), ProtocolError);
  bad = good;
  bad.erase("scores");
  EXPECT_THROW(parse_predict_response(bad, 8, 8), ProtocolError);

  Image8 grey = make_image(8, 8, 1);
  grey.data[0] = 128;
  bad = good;
  bad["masks_png_b64"][1] = base64::encode(encode_png(grey));
  EXPECT_THROW(parse_predict_response(bad, 8, 8), ProtocolError);
  bad = good;
  bad["masks_png_b64"][1] = base64::encode(encode_png(make_image(8, 8, 3)));
  EXPECT_THROW(parse_predict_response(bad, 8, 8), ProtocolError);
}

TEST(External, LoopbackReturnsStubMasksBitExactly) {
  ft::StubProposer stub;
  const auto img = test_image(30, 21);
  const auto set = propose_external(img, some_points(), {stub.endpoint(), std::chrono::seconds(10)});
  EXPECT_EQ(set.source, ProposalSource::external);
  const auto expect = ft::StubProposer::known_masks(30, 21);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(set.proposals[k].mask, expect[k]);
    EXPECT_EQ(set.proposals[k].confidence, ft::StubProposer::kScores[k]);
  }
  const auto req = stub.last_request();
  EXPECT_EQ(req["points"].size(), 3u);
  EXPECT_EQ(decode_png(base64::decode(req["image_png_b64"].get<std::string>())), img);
}

TEST(External, EndpointWithBasePath) {
  ft::StubProposer stub;
  EXPECT_THROW(propose_external(test_image(8, 8), some_points(), {stub.endpoint() + "/v1", std::chrono::seconds(5)}),
               ProtocolError);  // /v1/predict is not served
  EXPECT_NO_THROW(propose_external(test_image(8, 8), some_points(), {stub.endpoint() + "/", std::chrono::seconds(5)}));
}

TEST(External, TwoMasksIsProtocolError) {
  ft::StubProposer stub;
  stub.set_mode(ft::StubMode::two_masks);
  try {
    propose_external(test_image(8, 8), some_points(), {stub.endpoint(), std::chrono::seconds(5)});
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 3 masks"), std::string::npos) << e.what();
  }
}

TEST(External, ScoreOutOfRangeNamesIndex) {
  ft::StubProposer stub;
  stub.set_mode(ft::StubMode::score_out_of_range);
  try {
    propose_external(test_image(8, 8), some_points(), {stub.endpoint(), std::chrono::seconds(5)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("score 1"), std::string::npos) << e.what();
  }
}

TEST(External, WrongDimensionsRejected) {
  ft::StubProposer stub;
  stub.set_mode(ft::StubMode::wrong_dims);
  EXPECT_THROW(propose_external(test_image(8, 8), some_points(), {stub.endpoint(), std::chrono::seconds(5)}),
               ProtocolError);
}

TEST(External, TransportFailures) {
  ft::StubProposer stub;
  stub.set_mode(ft::StubMode::not_json);
  EXPECT_THROW(propose_external(test_image(8, 8), some_points(), {stub.endpoint(), std::chrono::seconds(5)}),
               ProtocolError);
  stub.set_mode(ft::StubMode::http_error);
  EXPECT_THROW(propose_external(test_image(8, 8), some_points(), {stub.endpoint(), std::chrono::seconds(5)}),
               ProtocolError);
  EXPECT_THROW(propose_external(test_image(8, 8), some_points(), {"http://127.0.0.1:1", std::chrono::seconds(2)}),
               ProtocolError);
  EXPECT_THROW(propose_external(test_image(8, 8), PointSet{}, {stub.endpoint(), std::chrono::seconds(2)}),
               ValidationError);
}
