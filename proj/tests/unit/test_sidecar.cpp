#include <catch_amalgamated.hpp>

#include "mmv/embedding.hpp"
#include "mmv/error.hpp"
#include "mmv/sidecar.hpp"
#include "synth_media.hpp"

using namespace mmv;
using namespace std::chrono_literals;

namespace {

SidecarOptions quick() {
  SidecarOptions o;
  o.handshake_timeout = 1500ms;
  o.read_deadline = 1500ms;
  return o;
}

std::unique_ptr<SidecarClient> start(const std::string& mode, std::vector<std::string> extra = {}) {
  std::vector<std::string> cmd = {MMV_FAKE_SIDECAR, "--mode=" + mode};
  cmd.insert(cmd.end(), extra.begin(), extra.end());
  return SidecarClient::launch(cmd, quick());
}

// What the fake sidecar computes for one image string.
std::vector<double> fake_vector(const std::string& s, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) v[i % v.size()] += static_cast<unsigned char>(s[i]) / 255.0;
  return v;
}

std::optional<Errc> code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("handshake reports capabilities") {
  auto sc = start("normal", {"--dim", "12"});
  const auto& caps = sc->handshake();
  CHECK(caps.embedding_dim == 12);
  CHECK(caps.supports_shot_scores);
  CHECK_FALSE(caps.supports_transcribe);
  CHECK(caps.model_ids == std::vector<std::string>{"fake-vit"});
  CHECK(&sc->handshake() == &caps);
}

TEST_CASE("pipelined requests come back in order") {
  auto sc = start("normal");
  sc->handshake();
  std::vector<std::string> payloads;
  for (int i = 0; i < 100; ++i) {
    payloads.push_back("frame-" + std::to_string(i * 7919));
    sc->send("embed", {{"images", {payloads.back()}}});
  }
  CHECK(sc->outstanding() == 100);
  for (int i = 0; i < 100; ++i) {
    const json body = sc->receive();
    CHECK(body["vectors"][0].get<std::vector<double>>() == fake_vector(payloads[static_cast<std::size_t>(i)], 8));
  }
  CHECK(sc->outstanding() == 0);
  CHECK(code_of([&] { sc->receive(); }) == Errc::InvalidArgument);
}

TEST_CASE("out-of-order replies are rejected") {
  auto sc = start("swap");
  sc->handshake();
  sc->send("embed", {{"images", {"a"}}});
  sc->send("embed", {{"images", {"b"}}});
  try {
    sc->receive();
    FAIL("expected TransportError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TransportError);
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("answered id 3 while 2 was due"));
  }
}

TEST_CASE("a hung sidecar times out within the read deadline") {
  auto sc = start("hang-after=1");
  sc->handshake();
  const RgbImage img = testing::scene_frame(1, 16, 16);
  const RgbImage* frames[] = {&img};
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(code_of([&] { sc->embed(frames); }) == Errc::TransportError);
  const auto waited = std::chrono::steady_clock::now() - t0;
  CHECK(waited >= 1400ms);
  CHECK(waited < 5s);
}

TEST_CASE("handshake failures") {
  CHECK(code_of([] { start("version-mismatch")->handshake(); }) == Errc::SidecarUnavailable);

  auto silent = start("silent");
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(code_of([&] { silent->handshake(); }) == Errc::HandshakeTimeout);
  CHECK(std::chrono::steady_clock::now() - t0 < 5s);

  CHECK(code_of([] { SidecarClient::launch({}); }) == Errc::SidecarUnavailable);
  const auto missing = code_of([] { SidecarClient::launch({"/nonexistent/sidecar"}, quick())->handshake(); });
  CHECK((missing == Errc::SidecarUnavailable || missing == Errc::HandshakeTimeout));
}

TEST_CASE("embedding through the sidecar") {
  auto sc = start("normal");
  const RgbImage a = testing::scene_frame(1, 24, 16);
  const RgbImage b = testing::scene_frame(2, 24, 16);
  const RgbImage* frames[] = {&a, &b, &a};
  SidecarEmbedder embedder(*sc);
  EmbedderConfig cfg;
  cfg.embedder = EmbedderKind::sidecar;
  const auto out = embed_frames(frames, cfg, &embedder);
  REQUIRE(out.size() == 3);
  CHECK(out[0].extractor_id == "sidecar:fake-vit");
  CHECK(out[0].vector.size() == 8);
  CHECK(out[0].vector == out[2].vector);
  CHECK(out[0].vector != out[1].vector);

  auto bad = start("normal", {"--bad-dim"});
  CHECK(code_of([&] { bad->embed(frames); }) == Errc::DimMismatch);
  SidecarEmbedder bad_embedder(*bad);
  CHECK(code_of([&] { embed_frames(frames, cfg, &bad_embedder); }) == Errc::DimMismatch);
}

TEST_CASE("a dying or failing sidecar falls back to the classical embedder") {
  const RgbImage a = testing::scene_frame(1, 24, 16);
  const RgbImage* frames[] = {&a};
  EmbedderConfig cfg;
  cfg.embedder = EmbedderKind::sidecar;

  for (const char* mode : {"die-after=1", "error-embed"}) {
    auto sc = start(mode);
    SidecarEmbedder embedder(*sc);
    const auto out = embed_frames(frames, cfg, &embedder);
    REQUIRE(out.size() == 1);
    CHECK(out[0].extractor_id == kClassicalExtractorId);
    CHECK(out[0].vector.size() == kClassicalDim);
  }

  auto dead = start("die-after=1");
  SidecarEmbedder strict(*dead);
  cfg.fallback_to_classical = false;
  CHECK(code_of([&] { embed_frames(frames, cfg, &strict); }) == Errc::SidecarUnavailable);
}

TEST_CASE("shot scores through the sidecar") {
  auto sc = start("normal");
  FrameSequence seq;
  seq.asset_id = "v.mp4";
  for (int scene : {1, 1, 2, 2, 2}) {
    const auto i = static_cast<std::int64_t>(seq.frames.size());
    seq.frames.push_back({{"v.mp4", i, static_cast<double>(i)}, testing::scene_frame(scene, 16, 16)});
  }
  SidecarScorer scorer(*sc);
  CHECK(scorer.gap_scores(seq) == std::vector<double>{0.0, 1.0, 0.0, 0.0});

  auto dead = start("die-after=1");
  SidecarScorer broken(*dead);
  CHECK(code_of([&] { broken.gap_scores(seq); }) == Errc::SidecarUnavailable);
}

TEST_CASE("command splitting") {
  CHECK(split_command("  python3 -m sidecar   --gpu 0 ") ==
        std::vector<std::string>{"python3", "-m", "sidecar", "--gpu", "0"});
  CHECK(split_command("").empty());
}
