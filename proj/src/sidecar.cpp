#include "mmv/sidecar.hpp"

#include <cctype>
#include <cmath>

#include "mmv/error.hpp"
#include "mmv/image.hpp"

namespace mmv {

SidecarClient::SidecarClient(ChildProcess child, SidecarOptions options)
    : child_(std::move(child)), options_(options) {}

SidecarClient::~SidecarClient() {
  if (child_.running()) {
    child_.close_stdin();
    child_.kill();
    child_.wait();
  }
}

std::unique_ptr<SidecarClient> SidecarClient::launch(const std::vector<std::string>& command,
                                                     const SidecarOptions& options) {
  if (command.empty()) throw Error(Errc::SidecarUnavailable, "no sidecar command configured");
  std::vector<std::string> argv = command;
  argv.emplace_back("--stdio");
  try {
    return std::unique_ptr<SidecarClient>(new SidecarClient(ChildProcess::spawn(argv, false), options));
  } catch (const Error& e) {
    throw Error(Errc::SidecarUnavailable, e.what());
  }
}

std::int64_t SidecarClient::send(std::string_view op, const json& payload) {
  const std::int64_t id = next_id_++;
  const json frame = {{"v", kSidecarProtocolVersion}, {"id", id}, {"op", op}, {"payload", payload}};
  try {
    child_.write_all(frame.dump() + "\n");
  } catch (const Error& e) {
    throw Error(Errc::TransportError, std::string("sidecar write failed: ") + e.what());
  }
  pending_.push_back(id);
  return id;
}

json SidecarClient::receive() { return receive_within(options_.read_deadline); }

json SidecarClient::receive_within(std::chrono::milliseconds deadline) {
  if (pending_.empty()) throw Error(Errc::InvalidArgument, "no outstanding sidecar request");
  const std::int64_t expected = pending_.front();
  std::optional<std::string> line = child_.read_line(deadline);
  if (!line) throw Error(Errc::TransportError, "sidecar closed its output");
  const json reply = json::parse(*line, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("id")) {
    throw Error(Errc::TransportError, "malformed sidecar reply");
  }
  const std::int64_t id = reply["id"].get<std::int64_t>();
  if (id != expected) {
    throw Error(Errc::TransportError,
                "sidecar answered id " + std::to_string(id) + " while " + std::to_string(expected) + " was due");
  }
  pending_.pop_front();
  if (!reply.value("ok", false)) {
    throw Error(Errc::SidecarUnavailable, "sidecar error: " + reply.value("error", std::string("unknown")));
  }
  return reply.value("body", json::object());
}

const SidecarCapabilities& SidecarClient::handshake() {
  if (handshaken_) return caps_;
  send("hello", {{"version", kSidecarProtocolVersion}});
  json body;
  try {
    body = receive_within(options_.handshake_timeout);
  } catch (const Error& e) {
    if (e.code() == Errc::TransportError) throw Error(Errc::HandshakeTimeout, e.what());
    throw;
  }
  caps_.embedding_dim = body.value("embedding_dim", 0);
  caps_.supports_shot_scores = body.value("supports_shot_scores", false);
  caps_.supports_transcribe = body.value("supports_transcribe", false);
  caps_.model_ids = body.value("model_ids", std::vector<std::string>{});
  handshaken_ = true;
  return caps_;
}

json SidecarClient::encode_frames(std::span<const RgbImage* const> frames) const {
  json images = json::array();
  for (const RgbImage* f : frames) images.push_back(base64_encode(encode_jpeg(*f, options_.jpeg_quality)));
  return {{"images", images}};
}

std::vector<double> SidecarClient::shot_scores(std::span<const RgbImage* const> frames) {
  handshake();
  send("shot_scores", encode_frames(frames));
  const json body = receive();
  auto scores = body.at("scores").get<std::vector<double>>();
  if (scores.size() + 1 != frames.size()) throw Error(Errc::TransportError, "sidecar returned the wrong score count");
  return scores;
}

std::vector<std::vector<double>> SidecarClient::embed(std::span<const RgbImage* const> frames) {
  handshake();
  send("embed", encode_frames(frames));
  const json body = receive();
  auto vectors = body.at("vectors").get<std::vector<std::vector<double>>>();
  if (vectors.size() != frames.size()) throw Error(Errc::TransportError, "sidecar returned the wrong vector count");
  for (const auto& v : vectors) {
    if (static_cast<int>(v.size()) != caps_.embedding_dim) {
      throw Error(Errc::DimMismatch, "sidecar vector length differs from the handshake dim");
    }
  }
  return vectors;
}

std::vector<Embedding> SidecarEmbedder::embed(FrameList frames) {
  try {
    auto vectors = client_.embed(frames);
    std::string id = "sidecar";
    if (!client_.capabilities().model_ids.empty()) id += ":" + client_.capabilities().model_ids.front();
    std::vector<Embedding> out;
    out.reserve(vectors.size());
    for (auto& v : vectors) out.push_back({std::move(v), id});
    return out;
  } catch (const Error& e) {
    if (e.code() == Errc::DimMismatch) throw;
    throw Error(Errc::SidecarUnavailable, e.what());
  }
}

std::vector<double> SidecarScorer::gap_scores(const FrameSequence& seq) {
  if (seq.size() < 2) return {};
  try {
    const auto frames = frame_pointers(seq);
    return client_.shot_scores(frames);
  } catch (const Error& e) {
    throw Error(Errc::SidecarUnavailable, e.what());
  }
}

std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> out;
  std::string current;
  for (char c : command) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace mmv
