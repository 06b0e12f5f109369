#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmv/embedding.hpp"
#include "mmv/model.hpp"
#include "mmv/process.hpp"
#include "mmv/shots.hpp"

namespace mmv {

inline constexpr std::string_view kSidecarProtocolVersion = "vps/1";

struct SidecarCapabilities {
  int embedding_dim = 0;
  bool supports_shot_scores = false;
  bool supports_transcribe = false;
  std::vector<std::string> model_ids;
};

struct SidecarOptions {
  std::chrono::milliseconds handshake_timeout{30000};
  std::chrono::milliseconds read_deadline{30000};
  int jpeg_quality = 90;
};

// Newline-delimited JSON over the child's stdio (docs/sidecar-protocol.md).
// Requests may be pipelined; replies must come back in request order.
class SidecarClient {
 public:
  // Starts `<command...> --stdio`. Throws Error{SidecarUnavailable} if the
  // process cannot be started.
  static std::unique_ptr<SidecarClient> launch(const std::vector<std::string>& command,
                                               const SidecarOptions& options = {});
  ~SidecarClient();

  // Throws Error{HandshakeTimeout} when no hello reply arrives in time and
  // Error{SidecarUnavailable} for an error reply such as "version_mismatch".
  const SidecarCapabilities& handshake();
  const SidecarCapabilities& capabilities() const { return caps_; }

  // Low-level pipelining. send() returns the request id; receive() reads the
  // next reply and checks it answers the oldest outstanding id. An error reply
  // throws Error{SidecarUnavailable} carrying the code; a dead or silent
  // sidecar throws Error{TransportError}.
  std::int64_t send(std::string_view op, const json& payload);
  json receive();
  std::size_t outstanding() const { return pending_.size(); }

  std::vector<double> shot_scores(std::span<const RgbImage* const> frames);
  std::vector<std::vector<double>> embed(std::span<const RgbImage* const> frames);

  ChildProcess& process() { return child_; }

 private:
  SidecarClient(ChildProcess child, SidecarOptions options);
  json receive_within(std::chrono::milliseconds deadline);
  json encode_frames(std::span<const RgbImage* const> frames) const;

  ChildProcess child_;
  SidecarOptions options_;
  SidecarCapabilities caps_;
  bool handshaken_ = false;
  std::int64_t next_id_ = 1;
  std::deque<std::int64_t> pending_;
};

// Adapters so the shot detector and embedder can use a sidecar. Transport
// failures surface as Error{SidecarUnavailable} so callers fall back.
class SidecarEmbedder final : public FrameEmbedder {
 public:
  explicit SidecarEmbedder(SidecarClient& client) : client_(client) {}
  std::vector<Embedding> embed(FrameList frames) override;

 private:
  SidecarClient& client_;
};

class SidecarScorer final : public TransitionScorer {
 public:
  explicit SidecarScorer(SidecarClient& client) : client_(client) {}
  std::vector<double> gap_scores(const FrameSequence& seq) override;

 private:
  SidecarClient& client_;
};

// Splits a configured command line on whitespace.
std::vector<std::string> split_command(std::string_view command);

}  // namespace mmv
