#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmv {

// Every named failure mode in the pipeline. Callers branch on the code; the
// message is for humans.
enum class Errc {
  // ingestion
  EmptyCase,
  UnsupportedMedia,
  EmptyMetadata,
  InvalidCase,
  // media
  DecodeFailure,
  DimensionMismatch,
  EncodeFailure,
  NoAudio,
  // clustering
  KTooLarge,
  DimMismatch,
  SingleCluster,
  InvalidArgument,
  // retrieval
  NoKeywords,
  QuotaExceeded,
  PersistFailure,
  // transport / clients
  TransportError,
  RateLimited,
  AuthError,
  ExhaustedRetries,
  OfflineViolation,
  SidecarUnavailable,
  HandshakeTimeout,
  // verification
  MissingBinding,
  NoJsonFound,
  SchemaViolation,
  BadDate,
  BadCoordinates,
  NoImages,
  // config
  InvalidConfig,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mmv
