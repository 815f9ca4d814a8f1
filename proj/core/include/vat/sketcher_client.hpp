// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace vat {

struct SketchResult {
  std::string png;  // encoded PNG as returned by the service
  std::string model_id;
  double millis = 0.0;
};

/// Producer of neural sketch styles.
class SketchClient {
 public:
  virtual ~SketchClient() = default;

  /// `style` is the wire name (photosketch, contour, anime, opensketch, canny-fallback).
  virtual SketchResult sketch(std::string_view png, std::string_view style) = 0;
  virtual std::vector<std::string> styles() = 0;
};

/// Client for the sketcher HTTP protocol:
///   POST /v1/sketch  {"image": <base64 PNG>, "style": <name>}
///        -> 200 {"image": <base64 PNG>, "model_id": <str>, "millis": <number>}
///   GET  /v1/styles  -> {"styles": [<name>...]}   (a bare array is also accepted)
///   GET  /healthz    -> 200 when ready
///
/// Connection failures and 503 raise SketcherUnavailable; any other non-200
/// status or malformed body raises SketcherProtocolError.
class HttpSketchClient final : public SketchClient {
 public:
  explicit HttpSketchClient(std::string base_url,
                            std::chrono::milliseconds timeout = std::chrono::seconds(120));

  SketchResult sketch(std::string_view png, std::string_view style) override;
  std::vector<std::string> styles() override;
  bool healthy();

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace vat
