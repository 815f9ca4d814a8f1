// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vat {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// image-core
class DecodeError : public Error { using Error::Error; };
class EncodeError : public Error { using Error::Error; };

// abstraction-engine
class ImageTooSmall : public Error { using Error::Error; };
class SketcherUnavailable : public Error { using Error::Error; };
class SketcherProtocolError : public Error { using Error::Error; };

// region-compositor
class InvalidGrid : public Error { using Error::Error; };
class DimensionMismatch : public Error { using Error::Error; };

// prompt-builder
class MissingAbstract : public Error { using Error::Error; };

// model-gateway
class GatewayError : public Error { using Error::Error; };
class AuthError : public GatewayError { using GatewayError::GatewayError; };
class RateLimited : public GatewayError { using GatewayError::GatewayError; };
class TransportError : public GatewayError { using GatewayError::GatewayError; };
class BackendRefusal : public GatewayError { using GatewayError::GatewayError; };
class ScriptError : public GatewayError { using GatewayError::GatewayError; };
class ConfigError : public Error { using Error::Error; };

// eval-harness
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ": field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};
class MissingImage : public Error { using Error::Error; };
class UnsupportedBenchmark : public Error { using Error::Error; };
class EmptyRun : public Error { using Error::Error; };
class UnknownModel : public Error { using Error::Error; };

// ablation-runner
class MissingGtBoxes : public Error { using Error::Error; };
class LogprobsUnsupported : public Error { using Error::Error; };

}  // namespace vat
