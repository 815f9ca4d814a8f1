// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "vat/gateway.hpp"

namespace vat {

/// Content-addressed response store. On disk each entry lives at
/// `<dir>/<first two hex digits>/<digest>.json` and holds
/// {"digest", "request", "response"}. Entries are written once: a second
/// put() for an existing digest is a no-op.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<ModelResponse> get(const std::string& digest) const;
  /// Returns true when this call created the entry.
  bool put(const std::string& digest, const nlohmann::json& canonical_request,
           const ModelResponse& response);

  std::uint64_t writes() const noexcept { return writes_.load(); }
  const std::optional<std::filesystem::path>& dir() const noexcept { return dir_; }

  std::filesystem::path path_for(const std::string& digest) const;

  struct Summary {
    std::size_t entries = 0;
    std::uintmax_t bytes = 0;
    std::size_t corrupt = 0;  // unreadable or digest mismatch
  };
  /// Scans the on-disk store, re-hashing each stored request.
  static Summary scan(const std::filesystem::path& dir);
  /// Removes every entry; returns the number removed.
  static std::size_t clear(const std::filesystem::path& dir);

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mu_;
  mutable std::map<std::string, ModelResponse> memory_;
  std::atomic<std::uint64_t> writes_{0};
};

}  // namespace vat
