// SPDX-License-Identifier: Apache-2.0

#include "vat/response_cache.hpp"

#include <fstream>
#include <random>
#include <system_error>

#include "vat/digest.hpp"
#include "vat/error.hpp"

namespace vat {

namespace fs = std::filesystem;

ResponseCache::ResponseCache(std::optional<fs::path> dir) : dir_(std::move(dir)) {
  if (dir_) fs::create_directories(*dir_);
}

fs::path ResponseCache::path_for(const std::string& digest) const {
  if (!dir_) return {};
  return *dir_ / digest.substr(0, 2) / (digest + ".json");
}

std::optional<ModelResponse> ResponseCache::get(const std::string& digest) const {
  {
    std::shared_lock lock(mu_);
    if (auto it = memory_.find(digest); it != memory_.end()) return it->second;
  }
  if (!dir_) return std::nullopt;
  const fs::path path = path_for(digest);
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    if (j.at("digest").get<std::string>() != digest) return std::nullopt;
    ModelResponse r = response_from_json(j.at("response"));
    std::unique_lock lock(mu_);
    memory_.emplace(digest, r);
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries behave as misses
  }
}

bool ResponseCache::put(const std::string& digest, const nlohmann::json& canonical_request,
                        const ModelResponse& response) {
  std::unique_lock lock(mu_);
  if (memory_.contains(digest)) return false;
  ModelResponse stored = response;
  stored.cached = false;
  if (dir_) {
    const fs::path path = path_for(digest);
    std::error_code ec;
    if (fs::exists(path, ec)) {
      memory_.emplace(digest, std::move(stored));
      return false;
    }
    const nlohmann::json entry = {
        {"digest", digest}, {"request", canonical_request}, {"response", to_json(stored)}};
    fs::create_directories(path.parent_path());
    // Write-then-rename keeps readers from ever seeing a partial entry.
    const fs::path tmp = path.string() + ".tmp" + std::to_string(std::random_device{}());
    write_file(tmp, entry.dump(2));
    fs::rename(tmp, path);
  }
  memory_.emplace(digest, std::move(stored));
  ++writes_;
  return true;
}

ResponseCache::Summary ResponseCache::scan(const fs::path& dir) {
  Summary s;
  if (!fs::exists(dir)) return s;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    ++s.entries;
    s.bytes += entry.file_size();
    try {
      const auto j = nlohmann::json::parse(read_file(entry.path()));
      const auto digest = j.at("digest").get<std::string>();
      if (digest != entry.path().stem().string() ||
          sha256_hex(j.at("request").dump()) != digest) {
        ++s.corrupt;
      }
      (void)response_from_json(j.at("response"));
    } catch (const std::exception&) {
      ++s.corrupt;
    }
  }
  return s;
}

std::size_t ResponseCache::clear(const fs::path& dir) {
  std::size_t removed = 0;
  if (!fs::exists(dir)) return 0;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  for (const auto& f : files) removed += fs::remove(f) ? 1 : 0;
  return removed;
}

}  // namespace vat
