// SPDX-License-Identifier: Apache-2.0

#include "vat/sketcher_client.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "vat/digest.hpp"
#include "vat/error.hpp"

namespace vat {

namespace {

httplib::Client make_client(const detail::SplitUrl& url, std::chrono::milliseconds timeout) {
  httplib::Client cli(url.origin);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  return cli;
}

std::string describe(const httplib::Result& res) {
  return httplib::to_string(res.error());
}

}  // namespace

HttpSketchClient::HttpSketchClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

SketchResult HttpSketchClient::sketch(std::string_view png, std::string_view style) {
  const auto url = detail::split_url(base_url_);
  auto cli = make_client(url, timeout_);
  const nlohmann::json body = {{"image", base64_encode(png)}, {"style", style}};
  auto res = cli.Post(url.prefix + "/v1/sketch", body.dump(), "application/json");
  if (!res) {
    throw SketcherUnavailable("sketcher at " + base_url_ + " unreachable: " + describe(res));
  }
  if (res->status == 503) {
    throw SketcherUnavailable("sketcher at " + base_url_ + " not ready: " + res->body);
  }
  if (res->status != 200) {
    throw SketcherProtocolError("sketcher returned HTTP " + std::to_string(res->status) + ": " +
                                res->body);
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    SketchResult out;
    out.png = base64_decode(j.at("image").get<std::string>());
    out.model_id = j.value("model_id", std::string{});
    out.millis = j.value("millis", 0.0);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw SketcherProtocolError(std::string("malformed sketcher response: ") + e.what());
  } catch (const Error& e) {
    throw SketcherProtocolError(std::string("malformed sketcher response: ") + e.what());
  }
}

std::vector<std::string> HttpSketchClient::styles() {
  const auto url = detail::split_url(base_url_);
  auto cli = make_client(url, timeout_);
  auto res = cli.Get(url.prefix + "/v1/styles");
  if (!res) {
    throw SketcherUnavailable("sketcher at " + base_url_ + " unreachable: " + describe(res));
  }
  if (res->status != 200) {
    throw SketcherProtocolError("GET /v1/styles returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& list = j.is_array() ? j : j.at("styles");
    return list.get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw SketcherProtocolError(std::string("malformed /v1/styles response: ") + e.what());
  }
}

bool HttpSketchClient::healthy() {
  const auto url = detail::split_url(base_url_);
  auto cli = make_client(url, timeout_);
  auto res = cli.Get(url.prefix + "/healthz");
  return res && res->status == 200;
}

}  // namespace vat
