// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace vat {

class RasterImage;

/// Lowercase hex SHA-256 of `bytes` (64 characters).
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
/// Throws vat::Error on malformed input.
std::string base64_decode(std::string_view text);

/// Content hash of a decoded image: SHA-256 over a "WxHxC" header plus the
/// raw samples, independent of any encoder.
std::string image_digest(const RasterImage& img);

}  // namespace vat
