// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive Otsu references over a 256-bin histogram. Both compare exact
// rationals; intended for images of at most 2^16 pixels.

#pragma once

#include <array>
#include <cstdint>

namespace vat::oracle {

__extension__ typedef unsigned __int128 u128;
__extension__ typedef __int128 i128;

/// argmax_t w0 w1 (mu0 - mu1)^2 = (s0 n1 - s1 n0)^2 / (N^2 n0 n1); smallest t on ties.
inline int otsu_between_class(const std::array<std::uint64_t, 256>& hist) {
  std::uint64_t N = 0;
  std::uint64_t S = 0;
  for (int v = 0; v < 256; ++v) {
    N += hist[v];
    S += hist[v] * static_cast<std::uint64_t>(v);
  }
  int best = 0;
  u128 bnum = 0;
  u128 bden = 1;
  for (int t = 0; t < 256; ++t) {
    std::uint64_t n0 = 0;
    std::uint64_t s0 = 0;
    for (int v = 0; v <= t; ++v) {
      n0 += hist[v];
      s0 += hist[v] * static_cast<std::uint64_t>(v);
    }
    const std::uint64_t n1 = N - n0;
    const std::uint64_t s1 = S - s0;
    if (n0 == 0 || n1 == 0) continue;
    const i128 d = static_cast<i128>(s0) * n1 - static_cast<i128>(s1) * n0;
    const u128 num = static_cast<u128>(d < 0 ? -d : d) * static_cast<u128>(d < 0 ? -d : d);
    const u128 den = static_cast<u128>(n0) * n1;
    if (num * bden > bnum * den) {
      best = t;
      bnum = num;
      bden = den;
    }
  }
  return best;
}

/// argmin_t of the within-class scatter, i.e. argmax_t (s0^2 n1 + s1^2 n0) / (n0 n1).
inline int otsu_within_class(const std::array<std::uint64_t, 256>& hist) {
  std::uint64_t N = 0;
  std::uint64_t S = 0;
  for (int v = 0; v < 256; ++v) {
    N += hist[v];
    S += hist[v] * static_cast<std::uint64_t>(v);
  }
  int best = 0;
  bool have = false;
  u128 bnum = 0;
  u128 bden = 1;
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist[t];
    s0 += hist[t] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = N - n0;
    const std::uint64_t s1 = S - s0;
    if (n0 == 0 || n1 == 0) continue;
    const u128 num = static_cast<u128>(s0) * s0 * n1 + static_cast<u128>(s1) * s1 * n0;
    const u128 den = static_cast<u128>(n0) * n1;
    if (!have || num * bden > bnum * den) {
      best = t;
      bnum = num;
      bden = den;
      have = true;
    }
  }
  return best;
}

}  // namespace vat::oracle
