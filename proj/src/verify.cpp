// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"
#include "edgeshard/simulator.hpp"

namespace edgeshard {

namespace {

using u128 = unsigned __int128;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  const u128 p = static_cast<u128>(a) * b;
  // 2^61 = 1 (mod p).
  std::uint64_t r = static_cast<std::uint64_t>(p & kVerifyPrime) + static_cast<std::uint64_t>(p >> 61);
  if (r >= kVerifyPrime) r -= kVerifyPrime;
  return r;
}

std::uint64_t addmod(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = a + b;
  if (r >= kVerifyPrime) r -= kVerifyPrime;
  return r;
}

std::uint64_t field_element(std::mt19937_64& rng) {
  for (;;) {
    const std::uint64_t x = rng() >> 3;
    if (x < kVerifyPrime) return x;
  }
}

template <typename M>
void check_dims(const M& a, const M& b, const M& c) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols) {
    throw ConfigError("verify", fmt::format("dimension mismatch: {}x{} * {}x{} vs {}x{}", a.rows, a.cols, b.rows,
                                            b.cols, c.rows, c.cols));
  }
}

}  // namespace

IntMatrix random_int_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  IntMatrix m(rows, cols);
  for (auto& x : m.data) x = field_element(rng);
  return m;
}

IntMatrix multiply(const IntMatrix& a, const IntMatrix& b) {
  if (a.cols != b.rows) throw ConfigError("verify", "dimension mismatch");
  IntMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const std::uint64_t x = a.at(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) = addmod(c.at(i, j), mulmod(x, b.at(k, j)));
    }
  return c;
}

RealMatrix multiply(const RealMatrix& a, const RealMatrix& b) {
  if (a.cols != b.rows) throw ConfigError("verify", "dimension mismatch");
  RealMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += a.at(i, k) * b.at(k, j);
  return c;
}

bool verify_gemm_output(const IntMatrix& a, const IntMatrix& b, const IntMatrix& c, int trials,
                        std::mt19937_64& rng) {
  check_dims(a, b, c);
  for (int t = 0; t < trials; ++t) {
    std::vector<std::uint64_t> r(a.rows), s(b.cols);
    for (auto& x : r) x = field_element(rng);
    for (auto& x : s) x = field_element(rng);
    // r^T A, B s, C s.
    std::vector<std::uint64_t> ra(a.cols, 0), bs(b.rows, 0), cs(c.rows, 0);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t k = 0; k < a.cols; ++k) ra[k] = addmod(ra[k], mulmod(r[i], a.at(i, k)));
    for (std::size_t k = 0; k < b.rows; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) bs[k] = addmod(bs[k], mulmod(b.at(k, j), s[j]));
    for (std::size_t i = 0; i < c.rows; ++i)
      for (std::size_t j = 0; j < c.cols; ++j) cs[i] = addmod(cs[i], mulmod(c.at(i, j), s[j]));
    std::uint64_t lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < c.rows; ++i) lhs = addmod(lhs, mulmod(r[i], cs[i]));
    for (std::size_t k = 0; k < a.cols; ++k) rhs = addmod(rhs, mulmod(ra[k], bs[k]));
    if (lhs != rhs) return false;
  }
  return true;
}

bool verify_gemm_output(const RealMatrix& a, const RealMatrix& b, const RealMatrix& c, int trials,
                        std::mt19937_64& rng) {
  check_dims(a, b, c);
  std::normal_distribution<double> gauss;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> r(a.rows), s(b.cols);
    for (auto& x : r) x = gauss(rng);
    for (auto& x : s) x = gauss(rng);
    std::vector<double> ra(a.cols, 0), bs(b.rows, 0);
    double lhs = 0, rhs = 0, scale = 0;
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t k = 0; k < a.cols; ++k) ra[k] += r[i] * a.at(i, k);
    for (std::size_t k = 0; k < b.rows; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) bs[k] += b.at(k, j) * s[j];
    for (std::size_t i = 0; i < c.rows; ++i)
      for (std::size_t j = 0; j < c.cols; ++j) {
        const double v = r[i] * c.at(i, j) * s[j];
        lhs += v;
        scale += std::abs(v);
      }
    for (std::size_t k = 0; k < a.cols; ++k) {
      rhs += ra[k] * bs[k];
      scale += std::abs(ra[k] * bs[k]);
    }
    if (std::abs(lhs - rhs) > 1e-6 * std::max(scale, 1e-300)) return false;
  }
  return true;
}

}  // namespace edgeshard
