/*
 * Copyright 2026 The FedMMF Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedmmf/field.hpp"

#include <cmath>
#include <string>

#include "fedmmf/errors.hpp"

namespace fedmmf {
namespace field {

FieldElement pow(FieldElement base, std::uint64_t exponent, FieldElement p) {
  FieldElement result = 1 % p;
  base %= p;
  while (exponent > 0) {
    if (exponent & 1) result = mul(result, base, p);
    base = mul(base, base, p);
    exponent >>= 1;
  }
  return result;
}

FieldElement inv(FieldElement a, FieldElement p) {
  if (a % p == 0) throw std::domain_error("field::inv: zero has no inverse");
  return pow(a, p - 2, p);
}

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t q : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % q == 0) return n == q;
  }
  std::uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  // These bases are a deterministic witness set for all 64-bit integers.
  for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    FieldElement x = pow(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = mul(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

}  // namespace field

void FieldParams::validate(std::uint64_t n_summands, double max_abs) const {
  if (prime >= (FieldElement{1} << 63) || !field::is_prime(prime))
    throw ConfigError("field prime must be a prime below 2^63");
  if (scale_bits < 0 || scale_bits > 52) throw ConfigError("scale_bits must lie in [0, 52]");
  if (!(max_abs > 0.0) || !std::isfinite(max_abs)) throw ConfigError("max gradient magnitude must be positive");
  const double budget = static_cast<double>(n_summands) * (max_abs * scale() + 0.5);
  if (!(budget < static_cast<double>((prime - 1) / 2)))
    throw ConfigError("field too small: " + std::to_string(n_summands) + " summands of magnitude " +
                      std::to_string(max_abs) + " can wrap");
}

FieldVector zero_field_vector(std::size_t k) { return FieldVector{std::vector<FieldElement>(k, 0)}; }

void add_in_place(FieldVector& a, const FieldVector& b, const FieldParams& params) {
  if (a.size() != b.size()) throw std::invalid_argument("field vector length mismatch");
  for (std::size_t j = 0; j < a.size(); ++j) a.entries[j] = field::add(a.entries[j], b.entries[j], params.prime);
}

void sub_in_place(FieldVector& a, const FieldVector& b, const FieldParams& params) {
  if (a.size() != b.size()) throw std::invalid_argument("field vector length mismatch");
  for (std::size_t j = 0; j < a.size(); ++j) a.entries[j] = field::sub(a.entries[j], b.entries[j], params.prime);
}

FieldVector encode(const Eigen::Ref<const Eigen::VectorXd>& values, const FieldParams& params) {
  const double limit = params.clamp();
  const double scale = params.scale();
  FieldVector out;
  out.entries.resize(static_cast<std::size_t>(values.size()));
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    const double v = values(j);
    if (!std::isfinite(v) || std::abs(v) > limit)
      throw EncodingError("value " + std::to_string(v) + " exceeds the encodable range");
    const long long r = std::llround(v * scale);
    const FieldElement mag = static_cast<FieldElement>(r < 0 ? -r : r) % params.prime;
    out.entries[j] = r < 0 ? field::neg(mag, params.prime) : mag;
  }
  return out;
}

Eigen::VectorXd decode(const FieldVector& encoded, const FieldParams& params,
                       std::uint64_t /*n_summands*/) {
  const FieldElement half = (params.prime - 1) / 2;
  const double scale = params.scale();
  Eigen::VectorXd out(static_cast<Eigen::Index>(encoded.size()));
  for (std::size_t j = 0; j < encoded.size(); ++j) {
    const FieldElement e = encoded.entries[j];
    out(j) = e > half ? -static_cast<double>(params.prime - e) / scale : static_cast<double>(e) / scale;
  }
  return out;
}

}  // namespace fedmmf
