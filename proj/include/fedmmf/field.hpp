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

// Prime-field arithmetic and fixed-point encoding of real gradients.

#ifndef FEDMMF_FIELD_HPP_
#define FEDMMF_FIELD_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace fedmmf {

using FieldElement = std::uint64_t;

inline constexpr FieldElement kMersenne61 = (FieldElement{1} << 61) - 1;

struct FieldParams {
  FieldElement prime = kMersenne61;
  int scale_bits = 20;

  double scale() const { return static_cast<double>(FieldElement{1} << scale_bits); }
  // Largest magnitude a single value may have: (l - 1) / (2 * scale).
  double clamp() const { return static_cast<double>((prime - 1) / 2) / scale(); }
  // Throws ConfigError unless `prime` is prime, below 2^63, and n_summands
  // values of magnitude max_abs sum without wrapping past l / 2.
  void validate(std::uint64_t n_summands, double max_abs) const;

  friend bool operator==(const FieldParams&, const FieldParams&) = default;
};

namespace field {

inline FieldElement add(FieldElement a, FieldElement b, FieldElement p) {
  const FieldElement s = a + b;
  return s >= p ? s - p : s;
}

inline FieldElement sub(FieldElement a, FieldElement b, FieldElement p) {
  return a >= b ? a - b : a + (p - b);
}

inline FieldElement neg(FieldElement a, FieldElement p) { return a == 0 ? 0 : p - a; }

inline FieldElement mul(FieldElement a, FieldElement b, FieldElement p) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
  if (p == kMersenne61) {
    // 2^61 = 1 (mod l): fold the high bits back in instead of dividing.
    FieldElement s = (static_cast<FieldElement>(prod) & p) + static_cast<FieldElement>(prod >> 61);
    s = (s & p) + (s >> 61);
    return s >= p ? s - p : s;
  }
  return static_cast<FieldElement>(prod % p);
}

FieldElement pow(FieldElement base, std::uint64_t exponent, FieldElement p);

// Multiplicative inverse by Fermat; `a` must be nonzero.
FieldElement inv(FieldElement a, FieldElement p);

bool is_prime(std::uint64_t n);

}  // namespace field

// Entries are always reduced modulo the field prime.
struct FieldVector {
  std::vector<FieldElement> entries;

  std::size_t size() const { return entries.size(); }
  friend bool operator==(const FieldVector&, const FieldVector&) = default;
};

FieldVector zero_field_vector(std::size_t k);

// a += b (mod l), elementwise.
void add_in_place(FieldVector& a, const FieldVector& b, const FieldParams& params);
void sub_in_place(FieldVector& a, const FieldVector& b, const FieldParams& params);

// round(v * scale) mod l. Throws EncodingError if any |v_j| exceeds clamp().
FieldVector encode(const Eigen::Ref<const Eigen::VectorXd>& values, const FieldParams& params);

// Inverse of encode for a sum of at most n_summands encodings: entries in the
// upper half of the field are negative.
Eigen::VectorXd decode(const FieldVector& encoded, const FieldParams& params,
                       std::uint64_t n_summands);

}  // namespace fedmmf

#endif  // FEDMMF_FIELD_HPP_
