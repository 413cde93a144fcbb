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

// Per-round party -> server message, little-endian throughout:
//
//   offset  size  field
//        0     4  magic "FMMF"
//        4     2  version (1)
//        6     1  group tag: 0 secure (payload is IEEE-754 binary64 bit
//                 patterns), 1 insecure (payload is field elements mod l)
//        7     1  heartbeat: 1 alive, 0 dropping out
//        8     4  party id
//       12     4  round
//       16     4  k
//       20     4  item count n
//       24     n * (4 + 8k)  item id, then k uint64 entries
//
// Items appear in strictly ascending id order.

#ifndef FEDMMF_WIRE_HPP_
#define FEDMMF_WIRE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "fedmmf/secagg.hpp"

namespace fedmmf::wire {

inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

enum class GroupTag : std::uint8_t { kSecure = 0, kInsecure = 1 };

struct RoundMessage {
  Index party = 0;
  std::uint32_t round = 0;
  GroupTag group = GroupTag::kSecure;
  bool alive = true;
  std::uint32_t k = 0;
  std::vector<Index> items;
  std::vector<std::uint64_t> entries;  // items.size() * k, item-major

  friend bool operator==(const RoundMessage&, const RoundMessage&) = default;
};

std::vector<std::uint8_t> encode(const RoundMessage& message);

// Throws ParseError on bad magic, version, truncation or unordered items.
RoundMessage decode(std::span<const std::uint8_t> bytes);

RoundMessage from_plain(const PlainSubmission& submission, std::uint32_t round, std::uint32_t k);
RoundMessage from_masked(const MaskedSubmission& submission, std::uint32_t round, std::uint32_t k);
PlainSubmission to_plain(const RoundMessage& message);
MaskedSubmission to_masked(const RoundMessage& message);

}  // namespace fedmmf::wire

#endif  // FEDMMF_WIRE_HPP_
