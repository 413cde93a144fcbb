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

#include "fedmmf/wire.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "fedmmf/errors.hpp"

namespace fedmmf::wire {
namespace {

constexpr char kMagic[4] = {'F', 'M', 'M', 'F'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t b = sizeof(T); b-- > 0;) value = static_cast<T>((value << 8) | bytes[offset + b]);
  return value;
}

// Bulk little-endian copy of payload words.
void put_words(std::uint8_t* out, const std::uint64_t* words, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out, words, n * 8);
  } else {
    for (std::size_t j = 0; j < n; ++j)
      for (int b = 0; b < 8; ++b) out[8 * j + b] = static_cast<std::uint8_t>(words[j] >> (8 * b));
  }
}

void get_words(const std::uint8_t* in, std::uint64_t* words, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(words, in, n * 8);
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      std::uint64_t v = 0;
      for (int b = 7; b >= 0; --b) v = (v << 8) | in[8 * j + b];
      words[j] = v;
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode(const RoundMessage& message) {
  const std::size_t n = message.items.size();
  const std::size_t k = message.k;
  if (message.entries.size() != n * k) throw ProtocolError("wire entry count differs from items * k");
  for (std::size_t j = 1; j < n; ++j)
    if (message.items[j] <= message.items[j - 1]) throw ProtocolError("wire items must be strictly ascending");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + n * (4 + 8 * k));
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint16_t>(out, kVersion);
  out.push_back(static_cast<std::uint8_t>(message.group));
  out.push_back(message.alive ? 1 : 0);
  put<std::uint32_t>(out, message.party);
  put<std::uint32_t>(out, message.round);
  put<std::uint32_t>(out, message.k);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  std::size_t at = out.size();
  out.resize(at + n * (4 + 8 * k));
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint32_t item = message.items[j];
    for (int b = 0; b < 4; ++b) out[at + b] = static_cast<std::uint8_t>(item >> (8 * b));
    put_words(out.data() + at + 4, message.entries.data() + j * k, k);
    at += 4 + 8 * k;
  }
  return out;
}

RoundMessage decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw ParseError("wire message truncated in header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("wire message has bad magic");
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kVersion) throw ParseError("unsupported wire version " + std::to_string(version));
  RoundMessage m;
  const std::uint8_t tag = bytes[6];
  if (tag > 1) throw ParseError("unknown group tag");
  m.group = static_cast<GroupTag>(tag);
  if (bytes[7] > 1) throw ParseError("bad heartbeat byte");
  m.alive = bytes[7] == 1;
  m.party = get<std::uint32_t>(bytes, 8);
  m.round = get<std::uint32_t>(bytes, 12);
  m.k = get<std::uint32_t>(bytes, 16);
  const std::uint64_t n = get<std::uint32_t>(bytes, 20);
  const std::uint64_t stride = 4 + 8 * std::uint64_t{m.k};
  if (bytes.size() != kHeaderBytes + n * stride) throw ParseError("wire message length does not match its header");
  m.items.resize(n);
  m.entries.resize(n * m.k);
  std::size_t offset = kHeaderBytes;
  for (std::uint64_t j = 0; j < n; ++j) {
    m.items[j] = get<std::uint32_t>(bytes, offset);
    if (j > 0 && m.items[j] <= m.items[j - 1]) throw ParseError("wire items out of order");
    get_words(bytes.data() + offset + 4, m.entries.data() + j * m.k, m.k);
    offset += stride;
  }
  return m;
}

RoundMessage from_plain(const PlainSubmission& submission, std::uint32_t round, std::uint32_t k) {
  if (static_cast<std::size_t>(submission.eta.rows()) != submission.items.size() ||
      (submission.eta.rows() > 0 && submission.eta.cols() != k))
    throw ProtocolError("plain submission shape does not match its items");
  RoundMessage m{submission.party, round, GroupTag::kSecure, true, k, submission.items, {}};
  m.entries.resize(submission.items.size() * k);
  // Bit patterns travel verbatim so the server sums exactly what was sent.
  std::memcpy(m.entries.data(), submission.eta.data(), m.entries.size() * 8);
  return m;
}

RoundMessage from_masked(const MaskedSubmission& submission, std::uint32_t round, std::uint32_t k) {
  RoundMessage m{submission.party, round, GroupTag::kInsecure, true, k, {}, {}};
  m.items.reserve(submission.gradients.size());
  m.entries.reserve(submission.gradients.size() * k);
  for (const auto& [item, fv] : submission.gradients) {
    if (fv.size() != k) throw ProtocolError("masked submission entry count differs from k");
    m.items.push_back(item);
    m.entries.insert(m.entries.end(), fv.entries.begin(), fv.entries.end());
  }
  return m;
}

PlainSubmission to_plain(const RoundMessage& message) {
  if (message.group != GroupTag::kSecure) throw ProtocolError("message is not from the secure group");
  PlainSubmission s{message.party, message.items, GradientRows(static_cast<Eigen::Index>(message.items.size()), message.k)};
  std::memcpy(s.eta.data(), message.entries.data(), message.entries.size() * 8);
  return s;
}

MaskedSubmission to_masked(const RoundMessage& message) {
  if (message.group != GroupTag::kInsecure) throw ProtocolError("message is not from the insecure group");
  MaskedSubmission s{message.party, {}};
  s.gradients.reserve(message.items.size());
  for (std::size_t j = 0; j < message.items.size(); ++j) {
    const auto first = message.entries.begin() + static_cast<std::ptrdiff_t>(j * message.k);
    s.gradients.emplace_back(message.items[j], FieldVector{std::vector<std::uint64_t>(first, first + message.k)});
  }
  return s;
}

}  // namespace fedmmf::wire
