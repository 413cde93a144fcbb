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

// Pairwise-mask secure aggregation with Shamir-based dropout recovery, and the
// adaptive combiner that adds plaintext sums from the secure group.

#ifndef FEDMMF_SECAGG_HPP_
#define FEDMMF_SECAGG_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fedmmf/dataset.hpp"
#include "fedmmf/field.hpp"

namespace fedmmf {

using Seed128 = std::array<std::uint8_t, 16>;
using SecretKey = std::array<std::uint8_t, 32>;
using PublicKey = std::array<std::uint8_t, 32>;
using PrgKey = std::array<std::uint8_t, 32>;

// Keyed ChaCha20 stream producing uniform field elements by rejection.
class FieldPrg {
 public:
  FieldPrg(const Seed128& seed, std::uint64_t nonce_a, std::uint64_t nonce_b = 0);
  // Stream `stream` under an already derived key.
  FieldPrg(const PrgKey& key, std::uint64_t stream);

  FieldElement next(FieldElement prime);
  std::uint64_t next_u64();
  void fill_bytes(std::span<std::uint8_t> out);

 private:
  void refill();

  std::array<std::uint8_t, 32> key_{};
  std::array<std::uint8_t, 12> nonce_{};
  std::uint32_t block_counter_ = 0;
  std::array<std::uint64_t, 8> buffer_{};
  std::size_t cursor_ = 8;
};

Seed128 seed_from_u64(std::uint64_t value);

struct PairSeed {
  Index party_low = 0;
  Index party_high = 0;
  Seed128 seed{};
};

// One hash per pair and round; every item mask of that round is a ChaCha
// stream under this key with the item id as nonce.
PrgKey pair_round_key(const PairSeed& seed, std::uint32_t round);

// Mask s_{u,v} for (round, item); identical for both members of the pair.
FieldVector derive_pair_mask(const PairSeed& seed, std::uint32_t round, Index item,
                             std::size_t k, const FieldParams& params);

// a += s or a -= s for the mask stream (key, item), without materializing s.
void add_pair_mask(FieldVector& a, const PrgKey& key, Index item, bool subtract,
                   const FieldParams& params);

// Peer id -> seed shared with that peer.
using PairSeedBook = std::map<Index, PairSeed>;

// Masks every gradient one party sends in one round, deriving each peer's
// round key once.
class PairMasker {
 public:
  PairMasker(Index party, const PairSeedBook& seeds, std::uint32_t round, const FieldParams& params);

  // eta + sum_{v > u} s_{u,v} - sum_{v < u} s_{v,u} (mod l) over `peers`.
  FieldVector mask(FieldVector eta, std::span<const Index> peers, Index item);

 private:
  Index party_;
  const PairSeedBook* seeds_;
  std::uint32_t round_;
  FieldParams params_;
  std::map<Index, PrgKey> keys_;
};

// eta + sum_{v > u} s_{u,v} - sum_{v < u} s_{v,u} (mod l) over `peers`, the
// other insecure parties contributing to this item. Throws ProtocolError if a
// peer has no seed in `seeds`.
FieldVector mask_gradient(const FieldVector& eta, Index party, std::span<const Index> peers,
                          const PairSeedBook& seeds, std::uint32_t round, Index item,
                          const FieldParams& params);

struct ShamirShare {
  Index owner = 0;
  FieldElement x = 0;
  FieldElement y = 0;
  int threshold = 1;
  std::uint64_t secret_id = 0;
};

// Degree t-1 polynomial with constant term `secret`; share j goes to
// owners[j] at x = j + 1.
std::vector<ShamirShare> shamir_split(FieldElement secret, std::span<const Index> owners,
                                      int threshold, std::uint64_t secret_id, FieldPrg& prg,
                                      const FieldParams& params);

std::vector<ShamirShare> shamir_split(FieldElement secret, std::size_t n, int threshold,
                                      std::uint64_t seed, const FieldParams& params);

// Lagrange interpolation at zero. Needs at least `threshold` shares of one
// secret with distinct x.
FieldElement shamir_reconstruct(std::span<const ShamirShare> shares, const FieldParams& params);

// ceil(2n / 3), at least 1.
int default_threshold(std::size_t n_insecure);

// Key material and recovery shares of the insecure group. Pair seeds come
// from X25519 agreement between members; each member's secret key is
// Shamir-shared with every member so the server can rebuild a dropped
// member's pair seeds from `threshold` surviving holders.
class InsecureGroup {
 public:
  static constexpr int kKeyLimbs = 5;  // 52-bit limbs covering a 256-bit key

  InsecureGroup() = default;
  InsecureGroup(std::vector<Index> members, int threshold, std::uint64_t seed,
                const FieldParams& params);

  const std::vector<Index>& members() const { return members_; }
  bool contains(Index party) const;
  int threshold() const { return threshold_; }
  const PublicKey& public_key(Index party) const;

  // Seeds party `u` derives with every other member.
  PairSeedBook seed_book(Index party) const;
  PairSeed pair_seed(Index a, Index b) const;

  // Shares of `dealer`'s secret key held by `holder`.
  std::array<ShamirShare, kKeyLimbs> held_shares(Index holder, Index dealer) const;

  // Rebuilds `dealer`'s secret from the shares of `holders`; throws
  // ProtocolError when fewer than threshold holders respond.
  SecretKey recover_secret(Index dealer, std::span<const Index> holders) const;

  // Pair seed between a recovered secret and a surviving peer.
  PairSeed recovered_pair_seed(Index dealer, const SecretKey& dealer_secret, Index peer) const;

 private:
  std::size_t position(Index party) const;

  std::vector<Index> members_;
  int threshold_ = 1;
  FieldParams params_;
  std::vector<SecretKey> secrets_;  // held privately by each member
  std::vector<PublicKey> publics_;
  // shares_[holder_pos][dealer_pos][limb]
  std::vector<std::vector<std::array<FieldElement, kKeyLimbs>>> shares_;
};

// Row j holds the gradient for items[j].
using GradientRows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PlainSubmission {
  Index party = 0;
  std::vector<Index> items;  // ascending
  GradientRows eta;
};

struct MaskedSubmission {
  Index party = 0;
  std::vector<std::pair<Index, FieldVector>> gradients;
};

struct AggregationRound {
  std::uint32_t round = 0;
  std::size_t n_items = 0;
  std::size_t k = 0;
  std::vector<PlainSubmission> plain;
  std::vector<MaskedSubmission> masked;
  // Insecure members that masked against peers but never submitted.
  std::set<Index> dropouts;
  // item -> insecure members contributing to it (announced at setup).
  const std::vector<std::vector<Index>>* item_participants = nullptr;
};

// Per-item sum of eta over every surviving party: plaintext sum of the secure
// group in ascending party order plus the decoded field sum of the insecure
// group after cancelling masks shared with dropouts. Rows of items nobody
// rated are zero.
Eigen::MatrixXd adaptive_aggregate(const AggregationRound& round, const InsecureGroup& group,
                                   const FieldParams& params);

// Plaintext-only reference: same fixed summation order, no field math.
Eigen::MatrixXd plaintext_aggregate(std::span<const PlainSubmission> submissions,
                                    std::size_t n_items, std::size_t k);

}  // namespace fedmmf

#endif  // FEDMMF_SECAGG_HPP_
