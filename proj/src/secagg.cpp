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

#include "fedmmf/secagg.hpp"

#include <sodium.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

#include "fedmmf/errors.hpp"

namespace fedmmf {
namespace {

void ensure_sodium() {
  if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialise");
}

void put_le64(std::uint8_t* out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out[b] = static_cast<std::uint8_t>(v >> (8 * b));
}

std::uint64_t get_le64(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | in[b];
  return v;
}

Seed128 seed_from_shared(const std::array<std::uint8_t, 32>& shared, const PublicKey& low,
                         const PublicKey& high) {
  std::array<std::uint8_t, 96> material{};
  std::memcpy(material.data(), shared.data(), 32);
  std::memcpy(material.data() + 32, low.data(), 32);
  std::memcpy(material.data() + 64, high.data(), 32);
  Seed128 seed{};
  crypto_generichash(seed.data(), seed.size(), material.data(), material.size(), nullptr, 0);
  return seed;
}

std::array<FieldElement, InsecureGroup::kKeyLimbs> key_to_limbs(const SecretKey& key) {
  std::array<FieldElement, InsecureGroup::kKeyLimbs> limbs{};
  for (int bit = 0; bit < 256; ++bit) {
    if ((key[bit / 8] >> (bit % 8)) & 1) limbs[bit / 52] |= FieldElement{1} << (bit % 52);
  }
  return limbs;
}

SecretKey limbs_to_key(const std::array<FieldElement, InsecureGroup::kKeyLimbs>& limbs) {
  SecretKey key{};
  for (int bit = 0; bit < 256; ++bit) {
    if ((limbs[bit / 52] >> (bit % 52)) & 1) key[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
  }
  return key;
}

void check_row(Index item, std::size_t size, std::size_t n_items, std::size_t k) {
  if (item >= n_items) throw ProtocolError("submission names item " + std::to_string(item) + " out of range");
  if (size != k) throw ProtocolError("submission vector has wrong dimension");
}

}  // namespace

FieldPrg::FieldPrg(const Seed128& seed, std::uint64_t nonce_a, std::uint64_t nonce_b) {
  ensure_sodium();
  std::array<std::uint8_t, 32> material{};
  std::memcpy(material.data(), seed.data(), seed.size());
  put_le64(material.data() + 16, nonce_a);
  put_le64(material.data() + 24, nonce_b);
  crypto_generichash(key_.data(), key_.size(), material.data(), material.size(), nullptr, 0);
}

FieldPrg::FieldPrg(const PrgKey& key, std::uint64_t stream) : key_(key) {
  put_le64(nonce_.data(), stream);
}

void FieldPrg::refill() {
  std::array<std::uint8_t, 64> block{};
  crypto_stream_chacha20_ietf_xor_ic(block.data(), block.data(), block.size(), nonce_.data(),
                                     block_counter_++, key_.data());
  for (std::size_t w = 0; w < buffer_.size(); ++w) buffer_[w] = get_le64(block.data() + 8 * w);
  cursor_ = 0;
}

std::uint64_t FieldPrg::next_u64() {
  if (cursor_ == buffer_.size()) refill();
  return buffer_[cursor_++];
}

FieldElement FieldPrg::next(FieldElement prime) {
  const int bits = std::bit_width(prime);
  const std::uint64_t mask = bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
  for (;;) {
    const std::uint64_t x = next_u64() & mask;
    if (x < prime) return x;
  }
}

void FieldPrg::fill_bytes(std::span<std::uint8_t> out) {
  std::size_t pos = 0;
  while (pos < out.size()) {
    const std::uint64_t word = next_u64();
    for (int b = 0; b < 8 && pos < out.size(); ++b) out[pos++] = static_cast<std::uint8_t>(word >> (8 * b));
  }
}

Seed128 seed_from_u64(std::uint64_t value) {
  ensure_sodium();
  std::uint8_t bytes[8];
  put_le64(bytes, value);
  Seed128 seed{};
  crypto_generichash(seed.data(), seed.size(), bytes, sizeof(bytes), nullptr, 0);
  return seed;
}

PrgKey pair_round_key(const PairSeed& seed, std::uint32_t round) {
  ensure_sodium();
  std::array<std::uint8_t, 32> material{};
  std::memcpy(material.data(), seed.seed.data(), seed.seed.size());
  put_le64(material.data() + 16, round);
  put_le64(material.data() + 24, 0x50414952ULL);
  PrgKey key{};
  crypto_generichash(key.data(), key.size(), material.data(), material.size(), nullptr, 0);
  return key;
}

FieldVector derive_pair_mask(const PairSeed& seed, std::uint32_t round, Index item, std::size_t k,
                             const FieldParams& params) {
  FieldVector mask = zero_field_vector(k);
  add_pair_mask(mask, pair_round_key(seed, round), item, false, params);
  return mask;
}

void add_pair_mask(FieldVector& a, const PrgKey& key, Index item, bool subtract, const FieldParams& params) {
  FieldPrg prg(key, item);
  const FieldElement p = params.prime;
  for (auto& e : a.entries) {
    const FieldElement s = prg.next(p);
    e = subtract ? field::sub(e, s, p) : field::add(e, s, p);
  }
}

PairMasker::PairMasker(Index party, const PairSeedBook& seeds, std::uint32_t round, const FieldParams& params)
    : party_(party), seeds_(&seeds), round_(round), params_(params) {}

FieldVector PairMasker::mask(FieldVector eta, std::span<const Index> peers, Index item) {
  for (Index v : peers) {
    if (v == party_) continue;
    auto key = keys_.find(v);
    if (key == keys_.end()) {
      const auto it = seeds_->find(v);
      if (it == seeds_->end())
        throw ProtocolError("party " + std::to_string(party_) + " has no pair seed with " + std::to_string(v));
      key = keys_.emplace(v, pair_round_key(it->second, round_)).first;
    }
    add_pair_mask(eta, key->second, item, party_ > v, params_);
  }
  return eta;
}

FieldVector mask_gradient(const FieldVector& eta, Index party, std::span<const Index> peers,
                          const PairSeedBook& seeds, std::uint32_t round, Index item,
                          const FieldParams& params) {
  return PairMasker(party, seeds, round, params).mask(eta, peers, item);
}

std::vector<ShamirShare> shamir_split(FieldElement secret, std::span<const Index> owners, int threshold,
                                      std::uint64_t secret_id, FieldPrg& prg, const FieldParams& params) {
  const FieldElement p = params.prime;
  if (threshold < 1 || static_cast<std::size_t>(threshold) > owners.size())
    throw ConfigError("shamir threshold must lie in [1, n]");
  if (secret >= p) throw ConfigError("shamir secret must be a field element");
  std::vector<FieldElement> coeffs(static_cast<std::size_t>(threshold));
  coeffs[0] = secret;
  for (std::size_t c = 1; c < coeffs.size(); ++c) coeffs[c] = prg.next(p);
  std::vector<ShamirShare> shares;
  shares.reserve(owners.size());
  for (std::size_t j = 0; j < owners.size(); ++j) {
    const FieldElement x = j + 1;
    FieldElement y = 0;
    for (std::size_t c = coeffs.size(); c-- > 0;) y = field::add(field::mul(y, x, p), coeffs[c], p);
    shares.push_back({owners[j], x, y, threshold, secret_id});
  }
  return shares;
}

std::vector<ShamirShare> shamir_split(FieldElement secret, std::size_t n, int threshold, std::uint64_t seed,
                                      const FieldParams& params) {
  std::vector<Index> owners(n);
  for (std::size_t j = 0; j < n; ++j) owners[j] = static_cast<Index>(j);
  FieldPrg prg(seed_from_u64(seed), 0x5348414d4952ULL);
  return shamir_split(secret, owners, threshold, seed, prg, params);
}

FieldElement shamir_reconstruct(std::span<const ShamirShare> shares, const FieldParams& params) {
  const FieldElement p = params.prime;
  if (shares.empty()) throw ProtocolError("shamir: no shares");
  const int t = shares.front().threshold;
  if (shares.size() < static_cast<std::size_t>(t))
    throw ProtocolError("shamir: " + std::to_string(shares.size()) + " shares below threshold " + std::to_string(t));
  for (std::size_t j = 0; j < shares.size(); ++j) {
    if (shares[j].secret_id != shares.front().secret_id || shares[j].threshold != t)
      throw ProtocolError("shamir: shares belong to different secrets");
    if (shares[j].x % p == 0) throw ProtocolError("shamir: share at x = 0");
    for (std::size_t m = 0; m < j; ++m)
      if (shares[m].x == shares[j].x) throw ProtocolError("shamir: duplicate share abscissa");
  }
  FieldElement secret = 0;
  for (int j = 0; j < t; ++j) {
    FieldElement num = 1;
    FieldElement den = 1;
    for (int m = 0; m < t; ++m) {
      if (m == j) continue;
      num = field::mul(num, shares[m].x, p);
      den = field::mul(den, field::sub(shares[m].x, shares[j].x, p), p);
    }
    secret = field::add(secret, field::mul(shares[j].y, field::mul(num, field::inv(den, p), p), p), p);
  }
  return secret;
}

int default_threshold(std::size_t n_insecure) {
  return std::max(1, static_cast<int>((2 * n_insecure + 2) / 3));
}

InsecureGroup::InsecureGroup(std::vector<Index> members, int threshold, std::uint64_t seed,
                             const FieldParams& params)
    : members_(std::move(members)), threshold_(threshold), params_(params) {
  ensure_sodium();
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  const std::size_t n = members_.size();
  if (n == 0) {
    threshold_ = 1;
    return;
  }
  if (threshold_ <= 0) threshold_ = default_threshold(n);
  if (static_cast<std::size_t>(threshold_) > n) throw ConfigError("secure aggregation threshold exceeds group size");

  secrets_.resize(n);
  publics_.resize(n);
  const Seed128 root = seed_from_u64(seed);
  for (std::size_t m = 0; m < n; ++m) {
    FieldPrg prg(root, 0x4b4559ULL, members_[m]);
    prg.fill_bytes(secrets_[m]);
    crypto_scalarmult_base(publics_[m].data(), secrets_[m].data());
  }

  shares_.assign(n, std::vector<std::array<FieldElement, kKeyLimbs>>(n));
  for (std::size_t d = 0; d < n; ++d) {
    const auto limbs = key_to_limbs(secrets_[d]);
    for (int l = 0; l < kKeyLimbs; ++l) {
      FieldPrg prg(root, 0x534841ULL, (std::uint64_t{members_[d]} << 8) | static_cast<std::uint64_t>(l));
      const auto shares = shamir_split(limbs[l], members_, threshold_, 0, prg, params_);
      for (std::size_t h = 0; h < n; ++h) shares_[h][d][l] = shares[h].y;
    }
  }
}

std::size_t InsecureGroup::position(Index party) const {
  const auto it = std::lower_bound(members_.begin(), members_.end(), party);
  if (it == members_.end() || *it != party)
    throw ProtocolError("party " + std::to_string(party) + " is not in the insecure group");
  return static_cast<std::size_t>(it - members_.begin());
}

bool InsecureGroup::contains(Index party) const {
  return std::binary_search(members_.begin(), members_.end(), party);
}

const PublicKey& InsecureGroup::public_key(Index party) const { return publics_[position(party)]; }

PairSeed InsecureGroup::pair_seed(Index a, Index b) const {
  if (a == b) throw ProtocolError("no pair seed with oneself");
  return recovered_pair_seed(a, secrets_[position(a)], b);
}

PairSeedBook InsecureGroup::seed_book(Index party) const {
  PairSeedBook book;
  const SecretKey& secret = secrets_[position(party)];
  for (Index v : members_)
    if (v != party) book.emplace_hint(book.end(), v, recovered_pair_seed(party, secret, v));
  return book;
}

std::array<ShamirShare, InsecureGroup::kKeyLimbs> InsecureGroup::held_shares(Index holder, Index dealer) const {
  const std::size_t h = position(holder);
  const std::size_t d = position(dealer);
  std::array<ShamirShare, kKeyLimbs> out{};
  for (int l = 0; l < kKeyLimbs; ++l)
    out[l] = {holder, h + 1, shares_[h][d][l], threshold_, (std::uint64_t{dealer} << 8) | static_cast<std::uint64_t>(l)};
  return out;
}

SecretKey InsecureGroup::recover_secret(Index dealer, std::span<const Index> holders) const {
  std::vector<Index> distinct(holders.begin(), holders.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < static_cast<std::size_t>(threshold_))
    throw ProtocolError("only " + std::to_string(distinct.size()) + " holders answered; threshold is " +
                        std::to_string(threshold_));
  distinct.resize(static_cast<std::size_t>(threshold_));
  std::array<FieldElement, kKeyLimbs> limbs{};
  for (int l = 0; l < kKeyLimbs; ++l) {
    std::vector<ShamirShare> shares;
    shares.reserve(distinct.size());
    for (Index h : distinct) shares.push_back(held_shares(h, dealer)[l]);
    limbs[l] = shamir_reconstruct(shares, params_);
  }
  const SecretKey key = limbs_to_key(limbs);
  PublicKey check{};
  crypto_scalarmult_base(check.data(), key.data());
  if (check != public_key(dealer)) throw ProtocolError("recovered key does not match the published key");
  return key;
}

PairSeed InsecureGroup::recovered_pair_seed(Index dealer, const SecretKey& dealer_secret, Index peer) const {
  const PublicKey& dealer_pk = public_key(dealer);
  const PublicKey& peer_pk = public_key(peer);
  std::array<std::uint8_t, 32> shared{};
  if (crypto_scalarmult(shared.data(), dealer_secret.data(), peer_pk.data()) != 0)
    throw ProtocolError("key agreement produced a degenerate shared secret");
  PairSeed seed;
  seed.party_low = std::min(dealer, peer);
  seed.party_high = std::max(dealer, peer);
  seed.seed = dealer < peer ? seed_from_shared(shared, dealer_pk, peer_pk) : seed_from_shared(shared, peer_pk, dealer_pk);
  return seed;
}

Eigen::MatrixXd plaintext_aggregate(std::span<const PlainSubmission> submissions, std::size_t n_items,
                                    std::size_t k) {
  std::vector<const PlainSubmission*> order;
  order.reserve(submissions.size());
  for (const auto& s : submissions) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->party < b->party; });
  for (std::size_t j = 1; j < order.size(); ++j)
    if (order[j]->party == order[j - 1]->party) throw ProtocolError("duplicate submission from one party");

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_items), static_cast<Eigen::Index>(k));
  for (const PlainSubmission* s : order) {
    if (static_cast<std::size_t>(s->eta.rows()) != s->items.size())
      throw ProtocolError("plain submission has one gradient row per item");
    for (std::size_t j = 0; j < s->items.size(); ++j) {
      check_row(s->items[j], static_cast<std::size_t>(s->eta.cols()), n_items, k);
      sum.row(s->items[j]) += s->eta.row(static_cast<Eigen::Index>(j));
    }
  }
  return sum;
}

Eigen::MatrixXd adaptive_aggregate(const AggregationRound& round, const InsecureGroup& group,
                                   const FieldParams& params) {
  Eigen::MatrixXd sum = plaintext_aggregate(round.plain, round.n_items, round.k);

  std::set<Index> submitted;
  std::map<Index, std::pair<FieldVector, std::uint64_t>> masked_sum;
  for (const MaskedSubmission& s : round.masked) {
    if (!group.contains(s.party)) throw ProtocolError("masked submission from a non-member");
    if (round.dropouts.count(s.party)) throw ProtocolError("dropped party also submitted");
    if (!submitted.insert(s.party).second) throw ProtocolError("duplicate submission from one party");
    for (const auto& [item, fv] : s.gradients) {
      check_row(item, fv.size(), round.n_items, round.k);
      auto [it, fresh] = masked_sum.try_emplace(item, zero_field_vector(round.k), 0);
      add_in_place(it->second.first, fv, params);
      ++it->second.second;
    }
  }

  if (!round.dropouts.empty()) {
    if (round.item_participants == nullptr) throw ProtocolError("dropout recovery needs the item participant lists");
    std::vector<Index> survivors;
    for (Index m : group.members())
      if (!round.dropouts.count(m)) survivors.push_back(m);
    for (Index d : round.dropouts) {
      const SecretKey secret = group.recover_secret(d, survivors);
      std::map<Index, PrgKey> keys;
      for (std::size_t item = 0; item < round.n_items; ++item) {
        const auto& participants = (*round.item_participants)[item];
        if (!std::binary_search(participants.begin(), participants.end(), d)) continue;
        for (Index v : participants) {
          if (v == d || round.dropouts.count(v) || !submitted.count(v)) continue;
          auto acc = masked_sum.find(static_cast<Index>(item));
          if (acc == masked_sum.end()) continue;
          auto key = keys.find(v);
          if (key == keys.end())
            key = keys.emplace(v, pair_round_key(group.recovered_pair_seed(d, secret, v), round.round)).first;
          // The survivor added +s if it is the lower id, -s otherwise.
          add_pair_mask(acc->second.first, key->second, static_cast<Index>(item), v < d, params);
        }
      }
    }
  }

  for (const auto& [item, acc] : masked_sum)
    sum.row(item) += decode(acc.first, params, acc.second).transpose();
  return sum;
}

}  // namespace fedmmf
