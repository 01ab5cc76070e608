#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lwm/latent.hpp"

namespace lwm {

// Balanced k-bit payload: exactly k/2 zeros and k/2 ones.
class Watermark {
public:
    explicit Watermark(std::vector<std::uint8_t> bits);

    std::size_t k() const { return bits_.size(); }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    // Deterministic balanced bitstream: k/2 ones shuffled by the splitmix64
    // stream keyed by `seed`.
    static Watermark random(std::size_t k, std::uint64_t seed);

    // One line of '0'/'1' characters (trailing newline optional).
    static Watermark parse(std::string_view line);
    std::string to_string() const;

    bool operator==(const Watermark&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

// 256-bit secret deriving the position shuffle.
class ModelKey {
public:
    ModelKey() : bytes_{} {}
    explicit ModelKey(const std::array<std::uint8_t, 32>& bytes) : bytes_(bytes) {}

    const std::array<std::uint8_t, 32>& bytes() const { return bytes_; }

    static ModelKey from_hex(std::string_view hex); // exactly 64 hex chars
    std::string to_hex() const;

    // Deterministic key material from a 64-bit seed (test/harness helper).
    static ModelKey derive(std::uint64_t seed);

    bool operator==(const ModelKey&) const = default;

private:
    std::array<std::uint8_t, 32> bytes_;
};

// Shape/length contract shared by embed and extract. Requires 2k | r so the
// repetition count and group size r/(2k) are integral, and k <= r/2.
struct EmbeddingParams {
    LatentShape shape;
    std::uint32_t k;

    EmbeddingParams(LatentShape shape_, std::uint32_t k_);

    std::size_t r() const { return shape.r(); }
    std::size_t repetitions() const { return r() / (2 * static_cast<std::size_t>(k)); }
    std::size_t group_size() const { return repetitions(); }
    std::size_t groups_per_sign() const { return k / 2; }
    std::size_t substream_count() const { return repetitions() + 1; }
};

struct IndexedValue {
    std::uint32_t index; // position in the original flat latent
    double value;
};

// Sign split of the carrier plus the magnitude quartile selection:
// large_neg/large_pos hold the r/4 largest-|value| members of each sign
// class in consumption order (descending |value|, ties by lower index);
// residual holds the remaining r/2 elements in original index order.
struct SignPartition {
    std::vector<IndexedValue> negatives;
    std::vector<IndexedValue> nonnegatives;
    std::vector<IndexedValue> large_neg;
    std::vector<IndexedValue> large_pos;
    std::vector<IndexedValue> residual;
};

// k/2 equal-size groups per sign half, sum-balanced within each half.
struct GroupPlan {
    std::vector<std::vector<double>> neg_groups;
    std::vector<std::vector<double>> pos_groups;
};

struct VoteTally {
    std::uint32_t ones = 0;
    std::uint32_t total = 0;

    bool operator==(const VoteTally&) const = default;
};

struct ExtractionResult {
    std::vector<std::uint8_t> bits;       // recovered watermark, k bits
    std::vector<VoteTally> votes;         // per-bit tallies, total = r/(2k)+1
    std::vector<std::uint8_t> stream_large;  // w1, r/2 bits
    std::vector<std::uint8_t> stream_groups; // w2, k bits
};

// Structured text record: one key=value line each for bits, tallies
// (ones/total per position, space separated), w1 and w2.
std::string extraction_record(const ExtractionResult& result);

// Splits the latent into negatives / non-negatives (zero counts as
// non-negative) and ranks each class by |value| to pick the top quarter.
// Throws ImbalancedSample when either sign class has fewer than r/4
// members; callers may resample with a fresh seed.
SignPartition partition_and_rank(const GaussianLatent& latent);

// Walks the watermark r/(2k) times, consuming one unused element of
// large_neg per 0 bit and large_pos per 1 bit in descending-|value| order.
// The sign of output position j encodes bit j mod k.
std::vector<double> build_large_sequence(const Watermark& m, const SignPartition& part,
                                         const EmbeddingParams& params);

// Partitions an ascending-sorted half into `group_count` equal-size groups
// with near-minimal spread of group sums. Pairs the i-th smallest with the
// i-th largest element, then places pairs in decreasing |pair sum| order,
// each into the non-full group lagging farthest behind the running mean of
// group sums in the pair's direction (ties to the lowest group index).
// With an odd per-group count the central elements are held back and placed
// one per group at the end, each into the group whose sum deviates most
// from the mean. Output order is assignment order.
std::vector<std::vector<double>> symmetric_grouping(std::span<const double> sorted_half,
                                                    std::size_t group_count);

// Sorts the residual ascending and splits positionally at the median into
// the low and high halves, then applies symmetric_grouping to each.
GroupPlan plan_groups(const SignPartition& part, const EmbeddingParams& params);

// Single pass over the watermark appending whole groups: the next unused
// neg group per 0 bit, pos group per 1 bit. Block j's sum sign encodes
// bit j.
std::vector<double> build_group_sequence(const Watermark& m, const GroupPlan& plan);

// Alternating blocks of k elements, z_l block first.
std::vector<double> interleave(std::span<const double> z_l, std::span<const double> z_s,
                               std::size_t k);
std::pair<std::vector<double>, std::vector<double>> deinterleave(std::span<const double> z_m,
                                                                 std::size_t k);

// Fisher-Yates permutation driven by a mt19937_64 engine seeded from the
// key bytes via std::seed_seq, with rejection-sampled unbiased bounds.
// Fully specified by the C++ standard, hence stable across platforms.
std::vector<std::uint32_t> key_permutation(const ModelKey& key, std::size_t n);

GaussianLatent keyed_shuffle(std::span<const double> z_m, const ModelKey& key,
                             const LatentShape& shape);
std::vector<double> keyed_unshuffle(const GaussianLatent& latent, const ModelKey& key);

// Full embedding pipeline; the output is a pure rearrangement of
// sample_latent(params.shape, seed). Propagates ImbalancedSample.
GaussianLatent embed(const Watermark& m, Seed seed, const ModelKey& key,
                     const EmbeddingParams& params);

// Full extraction pipeline: unshuffle, deinterleave, sign-decode w1,
// group-sum-decode w2, then majority vote over the r/(2k)+1 substreams.
ExtractionResult extract(const GaussianLatent& latent, const ModelKey& key,
                         const EmbeddingParams& params);

// Per position: 1 iff the count of ones exceeds half the substream count;
// exact ties resolve to 1 (the same ">= 0 means 1" convention used by the
// sign decoders).
std::pair<std::vector<std::uint8_t>, std::vector<VoteTally>>
majority_vote(const std::vector<std::vector<std::uint8_t>>& substreams);

// Optional payload adapter (extension beyond the core codec): enumerative
// coding between arbitrary bitstrings and balanced codewords. A k-bit
// balanced codeword carries floor(log2 C(k, k/2)) message bits.
std::size_t balanced_capacity_bits(std::size_t k);
Watermark encode_balanced_payload(std::span<const std::uint8_t> message_bits, std::size_t k);
std::vector<std::uint8_t> decode_balanced_payload(const Watermark& codeword);

} // namespace lwm
