#include "lwm/codec.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <boost/multiprecision/cpp_int.hpp>

#include "lwm/errors.hpp"
#include "lwm/rng.hpp"

namespace lwm {

namespace {

// Unbiased bounded draw via rejection: discard the low sliver of the 64-bit
// range that would bias the modulus.
template <typename Engine>
std::uint64_t uniform_below(Engine& gen, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n; // 2^64 mod n
    for (;;) {
        const std::uint64_t x = gen();
        if (x >= threshold) return x % n;
    }
}

// Counter-stream engine adapter so the same rejection helper serves both
// the keyed shuffle (mt19937_64) and seed-driven shuffles.
struct CounterEngine {
    std::uint64_t seed;
    std::uint64_t counter = 0;
    std::uint64_t operator()() { return rng::at(seed, counter++); }
};

} // namespace

Watermark::Watermark(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    const std::size_t k = bits_.size();
    if (k < 2 || k % 2 != 0) {
        throw InvalidArgument("Watermark: length must be even and >= 2");
    }
    std::size_t ones = 0;
    for (std::uint8_t b : bits_) {
        if (b > 1) throw InvalidArgument("Watermark: bits must be 0 or 1");
        ones += b;
    }
    if (ones != k / 2) {
        throw InvalidArgument("Watermark: payload must be balanced (k/2 ones)");
    }
}

Watermark Watermark::random(std::size_t k, std::uint64_t seed) {
    if (k < 2 || k % 2 != 0) {
        throw InvalidArgument("Watermark: length must be even and >= 2");
    }
    std::vector<std::uint8_t> bits(k, 0);
    std::fill(bits.begin() + static_cast<std::ptrdiff_t>(k / 2), bits.end(), std::uint8_t{1});
    CounterEngine gen{seed};
    for (std::size_t i = k - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(gen, i + 1));
        std::swap(bits[i], bits[j]);
    }
    return Watermark(std::move(bits));
}

Watermark Watermark::parse(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
        line.remove_suffix(1);
    }
    std::vector<std::uint8_t> bits;
    bits.reserve(line.size());
    for (char ch : line) {
        if (ch != '0' && ch != '1') {
            throw InvalidArgument("Watermark: expected only '0'/'1' characters");
        }
        bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    }
    return Watermark(std::move(bits));
}

std::string Watermark::to_string() const {
    std::string out;
    out.reserve(bits_.size());
    for (std::uint8_t b : bits_) out.push_back(static_cast<char>('0' + b));
    return out;
}

namespace {

int hex_nibble(char ch) {
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
    return -1;
}

} // namespace

ModelKey ModelKey::from_hex(std::string_view hex) {
    if (hex.size() != 64) {
        throw InvalidArgument("ModelKey: expected exactly 64 hex characters");
    }
    std::array<std::uint8_t, 32> bytes{};
    for (std::size_t i = 0; i < 32; ++i) {
        const int hi = hex_nibble(hex[2 * i]);
        const int lo = hex_nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw InvalidArgument("ModelKey: invalid hex character");
        bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return ModelKey(bytes);
}

std::string ModelKey::to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (std::uint8_t b : bytes_) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

ModelKey ModelKey::derive(std::uint64_t seed) {
    std::array<std::uint8_t, 32> bytes{};
    for (std::size_t word = 0; word < 4; ++word) {
        const std::uint64_t v = rng::at(seed, word);
        for (std::size_t b = 0; b < 8; ++b) {
            bytes[word * 8 + b] = static_cast<std::uint8_t>(v >> (8 * b));
        }
    }
    return ModelKey(bytes);
}

EmbeddingParams::EmbeddingParams(LatentShape shape_, std::uint32_t k_)
    : shape(shape_), k(k_) {
    if (k < 2 || k % 2 != 0) {
        throw InvalidArgument("EmbeddingParams: k must be even and >= 2");
    }
    const std::size_t r_total = shape.r();
    if (r_total % (2 * static_cast<std::size_t>(k)) != 0) {
        throw InvalidArgument("EmbeddingParams: 2k must divide r = c*h*w");
    }
    if (static_cast<std::size_t>(k) > r_total / 2) {
        throw InvalidArgument("EmbeddingParams: k must be <= r/2");
    }
}

SignPartition partition_and_rank(const GaussianLatent& latent) {
    const std::size_t r = latent.values.size();
    if (r % 4 != 0) {
        throw SizeMismatch("partition_and_rank: r must be divisible by 4");
    }
    const std::size_t quarter = r / 4;

    SignPartition part;
    part.negatives.reserve(r / 2 + 64);
    part.nonnegatives.reserve(r / 2 + 64);
    for (std::size_t i = 0; i < r; ++i) {
        const double v = latent.values[i];
        IndexedValue iv{static_cast<std::uint32_t>(i), v};
        if (v < 0.0) {
            part.negatives.push_back(iv);
        } else {
            part.nonnegatives.push_back(iv);
        }
    }
    if (part.negatives.size() < quarter || part.nonnegatives.size() < quarter) {
        throw ImbalancedSample("partition_and_rank: a sign class has fewer than r/4 members");
    }

    // Descending |value|, ties broken by lower original index.
    const auto by_rank = [](const IndexedValue& a, const IndexedValue& b) {
        const double ma = std::fabs(a.value);
        const double mb = std::fabs(b.value);
        if (ma != mb) return ma > mb;
        return a.index < b.index;
    };

    std::vector<char> selected(r, 0);
    const auto take_top = [&](const std::vector<IndexedValue>& cls) {
        std::vector<IndexedValue> ranked = cls;
        std::sort(ranked.begin(), ranked.end(), by_rank);
        ranked.resize(quarter);
        for (const IndexedValue& iv : ranked) selected[iv.index] = 1;
        return ranked;
    };
    part.large_neg = take_top(part.negatives);
    part.large_pos = take_top(part.nonnegatives);

    part.residual.reserve(r / 2);
    for (std::size_t i = 0; i < r; ++i) {
        if (!selected[i]) {
            part.residual.push_back({static_cast<std::uint32_t>(i), latent.values[i]});
        }
    }
    return part;
}

std::vector<double> build_large_sequence(const Watermark& m, const SignPartition& part,
                                         const EmbeddingParams& params) {
    if (m.k() != params.k) {
        throw LengthMismatch("build_large_sequence: watermark length != params.k");
    }
    const std::size_t quarter = params.r() / 4;
    if (part.large_neg.size() != quarter || part.large_pos.size() != quarter) {
        throw SizeMismatch("build_large_sequence: partition does not match params");
    }
    std::vector<double> z_l;
    z_l.reserve(params.r() / 2);
    std::size_t next_neg = 0;
    std::size_t next_pos = 0;
    for (std::size_t rep = 0; rep < params.repetitions(); ++rep) {
        for (std::uint8_t bit : m.bits()) {
            z_l.push_back(bit ? part.large_pos[next_pos++].value
                              : part.large_neg[next_neg++].value);
        }
    }
    // Balanced payload consumes both pools exactly; guaranteed by the
    // Watermark and EmbeddingParams invariants.
    assert(next_neg == quarter && next_pos == quarter);
    return z_l;
}

std::vector<std::vector<double>> symmetric_grouping(std::span<const double> sorted_half,
                                                    std::size_t group_count) {
    const std::size_t n = sorted_half.size();
    if (group_count == 0 || n == 0 || n % group_count != 0) {
        throw SizeMismatch("symmetric_grouping: group count must divide input length");
    }
    if (!std::is_sorted(sorted_half.begin(), sorted_half.end())) {
        throw InvalidArgument("symmetric_grouping: input must be sorted ascending");
    }
    const std::size_t per_group = n / group_count;

    std::vector<std::vector<double>> groups(group_count);
    for (auto& g : groups) g.reserve(per_group);

    if (per_group == 1) {
        for (std::size_t i = 0; i < n; ++i) groups[i].push_back(sorted_half[i]);
        return groups;
    }

    // With an odd per-group count, hold back the group_count most central
    // elements and distribute them after the pairs.
    const bool has_singles = (per_group % 2 != 0);
    const std::size_t singles_begin = has_singles ? (n - group_count) / 2 : 0;
    const std::size_t singles_end = has_singles ? singles_begin + group_count : 0;

    std::vector<double> paired;
    paired.reserve(has_singles ? n - group_count : n);
    for (std::size_t i = 0; i < n; ++i) {
        if (has_singles && i >= singles_begin && i < singles_end) continue;
        paired.push_back(sorted_half[i]);
    }

    const std::size_t pair_capacity = (per_group - (has_singles ? 1 : 0)) / 2;
    std::vector<double> sums(group_count, 0.0);
    std::vector<std::size_t> pairs_in(group_count, 0);
    double total = 0.0;

    // Pairs are placed heaviest first (ties keep the pairing order); each
    // placement greedily corrects the group lagging farthest behind.
    struct Pair {
        double lo;
        double hi;
        double sum;
    };
    const std::size_t n_pairs = paired.size() / 2;
    std::vector<Pair> pairs;
    pairs.reserve(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const double lo = paired[i];
        const double hi = paired[paired.size() - 1 - i];
        pairs.push_back({lo, hi, lo + hi});
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::fabs(a.sum) > std::fabs(b.sum);
    });

    for (const Pair& pair : pairs) {
        const double lo = pair.lo;
        const double hi = pair.hi;
        const double pair_sum = pair.sum;
        const double mean = total / static_cast<double>(group_count);

        std::size_t best = group_count;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < group_count; ++j) {
            if (pairs_in[j] >= pair_capacity) continue;
            const double dev = sums[j] - mean;
            // Route the pair to the group lagging farthest behind the mean
            // in the pair's direction; lowest index wins ties.
            const double score = (pair_sum <= 0.0) ? dev : -dev;
            if (score > best_score) {
                best_score = score;
                best = j;
            }
        }
        assert(best < group_count);
        // Larger magnitude first within the pair.
        if (std::fabs(lo) >= std::fabs(hi)) {
            groups[best].push_back(lo);
            groups[best].push_back(hi);
        } else {
            groups[best].push_back(hi);
            groups[best].push_back(lo);
        }
        sums[best] += pair_sum;
        pairs_in[best] += 1;
        total += pair_sum;
    }

    if (has_singles) {
        std::vector<char> has_single(group_count, 0);
        for (std::size_t s = singles_begin; s < singles_end; ++s) {
            const double v = sorted_half[s];
            const double mean = total / static_cast<double>(group_count);
            std::size_t best = group_count;
            double best_dev = -1.0;
            for (std::size_t j = 0; j < group_count; ++j) {
                if (has_single[j]) continue;
                const double dev = std::fabs(sums[j] - mean);
                if (dev > best_dev) {
                    best_dev = dev;
                    best = j;
                }
            }
            assert(best < group_count);
            groups[best].push_back(v);
            sums[best] += v;
            has_single[best] = 1;
            total += v;
        }
    }
    return groups;
}

GroupPlan plan_groups(const SignPartition& part, const EmbeddingParams& params) {
    const std::size_t half = params.r() / 2;
    if (part.residual.size() != half) {
        throw SizeMismatch("plan_groups: residual does not match params");
    }
    std::vector<double> sorted_residual;
    sorted_residual.reserve(half);
    for (const IndexedValue& iv : part.residual) sorted_residual.push_back(iv.value);
    std::sort(sorted_residual.begin(), sorted_residual.end());

    const std::span<const double> all(sorted_residual);
    GroupPlan plan;
    plan.neg_groups = symmetric_grouping(all.subspan(0, half / 2), params.groups_per_sign());
    plan.pos_groups = symmetric_grouping(all.subspan(half / 2), params.groups_per_sign());
    return plan;
}

std::vector<double> build_group_sequence(const Watermark& m, const GroupPlan& plan) {
    if (m.k() != plan.neg_groups.size() + plan.pos_groups.size()) {
        throw LengthMismatch("build_group_sequence: watermark length != group count");
    }
    std::vector<double> z_s;
    if (!plan.neg_groups.empty()) {
        z_s.reserve(m.k() * plan.neg_groups.front().size());
    }
    std::size_t next_neg = 0;
    std::size_t next_pos = 0;
    for (std::uint8_t bit : m.bits()) {
        const auto& group = bit ? plan.pos_groups[next_pos++] : plan.neg_groups[next_neg++];
        z_s.insert(z_s.end(), group.begin(), group.end());
    }
    assert(next_neg == plan.neg_groups.size() && next_pos == plan.pos_groups.size());
    return z_s;
}

std::vector<double> interleave(std::span<const double> z_l, std::span<const double> z_s,
                               std::size_t k) {
    if (z_l.size() != z_s.size()) {
        throw SizeMismatch("interleave: inputs must have equal length");
    }
    if (k == 0 || z_l.size() % k != 0) {
        throw SizeMismatch("interleave: k must divide the input length");
    }
    const std::size_t blocks = z_l.size() / k;
    std::vector<double> z_m;
    z_m.reserve(2 * z_l.size());
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t off = b * k;
        z_m.insert(z_m.end(), z_l.begin() + off, z_l.begin() + off + k);
        z_m.insert(z_m.end(), z_s.begin() + off, z_s.begin() + off + k);
    }
    return z_m;
}

std::pair<std::vector<double>, std::vector<double>> deinterleave(std::span<const double> z_m,
                                                                 std::size_t k) {
    if (k == 0 || z_m.size() % (2 * k) != 0) {
        throw SizeMismatch("deinterleave: input length must be a multiple of 2k");
    }
    const std::size_t blocks = z_m.size() / (2 * k);
    std::vector<double> z_l;
    std::vector<double> z_s;
    z_l.reserve(z_m.size() / 2);
    z_s.reserve(z_m.size() / 2);
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t off = 2 * b * k;
        z_l.insert(z_l.end(), z_m.begin() + off, z_m.begin() + off + k);
        z_s.insert(z_s.end(), z_m.begin() + off + k, z_m.begin() + off + 2 * k);
    }
    return {std::move(z_l), std::move(z_s)};
}

std::vector<std::uint32_t> key_permutation(const ModelKey& key, std::size_t n) {
    std::array<std::uint32_t, 8> words{};
    const auto& bytes = key.bytes();
    for (std::size_t i = 0; i < 8; ++i) {
        words[i] = static_cast<std::uint32_t>(bytes[4 * i]) |
                   (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                   (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                   (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    }
    std::seed_seq seq(words.begin(), words.end());
    std::mt19937_64 gen(seq);

    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(gen, i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

GaussianLatent keyed_shuffle(std::span<const double> z_m, const ModelKey& key,
                             const LatentShape& shape) {
    if (z_m.size() != shape.r()) {
        throw SizeMismatch("keyed_shuffle: input length != shape r");
    }
    const auto perm = key_permutation(key, z_m.size());
    std::vector<double> out(z_m.size());
    for (std::size_t pos = 0; pos < z_m.size(); ++pos) {
        out[pos] = z_m[perm[pos]];
    }
    return GaussianLatent(shape, std::move(out));
}

std::vector<double> keyed_unshuffle(const GaussianLatent& latent, const ModelKey& key) {
    const auto perm = key_permutation(key, latent.values.size());
    std::vector<double> out(latent.values.size());
    for (std::size_t pos = 0; pos < latent.values.size(); ++pos) {
        out[perm[pos]] = latent.values[pos];
    }
    return out;
}

GaussianLatent embed(const Watermark& m, Seed seed, const ModelKey& key,
                     const EmbeddingParams& params) {
    if (m.k() != params.k) {
        throw LengthMismatch("embed: watermark length != params.k");
    }
    const GaussianLatent sample = sample_latent(params.shape, seed);
    const SignPartition part = partition_and_rank(sample);
    const std::vector<double> z_l = build_large_sequence(m, part, params);
    const GroupPlan plan = plan_groups(part, params);
    const std::vector<double> z_s = build_group_sequence(m, plan);
    const std::vector<double> z_m = interleave(z_l, z_s, params.k);
    return keyed_shuffle(z_m, key, params.shape);
}

ExtractionResult extract(const GaussianLatent& latent, const ModelKey& key,
                         const EmbeddingParams& params) {
    if (!(latent.shape == params.shape)) {
        throw ShapeMismatch("extract: latent shape does not match params");
    }
    const std::vector<double> z_m = keyed_unshuffle(latent, key);
    auto [z_l, z_s] = deinterleave(z_m, params.k);

    ExtractionResult result;
    result.stream_large.reserve(z_l.size());
    for (double v : z_l) {
        result.stream_large.push_back(v >= 0.0 ? 1 : 0);
    }

    const std::size_t group_size = params.group_size();
    result.stream_groups.reserve(params.k);
    for (std::size_t g = 0; g < params.k; ++g) {
        double sum = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) {
            sum += z_s[g * group_size + i];
        }
        result.stream_groups.push_back(sum >= 0.0 ? 1 : 0);
    }

    std::vector<std::vector<std::uint8_t>> substreams;
    substreams.reserve(params.substream_count());
    for (std::size_t rep = 0; rep < params.repetitions(); ++rep) {
        substreams.emplace_back(result.stream_large.begin() + static_cast<std::ptrdiff_t>(rep * params.k),
                                result.stream_large.begin() + static_cast<std::ptrdiff_t>((rep + 1) * params.k));
    }
    substreams.push_back(result.stream_groups);

    auto [bits, votes] = majority_vote(substreams);
    result.bits = std::move(bits);
    result.votes = std::move(votes);
    return result;
}

std::pair<std::vector<std::uint8_t>, std::vector<VoteTally>>
majority_vote(const std::vector<std::vector<std::uint8_t>>& substreams) {
    if (substreams.empty()) {
        throw EmptyInput("majority_vote: no substreams");
    }
    const std::size_t k = substreams.front().size();
    for (const auto& s : substreams) {
        if (s.size() != k) {
            throw LengthMismatch("majority_vote: substreams must share one length");
        }
    }
    const auto total = static_cast<std::uint32_t>(substreams.size());
    std::vector<std::uint8_t> bits(k);
    std::vector<VoteTally> votes(k);
    for (std::size_t pos = 0; pos < k; ++pos) {
        std::uint32_t ones = 0;
        for (const auto& s : substreams) ones += s[pos];
        votes[pos] = {ones, total};
        bits[pos] = (2 * ones >= total) ? 1 : 0;
    }
    return {std::move(bits), std::move(votes)};
}

std::string extraction_record(const ExtractionResult& result) {
    const auto bits_line = [](const std::vector<std::uint8_t>& bits) {
        std::string out;
        out.reserve(bits.size());
        for (std::uint8_t b : bits) out.push_back(static_cast<char>('0' + b));
        return out;
    };
    std::string out;
    out += "bits=" + bits_line(result.bits) + "\n";
    out += "tallies=";
    for (std::size_t i = 0; i < result.votes.size(); ++i) {
        if (i) out.push_back(' ');
        out += std::to_string(result.votes[i].ones) + "/" + std::to_string(result.votes[i].total);
    }
    out += "\n";
    out += "w1=" + bits_line(result.stream_large) + "\n";
    out += "w2=" + bits_line(result.stream_groups) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Balanced payload adapter (enumerative coding over fixed-weight words).

namespace {

using boost::multiprecision::cpp_int;

cpp_int binomial(std::size_t n, std::size_t r) {
    if (r > n) return 0;
    r = std::min(r, n - r);
    cpp_int acc = 1;
    for (std::size_t i = 1; i <= r; ++i) {
        acc *= static_cast<unsigned long>(n - r + i);
        acc /= static_cast<unsigned long>(i);
    }
    return acc;
}

} // namespace

std::size_t balanced_capacity_bits(std::size_t k) {
    if (k < 2 || k % 2 != 0) {
        throw InvalidArgument("balanced_capacity_bits: k must be even and >= 2");
    }
    const cpp_int count = binomial(k, k / 2);
    return boost::multiprecision::msb(count); // floor(log2 C(k, k/2))
}

Watermark encode_balanced_payload(std::span<const std::uint8_t> message_bits, std::size_t k) {
    const std::size_t capacity = balanced_capacity_bits(k);
    if (message_bits.size() != capacity) {
        throw LengthMismatch("encode_balanced_payload: message must be exactly " +
                             std::to_string(capacity) + " bits for k=" + std::to_string(k));
    }
    cpp_int rank = 0;
    for (std::uint8_t b : message_bits) {
        if (b > 1) throw InvalidArgument("encode_balanced_payload: bits must be 0 or 1");
        rank <<= 1;
        rank |= static_cast<unsigned>(b);
    }

    std::vector<std::uint8_t> bits(k);
    std::size_t ones_left = k / 2;
    // cur = C(remaining, ones_left): completions that place 0 here.
    cpp_int cur = binomial(k - 1, ones_left);
    for (std::size_t pos = 0; pos < k; ++pos) {
        const std::size_t remaining = k - pos - 1;
        if (rank < cur) {
            bits[pos] = 0;
            // C(remaining-1, ones_left) = cur * (remaining - ones_left) / remaining
            if (remaining > 0) {
                cur = cur * static_cast<unsigned long>(remaining - ones_left) /
                      static_cast<unsigned long>(remaining);
            }
        } else {
            bits[pos] = 1;
            rank -= cur;
            // C(remaining-1, ones_left-1) = cur * ones_left / remaining
            if (remaining > 0) {
                cur = cur * static_cast<unsigned long>(ones_left) /
                      static_cast<unsigned long>(remaining);
            }
            --ones_left;
        }
    }
    return Watermark(std::move(bits));
}

std::vector<std::uint8_t> decode_balanced_payload(const Watermark& codeword) {
    const std::size_t k = codeword.k();
    const std::size_t capacity = balanced_capacity_bits(k);
    cpp_int rank = 0;
    std::size_t ones_left = k / 2;
    cpp_int cur = binomial(k - 1, ones_left);
    for (std::size_t pos = 0; pos < k; ++pos) {
        const std::size_t remaining = k - pos - 1;
        if (codeword.bits()[pos] == 0) {
            if (remaining > 0) {
                cur = cur * static_cast<unsigned long>(remaining - ones_left) /
                      static_cast<unsigned long>(remaining);
            }
        } else {
            rank += cur;
            if (remaining > 0) {
                cur = cur * static_cast<unsigned long>(ones_left) /
                      static_cast<unsigned long>(remaining);
            }
            --ones_left;
        }
    }
    if (rank >> capacity != 0) {
        throw OutOfRange("decode_balanced_payload: codeword rank exceeds message range");
    }
    std::vector<std::uint8_t> message(capacity);
    for (std::size_t i = 0; i < capacity; ++i) {
        message[capacity - 1 - i] = static_cast<std::uint8_t>((rank >> i) & 1u);
    }
    return message;
}

} // namespace lwm
