#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lwm/codec.hpp"

namespace lwm {

// Detection threshold for K-bit watermarks under the null model of
// independent fair-coin bit matches: tau is the smallest integer such that
// P(Bin(K, 1/2) >= tau) <= fpr_bound, computed with exact big-integer
// tails. The detector itself requires strictly more than tau matches, so
// its realized false-positive rate P(Bin > tau) is below the bound as well.
struct DetectionThreshold {
    std::uint32_t k_bits = 0;
    std::uint32_t tau = 0; // may equal k_bits + 1 when no feasible tau exists
    double fpr_bound = 0.0;
};

DetectionThreshold detection_threshold(std::uint32_t k_bits, double fpr);

// Fraction of positions where the sequences agree.
double bit_accuracy(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

std::uint32_t match_count(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

// True iff the match count strictly exceeds thresh.tau.
bool detect(std::span<const std::uint8_t> m, std::span<const std::uint8_t> m_prime,
            const DetectionThreshold& thresh);

double tpr_over_samples(
    const std::vector<std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>>>& pairs,
    const DetectionThreshold& thresh);

// Registry of per-user signatures, bit-packed for fast matching.
class AttributionDirectory {
public:
    // tau_attr defaults to detection_threshold(K, fpr / n_users).tau, the
    // union-bound correction for matching against n_users signatures.
    AttributionDirectory(std::vector<Watermark> signatures, double fpr);
    AttributionDirectory(std::vector<Watermark> signatures, std::uint32_t tau_attr);

    std::size_t user_count() const { return signatures_.size(); }
    std::size_t k_bits() const { return k_bits_; }
    std::uint32_t tau_attr() const { return tau_attr_; }
    const std::vector<Watermark>& signatures() const { return signatures_; }

    friend struct AttributionAccess;

private:
    void build_packed();

    std::vector<Watermark> signatures_;
    std::size_t k_bits_ = 0;
    std::uint32_t tau_attr_ = 0;
    std::size_t words_per_sig_ = 0;
    std::vector<std::uint64_t> packed_;
};

struct AttributionResult {
    std::optional<std::size_t> user; // none when below threshold or tied
    std::uint32_t match_count = 0;   // best match count observed
};

// Best-matching user iff its match count strictly exceeds tau_attr and is
// unique at the top; ambiguous ties attribute to nobody.
AttributionResult attribute(std::span<const std::uint8_t> m_prime,
                            const AttributionDirectory& directory);

struct TTestResult {
    double t_value = 0.0;
    double df = 0.0;
    bool significant = false; // |t| > 2.101
};

// Fixed decision threshold used by welch_ttest: the two-sided 5% critical
// value of Student's t at 18 degrees of freedom.
inline constexpr double kTTestThreshold = 2.101;

// Two-sample t statistic with Welch-Satterthwaite degrees of freedom.
// Throws DegenerateSample when either sample has fewer than two values or
// both variances vanish.
TTestResult welch_ttest(std::span<const double> sample_a, std::span<const double> sample_b);

// Two-sided p-value for a t statistic at `df` degrees of freedom, via the
// regularized incomplete beta function (continued-fraction evaluation).
double t_test_p_value(double t, double df);

} // namespace lwm
