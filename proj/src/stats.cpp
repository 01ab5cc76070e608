#include "lwm/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>

#include <boost/multiprecision/cpp_int.hpp>

#include "lwm/errors.hpp"

namespace lwm {

namespace {

using boost::multiprecision::cpp_int;

// Exact comparison of an integer tail sum S against fpr * 2^K. A double is
// a dyadic rational, so fpr = m53 * 2^(e-53) with integral m53 and the
// comparison reduces to big-integer shifts; no floating-point rounding can
// leak into the threshold decision.
bool tail_within_bound(const cpp_int& tail_sum, std::uint32_t k_bits, double fpr) {
    int exp2 = 0;
    const double mant = std::frexp(fpr, &exp2);
    const auto m53 = static_cast<std::int64_t>(std::ldexp(mant, 53));
    const int shift = exp2 + static_cast<int>(k_bits) - 53;
    if (shift >= 0) {
        return tail_sum <= (cpp_int(m53) << shift);
    }
    return (tail_sum << -shift) <= cpp_int(m53);
}

} // namespace

DetectionThreshold detection_threshold(std::uint32_t k_bits, double fpr) {
    if (k_bits < 1) throw OutOfRange("detection_threshold: K must be >= 1");
    if (!(fpr > 0.0 && fpr < 1.0)) {
        throw OutOfRange("detection_threshold: fpr must lie in (0, 1)");
    }
    // Walk tau downward from K+1 (empty tail) accumulating C(K, tau) until
    // the bound breaks; the last tau that satisfied it is minimal.
    cpp_int tail = 0;
    cpp_int coeff = 1; // C(K, K)
    std::uint32_t tau = k_bits + 1;
    for (std::uint32_t j = k_bits;; --j) {
        const cpp_int candidate = tail + coeff;
        if (!tail_within_bound(candidate, k_bits, fpr)) break;
        tail = candidate;
        tau = j;
        if (j == 0) break;
        // C(K, j-1) = C(K, j) * j / (K - j + 1)
        coeff *= j;
        coeff /= (k_bits - j + 1);
    }
    return {k_bits, tau, fpr};
}

double bit_accuracy(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) {
        throw LengthMismatch("bit_accuracy: sequences must have equal length");
    }
    if (a.empty()) throw LengthMismatch("bit_accuracy: sequences must be non-empty");
    std::size_t matches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        matches += (a[i] == b[i]);
    }
    return static_cast<double>(matches) / static_cast<double>(a.size());
}

std::uint32_t match_count(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) {
        throw LengthMismatch("match_count: sequences must have equal length");
    }
    std::uint32_t matches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        matches += (a[i] == b[i]);
    }
    return matches;
}

bool detect(std::span<const std::uint8_t> m, std::span<const std::uint8_t> m_prime,
            const DetectionThreshold& thresh) {
    if (m.size() != thresh.k_bits || m_prime.size() != thresh.k_bits) {
        throw LengthMismatch("detect: sequences must have length K");
    }
    return match_count(m, m_prime) > thresh.tau;
}

double tpr_over_samples(
    const std::vector<std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>>>& pairs,
    const DetectionThreshold& thresh) {
    if (pairs.empty()) throw EmptyInput("tpr_over_samples: no pairs");
    std::size_t hits = 0;
    for (const auto& [m, m_prime] : pairs) {
        hits += detect(m, m_prime, thresh);
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

AttributionDirectory::AttributionDirectory(std::vector<Watermark> signatures, double fpr)
    : signatures_(std::move(signatures)) {
    if (signatures_.empty()) throw EmptyDirectory("AttributionDirectory: no signatures");
    k_bits_ = signatures_.front().k();
    build_packed();
    tau_attr_ = detection_threshold(static_cast<std::uint32_t>(k_bits_),
                                    fpr / static_cast<double>(signatures_.size()))
                    .tau;
}

AttributionDirectory::AttributionDirectory(std::vector<Watermark> signatures,
                                           std::uint32_t tau_attr)
    : signatures_(std::move(signatures)), tau_attr_(tau_attr) {
    if (signatures_.empty()) throw EmptyDirectory("AttributionDirectory: no signatures");
    k_bits_ = signatures_.front().k();
    build_packed();
}

void AttributionDirectory::build_packed() {
    std::set<std::string> seen;
    for (const Watermark& sig : signatures_) {
        if (sig.k() != k_bits_) {
            throw LengthMismatch("AttributionDirectory: signatures must share one length");
        }
        if (!seen.insert(sig.to_string()).second) {
            throw InvalidArgument("AttributionDirectory: signatures must be pairwise distinct");
        }
    }
    words_per_sig_ = (k_bits_ + 63) / 64;
    packed_.assign(signatures_.size() * words_per_sig_, 0);
    for (std::size_t u = 0; u < signatures_.size(); ++u) {
        const auto& bits = signatures_[u].bits();
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i]) {
                packed_[u * words_per_sig_ + i / 64] |= (std::uint64_t{1} << (i % 64));
            }
        }
    }
}

struct AttributionAccess {
    static std::uint32_t matches(const AttributionDirectory& dir, std::size_t user,
                                 const std::vector<std::uint64_t>& probe) {
        std::uint32_t mismatches = 0;
        const std::uint64_t* sig = dir.packed_.data() + user * dir.words_per_sig_;
        for (std::size_t w = 0; w < dir.words_per_sig_; ++w) {
            mismatches += static_cast<std::uint32_t>(std::popcount(sig[w] ^ probe[w]));
        }
        return static_cast<std::uint32_t>(dir.k_bits_) - mismatches;
    }
};

AttributionResult attribute(std::span<const std::uint8_t> m_prime,
                            const AttributionDirectory& directory) {
    if (m_prime.size() != directory.k_bits()) {
        throw LengthMismatch("attribute: probe length must match signature length");
    }
    const std::size_t words = (directory.k_bits() + 63) / 64;
    std::vector<std::uint64_t> probe(words, 0);
    for (std::size_t i = 0; i < m_prime.size(); ++i) {
        if (m_prime[i]) probe[i / 64] |= (std::uint64_t{1} << (i % 64));
    }

    std::uint32_t best = 0;
    std::size_t best_user = 0;
    bool tie = false;
    for (std::size_t u = 0; u < directory.user_count(); ++u) {
        const std::uint32_t m = AttributionAccess::matches(directory, u, probe);
        if (m > best) {
            best = m;
            best_user = u;
            tie = false;
        } else if (m == best && u != 0) {
            tie = true;
        }
    }
    AttributionResult result;
    result.match_count = best;
    if (best > directory.tau_attr() && !tie) {
        result.user = best_user;
    }
    return result;
}

TTestResult welch_ttest(std::span<const double> sample_a, std::span<const double> sample_b) {
    const std::size_t na = sample_a.size();
    const std::size_t nb = sample_b.size();
    if (na < 2 || nb < 2) {
        throw DegenerateSample("welch_ttest: each sample needs at least two values");
    }
    const auto moments = [](std::span<const double> s) {
        double mean = 0.0;
        for (double v : s) mean += v;
        mean /= static_cast<double>(s.size());
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s.size() - 1);
        return std::pair{mean, var};
    };
    const auto [mean_a, var_a] = moments(sample_a);
    const auto [mean_b, var_b] = moments(sample_b);
    if (var_a == 0.0 && var_b == 0.0) {
        throw DegenerateSample("welch_ttest: both samples have zero variance");
    }
    const double se_a = var_a / static_cast<double>(na);
    const double se_b = var_b / static_cast<double>(nb);
    const double t = (mean_a - mean_b) / std::sqrt(se_a + se_b);
    const double df = (se_a + se_b) * (se_a + se_b) /
                      (se_a * se_a / static_cast<double>(na - 1) +
                       se_b * se_b / static_cast<double>(nb - 1));
    return {t, df, std::fabs(t) > kTTestThreshold};
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta for Student-t tail probabilities.

namespace {

// Continued fraction for I_x(a,b) (Lentz's method, as in Numerical Recipes).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

} // namespace

double t_test_p_value(double t, double df) {
    if (!(df > 0.0)) throw OutOfRange("t_test_p_value: df must be positive");
    const double x = df / (df + t * t);
    return reg_inc_beta(df / 2.0, 0.5, x);
}

} // namespace lwm
