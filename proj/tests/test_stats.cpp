#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lwm/codec.hpp"
#include "lwm/errors.hpp"
#include "lwm/normal.hpp"
#include "lwm/rng.hpp"
#include "lwm/stats.hpp"
#include "oracles.hpp"

using namespace lwm;

TEST_CASE("bit accuracy counts matching positions") {
    const std::vector<std::uint8_t> a{0, 1, 1, 0};
    CHECK(bit_accuracy(a, a) == doctest::Approx(1.0));
    CHECK(bit_accuracy(a, std::vector<std::uint8_t>{0, 1, 0, 0}) == doctest::Approx(0.75));
    const std::vector<std::uint8_t> complement{1, 0, 0, 1};
    CHECK(bit_accuracy(a, complement) == doctest::Approx(0.0));
    CHECK(bit_accuracy(a, complement) == bit_accuracy(complement, a));
    CHECK_THROWS_AS(bit_accuracy(a, std::vector<std::uint8_t>{0, 1}), LengthMismatch);
}

TEST_CASE("detection thresholds reproduce 30/41/167 at FPR 1e-6") {
    CHECK(detection_threshold(32, 1e-6).tau == 30);
    CHECK(detection_threshold(48, 1e-6).tau == 41);
    CHECK(detection_threshold(256, 1e-6).tau == 167);
}

TEST_CASE("thresholds agree with the Pascal-triangle oracle and are minimal") {
    for (const std::uint32_t k : {32u, 48u, 256u}) {
        for (const double fpr : {1e-4, 1e-6}) {
            const DetectionThreshold thresh = detection_threshold(k, fpr);
            CHECK(thresh.tau == oracle::threshold_from_pascal(k, fpr));
            // tau satisfies the bound; tau - 1 violates it.
            CHECK(oracle::binomial_half_tail_ge(k, thresh.tau) <=
                  static_cast<long double>(fpr));
            CHECK(oracle::binomial_half_tail_ge(k, thresh.tau - 1) >
                  static_cast<long double>(fpr));
        }
    }
    // Degenerate: no feasible threshold for tiny K means tau = K + 1 and the
    // strict detector can never fire.
    CHECK(detection_threshold(8, 1e-6).tau == 9);
    CHECK_THROWS_AS(detection_threshold(32, 0.0), OutOfRange);
    CHECK_THROWS_AS(detection_threshold(32, 1.0), OutOfRange);
}

TEST_CASE("detect requires strictly more matches than tau") {
    const DetectionThreshold thresh = detection_threshold(256, 1e-6);
    REQUIRE(thresh.tau == 167);
    std::vector<std::uint8_t> m(256, 0);
    for (std::size_t i = 0; i < 128; ++i) m[i] = 1;

    const auto with_matches = [&](std::uint32_t matches) {
        std::vector<std::uint8_t> probe = m;
        for (std::size_t i = 0; i < 256 - matches; ++i) probe[i] = 1 - probe[i];
        return probe;
    };
    CHECK(detect(m, with_matches(168), thresh));
    CHECK_FALSE(detect(m, with_matches(167), thresh));

    // Monotonicity: raising the match count never turns detection off.
    bool was_detected = false;
    for (std::uint32_t matches = 160; matches <= 256; ++matches) {
        const bool now = detect(m, with_matches(matches), thresh);
        CHECK((now || !was_detected));
        was_detected = now;
    }
    CHECK(was_detected);
    CHECK_THROWS_AS(detect(m, std::vector<std::uint8_t>(255, 0), thresh), LengthMismatch);
}

TEST_CASE("random 256-bit pairs essentially never cross tau = 167") {
    // 1e7 null trials via packed words; expected positives ~ 3 (exact tail
    // 3.24e-7), far below the 1e-5 rate gate.
    const DetectionThreshold thresh = detection_threshold(256, 1e-6);
    std::size_t positives = 0;
    for (std::uint64_t trial = 0; trial < 10000000; ++trial) {
        const std::uint64_t seed = rng::derive(424242, trial);
        std::uint32_t mismatches = 0;
        for (std::uint64_t w = 0; w < 4; ++w) {
            mismatches += static_cast<std::uint32_t>(std::popcount(rng::at(seed, w)));
        }
        positives += ((256 - mismatches) > thresh.tau);
    }
    CHECK(static_cast<double>(positives) / 1e7 <= 1e-5);

    // Bridge the packed counting used above to the public match_count on a
    // sample of trials.
    for (std::uint64_t trial = 0; trial < 200; ++trial) {
        const std::uint64_t seed = rng::derive(424242, trial);
        std::vector<std::uint8_t> a(256), b(256);
        std::uint32_t packed_mismatches = 0;
        for (std::uint64_t w = 0; w < 4; ++w) {
            const std::uint64_t bits = rng::at(seed, w);
            packed_mismatches += static_cast<std::uint32_t>(std::popcount(bits));
            for (std::size_t i = 0; i < 64; ++i) {
                a[w * 64 + i] = 0;
                b[w * 64 + i] = (bits >> i) & 1u;
            }
        }
        CHECK(match_count(a, b) == 256 - packed_mismatches);
    }
}

TEST_CASE("tpr averages detection over pairs") {
    const DetectionThreshold thresh = detection_threshold(32, 1e-6);
    const Watermark m = Watermark::random(32, 1);
    std::vector<std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>>> pairs;
    for (int i = 0; i < 5; ++i) pairs.emplace_back(m.bits(), m.bits());
    CHECK(tpr_over_samples(pairs, thresh) == doctest::Approx(1.0));

    // 7 hits, 3 misses -> 0.7
    std::vector<std::uint8_t> miss = m.bits();
    for (auto& b : miss) b = 1 - b;
    pairs.clear();
    for (int i = 0; i < 7; ++i) pairs.emplace_back(m.bits(), m.bits());
    for (int i = 0; i < 3; ++i) pairs.emplace_back(m.bits(), miss);
    CHECK(tpr_over_samples(pairs, thresh) == doctest::Approx(0.7));

    CHECK_THROWS_AS(tpr_over_samples({}, thresh), EmptyInput);

    // Independent random pairs: zero detections over 1e4 trials.
    pairs.clear();
    for (std::uint64_t t = 0; t < 10000; ++t) {
        std::vector<std::uint8_t> x(32), y(32);
        for (std::size_t i = 0; i < 32; ++i) {
            x[i] = rng::uniform_at(rng::derive(1, t), i) < 0.5;
            y[i] = rng::uniform_at(rng::derive(2, t), i) < 0.5;
        }
        pairs.emplace_back(std::move(x), std::move(y));
    }
    CHECK(tpr_over_samples(pairs, detection_threshold(32, 1e-6)) == doctest::Approx(0.0));
}

TEST_CASE("attribution finds the unique matching signature") {
    const Watermark m = Watermark::random(256, 5);
    {
        AttributionDirectory dir({m}, 1e-6);
        const AttributionResult res = attribute(m.bits(), dir);
        REQUIRE(res.user.has_value());
        CHECK(*res.user == 0);
        CHECK(res.match_count == 256);
    }
    {
        // Two complementary signatures; probe is signature 1 with 10 flips.
        std::vector<std::uint8_t> complement = m.bits();
        for (auto& b : complement) b = 1 - b;
        AttributionDirectory dir({m, Watermark(complement)}, 1e-6);
        std::vector<std::uint8_t> probe = complement;
        for (std::size_t i = 0; i < 10; ++i) probe[i] = 1 - probe[i];
        const AttributionResult res = attribute(probe, dir);
        REQUIRE(res.user.has_value());
        CHECK(*res.user == 1);
        CHECK(res.match_count == 246);
    }
}

TEST_CASE("ambiguous attribution ties return nobody") {
    // Two signatures at Hamming distance 8; the probe sits exactly halfway.
    const Watermark s1 = Watermark::random(32, 9);
    std::vector<std::uint8_t> bits2 = s1.bits();
    std::size_t flipped_ones = 0;
    std::size_t flipped_zeros = 0;
    for (std::size_t i = 0; i < 32 && (flipped_ones < 4 || flipped_zeros < 4); ++i) {
        if (bits2[i] == 1 && flipped_ones < 4) {
            bits2[i] = 0;
            ++flipped_ones;
        } else if (bits2[i] == 0 && flipped_zeros < 4) {
            bits2[i] = 1;
            ++flipped_zeros;
        }
    }
    const Watermark s2(bits2);

    std::vector<std::uint8_t> probe = s1.bits();
    std::size_t moved = 0;
    for (std::size_t i = 0; i < 32 && moved < 4; ++i) {
        if (probe[i] != s2.bits()[i]) {
            probe[i] = s2.bits()[i];
            ++moved;
        }
    }
    AttributionDirectory dir({s1, s2}, std::uint32_t{20});
    const AttributionResult res = attribute(probe, dir);
    CHECK(res.match_count == 28);
    CHECK_FALSE(res.user.has_value());
}

TEST_CASE("a sea of unrelated signatures attracts no attribution") {
    std::vector<Watermark> signatures;
    signatures.reserve(1000);
    for (std::uint64_t u = 0; u < 1000; ++u) {
        signatures.push_back(Watermark::random(256, rng::derive(3000, u)));
    }
    AttributionDirectory dir(std::move(signatures), 1e-6);
    CHECK(dir.tau_attr() == 176); // union bound at fpr 1e-9 per user

    std::size_t false_hits = 0;
    for (std::uint64_t t = 0; t < 100000; ++t) {
        std::vector<std::uint8_t> probe(256);
        const std::uint64_t seed = rng::derive(4000, t);
        for (std::uint64_t w = 0; w < 4; ++w) {
            const std::uint64_t bits = rng::at(seed, w);
            for (std::size_t i = 0; i < 64; ++i) probe[w * 64 + i] = (bits >> i) & 1u;
        }
        false_hits += attribute(probe, dir).user.has_value();
    }
    CHECK(false_hits == 0);
}

TEST_CASE("attribution directory validates its inputs") {
    CHECK_THROWS_AS(AttributionDirectory({}, 1e-6), EmptyDirectory);
    const Watermark m = Watermark::random(32, 1);
    CHECK_THROWS_AS(AttributionDirectory({m, m}, 1e-6), InvalidArgument);
    CHECK_THROWS_AS(AttributionDirectory({m, Watermark::random(64, 2)}, 1e-6),
                    LengthMismatch);
    AttributionDirectory dir({m}, 1e-6);
    CHECK_THROWS_AS(attribute(std::vector<std::uint8_t>(16, 0), dir), LengthMismatch);
}

TEST_CASE("welch t-test basics") {
    const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    const TTestResult same = welch_ttest(a, a);
    CHECK(same.t_value == doctest::Approx(0.0));
    CHECK_FALSE(same.significant);

    std::vector<double> shifted;
    for (double v : a) shifted.push_back(v + 100.0);
    const TTestResult apart = welch_ttest(shifted, a);
    CHECK(apart.t_value > 50.0);
    CHECK(apart.significant);

    CHECK_THROWS_AS(welch_ttest(std::vector<double>{1.0}, a), DegenerateSample);
    CHECK_THROWS_AS(welch_ttest(std::vector<double>{2.0, 2.0}, std::vector<double>{3.0, 3.0}),
                    DegenerateSample);
}

TEST_CASE("t distribution tail values") {
    // 2.101 is the two-sided 5% critical value at 18 degrees of freedom.
    CHECK(t_test_p_value(2.101, 18.0) == doctest::Approx(0.05).epsilon(0.01));
    // Large df converges to the normal tail.
    CHECK(t_test_p_value(1.959964, 1e7) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(t_test_p_value(0.0, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("welch test at the fixed threshold holds its size") {
    // Two N(0,1) samples of ten values each; the |t| > 2.101 rule should
    // reject close to 5% of the time.
    std::size_t rejects = 0;
    const std::size_t reps = 10000;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        std::vector<double> a(10);
        std::vector<double> b(10);
        const std::uint64_t sa = rng::derive(5000, rep);
        const std::uint64_t sb = rng::derive(6000, rep);
        for (std::size_t i = 0; i < 10; ++i) {
            a[i] = inverse_normal_cdf(rng::uniform_at(sa, i));
            b[i] = inverse_normal_cdf(rng::uniform_at(sb, i));
        }
        rejects += welch_ttest(a, b).significant;
    }
    const double rate = static_cast<double>(rejects) / static_cast<double>(reps);
    CHECK(rate > 0.04);
    CHECK(rate < 0.06);
}
