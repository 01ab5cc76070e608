#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lwm/latent.hpp"

namespace lwm {

// Default magnitude boundary between "large" and "small" elements: the
// upper quartile of |N(0,1)|.
inline constexpr double kLargeMagnitudeThreshold = 0.675;

// Parametric perturbation of a latent vector. The compact string grammar is
//   gauss:SIGMA
//   flip:P_LARGE,P_SMALL,ABS_THRESHOLD
//   identity                       (sugar for flip:0,0,0)
//   compose(SPEC|SPEC|...)
class ChannelSpec {
public:
    enum class Kind { AdditiveGaussian, SignFlip, Compose };

    static ChannelSpec additive_gaussian(double sigma);
    static ChannelSpec sign_flip(double p_large, double p_small, double abs_threshold);
    static ChannelSpec compose(std::vector<ChannelSpec> parts);
    static ChannelSpec identity();

    static ChannelSpec parse(std::string_view text); // throws ConfigInvalid
    std::string to_string() const;

    Kind kind() const { return kind_; }
    double sigma() const { return sigma_; }
    double p_large() const { return p_large_; }
    double p_small() const { return p_small_; }
    double abs_threshold() const { return abs_threshold_; }
    const std::vector<ChannelSpec>& parts() const { return parts_; }

private:
    ChannelSpec() = default;

    Kind kind_ = Kind::SignFlip;
    double sigma_ = 0.0;
    double p_large_ = 0.0;
    double p_small_ = 0.0;
    double abs_threshold_ = 0.0;
    std::vector<ChannelSpec> parts_;
};

// One deterministic channel application: output is a pure function of
// (input, spec, trial_seed).
struct ChannelRun {
    ChannelSpec spec;
    Seed trial_seed;
};

// AdditiveGaussian adds i.i.d. N(0, sigma^2) per element; SignFlip negates
// each element independently with probability p_large when |value| >=
// abs_threshold else p_small; Compose applies its parts in order with
// domain-separated noise streams per stage. Element i of stage s draws from
// the counter stream derive(derive(trial_seed, s), 0) at index i, so output
// is independent of evaluation order.
GaussianLatent apply_channel(const GaussianLatent& z, const ChannelRun& run);

// Analytic oracle for AdditiveGaussian: probability that adding N(0,sigma^2)
// flips the sign of `value`, i.e. Phi(-|value|/sigma). Throws
// NonpositiveSigma for sigma <= 0.
double flip_probability(double value, double sigma);

// Builds the SignFlip channel whose per-class sign-consistency targets are
// (target_large, target_small) at the quartile threshold 0.675.
ChannelSpec calibrate_signflip(double target_large, double target_small);

} // namespace lwm
