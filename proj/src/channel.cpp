#include "lwm/channel.hpp"

#include <cmath>
#include <cstdio>
#include <charconv>

#include "lwm/errors.hpp"
#include "lwm/normal.hpp"
#include "lwm/rng.hpp"

namespace lwm {

ChannelSpec ChannelSpec::additive_gaussian(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw OutOfRange("ChannelSpec: sigma must be finite and positive");
    }
    ChannelSpec spec;
    spec.kind_ = Kind::AdditiveGaussian;
    spec.sigma_ = sigma;
    return spec;
}

ChannelSpec ChannelSpec::sign_flip(double p_large, double p_small, double abs_threshold) {
    const auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!is_prob(p_large) || !is_prob(p_small)) {
        throw OutOfRange("ChannelSpec: flip probabilities must lie in [0, 1]");
    }
    if (!(abs_threshold >= 0.0) || !std::isfinite(abs_threshold)) {
        throw OutOfRange("ChannelSpec: abs_threshold must be finite and >= 0");
    }
    ChannelSpec spec;
    spec.kind_ = Kind::SignFlip;
    spec.p_large_ = p_large;
    spec.p_small_ = p_small;
    spec.abs_threshold_ = abs_threshold;
    return spec;
}

ChannelSpec ChannelSpec::compose(std::vector<ChannelSpec> parts) {
    if (parts.empty()) {
        throw OutOfRange("ChannelSpec: compose needs at least one part");
    }
    ChannelSpec spec;
    spec.kind_ = Kind::Compose;
    spec.parts_ = std::move(parts);
    return spec;
}

ChannelSpec ChannelSpec::identity() {
    return sign_flip(0.0, 0.0, 0.0);
}

namespace {

double parse_number(std::string_view text, std::string_view what) {
    // std::from_chars<double> handles "0.3" and "1e-6"; reject trailing junk.
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigInvalid("channel spec: bad number for " + std::string(what) + ": '" +
                            std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(text.substr(start));
            return out;
        }
        out.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

// Split a compose body on '|' at nesting depth zero.
std::vector<std::string_view> split_top_level(std::string_view text) {
    std::vector<std::string_view> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(') ++depth;
        else if (text[i] == ')') --depth;
        else if (text[i] == '|' && depth == 0) {
            out.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    out.push_back(text.substr(start));
    return out;
}

} // namespace

ChannelSpec ChannelSpec::parse(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw ConfigInvalid("channel spec: empty");
    if (text == "identity") return identity();
    if (text.starts_with("gauss:")) {
        return additive_gaussian(parse_number(trim(text.substr(6)), "sigma"));
    }
    if (text.starts_with("flip:")) {
        const auto fields = split(text.substr(5), ',');
        if (fields.size() != 3) {
            throw ConfigInvalid("channel spec: flip needs p_large,p_small,abs_threshold");
        }
        return sign_flip(parse_number(trim(fields[0]), "p_large"),
                         parse_number(trim(fields[1]), "p_small"),
                         parse_number(trim(fields[2]), "abs_threshold"));
    }
    if (text.starts_with("compose(") && text.ends_with(")")) {
        const auto body = text.substr(8, text.size() - 9);
        std::vector<ChannelSpec> parts;
        for (std::string_view part : split_top_level(body)) {
            parts.push_back(parse(part));
        }
        return compose(std::move(parts));
    }
    throw ConfigInvalid("channel spec: unrecognized '" + std::string(text) + "'");
}

namespace {

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Use the shortest round-trip form.
    for (int prec = 1; prec < 17; ++prec) {
        char probe[32];
        std::snprintf(probe, sizeof probe, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(probe, "%lf", &back);
        if (back == v) return probe;
    }
    return buf;
}

} // namespace

std::string ChannelSpec::to_string() const {
    switch (kind_) {
        case Kind::AdditiveGaussian:
            return "gauss:" + format_number(sigma_);
        case Kind::SignFlip:
            if (p_large_ == 0.0 && p_small_ == 0.0 && abs_threshold_ == 0.0) return "identity";
            return "flip:" + format_number(p_large_) + "," + format_number(p_small_) + "," +
                   format_number(abs_threshold_);
        case Kind::Compose: {
            std::string out = "compose(";
            for (std::size_t i = 0; i < parts_.size(); ++i) {
                if (i) out.push_back('|');
                out += parts_[i].to_string();
            }
            out.push_back(')');
            return out;
        }
    }
    return {};
}

namespace {

void apply_stage(std::vector<double>& values, const ChannelSpec& spec,
                 std::uint64_t trial_seed, std::uint64_t& stage) {
    switch (spec.kind()) {
        case ChannelSpec::Kind::AdditiveGaussian: {
            const std::uint64_t stream = rng::derive(trial_seed, stage++);
            const double sigma = spec.sigma();
            for (std::size_t i = 0; i < values.size(); ++i) {
                values[i] += sigma * inverse_normal_cdf(rng::uniform_at(stream, i));
            }
            break;
        }
        case ChannelSpec::Kind::SignFlip: {
            const std::uint64_t stream = rng::derive(trial_seed, stage++);
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double p = (std::fabs(values[i]) >= spec.abs_threshold()) ? spec.p_large()
                                                                                : spec.p_small();
                if (rng::uniform_at(stream, i) < p) values[i] = -values[i];
            }
            break;
        }
        case ChannelSpec::Kind::Compose:
            for (const ChannelSpec& part : spec.parts()) {
                apply_stage(values, part, trial_seed, stage);
            }
            break;
    }
}

} // namespace

GaussianLatent apply_channel(const GaussianLatent& z, const ChannelRun& run) {
    std::vector<double> values = z.values;
    std::uint64_t stage = 0;
    apply_stage(values, run.spec, run.trial_seed.value, stage);
    return GaussianLatent(z.shape, std::move(values));
}

double flip_probability(double value, double sigma) {
    if (!(sigma > 0.0)) {
        throw NonpositiveSigma("flip_probability: sigma must be positive");
    }
    return normal_cdf(-std::fabs(value) / sigma);
}

ChannelSpec calibrate_signflip(double target_large, double target_small) {
    const auto in_open_unit = [](double p) { return p > 0.0 && p < 1.0; };
    if (!in_open_unit(target_large) || !in_open_unit(target_small)) {
        throw OutOfRange("calibrate_signflip: consistency targets must lie in (0, 1)");
    }
    return ChannelSpec::sign_flip(1.0 - target_large, 1.0 - target_small,
                                  kLargeMagnitudeThreshold);
}

} // namespace lwm
