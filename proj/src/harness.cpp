#include "lwm/harness.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "lwm/errors.hpp"
#include "lwm/rng.hpp"
#include "lwm/stats.hpp"

namespace lwm {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t pos = s.find(';', start);
        const std::string item =
            trim(pos == std::string::npos ? s.substr(start) : s.substr(start, pos - start));
        if (!item.empty()) out.push_back(item);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_integer(const std::string& text, const char* key) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigInvalid(std::string("config: bad integer for '") + key + "': '" + text + "'");
    }
    return value;
}

double parse_real(const std::string& text, const char* key) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigInvalid(std::string("config: bad number for '") + key + "': '" + text + "'");
    }
    return value;
}

} // namespace

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
    ExperimentConfig cfg;
    std::map<std::string, std::string> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigInvalid("config line " + std::to_string(line_no) +
                                ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (!entries.emplace(key, value).second) {
            throw ConfigInvalid("config: duplicate key '" + key + "'");
        }
    }

    const auto require = [&](const char* key) -> const std::string& {
        const auto it = entries.find(key);
        if (it == entries.end()) {
            throw ConfigInvalid(std::string("config: missing required key '") + key + "'");
        }
        return it->second;
    };

    try {
        cfg.shape = LatentShape::parse(require("shape"));
    } catch (const InvalidArgument& e) {
        throw ConfigInvalid(std::string("config: shape: ") + e.what());
    }
    for (const std::string& item : split_list(require("k"))) {
        cfg.k_values.push_back(parse_integer<std::uint32_t>(item, "k"));
    }
    for (const std::string& item : split_list(require("channels"))) {
        cfg.channels.push_back(ChannelSpec::parse(item));
        cfg.channel_labels.push_back(item);
    }
    cfg.trials = parse_integer<std::uint32_t>(require("trials"), "trials");
    cfg.base_seed = Seed{parse_integer<std::uint64_t>(require("base_seed"), "base_seed")};
    cfg.fpr = parse_real(require("fpr"), "fpr");
    if (const auto it = entries.find("output"); it != entries.end()) {
        cfg.output_path = it->second;
    }

    static const std::set<std::string> known = {"shape", "k",         "channels", "trials",
                                                "base_seed", "fpr",   "output"};
    for (const auto& [key, value] : entries) {
        if (!known.contains(key)) {
            throw ConfigInvalid("config: unknown key '" + key + "'");
        }
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path.string() + "'");
    return parse(in);
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw ConfigInvalid("config: trials must be >= 1");
    if (k_values.empty()) throw ConfigInvalid("config: k list must be non-empty");
    if (channels.empty()) throw ConfigInvalid("config: channels list must be non-empty");
    if (!(fpr > 0.0 && fpr < 1.0)) throw ConfigInvalid("config: fpr must lie in (0, 1)");
    for (std::uint32_t k : k_values) {
        try {
            EmbeddingParams params(shape, k);
        } catch (const InvalidArgument& e) {
            throw ConfigInvalid("config: k=" + std::to_string(k) + " with shape " +
                                shape.to_string() + ": " + e.what());
        }
    }
}

namespace {

struct TrialOutcome {
    std::uint32_t matches = 0;
    bool detected = false;
};

struct TrialInputs {
    Seed sample_seed;
    Watermark watermark;
    ModelKey key;
    Seed channel_seed;
};

TrialInputs derive_trial_inputs(Seed base, std::uint32_t k, std::size_t channel_index,
                                std::uint32_t trial) {
    const std::uint64_t root = rng::derive(
        rng::derive(rng::derive(base.value, k), channel_index), trial);
    TrialInputs in{
        Seed{rng::derive(root, 1)},
        Watermark::random(k, rng::derive(root, 2)),
        ModelKey::derive(rng::derive(root, 3)),
        Seed{rng::derive(root, 4)},
    };
    return in;
}

constexpr int kMaxEmbedAttempts = 8;

GaussianLatent embed_with_retry(const Watermark& m, Seed seed, const ModelKey& key,
                                const EmbeddingParams& params) {
    for (int attempt = 0;; ++attempt) {
        try {
            return embed(m, Seed{seed.value + static_cast<std::uint64_t>(attempt)}, key, params);
        } catch (const ImbalancedSample&) {
            if (attempt + 1 >= kMaxEmbedAttempts) throw;
        }
    }
}

} // namespace

SweepReport run_sweep(const ExperimentConfig& cfg, unsigned workers) {
    cfg.validate();
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }

    SweepReport report;
    for (std::uint32_t k : cfg.k_values) {
        const EmbeddingParams params(cfg.shape, k);
        const DetectionThreshold thresh =
            detection_threshold(k, cfg.fpr);
        for (std::size_t ci = 0; ci < cfg.channels.size(); ++ci) {
            const auto start = std::chrono::steady_clock::now();

            std::vector<TrialOutcome> outcomes(cfg.trials);
            std::atomic<std::uint32_t> next{0};
            const auto worker = [&]() {
                for (;;) {
                    const std::uint32_t trial = next.fetch_add(1);
                    if (trial >= cfg.trials) return;
                    const TrialInputs in =
                        derive_trial_inputs(cfg.base_seed, k, ci, trial);
                    const GaussianLatent clean = embed_with_retry(in.watermark, in.sample_seed,
                                                                  in.key, params);
                    const GaussianLatent noisy =
                        apply_channel(clean, {cfg.channels[ci], in.channel_seed});
                    const ExtractionResult res = extract(noisy, in.key, params);
                    TrialOutcome out;
                    out.matches = match_count(in.watermark.bits(), res.bits);
                    out.detected = out.matches > thresh.tau;
                    outcomes[trial] = out;
                }
            };

            if (workers == 1) {
                worker();
            } else {
                std::vector<std::thread> pool;
                pool.reserve(workers);
                for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
                for (auto& t : pool) t.join();
            }

            // Aggregate in trial order from exact counts so the result does
            // not depend on scheduling.
            std::uint64_t total_matches = 0;
            std::uint64_t detections = 0;
            for (const TrialOutcome& out : outcomes) {
                total_matches += out.matches;
                detections += out.detected;
            }
            const double denom = static_cast<double>(cfg.trials) * static_cast<double>(k);
            const double mean = static_cast<double>(total_matches) / denom;
            double m2 = 0.0;
            double comp = 0.0; // Kahan compensation
            for (const TrialOutcome& out : outcomes) {
                const double acc = static_cast<double>(out.matches) / static_cast<double>(k);
                const double d = (acc - mean) * (acc - mean);
                const double y = d - comp;
                const double t = m2 + y;
                comp = (t - m2) - y;
                m2 = t;
            }
            const double stddev =
                (cfg.trials > 1) ? std::sqrt(m2 / static_cast<double>(cfg.trials - 1)) : 0.0;
            const auto elapsed = std::chrono::duration<double, std::milli>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();

            SweepRow row;
            row.k = k;
            row.tau = thresh.tau;
            row.fpr = cfg.fpr;
            row.channel = cfg.channel_labels[ci];
            row.trials = cfg.trials;
            row.bit_acc_mean = mean;
            row.bit_acc_std = stddev;
            row.tpr = static_cast<double>(detections) / static_cast<double>(cfg.trials);
            row.wall_ms = elapsed;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

void SweepReport::write_csv(std::ostream& out, bool include_wall_time) const {
    out << "k,tau,fpr,channel,trials,bit_acc_mean,bit_acc_std,tpr";
    if (include_wall_time) out << ",wall_ms";
    out << "\n";
    char buf[256];
    for (const SweepRow& row : rows) {
        std::snprintf(buf, sizeof buf, "%u,%u,%g,\"%s\",%u,%.9f,%.9f,%.6f", row.k, row.tau,
                      row.fpr, row.channel.c_str(), row.trials, row.bit_acc_mean,
                      row.bit_acc_std, row.tpr);
        out << buf;
        if (include_wall_time) {
            std::snprintf(buf, sizeof buf, ",%.1f", row.wall_ms);
            out << buf;
        }
        out << "\n";
    }
}

std::string SweepReport::to_csv(bool include_wall_time) const {
    std::ostringstream out;
    write_csv(out, include_wall_time);
    return out.str();
}

} // namespace lwm
