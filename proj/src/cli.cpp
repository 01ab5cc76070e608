#include "lwm/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lwm/channel.hpp"
#include "lwm/codec.hpp"
#include "lwm/errors.hpp"
#include "lwm/harness.hpp"
#include "lwm/latent.hpp"
#include "lwm/normal.hpp"
#include "lwm/stats.hpp"

namespace lwm {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kMaxEmbedAttempts = 8;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("write to '" + path + "' failed");
}

struct EmbedArgs {
    std::uint32_t k = 256;
    std::uint64_t seed = 0;
    std::string key_hex;
    std::string shape = "4x64x64";
    std::string out_path;
    std::string watermark_path;
    std::string watermark_out_path;
};

int run_embed(const EmbedArgs& args) {
    const LatentShape shape = LatentShape::parse(args.shape);
    const EmbeddingParams params(shape, args.k);
    const ModelKey key = ModelKey::from_hex(args.key_hex);

    Watermark m = args.watermark_path.empty()
                      ? Watermark::random(args.k, args.seed)
                      : Watermark::parse(read_text_file(args.watermark_path));
    if (m.k() != args.k) {
        throw LengthMismatch("watermark file has " + std::to_string(m.k()) +
                             " bits, expected " + std::to_string(args.k));
    }

    GaussianLatent latent = [&] {
        for (int attempt = 0;; ++attempt) {
            try {
                return embed(m, Seed{args.seed + static_cast<std::uint64_t>(attempt)}, key,
                             params);
            } catch (const ImbalancedSample&) {
                if (attempt + 1 >= kMaxEmbedAttempts) throw;
            }
        }
    }();
    write_lwm1(std::filesystem::path(args.out_path), latent);

    if (args.watermark_path.empty() || !args.watermark_out_path.empty()) {
        const std::string wm_path = args.watermark_out_path.empty()
                                        ? args.out_path + ".wm"
                                        : args.watermark_out_path;
        write_text_file(wm_path, m.to_string() + "\n");
    }
    return kExitOk;
}

struct ExtractArgs {
    std::string in_path;
    std::string key_hex;
    std::uint32_t k = 256;
    std::string report_path;
    std::string expect_path;
};

int run_extract(const ExtractArgs& args) {
    const GaussianLatent latent = read_lwm1(std::filesystem::path(args.in_path));
    const EmbeddingParams params(latent.shape, args.k);
    const ModelKey key = ModelKey::from_hex(args.key_hex);
    const ExtractionResult result = extract(latent, key, params);

    std::string record;
    record += "k=" + std::to_string(args.k) + "\n";
    record += "shape=" + latent.shape.to_string() + "\n";
    record += extraction_record(result);
    if (!args.expect_path.empty()) {
        const Watermark expected = Watermark::parse(read_text_file(args.expect_path));
        if (expected.k() != result.bits.size()) {
            throw LengthMismatch("expected watermark length does not match k");
        }
        const std::uint32_t matches = match_count(expected.bits(), result.bits);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f",
                      static_cast<double>(matches) / static_cast<double>(args.k));
        record += "expected=" + expected.to_string() + "\n";
        record += "matches=" + std::to_string(matches) + "\n";
        record += "bit_accuracy=" + std::string(buf) + "\n";
    }
    write_text_file(args.report_path, record);
    return kExitOk;
}

struct ChannelArgs {
    std::string in_path;
    std::string spec;
    std::uint64_t trial_seed = 0;
    std::string out_path;
};

int run_channel(const ChannelArgs& args) {
    const GaussianLatent latent = read_lwm1(std::filesystem::path(args.in_path));
    const ChannelSpec spec = ChannelSpec::parse(args.spec);
    const GaussianLatent noisy = apply_channel(latent, {spec, Seed{args.trial_seed}});
    write_lwm1(std::filesystem::path(args.out_path), noisy);
    return kExitOk;
}

int run_threshold(std::uint32_t k, double fpr) {
    const DetectionThreshold thresh = detection_threshold(k, fpr);
    std::printf("tau=%u\n", thresh.tau);
    return kExitOk;
}

int run_sweep_cmd(const std::string& config_path, const std::string& out_path,
                  unsigned workers) {
    ExperimentConfig cfg = ExperimentConfig::parse_file(config_path);
    if (!out_path.empty()) cfg.output_path = out_path;
    if (cfg.output_path.empty()) {
        throw ConfigInvalid("sweep: no output path (config 'output' or --out)");
    }
    const SweepReport report = run_sweep(cfg, workers);
    std::ofstream out(cfg.output_path);
    if (!out) throw IoError("cannot open '" + cfg.output_path + "' for writing");
    report.write_csv(out);
    return kExitOk;
}

int run_selftest() {
    int failures = 0;
    const auto check = [&](bool ok, const char* label) {
        std::printf("%s %s\n", ok ? "ok  " : "FAIL", label);
        if (!ok) ++failures;
    };

    check(detection_threshold(32, 1e-6).tau == 30 && detection_threshold(48, 1e-6).tau == 41 &&
              detection_threshold(256, 1e-6).tau == 167,
          "detection thresholds 30/41/167");

    const LatentShape shape(4, 64, 64);
    const EmbeddingParams params(shape, 256);
    bool roundtrip = true;
    bool multiset = true;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const Watermark m = Watermark::random(256, 1000 + i);
        const ModelKey key = ModelKey::derive(2000 + i);
        const GaussianLatent z = embed(m, Seed{i}, key, params);
        roundtrip = roundtrip && (extract(z, key, params).bits == m.bits());
        std::vector<double> a = z.values;
        std::vector<double> b = sample_latent(shape, Seed{i}).values;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        multiset = multiset && (a == b);
    }
    check(roundtrip, "lossless round trip (20 trials)");
    check(multiset, "embedding is a pure rearrangement");

    {
        const Watermark m = Watermark::random(256, 7);
        const GaussianLatent z = embed(m, Seed{7}, ModelKey::derive(1), params);
        double acc_sum = 0.0;
        for (std::uint64_t i = 0; i < 20; ++i) {
            const ExtractionResult res = extract(z, ModelKey::derive(100 + i), params);
            acc_sum += bit_accuracy(m.bits(), res.bits);
        }
        const double acc = acc_sum / 20.0;
        check(acc > 0.4 && acc < 0.6, "wrong key decodes at chance level");
    }

    {
        std::ostringstream buf;
        const GaussianLatent z = sample_latent(LatentShape(2, 4, 8), Seed{5});
        write_lwm1(buf, z);
        std::istringstream in(buf.str());
        const GaussianLatent back = read_lwm1(in);
        std::ostringstream buf2;
        write_lwm1(buf2, back);
        check(buf.str() == buf2.str(), "LWM1 file round trip");
    }

    if (failures == 0) std::printf("selftest: ok\n");
    return failures == 0 ? kExitOk : kExitData;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Watermark codec for Gaussian latent vectors: embedding by value "
                 "rearrangement, voting-based extraction, noise-channel simulation and "
                 "detection statistics"};
    app.require_subcommand(1);

    EmbedArgs embed_args;
    auto* cmd_embed = app.add_subcommand("embed", "Embed a watermark into a sampled latent");
    cmd_embed->add_option("--k", embed_args.k, "Watermark length in bits")->required();
    cmd_embed->add_option("--seed", embed_args.seed, "Sampling seed")->required();
    cmd_embed->add_option("--key", embed_args.key_hex, "Model key (64 hex chars)")->required();
    cmd_embed->add_option("--shape", embed_args.shape, "Latent shape CxHxW (default 4x64x64)");
    cmd_embed->add_option("--out", embed_args.out_path, "Output latent file (LWM1)")->required();
    cmd_embed->add_option("--watermark", embed_args.watermark_path,
                          "Watermark file to embed (default: derive from seed)");
    cmd_embed->add_option("--watermark-out", embed_args.watermark_out_path,
                          "Where to write the embedded watermark (default: <out>.wm)");

    ExtractArgs extract_args;
    auto* cmd_extract = app.add_subcommand("extract", "Extract a watermark from a latent file");
    cmd_extract->add_option("--in", extract_args.in_path, "Input latent file")->required();
    cmd_extract->add_option("--key", extract_args.key_hex, "Model key (64 hex chars)")->required();
    cmd_extract->add_option("--k", extract_args.k, "Watermark length in bits")->required();
    cmd_extract->add_option("--report", extract_args.report_path, "Report output path")->required();
    cmd_extract->add_option("--expect", extract_args.expect_path,
                            "Watermark file to score the extraction against");

    ChannelArgs channel_args;
    auto* cmd_channel = app.add_subcommand("channel", "Apply a noise channel to a latent file");
    cmd_channel->add_option("--in", channel_args.in_path, "Input latent file")->required();
    cmd_channel->add_option("--spec", channel_args.spec,
                            "Channel spec, e.g. gauss:0.3 or flip:0.30,0.45,0.675")
        ->required();
    cmd_channel->add_option("--trial-seed", channel_args.trial_seed, "Channel noise seed");
    cmd_channel->add_option("--out", channel_args.out_path, "Output latent file")->required();

    std::uint32_t thr_k = 256;
    double thr_fpr = 1e-6;
    auto* cmd_threshold = app.add_subcommand("threshold", "Print the detection threshold tau");
    cmd_threshold->add_option("--k", thr_k, "Watermark length in bits")->required();
    cmd_threshold->add_option("--fpr", thr_fpr, "False positive rate bound")->required();

    std::string sweep_config;
    std::string sweep_out;
    unsigned sweep_workers = 0;
    auto* cmd_sweep = app.add_subcommand("sweep", "Run an experiment sweep from a config file");
    cmd_sweep->add_option("--config", sweep_config, "Config file path")->required();
    cmd_sweep->add_option("--out", sweep_out, "CSV report path (overrides config 'output')");
    cmd_sweep->add_option("--workers", sweep_workers,
                          "Worker thread count (0 = hardware concurrency)");

    auto* cmd_selftest = app.add_subcommand("selftest", "Run the built-in invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (cmd_embed->parsed()) return run_embed(embed_args);
        if (cmd_extract->parsed()) return run_extract(extract_args);
        if (cmd_channel->parsed()) return run_channel(channel_args);
        if (cmd_threshold->parsed()) return run_threshold(thr_k, thr_fpr);
        if (cmd_sweep->parsed()) return run_sweep_cmd(sweep_config, sweep_out, sweep_workers);
        if (cmd_selftest->parsed()) return run_selftest();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

} // namespace lwm
