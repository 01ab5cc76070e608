#include <doctest.h>

#include <sstream>

#include "lwm/errors.hpp"
#include "lwm/harness.hpp"

using namespace lwm;

namespace {

ExperimentConfig config_from(const std::string& text) {
    std::istringstream in(text);
    return ExperimentConfig::parse(in);
}

} // namespace

TEST_CASE("experiment config parses the key=value grammar") {
    const ExperimentConfig cfg = config_from(
        "# demo grid\n"
        "shape     = 4x64x64\n"
        "k         = 128; 256\n"
        "channels  = identity; flip:0.30,0.45,0.675\n"
        "trials    = 3\n"
        "base_seed = 42\n"
        "fpr       = 1e-6\n"
        "output    = out.csv\n");
    CHECK(cfg.shape == LatentShape(4, 64, 64));
    CHECK(cfg.k_values == std::vector<std::uint32_t>{128, 256});
    REQUIRE(cfg.channels.size() == 2);
    CHECK(cfg.channel_labels[1] == "flip:0.30,0.45,0.675");
    CHECK(cfg.trials == 3);
    CHECK(cfg.base_seed.value == 42);
    CHECK(cfg.fpr == doctest::Approx(1e-6));
    CHECK(cfg.output_path == "out.csv");
}

TEST_CASE("experiment config names the violated constraint") {
    const auto expect_mention = [](const std::string& text, const std::string& needle) {
        try {
            config_from(text);
            FAIL_CHECK("expected ConfigInvalid for: " << needle);
        } catch (const ConfigInvalid& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    const std::string base =
        "shape=4x64x64\nk=256\nchannels=identity\ntrials=2\nbase_seed=1\nfpr=1e-6\n";
    expect_mention("k=256\nchannels=identity\ntrials=2\nbase_seed=1\nfpr=1e-6\n", "shape");
    expect_mention(base + "bogus=1\n", "bogus");
    expect_mention(
        "shape=4x64x64\nk=100\nchannels=identity\ntrials=2\nbase_seed=1\nfpr=1e-6\n",
        "k=100");
    expect_mention(
        "shape=4x64x64\nk=256\nchannels=identity\ntrials=0\nbase_seed=1\nfpr=1e-6\n",
        "trials");
    expect_mention(
        "shape=4x64x64\nk=256\nchannels=identity\ntrials=2\nbase_seed=1\nfpr=2\n", "fpr");
    expect_mention(base + "k=1\n", "duplicate");
}

TEST_CASE("identity channel cells score exactly one") {
    const ExperimentConfig cfg = config_from(
        "shape=4x64x64\nk=256\nchannels=identity\ntrials=25\nbase_seed=7\nfpr=1e-6\n");
    const SweepReport report = run_sweep(cfg, 2);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].bit_acc_mean == 1.0);
    CHECK(report.rows[0].bit_acc_std == 0.0);
    CHECK(report.rows[0].tpr == 1.0);
    CHECK(report.rows[0].tau == 167);
}

TEST_CASE("sweep reports are reproducible and worker-count invariant") {
    const std::string text =
        "shape=4x64x64\nk=128; 256\nchannels=identity; gauss:0.6\ntrials=12\n"
        "base_seed=99\nfpr=1e-6\n";
    const SweepReport a = run_sweep(config_from(text), 1);
    const SweepReport b = run_sweep(config_from(text), 1);
    const SweepReport c = run_sweep(config_from(text), 4);
    CHECK(a.to_csv(false) == b.to_csv(false));
    CHECK(a.to_csv(false) == c.to_csv(false));
    // Full CSV additionally carries the wall-time column.
    CHECK(a.to_csv(true).find("wall_ms") != std::string::npos);
}

TEST_CASE("csv schema is stable") {
    const ExperimentConfig cfg = config_from(
        "shape=1x1x64\nk=4\nchannels=flip:0.30,0.45,0.675\ntrials=2\nbase_seed=3\nfpr=1e-4\n");
    const SweepReport report = run_sweep(cfg, 1);
    const std::string csv = report.to_csv(false);
    CHECK(csv.rfind("k,tau,fpr,channel,trials,bit_acc_mean,bit_acc_std,tpr", 0) == 0);
    CHECK(csv.find("\"flip:0.30,0.45,0.675\"") != std::string::npos);
    CHECK(csv.find("0.0001") != std::string::npos);
}

TEST_CASE("accuracy is non-increasing in additive noise strength") {
    // 500 trials per sigma cell; the sigma grid spans no-op to heavy noise.
    const ExperimentConfig cfg = config_from(
        "shape=4x64x64\nk=256\n"
        "channels=gauss:0.1; gauss:0.3; gauss:0.6; gauss:1.0; gauss:1.5\n"
        "trials=500\nbase_seed=1234\nfpr=1e-6\n");
    const SweepReport report = run_sweep(cfg);
    REQUIRE(report.rows.size() == 5);
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        CHECK(report.rows[i].bit_acc_mean <= report.rows[i - 1].bit_acc_mean);
    }
    CHECK(report.rows.front().bit_acc_mean == 1.0);
    CHECK(report.rows.back().bit_acc_mean < 1.0);
}

TEST_CASE("accuracy is non-increasing in the watermark length") {
    const ExperimentConfig cfg = config_from(
        "shape=4x64x64\nk=128; 256; 512; 1024\nchannels=flip:0.30,0.45,0.675\n"
        "trials=250\nbase_seed=555\nfpr=1e-6\n");
    const SweepReport report = run_sweep(cfg);
    REQUIRE(report.rows.size() == 4);
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        CHECK(report.rows[i].bit_acc_mean <= report.rows[i - 1].bit_acc_mean);
    }
}
