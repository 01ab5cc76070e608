#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lwm/channel.hpp"
#include "lwm/codec.hpp"
#include "lwm/latent.hpp"

namespace lwm {

// Experiment grid: every (k, channel) cell runs `trials` independent
// (seed, watermark, key) triples derived deterministically from base_seed.
//
// Config files are flat key=value text ('#' starts a comment). Lists use
// ';' separators. Keys: shape, k, channels, trials, base_seed, fpr and the
// optional output. Example:
//
//   shape     = 4x64x64
//   k         = 128; 256
//   channels  = identity; flip:0.30,0.45,0.675
//   trials    = 200
//   base_seed = 42
//   fpr       = 1e-6
struct ExperimentConfig {
    LatentShape shape{4, 64, 64};
    std::vector<std::uint32_t> k_values;
    std::vector<ChannelSpec> channels;
    std::vector<std::string> channel_labels; // verbatim config tokens
    std::uint32_t trials = 0;
    Seed base_seed{0};
    double fpr = 1e-6;
    std::string output_path;

    static ExperimentConfig parse(std::istream& in);          // throws ConfigInvalid
    static ExperimentConfig parse_file(const std::filesystem::path& path);
    void validate() const;                                    // throws ConfigInvalid
};

struct SweepRow {
    std::uint32_t k = 0;
    std::uint32_t tau = 0;
    double fpr = 0.0;
    std::string channel;
    std::uint32_t trials = 0;
    double bit_acc_mean = 0.0;
    double bit_acc_std = 0.0;
    double tpr = 0.0;
    double wall_ms = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;

    // CSV schema: k,tau,fpr,channel,trials,bit_acc_mean,bit_acc_std,tpr,wall_ms
    // The channel field is quoted (specs contain commas). Every column except
    // wall_ms is a pure function of the config.
    void write_csv(std::ostream& out, bool include_wall_time = true) const;
    std::string to_csv(bool include_wall_time = true) const;
};

// Runs the grid. The per-trial randomness is the documented seed tree
//   root        = derive(derive(derive(base_seed, k), channel_index), trial)
//   sample seed = derive(root, 1), watermark seed = derive(root, 2),
//   key words   = at(derive(root, 3), 0..3), channel seed = derive(root, 4)
// so the report is bit-identical for any worker count. Embedding retries
// with seed+1 on ImbalancedSample, at most 8 attempts. workers = 0 picks
// the hardware concurrency.
SweepReport run_sweep(const ExperimentConfig& cfg, unsigned workers = 0);

} // namespace lwm
