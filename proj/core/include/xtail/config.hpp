#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xtail/corpus.hpp"
#include "xtail/encoder.hpp"
#include "xtail/metrics.hpp"
#include "xtail/pseudo.hpp"
#include "xtail/svm.hpp"
#include "xtail/synth.hpp"

namespace xtail {

// Everything the pipeline commands need, resolved from defaults, an optional
// flat key = value config file, the XTAIL_SEED environment override, and
// command line flags, in that order of increasing precedence. Stage seeds
// are always derived from the single master seed.
struct PipelineConfig {
    std::string workdir = "work";
    std::string train_path;   // default <workdir>/data/train.jsonl
    std::string test_path;    // default <workdir>/data/test.jsonl
    std::string labels_path;  // default <workdir>/data/labels.tsv

    VocabularyParams vocab;
    SynthParams synth;
    SvmHyper svm;
    PseudoParams pseudo;
    EncoderConfig encoder;

    std::vector<std::int64_t> eval_ks = {1, 3, 5};
    std::int64_t macro_k = 5;
    PropensityParams propensity;
    bool psp_normalized = false;
    BinScheme bin_scheme = BinScheme::DigitRanges;
    std::int64_t bin_size = 100;
    std::int64_t tail_lo = 1;
    std::int64_t tail_hi = 9;

    std::vector<std::int32_t> theory_dims = {32, 64, 128, 256};
    std::int64_t theory_trials = 10000;
    std::string theory_source = "synthetic";  // or "model"
    std::int64_t theory_negatives = 10;
    double theory_gamma = 0.3;
    std::int64_t theory_instances = 5;

    std::uint64_t seed = 42;
    std::int32_t threads = 1;

    std::filesystem::path data_dir() const { return std::filesystem::path(workdir) / "data"; }
    std::filesystem::path model_dir() const { return std::filesystem::path(workdir) / "model"; }
    std::filesystem::path pred_dir() const { return std::filesystem::path(workdir) / "pred"; }
    std::filesystem::path report_dir() const {
        return std::filesystem::path(workdir) / "report";
    }
    std::filesystem::path theory_dir() const {
        return std::filesystem::path(workdir) / "theory";
    }

    std::filesystem::path resolved_train() const {
        return train_path.empty() ? data_dir() / "train.jsonl"
                                  : std::filesystem::path(train_path);
    }
    std::filesystem::path resolved_test() const {
        return test_path.empty() ? data_dir() / "test.jsonl"
                                 : std::filesystem::path(test_path);
    }
    std::filesystem::path resolved_labels() const {
        return labels_path.empty() ? data_dir() / "labels.tsv"
                                   : std::filesystem::path(labels_path);
    }
};

// Applies one key = value assignment; unknown keys and unparsable values are
// configuration errors.
void apply_config_value(PipelineConfig& config, const std::string& key,
                        const std::string& value);

// Flat text format: one key = value per line, blank lines and lines starting
// with # ignored.
void load_config_file(PipelineConfig& config, const std::filesystem::path& path);

// XTAIL_SEED, when set, replaces the master seed.
void apply_env_overrides(PipelineConfig& config);

// Stage seeds, all derived from the master seed.
std::uint64_t synth_seed(const PipelineConfig& config);
std::uint64_t svm_seed(const PipelineConfig& config);
std::uint64_t encoder_seed(const PipelineConfig& config);
std::uint64_t theory_seed(const PipelineConfig& config);

}  // namespace xtail
