#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "xtail/config.hpp"
#include "xtail/corpus.hpp"
#include "xtail/metrics.hpp"

namespace xtail {

struct EvalOptions {
    std::vector<std::int64_t> ks = {1, 3, 5};
    std::int64_t macro_k = 5;
    PropensityParams propensity;
    bool psp_normalized = false;
    BinScheme bin_scheme = BinScheme::DigitRanges;
    std::int64_t bin_size = 100;
    std::int64_t tail_lo = 1;
    std::int64_t tail_hi = 9;
};

EvalOptions eval_options(const PipelineConfig& config);

// Reorders a prediction file to the dataset's test document order. Every test
// document must be covered exactly once; anything missing or extra is an
// input error that names the offending ids.
std::vector<std::vector<LabelId>> align_predictions(
    const std::vector<RankedPrediction>& predictions, const Dataset& dataset);

// The full evaluation report: ranking metrics at each k, macro and tail F1,
// per-frequency-bin macro F1, and, when a baseline is given, a paired sign
// test over per-label F1. All values are rounded to six decimals so reruns
// and aggregation are byte-stable.
nlohmann::ordered_json build_eval_report(
    const Dataset& dataset, const std::vector<std::vector<LabelId>>& aligned,
    const EvalOptions& options,
    const std::vector<std::vector<LabelId>>* baseline_aligned = nullptr);

double round6(double value);

void write_report(const std::filesystem::path& path, const nlohmann::ordered_json& report);
nlohmann::ordered_json read_report(const std::filesystem::path& path);

}  // namespace xtail
