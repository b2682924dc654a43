#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xtail/common.hpp"

namespace xtail {

// One document's labels ranked best-first, with the scores that produced the
// ranking. The stored order is authoritative; scores are informational.
struct RankedPrediction {
    std::string doc_id;
    std::vector<LabelId> labels;
    std::vector<double> scores;
};

// Mean over documents of |top-k hits| / k. The denominator is always k, also
// for documents with fewer than k true labels.
double precision_at_k(const std::vector<std::vector<LabelId>>& predictions,
                      const std::vector<std::vector<LabelId>>& truths, std::int64_t k);

struct PropensityParams {
    double a = 0.55;
    double b = 1.5;
};

// Smoothed label propensities from training frequencies. The offset constant
// is clamped at zero for tiny corpora so results stay inside (0, 1].
std::vector<double> propensity(const std::vector<std::int64_t>& label_train_frequency,
                               std::int64_t train_docs, const PropensityParams& params);

// Propensity-scored precision: hits weighted by inverse propensity. The
// normalized variant divides by the best achievable value at k per document.
double psp_at_k(const std::vector<std::vector<LabelId>>& predictions,
                const std::vector<std::vector<LabelId>>& truths,
                const std::vector<double>& propensities, std::int64_t k,
                bool normalized = false);

struct LabelConfusion {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

std::vector<LabelConfusion> confusion_at_k(
    const std::vector<std::vector<LabelId>>& predictions,
    const std::vector<std::vector<LabelId>>& truths, std::int64_t num_labels,
    std::int64_t k);

// 2tp / (2tp + fp + fn); zero whenever tp is zero, including the case of a
// label that is never predicted and never true.
std::vector<double> per_label_f1(const std::vector<LabelConfusion>& confusion);

double mean_over(const std::vector<double>& values, const std::vector<LabelId>& subset);

// Macro F1 over all labels in the catalog.
double macro_f1_at_k(const std::vector<std::vector<LabelId>>& predictions,
                     const std::vector<std::vector<LabelId>>& truths,
                     std::int64_t num_labels, std::int64_t k);

// Labels whose training frequency falls in [lo, hi]; zero-frequency labels
// are never part of the tail set.
std::vector<LabelId> tail_label_set(const std::vector<std::int64_t>& label_train_frequency,
                                    std::int64_t lo = 1, std::int64_t hi = 9);

enum class BinScheme {
    DigitRanges,  // 0, 1-9, 10-99, 100-999, ...
    FixedSize,    // equal-count bins over labels sorted by frequency
};

struct LabelBin {
    std::string name;
    std::vector<LabelId> labels;
};

// Only non-empty bins are returned, ordered from rare to frequent.
std::vector<LabelBin> bin_labels(const std::vector<std::int64_t>& label_train_frequency,
                                 BinScheme scheme, std::int64_t bin_size = 100);

struct SignTestResult {
    std::int64_t wins = 0;    // pairs where the first sequence is larger
    std::int64_t losses = 0;  // pairs where the second sequence is larger
    std::int64_t ties = 0;    // dropped from the test
    double p_value = 1.0;     // two-sided exact binomial
};

// Paired two-sided sign test; requires at least min_pairs non-tied pairs.
SignTestResult sign_test(const std::vector<double>& first, const std::vector<double>& second,
                         std::int64_t min_pairs = 10);

// TSV with one line per document: id, then label:score pairs in rank order,
// scores fixed to six decimals.
void write_predictions(const std::filesystem::path& path,
                       const std::vector<RankedPrediction>& predictions);

std::vector<RankedPrediction> read_predictions(const std::filesystem::path& path,
                                               std::int64_t num_labels);

}  // namespace xtail
