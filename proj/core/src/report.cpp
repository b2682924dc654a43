#include "xtail/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "xtail/common.hpp"

namespace xtail {

EvalOptions eval_options(const PipelineConfig& config) {
    EvalOptions o;
    o.ks = config.eval_ks;
    o.macro_k = config.macro_k;
    o.propensity = config.propensity;
    o.psp_normalized = config.psp_normalized;
    o.bin_scheme = config.bin_scheme;
    o.bin_size = config.bin_size;
    o.tail_lo = config.tail_lo;
    o.tail_hi = config.tail_hi;
    return o;
}

std::vector<std::vector<LabelId>> align_predictions(
    const std::vector<RankedPrediction>& predictions, const Dataset& dataset) {
    std::unordered_map<std::string, std::size_t> by_id;
    by_id.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i)
        by_id.emplace(predictions[i].doc_id, i);

    std::vector<std::vector<LabelId>> aligned;
    aligned.reserve(dataset.test.size());
    std::string missing;
    for (const Document& doc : dataset.test) {
        auto it = by_id.find(doc.id);
        if (it == by_id.end()) {
            if (!missing.empty()) missing += ", ";
            missing += "'" + doc.id + "'";
            continue;
        }
        aligned.push_back(predictions[it->second].labels);
        by_id.erase(it);
    }
    if (!missing.empty())
        throw Error("data", "predictions missing for test documents " + missing);
    if (!by_id.empty()) {
        std::vector<std::string> extra;
        extra.reserve(by_id.size());
        for (const auto& [id, idx] : by_id) extra.push_back(id);
        std::sort(extra.begin(), extra.end());
        std::string joined;
        for (const std::string& id : extra) {
            if (!joined.empty()) joined += ", ";
            joined += "'" + id + "'";
        }
        throw Error("data", "predictions for unknown documents " + joined);
    }
    return aligned;
}

double round6(double value) { return std::round(value * 1e6) / 1e6; }

nlohmann::ordered_json build_eval_report(
    const Dataset& dataset, const std::vector<std::vector<LabelId>>& aligned,
    const EvalOptions& options,
    const std::vector<std::vector<LabelId>>* baseline_aligned) {
    std::vector<std::vector<LabelId>> truths;
    truths.reserve(dataset.test.size());
    for (const Document& doc : dataset.test) truths.push_back(doc.labels);

    const std::int64_t num_labels = dataset.num_labels();
    const std::vector<double> props =
        propensity(dataset.label_train_frequency,
                   static_cast<std::int64_t>(dataset.train.size()), options.propensity);

    nlohmann::ordered_json micro = nlohmann::ordered_json::object();
    for (std::int64_t k : options.ks)
        micro["P@" + std::to_string(k)] = round6(precision_at_k(aligned, truths, k));
    for (std::int64_t k : options.ks)
        micro["PSP@" + std::to_string(k)] =
            round6(psp_at_k(aligned, truths, props, k, options.psp_normalized));

    const std::vector<LabelConfusion> confusion =
        confusion_at_k(aligned, truths, num_labels, options.macro_k);
    const std::vector<double> f1 = per_label_f1(confusion);
    double macro = 0.0;
    for (double v : f1) macro += v;
    macro = f1.empty() ? 0.0 : macro / static_cast<double>(f1.size());

    const std::vector<LabelId> tail =
        tail_label_set(dataset.label_train_frequency, options.tail_lo, options.tail_hi);

    nlohmann::ordered_json macro_block = nlohmann::ordered_json::object();
    const std::string f1_key = "F1@" + std::to_string(options.macro_k);
    macro_block[f1_key] = round6(macro);
    macro_block["tail_" + f1_key] = tail.empty() ? 0.0 : round6(mean_over(f1, tail));
    macro_block["tail_labels"] = static_cast<std::int64_t>(tail.size());

    nlohmann::ordered_json bins = nlohmann::ordered_json::array();
    for (const LabelBin& bin :
         bin_labels(dataset.label_train_frequency, options.bin_scheme, options.bin_size)) {
        nlohmann::ordered_json row = nlohmann::ordered_json::object();
        row["range"] = bin.name;
        row["n_labels"] = static_cast<std::int64_t>(bin.labels.size());
        row["macro_f1"] = round6(mean_over(f1, bin.labels));
        bins.push_back(std::move(row));
    }

    nlohmann::ordered_json significance = nlohmann::ordered_json::object();
    if (baseline_aligned != nullptr) {
        const std::vector<double> baseline_f1 = per_label_f1(
            confusion_at_k(*baseline_aligned, truths, num_labels, options.macro_k));
        const SignTestResult test = sign_test(f1, baseline_f1);
        significance["metric"] = "per_label_" + f1_key;
        significance["wins"] = test.wins;
        significance["losses"] = test.losses;
        significance["ties"] = test.ties;
        significance["p_value"] = round6(test.p_value);
    }

    nlohmann::ordered_json report = nlohmann::ordered_json::object();
    report["documents"] = static_cast<std::int64_t>(dataset.test.size());
    report["labels"] = num_labels;
    report["micro"] = std::move(micro);
    report["macro"] = std::move(macro_block);
    report["bins"] = std::move(bins);
    report["significance"] = std::move(significance);
    return report;
}

void write_report(const std::filesystem::path& path, const nlohmann::ordered_json& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot open '" + path.string() + "' for writing");
    out << report.dump(2) << '\n';
    if (!out) throw Error("io", "failed writing '" + path.string() + "'");
}

nlohmann::ordered_json read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open report '" + path.string() + "'");
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("data", "invalid report '" + path.string() + "': " + e.what());
    }
}

}  // namespace xtail
