#include "xtail/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "binary_io.hpp"

namespace xtail {

namespace {

void check_paired(std::size_t predictions, std::size_t truths) {
    if (predictions != truths) {
        throw Error("internal", "prediction/truth count mismatch");
    }
    if (predictions == 0) {
        throw Error("data", "no documents");
    }
}

}  // namespace

double precision_at_k(const std::vector<std::vector<LabelId>>& predictions,
                      const std::vector<std::vector<LabelId>>& truths, std::int64_t k) {
    check_paired(predictions.size(), truths.size());
    if (k < 1) {
        throw Error("config", "k must be positive");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const std::unordered_set<LabelId> truth(truths[i].begin(), truths[i].end());
        const auto take = std::min<std::size_t>(predictions[i].size(),
                                                static_cast<std::size_t>(k));
        std::int64_t hits = 0;
        for (std::size_t r = 0; r < take; ++r) {
            hits += truth.contains(predictions[i][r]) ? 1 : 0;
        }
        total += static_cast<double>(hits) / static_cast<double>(k);
    }
    return total / static_cast<double>(predictions.size());
}

std::vector<double> propensity(const std::vector<std::int64_t>& label_train_frequency,
                               std::int64_t train_docs, const PropensityParams& params) {
    if (train_docs < 1) {
        throw Error("data", "no documents");
    }
    const double c = std::max(
        0.0, (std::log(static_cast<double>(train_docs)) - 1.0) *
                 std::pow(params.b + 1.0, params.a));
    std::vector<double> out;
    out.reserve(label_train_frequency.size());
    for (const std::int64_t freq : label_train_frequency) {
        const double n_l = static_cast<double>(freq);
        const double p = 1.0 / (1.0 + c * std::exp(-params.a * std::log(n_l + params.b)));
        out.push_back(p);
    }
    return out;
}

double psp_at_k(const std::vector<std::vector<LabelId>>& predictions,
                const std::vector<std::vector<LabelId>>& truths,
                const std::vector<double>& propensities, std::int64_t k, bool normalized) {
    check_paired(predictions.size(), truths.size());
    if (k < 1) {
        throw Error("config", "k must be positive");
    }
    const auto gain = [&propensities](LabelId l) {
        return 1.0 / propensities.at(static_cast<std::size_t>(l));
    };
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const std::unordered_set<LabelId> truth(truths[i].begin(), truths[i].end());
        const auto take = std::min<std::size_t>(predictions[i].size(),
                                                static_cast<std::size_t>(k));
        double doc_gain = 0.0;
        for (std::size_t r = 0; r < take; ++r) {
            if (truth.contains(predictions[i][r])) {
                doc_gain += gain(predictions[i][r]);
            }
        }
        doc_gain /= static_cast<double>(k);
        if (normalized) {
            // Best achievable at k: the true labels with the largest gains.
            std::vector<double> gains;
            gains.reserve(truths[i].size());
            for (const LabelId l : truths[i]) {
                gains.push_back(gain(l));
            }
            std::sort(gains.begin(), gains.end(), std::greater<>());
            double ideal = 0.0;
            for (std::size_t r = 0; r < std::min<std::size_t>(gains.size(),
                                                              static_cast<std::size_t>(k));
                 ++r) {
                ideal += gains[r];
            }
            ideal /= static_cast<double>(k);
            doc_gain = ideal > 0.0 ? doc_gain / ideal : 0.0;
        }
        total += doc_gain;
    }
    return total / static_cast<double>(predictions.size());
}

std::vector<LabelConfusion> confusion_at_k(
    const std::vector<std::vector<LabelId>>& predictions,
    const std::vector<std::vector<LabelId>>& truths, std::int64_t num_labels,
    std::int64_t k) {
    check_paired(predictions.size(), truths.size());
    if (k < 1) {
        throw Error("config", "k must be positive");
    }
    std::vector<LabelConfusion> confusion(static_cast<std::size_t>(num_labels));
    const auto checked = [num_labels](LabelId l) {
        if (l < 0 || l >= num_labels) {
            throw Error("data",
                        "label " + std::to_string(l) + " outside the catalog");
        }
        return l;
    };
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto take = std::min<std::size_t>(predictions[i].size(),
                                                static_cast<std::size_t>(k));
        std::unordered_set<LabelId> predicted;
        for (std::size_t r = 0; r < take; ++r) {
            predicted.insert(checked(predictions[i][r]));
        }
        std::unordered_set<LabelId> truth;
        for (const LabelId l : truths[i]) {
            truth.insert(checked(l));
        }
        for (const LabelId l : predicted) {
            if (truth.contains(l)) {
                ++confusion[static_cast<std::size_t>(l)].tp;
            } else {
                ++confusion[static_cast<std::size_t>(l)].fp;
            }
        }
        for (const LabelId l : truth) {
            if (!predicted.contains(l)) {
                ++confusion[static_cast<std::size_t>(l)].fn;
            }
        }
    }
    return confusion;
}

std::vector<double> per_label_f1(const std::vector<LabelConfusion>& confusion) {
    std::vector<double> f1;
    f1.reserve(confusion.size());
    for (const LabelConfusion& c : confusion) {
        if (c.tp == 0) {
            f1.push_back(0.0);
        } else {
            f1.push_back(2.0 * static_cast<double>(c.tp) /
                         static_cast<double>(2 * c.tp + c.fp + c.fn));
        }
    }
    return f1;
}

double mean_over(const std::vector<double>& values, const std::vector<LabelId>& subset) {
    if (subset.empty()) {
        throw Error("data", "empty label subset");
    }
    double total = 0.0;
    for (const LabelId l : subset) {
        total += values.at(static_cast<std::size_t>(l));
    }
    return total / static_cast<double>(subset.size());
}

double macro_f1_at_k(const std::vector<std::vector<LabelId>>& predictions,
                     const std::vector<std::vector<LabelId>>& truths,
                     std::int64_t num_labels, std::int64_t k) {
    const std::vector<double> f1 =
        per_label_f1(confusion_at_k(predictions, truths, num_labels, k));
    double total = 0.0;
    for (const double v : f1) {
        total += v;
    }
    return total / static_cast<double>(num_labels);
}

std::vector<LabelId> tail_label_set(const std::vector<std::int64_t>& label_train_frequency,
                                    std::int64_t lo, std::int64_t hi) {
    if (lo < 1 || hi < lo) {
        throw Error("config", "tail bounds must satisfy 1 <= lo <= hi");
    }
    std::vector<LabelId> out;
    for (std::size_t l = 0; l < label_train_frequency.size(); ++l) {
        if (label_train_frequency[l] >= lo && label_train_frequency[l] <= hi) {
            out.push_back(static_cast<LabelId>(l));
        }
    }
    return out;
}

std::vector<LabelBin> bin_labels(const std::vector<std::int64_t>& label_train_frequency,
                                 BinScheme scheme, std::int64_t bin_size) {
    std::vector<LabelBin> bins;
    if (scheme == BinScheme::DigitRanges) {
        // Bucket by decimal magnitude of the training frequency.
        std::vector<std::vector<LabelId>> buckets(1);
        for (std::size_t l = 0; l < label_train_frequency.size(); ++l) {
            const std::int64_t freq = label_train_frequency[l];
            std::size_t digits = 0;
            for (std::int64_t x = freq; x > 0; x /= 10) {
                ++digits;
            }
            if (digits + 1 > buckets.size()) {
                buckets.resize(digits + 1);
            }
            buckets[digits == 0 ? 0 : digits].push_back(static_cast<LabelId>(l));
        }
        for (std::size_t d = 0; d < buckets.size(); ++d) {
            if (buckets[d].empty()) {
                continue;
            }
            std::string name;
            if (d == 0) {
                name = "0";
            } else {
                std::int64_t lo = 1;
                for (std::size_t i = 1; i < d; ++i) {
                    lo *= 10;
                }
                const std::int64_t hi = lo * 10 - 1;
                name = std::to_string(lo) + "-" + std::to_string(hi);
            }
            bins.push_back({std::move(name), std::move(buckets[d])});
        }
        return bins;
    }

    if (bin_size < 1) {
        throw Error("config", "bin size must be positive");
    }
    std::vector<LabelId> order(label_train_frequency.size());
    for (std::size_t l = 0; l < order.size(); ++l) {
        order[l] = static_cast<LabelId>(l);
    }
    std::sort(order.begin(), order.end(), [&](LabelId a, LabelId b) {
        const std::int64_t fa = label_train_frequency[static_cast<std::size_t>(a)];
        const std::int64_t fb = label_train_frequency[static_cast<std::size_t>(b)];
        return fa != fb ? fa < fb : a < b;
    });
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(bin_size)) {
        const std::size_t end =
            std::min(order.size(), start + static_cast<std::size_t>(bin_size));
        LabelBin bin;
        bin.name = "rank" + std::to_string(start) + "-" + std::to_string(end - 1);
        bin.labels.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(end));
        bins.push_back(std::move(bin));
    }
    return bins;
}

SignTestResult sign_test(const std::vector<double>& first, const std::vector<double>& second,
                         std::int64_t min_pairs) {
    if (first.size() != second.size()) {
        throw Error("internal", "sign test sequences differ in length");
    }
    SignTestResult result;
    for (std::size_t i = 0; i < first.size(); ++i) {
        if (first[i] > second[i]) {
            ++result.wins;
        } else if (first[i] < second[i]) {
            ++result.losses;
        } else {
            ++result.ties;
        }
    }
    const std::int64_t n = result.wins + result.losses;
    if (n < min_pairs) {
        throw Error("data", "sign test needs at least " + std::to_string(min_pairs) +
                                " non-tied pairs, got " + std::to_string(n));
    }
    // Two-sided exact binomial at p = 1/2: twice the lower tail of the less
    // frequent outcome, computed with log-binomials to survive large n.
    const std::int64_t m = std::min(result.wins, result.losses);
    const double log_half_n = -static_cast<double>(n) * std::log(2.0);
    double tail = 0.0;
    for (std::int64_t i = 0; i <= m; ++i) {
        const double log_choose = std::lgamma(static_cast<double>(n) + 1.0) -
                                  std::lgamma(static_cast<double>(i) + 1.0) -
                                  std::lgamma(static_cast<double>(n - i) + 1.0);
        tail += std::exp(log_choose + log_half_n);
    }
    result.p_value = std::min(1.0, 2.0 * tail);
    return result;
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<RankedPrediction>& predictions) {
    auto out = io::open_output(path);
    for (const RankedPrediction& pred : predictions) {
        if (pred.labels.size() != pred.scores.size()) {
            throw Error("internal", "ranked labels and scores differ in length");
        }
        out << pred.doc_id << '\t';
        for (std::size_t i = 0; i < pred.labels.size(); ++i) {
            if (i > 0) {
                out << ' ';
            }
            out << pred.labels[i] << ':' << format_fixed(pred.scores[i], 6);
        }
        out << '\n';
    }
}

std::vector<RankedPrediction> read_predictions(const std::filesystem::path& path,
                                               std::int64_t num_labels) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io", "cannot open " + path.string());
    }
    std::vector<RankedPrediction> out;
    std::unordered_set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error("parse", where + ": expected doc_id<TAB>label:score ...");
        }
        RankedPrediction pred;
        pred.doc_id = line.substr(0, tab);
        if (pred.doc_id.empty()) {
            throw Error("parse", where + ": empty document id");
        }
        if (!seen.insert(pred.doc_id).second) {
            throw Error("data", "duplicate document id '" + pred.doc_id + "' in " +
                                    path.filename().string());
        }
        std::size_t pos = tab + 1;
        while (pos < line.size()) {
            std::size_t end = line.find(' ', pos);
            if (end == std::string::npos) {
                end = line.size();
            }
            if (end > pos) {
                const std::string item = line.substr(pos, end - pos);
                const auto colon = item.rfind(':');
                if (colon == std::string::npos) {
                    throw Error("parse", where + ": expected label:score, got '" + item + "'");
                }
                std::int64_t label = -1;
                double score = 0.0;
                try {
                    label = std::stoll(item.substr(0, colon));
                    score = std::stod(item.substr(colon + 1));
                } catch (const std::exception&) {
                    throw Error("parse", where + ": bad label:score pair '" + item + "'");
                }
                if (label < 0 || label >= num_labels) {
                    throw Error("data", where + ": label " + std::to_string(label) +
                                            " outside the catalog");
                }
                pred.labels.push_back(static_cast<LabelId>(label));
                pred.scores.push_back(score);
            }
            pos = end + 1;
        }
        out.push_back(std::move(pred));
    }
    return out;
}

}  // namespace xtail
