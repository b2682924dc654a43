#include "xtail/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"

namespace xtail {

std::vector<TokenId> extract_keywords(const SparseLinearModel& model, LabelId label,
                                      std::int64_t top_k) {
    if (label < 0 || label >= model.num_labels()) {
        throw Error("internal", "label out of range in extract_keywords");
    }
    const auto row = model.row(label);
    std::vector<TokenId> candidates;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i] > 0.0) {
            candidates.push_back(static_cast<TokenId>(i));
        }
    }
    const auto keep = static_cast<std::ptrdiff_t>(
        std::min<std::int64_t>(top_k, static_cast<std::int64_t>(candidates.size())));
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                      [&row](TokenId a, TokenId b) {
                          const double wa = row[static_cast<std::size_t>(a)];
                          const double wb = row[static_cast<std::size_t>(b)];
                          return wa != wb ? wa > wb : a < b;
                      });
    candidates.resize(static_cast<std::size_t>(keep));
    return candidates;
}

PseudoLabel compose_pseudo_label(LabelId label, std::vector<TokenId> name_tokens,
                                 std::vector<TokenId> keyword_tokens, std::int64_t max_len) {
    if (max_len < 1) {
        throw Error("config", "pseudo label budget must be positive");
    }
    PseudoLabel out;
    out.label = label;
    const auto budget = static_cast<std::size_t>(max_len);
    if (name_tokens.size() >= budget) {
        name_tokens.resize(budget);
        keyword_tokens.clear();
    } else if (name_tokens.size() + keyword_tokens.size() > budget) {
        keyword_tokens.resize(budget - name_tokens.size());
    }
    out.name_tokens = std::move(name_tokens);
    out.keyword_tokens = std::move(keyword_tokens);
    return out;
}

std::vector<PseudoLabel> build_pseudo_labels(const SparseLinearModel& model,
                                             const Dataset& dataset,
                                             const Vocabulary& vocabulary,
                                             const PseudoParams& params) {
    if (model.num_labels() != dataset.num_labels()) {
        throw Error("internal", "model/catalog label count mismatch");
    }
    std::vector<PseudoLabel> out;
    out.reserve(dataset.label_names.size());
    for (std::int64_t l = 0; l < dataset.num_labels(); ++l) {
        std::vector<TokenId> name_tokens;
        for (const std::string& token :
             tokenize(dataset.label_names[static_cast<std::size_t>(l)])) {
            const TokenId id = vocabulary.lookup(token);
            if (id >= 0) {
                name_tokens.push_back(id);
            }
        }
        out.push_back(compose_pseudo_label(
            static_cast<LabelId>(l), std::move(name_tokens),
            extract_keywords(model, static_cast<LabelId>(l), params.top_k), params.max_len));
    }
    return out;
}

SparseVector keyword_embedding(const SparseLinearModel& model, const PseudoLabel& pseudo) {
    const auto row = model.row(pseudo.label);
    std::vector<SparseEntry> entries;
    entries.reserve(pseudo.keyword_tokens.size());
    for (const TokenId id : pseudo.keyword_tokens) {
        entries.push_back({id, row[static_cast<std::size_t>(id)]});
    }
    return SparseVector::from_pairs(std::move(entries));
}

DeltaReport empirical_delta(const SparseLinearModel& model,
                            const std::vector<PseudoLabel>& pseudo_labels,
                            const std::vector<SparseVector>& documents) {
    if (documents.empty()) {
        throw Error("data", "no documents");
    }
    DeltaReport report;
    report.per_label.reserve(pseudo_labels.size());
    for (const PseudoLabel& pseudo : pseudo_labels) {
        const SparseVector masked = keyword_embedding(model, pseudo);
        double worst = 0.0;
        for (const SparseVector& phi : documents) {
            const double full = model.score(phi, pseudo.label);
            const double kept = phi.dot(masked);
            worst = std::max(worst, std::abs(full - kept));
        }
        report.per_label.push_back(worst);
        report.max_delta = std::max(report.max_delta, worst);
    }
    return report;
}

void write_pseudo_labels(const std::filesystem::path& path,
                         const std::vector<PseudoLabel>& pseudo_labels,
                         const Vocabulary& vocabulary,
                         const std::vector<std::string>& label_names) {
    auto out = io::open_output(path);
    for (const PseudoLabel& pseudo : pseudo_labels) {
        out << pseudo.label << '\t';
        if (static_cast<std::size_t>(pseudo.label) < label_names.size()) {
            out << label_names[static_cast<std::size_t>(pseudo.label)];
        }
        out << '\t';
        for (std::size_t i = 0; i < pseudo.keyword_tokens.size(); ++i) {
            if (i > 0) {
                out << ',';
            }
            out << vocabulary.tokens[static_cast<std::size_t>(pseudo.keyword_tokens[i])];
        }
        out << '\n';
    }
}

std::vector<PseudoLabel> read_pseudo_labels(const std::filesystem::path& path,
                                            const Vocabulary& vocabulary,
                                            std::int64_t max_len) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io", "cannot open " + path.string());
    }
    std::vector<PseudoLabel> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos
                                                    : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw Error("parse", where + ": expected index<TAB>name<TAB>keywords");
        }
        std::int64_t index = -1;
        try {
            index = std::stoll(line.substr(0, tab1));
        } catch (const std::exception&) {
            throw Error("parse", where + ": bad label index");
        }
        if (index != static_cast<std::int64_t>(out.size())) {
            throw Error("parse", where + ": label indices must be dense and ascending");
        }
        const std::string name = line.substr(tab1 + 1, tab2 - tab1 - 1);
        std::vector<TokenId> name_tokens;
        for (const std::string& token : tokenize(name)) {
            const TokenId id = vocabulary.lookup(token);
            if (id >= 0) {
                name_tokens.push_back(id);
            }
        }
        std::vector<TokenId> keywords;
        std::size_t start = tab2 + 1;
        while (start <= line.size()) {
            std::size_t end = line.find(',', start);
            if (end == std::string::npos) {
                end = line.size();
            }
            if (end > start) {
                const std::string token = line.substr(start, end - start);
                const TokenId id = vocabulary.lookup(token);
                if (id < 0) {
                    throw Error("parse", where + ": keyword '" + token +
                                             "' is not in the vocabulary");
                }
                keywords.push_back(id);
            }
            if (end == line.size()) {
                break;
            }
            start = end + 1;
        }
        out.push_back(compose_pseudo_label(static_cast<LabelId>(index),
                                           std::move(name_tokens), std::move(keywords),
                                           max_len));
    }
    return out;
}

}  // namespace xtail
