#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xtail/corpus.hpp"
#include "xtail/sparse_vector.hpp"
#include "xtail/svm.hpp"

namespace xtail {

// Surrogate textual description for a label: its catalog name followed by
// the vocabulary tokens its classifier weighs highest.
struct PseudoLabel {
    LabelId label = 0;
    std::vector<TokenId> name_tokens;     // catalog name through the vocabulary
    std::vector<TokenId> keyword_tokens;  // distinct, strictly positive weight

    std::vector<TokenId> all_tokens() const {
        std::vector<TokenId> out = name_tokens;
        out.insert(out.end(), keyword_tokens.begin(), keyword_tokens.end());
        return out;
    }

    friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

struct PseudoParams {
    std::int64_t top_k = 20;    // keywords mined per label
    std::int64_t max_len = 32;  // name plus keywords, total token budget
};

// Top-scoring vocabulary indices of one classifier row, strictly positive
// entries only, ties broken toward the smaller index. Expects the
// theory-normalized model so weights are comparable across labels.
std::vector<TokenId> extract_keywords(const SparseLinearModel& model, LabelId label,
                                      std::int64_t top_k);

// Name tokens first, then keywords, truncated to max_len tokens overall.
PseudoLabel compose_pseudo_label(LabelId label, std::vector<TokenId> name_tokens,
                                 std::vector<TokenId> keyword_tokens, std::int64_t max_len);

std::vector<PseudoLabel> build_pseudo_labels(const SparseLinearModel& model,
                                             const Dataset& dataset,
                                             const Vocabulary& vocabulary,
                                             const PseudoParams& params);

// The classifier row masked to the keyword support; no rescaling, so scores
// against nonnegative documents can only shrink relative to the full row.
SparseVector keyword_embedding(const SparseLinearModel& model, const PseudoLabel& pseudo);

struct DeltaReport {
    std::vector<double> per_label;  // worst score gap across the document set
    double max_delta = 0.0;
};

// Largest |<phi, w_l> - <phi, v_l>| over the given documents, per label.
DeltaReport empirical_delta(const SparseLinearModel& model,
                            const std::vector<PseudoLabel>& pseudo_labels,
                            const std::vector<SparseVector>& documents);

// TSV: label index, label name, comma-joined keyword tokens. Reading re-runs
// the composition step, so a write/read round trip is the identity.
void write_pseudo_labels(const std::filesystem::path& path,
                         const std::vector<PseudoLabel>& pseudo_labels,
                         const Vocabulary& vocabulary,
                         const std::vector<std::string>& label_names);

std::vector<PseudoLabel> read_pseudo_labels(const std::filesystem::path& path,
                                            const Vocabulary& vocabulary,
                                            std::int64_t max_len);

}  // namespace xtail
