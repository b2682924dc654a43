#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xtail/common.hpp"
#include "xtail/sparse_vector.hpp"

namespace xtail {

// Lowercased word tokens. ASCII alphanumerics are token characters; all other
// ASCII, Unicode whitespace, and the common Unicode punctuation blocks
// separate; remaining non-ASCII codepoints pass through untouched.
std::vector<std::string> tokenize(std::string_view text);

struct VocabularyParams {
    std::int64_t min_df = 2;     // keep tokens appearing in at least this many docs
    double max_df_ratio = 0.7;   // drop tokens appearing in more than this fraction
};

struct Vocabulary {
    std::vector<std::string> tokens;                 // index -> token, lexicographic
    std::unordered_map<std::string, TokenId> index;  // token -> index
    std::vector<std::int64_t> doc_frequency;         // training df per kept token
    std::int64_t train_docs = 0;                     // document count behind the df stats

    std::size_t size() const noexcept { return tokens.size(); }

    TokenId lookup(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? TokenId{-1} : it->second;
    }
};

// Builds the index from tokenized training documents only. Document frequency
// counts each token once per document; indices are assigned in lexicographic
// token order, so the result is invariant to document order.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& train_docs,
                            const VocabularyParams& params);

struct Document {
    std::string id;
    std::vector<TokenId> tokens;  // vocabulary ids in text order, OOV dropped
    std::vector<LabelId> labels;  // strictly ascending, no duplicates
};

struct Dataset {
    std::vector<Document> train;
    std::vector<Document> test;
    std::vector<std::string> label_names;            // catalog index -> label string
    std::vector<std::int64_t> label_train_frequency;  // positives per label in train

    std::int64_t num_labels() const noexcept {
        return static_cast<std::int64_t>(label_names.size());
    }
};

// tf * (ln((1 + N) / (1 + df)) + 1) per distinct token, L2-normalized.
// N is the training document count behind the vocabulary; features for train
// and test documents use the same training-side statistics.
SparseVector tfidf_transform(const Document& doc, const Vocabulary& vocabulary);

std::vector<SparseVector> compute_features(const std::vector<Document>& docs,
                                           const Vocabulary& vocabulary);

// Pre-tokenization view of a dataset, exactly what the on-disk formats hold.
struct RawDocument {
    std::string id;
    std::string text;
    std::vector<std::string> labels;
};

struct RawDataset {
    std::vector<RawDocument> train;
    std::vector<RawDocument> test;
    std::vector<std::string> label_names;
};

struct LoadedDataset {
    Dataset data;
    Vocabulary vocabulary;
};

// Tokenizes, builds the vocabulary from the training split, and maps both
// splits through it. Label strings must come from the catalog.
LoadedDataset build_dataset(const RawDataset& raw, const VocabularyParams& params);

// Files: train/test JSONL ({"id","text","labels"}), catalog TSV (index, name).
RawDataset read_raw_dataset(const std::filesystem::path& train_path,
                            const std::filesystem::path& test_path,
                            const std::filesystem::path& labels_path);

LoadedDataset load_dataset(const std::filesystem::path& train_path,
                           const std::filesystem::path& test_path,
                           const std::filesystem::path& labels_path,
                           const VocabularyParams& params = {});

// Writes train.jsonl, test.jsonl, labels.tsv under dir.
void write_dataset_files(const RawDataset& raw, const std::filesystem::path& dir);

// One line per document: id, then index:weight pairs at 9 significant digits.
void dump_features(const std::filesystem::path& path, const std::vector<Document>& docs,
                   const std::vector<SparseVector>& features);

}  // namespace xtail
