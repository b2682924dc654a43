#include "xtail/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace xtail {

namespace {

// Decodes one UTF-8 codepoint starting at i, advancing i past it. Invalid
// sequences consume a single byte and come back as U+FFFD.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto first = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (first < 0x80) {
        ++i;
        return first;
    } else if ((first & 0xE0) == 0xC0) {
        extra = 1;
        cp = first & 0x1F;
    } else if ((first & 0xF0) == 0xE0) {
        extra = 2;
        cp = first & 0x0F;
    } else if ((first & 0xF8) == 0xF0) {
        extra = 3;
        cp = first & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k <= extra; ++k) {
        if (i + k >= s.size() ||
            (static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    }
    i += 1 + extra;
    return cp;
}

bool is_separator_codepoint(char32_t cp) {
    // Latin-1 controls/punctuation, the general and supplemental punctuation
    // blocks (all Unicode dashes and quotes live there), CJK punctuation,
    // form/fullwidth punctuation, and the replacement character.
    return (cp >= 0x0080 && cp <= 0x00BF) || cp == 0x1680 || cp == 0x180E ||
           (cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x2E00 && cp <= 0x2E7F) ||
           (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFE30 && cp <= 0xFE6F) ||
           (cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
           (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) ||
           cp == 0xFFFD;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const auto byte = static_cast<unsigned char>(text[i]);
        if (byte < 0x80) {
            const char c = text[i];
            if (c >= 'a' && c <= 'z') {
                current.push_back(c);
            } else if (c >= 'A' && c <= 'Z') {
                current.push_back(static_cast<char>(c - 'A' + 'a'));
            } else if (c >= '0' && c <= '9') {
                current.push_back(c);
            } else {
                flush();
            }
            ++i;
            continue;
        }
        const std::size_t start = i;
        const char32_t cp = decode_utf8(text, i);
        if (is_separator_codepoint(cp)) {
            flush();
        } else {
            current.append(text.substr(start, i - start));
        }
    }
    flush();
    return tokens;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& train_docs,
                            const VocabularyParams& params) {
    // Ordered map so index assignment falls out in lexicographic order.
    std::map<std::string, std::int64_t> df;
    for (const auto& doc : train_docs) {
        std::unordered_set<std::string_view> seen;
        for (const auto& token : doc) {
            if (seen.insert(token).second) {
                ++df[token];
            }
        }
    }

    Vocabulary vocab;
    vocab.train_docs = static_cast<std::int64_t>(train_docs.size());
    const double df_cap = params.max_df_ratio * static_cast<double>(train_docs.size());
    for (const auto& [token, count] : df) {
        if (count >= params.min_df && static_cast<double>(count) <= df_cap) {
            vocab.index.emplace(token, static_cast<TokenId>(vocab.tokens.size()));
            vocab.tokens.push_back(token);
            vocab.doc_frequency.push_back(count);
        }
    }
    if (vocab.tokens.empty()) {
        throw Error("data", "vocabulary empty after df filtering");
    }
    return vocab;
}

SparseVector tfidf_transform(const Document& doc, const Vocabulary& vocabulary) {
    std::map<TokenId, std::int64_t> tf;
    for (const TokenId id : doc.tokens) {
        ++tf[id];
    }
    const double n = static_cast<double>(vocabulary.train_docs);
    std::vector<SparseEntry> pairs;
    pairs.reserve(tf.size());
    for (const auto& [id, count] : tf) {
        const double df = static_cast<double>(vocabulary.doc_frequency.at(id));
        const double idf = std::log((1.0 + n) / (1.0 + df)) + 1.0;
        pairs.push_back({id, static_cast<double>(count) * idf});
    }
    SparseVector v = SparseVector::from_pairs(std::move(pairs));
    v.normalize();
    return v;
}

std::vector<SparseVector> compute_features(const std::vector<Document>& docs,
                                           const Vocabulary& vocabulary) {
    std::vector<SparseVector> features;
    features.reserve(docs.size());
    for (const Document& doc : docs) {
        features.push_back(tfidf_transform(doc, vocabulary));
    }
    return features;
}

namespace {

std::vector<RawDocument> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io", "cannot open " + path.string());
    }
    std::vector<RawDocument> docs;
    std::unordered_set<std::string> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw Error("parse", where + ": invalid JSON");
        }
        if (!parsed.is_object() || !parsed.contains("id") || !parsed.contains("text") ||
            !parsed.contains("labels") || !parsed["id"].is_string() ||
            !parsed["text"].is_string() || !parsed["labels"].is_array()) {
            throw Error("parse", where + ": expected {\"id\", \"text\", \"labels\"}");
        }
        RawDocument doc;
        doc.id = parsed["id"].get<std::string>();
        doc.text = parsed["text"].get<std::string>();
        for (const auto& entry : parsed["labels"]) {
            if (!entry.is_string()) {
                throw Error("parse", where + ": labels must be strings");
            }
            doc.labels.push_back(entry.get<std::string>());
        }
        if (!ids.insert(doc.id).second) {
            throw Error("data", "duplicate document id '" + doc.id + "' in " +
                                    path.filename().string());
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<std::string> read_label_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io", "cannot open " + path.string());
    }
    std::vector<std::string> names;
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
            throw Error("parse", where + ": expected index<TAB>label");
        }
        std::int64_t index = -1;
        try {
            index = std::stoll(line.substr(0, tab));
        } catch (const std::exception&) {
            throw Error("parse", where + ": bad label index");
        }
        if (index != static_cast<std::int64_t>(names.size())) {
            throw Error("parse", where + ": label indices must be dense and ascending");
        }
        std::string name = line.substr(tab + 1);
        if (name.empty()) {
            throw Error("parse", where + ": empty label name");
        }
        if (!seen.insert(name).second) {
            throw Error("data", "duplicate label '" + name + "'");
        }
        names.push_back(std::move(name));
    }
    return names;
}

}  // namespace

RawDataset read_raw_dataset(const std::filesystem::path& train_path,
                            const std::filesystem::path& test_path,
                            const std::filesystem::path& labels_path) {
    RawDataset raw;
    raw.train = read_jsonl(train_path);
    raw.test = read_jsonl(test_path);
    raw.label_names = read_label_catalog(labels_path);
    return raw;
}

LoadedDataset build_dataset(const RawDataset& raw, const VocabularyParams& params) {
    if (raw.train.empty()) {
        throw Error("data", "no documents");
    }

    std::vector<std::vector<std::string>> train_tokens;
    train_tokens.reserve(raw.train.size());
    for (const RawDocument& doc : raw.train) {
        train_tokens.push_back(tokenize(doc.text));
    }

    LoadedDataset out;
    out.vocabulary = build_vocabulary(train_tokens, params);
    out.data.label_names = raw.label_names;
    out.data.label_train_frequency.assign(raw.label_names.size(), 0);

    std::unordered_map<std::string, LabelId> label_index;
    for (std::size_t i = 0; i < raw.label_names.size(); ++i) {
        label_index.emplace(raw.label_names[i], static_cast<LabelId>(i));
    }

    auto convert = [&](const RawDocument& doc, const std::vector<std::string>& tokens) {
        Document d;
        d.id = doc.id;
        d.tokens.reserve(tokens.size());
        for (const std::string& token : tokens) {
            const TokenId id = out.vocabulary.lookup(token);
            if (id >= 0) {
                d.tokens.push_back(id);
            }
        }
        d.labels.reserve(doc.labels.size());
        for (const std::string& name : doc.labels) {
            auto it = label_index.find(name);
            if (it == label_index.end()) {
                throw Error("data",
                            "unknown label '" + name + "' in document '" + doc.id + "'");
            }
            d.labels.push_back(it->second);
        }
        std::sort(d.labels.begin(), d.labels.end());
        d.labels.erase(std::unique(d.labels.begin(), d.labels.end()), d.labels.end());
        return d;
    };

    out.data.train.reserve(raw.train.size());
    for (std::size_t i = 0; i < raw.train.size(); ++i) {
        Document d = convert(raw.train[i], train_tokens[i]);
        for (const LabelId l : d.labels) {
            ++out.data.label_train_frequency[static_cast<std::size_t>(l)];
        }
        out.data.train.push_back(std::move(d));
    }
    out.data.test.reserve(raw.test.size());
    for (const RawDocument& doc : raw.test) {
        out.data.test.push_back(convert(doc, tokenize(doc.text)));
    }
    return out;
}

LoadedDataset load_dataset(const std::filesystem::path& train_path,
                           const std::filesystem::path& test_path,
                           const std::filesystem::path& labels_path,
                           const VocabularyParams& params) {
    return build_dataset(read_raw_dataset(train_path, test_path, labels_path), params);
}

void write_dataset_files(const RawDataset& raw, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write_jsonl = [&](const std::filesystem::path& path,
                           const std::vector<RawDocument>& docs) {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw Error("io", "cannot write " + path.string());
        }
        for (const RawDocument& doc : docs) {
            nlohmann::ordered_json j;
            j["id"] = doc.id;
            j["text"] = doc.text;
            j["labels"] = doc.labels;
            out << j.dump() << '\n';
        }
    };
    write_jsonl(dir / "train.jsonl", raw.train);
    write_jsonl(dir / "test.jsonl", raw.test);

    std::ofstream labels(dir / "labels.tsv", std::ios::binary);
    if (!labels) {
        throw Error("io", "cannot write " + (dir / "labels.tsv").string());
    }
    for (std::size_t i = 0; i < raw.label_names.size(); ++i) {
        labels << i << '\t' << raw.label_names[i] << '\n';
    }
}

void dump_features(const std::filesystem::path& path, const std::vector<Document>& docs,
                   const std::vector<SparseVector>& features) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("io", "cannot write " + path.string());
    }
    for (std::size_t i = 0; i < docs.size(); ++i) {
        out << docs[i].id << '\t';
        bool first = true;
        for (const SparseEntry& e : features[i].entries()) {
            if (!first) {
                out << ' ';
            }
            first = false;
            out << e.index << ':' << format_general(e.weight, 9);
        }
        out << '\n';
    }
}

}  // namespace xtail
