#include "xtail/corpus.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "xtail/common.hpp"
#include "xtail/random.hpp"

namespace xtail {
namespace {

using test::TempDir;

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
    EXPECT_EQ(tokenize("Hello, World!"), (std::vector<std::string>{"hello", "world"}));
    EXPECT_EQ(tokenize("Don't stop"), (std::vector<std::string>{"don", "t", "stop"}));
    EXPECT_EQ(tokenize("abc123 x9"), (std::vector<std::string>{"abc123", "x9"}));
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_TRUE(tokenize(" \t\n .,;").empty());
}

TEST(Tokenize, UnicodePunctuationSeparatesButLettersDoNot) {
    // em dash between words
    EXPECT_EQ(tokenize("foo\xE2\x80\x94"
                       "bar"),
              (std::vector<std::string>{"foo", "bar"}));
    // accented letters are word characters, not separators
    EXPECT_EQ(tokenize("na\xC3\xAFve"),
              (std::vector<std::string>{"na\xC3\xAFve"}));
    // ideographic space and fullwidth comma both separate
    EXPECT_EQ(tokenize("a\xE3\x80\x80"
                       "b\xEF\xBC\x8C"
                       "c"),
              (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Tokenize, InvalidUtf8BytesActAsSeparators) {
    EXPECT_EQ(tokenize("a\xFF\x62"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(tokenize("\x80\x80middle\xC2"), (std::vector<std::string>{"middle"}));
}

TEST(Vocabulary, LexicographicIndexingAndDfFilters) {
    const std::vector<std::vector<std::string>> docs = {
        {"apple", "banana", "apple"},
        {"banana", "cherry"},
        {"apple", "cherry", "date", "date"},
    };
    VocabularyParams loose;
    loose.min_df = 1;
    loose.max_df_ratio = 1.0;
    const Vocabulary all = build_vocabulary(docs, loose);
    ASSERT_EQ(all.size(), 4u);
    EXPECT_EQ(all.tokens[0], "apple");
    EXPECT_EQ(all.tokens[1], "banana");
    EXPECT_EQ(all.tokens[2], "cherry");
    EXPECT_EQ(all.tokens[3], "date");
    EXPECT_EQ(all.lookup("cherry"), 2);
    EXPECT_EQ(all.lookup("missing"), -1);

    VocabularyParams strict;
    strict.min_df = 2;
    strict.max_df_ratio = 1.0;
    const Vocabulary filtered = build_vocabulary(docs, strict);
    ASSERT_EQ(filtered.size(), 3u);  // date has df 1
    EXPECT_EQ(filtered.lookup("date"), -1);
}

TEST(Vocabulary, MaxDfRatioDropsUbiquitousTokens) {
    const std::vector<std::vector<std::string>> docs = {
        {"common", "left"}, {"common", "mid"}, {"common", "right"}};
    VocabularyParams p;
    p.min_df = 1;
    p.max_df_ratio = 0.7;  // df 3 of 3 exceeds the cap
    const Vocabulary v = build_vocabulary(docs, p);
    EXPECT_EQ(v.lookup("common"), -1);
    EXPECT_EQ(v.size(), 3u);

    p.max_df_ratio = 1.0;  // cap is inclusive, df 3 <= 3 stays
    EXPECT_NE(build_vocabulary(docs, p).lookup("common"), -1);
}

TEST(Vocabulary, EmptyAfterFilteringIsAnError) {
    const std::vector<std::vector<std::string>> docs = {{"one"}, {"two"}};
    VocabularyParams p;
    p.min_df = 5;
    try {
        build_vocabulary(docs, p);
        FAIL() << "expected Error";
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "data: vocabulary empty after df filtering");
    }
}

TEST(Vocabulary, DfCountsDistinctDocumentsNotOccurrences) {
    // "rep" appears five times but only in one document.
    const std::vector<std::vector<std::string>> docs = {
        {"rep", "rep", "rep", "rep", "rep"}, {"other"}};
    VocabularyParams p;
    p.min_df = 2;
    p.max_df_ratio = 1.0;
    try {
        build_vocabulary(docs, p);
        FAIL() << "expected Error";
    } catch (const Error&) {
        // both tokens have df 1, so the vocabulary is empty
    }
}

TEST(Tfidf, MatchesHandComputedWeights) {
    const std::vector<std::vector<std::string>> tokens = {
        {"apple", "banana", "apple"},
        {"banana", "cherry"},
        {"apple", "cherry", "date", "date"},
    };
    VocabularyParams p;
    p.min_df = 1;
    p.max_df_ratio = 1.0;
    const Vocabulary vocab = build_vocabulary(tokens, p);

    Document doc;  // "apple banana apple"
    doc.id = "d0";
    doc.tokens = {0, 1, 0};
    const SparseVector v = tfidf_transform(doc, vocab);

    // Both tokens share idf ln(4/3)+1, so weights reduce to (2,1)/sqrt(5).
    ASSERT_EQ(v.entries().size(), 2u);
    EXPECT_EQ(v.entries()[0].index, 0);
    EXPECT_NEAR(v.entries()[0].weight, 2.0 / std::sqrt(5.0), 1e-15);
    EXPECT_NEAR(v.entries()[1].weight, 1.0 / std::sqrt(5.0), 1e-15);

    Document doc3;  // "apple cherry date date"
    doc3.id = "d3";
    doc3.tokens = {0, 2, 3, 3};
    const SparseVector w = tfidf_transform(doc3, vocab);
    const double x = std::log(4.0 / 3.0) + 1.0;  // df 2 terms
    const double y = 2.0 * (std::log(4.0 / 2.0) + 1.0);  // date, tf 2, df 1
    const double norm = std::sqrt(2.0 * x * x + y * y);
    ASSERT_EQ(w.entries().size(), 3u);
    EXPECT_NEAR(w.entries()[0].weight, x / norm, 1e-15);
    EXPECT_NEAR(w.entries()[1].weight, x / norm, 1e-15);
    EXPECT_NEAR(w.entries()[2].weight, y / norm, 1e-15);
    EXPECT_NEAR(w.norm(), 1.0, 1e-12);
}

TEST(Tfidf, TrainingDocOrderDoesNotChangeFeatures) {
    RawDataset raw;
    raw.label_names = {"l0"};
    for (int i = 0; i < 20; ++i) {
        RawDocument d;
        d.id = "d" + std::to_string(i);
        d.text = "alpha beta gamma" + std::string(i % 3, ' ') +
                 (i % 2 ? " delta epsilon" : " zeta");
        d.labels = {"l0"};
        raw.train.push_back(d);
    }
    raw.test = {raw.train[0]};

    RawDataset shuffled = raw;
    Rng rng(4);
    rng.shuffle(shuffled.train);

    VocabularyParams p;
    p.min_df = 1;
    const LoadedDataset a = build_dataset(raw, p);
    const LoadedDataset b = build_dataset(shuffled, p);
    EXPECT_EQ(a.vocabulary.tokens, b.vocabulary.tokens);
    EXPECT_EQ(compute_features(a.data.test, a.vocabulary),
              compute_features(b.data.test, b.vocabulary));
}

TEST(Dataset, BuildMapsLabelsSortsAndCounts) {
    RawDataset raw;
    raw.label_names = {"x", "y", "z"};
    RawDocument d1{"a", "foo bar foo", {"z", "x", "z"}};
    RawDocument d2{"b", "bar baz", {"y"}};
    raw.train = {d1, d2};
    raw.test = {RawDocument{"t", "foo unseen", {"x"}}};

    VocabularyParams p;
    p.min_df = 1;
    const LoadedDataset loaded = build_dataset(raw, p);
    EXPECT_EQ(loaded.data.num_labels(), 3);
    // duplicates collapse and ids come out ascending
    EXPECT_EQ(loaded.data.train[0].labels, (std::vector<LabelId>{0, 2}));
    EXPECT_EQ(loaded.data.train[1].labels, (std::vector<LabelId>{1}));
    EXPECT_EQ(loaded.data.label_train_frequency,
              (std::vector<std::int64_t>{1, 1, 1}));
    // "unseen" has df 0 in train, so the test doc keeps only "foo"
    ASSERT_EQ(loaded.data.test[0].tokens.size(), 1u);
    EXPECT_EQ(loaded.vocabulary.tokens[static_cast<std::size_t>(
                  loaded.data.test[0].tokens[0])],
              "foo");
}

TEST(Dataset, UnknownLabelNamesTheDocument) {
    RawDataset raw;
    raw.label_names = {"known"};
    raw.train = {RawDocument{"doc7", "text here", {"mystery"}}};
    VocabularyParams p;
    p.min_df = 1;
    p.max_df_ratio = 1.0;
    try {
        build_dataset(raw, p);
        FAIL() << "expected Error";
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "data: unknown label 'mystery' in document 'doc7'");
    }
}

TEST(Dataset, EmptyTrainSplitIsAnError) {
    RawDataset raw;
    raw.label_names = {"l"};
    EXPECT_THROW(build_dataset(raw, {}), Error);
}

TEST(DatasetIo, WriteThenLoadRoundTrips) {
    TempDir dir("corpus_io");
    SynthParams sp;
    sp.num_labels = 20;
    sp.train_docs = 80;
    sp.test_docs = 20;
    sp.vocab_size = 200;
    const RawDataset raw = synth_powerlaw(sp);
    write_dataset_files(raw, dir.path());

    const RawDataset back = read_raw_dataset(
        dir / "train.jsonl", dir / "test.jsonl", dir / "labels.tsv");
    ASSERT_EQ(back.train.size(), raw.train.size());
    ASSERT_EQ(back.test.size(), raw.test.size());
    EXPECT_EQ(back.label_names, raw.label_names);
    for (std::size_t i = 0; i < raw.train.size(); ++i) {
        EXPECT_EQ(back.train[i].id, raw.train[i].id);
        EXPECT_EQ(back.train[i].text, raw.train[i].text);
        EXPECT_EQ(back.train[i].labels, raw.train[i].labels);
    }
}

TEST(DatasetIo, ParseErrorsNameFileAndLine) {
    TempDir dir("corpus_bad");
    {
        std::ofstream out(dir / "train.jsonl");
        out << R"({"id": "a", "text": "fine", "labels": ["l"]})" << '\n';
        out << "{broken" << '\n';
    }
    {
        std::ofstream out(dir / "test.jsonl");
        out << R"({"id": "t", "text": "fine", "labels": []})" << '\n';
    }
    {
        std::ofstream out(dir / "labels.tsv");
        out << "0\tl\n";
    }
    try {
        read_raw_dataset(dir / "train.jsonl", dir / "test.jsonl", dir / "labels.tsv");
        FAIL() << "expected Error";
    } catch (const Error& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("train.jsonl:2"), std::string::npos) << what;
    }
}

TEST(DatasetIo, DuplicateDocumentIdsAreRejected) {
    TempDir dir("corpus_dup");
    {
        std::ofstream out(dir / "train.jsonl");
        out << R"({"id": "same", "text": "one", "labels": ["l"]})" << '\n';
        out << R"({"id": "same", "text": "two", "labels": ["l"]})" << '\n';
    }
    {
        std::ofstream out(dir / "test.jsonl");
    }
    {
        std::ofstream out(dir / "labels.tsv");
        out << "0\tl\n";
    }
    EXPECT_THROW(read_raw_dataset(dir / "train.jsonl", dir / "test.jsonl",
                                  dir / "labels.tsv"),
                 Error);
}

TEST(DatasetIo, LabelCatalogValidatesIndexOrder) {
    TempDir dir("corpus_labels");
    {
        std::ofstream out(dir / "train.jsonl");
        out << R"({"id": "a", "text": "x", "labels": []})" << '\n';
    }
    {
        std::ofstream out(dir / "test.jsonl");
    }
    {
        std::ofstream out(dir / "labels.tsv");
        out << "0\tfirst\n2\tskipped\n";
    }
    EXPECT_THROW(read_raw_dataset(dir / "train.jsonl", dir / "test.jsonl",
                                  dir / "labels.tsv"),
                 Error);
}

TEST(DatasetIo, FeatureDumpIsParseable) {
    TempDir dir("corpus_dump");
    const LoadedDataset loaded = test::tiny_synth_dataset(10, 50, 10);
    const std::vector<SparseVector> features =
        compute_features(loaded.data.train, loaded.vocabulary);
    dump_features(dir / "features.tsv", loaded.data.train, features);

    const std::string text = test::slurp(dir / "features.tsv");
    std::int64_t lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    EXPECT_EQ(lines, static_cast<std::int64_t>(loaded.data.train.size()));
    EXPECT_EQ(text.find(loaded.data.train[0].id + "\t"), 0u);
    EXPECT_NE(text.find(':'), std::string::npos);
}

}  // namespace
}  // namespace xtail
