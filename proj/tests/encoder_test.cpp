#include "xtail/encoder.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "xtail/projection.hpp"

namespace xtail {
namespace {

using test::TempDir;
using test::tiny_synth_dataset;

TEST(Scoring, ClosedFormsMatchHandValues) {
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
    EXPECT_NEAR(sigmoid(-std::log(3.0)), 0.25, 1e-15);

    EXPECT_DOUBLE_EQ(f_kde(0.3, -1.2), 0.5 * (sigmoid(0.3) + sigmoid(-1.2)));
    EXPECT_DOUBLE_EQ(f_kde(0.0, 0.0), 0.5);

    EXPECT_DOUBLE_EQ(f_final(0.0, 0.8, 0.5), 0.5 * 0.5 + 0.5 * 0.8);
    EXPECT_DOUBLE_EQ(f_final(1.7, 0.8, 0.0), sigmoid(1.7));
    EXPECT_DOUBLE_EQ(f_final(1.7, 0.8, 1.0), 0.8);

    Eigen::VectorXd a(3);
    a << 1.0, -2.0, 0.5;
    Eigen::VectorXd b(3);
    b << 0.5, 1.0, 4.0;
    EXPECT_DOUBLE_EQ(f_dual(a, b), 0.5 - 2.0 + 2.0);
}

TEST(Scoring, BceLossMatchesHandCaseAndStaysFinite) {
    const std::vector<double> probs = {0.5, 0.25};
    const std::vector<std::uint8_t> targets = {1, 0};
    EXPECT_DOUBLE_EQ(bce_loss(probs, targets), -std::log(0.5) - std::log(0.75));

    // Saturated probabilities are clamped rather than producing inf.
    const std::vector<double> saturated = {0.0, 1.0};
    const std::vector<std::uint8_t> wrong = {1, 0};
    EXPECT_TRUE(std::isfinite(bce_loss(saturated, wrong)));

    const std::vector<double> one = {0.5};
    EXPECT_THROW(bce_loss(one, targets), Error);
}

TEST(Scoring, LogitGradientIsProbabilityMinusTarget) {
    EXPECT_DOUBLE_EQ(bce_logit_gradient(0.7, true), 0.7 - 1.0);
    EXPECT_DOUBLE_EQ(bce_logit_gradient(0.7, false), 0.7);

    // Central difference of the one-label loss in logit space.
    const double z = 0.37;
    const double h = 1e-6;
    for (const bool positive : {true, false}) {
        const auto loss = [&](double logit) {
            const std::vector<double> p = {sigmoid(logit)};
            const std::vector<std::uint8_t> t = {positive ? std::uint8_t{1}
                                                          : std::uint8_t{0}};
            return bce_loss(p, t);
        };
        const double numeric = (loss(z + h) - loss(z - h)) / (2.0 * h);
        EXPECT_NEAR(bce_logit_gradient(sigmoid(z), positive), numeric, 1e-8);
    }
}

TEST(BatchLabels, PositivesThenHardNegativesInMiningOrder) {
    std::vector<Document> docs(2);
    docs[0].labels = {3, 1};
    docs[1].labels = {2};
    const std::vector<std::vector<LabelId>> hard = {{5, 1, 0}, {4, 5}};
    const std::vector<std::size_t> batch = {0, 1};

    Rng rng(9);
    const std::vector<LabelId> pool =
        sample_batch_labels(batch, docs, hard, 8, 6, rng);
    EXPECT_EQ(pool, (std::vector<LabelId>{1, 2, 3, 5, 0, 4}));
    // The pool filled from positives and negatives alone, so no random
    // filler draw was consumed.
    Rng untouched(9);
    EXPECT_EQ(rng.next_u64(), untouched.next_u64());
}

TEST(BatchLabels, PositivesMayExceedThePool) {
    std::vector<Document> docs(1);
    docs[0].labels = {2, 0, 1};
    const std::vector<std::vector<LabelId>> hard = {{3}};
    const std::vector<std::size_t> batch = {0};
    Rng rng(1);
    const std::vector<LabelId> pool = sample_batch_labels(batch, docs, hard, 5, 2, rng);
    EXPECT_EQ(pool, (std::vector<LabelId>{0, 1, 2}));
}

TEST(BatchLabels, FillerDrawsDistinctLabelsUntilThePoolIsFull) {
    std::vector<Document> docs(1);
    docs[0].labels = {1};
    const std::vector<std::vector<LabelId>> hard = {{}};
    const std::vector<std::size_t> batch = {0};
    Rng rng(5);
    const std::vector<LabelId> pool = sample_batch_labels(batch, docs, hard, 5, 5, rng);
    ASSERT_EQ(pool.size(), 5u);
    EXPECT_EQ(pool[0], 1);
    std::vector<LabelId> sorted = pool;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<LabelId>{0, 1, 2, 3, 4}));

    Rng other(5);
    EXPECT_THROW(sample_batch_labels({}, docs, hard, 5, 5, other), Error);
}

TEST(Init, UntrainedEncoderIsARandomProjection) {
    EncoderConfig config;
    config.dim = 8;
    config.seed = 42;
    const EncoderModel model = init_encoder(20, 6, config);

    const Eigen::MatrixXd emb = sample_projection(8, 20, derive_seed(42, 0));
    const Eigen::MatrixXd head = sample_projection(8, 6, derive_seed(42, 1)).transpose();
    EXPECT_TRUE((model.embedding.array() == emb.array()).all());
    EXPECT_TRUE((model.head.array() == head.array()).all());
    EXPECT_TRUE(model.doc_w.isIdentity(0.0));
    EXPECT_TRUE(model.label_w.isIdentity(0.0));
    EXPECT_TRUE((model.doc_b.array() == 0.0).all());
    EXPECT_TRUE((model.label_b.array() == 0.0).all());

    // With identity poolers the document vector is the weighted sum of the
    // embedding columns on the feature support.
    const SparseVector features = SparseVector::from_pairs({{3, 0.5}, {7, 0.25}});
    const Eigen::VectorXd doc = encode_document(model, features);
    const Eigen::VectorXd expected = 0.5 * emb.col(3) + 0.25 * emb.col(7);
    for (Eigen::Index i = 0; i < doc.size(); ++i) {
        EXPECT_DOUBLE_EQ(doc[i], expected[i]);
    }
    EXPECT_DOUBLE_EQ(f_dense(model, doc, 4), head.row(4).dot(doc));

    EXPECT_THROW(init_encoder(0, 6, config), Error);
}

TEST(Init, LabelEncodingAveragesTheTokenBudget) {
    EncoderConfig config;
    config.dim = 8;
    config.seed = 3;
    config.pseudo_len = 2;
    const EncoderModel model = init_encoder(12, 3, config);

    PseudoLabel pseudo;
    pseudo.label = 0;
    pseudo.name_tokens = {2};
    pseudo.keyword_tokens = {5, 9};

    // Budget 2 keeps tokens {2, 5} and drops token 9.
    const Eigen::VectorXd vec = encode_label(model, pseudo);
    const Eigen::VectorXd expected =
        (model.embedding.col(2) + model.embedding.col(5)) / 2.0;
    for (Eigen::Index i = 0; i < vec.size(); ++i) {
        EXPECT_DOUBLE_EQ(vec[i], expected[i]);
    }

    PseudoLabel empty;
    try {
        encode_label(model, empty);
        FAIL() << "expected Error";
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "data: empty label text");
    }
}

TEST(GradCheck, HeadPathPassesCentralDifference) {
    Rng rng(31);
    const Eigen::MatrixXd head = sample_projection(3, 4, 8).transpose();
    std::vector<Eigen::VectorXd> docs;
    for (int i = 0; i < 2; ++i) {
        Eigen::VectorXd v(3);
        for (Eigen::Index r = 0; r < 3; ++r) {
            v[r] = rng.next_gaussian();
        }
        docs.push_back(v);
    }
    const std::vector<std::vector<std::uint8_t>> targets = {{1, 0, 0, 1}, {0, 1, 0, 0}};

    const GradCheckReport report = grad_check(head, docs, targets, 1e-5, 0.05);
    EXPECT_TRUE(report.pass) << report.failing_block;
    EXPECT_TRUE(report.failing_block.empty());
    EXPECT_LE(report.max_rel_err_logits, 1e-4);
    EXPECT_LE(report.max_rel_err_doc_feature, 1e-4);
    EXPECT_LE(report.max_rel_err_label_embedding, 1e-4);
    EXPECT_LE(report.closed_form_max_abs_err, 1e-8);

    const std::vector<std::vector<std::uint8_t>> short_targets = {{1, 0, 0, 1}};
    EXPECT_THROW(grad_check(head, docs, short_targets, 1e-5, 0.05), Error);
}

class EncoderTraining : public ::testing::Test {
protected:
    void SetUp() override {
        loaded = tiny_synth_dataset(15, 80, 20, 11);
        features = compute_features(loaded.data.train, loaded.vocabulary);
        SvmHyper hyper;
        hyper.epochs = 3;
        hyper.seed = 17;
        sparse = train_svm(loaded.data, features,
                           static_cast<std::int64_t>(loaded.vocabulary.size()), hyper);
        PseudoParams params;
        params.top_k = 5;
        pseudo = build_pseudo_labels(normalize_for_theory(sparse), loaded.data,
                                     loaded.vocabulary, params);
    }

    EncoderConfig small_config() const {
        EncoderConfig config;
        config.dim = 16;
        config.epochs = 1;
        config.pretrain_epochs = 1;
        config.batch_size = 8;
        config.label_pool = 10;
        config.hard_negatives = 3;
        config.seed = 23;
        return config;
    }

    LoadedDataset loaded;
    std::vector<SparseVector> features;
    SparseLinearModel sparse;
    std::vector<PseudoLabel> pseudo;
};

TEST_F(EncoderTraining, ZeroLearningRatesLeaveTheModelAtInit) {
    EncoderConfig config = small_config();
    config.lr_embedding = 0.0;
    config.lr_pooler = 0.0;
    config.lr_head = 0.0;
    const EncoderModel trained =
        train_encoder(loaded.data, static_cast<std::int64_t>(loaded.vocabulary.size()),
                      features, pseudo, &sparse, EncoderMode::Dual, config);
    const EncoderModel fresh = init_encoder(
        static_cast<std::int64_t>(loaded.vocabulary.size()), loaded.data.num_labels(),
        config);
    EXPECT_TRUE((trained.embedding.array() == fresh.embedding.array()).all());
    EXPECT_TRUE((trained.head.array() == fresh.head.array()).all());
    EXPECT_TRUE((trained.doc_w.array() == fresh.doc_w.array()).all());
    EXPECT_TRUE((trained.label_w.array() == fresh.label_w.array()).all());
    EXPECT_TRUE((trained.doc_b.array() == fresh.doc_b.array()).all());
    EXPECT_TRUE((trained.label_b.array() == fresh.label_b.array()).all());
}

TEST_F(EncoderTraining, RepeatedRunsAreBitwiseIdentical) {
    const EncoderConfig config = small_config();
    const auto vocab = static_cast<std::int64_t>(loaded.vocabulary.size());
    const EncoderModel a = train_encoder(loaded.data, vocab, features, pseudo, &sparse,
                                         EncoderMode::Kde, config);
    const EncoderModel b = train_encoder(loaded.data, vocab, features, pseudo, &sparse,
                                         EncoderMode::Kde, config);
    EXPECT_TRUE((a.embedding.array() == b.embedding.array()).all());
    EXPECT_TRUE((a.head.array() == b.head.array()).all());
    EXPECT_TRUE((a.doc_w.array() == b.doc_w.array()).all());
    EXPECT_TRUE((a.label_w.array() == b.label_w.array()).all());

    EncoderConfig other = config;
    other.seed = 24;
    const EncoderModel c = train_encoder(loaded.data, vocab, features, pseudo, &sparse,
                                         EncoderMode::Kde, other);
    EXPECT_FALSE((a.embedding.array() == c.embedding.array()).all());
}

TEST_F(EncoderTraining, DenseWarmupLossDecreases) {
    EncoderConfig config = small_config();
    config.epochs = 3;
    TrainStats stats;
    const EncoderModel model =
        train_encoder(loaded.data, static_cast<std::int64_t>(loaded.vocabulary.size()),
                      features, pseudo, nullptr, EncoderMode::Dense, config, &stats);
    ASSERT_EQ(stats.epoch_loss.size(), 3u);
    EXPECT_LT(stats.epoch_loss.back(), stats.epoch_loss.front());
    EXPECT_GT(model.head.cwiseAbs().maxCoeff(), 0.0);

    EXPECT_THROW(
        train_encoder(loaded.data, static_cast<std::int64_t>(loaded.vocabulary.size()),
                      features, pseudo, nullptr, EncoderMode::Dual, config),
        Error);
}

TEST_F(EncoderTraining, ModeNamesRoundTrip) {
    EXPECT_EQ(encoder_mode_from_string("dense"), EncoderMode::Dense);
    EXPECT_EQ(encoder_mode_from_string("dual"), EncoderMode::Dual);
    EXPECT_EQ(encoder_mode_from_string("kde"), EncoderMode::Kde);
    EXPECT_EQ(to_string(EncoderMode::Kde), "kde");
    EXPECT_THROW(encoder_mode_from_string("deep"), Error);
    EXPECT_EQ(to_string(ScoreKind::Final), "final");
}

TEST_F(EncoderTraining, SaveLoadRoundTripsAllParameters) {
    TempDir dir("encio");
    const EncoderConfig config = small_config();
    const auto vocab = static_cast<std::int64_t>(loaded.vocabulary.size());
    const EncoderModel model = train_encoder(loaded.data, vocab, features, pseudo,
                                             &sparse, EncoderMode::Dual, config);
    const auto path = dir / "enc.bin";
    save_encoder_model(path, model);
    const EncoderModel back = load_encoder_model(path);

    EXPECT_EQ(back.vocab_size, model.vocab_size);
    EXPECT_EQ(back.num_labels, model.num_labels);
    EXPECT_EQ(back.dim, model.dim);
    EXPECT_EQ(back.config.pseudo_len, model.config.pseudo_len);
    EXPECT_DOUBLE_EQ(back.config.ensemble_weight, model.config.ensemble_weight);
    EXPECT_TRUE((back.embedding.array() == model.embedding.array()).all());
    EXPECT_TRUE((back.doc_w.array() == model.doc_w.array()).all());
    EXPECT_TRUE((back.doc_b.array() == model.doc_b.array()).all());
    EXPECT_TRUE((back.label_w.array() == model.label_w.array()).all());
    EXPECT_TRUE((back.label_b.array() == model.label_b.array()).all());
    EXPECT_TRUE((back.head.array() == model.head.array()).all());

    const auto bogus = dir / "bogus.bin";
    {
        std::ofstream out(bogus, std::ios::binary);
        out << "NOPE";
    }
    EXPECT_THROW(load_encoder_model(bogus), Error);
    EXPECT_THROW(load_encoder_model(dir / "missing.bin"), Error);
}

TEST(Predict, DenseScoresMatchTheClosedForm) {
    EncoderConfig config;
    config.dim = 4;
    config.seed = 6;
    const EncoderModel model = init_encoder(10, 5, config);

    std::vector<Document> docs(2);
    docs[0].id = "a";
    docs[1].id = "b";
    const std::vector<SparseVector> features = {
        SparseVector::from_pairs({{0, 1.0}, {4, 0.5}}),
        SparseVector::from_pairs({{7, 2.0}}),
    };

    const std::vector<RankedPrediction> out =
        predict(&model, {}, nullptr, docs, features, ScoreKind::Dense, 3);
    ASSERT_EQ(out.size(), 2u);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        EXPECT_EQ(out[i].doc_id, docs[i].id);
        const Eigen::VectorXd doc = encode_document(model, features[i]);
        std::vector<double> scores;
        for (LabelId l = 0; l < 5; ++l) {
            scores.push_back(f_dense(model, doc, l));
        }
        const std::vector<LabelId> expected = rank_labels(scores, 3);
        EXPECT_EQ(out[i].labels, expected);
        ASSERT_EQ(out[i].scores.size(), 3u);
        for (std::size_t r = 0; r < 3; ++r) {
            EXPECT_DOUBLE_EQ(out[i].scores[r],
                             scores[static_cast<std::size_t>(out[i].labels[r])]);
        }
    }

    EXPECT_THROW(
        predict(&model, {}, nullptr, docs, features, ScoreKind::Final, 3), Error);
    EXPECT_THROW(
        predict(nullptr, {}, nullptr, docs, features, ScoreKind::Dense, 3), Error);
}

}  // namespace
}  // namespace xtail
