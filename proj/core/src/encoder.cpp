#include "xtail/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "binary_io.hpp"
#include "xtail/projection.hpp"

namespace xtail {

namespace {

constexpr double kProbFloor = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

Eigen::VectorXd embed_features(const EncoderModel& model, const SparseVector& features) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(model.dim);
    for (const SparseEntry& e : features.entries()) {
        h.noalias() += e.weight * model.embedding.col(e.index);
    }
    return h;
}

void check_training_inputs(const EncoderModel& model, const Dataset& dataset,
                           const std::vector<SparseVector>& features) {
    if (dataset.train.empty() || features.empty()) {
        throw Error("data", "no documents");
    }
    if (dataset.train.size() != features.size()) {
        throw Error("internal", "feature/document count mismatch");
    }
    if (model.num_labels != dataset.num_labels()) {
        throw Error("internal", "model/catalog label count mismatch");
    }
}

void record_epoch(TrainStats* stats, double loss) {
    if (!std::isfinite(loss)) {
        throw Error("train", "training diverged");
    }
    if (stats != nullptr) {
        stats->epoch_loss.push_back(loss);
    }
}

}  // namespace

EncoderMode encoder_mode_from_string(const std::string& name) {
    if (name == "dense") {
        return EncoderMode::Dense;
    }
    if (name == "dual") {
        return EncoderMode::Dual;
    }
    if (name == "kde") {
        return EncoderMode::Kde;
    }
    throw Error("usage", "unknown encoder mode '" + name + "'");
}

std::string to_string(EncoderMode mode) {
    switch (mode) {
        case EncoderMode::Dense:
            return "dense";
        case EncoderMode::Dual:
            return "dual";
        case EncoderMode::Kde:
            return "kde";
    }
    throw Error("internal", "unhandled encoder mode");
}

std::string to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::Sparse:
            return "sparse";
        case ScoreKind::Dense:
            return "dense";
        case ScoreKind::Dual:
            return "dual";
        case ScoreKind::Kde:
            return "kde";
        case ScoreKind::Final:
            return "final";
    }
    throw Error("internal", "unhandled score kind");
}

EncoderModel init_encoder(std::int64_t vocab_size, std::int64_t num_labels,
                          const EncoderConfig& config) {
    if (config.dim < 1 || vocab_size < 1 || num_labels < 1) {
        throw Error("config", "encoder needs positive dim, vocabulary, and labels");
    }
    EncoderModel model;
    model.vocab_size = vocab_size;
    model.num_labels = num_labels;
    model.dim = config.dim;
    model.config = config;
    model.embedding = sample_projection(config.dim, vocab_size, derive_seed(config.seed, 0));
    model.head =
        sample_projection(config.dim, num_labels, derive_seed(config.seed, 1)).transpose();
    model.doc_w = Eigen::MatrixXd::Identity(config.dim, config.dim);
    model.doc_b = Eigen::VectorXd::Zero(config.dim);
    model.label_w = Eigen::MatrixXd::Identity(config.dim, config.dim);
    model.label_b = Eigen::VectorXd::Zero(config.dim);
    return model;
}

Eigen::VectorXd encode_document(const EncoderModel& model, const SparseVector& features) {
    return model.doc_w * embed_features(model, features) + model.doc_b;
}

Eigen::VectorXd encode_label(const EncoderModel& model, const PseudoLabel& pseudo) {
    std::vector<TokenId> tokens = pseudo.all_tokens();
    if (tokens.size() > static_cast<std::size_t>(model.config.pseudo_len)) {
        tokens.resize(static_cast<std::size_t>(model.config.pseudo_len));
    }
    if (tokens.empty()) {
        throw Error("data", "empty label text");
    }
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(model.dim);
    for (const TokenId id : tokens) {
        psi.noalias() += model.embedding.col(id);
    }
    psi /= static_cast<double>(tokens.size());
    return model.label_w * psi + model.label_b;
}

double f_dense(const EncoderModel& model, const Eigen::VectorXd& doc_vec, LabelId label) {
    return model.head.row(label).dot(doc_vec);
}

double f_dual(const Eigen::VectorXd& doc_vec, const Eigen::VectorXd& label_vec) {
    return doc_vec.dot(label_vec);
}

double sigmoid(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

double f_kde(double dual_logit, double dense_logit) {
    return 0.5 * (sigmoid(dual_logit) + sigmoid(dense_logit));
}

double f_final(double sparse_score, double dense_probability, double weight) {
    return (1.0 - weight) * sigmoid(sparse_score) + weight * dense_probability;
}

double bce_loss(std::span<const double> probabilities,
                std::span<const std::uint8_t> targets) {
    if (probabilities.size() != targets.size()) {
        throw Error("internal", "probability/target length mismatch");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = clamp_prob(probabilities[i]);
        loss -= targets[i] != 0 ? std::log(p) : std::log(1.0 - p);
    }
    return loss;
}

double bce_logit_gradient(double probability, bool positive) {
    return probability - (positive ? 1.0 : 0.0);
}

std::vector<LabelId> sample_batch_labels(std::span<const std::size_t> batch,
                                         const std::vector<Document>& docs,
                                         const std::vector<std::vector<LabelId>>& hard_negatives,
                                         std::int64_t num_labels, std::int64_t pool_size,
                                         Rng& rng) {
    if (batch.empty()) {
        throw Error("internal", "empty batch");
    }
    const std::int64_t pool = std::min(pool_size, num_labels);

    std::vector<LabelId> sampled;
    std::unordered_set<LabelId> in_pool;
    auto push = [&](LabelId l) {
        if (in_pool.insert(l).second) {
            sampled.push_back(l);
            return true;
        }
        return false;
    };

    // Positives first: every batch label is scored even when the pool must
    // grow beyond its nominal size.
    std::vector<LabelId> positives;
    for (const std::size_t doc : batch) {
        positives.insert(positives.end(), docs[doc].labels.begin(), docs[doc].labels.end());
    }
    std::sort(positives.begin(), positives.end());
    positives.erase(std::unique(positives.begin(), positives.end()), positives.end());
    for (const LabelId l : positives) {
        push(l);
    }

    for (const std::size_t doc : batch) {
        if (static_cast<std::int64_t>(sampled.size()) >= pool) {
            break;
        }
        for (const LabelId l : hard_negatives[doc]) {
            if (static_cast<std::int64_t>(sampled.size()) >= pool) {
                break;
            }
            push(l);
        }
    }

    while (static_cast<std::int64_t>(sampled.size()) < pool) {
        push(static_cast<LabelId>(rng.next_below(static_cast<std::uint64_t>(num_labels))));
    }
    return sampled;
}

void train_dense(EncoderModel& model, const Dataset& dataset,
                 const std::vector<SparseVector>& features, std::int32_t epochs, Rng& rng,
                 TrainStats* stats) {
    check_training_inputs(model, dataset, features);
    const std::size_t n = features.size();
    const auto num_labels = static_cast<Eigen::Index>(model.num_labels);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    Eigen::VectorXd y(num_labels);
    for (std::int32_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (const std::size_t doc : order) {
            const Eigen::VectorXd h = embed_features(model, features[doc]);
            const Eigen::VectorXd doc_vec = model.doc_w * h + model.doc_b;
            const Eigen::VectorXd logits = model.head * doc_vec;

            y.setZero();
            for (const LabelId l : dataset.train[doc].labels) {
                y[l] = 1.0;
            }
            Eigen::VectorXd g_logits(num_labels);
            for (Eigen::Index l = 0; l < num_labels; ++l) {
                const double p = sigmoid(logits[l]);
                const double pc = clamp_prob(p);
                loss_sum -= y[l] != 0.0 ? std::log(pc) : std::log(1.0 - pc);
                g_logits[l] = p - y[l];
            }

            // All gradients are taken at the pre-update parameters.
            const Eigen::VectorXd g_doc_vec = model.head.transpose() * g_logits;
            const Eigen::VectorXd g_h = model.doc_w.transpose() * g_doc_vec;

            model.head.noalias() -=
                model.config.lr_head * g_logits * doc_vec.transpose();
            model.doc_w.noalias() -= model.config.lr_pooler * g_doc_vec * h.transpose();
            model.doc_b.noalias() -= model.config.lr_pooler * g_doc_vec;
            for (const SparseEntry& e : features[doc].entries()) {
                model.embedding.col(e.index).noalias() -=
                    model.config.lr_embedding * e.weight * g_h;
            }
        }
        record_epoch(stats, loss_sum / static_cast<double>(n));
    }
}

void train_pairs(EncoderModel& model, const Dataset& dataset,
                 const std::vector<SparseVector>& features,
                 const std::vector<PseudoLabel>& pseudo_labels,
                 const std::vector<std::vector<LabelId>>& hard_negatives, EncoderMode mode,
                 std::int32_t epochs, Rng& rng, TrainStats* stats) {
    check_training_inputs(model, dataset, features);
    if (mode == EncoderMode::Dense) {
        throw Error("internal", "train_pairs expects the dual or kde mode");
    }
    if (pseudo_labels.size() != static_cast<std::size_t>(model.num_labels)) {
        throw Error("internal", "pseudo label set does not cover the catalog");
    }
    if (hard_negatives.size() != features.size()) {
        throw Error("internal", "hard negative lists do not cover the training set");
    }
    const bool with_dense_branch = mode == EncoderMode::Kde;
    const std::size_t n = features.size();
    const auto batch_size = static_cast<std::size_t>(model.config.batch_size);

    // Token lists are fixed during training; truncate them once.
    std::vector<std::vector<TokenId>> label_tokens(pseudo_labels.size());
    for (std::size_t l = 0; l < pseudo_labels.size(); ++l) {
        label_tokens[l] = pseudo_labels[l].all_tokens();
        if (label_tokens[l].size() > static_cast<std::size_t>(model.config.pseudo_len)) {
            label_tokens[l].resize(static_cast<std::size_t>(model.config.pseudo_len));
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    Eigen::MatrixXd g_embedding = Eigen::MatrixXd::Zero(model.dim, model.vocab_size);
    std::vector<TokenId> touched;

    for (std::int32_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t end = std::min(n, start + batch_size);
            const std::span<const std::size_t> batch(order.data() + start, end - start);
            const std::vector<LabelId> pool = sample_batch_labels(
                batch, dataset.train, hard_negatives, model.num_labels,
                model.config.label_pool, rng);

            const auto b = static_cast<Eigen::Index>(batch.size());
            const auto s = static_cast<Eigen::Index>(pool.size());

            // Label tower.
            Eigen::MatrixXd psi(model.dim, s);
            for (Eigen::Index j = 0; j < s; ++j) {
                const auto& tokens = label_tokens[static_cast<std::size_t>(pool[j])];
                if (tokens.empty()) {
                    throw Error("data", "empty label text");
                }
                Eigen::VectorXd acc = Eigen::VectorXd::Zero(model.dim);
                for (const TokenId id : tokens) {
                    acc.noalias() += model.embedding.col(id);
                }
                psi.col(j) = acc / static_cast<double>(tokens.size());
            }
            Eigen::MatrixXd label_vecs = (model.label_w * psi).colwise() + model.label_b;

            // Document tower.
            Eigen::MatrixXd h(model.dim, b);
            for (Eigen::Index i = 0; i < b; ++i) {
                h.col(i) = embed_features(model, features[batch[static_cast<std::size_t>(i)]]);
            }
            Eigen::MatrixXd doc_vecs = (model.doc_w * h).colwise() + model.doc_b;

            Eigen::MatrixXd head_rows;  // pool subset of the per-label head
            if (with_dense_branch) {
                head_rows.resize(s, model.dim);
                for (Eigen::Index j = 0; j < s; ++j) {
                    head_rows.row(j) = model.head.row(pool[j]);
                }
            }

            const Eigen::MatrixXd dual = doc_vecs.transpose() * label_vecs;  // b x s
            Eigen::MatrixXd dense;
            if (with_dense_branch) {
                dense = doc_vecs.transpose() * head_rows.transpose();  // b x s
            }

            const double norm = 1.0 / (static_cast<double>(b) * static_cast<double>(s));
            Eigen::MatrixXd g_dual(b, s);
            Eigen::MatrixXd g_dense;
            if (with_dense_branch) {
                g_dense.resize(b, s);
            }

            for (Eigen::Index i = 0; i < b; ++i) {
                const Document& doc = dataset.train[batch[static_cast<std::size_t>(i)]];
                const std::unordered_set<LabelId> truth(doc.labels.begin(),
                                                        doc.labels.end());
                for (Eigen::Index j = 0; j < s; ++j) {
                    const double y = truth.contains(pool[j]) ? 1.0 : 0.0;
                    if (with_dense_branch) {
                        const double qa = sigmoid(dual(i, j));
                        const double qb = sigmoid(dense(i, j));
                        const double q = clamp_prob(0.5 * (qa + qb));
                        loss_sum -=
                            norm * (y != 0.0 ? std::log(q) : std::log(1.0 - q));
                        const double gq = norm * (q - y) / (q * (1.0 - q));
                        g_dual(i, j) = 0.5 * gq * qa * (1.0 - qa);
                        g_dense(i, j) = 0.5 * gq * qb * (1.0 - qb);
                    } else {
                        const double q = sigmoid(dual(i, j));
                        const double qc = clamp_prob(q);
                        loss_sum -=
                            norm * (y != 0.0 ? std::log(qc) : std::log(1.0 - qc));
                        g_dual(i, j) = norm * (q - y);
                    }
                }
            }

            // Backward, all at pre-update parameters.
            Eigen::MatrixXd g_doc_vecs = label_vecs * g_dual.transpose();  // dim x b
            if (with_dense_branch) {
                g_doc_vecs.noalias() += head_rows.transpose() * g_dense.transpose();
            }
            const Eigen::MatrixXd g_label_vecs = doc_vecs * g_dual;  // dim x s

            const Eigen::MatrixXd g_doc_w = g_doc_vecs * h.transpose();
            const Eigen::VectorXd g_doc_b = g_doc_vecs.rowwise().sum();
            const Eigen::MatrixXd g_h = model.doc_w.transpose() * g_doc_vecs;

            const Eigen::MatrixXd g_label_w = g_label_vecs * psi.transpose();
            const Eigen::VectorXd g_label_b = g_label_vecs.rowwise().sum();
            const Eigen::MatrixXd g_psi = model.label_w.transpose() * g_label_vecs;

            touched.clear();
            for (Eigen::Index i = 0; i < b; ++i) {
                for (const SparseEntry& e :
                     features[batch[static_cast<std::size_t>(i)]].entries()) {
                    g_embedding.col(e.index).noalias() += e.weight * g_h.col(i);
                    touched.push_back(e.index);
                }
            }
            for (Eigen::Index j = 0; j < s; ++j) {
                const auto& tokens = label_tokens[static_cast<std::size_t>(pool[j])];
                const double inv = 1.0 / static_cast<double>(tokens.size());
                for (const TokenId id : tokens) {
                    g_embedding.col(id).noalias() += inv * g_psi.col(j);
                    touched.push_back(id);
                }
            }

            // Apply.
            if (with_dense_branch && model.config.train_head_in_pair) {
                for (Eigen::Index j = 0; j < s; ++j) {
                    model.head.row(pool[j]).noalias() -=
                        model.config.lr_head *
                        (g_dense.col(j).transpose() * doc_vecs.transpose());
                }
            }
            model.doc_w.noalias() -= model.config.lr_pooler * g_doc_w;
            model.doc_b.noalias() -= model.config.lr_pooler * g_doc_b;
            model.label_w.noalias() -= model.config.lr_pooler * g_label_w;
            model.label_b.noalias() -= model.config.lr_pooler * g_label_b;
            std::sort(touched.begin(), touched.end());
            touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
            for (const TokenId id : touched) {
                model.embedding.col(id).noalias() -=
                    model.config.lr_embedding * g_embedding.col(id);
                g_embedding.col(id).setZero();
            }
            ++batches;
        }
        record_epoch(stats, loss_sum / static_cast<double>(batches));
    }
}

EncoderModel train_encoder(const Dataset& dataset, std::int64_t vocab_size,
                           const std::vector<SparseVector>& features,
                           const std::vector<PseudoLabel>& pseudo_labels,
                           const SparseLinearModel* sparse_model, EncoderMode mode,
                           const EncoderConfig& config, TrainStats* stats) {
    EncoderModel model = init_encoder(vocab_size, dataset.num_labels(), config);
    Rng rng(derive_seed(config.seed, 0x7E40));
    if (mode == EncoderMode::Dense) {
        train_dense(model, dataset, features, config.epochs, rng, stats);
        return model;
    }
    if (sparse_model == nullptr || !sparse_model->trained()) {
        throw Error("model", "pair training needs a trained sparse model");
    }
    if (config.pretrain_epochs > 0) {
        train_dense(model, dataset, features, config.pretrain_epochs, rng, stats);
    }
    std::vector<std::vector<LabelId>> hard_negatives;
    hard_negatives.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        hard_negatives.push_back(mine_hard_negatives(*sparse_model, features[i],
                                                     dataset.train[i].labels,
                                                     config.hard_negatives));
    }
    train_pairs(model, dataset, features, pseudo_labels, hard_negatives, mode,
                config.epochs, rng, stats);
    return model;
}

std::vector<RankedPrediction> predict(const EncoderModel* model,
                                      const std::vector<PseudoLabel>& pseudo_labels,
                                      const SparseLinearModel* sparse_model,
                                      const std::vector<Document>& docs,
                                      const std::vector<SparseVector>& features,
                                      ScoreKind kind, std::int64_t k) {
    if (docs.size() != features.size()) {
        throw Error("internal", "feature/document count mismatch");
    }
    const bool needs_encoder = kind != ScoreKind::Sparse;
    const bool needs_sparse = kind == ScoreKind::Sparse || kind == ScoreKind::Final;
    const bool needs_labels = kind == ScoreKind::Dual || kind == ScoreKind::Kde ||
                              kind == ScoreKind::Final;
    if (needs_encoder && model == nullptr) {
        throw Error("internal", "encoder model required for this score kind");
    }
    if (needs_sparse && (sparse_model == nullptr || !sparse_model->trained())) {
        throw Error("model", "sparse model required for this score kind");
    }

    const std::int64_t num_labels =
        needs_encoder ? model->num_labels : sparse_model->num_labels();

    Eigen::MatrixXd label_vecs;
    if (needs_labels) {
        if (pseudo_labels.size() != static_cast<std::size_t>(num_labels)) {
            throw Error("internal", "pseudo label set does not cover the catalog");
        }
        label_vecs.resize(model->dim, static_cast<Eigen::Index>(num_labels));
        for (std::size_t l = 0; l < pseudo_labels.size(); ++l) {
            label_vecs.col(static_cast<Eigen::Index>(l)) =
                encode_label(*model, pseudo_labels[l]);
        }
    }

    const double weight = needs_encoder ? model->config.ensemble_weight : 0.5;
    std::vector<RankedPrediction> out;
    out.reserve(docs.size());
    std::vector<double> scores(static_cast<std::size_t>(num_labels));
    for (std::size_t i = 0; i < docs.size(); ++i) {
        Eigen::VectorXd doc_vec;
        if (needs_encoder) {
            doc_vec = encode_document(*model, features[i]);
        }
        std::vector<double> sparse_scores;
        if (needs_sparse) {
            sparse_scores = sparse_model->score_all(features[i]);
        }
        for (std::int64_t l = 0; l < num_labels; ++l) {
            const auto lid = static_cast<LabelId>(l);
            switch (kind) {
                case ScoreKind::Sparse:
                    scores[static_cast<std::size_t>(l)] =
                        sparse_scores[static_cast<std::size_t>(l)];
                    break;
                case ScoreKind::Dense:
                    scores[static_cast<std::size_t>(l)] = f_dense(*model, doc_vec, lid);
                    break;
                case ScoreKind::Dual:
                    scores[static_cast<std::size_t>(l)] =
                        f_dual(doc_vec, label_vecs.col(static_cast<Eigen::Index>(l)));
                    break;
                case ScoreKind::Kde:
                    scores[static_cast<std::size_t>(l)] = f_kde(
                        f_dual(doc_vec, label_vecs.col(static_cast<Eigen::Index>(l))),
                        f_dense(*model, doc_vec, lid));
                    break;
                case ScoreKind::Final:
                    scores[static_cast<std::size_t>(l)] = f_final(
                        sparse_scores[static_cast<std::size_t>(l)],
                        f_kde(f_dual(doc_vec,
                                     label_vecs.col(static_cast<Eigen::Index>(l))),
                              f_dense(*model, doc_vec, lid)),
                        weight);
                    break;
            }
        }
        RankedPrediction pred;
        pred.doc_id = docs[i].id;
        pred.labels = rank_labels(scores, k);
        pred.scores.reserve(pred.labels.size());
        for (const LabelId l : pred.labels) {
            pred.scores.push_back(scores[static_cast<std::size_t>(l)]);
        }
        out.push_back(std::move(pred));
    }
    return out;
}

GradCheckReport grad_check(const Eigen::MatrixXd& head,
                           const std::vector<Eigen::VectorXd>& doc_vectors,
                           const std::vector<std::vector<std::uint8_t>>& targets,
                           double fd_step, double learning_rate, double fd_tolerance,
                           double update_tolerance) {
    const std::size_t n = doc_vectors.size();
    if (n == 0 || targets.size() != n) {
        throw Error("internal", "grad check needs matched documents and targets");
    }
    const auto num_labels = static_cast<Eigen::Index>(head.rows());
    const auto dim = static_cast<Eigen::Index>(head.cols());
    for (std::size_t i = 0; i < n; ++i) {
        if (doc_vectors[i].size() != dim ||
            static_cast<Eigen::Index>(targets[i].size()) != num_labels) {
            throw Error("internal", "grad check shape mismatch");
        }
    }

    // Mean over documents of the summed per-label cross entropies.
    const auto loss_for = [&](const Eigen::MatrixXd& w) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::VectorXd logits = w * doc_vectors[i];
            for (Eigen::Index l = 0; l < num_labels; ++l) {
                const double p = clamp_prob(sigmoid(logits[l]));
                loss -= targets[i][static_cast<std::size_t>(l)] != 0
                            ? std::log(p)
                            : std::log(1.0 - p);
            }
        }
        return loss / static_cast<double>(n);
    };

    const auto rel_err = [](double analytic, double numeric) {
        return std::abs(analytic - numeric) /
               std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    };

    GradCheckReport report;

    // Probabilities at the unperturbed point.
    std::vector<Eigen::VectorXd> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd logits = head * doc_vectors[i];
        probs[i] = logits.unaryExpr([](double s) { return sigmoid(s); });
    }

    // Logit gradients, checked by perturbing one logit at a time through an
    // explicit loss-of-logits form.
    const auto loss_of_logits = [&](std::size_t i, const Eigen::VectorXd& logits) {
        double loss = 0.0;
        for (Eigen::Index l = 0; l < num_labels; ++l) {
            const double p = clamp_prob(sigmoid(logits[l]));
            loss -= targets[i][static_cast<std::size_t>(l)] != 0 ? std::log(p)
                                                                 : std::log(1.0 - p);
        }
        return loss / static_cast<double>(n);
    };
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd logits = head * doc_vectors[i];
        for (Eigen::Index l = 0; l < num_labels; ++l) {
            const double analytic =
                bce_logit_gradient(probs[i][l],
                                   targets[i][static_cast<std::size_t>(l)] != 0) /
                static_cast<double>(n);
            Eigen::VectorXd hi = logits;
            Eigen::VectorXd lo = logits;
            hi[l] += fd_step;
            lo[l] -= fd_step;
            const double numeric =
                (loss_of_logits(i, hi) - loss_of_logits(i, lo)) / (2.0 * fd_step);
            report.max_rel_err_logits =
                std::max(report.max_rel_err_logits, rel_err(analytic, numeric));
        }
    }

    // Document-feature gradients.
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd y(num_labels);
        for (Eigen::Index l = 0; l < num_labels; ++l) {
            y[l] = targets[i][static_cast<std::size_t>(l)] != 0 ? 1.0 : 0.0;
        }
        const Eigen::VectorXd analytic =
            head.transpose() * (probs[i] - y) / static_cast<double>(n);
        const auto loss_with_doc = [&](const Eigen::VectorXd& phi) {
            double loss = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const Eigen::VectorXd logits =
                    head * (j == i ? phi : doc_vectors[j]);
                for (Eigen::Index l = 0; l < num_labels; ++l) {
                    const double p = clamp_prob(sigmoid(logits[l]));
                    loss -= targets[j][static_cast<std::size_t>(l)] != 0
                                ? std::log(p)
                                : std::log(1.0 - p);
                }
            }
            return loss / static_cast<double>(n);
        };
        for (Eigen::Index c = 0; c < dim; ++c) {
            Eigen::VectorXd hi = doc_vectors[i];
            Eigen::VectorXd lo = doc_vectors[i];
            hi[c] += fd_step;
            lo[c] -= fd_step;
            const double numeric =
                (loss_with_doc(hi) - loss_with_doc(lo)) / (2.0 * fd_step);
            report.max_rel_err_doc_feature =
                std::max(report.max_rel_err_doc_feature, rel_err(analytic[c], numeric));
        }
    }

    // Per-label row gradients.
    Eigen::MatrixXd analytic_head = Eigen::MatrixXd::Zero(num_labels, dim);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd y(num_labels);
        for (Eigen::Index l = 0; l < num_labels; ++l) {
            y[l] = targets[i][static_cast<std::size_t>(l)] != 0 ? 1.0 : 0.0;
        }
        analytic_head.noalias() +=
            (probs[i] - y) * doc_vectors[i].transpose() / static_cast<double>(n);
    }
    for (Eigen::Index l = 0; l < num_labels; ++l) {
        for (Eigen::Index c = 0; c < dim; ++c) {
            Eigen::MatrixXd hi = head;
            Eigen::MatrixXd lo = head;
            hi(l, c) += fd_step;
            lo(l, c) -= fd_step;
            const double numeric = (loss_for(hi) - loss_for(lo)) / (2.0 * fd_step);
            report.max_rel_err_label_embedding = std::max(
                report.max_rel_err_label_embedding, rel_err(analytic_head(l, c), numeric));
        }
    }

    // One full-batch step, written two ways: gradient descent on the mean
    // loss versus explicit positive and negative accumulation terms.
    const Eigen::MatrixXd descended = head - learning_rate * analytic_head;
    Eigen::MatrixXd accumulated = head;
    for (Eigen::Index l = 0; l < num_labels; ++l) {
        Eigen::VectorXd pos_term = Eigen::VectorXd::Zero(dim);
        Eigen::VectorXd neg_term = Eigen::VectorXd::Zero(dim);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = probs[i][l];
            if (targets[i][static_cast<std::size_t>(l)] != 0) {
                pos_term.noalias() += (1.0 - p) * doc_vectors[i];
            } else {
                neg_term.noalias() += p * doc_vectors[i];
            }
        }
        accumulated.row(l).noalias() +=
            (learning_rate / static_cast<double>(n)) * (pos_term - neg_term).transpose();
    }
    report.closed_form_max_abs_err = (descended - accumulated).cwiseAbs().maxCoeff();

    report.pass = true;
    if (report.max_rel_err_logits > fd_tolerance) {
        report.pass = false;
        report.failing_block = "logits";
    } else if (report.max_rel_err_doc_feature > fd_tolerance) {
        report.pass = false;
        report.failing_block = "doc_feature";
    } else if (report.max_rel_err_label_embedding > fd_tolerance) {
        report.pass = false;
        report.failing_block = "label_embedding";
    } else if (report.closed_form_max_abs_err > update_tolerance) {
        report.pass = false;
        report.failing_block = "closed_form_update";
    }
    return report;
}

namespace {

constexpr std::uint32_t kEncoderMagic = 0x4E455458u;  // "XTEN"
constexpr std::uint32_t kEncoderVersion = 1;

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
    io::write_f64_span(out, {m.data(), static_cast<std::size_t>(m.size())});
}

void read_matrix(std::ifstream& in, Eigen::MatrixXd& m, const char* what) {
    io::read_f64_span(in, {m.data(), static_cast<std::size_t>(m.size())}, what);
}

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
    io::write_f64_span(out, {v.data(), static_cast<std::size_t>(v.size())});
}

void read_vector(std::ifstream& in, Eigen::VectorXd& v, const char* what) {
    io::read_f64_span(in, {v.data(), static_cast<std::size_t>(v.size())}, what);
}

}  // namespace

void save_encoder_model(const std::filesystem::path& path, const EncoderModel& model) {
    auto out = io::open_output(path);
    io::write_pod(out, kEncoderMagic);
    io::write_pod(out, kEncoderVersion);
    io::write_pod(out, model.vocab_size);
    io::write_pod(out, model.num_labels);
    io::write_pod(out, model.dim);
    const EncoderConfig& c = model.config;
    io::write_pod(out, c.dim);
    io::write_pod(out, c.batch_size);
    io::write_pod(out, c.label_pool);
    io::write_pod(out, c.hard_negatives);
    io::write_pod(out, c.epochs);
    io::write_pod(out, c.pretrain_epochs);
    io::write_pod(out, c.lr_embedding);
    io::write_pod(out, c.lr_pooler);
    io::write_pod(out, c.lr_head);
    io::write_pod(out, c.ensemble_weight);
    io::write_pod(out, c.pseudo_len);
    io::write_pod(out, static_cast<std::uint8_t>(c.train_head_in_pair ? 1 : 0));
    io::write_pod(out, c.seed);
    write_matrix(out, model.embedding);
    write_matrix(out, model.doc_w);
    write_vector(out, model.doc_b);
    write_matrix(out, model.label_w);
    write_vector(out, model.label_b);
    write_matrix(out, model.head);
    if (!out) {
        throw Error("io", "failed writing " + path.string());
    }
}

EncoderModel load_encoder_model(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    if (io::read_pod<std::uint32_t>(in, "magic") != kEncoderMagic) {
        throw Error("model", "not an encoder model file: " + path.string());
    }
    if (io::read_pod<std::uint32_t>(in, "version") != kEncoderVersion) {
        throw Error("model", "unsupported encoder model version in " + path.string());
    }
    EncoderModel model;
    model.vocab_size = io::read_pod<std::int64_t>(in, "vocab");
    model.num_labels = io::read_pod<std::int64_t>(in, "labels");
    model.dim = io::read_pod<std::int32_t>(in, "dim");
    if (model.vocab_size < 1 || model.num_labels < 1 || model.dim < 1) {
        throw Error("model", "corrupt encoder model header in " + path.string());
    }
    EncoderConfig& c = model.config;
    c.dim = io::read_pod<std::int32_t>(in, "config.dim");
    c.batch_size = io::read_pod<std::int32_t>(in, "config.batch");
    c.label_pool = io::read_pod<std::int32_t>(in, "config.pool");
    c.hard_negatives = io::read_pod<std::int32_t>(in, "config.hard");
    c.epochs = io::read_pod<std::int32_t>(in, "config.epochs");
    c.pretrain_epochs = io::read_pod<std::int32_t>(in, "config.pretrain");
    c.lr_embedding = io::read_pod<double>(in, "config.lr_embedding");
    c.lr_pooler = io::read_pod<double>(in, "config.lr_pooler");
    c.lr_head = io::read_pod<double>(in, "config.lr_head");
    c.ensemble_weight = io::read_pod<double>(in, "config.ensemble_weight");
    c.pseudo_len = io::read_pod<std::int32_t>(in, "config.pseudo_len");
    c.train_head_in_pair = io::read_pod<std::uint8_t>(in, "config.train_head") != 0;
    c.seed = io::read_pod<std::uint64_t>(in, "config.seed");
    model.embedding.resize(model.dim, model.vocab_size);
    model.doc_w.resize(model.dim, model.dim);
    model.doc_b.resize(model.dim);
    model.label_w.resize(model.dim, model.dim);
    model.label_b.resize(model.dim);
    model.head.resize(model.num_labels, model.dim);
    read_matrix(in, model.embedding, "embedding");
    read_matrix(in, model.doc_w, "doc_w");
    read_vector(in, model.doc_b, "doc_b");
    read_matrix(in, model.label_w, "label_w");
    read_vector(in, model.label_b, "label_b");
    read_matrix(in, model.head, "head");
    return model;
}

}  // namespace xtail
