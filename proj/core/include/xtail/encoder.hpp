#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "xtail/corpus.hpp"
#include "xtail/metrics.hpp"
#include "xtail/pseudo.hpp"
#include "xtail/random.hpp"
#include "xtail/svm.hpp"

namespace xtail {

struct EncoderConfig {
    std::int32_t dim = 64;
    std::int32_t batch_size = 32;
    std::int32_t label_pool = 100;     // sampled labels per batch
    std::int32_t hard_negatives = 10;  // per instance, mined from the sparse model
    std::int32_t epochs = 3;
    std::int32_t pretrain_epochs = 2;  // per-label head warmup before pair training
    double lr_embedding = 1e-2;        // token embedding table
    double lr_pooler = 1e-2;           // document and label pooling layers
    double lr_head = 1e-1;             // per-label output rows
    double ensemble_weight = 0.5;      // dense share of the final sparse+dense mix
    std::int32_t pseudo_len = 16;      // label tokens actually encoded
    bool train_head_in_pair = true;    // keep updating head rows in pair epochs
    std::uint64_t seed = 1;
};

enum class EncoderMode { Dense, Dual, Kde };

EncoderMode encoder_mode_from_string(const std::string& name);
std::string to_string(EncoderMode mode);

// Shared token embedding table, linear poolers for documents and label text,
// and one output row per label. The same structure serves all three modes;
// they differ only in which score path is trained.
struct EncoderModel {
    std::int64_t vocab_size = 0;
    std::int64_t num_labels = 0;
    std::int32_t dim = 0;
    EncoderConfig config;
    Eigen::MatrixXd embedding;  // dim x vocab_size
    Eigen::MatrixXd doc_w;      // dim x dim
    Eigen::VectorXd doc_b;      // dim
    Eigen::MatrixXd label_w;    // dim x dim
    Eigen::VectorXd label_b;    // dim
    Eigen::MatrixXd head;       // num_labels x dim
};

// Embedding and head start as Gaussian projections at scale 1/sqrt(dim);
// poolers start as the identity so an untrained encoder is a plain random
// projection of the tf-idf features.
EncoderModel init_encoder(std::int64_t vocab_size, std::int64_t num_labels,
                          const EncoderConfig& config);

Eigen::VectorXd encode_document(const EncoderModel& model, const SparseVector& features);

// Mean token embedding of the first config.pseudo_len pseudo label tokens,
// pooled. A label with no usable tokens is an error.
Eigen::VectorXd encode_label(const EncoderModel& model, const PseudoLabel& pseudo);

double f_dense(const EncoderModel& model, const Eigen::VectorXd& doc_vec, LabelId label);
double f_dual(const Eigen::VectorXd& doc_vec, const Eigen::VectorXd& label_vec);

double sigmoid(double logit);

// Mean of the two calibrated branch probabilities.
double f_kde(double dual_logit, double dense_logit);

// (1 - weight) * sigmoid(sparse_score) + weight * dense_probability.
double f_final(double sparse_score, double dense_probability, double weight);

// Sum over labels of the usual two-term cross entropy, probabilities clamped
// away from 0 and 1.
double bce_loss(std::span<const double> probabilities, std::span<const std::uint8_t> targets);

// d(loss)/d(logit) for one label: probability minus target.
double bce_logit_gradient(double probability, bool positive);

// Labels scored by one batch: every positive of the batch, then hard
// negatives in mining order, then uniform filler, deduplicated, until the
// pool size is reached (more if the positives alone exceed it).
std::vector<LabelId> sample_batch_labels(std::span<const std::size_t> batch,
                                         const std::vector<Document>& docs,
                                         const std::vector<std::vector<LabelId>>& hard_negatives,
                                         std::int64_t num_labels, std::int64_t pool_size,
                                         Rng& rng);

// Per-document epochs over all labels through the head path. Records the
// mean per-document loss of each epoch.
void train_dense(EncoderModel& model, const Dataset& dataset,
                 const std::vector<SparseVector>& features, std::int32_t epochs, Rng& rng,
                 TrainStats* stats = nullptr);

// Batched epochs over sampled label pools. Dual mode trains the two-tower
// score; Kde mode trains the averaged probability of both branches.
void train_pairs(EncoderModel& model, const Dataset& dataset,
                 const std::vector<SparseVector>& features,
                 const std::vector<PseudoLabel>& pseudo_labels,
                 const std::vector<std::vector<LabelId>>& hard_negatives, EncoderMode mode,
                 std::int32_t epochs, Rng& rng, TrainStats* stats = nullptr);

// Full recipe for a mode: fresh model, optional dense warmup, pair epochs.
// The sparse model supplies hard negatives and is only consulted for the
// Dual and Kde modes.
EncoderModel train_encoder(const Dataset& dataset, std::int64_t vocab_size,
                           const std::vector<SparseVector>& features,
                           const std::vector<PseudoLabel>& pseudo_labels,
                           const SparseLinearModel* sparse_model, EncoderMode mode,
                           const EncoderConfig& config, TrainStats* stats = nullptr);

enum class ScoreKind { Sparse, Dense, Dual, Kde, Final };

std::string to_string(ScoreKind kind);

// Ranked top-k predictions for the given documents. Dense/Dual emit logits,
// Kde and Final emit probabilities, Sparse emits raw margins. The sparse
// model is required for Sparse and Final scoring.
std::vector<RankedPrediction> predict(const EncoderModel* model,
                                      const std::vector<PseudoLabel>& pseudo_labels,
                                      const SparseLinearModel* sparse_model,
                                      const std::vector<Document>& docs,
                                      const std::vector<SparseVector>& features,
                                      ScoreKind kind, std::int64_t k);

struct GradCheckReport {
    double max_rel_err_logits = 0.0;
    double max_rel_err_doc_feature = 0.0;
    double max_rel_err_label_embedding = 0.0;
    double closed_form_max_abs_err = 0.0;
    bool pass = false;
    std::string failing_block;  // empty when everything is inside tolerance
};

// Central-difference audit of the head path on a small instance. Loss is the
// mean over instances of the summed label cross entropies. Also verifies
// that one full-batch gradient step on the head rows matches the update
// written as separate positive and negative accumulation terms.
GradCheckReport grad_check(const Eigen::MatrixXd& head,
                           const std::vector<Eigen::VectorXd>& doc_vectors,
                           const std::vector<std::vector<std::uint8_t>>& targets,
                           double fd_step, double learning_rate,
                           double fd_tolerance = 1e-4, double update_tolerance = 1e-8);

void save_encoder_model(const std::filesystem::path& path, const EncoderModel& model);
EncoderModel load_encoder_model(const std::filesystem::path& path);

}  // namespace xtail
