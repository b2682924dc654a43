#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xtail/corpus.hpp"
#include "xtail/sparse_vector.hpp"

namespace xtail {

struct SvmHyper {
    std::int32_t epochs = 10;
    double learning_rate = 0.1;
    double l2 = 0.0;  // 0 disables the shrinkage term
    std::int32_t batch_size = 16;
    std::uint64_t seed = 1;
};

// One weight row per label over the tf-idf vocabulary, row-major.
class SparseLinearModel {
public:
    SparseLinearModel() = default;
    SparseLinearModel(std::int64_t num_labels, std::int64_t vocab_size)
        : m_num_labels(num_labels),
          m_vocab_size(vocab_size),
          m_weights(static_cast<std::size_t>(num_labels * vocab_size), 0.0) {}

    std::int64_t num_labels() const noexcept { return m_num_labels; }
    std::int64_t vocab_size() const noexcept { return m_vocab_size; }
    bool trained() const noexcept { return m_trained; }
    void set_trained(bool value) noexcept { m_trained = value; }

    SvmHyper hyper;

    std::span<double> row(LabelId label) {
        return {m_weights.data() + static_cast<std::size_t>(label) *
                                       static_cast<std::size_t>(m_vocab_size),
                static_cast<std::size_t>(m_vocab_size)};
    }
    std::span<const double> row(LabelId label) const {
        return {m_weights.data() + static_cast<std::size_t>(label) *
                                       static_cast<std::size_t>(m_vocab_size),
                static_cast<std::size_t>(m_vocab_size)};
    }

    double score(const SparseVector& features, LabelId label) const {
        const auto w = row(label);
        double acc = 0.0;
        for (const SparseEntry& e : features.entries()) {
            acc += e.weight * w[static_cast<std::size_t>(e.index)];
        }
        return acc;
    }

    std::vector<double> score_all(const SparseVector& features) const;

    std::vector<double>& raw_weights() noexcept { return m_weights; }
    const std::vector<double>& raw_weights() const noexcept { return m_weights; }

private:
    std::int64_t m_num_labels = 0;
    std::int64_t m_vocab_size = 0;
    bool m_trained = false;
    std::vector<double> m_weights;
};

struct TrainStats {
    std::vector<double> epoch_loss;  // mean hinge per (document, label) pair
};

// One-vs-all linear classifiers trained with subgradient steps on the hinge
// loss max(0, 1 - sign(y) * <w_l, x>), one step per (example, label) pair,
// examples shuffled every epoch. Optional L2 shrinkage runs through per-row
// scale factors so updates stay sparse.
SparseLinearModel train_svm(const Dataset& dataset, const std::vector<SparseVector>& features,
                            std::int64_t vocab_size, const SvmHyper& hyper,
                            TrainStats* stats = nullptr);

// Mean hinge loss over all (document, label) pairs.
double hinge_loss(const SparseLinearModel& model, const std::vector<SparseVector>& features,
                  const std::vector<Document>& docs);

// Top-k label ids by score, ties broken toward the smaller id.
std::vector<LabelId> rank_labels(std::span<const double> scores, std::int64_t k);

// Shifts every entry by the global minimum, then divides all rows by the
// largest shifted row norm: entries become nonnegative, norms at most one,
// and per-document label rankings stay unchanged. Refuses all-constant models.
SparseLinearModel normalize_for_theory(const SparseLinearModel& model);

// Highest-scoring labels outside the positive set, in score order.
std::vector<LabelId> mine_hard_negatives(const SparseLinearModel& model,
                                         const SparseVector& features,
                                         const std::vector<LabelId>& positives,
                                         std::int64_t count);

void save_sparse_model(const std::filesystem::path& path, const SparseLinearModel& model);
SparseLinearModel load_sparse_model(const std::filesystem::path& path);

// Human-readable dump: per label, the strongest vocabulary weights.
void export_top_weights(const std::filesystem::path& path, const SparseLinearModel& model,
                        const std::vector<std::string>& label_names,
                        const Vocabulary& vocabulary, std::int64_t top_k = 100);

}  // namespace xtail
