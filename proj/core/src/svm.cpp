#include "xtail/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "binary_io.hpp"
#include "xtail/random.hpp"

namespace xtail {

std::vector<double> SparseLinearModel::score_all(const SparseVector& features) const {
    std::vector<double> scores(static_cast<std::size_t>(m_num_labels), 0.0);
    for (std::int64_t l = 0; l < m_num_labels; ++l) {
        scores[static_cast<std::size_t>(l)] = score(features, static_cast<LabelId>(l));
    }
    return scores;
}

SparseLinearModel train_svm(const Dataset& dataset, const std::vector<SparseVector>& features,
                            std::int64_t vocab_size, const SvmHyper& hyper,
                            TrainStats* stats) {
    const std::size_t n = features.size();
    if (n == 0 || dataset.train.empty()) {
        throw Error("data", "no documents");
    }
    if (n != dataset.train.size()) {
        throw Error("internal", "feature/document count mismatch");
    }
    const std::int64_t num_labels = dataset.num_labels();
    if (num_labels == 0) {
        throw Error("data", "label catalog is empty");
    }
    if (hyper.epochs < 1 || hyper.batch_size < 1 || hyper.learning_rate <= 0.0 ||
        hyper.l2 < 0.0) {
        throw Error("config", "invalid training hyperparameters");
    }
    if (hyper.learning_rate * hyper.l2 >= 1.0) {
        throw Error("config", "learning_rate * l2 must be below 1");
    }

    SparseLinearModel model(num_labels, vocab_size);
    model.hyper = hyper;

    const double eta = hyper.learning_rate;
    const double shrink = 1.0 - eta * hyper.l2;

    // Shrinkage is tracked per row as a scalar so the additive updates stay
    // proportional to the sparse feature support.
    std::vector<double> alpha(static_cast<std::size_t>(num_labels), 1.0);
    std::vector<std::uint8_t> is_positive(static_cast<std::size_t>(num_labels), 0);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    Rng rng(hyper.seed);
    for (std::int32_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (const std::size_t doc : order) {
            const SparseVector& phi = features[doc];
            for (const LabelId l : dataset.train[doc].labels) {
                is_positive[static_cast<std::size_t>(l)] = 1;
            }
            for (std::int64_t l = 0; l < num_labels; ++l) {
                auto row = model.row(static_cast<LabelId>(l));
                double dot = 0.0;
                for (const SparseEntry& e : phi.entries()) {
                    dot += e.weight * row[static_cast<std::size_t>(e.index)];
                }
                double& a = alpha[static_cast<std::size_t>(l)];
                const double sign = is_positive[static_cast<std::size_t>(l)] ? 1.0 : -1.0;
                const double margin = 1.0 - sign * a * dot;
                if (hyper.l2 > 0.0) {
                    a *= shrink;
                }
                if (margin > 0.0) {
                    loss_sum += margin;
                    const double step = eta * sign / a;
                    for (const SparseEntry& e : phi.entries()) {
                        row[static_cast<std::size_t>(e.index)] += step * e.weight;
                    }
                }
            }
            for (const LabelId l : dataset.train[doc].labels) {
                is_positive[static_cast<std::size_t>(l)] = 0;
            }
        }

        // Fold the scale factors back in each epoch so they cannot underflow.
        if (hyper.l2 > 0.0) {
            for (std::int64_t l = 0; l < num_labels; ++l) {
                auto row = model.row(static_cast<LabelId>(l));
                const double a = alpha[static_cast<std::size_t>(l)];
                for (double& w : row) {
                    w *= a;
                }
                alpha[static_cast<std::size_t>(l)] = 1.0;
            }
        }

        const double epoch_loss =
            loss_sum / (static_cast<double>(n) * static_cast<double>(num_labels));
        if (!std::isfinite(epoch_loss)) {
            throw Error("train", "training diverged");
        }
        if (stats != nullptr) {
            stats->epoch_loss.push_back(epoch_loss);
        }
    }

    model.set_trained(true);
    return model;
}

double hinge_loss(const SparseLinearModel& model, const std::vector<SparseVector>& features,
                  const std::vector<Document>& docs) {
    if (features.size() != docs.size()) {
        throw Error("internal", "feature/document count mismatch");
    }
    if (features.empty()) {
        throw Error("data", "no documents");
    }
    const std::int64_t num_labels = model.num_labels();
    std::vector<std::uint8_t> is_positive(static_cast<std::size_t>(num_labels), 0);
    double loss_sum = 0.0;
    for (std::size_t doc = 0; doc < docs.size(); ++doc) {
        for (const LabelId l : docs[doc].labels) {
            is_positive[static_cast<std::size_t>(l)] = 1;
        }
        for (std::int64_t l = 0; l < num_labels; ++l) {
            const double s = model.score(features[doc], static_cast<LabelId>(l));
            const double sign = is_positive[static_cast<std::size_t>(l)] ? 1.0 : -1.0;
            loss_sum += std::max(0.0, 1.0 - sign * s);
        }
        for (const LabelId l : docs[doc].labels) {
            is_positive[static_cast<std::size_t>(l)] = 0;
        }
    }
    return loss_sum / (static_cast<double>(docs.size()) * static_cast<double>(num_labels));
}

std::vector<LabelId> rank_labels(std::span<const double> scores, std::int64_t k) {
    const auto num = static_cast<std::int64_t>(scores.size());
    const std::int64_t keep = std::clamp<std::int64_t>(k, 0, num);
    std::vector<LabelId> ids(static_cast<std::size_t>(num));
    std::iota(ids.begin(), ids.end(), LabelId{0});
    const auto better = [&scores](LabelId a, LabelId b) {
        const double sa = scores[static_cast<std::size_t>(a)];
        const double sb = scores[static_cast<std::size_t>(b)];
        return sa != sb ? sa > sb : a < b;
    };
    std::partial_sort(ids.begin(), ids.begin() + keep, ids.end(), better);
    ids.resize(static_cast<std::size_t>(keep));
    return ids;
}

SparseLinearModel normalize_for_theory(const SparseLinearModel& model) {
    SparseLinearModel out = model;
    auto& w = out.raw_weights();
    if (w.empty()) {
        throw Error("model", "degenerate model");
    }
    const double min_entry = *std::min_element(w.begin(), w.end());
    for (double& x : w) {
        x -= min_entry;
    }
    double max_norm_sq = 0.0;
    for (std::int64_t l = 0; l < out.num_labels(); ++l) {
        double norm_sq = 0.0;
        for (const double x : out.row(static_cast<LabelId>(l))) {
            norm_sq += x * x;
        }
        max_norm_sq = std::max(max_norm_sq, norm_sq);
    }
    if (max_norm_sq == 0.0) {
        throw Error("model", "degenerate model");
    }
    const double inv = 1.0 / std::sqrt(max_norm_sq);
    for (double& x : w) {
        x *= inv;
    }
    return out;
}

std::vector<LabelId> mine_hard_negatives(const SparseLinearModel& model,
                                         const SparseVector& features,
                                         const std::vector<LabelId>& positives,
                                         std::int64_t count) {
    const std::vector<double> scores = model.score_all(features);
    const std::vector<LabelId> ranked = rank_labels(scores, model.num_labels());
    const std::unordered_set<LabelId> positive_set(positives.begin(), positives.end());
    std::vector<LabelId> negatives;
    negatives.reserve(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
    for (const LabelId l : ranked) {
        if (static_cast<std::int64_t>(negatives.size()) >= count) {
            break;
        }
        if (!positive_set.contains(l)) {
            negatives.push_back(l);
        }
    }
    return negatives;
}

namespace {
constexpr std::uint32_t kSparseMagic = 0x4D535458u;  // "XTSM"
constexpr std::uint32_t kSparseVersion = 1;
}  // namespace

void save_sparse_model(const std::filesystem::path& path, const SparseLinearModel& model) {
    auto out = io::open_output(path);
    io::write_pod(out, kSparseMagic);
    io::write_pod(out, kSparseVersion);
    io::write_pod(out, model.num_labels());
    io::write_pod(out, model.vocab_size());
    io::write_pod(out, model.hyper.epochs);
    io::write_pod(out, model.hyper.batch_size);
    io::write_pod(out, model.hyper.learning_rate);
    io::write_pod(out, model.hyper.l2);
    io::write_pod(out, model.hyper.seed);
    io::write_pod(out, static_cast<std::uint8_t>(model.trained() ? 1 : 0));
    io::write_f64_span(out, model.raw_weights());
    if (!out) {
        throw Error("io", "failed writing " + path.string());
    }
}

SparseLinearModel load_sparse_model(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    if (io::read_pod<std::uint32_t>(in, "magic") != kSparseMagic) {
        throw Error("model", "not a sparse model file: " + path.string());
    }
    if (io::read_pod<std::uint32_t>(in, "version") != kSparseVersion) {
        throw Error("model", "unsupported sparse model version in " + path.string());
    }
    const auto num_labels = io::read_pod<std::int64_t>(in, "labels");
    const auto vocab_size = io::read_pod<std::int64_t>(in, "vocab");
    if (num_labels < 0 || vocab_size < 0) {
        throw Error("model", "corrupt sparse model header in " + path.string());
    }
    SparseLinearModel model(num_labels, vocab_size);
    model.hyper.epochs = io::read_pod<std::int32_t>(in, "epochs");
    model.hyper.batch_size = io::read_pod<std::int32_t>(in, "batch");
    model.hyper.learning_rate = io::read_pod<double>(in, "learning_rate");
    model.hyper.l2 = io::read_pod<double>(in, "l2");
    model.hyper.seed = io::read_pod<std::uint64_t>(in, "seed");
    model.set_trained(io::read_pod<std::uint8_t>(in, "trained") != 0);
    io::read_f64_span(in, model.raw_weights(), "weights");
    return model;
}

void export_top_weights(const std::filesystem::path& path, const SparseLinearModel& model,
                        const std::vector<std::string>& label_names,
                        const Vocabulary& vocabulary, std::int64_t top_k) {
    auto out = io::open_output(path);
    std::vector<TokenId> ids(static_cast<std::size_t>(model.vocab_size()));
    for (std::int64_t l = 0; l < model.num_labels(); ++l) {
        const auto row = model.row(static_cast<LabelId>(l));
        std::iota(ids.begin(), ids.end(), TokenId{0});
        const auto keep = static_cast<std::ptrdiff_t>(
            std::min<std::int64_t>(top_k, model.vocab_size()));
        std::partial_sort(ids.begin(), ids.begin() + keep, ids.end(),
                          [&row](TokenId a, TokenId b) {
                              const double wa = row[static_cast<std::size_t>(a)];
                              const double wb = row[static_cast<std::size_t>(b)];
                              return wa != wb ? wa > wb : a < b;
                          });
        out << l << '\t'
            << (static_cast<std::size_t>(l) < label_names.size()
                    ? label_names[static_cast<std::size_t>(l)]
                    : std::string{})
            << '\t';
        bool first = true;
        for (std::ptrdiff_t i = 0; i < keep; ++i) {
            const double w = row[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])];
            if (w == 0.0) {
                continue;
            }
            if (!first) {
                out << ' ';
            }
            first = false;
            out << vocabulary.tokens[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])]
                << ':' << format_general(w, 9);
        }
        out << '\n';
    }
}

}  // namespace xtail
