#include "xtail/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_set>

#include "xtail/random.hpp"

namespace xtail {

namespace {

void append_support(std::vector<TokenId>& cols, const SparseVector& v) {
    for (const SparseEntry& e : v.entries()) {
        cols.push_back(e.index);
    }
}

std::vector<TokenId> sorted_union(std::vector<TokenId> cols) {
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return cols;
}

// Dense view of v restricted to the sorted column set.
Eigen::VectorXd restrict_to(const SparseVector& v, const std::vector<TokenId>& cols) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols.size()));
    std::size_t c = 0;
    for (const SparseEntry& e : v.entries()) {
        while (c < cols.size() && cols[c] < e.index) {
            ++c;
        }
        if (c < cols.size() && cols[c] == e.index) {
            out[static_cast<Eigen::Index>(c)] = e.weight;
        }
    }
    return out;
}

TrialReport finish_report(std::int32_t dim, std::int64_t trials, std::int64_t violations,
                          double bound) {
    TrialReport report;
    report.dim = dim;
    report.trials = trials;
    report.violations = violations;
    report.empirical = static_cast<double>(violations) / static_cast<double>(trials);
    report.bound = bound;
    const double capped = std::min(bound, 1.0);
    report.slack = 3.0 * std::sqrt(capped * (1.0 - capped) / static_cast<double>(trials));
    report.vacuous = bound >= 1.0;
    report.within_bound = report.vacuous || report.empirical <= bound + report.slack;
    return report;
}

void check_trial_params(std::int32_t dim, std::int64_t trials) {
    if (dim < 1) {
        throw Error("config", "projection dimension must be positive");
    }
    if (trials < 1) {
        throw Error("config", "trial count must be positive");
    }
}

// Runs violates(trial_seed) for every trial index and sums the hits. Each
// trial is seeded independently, so splitting the index range over threads
// is safe; per-shard counts are added in shard order.
template <typename Violates>
std::int64_t count_violations(std::int64_t trials, std::uint64_t seed,
                              std::int32_t threads, const Violates& violates) {
    if (threads < 1) {
        throw Error("config", "thread count must be positive");
    }
    const std::int64_t workers = std::min<std::int64_t>(threads, trials);
    if (workers == 1) {
        std::int64_t violations = 0;
        for (std::int64_t t = 0; t < trials; ++t) {
            if (violates(derive_seed(seed, t))) {
                ++violations;
            }
        }
        return violations;
    }
    std::vector<std::int64_t> partial(static_cast<std::size_t>(workers), 0);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::int64_t w = 0; w < workers; ++w) {
        const std::int64_t begin = trials * w / workers;
        const std::int64_t end = trials * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
            std::int64_t local = 0;
            for (std::int64_t t = begin; t < end; ++t) {
                if (violates(derive_seed(seed, t))) {
                    ++local;
                }
            }
            partial[static_cast<std::size_t>(w)] = local;
        });
    }
    for (std::thread& th : pool) {
        th.join();
    }
    std::int64_t violations = 0;
    for (std::int64_t v : partial) {
        violations += v;
    }
    return violations;
}

}  // namespace

Lemma1Report check_lemma1(const SparseLinearModel& normalized_model,
                          const std::vector<PseudoLabel>& pseudo_labels,
                          const std::vector<SparseVector>& documents,
                          double tolerance) {
    if (documents.empty()) {
        throw Error("data", "no documents");
    }
    const DeltaReport deltas =
        empirical_delta(normalized_model, pseudo_labels, documents);
    Lemma1Report report;
    for (std::size_t p = 0; p < pseudo_labels.size(); ++p) {
        const SparseVector masked =
            keyword_embedding(normalized_model, pseudo_labels[p]);
        for (const SparseVector& phi : documents) {
            const double full = normalized_model.score(phi, pseudo_labels[p].label);
            const double kept = phi.dot(masked);
            const double gap = full - kept;
            ++report.checked;
            if (gap < -tolerance || gap > deltas.per_label[p] + tolerance) {
                ++report.violations;
            }
            report.max_gap = std::max(report.max_gap, gap);
        }
    }
    return report;
}

TrialReport jl_concentration_trial(const SparseVector& a, const SparseVector& b,
                                   double gamma, std::int32_t dim, std::int64_t trials,
                                   std::uint64_t seed, std::int32_t threads) {
    check_trial_params(dim, trials);
    if (gamma <= 0.0) {
        throw Error("config", "gamma must be positive");
    }
    std::vector<TokenId> cols;
    append_support(cols, a);
    append_support(cols, b);
    cols = sorted_union(std::move(cols));

    const Eigen::VectorXd ar = restrict_to(a, cols);
    const Eigen::VectorXd br = restrict_to(b, cols);
    const double exact = a.dot(b);
    const double threshold = 0.5 * gamma * (a.squared_norm() + b.squared_norm());

    const std::int64_t violations =
        count_violations(trials, seed, threads, [&](std::uint64_t trial_seed) {
            const Eigen::MatrixXd p = project_columns(dim, cols, trial_seed);
            const double projected = (p * ar).dot(p * br);
            return std::abs(projected - exact) >= threshold;
        });
    const double bound =
        4.0 * std::exp(-gamma * gamma * static_cast<double>(dim) / 8.0);
    return finish_report(dim, trials, violations, bound);
}

double lemma2_bound(double epsilon, double delta, std::int32_t dim) {
    const double gap = std::max(0.0, epsilon - delta);
    return 4.0 * std::exp(-gap * gap * static_cast<double>(dim) / 50.0);
}

TrialReport lemma2_trial(const MarginInstance& instance, std::int32_t dim,
                         std::int64_t trials, std::uint64_t seed,
                         std::int32_t threads) {
    check_trial_params(dim, trials);
    std::vector<TokenId> cols;
    append_support(cols, instance.phi);
    append_support(cols, instance.v_pos);
    append_support(cols, instance.v_neg);
    cols = sorted_union(std::move(cols));

    const Eigen::VectorXd phi = restrict_to(instance.phi, cols);
    const Eigen::VectorXd vp = restrict_to(instance.v_pos, cols);
    const Eigen::VectorXd vn = restrict_to(instance.v_neg, cols);

    const std::int64_t violations =
        count_violations(trials, seed, threads, [&](std::uint64_t trial_seed) {
            const Eigen::MatrixXd p = project_columns(dim, cols, trial_seed);
            const Eigen::VectorXd ephi = p * phi;
            return ephi.dot(p * vp) - ephi.dot(p * vn) <= 0.0;
        });
    return finish_report(dim, trials, violations,
                         lemma2_bound(instance.epsilon, instance.delta, dim));
}

double theorem1_bound(double epsilon, double delta, std::int32_t dim,
                      std::int64_t num_negatives) {
    if (num_negatives < 1) {
        throw Error("config", "union bound needs at least one negative");
    }
    return static_cast<double>(num_negatives) * lemma2_bound(epsilon, delta, dim);
}

TrialReport theorem1_trial(const UnionInstance& instance, std::int32_t dim,
                           std::int64_t trials, std::uint64_t seed,
                           std::int32_t threads) {
    check_trial_params(dim, trials);
    if (instance.v_negs.empty()) {
        throw Error("config", "union bound needs at least one negative");
    }
    std::vector<TokenId> cols;
    append_support(cols, instance.phi);
    append_support(cols, instance.v_pos);
    for (const SparseVector& v : instance.v_negs) {
        append_support(cols, v);
    }
    cols = sorted_union(std::move(cols));

    const Eigen::VectorXd phi = restrict_to(instance.phi, cols);
    const Eigen::VectorXd vp = restrict_to(instance.v_pos, cols);
    std::vector<Eigen::VectorXd> vns;
    vns.reserve(instance.v_negs.size());
    for (const SparseVector& v : instance.v_negs) {
        vns.push_back(restrict_to(v, cols));
    }

    const std::int64_t violations =
        count_violations(trials, seed, threads, [&](std::uint64_t trial_seed) {
            const Eigen::MatrixXd p = project_columns(dim, cols, trial_seed);
            const Eigen::VectorXd ephi = p * phi;
            const double pos = ephi.dot(p * vp);
            for (const Eigen::VectorXd& vn : vns) {
                if (pos - ephi.dot(p * vn) <= 0.0) {
                    return true;
                }
            }
            return false;
        });
    return finish_report(
        dim, trials, violations,
        theorem1_bound(instance.epsilon, instance.delta, dim,
                       static_cast<std::int64_t>(instance.v_negs.size())));
}

double union_gap_requirement(std::int64_t num_negatives, std::int32_t dim) {
    if (num_negatives < 1 || dim < 1) {
        throw Error("config", "union bound needs positive negatives and dimension");
    }
    return 10.0 * std::sqrt(std::log(static_cast<double>(num_negatives)) /
                            static_cast<double>(dim));
}

std::vector<UnionInstance> harvest_instances(const SparseLinearModel& normalized_model,
                                             const std::vector<PseudoLabel>& pseudo_labels,
                                             const std::vector<Document>& documents,
                                             const std::vector<SparseVector>& features,
                                             std::int64_t negatives, std::int64_t limit) {
    if (documents.size() != features.size()) {
        throw Error("internal", "feature/document count mismatch");
    }
    if (negatives < 1) {
        throw Error("config", "need at least one negative per instance");
    }
    const DeltaReport deltas =
        empirical_delta(normalized_model, pseudo_labels, features);

    std::vector<UnionInstance> out;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        if (static_cast<std::int64_t>(out.size()) >= limit) {
            break;
        }
        if (documents[i].labels.empty() || features[i].empty()) {
            continue;
        }
        const std::vector<double> scores = normalized_model.score_all(features[i]);
        const std::vector<LabelId> ranked =
            rank_labels(scores, normalized_model.num_labels());

        const std::unordered_set<LabelId> positives(documents[i].labels.begin(),
                                                    documents[i].labels.end());
        std::size_t pos_rank = ranked.size();
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            if (positives.contains(ranked[r])) {
                pos_rank = r;
                break;
            }
        }
        if (pos_rank == ranked.size()) {
            continue;
        }
        const LabelId pos_label = ranked[pos_rank];

        UnionInstance instance;
        instance.phi = features[i];
        instance.v_pos = keyword_embedding(
            normalized_model, pseudo_labels[static_cast<std::size_t>(pos_label)]);
        instance.delta = deltas.per_label[static_cast<std::size_t>(pos_label)];
        instance.epsilon = std::numeric_limits<double>::infinity();

        const double pos_score = scores[static_cast<std::size_t>(pos_label)];
        for (std::size_t r = pos_rank + 1;
             r < ranked.size() &&
             static_cast<std::int64_t>(instance.v_negs.size()) < negatives;
             ++r) {
            const LabelId neg = ranked[r];
            if (positives.contains(neg)) {
                continue;
            }
            const double margin = pos_score - scores[static_cast<std::size_t>(neg)];
            if (margin <= 0.0) {
                continue;
            }
            instance.v_negs.push_back(keyword_embedding(
                normalized_model, pseudo_labels[static_cast<std::size_t>(neg)]));
            instance.delta = std::max(
                instance.delta, deltas.per_label[static_cast<std::size_t>(neg)]);
            instance.epsilon = std::min(instance.epsilon, margin);
        }
        if (static_cast<std::int64_t>(instance.v_negs.size()) == negatives) {
            out.push_back(std::move(instance));
        }
    }
    return out;
}

}  // namespace xtail
