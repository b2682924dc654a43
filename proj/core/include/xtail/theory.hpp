#pragma once

#include <cstdint>
#include <vector>

#include "xtail/projection.hpp"
#include "xtail/pseudo.hpp"
#include "xtail/sparse_vector.hpp"
#include "xtail/svm.hpp"

namespace xtail {

// One retrieval comparison: a unit document vector, the full classifier rows
// of a positive and a negative label, and their keyword-masked versions.
struct MarginInstance {
    SparseVector phi;
    SparseVector w_pos;
    SparseVector w_neg;
    SparseVector v_pos;
    SparseVector v_neg;
    double epsilon = 0.0;  // <phi, w_pos> - <phi, w_neg>
    double delta = 0.0;    // worst keyword approximation gap in play
};

// As above but one positive against several negatives, for union bounds.
struct UnionInstance {
    SparseVector phi;
    SparseVector v_pos;
    std::vector<SparseVector> v_negs;
    double epsilon = 0.0;  // smallest margin across the negatives
    double delta = 0.0;
};

struct Lemma1Report {
    std::int64_t checked = 0;
    std::int64_t violations = 0;
    double max_gap = 0.0;  // largest <phi, w> - <phi, v> observed
};

// Masking a nonnegative row to its keyword support can only lower the score,
// and never by more than the label's recorded gap. Verifies both directions
// for every (document, label) pair.
Lemma1Report check_lemma1(const SparseLinearModel& normalized_model,
                          const std::vector<PseudoLabel>& pseudo_labels,
                          const std::vector<SparseVector>& documents,
                          double tolerance = 1e-12);

struct TrialReport {
    std::int32_t dim = 0;
    std::int64_t trials = 0;
    std::int64_t violations = 0;
    double empirical = 0.0;  // violations / trials
    double bound = 0.0;      // analytic tail bound for the event
    double slack = 0.0;      // 3 * sqrt(min(bound,1) * (1 - min(bound,1)) / trials)
    bool vacuous = false;    // bound >= 1 certifies nothing
    bool within_bound = true;
};

// Inner product distortion: counts trials where |<Ea, Eb> - <a, b>| reaches
// (gamma / 2) * (|a|^2 + |b|^2). Tail bound: 4 exp(-gamma^2 dim / 8).
// Every trial draws its projection from its own derived seed, so sharding
// the trial range over threads cannot change any count.
TrialReport jl_concentration_trial(const SparseVector& a, const SparseVector& b,
                                   double gamma, std::int32_t dim, std::int64_t trials,
                                   std::uint64_t seed, std::int32_t threads = 1);

// Margin flip for one pair: counts trials where <E phi, E v_pos - E v_neg>
// drops to zero or below. Bound: 4 exp(-(epsilon - delta)^2 dim / 50), with
// the gap clamped at zero so epsilon <= delta yields the vacuous value 4.
TrialReport lemma2_trial(const MarginInstance& instance, std::int32_t dim,
                         std::int64_t trials, std::uint64_t seed,
                         std::int32_t threads = 1);

double lemma2_bound(double epsilon, double delta, std::int32_t dim);

// Union over negatives: a trial fails when any margin flips. Bound:
// 4 * num_negatives * exp(-(epsilon - delta)^2 dim / 50). With one negative
// this reproduces lemma2_trial draw for draw.
TrialReport theorem1_trial(const UnionInstance& instance, std::int32_t dim,
                           std::int64_t trials, std::uint64_t seed,
                           std::int32_t threads = 1);

double theorem1_bound(double epsilon, double delta, std::int32_t dim,
                      std::int64_t num_negatives);

// Gap needed before the union bound can certify anything at this dimension:
// 10 * sqrt(ln(num_negatives) / dim). Substituting exactly that gap into the
// bound gives 4 / num_negatives, which stays above 1 until num_negatives > 4.
double union_gap_requirement(std::int64_t num_negatives, std::int32_t dim);

// Instances harvested from trained artifacts: for each document with at
// least one positive ranked above `negatives` other labels, the top positive
// against the labels ranked directly under it. delta is the corpus-wide
// worst keyword gap. Documents yielding epsilon <= 0 are skipped.
std::vector<UnionInstance> harvest_instances(const SparseLinearModel& normalized_model,
                                             const std::vector<PseudoLabel>& pseudo_labels,
                                             const std::vector<Document>& documents,
                                             const std::vector<SparseVector>& features,
                                             std::int64_t negatives, std::int64_t limit);

}  // namespace xtail
