// Microbenchmarks for the hot paths: feature extraction, label scoring,
// batched label sampling, and the projection trials behind the sweeps.

#include <benchmark/benchmark.h>

#include <vector>

#include "xtail/corpus.hpp"
#include "xtail/encoder.hpp"
#include "xtail/random.hpp"
#include "xtail/svm.hpp"
#include "xtail/synth.hpp"
#include "xtail/theory.hpp"

namespace {

xtail::SynthParams small_corpus() {
    xtail::SynthParams p;
    p.num_labels = 100;
    p.train_docs = 500;
    p.test_docs = 100;
    p.vocab_size = 800;
    return p;
}

struct Fixture {
    xtail::LoadedDataset loaded;
    std::vector<xtail::SparseVector> features;
    xtail::SparseLinearModel model;

    Fixture() {
        loaded = xtail::build_dataset(xtail::synth_powerlaw(small_corpus()), {});
        features = xtail::compute_features(loaded.data.train, loaded.vocabulary);
        xtail::SvmHyper hyper;
        hyper.epochs = 2;
        model = xtail::train_svm(loaded.data, features,
                                 static_cast<std::int64_t>(loaded.vocabulary.size()),
                                 hyper);
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

void bm_tfidf(benchmark::State& state) {
    const Fixture& f = fixture();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            xtail::tfidf_transform(f.loaded.data.train[i], f.loaded.vocabulary));
        i = (i + 1) % f.loaded.data.train.size();
    }
}
BENCHMARK(bm_tfidf);

void bm_score_all(benchmark::State& state) {
    const Fixture& f = fixture();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(f.model.score_all(f.features[i]));
        i = (i + 1) % f.features.size();
    }
}
BENCHMARK(bm_score_all);

void bm_sample_batch_labels(benchmark::State& state) {
    const Fixture& f = fixture();
    const std::int64_t num_labels = f.loaded.data.num_labels();
    std::vector<std::vector<xtail::LabelId>> hard(f.loaded.data.train.size());
    std::vector<std::size_t> batch;
    for (std::size_t i = 0; i < 32 && i < f.loaded.data.train.size(); ++i)
        batch.push_back(i);
    xtail::Rng rng(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(xtail::sample_batch_labels(
            batch, f.loaded.data.train, hard, num_labels, 100, rng));
    }
}
BENCHMARK(bm_sample_batch_labels);

void bm_lemma2_trials(benchmark::State& state) {
    xtail::MarginInstance inst;
    inst.phi = xtail::SparseVector::from_pairs({{0, 0.7}, {1, 0.7}});
    inst.v_pos = inst.phi;
    inst.v_neg = xtail::SparseVector::from_pairs({{2, 1.0}});
    inst.epsilon = 1.0;
    const auto dim = static_cast<std::int32_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(xtail::lemma2_trial(inst, dim, 200, 7));
    }
}
BENCHMARK(bm_lemma2_trials)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
