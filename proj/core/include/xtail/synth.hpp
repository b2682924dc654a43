#pragma once

#include <cstdint>

#include "xtail/corpus.hpp"

namespace xtail {

// Synthetic corpus with a power-law label distribution: label popularity
// follows rank^(-zipf_exponent), every label owns a few signature tokens that
// appear in all of its positive documents, and uniform background tokens both
// add noise and keep rare signatures above the df floor.
struct SynthParams {
    std::int64_t num_labels = 500;
    std::int64_t train_docs = 5000;
    std::int64_t test_docs = 1000;
    std::int64_t vocab_size = 2000;
    double zipf_exponent = 1.2;
    double labels_per_doc = 3.0;  // mean, at least one per document
    std::uint64_t seed = 42;
};

// Label names are the label's own signature tokens joined by spaces, so label
// text stays inside the learned vocabulary.
RawDataset synth_powerlaw(const SynthParams& params);

}  // namespace xtail
