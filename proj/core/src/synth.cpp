#include "xtail/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "xtail/random.hpp"

namespace xtail {

namespace {

std::string token_name(std::int64_t id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%05lld", static_cast<long long>(id));
    return buf;
}

// Sequential-search inversion; lambda is small here (a few labels per doc).
std::int64_t poisson(Rng& rng, double lambda) {
    if (lambda <= 0.0) {
        return 0;
    }
    const double u = rng.next_unit();
    double term = std::exp(-lambda);
    double cdf = term;
    std::int64_t k = 0;
    while (u > cdf && k < 200) {
        ++k;
        term *= lambda / static_cast<double>(k);
        cdf += term;
    }
    return k;
}

class Categorical {
public:
    explicit Categorical(const std::vector<double>& weights) : m_cdf(weights.size()) {
        double total = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            total += weights[i];
            m_cdf[i] = total;
        }
    }

    std::size_t draw(Rng& rng) const {
        const double u = rng.next_unit() * m_cdf.back();
        const auto it = std::lower_bound(m_cdf.begin(), m_cdf.end(), u);
        return static_cast<std::size_t>(it - m_cdf.begin());
    }

private:
    std::vector<double> m_cdf;
};

}  // namespace

RawDataset synth_powerlaw(const SynthParams& params) {
    if (params.num_labels < 1 || params.train_docs < 1 || params.test_docs < 0) {
        throw Error("config", "synthetic corpus needs at least one label and train doc");
    }
    if (params.vocab_size < params.num_labels) {
        throw Error("config", "vocab_size must be at least num_labels");
    }
    if (params.zipf_exponent <= 0.0 || params.labels_per_doc < 1.0) {
        throw Error("config", "zipf exponent must be positive, labels_per_doc at least 1");
    }

    const std::int64_t L = params.num_labels;
    const std::int64_t V = params.vocab_size;
    const std::int64_t sig_per_label = std::max<std::int64_t>(1, V / (2 * L));

    std::vector<double> popularity(static_cast<std::size_t>(L));
    for (std::int64_t l = 0; l < L; ++l) {
        popularity[static_cast<std::size_t>(l)] =
            std::pow(static_cast<double>(l + 1), -params.zipf_exponent);
    }
    const Categorical label_dist(popularity);

    RawDataset raw;
    raw.label_names.reserve(static_cast<std::size_t>(L));
    for (std::int64_t l = 0; l < L; ++l) {
        std::string name;
        for (std::int64_t s = 0; s < sig_per_label; ++s) {
            if (s > 0) {
                name += ' ';
            }
            name += token_name(l * sig_per_label + s);
        }
        raw.label_names.push_back(std::move(name));
    }

    Rng rng(derive_seed(params.seed, 0xD0C5));

    auto make_doc = [&](const std::string& id) {
        RawDocument doc;
        doc.id = id;

        const std::int64_t want =
            std::min<std::int64_t>(L, 1 + poisson(rng, params.labels_per_doc - 1.0));
        std::vector<std::int64_t> labels;
        std::unordered_set<std::int64_t> seen;
        while (static_cast<std::int64_t>(labels.size()) < want) {
            const auto l = static_cast<std::int64_t>(label_dist.draw(rng));
            if (seen.insert(l).second) {
                labels.push_back(l);
            }
        }
        std::sort(labels.begin(), labels.end());

        std::vector<std::int64_t> tokens;
        for (const std::int64_t l : labels) {
            for (std::int64_t s = 0; s < sig_per_label; ++s) {
                const std::int64_t tok = l * sig_per_label + s;
                tokens.push_back(tok);
                if (rng.next_unit() < 0.35) {
                    tokens.push_back(tok);
                }
            }
        }
        const std::int64_t background = 12 + static_cast<std::int64_t>(rng.next_below(8));
        for (std::int64_t b = 0; b < background; ++b) {
            tokens.push_back(static_cast<std::int64_t>(rng.next_below(
                static_cast<std::uint64_t>(V))));
        }
        rng.shuffle(tokens);

        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) {
                doc.text += ' ';
            }
            doc.text += token_name(tokens[i]);
        }
        for (const std::int64_t l : labels) {
            doc.labels.push_back(raw.label_names[static_cast<std::size_t>(l)]);
        }
        return doc;
    };

    char id[24];
    raw.train.reserve(static_cast<std::size_t>(params.train_docs));
    for (std::int64_t i = 0; i < params.train_docs; ++i) {
        std::snprintf(id, sizeof(id), "tr%06lld", static_cast<long long>(i));
        raw.train.push_back(make_doc(id));
    }
    raw.test.reserve(static_cast<std::size_t>(params.test_docs));
    for (std::int64_t i = 0; i < params.test_docs; ++i) {
        std::snprintf(id, sizeof(id), "te%06lld", static_cast<long long>(i));
        raw.test.push_back(make_doc(id));
    }
    return raw;
}

}  // namespace xtail
