#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "xtail/common.hpp"

namespace xtail {

struct SparseEntry {
    TokenId index;
    double weight;

    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

// Feature vector stored as (index, weight) pairs, strictly ascending by
// index, with no explicit zeros. All constructors normalize to that form.
class SparseVector {
public:
    SparseVector() = default;

    static SparseVector from_pairs(std::vector<SparseEntry> pairs) {
        std::sort(pairs.begin(), pairs.end(),
                  [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
        SparseVector v;
        for (const SparseEntry& e : pairs) {
            if (!v.m_entries.empty() && v.m_entries.back().index == e.index) {
                v.m_entries.back().weight += e.weight;
            } else {
                v.m_entries.push_back(e);
            }
        }
        std::erase_if(v.m_entries, [](const SparseEntry& e) { return e.weight == 0.0; });
        return v;
    }

    const std::vector<SparseEntry>& entries() const noexcept { return m_entries; }
    std::size_t nnz() const noexcept { return m_entries.size(); }
    bool empty() const noexcept { return m_entries.empty(); }

    double dot(const SparseVector& other) const {
        double acc = 0.0;
        auto a = m_entries.begin();
        auto b = other.m_entries.begin();
        while (a != m_entries.end() && b != other.m_entries.end()) {
            if (a->index < b->index) {
                ++a;
            } else if (b->index < a->index) {
                ++b;
            } else {
                acc += a->weight * b->weight;
                ++a;
                ++b;
            }
        }
        return acc;
    }

    double squared_norm() const {
        double acc = 0.0;
        for (const SparseEntry& e : m_entries) {
            acc += e.weight * e.weight;
        }
        return acc;
    }

    double norm() const { return std::sqrt(squared_norm()); }

    void scale(double factor) {
        for (SparseEntry& e : m_entries) {
            e.weight *= factor;
        }
    }

    // L2-normalizes in place; empty vectors stay empty.
    SparseVector& normalize() {
        const double n = norm();
        if (n > 0.0) {
            scale(1.0 / n);
        }
        return *this;
    }

    friend bool operator==(const SparseVector&, const SparseVector&) = default;

private:
    std::vector<SparseEntry> m_entries;
};

}  // namespace xtail
