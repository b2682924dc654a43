#include "xtail/projection.hpp"

#include <cmath>

#include "xtail/random.hpp"

namespace xtail {

namespace {

void fill_column(Eigen::MatrixXd& matrix, Eigen::Index col, std::uint64_t column_seed,
                 double scale) {
    Rng rng(column_seed);
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        matrix(r, col) = rng.next_gaussian() * scale;
    }
}

}  // namespace

Eigen::MatrixXd sample_projection(std::int32_t dim, std::int64_t columns,
                                  std::uint64_t seed) {
    if (dim < 1 || columns < 0) {
        throw Error("config", "projection needs a positive dimension");
    }
    Eigen::MatrixXd matrix(dim, columns);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
        fill_column(matrix, j, derive_seed(seed, static_cast<std::uint64_t>(j)), scale);
    }
    return matrix;
}

Eigen::MatrixXd project_columns(std::int32_t dim, std::span<const TokenId> columns,
                                std::uint64_t seed) {
    if (dim < 1) {
        throw Error("config", "projection needs a positive dimension");
    }
    Eigen::MatrixXd matrix(dim, static_cast<Eigen::Index>(columns.size()));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
        const TokenId id = columns[static_cast<std::size_t>(j)];
        if (id < 0) {
            throw Error("internal", "negative column index in projection");
        }
        fill_column(matrix, j, derive_seed(seed, static_cast<std::uint64_t>(id)), scale);
    }
    return matrix;
}

}  // namespace xtail
