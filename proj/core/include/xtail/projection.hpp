#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "xtail/common.hpp"

namespace xtail {

// Gaussian projection matrix with entries drawn at standard deviation
// 1/sqrt(dim), sampled column by column from seeds derived per column index.
// Column j therefore depends only on (seed, j): sparse consumers can draw
// just the columns a support touches and still agree bit-for-bit with the
// full matrix, and Monte Carlo runs can be sharded without changing draws.
Eigen::MatrixXd sample_projection(std::int32_t dim, std::int64_t columns,
                                  std::uint64_t seed);

// The selected columns of sample_projection(dim, *, seed), in the given
// order. Column indices may be any nonnegative ids.
Eigen::MatrixXd project_columns(std::int32_t dim, std::span<const TokenId> columns,
                                std::uint64_t seed);

}  // namespace xtail
