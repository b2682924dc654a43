#include "xtail/projection.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "xtail/random.hpp"

namespace xtail {
namespace {

TEST(Projection, ColumnDependsOnlyOnSeedAndColumnIndex) {
    const std::uint64_t seed = 99;
    const Eigen::MatrixXd full = sample_projection(16, 10, seed);
    const std::vector<TokenId> one = {7};
    const Eigen::MatrixXd single = project_columns(16, one, seed);
    ASSERT_EQ(single.rows(), 16);
    ASSERT_EQ(single.cols(), 1);
    // Sampling column 7 alone must agree bitwise with sampling all ten.
    EXPECT_TRUE((single.col(0).array() == full.col(7).array()).all());

    const std::vector<TokenId> shuffled = {9, 0, 4};
    const Eigen::MatrixXd picked = project_columns(16, shuffled, seed);
    EXPECT_TRUE((picked.col(0).array() == full.col(9).array()).all());
    EXPECT_TRUE((picked.col(1).array() == full.col(0).array()).all());
    EXPECT_TRUE((picked.col(2).array() == full.col(4).array()).all());
}

TEST(Projection, DuplicateColumnRequestsRepeatTheColumn) {
    const std::vector<TokenId> cols = {3, 3};
    const Eigen::MatrixXd m = project_columns(8, cols, 5);
    EXPECT_TRUE((m.col(0).array() == m.col(1).array()).all());
}

TEST(Projection, EntriesAreSequentialDrawsFromTheColumnSeed) {
    // Rows of a column are consecutive Gaussian draws scaled by 1/sqrt(dim).
    // A 32-row matrix therefore shares its raw draw sequence with the first
    // 32 rows of a 64-row matrix built from the same seed.
    const std::uint64_t seed = 1234;
    for (const std::int32_t dim : {32, 64}) {
        const Eigen::MatrixXd m = sample_projection(dim, 3, seed);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
        for (Eigen::Index j = 0; j < 3; ++j) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
            for (Eigen::Index r = 0; r < dim; ++r) {
                EXPECT_DOUBLE_EQ(m(r, j), rng.next_gaussian() * scale)
                    << "dim " << dim << " entry (" << r << ", " << j << ")";
            }
        }
    }
}

TEST(Projection, EntryMomentsMatchTheScale) {
    const std::int32_t dim = 256;
    const Eigen::MatrixXd m = sample_projection(dim, 200, 2024);
    const double n = static_cast<double>(m.size());
    const double mean = m.sum() / n;
    const double var = (m.array() - mean).square().sum() / n;
    EXPECT_NEAR(mean, 0.0, 1.5e-3);
    EXPECT_NEAR(var, 1.0 / static_cast<double>(dim), 2e-4);
}

TEST(Projection, SeedChangesEveryColumn) {
    const Eigen::MatrixXd a = sample_projection(8, 4, 1);
    const Eigen::MatrixXd b = sample_projection(8, 4, 2);
    for (Eigen::Index j = 0; j < 4; ++j) {
        EXPECT_FALSE((a.col(j).array() == b.col(j).array()).all()) << "column " << j;
    }
}

TEST(Projection, RejectsBadDimensionsAndNegativeColumns) {
    EXPECT_THROW(sample_projection(0, 4, 1), Error);
    EXPECT_THROW(sample_projection(4, -1, 1), Error);
    const std::vector<TokenId> bad = {-1};
    EXPECT_THROW(project_columns(4, bad, 1), Error);
}

}  // namespace
}  // namespace xtail
