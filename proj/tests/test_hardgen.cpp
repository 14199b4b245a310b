#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "psketch/hardgen.hpp"
#include "support.hpp"

using namespace psketch;

namespace {

HardInstanceSpec hs(std::size_t n, std::size_t d, std::uint64_t seed = 0, bool uneven = false)
{
    HardInstanceSpec s;
    s.n = n;
    s.d = d;
    s.seed = seed;
    s.allow_uneven_blocks = uneven;
    return s;
}

double col_norm(const SparseMatrix& m, std::size_t j, double p)
{
    const auto v = m.col_values(j);
    return oracle::lp(std::vector<double>(v.begin(), v.end()), p);
}

} // namespace

TEST(Hard, RoleLayoutAt4096x16)
{
    const HardInstance h = generate_hard(hs(4096, 16, 1));
    EXPECT_EQ(h.blocks, 8u);
    std::map<ColumnKind, std::size_t> count;
    for (const auto& r : h.roles)
        ++count[r.kind];
    EXPECT_EQ(count[ColumnKind::D], 1u);
    EXPECT_EQ(count[ColumnKind::M], 4u);
    EXPECT_EQ(count[ColumnKind::S], 8u);
    EXPECT_EQ(count[ColumnKind::zero], 3u);
    EXPECT_EQ(h.matrix.col_nnz(0), 4096u);
    for (std::size_t j = 1; j <= 4; ++j) {
        EXPECT_EQ(h.matrix.col_nnz(j), 1024u);
        for (auto r : h.matrix.col_rows(j))
            EXPECT_EQ(r / 1024, j - 1);
    }
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(h.roles[5 + i].index, i);
        EXPECT_EQ(h.matrix.col_nnz(5 + i), std::size_t{2} << i);
    }
    for (std::size_t j = 13; j < 16; ++j)
        EXPECT_EQ(h.matrix.col_nnz(j), 0u);
}

TEST(Hard, ExhaustiveSpecScan)
{
    // Every valid (n, d) with n <= 2^16: S-blocks fit in n rows and the counts add up.
    std::size_t valid = 0;
    for (std::size_t d = 4; d <= 256; d += 4) {
        for (std::size_t n = 2 * d; n <= 65536; n *= 2) {
            for (bool uneven : {false, true}) {
                const auto s = hs(n, d, 0, uneven);
                if (!s.problems().empty()) {
                    EXPECT_FALSE(uneven) << n << "x" << d;
                    continue;
                }
                ++valid;
                std::size_t total = 0;
                for (std::size_t i = 0; i < s.block_count(); ++i) {
                    total += s.block_columns(i);
                    EXPECT_LE(s.block_columns(i) * (std::size_t{2} << i), n) << n << "x" << d;
                }
                EXPECT_EQ(total, d / 2);
                if (!uneven) {
                    for (std::size_t i = 0; i < s.block_count(); ++i)
                        EXPECT_EQ(s.block_columns(i), d / 2 / s.block_count());
                }
            }
        }
    }
    EXPECT_GT(valid, 100u);
}

TEST(Hard, BlockSupportsAreDisjoint)
{
    for (auto [n, d] : {std::pair<std::size_t, std::size_t>{4096, 16}, {1024, 8}, {8192, 64}}) {
        const HardInstance h = generate_hard(hs(n, d, 3, true));
        std::map<std::size_t, std::set<std::size_t>> used;
        for (std::size_t j = 0; j < d; ++j) {
            if (h.roles[j].kind != ColumnKind::S)
                continue;
            auto& rows = used[h.roles[j].index];
            for (auto r : h.matrix.col_rows(j))
                EXPECT_TRUE(rows.insert(r).second) << "row reused in block " << h.roles[j].index;
        }
    }
}

TEST(Hard, DeterministicAndSeedSensitive)
{
    EXPECT_EQ(generate_hard(hs(1024, 8, 5, true)).matrix, generate_hard(hs(1024, 8, 5, true)).matrix);
    EXPECT_FALSE(generate_hard(hs(1024, 8, 5, true)).matrix == generate_hard(hs(1024, 8, 6, true)).matrix);
}

TEST(Hard, DenseColumnL1MeanWithinThreeSe)
{
    const std::size_t n = 65536;
    const HardInstance h = generate_hard(hs(n, 16, 7, true));
    const double mean = n * std::sqrt(2 / std::numbers::pi);
    const double se = std::sqrt(n * (1 - 2 / std::numbers::pi));
    EXPECT_NEAR(col_norm(h.matrix, 0, 1.0), mean, 3 * se);
}

TEST(Hard, ExpectedNormsBracketExamples)
{
    const auto& k = oracle::constants();
    const auto spec = hs(4096, 16);
    const auto norms = expected_column_norms(spec, 1.0, k);
    ASSERT_EQ(norms.size(), 1u + 4 + 8 + 1);
    EXPECT_NEAR(norms[0].expected, 4096 * std::sqrt(2 / std::numbers::pi), 1e-9);
    EXPECT_NEAR(gaussian_abs_moment(2.0), 1.0, 1e-14);
    EXPECT_NEAR(gaussian_abs_moment(1.0), std::sqrt(2 / std::numbers::pi), 1e-15);
    for (const auto& r : norms) {
        if (r.role.kind == ColumnKind::zero)
            continue;
        EXPECT_LT(r.lo, r.expected);
        EXPECT_GT(r.hi, r.expected);
        EXPECT_NEAR(r.hi * r.lo, std::pow(static_cast<double>(r.role.nnz), 2.0), 1e-6 * r.hi * r.lo);
    }
}

TEST(Hard, ColumnNormsCoveredByBracket)
{
    const auto& k = oracle::constants();
    for (double p : {1.0, 1.5}) {
        int covered = 0;
        for (std::uint64_t t = 0; t < 100; ++t) {
            const auto spec = hs(1024, 16, t, true);
            const HardInstance h = generate_hard(spec);
            const double C = k.at(p).C.value;
            bool ok = true;
            for (std::size_t j = 0; j < 16; ++j) {
                const double nnz = static_cast<double>(h.roles[j].nnz);
                if (nnz == 0)
                    continue;
                const double v = col_norm(h.matrix, j, p), root = std::pow(nnz, 1 / p);
                ok = ok && v >= root / C && v <= root * C;
            }
            covered += ok;
        }
        EXPECT_GE(covered, 97) << "p=" << p;
    }
}

TEST(Hard, DenseColumnHasTheLargestNorm)
{
    for (std::uint64_t t = 0; t < 20; ++t) {
        const HardInstance h = generate_hard(hs(4096, 16, t));
        const double d0 = col_norm(h.matrix, 0, 1.0);
        for (std::size_t j = 1; j < 16; ++j)
            EXPECT_GT(d0, col_norm(h.matrix, j, 1.0));
    }
}

TEST(Hard, ValidationErrors)
{
    EXPECT_THROW(generate_hard(hs(1024, 6)), ArgumentError);   // d not a multiple of 4
    EXPECT_THROW(generate_hard(hs(24 * 8, 8)), ArgumentError); // n/d = 24
    EXPECT_THROW(generate_hard(hs(8, 8)), ArgumentError);      // n/d = 1
    const auto s = hs(512 * 8, 8);                             // log2(512) = 9 does not divide 4
    EXPECT_FALSE(s.problems().empty());
    auto u = s;
    u.allow_uneven_blocks = true;
    EXPECT_TRUE(u.problems().empty());
    EXPECT_GE(hs(1000, 6).problems().size(), 2u);
}

TEST(Hard, ExportWritesMatrixAndRoles)
{
    const HardInstance h = generate_hard(hs(128, 8, 2));
    const std::string stem = ::testing::TempDir() + "psketch_hard";
    export_hard(h, stem);
    EXPECT_EQ(read_matrix_market(stem + ".mtx"), h.matrix);
    std::ifstream f(stem + ".roles.json");
    const auto j = nlohmann::json::parse(f);
    EXPECT_EQ(j["columns"].size(), 8u);
    EXPECT_EQ(j["columns"][0]["role"], "D");
    EXPECT_EQ(j["blocks"], 4);
    std::remove((stem + ".mtx").c_str());
    std::remove((stem + ".roles.json").c_str());
}
