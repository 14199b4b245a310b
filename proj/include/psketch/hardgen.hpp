#pragma once

// Hard instances for sparse l_p embeddings: one dense Gaussian D-column, d/4
// M-columns over contiguous row ranges, and d/2 S-columns split into
// L = log2(n/d) blocks where block i holds columns with 2^{i+1} nonzeros on
// disjoint supports. All other columns are zero.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "psketch/calibration.hpp"
#include "psketch/errors.hpp"
#include "psketch/matrix_io.hpp"
#include "psketch/numcore.hpp"
#include "psketch/rng.hpp"

namespace psketch {

struct HardInstanceSpec {
    std::size_t n = 0;
    std::size_t d = 0;
    std::uint64_t seed = 0;
    // When log2(n/d) does not divide d/2, spread the S-columns over blocks as
    // evenly as possible instead of rejecting the spec.
    bool allow_uneven_blocks = false;

    std::size_t block_count() const { return static_cast<std::size_t>(std::countr_zero(n / d)); }

    std::vector<std::string> problems() const
    {
        std::vector<std::string> out;
        if (d == 0 || d % 4 != 0)
            out.push_back("d must be a positive multiple of 4");
        if (d == 0 || n % d != 0 || n / d < 2 || !std::has_single_bit(n / d))
            out.push_back("n/d must be a power of two >= 2");
        else if (!allow_uneven_blocks && d % 4 == 0 && (d / 2) % block_count() != 0)
            out.push_back("d/2 must be divisible by log2(n/d) = " + std::to_string(block_count()));
        if (n > UINT32_MAX)
            out.push_back("n exceeds the 32-bit row index range");
        return out;
    }

    void validate() const
    {
        auto errs = problems();
        if (errs.empty())
            return;
        std::string msg = "invalid hard instance spec:";
        for (auto& e : errs)
            msg += "\n  - " + e;
        throw ArgumentError(msg);
    }

    /// Number of S-columns in block i (0-based).
    std::size_t block_columns(std::size_t i) const
    {
        const std::size_t s = d / 2, L = block_count();
        std::size_t c = 0;
        for (std::size_t j = 0; j < s; ++j)
            c += (j * L) / s == i;
        return c;
    }
};

enum class ColumnKind { D, M, S, zero };

struct ColumnRole {
    ColumnKind kind = ColumnKind::zero;
    std::size_t index = 0; // M: 1-based column number j; S: 0-based block i
    std::size_t nnz = 0;
};

inline std::string to_string(const ColumnRole& r)
{
    switch (r.kind) {
    case ColumnKind::D: return "D";
    case ColumnKind::M: return "M(" + std::to_string(r.index) + ")";
    case ColumnKind::S: return "S(block " + std::to_string(r.index) + ")";
    case ColumnKind::zero: return "zero";
    }
    return "?";
}

struct HardInstance {
    HardInstanceSpec spec;
    SparseMatrix matrix;
    std::vector<ColumnRole> roles;
    std::size_t blocks = 0;
};

namespace detail {

/// k distinct values from [0, n) by Floyd's algorithm, in insertion order.
inline std::vector<std::uint32_t> sample_without_replacement(std::size_t n, std::size_t k, RngStream& s)
{
    std::unordered_set<std::uint32_t> seen;
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
        auto t = static_cast<std::uint32_t>(s.uniform_index(j + 1));
        if (!seen.insert(t).second) {
            t = static_cast<std::uint32_t>(j);
            seen.insert(t);
        }
        out.push_back(t);
    }
    return out;
}

} // namespace detail

inline HardInstance generate_hard(const HardInstanceSpec& spec)
{
    spec.validate();
    const std::size_t n = spec.n, d = spec.d, L = spec.block_count();
    HardInstance h;
    h.spec = spec;
    h.blocks = L;
    h.roles.assign(d, ColumnRole{});
    std::vector<SparseMatrix::Triplet> trip;

    RngStream ds(spec.seed, "hard.D");
    h.roles[0] = {ColumnKind::D, 0, n};
    for (std::size_t i = 0; i < n; ++i)
        trip.push_back({i, 0, ds.gaussian()});

    RngStream ms(spec.seed, "hard.M");
    const std::size_t mlen = 4 * n / d;
    for (std::size_t j = 1; j <= d / 4; ++j) {
        h.roles[j] = {ColumnKind::M, j, mlen};
        for (std::size_t i = (j - 1) * mlen; i < j * mlen; ++i)
            trip.push_back({i, j, ms.gaussian()});
    }

    const RngStream sroot(spec.seed, "hard.S");
    std::size_t col = 1 + d / 4;
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t cols = spec.block_columns(i);
        const std::size_t k = std::size_t{2} << i;
        if (cols * k > n)
            throw ArgumentError("S-block " + std::to_string(i) + " needs more rows than n");
        RngStream rows_stream = sroot.child(i).child("rows");
        RngStream vals_stream = sroot.child(i).child("values");
        const auto rows = detail::sample_without_replacement(n, cols * k, rows_stream);
        for (std::size_t c = 0; c < cols; ++c, ++col) {
            h.roles[col] = {ColumnKind::S, i, k};
            std::vector<std::uint32_t> mine(rows.begin() + static_cast<std::ptrdiff_t>(c * k),
                                            rows.begin() + static_cast<std::ptrdiff_t>((c + 1) * k));
            std::sort(mine.begin(), mine.end());
            for (auto r : mine)
                trip.push_back({r, col, vals_stream.gaussian()});
        }
    }
    h.matrix = SparseMatrix::from_triplets(n, d, std::move(trip));
    return h;
}

inline nlohmann::json roles_json(const HardInstance& h)
{
    nlohmann::json cols = nlohmann::json::array();
    for (std::size_t j = 0; j < h.roles.size(); ++j) {
        const auto& r = h.roles[j];
        nlohmann::json c{{"column", j}, {"nnz", r.nnz}};
        switch (r.kind) {
        case ColumnKind::D: c["role"] = "D"; break;
        case ColumnKind::M: c["role"] = "M"; c["m_index"] = r.index; break;
        case ColumnKind::S: c["role"] = "S"; c["block"] = r.index; break;
        case ColumnKind::zero: c["role"] = "zero"; break;
        }
        cols.push_back(std::move(c));
    }
    return {{"n", h.spec.n}, {"d", h.spec.d}, {"seed", h.spec.seed}, {"blocks", h.blocks}, {"columns", cols}};
}

/// Writes <stem>.mtx and <stem>.roles.json.
inline void export_hard(const HardInstance& h, const std::string& stem)
{
    write_matrix_market(stem + ".mtx", h.matrix);
    std::ofstream f(stem + ".roles.json");
    if (!f)
        throw ArgumentError("cannot write " + stem + ".roles.json");
    f << roles_json(h).dump(2) << '\n';
}

/// E|X|^p for X standard Gaussian.
inline double gaussian_abs_moment(double p)
{
    return std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
}

struct RoleNorm {
    ColumnRole role;
    double expected = 0.0; // (k E|X|^p)^{1/p}
    double lo = 0.0;       // k^{1/p} / C_p
    double hi = 0.0;       // C_p k^{1/p}
};

/// One entry per distinct role (D, each M, each S block, zero if present).
inline std::vector<RoleNorm> expected_column_norms(const HardInstanceSpec& spec, double p,
                                                   const CalibrationConstants& constants)
{
    spec.validate();
    (void)PNorm{p};
    const double C = constants.at(p).C.value;
    const double m = gaussian_abs_moment(p);
    auto entry = [&](ColumnRole role) {
        const double k = static_cast<double>(role.nnz);
        const double root = std::pow(k, 1.0 / p);
        return RoleNorm{role, std::pow(k * m, 1.0 / p), root / C, root * C};
    };
    const std::size_t n = spec.n, d = spec.d, L = spec.block_count();
    std::vector<RoleNorm> out;
    out.push_back(entry({ColumnKind::D, 0, n}));
    for (std::size_t j = 1; j <= d / 4; ++j)
        out.push_back(entry({ColumnKind::M, j, 4 * n / d}));
    for (std::size_t i = 0; i < L; ++i)
        if (spec.block_columns(i) > 0)
            out.push_back(entry({ColumnKind::S, i, std::size_t{2} << i}));
    if (1 + d / 4 + d / 2 < d)
        out.push_back(entry({ColumnKind::zero, 0, 0}));
    return out;
}

} // namespace psketch
