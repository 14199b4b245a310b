#pragma once

// Oblivious subspace embedding families.
//
// Sparse families are stored as one or more hash blocks: for every input
// coordinate i a block holds s (row, value) pairs. Composed families stack an
// l2 block (CountSketch or OSNAP, scaled) on top of a sparse p-stable block.
// apply() works directly from the blocks; materialize() produces the explicit
// CSC matrix, which is what the tests compare against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "psketch/errors.hpp"
#include "psketch/numcore.hpp"
#include "psketch/rng.hpp"
#include "psketch/stable.hpp"

namespace psketch {

enum class Family {
    countsketch,
    osnap,
    sparse_stable,
    composed_cs,
    composed_osnap,
    sampled_composed,
    truncated,
    dense_stable,
    identity,
};

inline std::string_view to_string(Family f)
{
    switch (f) {
    case Family::countsketch: return "countsketch";
    case Family::osnap: return "osnap";
    case Family::sparse_stable: return "sparse_stable";
    case Family::composed_cs: return "composed_cs";
    case Family::composed_osnap: return "composed_osnap";
    case Family::sampled_composed: return "sampled_composed";
    case Family::truncated: return "truncated";
    case Family::dense_stable: return "dense_stable";
    case Family::identity: return "identity";
    }
    return "?";
}

inline Family family_from_string(std::string_view s)
{
    for (Family f : {Family::countsketch, Family::osnap, Family::sparse_stable, Family::composed_cs,
                     Family::composed_osnap, Family::sampled_composed, Family::truncated, Family::dense_stable,
                     Family::identity})
        if (to_string(f) == s)
            return f;
    throw ArgumentError("unknown embedding family '" + std::string(s) + "'");
}

/// Which construction to build and with which parameters.
struct EmbeddingSpec {
    Family family = Family::countsketch;
    double p = 1.0;
    std::size_t n = 0;
    std::size_t d = 0;
    std::optional<double> B;        // osnap, composed_osnap
    std::optional<double> eps;      // sampled_composed
    std::optional<double> alpha;    // truncated
    std::optional<std::uint64_t> rows; // sparse_stable, dense_stable; optional override for countsketch
    double row_const = 1.0;
    std::uint64_t seed = 0;

    bool needs_B() const { return family == Family::osnap || family == Family::composed_osnap; }
    bool needs_eps() const { return family == Family::sampled_composed; }
    bool needs_alpha() const { return family == Family::truncated; }
    bool needs_rows() const { return family == Family::sparse_stable || family == Family::dense_stable; }
    bool allows_rows() const { return needs_rows() || family == Family::countsketch; }

    /// Every violated constraint, empty when valid.
    std::vector<std::string> problems() const
    {
        std::vector<std::string> out;
        if (d < 1)
            out.push_back("d must be at least 1");
        if (n < d)
            out.push_back("n must be at least d");
        if (!(p >= 1.0 && p <= 2.0))
            out.push_back("p must lie in [1, 2]");
        const bool p_below_two = family == Family::composed_cs || family == Family::composed_osnap ||
                                 family == Family::sampled_composed || family == Family::truncated;
        if (p_below_two && !(p < 2.0))
            out.push_back(std::string(to_string(family)) + " requires p < 2; use an l2 family for p = 2");
        if (!(row_const > 0.0) || !std::isfinite(row_const))
            out.push_back("row_const must be positive");
        if (needs_B() != B.has_value())
            out.push_back(needs_B() ? "B is required for " + std::string(to_string(family))
                                    : "B is only allowed for osnap families");
        if (B && !(*B > 2.0))
            out.push_back("B must exceed 2");
        if (needs_eps() != eps.has_value())
            out.push_back(needs_eps() ? "eps is required for sampled_composed" : "eps is only allowed for sampled_composed");
        if (eps && !(*eps > 0.0 && *eps < 1.0))
            out.push_back("eps must lie in the open interval (0, 1)");
        if (needs_alpha() != alpha.has_value())
            out.push_back(needs_alpha() ? "alpha is required for truncated" : "alpha is only allowed for truncated");
        if (alpha && !(*alpha > 0.0 && *alpha < 0.25))
            out.push_back("alpha must lie in (0, 1/4)");
        if (needs_rows() && !rows)
            out.push_back("rows is required for " + std::string(to_string(family)));
        if (rows && !allows_rows())
            out.push_back("rows is only allowed for countsketch, sparse_stable and dense_stable");
        if (rows && *rows < (family == Family::dense_stable ? 2u : 1u))
            out.push_back(family == Family::dense_stable ? "dense_stable needs rows >= 2" : "rows must be at least 1");
        return out;
    }

    void validate() const
    {
        auto errs = problems();
        if (errs.empty())
            return;
        std::string msg = "invalid embedding spec:";
        for (auto& e : errs)
            msg += "\n  - " + e;
        throw ArgumentError(msg);
    }
};

inline void to_json(nlohmann::json& j, const EmbeddingSpec& s)
{
    j = nlohmann::json{{"family", to_string(s.family)}, {"p", s.p},   {"n", s.n},
                       {"d", s.d},                       {"row_const", s.row_const}, {"seed", s.seed}};
    if (s.B)
        j["B"] = *s.B;
    if (s.eps)
        j["eps"] = *s.eps;
    if (s.alpha)
        j["alpha"] = *s.alpha;
    if (s.rows)
        j["rows"] = *s.rows;
}

inline void from_json(const nlohmann::json& j, EmbeddingSpec& s)
{
    static const std::vector<std::string> known = {"family", "p",     "n",         "d",    "B",
                                                   "eps",    "alpha", "row_const", "seed", "rows"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ArgumentError("unknown embedding spec field '" + it.key() + "'");
    s = EmbeddingSpec{};
    s.family = family_from_string(j.at("family").get<std::string>());
    s.p = j.value("p", 1.0);
    s.n = j.value("n", std::size_t{0});
    s.d = j.value("d", std::size_t{0});
    s.row_const = j.value("row_const", 1.0);
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("B"))
        s.B = j.at("B").get<double>();
    if (j.contains("eps"))
        s.eps = j.at("eps").get<double>();
    if (j.contains("alpha"))
        s.alpha = j.at("alpha").get<double>();
    if (j.contains("rows"))
        s.rows = j.at("rows").get<std::uint64_t>();
}

/// s hash entries per input coordinate, placed at row_offset within the operator.
struct SketchBlock {
    static constexpr std::uint32_t kDropped = UINT32_MAX;

    std::size_t row_offset = 0;
    std::size_t rows = 0;
    std::size_t per_column = 1;
    std::vector<std::uint32_t> row; // n * per_column entries; kDropped marks an absent entry
    std::vector<double> value;

    friend bool operator==(const SketchBlock&, const SketchBlock&) = default;
};

/// A realized sketching operator.
class Embedding {
public:
    Embedding(EmbeddingSpec spec, std::size_t rows, std::vector<SketchBlock> blocks, std::size_t block_boundary = 0)
        : spec_(std::move(spec)), rows_(rows), block_boundary_(block_boundary), blocks_(std::move(blocks))
    {
    }

    Embedding(EmbeddingSpec spec, DenseMatrix dense)
        : spec_(std::move(spec)), rows_(dense.rows()), dense_(std::move(dense))
    {
    }

    const EmbeddingSpec& spec() const noexcept { return spec_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return spec_.n; }

    /// First row of the second block for stacked families, 0 otherwise.
    std::size_t block_boundary() const noexcept { return block_boundary_; }

    bool is_dense() const noexcept { return dense_.has_value(); }
    const std::vector<SketchBlock>& blocks() const noexcept { return blocks_; }
    const std::optional<DenseMatrix>& dense() const noexcept { return dense_; }

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

    std::size_t column_nnz(std::size_t i) const
    {
        if (dense_) {
            std::size_t c = 0;
            for (std::size_t r = 0; r < rows_; ++r)
                c += (*dense_)(r, i) != 0.0;
            return c;
        }
        std::size_t c = 0;
        for (const auto& b : blocks_)
            for (std::size_t k = 0; k < b.per_column; ++k)
                c += b.row[i * b.per_column + k] != SketchBlock::kDropped;
        return c;
    }

    std::size_t max_column_nnz() const
    {
        if (dense_)
            return rows_;
        std::size_t s = 0;
        for (const auto& b : blocks_)
            s += b.per_column;
        return s;
    }

    std::size_t nnz() const
    {
        std::size_t c = 0;
        for (std::size_t i = 0; i < cols(); ++i)
            c += column_nnz(i);
        return c;
    }

    friend bool operator==(const Embedding& a, const Embedding& b)
    {
        return a.rows_ == b.rows_ && a.block_boundary_ == b.block_boundary_ && a.blocks_ == b.blocks_ &&
               a.dense_ == b.dense_;
    }

private:
    EmbeddingSpec spec_;
    std::size_t rows_;
    std::size_t block_boundary_ = 0;
    std::vector<SketchBlock> blocks_;
    std::optional<DenseMatrix> dense_;
    std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Row-count formulas. log is natural log throughout; log_B d is ln d / ln B.

namespace rows_for {

inline std::size_t countsketch(std::size_t d, double row_const)
{
    const double dd = static_cast<double>(d);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(row_const * dd * dd)));
}

/// Smallest s >= 1 with B^s >= d, i.e. max(1, ceil(log_B d)) without rounding noise.
inline std::size_t osnap_sparsity(std::size_t d, double B)
{
    std::size_t s = 1;
    while (std::pow(B, static_cast<double>(s)) < static_cast<double>(d) * (1.0 - 1e-12))
        ++s;
    return s;
}

inline std::size_t osnap(std::size_t d, double B, double row_const)
{
    const double dd = static_cast<double>(d);
    const auto r = static_cast<std::size_t>(std::ceil(row_const * B * dd * std::log(dd)));
    return std::max({r, osnap_sparsity(d, B), std::size_t{1}});
}

/// R2 = min(R1, ceil(d^1.1)).
inline std::size_t stable_block(std::size_t d, std::size_t r1)
{
    return std::min(r1, static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(d), 1.1))));
}

inline std::size_t truncated(std::size_t d, double row_const)
{
    const double dd = static_cast<double>(d);
    const double l = std::log(dd);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(row_const * std::pow(dd, 4) * std::pow(l, 5))));
}

} // namespace rows_for

/// Scale applied to the l2 block of a composed embedding.
inline double composed_scale(std::size_t d, double p, Family variant, double B = 0.0)
{
    const double dd = static_cast<double>(d);
    if (p == 1.0) {
        if (variant == Family::composed_osnap || variant == Family::osnap)
            return dd * std::log(B);
        // d log d vanishes at d = 1; the block is left unscaled there.
        return d >= 2 ? dd * std::log(dd) : 1.0;
    }
    return std::pow(dd, 2.0 / p - 1.0);
}

// ---------------------------------------------------------------------------
// Builders

namespace detail {

inline void require_dims(std::size_t n, std::size_t d)
{
    if (d == 0)
        throw ArgumentError("d must be at least 1");
    if (n < d)
        throw ArgumentError("n must be at least d");
    if (n > UINT32_MAX)
        throw ResourceError("n exceeds 32-bit index range");
}

inline SketchBlock single_hash_block(std::size_t n, std::size_t rows, RngStream& hash_stream)
{
    SketchBlock b;
    b.rows = rows;
    b.per_column = 1;
    b.row.resize(n);
    b.value.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        b.row[i] = static_cast<std::uint32_t>(hash_stream.uniform_index(rows));
    return b;
}

} // namespace detail

/// One +-1 per column at a uniform row, with an explicit row count.
inline Embedding build_countsketch_rows(std::size_t n, std::size_t d, std::size_t r, double row_const,
                                        std::uint64_t seed)
{
    detail::require_dims(n, d);
    if (r < 1)
        throw ArgumentError("countsketch needs at least one row");
    if (r > UINT32_MAX)
        throw ResourceError("countsketch row count exceeds 32-bit index range");
    RngStream hs(seed, "countsketch.hash");
    RngStream ss(seed, "countsketch.sign");
    SketchBlock b = detail::single_hash_block(n, r, hs);
    for (auto& v : b.value)
        v = ss.sign();
    EmbeddingSpec spec;
    spec.family = Family::countsketch;
    spec.p = 2.0;
    spec.n = n;
    spec.d = d;
    spec.row_const = row_const;
    spec.seed = seed;
    if (r != rows_for::countsketch(d, row_const))
        spec.rows = r;
    Embedding e(spec, r, {std::move(b)});
    if (r > n)
        e.add_warning("countsketch rows (" + std::to_string(r) + ") exceed n (" + std::to_string(n) + ")");
    return e;
}

/// r = ceil(row_const d^2).
inline Embedding build_countsketch(std::size_t n, std::size_t d, double row_const, std::uint64_t seed)
{
    return build_countsketch_rows(n, d, rows_for::countsketch(d, row_const), row_const, seed);
}

/// s = max(1, ceil(log_B d)) entries of +-s^-1/2 per column at distinct rows;
/// r = ceil(row_const B d ln d).
inline Embedding build_osnap(std::size_t n, std::size_t d, double B, double row_const, std::uint64_t seed)
{
    detail::require_dims(n, d);
    if (!(B > 2.0))
        throw ArgumentError("osnap requires B > 2");
    const std::size_t s = rows_for::osnap_sparsity(d, B);
    const std::size_t r = rows_for::osnap(d, B, row_const);
    RngStream hs(seed, "osnap.hash");
    RngStream ss(seed, "osnap.sign");
    SketchBlock b;
    b.rows = r;
    b.per_column = s;
    b.row.resize(n * s);
    b.value.resize(n * s);
    const double mag = 1.0 / std::sqrt(static_cast<double>(s));
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t* rows = &b.row[i * s];
        for (std::size_t k = 0; k < s; ++k) {
            std::uint32_t cand;
            bool clash;
            do {
                cand = static_cast<std::uint32_t>(hs.uniform_index(r));
                clash = std::find(rows, rows + k, cand) != rows + k;
            } while (clash);
            rows[k] = cand;
            b.value[i * s + k] = mag * ss.sign();
        }
    }
    EmbeddingSpec spec;
    spec.family = Family::osnap;
    spec.p = 2.0;
    spec.n = n;
    spec.d = d;
    spec.B = B;
    spec.row_const = row_const;
    spec.seed = seed;
    return Embedding(spec, r, {std::move(b)});
}

/// Phi * D: one entry per column at a uniform row in [0, rows), value drawn
/// i.i.d. standard Cauchy (p = 1) or unit-scale p-stable.
inline Embedding build_sparse_stable(std::size_t n, std::size_t d, double p, std::size_t rows, std::uint64_t seed)
{
    detail::require_dims(n, d);
    StableParams(p, 1.0).validate();
    if (rows < 1)
        throw ArgumentError("sparse_stable needs at least one row");
    RngStream hs(seed, "stable.hash");
    RngStream vs(seed, "stable.value");
    SketchBlock b = detail::single_hash_block(n, rows, hs);
    for (auto& v : b.value)
        v = draw_pstable(p, vs);
    EmbeddingSpec spec;
    spec.family = Family::sparse_stable;
    spec.p = p;
    spec.n = n;
    spec.d = d;
    spec.rows = rows;
    spec.seed = seed;
    return Embedding(spec, rows, {std::move(b)});
}

/// Stacks the scaled l2 block (CountSketch or OSNAP) over a sparse p-stable block
/// with R2 = min(R1, ceil(d^1.1)) rows. Sub-blocks draw from the "pi1" and "pi2"
/// children of the seed.
inline Embedding build_composed(std::size_t n, std::size_t d, double p, Family variant, std::optional<double> B,
                                double row_const, std::uint64_t seed)
{
    detail::require_dims(n, d);
    if (!(p >= 1.0 && p < 2.0))
        throw ArgumentError("composed embeddings require 1 <= p < 2; use an l2 family for p = 2");
    if (variant != Family::countsketch && variant != Family::osnap && variant != Family::composed_cs &&
        variant != Family::composed_osnap)
        throw ArgumentError("composed variant must be countsketch or osnap");
    const bool use_osnap = variant == Family::osnap || variant == Family::composed_osnap;
    if (use_osnap && (!B || !(*B > 2.0)))
        throw ArgumentError("composed osnap variant requires B > 2");

    Embedding top = use_osnap ? build_osnap(n, d, *B, row_const, derive_seed(seed, "pi1"))
                              : build_countsketch(n, d, row_const, derive_seed(seed, "pi1"));
    const std::size_t r1 = top.rows();
    const std::size_t r2 = rows_for::stable_block(d, r1);
    Embedding bottom = build_sparse_stable(n, d, p, r2, derive_seed(seed, "pi2"));

    const double scale = composed_scale(d, p, use_osnap ? Family::composed_osnap : Family::composed_cs, B.value_or(0));
    SketchBlock b1 = top.blocks().front();
    for (auto& v : b1.value)
        v *= scale;
    SketchBlock b2 = bottom.blocks().front();
    b2.row_offset = r1;

    EmbeddingSpec spec;
    spec.family = use_osnap ? Family::composed_osnap : Family::composed_cs;
    spec.p = p;
    spec.n = n;
    spec.d = d;
    if (use_osnap)
        spec.B = B;
    spec.row_const = row_const;
    spec.seed = seed;
    return Embedding(spec, r1 + r2, {std::move(b1), std::move(b2)}, r1);
}

/// composed_cs with every entry of the stable block kept independently with
/// probability eps. Column nnz is 1 or 2, 1 + eps in expectation.
inline Embedding build_sampled_composed(std::size_t n, std::size_t d, double p, double eps, double row_const,
                                        std::uint64_t seed)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw ArgumentError("eps must lie in the open interval (0, 1)");
    Embedding base = build_composed(n, d, p, Family::countsketch, std::nullopt, row_const, seed);
    std::vector<SketchBlock> blocks = base.blocks();
    RngStream keep(seed, "sample.keep");
    for (std::size_t i = 0; i < n; ++i)
        if (!keep.bernoulli(eps))
            blocks[1].row[i] = SketchBlock::kDropped;
    EmbeddingSpec spec = base.spec();
    spec.family = Family::sampled_composed;
    spec.eps = eps;
    return Embedding(spec, base.rows(), std::move(blocks), base.block_boundary());
}

/// Single-entry stable sketch with values trunc_alpha(X_i);
/// R = ceil(row_const d^4 ln^5 d).
inline Embedding build_truncated(std::size_t n, std::size_t d, double p, double alpha, double row_const,
                                 std::uint64_t seed)
{
    detail::require_dims(n, d);
    if (!(alpha > 0.0 && alpha < 0.25))
        throw ArgumentError("truncated embedding requires 0 < alpha < 1/4");
    if (!(p >= 1.0 && p < 2.0))
        throw ArgumentError("truncated embedding requires 1 <= p < 2");
    const std::size_t r = rows_for::truncated(d, row_const);
    if (r > UINT32_MAX)
        throw ResourceError("truncated row count exceeds 32-bit index range");
    const TruncationParams tp(alpha);
    RngStream hs(seed, "trunc.hash");
    RngStream vs(seed, "trunc.value");
    SketchBlock b = detail::single_hash_block(n, r, hs);
    for (auto& v : b.value)
        v = truncate(draw_pstable(p, vs), tp);
    EmbeddingSpec spec;
    spec.family = Family::truncated;
    spec.p = p;
    spec.n = n;
    spec.d = d;
    spec.alpha = alpha;
    spec.row_const = row_const;
    spec.seed = seed;
    return Embedding(spec, r, {std::move(b)});
}

inline constexpr double kAstronomicalRows = 4294967296.0; // 2^32
inline constexpr std::uint64_t kDefaultDenseGuard = std::uint64_t{1} << 28;

/// Dense r x n matrix with i.i.d. entries (r ln r)^(-1/p) D_p. r is taken as a
/// real so that formula-derived row counts can be rejected before any rounding.
inline Embedding build_dense_stable(std::size_t n, std::size_t d, double p, double r, std::uint64_t seed,
                                    std::uint64_t entry_guard = kDefaultDenseGuard)
{
    detail::require_dims(n, d);
    StableParams(p, 1.0).validate();
    if (!(r >= 2.0))
        throw ArgumentError("dense_stable requires r >= 2 so that log r > 0");
    if (!(r <= kAstronomicalRows))
        throw ResourceError("astronomical r: requested " + std::to_string(r) + " rows exceeds 2^32");
    if (r != std::floor(r))
        throw ArgumentError("dense_stable row count must be an integer");
    const auto rows = static_cast<std::size_t>(r);
    if (static_cast<double>(rows) * static_cast<double>(n) > static_cast<double>(entry_guard))
        throw ResourceError("dense_stable would hold " + std::to_string(rows) + " x " + std::to_string(n) +
                            " entries, above the memory guard");
    const double scale = std::pow(r * std::log(r), -1.0 / p);
    RngStream vs(seed, "dense.value");
    DenseMatrix m(rows, n);
    for (double& x : m.data())
        x = scale * draw_pstable(p, vs);
    EmbeddingSpec spec;
    spec.family = Family::dense_stable;
    spec.p = p;
    spec.n = n;
    spec.d = d;
    spec.rows = rows;
    spec.seed = seed;
    return Embedding(spec, std::move(m));
}

/// r = exp(4e4 (24 (U_p / L_p)^(1/p))^(2d)), the row count that makes the dense
/// construction a constant-distortion embedding. Overflows to +inf quickly.
inline double constant_distortion_rows(std::size_t d, double p, double U_p, double L_p)
{
    const double base = 24.0 * std::pow(U_p / L_p, 1.0 / p);
    return std::exp(4.0e4 * std::pow(base, 2.0 * static_cast<double>(d)));
}

/// r = n, Pi = I.
inline Embedding build_identity(std::size_t n, std::size_t d = 1)
{
    detail::require_dims(n, std::min(n, d));
    SketchBlock b;
    b.rows = n;
    b.row.resize(n);
    b.value.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        b.row[i] = static_cast<std::uint32_t>(i);
    EmbeddingSpec spec;
    spec.family = Family::identity;
    spec.p = 2.0;
    spec.n = n;
    spec.d = std::min(n, d);
    return Embedding(spec, n, {std::move(b)});
}

/// Single-entry operator from an explicit hash map and values. Handy for
/// hand-built operators such as permutations or scaled identities.
inline Embedding build_from_hash(std::size_t rows, std::vector<std::uint32_t> hash, std::vector<double> values)
{
    if (hash.size() != values.size())
        throw ArgumentError("hash and values differ in length");
    for (auto h : hash)
        if (h >= rows)
            throw ArgumentError("hash target out of range");
    for (double v : values)
        if (v == 0.0 || !std::isfinite(v))
            throw ArgumentError("hash values must be finite and nonzero");
    SketchBlock b;
    b.rows = rows;
    b.row = std::move(hash);
    b.value = std::move(values);
    EmbeddingSpec spec;
    spec.family = Family::countsketch;
    spec.p = 2.0;
    spec.n = b.row.size();
    spec.d = 1;
    return Embedding(spec, rows, {std::move(b)});
}

/// Builds whatever the spec describes.
inline Embedding build(const EmbeddingSpec& s)
{
    s.validate();
    Embedding e = [&] {
        switch (s.family) {
        case Family::countsketch:
            return s.rows ? build_countsketch_rows(s.n, s.d, *s.rows, s.row_const, s.seed)
                          : build_countsketch(s.n, s.d, s.row_const, s.seed);
        case Family::osnap: return build_osnap(s.n, s.d, *s.B, s.row_const, s.seed);
        case Family::sparse_stable: return build_sparse_stable(s.n, s.d, s.p, *s.rows, s.seed);
        case Family::composed_cs: return build_composed(s.n, s.d, s.p, Family::countsketch, std::nullopt, s.row_const, s.seed);
        case Family::composed_osnap: return build_composed(s.n, s.d, s.p, Family::osnap, s.B, s.row_const, s.seed);
        case Family::sampled_composed: return build_sampled_composed(s.n, s.d, s.p, *s.eps, s.row_const, s.seed);
        case Family::truncated: return build_truncated(s.n, s.d, s.p, *s.alpha, s.row_const, s.seed);
        case Family::dense_stable: return build_dense_stable(s.n, s.d, s.p, static_cast<double>(*s.rows), s.seed);
        case Family::identity: return build_identity(s.n, s.d);
        }
        throw ArgumentError("unhandled family");
    }();
    return e;
}

// ---------------------------------------------------------------------------
// Application

/// Pi * A for dense A. Sparse families cost nnz(Pi) * A.cols().
inline DenseMatrix apply(const Embedding& e, const DenseMatrix& a)
{
    if (a.rows() != e.cols())
        throw ArgumentError("apply: embedding has " + std::to_string(e.cols()) + " columns but A has " +
                            std::to_string(a.rows()) + " rows");
    if (e.is_dense())
        return matmul(*e.dense(), a);
    DenseMatrix out(e.rows(), a.cols());
    const std::size_t k = a.cols();
    for (const auto& b : e.blocks()) {
        for (std::size_t i = 0; i < e.cols(); ++i) {
            const double* arow = a.row(i).data();
            for (std::size_t t = 0; t < b.per_column; ++t) {
                const std::uint32_t h = b.row[i * b.per_column + t];
                if (h == SketchBlock::kDropped)
                    continue;
                const double v = b.value[i * b.per_column + t];
                double* orow = out.row(b.row_offset + h).data();
                for (std::size_t j = 0; j < k; ++j)
                    orow[j] += v * arow[j];
            }
        }
    }
    return out;
}

/// Pi * A for sparse A. Cost nnz(A) * max column nnz of Pi.
inline DenseMatrix apply(const Embedding& e, const SparseMatrix& a)
{
    if (a.rows() != e.cols())
        throw ArgumentError("apply: embedding column count does not match A rows");
    if (e.is_dense())
        return matmul(*e.dense(), a.to_dense());
    DenseMatrix out(e.rows(), a.cols());
    for (const auto& b : e.blocks()) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            auto ar = a.col_rows(j);
            auto av = a.col_values(j);
            for (std::size_t k = 0; k < ar.size(); ++k) {
                for (std::size_t t = 0; t < b.per_column; ++t) {
                    const std::uint32_t h = b.row[ar[k] * b.per_column + t];
                    if (h == SketchBlock::kDropped)
                        continue;
                    out(b.row_offset + h, j) += b.value[ar[k] * b.per_column + t] * av[k];
                }
            }
        }
    }
    return out;
}

/// Pi * x for a single vector.
inline std::vector<double> apply(const Embedding& e, std::span<const double> x)
{
    DenseMatrix col = DenseMatrix::column(x);
    DenseMatrix y = apply(e, col);
    return std::vector<double>(y.data().begin(), y.data().end());
}

inline constexpr std::uint64_t kDefaultMaterializeGuard = std::uint64_t{1} << 36;

/// Explicit CSC form of the operator. Refuses when rows * n exceeds the guard.
inline SparseMatrix materialize(const Embedding& e, std::uint64_t guard = kDefaultMaterializeGuard)
{
    const double cells = static_cast<double>(e.rows()) * static_cast<double>(e.cols());
    if (cells > static_cast<double>(guard))
        throw ResourceError("materialize: rows*n = " + std::to_string(cells) + " exceeds the memory guard");
    if (e.is_dense())
        return SparseMatrix::from_dense(*e.dense());
    std::vector<SparseMatrix::Triplet> t;
    t.reserve(e.cols() * e.max_column_nnz());
    for (const auto& b : e.blocks())
        for (std::size_t i = 0; i < e.cols(); ++i)
            for (std::size_t k = 0; k < b.per_column; ++k) {
                const std::uint32_t h = b.row[i * b.per_column + k];
                if (h != SketchBlock::kDropped)
                    t.push_back({b.row_offset + h, i, b.value[i * b.per_column + k]});
            }
    return SparseMatrix::from_triplets(e.rows(), e.cols(), std::move(t));
}

} // namespace psketch
