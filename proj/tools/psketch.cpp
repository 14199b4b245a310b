// psketch: build, apply and measure l_p subspace embeddings from the command line.
//
// Exit codes: 0 success, 2 validation error, 3 resource error, 4 some trial rows failed.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "psketch/embeddings.hpp"
#include "psketch/experiment.hpp"
#include "psketch/hardgen.hpp"
#include "psketch/matrix_io.hpp"

using namespace psketch;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitResource = 3;
constexpr int kExitPartial = 4;

struct SpecFlags {
    std::string config;
    std::optional<std::string> family;
    std::optional<double> p, B, eps, alpha, row_const;
    std::optional<std::size_t> n, d;
    std::optional<std::uint64_t> rows, seed;

    void add(CLI::App* app)
    {
        app->add_option("--config", config, "embedding spec JSON file");
        app->add_option("--family", family, "embedding family");
        app->add_option("--p", p, "stable index p in [1, 2]");
        app->add_option("--n", n, "ambient dimension");
        app->add_option("--d", d, "subspace dimension");
        app->add_option("--B", B, "OSNAP trade-off parameter (> 2)");
        app->add_option("--eps", eps, "Bernoulli keep probability for sampled_composed");
        app->add_option("--alpha", alpha, "truncation threshold for truncated");
        app->add_option("--rows", rows, "explicit row count");
        app->add_option("--row-const", row_const, "row count constant");
        app->add_option("--seed", seed, "seed");
    }

    EmbeddingSpec resolve() const
    {
        nlohmann::json j = nlohmann::json::object();
        if (!config.empty()) {
            std::ifstream f(config);
            if (!f)
                throw ValidationError("cannot open " + config);
            j = nlohmann::json::parse(f);
        }
        if (family)
            j["family"] = *family;
        if (!j.contains("family"))
            throw ValidationError("no embedding family given (--family or --config)");
        if (p)
            j["p"] = *p;
        if (n)
            j["n"] = *n;
        if (d)
            j["d"] = *d;
        if (B)
            j["B"] = *B;
        if (eps)
            j["eps"] = *eps;
        if (alpha)
            j["alpha"] = *alpha;
        if (rows)
            j["rows"] = *rows;
        if (row_const)
            j["row_const"] = *row_const;
        if (seed)
            j["seed"] = *seed;
        EmbeddingSpec s = j.get<EmbeddingSpec>();
        try {
            s.validate();
        } catch (const ArgumentError& e) {
            throw ValidationError(e.what());
        }
        return s;
    }
};

struct RunFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    std::optional<std::size_t> trials;
    bool verify = false;

    void add(CLI::App* app, bool config_required = true)
    {
        auto* c = app->add_option("--config", config, "experiment config JSON");
        if (config_required)
            c->required();
        app->add_option("--seed", seed, "base seed (overrides config)");
        app->add_option("--out", out, "CSV output path (overrides config; default stdout)");
        app->add_option("--threads", threads, "worker threads (default $PSKETCH_THREADS or all cores)");
        app->add_option("--trials", trials, "trial count (overrides config)");
        app->add_flag("--verify", verify, "replay 5 random rows and check they reproduce");
    }

    ExperimentConfig resolve(std::optional<ExperimentKind> expect) const
    {
        ExperimentConfig c = load_config(config);
        if (seed)
            c.seed = *seed;
        if (out)
            c.out = *out;
        if (threads)
            c.threads = *threads;
        if (trials)
            c.trials = *trials;
        if (expect && c.kind != *expect)
            throw ValidationError("config kind is '" + to_string(c.kind) + "' but the subcommand runs '" +
                                  to_string(*expect) + "'");
        return c;
    }
};

int run_config(const ExperimentConfig& c, bool verify)
{
    const CsvReport rep = run_any(c);
    if (c.out.empty())
        std::cout << rep.str();
    else
        rep.write_atomic(c.out);
    const std::size_t failed = rep.failed_rows();
    std::cerr << rep.rows.size() << " rows";
    if (!c.out.empty())
        std::cerr << " written to " << c.out;
    std::cerr << ", " << failed << " failed\n";
    if (verify) {
        const auto bad = verify_rows(c, rep);
        if (!bad.empty()) {
            std::cerr << "replay mismatch in " << bad.size() << " rows\n";
            return kExitPartial;
        }
        std::cerr << "replay check passed\n";
    }
    return failed ? kExitPartial : 0;
}

bool is_mtx(const std::string& path) { return path.size() >= 4 && path.compare(path.size() - 4, 4, ".mtx") == 0; }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"psketch: sparse l_p subspace embeddings and distortion experiments"};
    app.require_subcommand(1);

    SpecFlags build_flags;
    std::string build_out;
    auto* build_cmd = app.add_subcommand("build", "build an embedding and optionally write it as MatrixMarket");
    build_flags.add(build_cmd);
    build_cmd->add_option("--out", build_out, "MatrixMarket output path");

    SpecFlags apply_flags;
    std::string apply_in, apply_out;
    auto* apply_cmd = app.add_subcommand("apply", "apply an embedding to a matrix file");
    apply_flags.add(apply_cmd);
    apply_cmd->add_option("--input", apply_in, "A as .mtx or dense text")->required();
    apply_cmd->add_option("--out", apply_out, "dense text output (default stdout)");

    struct Runner {
        const char* name;
        const char* help;
        std::optional<ExperimentKind> kind;
        RunFlags flags;
        CLI::App* cmd = nullptr;
    };
    Runner runners[] = {
        {"distort", "measure distortion over trials", ExperimentKind::distort, {}},
        {"tails", "Monte-Carlo tail events with calibrated constants", ExperimentKind::tails, {}},
        {"rankdrop", "rank of Pi A for s = 1 sketches", ExperimentKind::rankdrop, {}},
        {"regress", "l_p regression pipeline", ExperimentKind::regress, {}},
        {"sweep", "Cartesian parameter sweep", ExperimentKind::sweep, {}},
    };
    for (auto& r : runners) {
        r.cmd = app.add_subcommand(r.name, r.help);
        r.flags.add(r.cmd);
    }

    RunFlags hard_flags;
    std::size_t hard_n = 0, hard_d = 0;
    bool hard_uneven = false;
    auto* hard_cmd = app.add_subcommand("hardgen", "write a hard instance, or run a hardstress config");
    hard_flags.add(hard_cmd, false);
    hard_cmd->add_option("--n", hard_n, "rows");
    hard_cmd->add_option("--d", hard_d, "columns");
    hard_cmd->add_flag("--uneven-blocks", hard_uneven, "allow log2(n/d) not dividing d/2");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build_cmd->parsed()) {
            const EmbeddingSpec s = build_flags.resolve();
            const Embedding e = build(s);
            nlohmann::json summary{{"spec", s},
                                   {"rows", e.rows()},
                                   {"cols", e.cols()},
                                   {"nnz", e.nnz()},
                                   {"max_column_nnz", e.max_column_nnz()},
                                   {"warnings", e.warnings()}};
            if (!build_out.empty())
                write_matrix_market(build_out, materialize(e));
            std::cout << summary.dump(2) << '\n';
            return 0;
        }
        if (apply_cmd->parsed()) {
            const EmbeddingSpec s = apply_flags.resolve();
            const Embedding e = build(s);
            const DenseMatrix out = is_mtx(apply_in) ? apply(e, read_matrix_market(apply_in)) : apply(e, read_dense(apply_in));
            if (apply_out.empty())
                write_dense(std::cout, out);
            else
                write_dense(apply_out, out);
            return 0;
        }
        if (hard_cmd->parsed()) {
            if (!hard_flags.config.empty())
                return run_config(hard_flags.resolve(ExperimentKind::hardstress), hard_flags.verify);
            if (!hard_flags.out)
                throw ValidationError("hardgen needs --out <stem> (or --config for a hardstress run)");
            HardInstanceSpec spec{hard_n, hard_d, hard_flags.seed.value_or(0), hard_uneven};
            try {
                spec.validate();
            } catch (const ArgumentError& e) {
                throw ValidationError(e.what());
            }
            const HardInstance h = generate_hard(spec);
            export_hard(h, *hard_flags.out);
            std::cerr << "wrote " << *hard_flags.out << ".mtx and " << *hard_flags.out << ".roles.json\n";
            return 0;
        }
        for (auto& r : runners)
            if (r.cmd->parsed())
                return run_config(r.flags.resolve(r.kind), r.flags.verify);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << '\n';
        return kExitResource;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
