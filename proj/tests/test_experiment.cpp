#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "psketch/experiment.hpp"
#include "support.hpp"

using namespace psketch;
using nlohmann::json;

namespace {

std::size_t count_fields(const std::string& line)
{
    // No field in these tests needs quoting.
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

double field(const CsvRow& r, const std::string& k) { return std::stod(r.f.at(k)); }

json distort_json()
{
    return {{"kind", "distort"}, {"p", 1.0},       {"n", 400},     {"d", 4},
            {"trials", 3},       {"seed", 7},      {"budget", 200},
            {"embedding", {{"family", "composed_cs"}}}};
}

} // namespace

TEST(Config, ParsesAndInheritsP)
{
    json j = distort_json();
    j["p"] = 1.5;
    const auto c = config_from_json(j);
    EXPECT_EQ(c.kind, ExperimentKind::distort);
    ASSERT_TRUE(c.embedding);
    EXPECT_EQ(c.embedding->p, 1.5);
    EXPECT_EQ(c.embedding_for_instance().n, 400u);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, ValidationListsEveryFailure)
{
    json j = {{"kind", "distort"}, {"p", 3.0}, {"n", 2}, {"d", 4}, {"budget", 2}};
    try {
        config_from_json(j).validate();
        FAIL();
    } catch (const ValidationError& e) {
        const std::string m = e.what();
        for (const char* needle : {"p must lie", "n must be at least d", "needs an embedding", "budget must be"})
            EXPECT_NE(m.find(needle), std::string::npos) << needle << "\n" << m;
    }
}

TEST(Config, UnknownKeysAndBadKind)
{
    json j = distort_json();
    j["colour"] = 1;
    j["kind"] = "shuffle";
    try {
        config_from_json(j);
        FAIL();
    } catch (const ValidationError& e) {
        const std::string m = e.what();
        EXPECT_NE(m.find("colour"), std::string::npos);
        EXPECT_NE(m.find("shuffle"), std::string::npos);
    }
    EXPECT_THROW(load_config("/nonexistent/config.json"), ValidationError);
}

TEST(Run, IdentityEmbeddingHasUnitDistortion)
{
    json j = distort_json();
    j["embedding"] = {{"family", "identity"}};
    const auto rep = run_experiment(config_from_json(j));
    ASSERT_EQ(rep.rows.size(), 3u);
    for (const auto& r : rep.rows) {
        EXPECT_FALSE(r.failed());
        EXPECT_NEAR(field(r, "kappa_hat"), 1.0, 1e-12);
    }
}

TEST(Run, ReplayIsByteIdenticalAcrossThreadCounts)
{
    auto c = config_from_json(distort_json());
    c.threads = 1;
    const std::string one = run_experiment(c).str();
    c.threads = 3;
    EXPECT_EQ(run_experiment(c).str(), one);
    EXPECT_TRUE(verify_rows(c, run_experiment(c)).empty());
    c.seed = 8;
    EXPECT_NE(run_experiment(c).str(), one);
}

TEST(Run, CsvColumnCountIsConstant)
{
    const std::vector<json> configs = {
        distort_json(),
        {{"kind", "tails"}, {"n", 100}, {"trials", 5}, {"tail", "pstable_sum_lower"}},
        {{"kind", "rankdrop"}, {"n", 30}, {"d", 30}, {"trials", 5}, {"embedding", {{"family", "countsketch"}, {"rows", 90}}}},
        {{"kind", "regress"}, {"n", 300}, {"d", 3}, {"trials", 2}, {"method", "sketch_solve"}, {"embedding", {{"family", "composed_cs"}}}},
        {{"kind", "hardstress"}, {"n_per_d", 16}, {"d", 8}, {"trials", 2}, {"budget", 100}, {"embedding", {{"family", "composed_cs"}}}},
    };
    for (const auto& j : configs) {
        const std::string csv = run_any(config_from_json(j)).str();
        std::istringstream is(csv);
        std::string line;
        while (std::getline(is, line))
            EXPECT_EQ(count_fields(line), csv_columns().size()) << line;
    }
}

TEST(Run, ErrorsBecomeRowsNotCrashes)
{
    // Three sketch rows for d = 6 cannot be factored.
    json j = {{"kind", "regress"}, {"n", 100}, {"d", 6}, {"trials", 2}, {"method", "sketch_solve"},
              {"embedding", {{"family", "countsketch"}, {"rows", 3}}}};
    const auto rep = run_experiment(config_from_json(j));
    EXPECT_EQ(rep.failed_rows(), 2u);
}

TEST(Run, RankDropIsFrequentWithFewRows)
{
    json j = {{"kind", "rankdrop"}, {"n", 30}, {"d", 30}, {"trials", 100}, {"seed", 1},
              {"embedding", {{"family", "countsketch"}, {"rows", 90}}}};
    const auto rep = run_experiment(config_from_json(j));
    double events = 0;
    for (const auto& r : rep.rows)
        events += field(r, "event");
    EXPECT_GE(events / 100, 0.3);
}

TEST(Sweep, RowCountsAndOrdering)
{
    json j = {{"kind", "sweep"}, {"p", 1.0}, {"n", 300}, {"d", 4}, {"trials", 2}, {"budget", 100},
              {"embedding", {{"family", "osnap"}, {"B", 4}}},
              {"sweep", {{"over", "distort"}, {"grid", {{"B", {4, 8, 16}}, {"d", {2, 4}}}}}}};
    const auto c = config_from_json(j);
    const auto configs = expand_sweep(c);
    ASSERT_EQ(configs.size(), 6u);
    const auto rep = sweep(c);
    ASSERT_EQ(rep.rows.size(), 12u);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        EXPECT_EQ(field(rep.rows[i], "config"), static_cast<double>(i / 2));
        EXPECT_EQ(field(rep.rows[i], "trial"), static_cast<double>(i % 2));
    }
    EXPECT_TRUE(verify_rows(c, rep, 12).empty());
}

TEST(Sweep, OsnapRowsGrowWithB)
{
    json j = {{"kind", "sweep"}, {"n", 2000}, {"d", 8}, {"trials", 1}, {"budget", 100},
              {"embedding", {{"family", "osnap"}, {"B", 4}}},
              {"sweep", {{"over", "distort"}, {"grid", {{"B", {3, 4, 8, 16, 32}}}}}}};
    const auto rep = sweep(config_from_json(j));
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        EXPECT_GE(field(rep.rows[i], "rows"), field(rep.rows[i - 1], "rows"));
}

TEST(Sweep, GuardsAndValidation)
{
    json j = {{"kind", "sweep"}, {"n", 100}, {"d", 4}, {"embedding", {{"family", "countsketch"}}},
              {"sweep", {{"over", "distort"}, {"grid", {{"d", std::vector<double>(1001, 4)}, {"n", std::vector<double>(1001, 100)}}}}}};
    EXPECT_THROW(expand_sweep(config_from_json(j)), ResourceError);
    j["sweep"]["grid"] = {{"d", {4, 200}}};
    EXPECT_THROW(expand_sweep(config_from_json(j)), ValidationError);
    j["sweep"]["grid"] = {{"colour", {1}}};
    EXPECT_THROW(config_from_json(j).validate(), ValidationError);
}

TEST(Csv, AtomicWriteAndQuoting)
{
    EXPECT_EQ(CsvReport::quote("a,b"), "\"a,b\"");
    EXPECT_EQ(CsvReport::quote("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(CsvReport::quote("plain"), "plain");
    const auto rep = run_experiment(config_from_json(distort_json()));
    const std::string path = ::testing::TempDir() + "psketch_out.csv";
    rep.write_atomic(path);
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    EXPECT_EQ(ss.str(), rep.str());
    for (const auto& e : std::filesystem::directory_iterator(::testing::TempDir()))
        EXPECT_EQ(e.path().string().find("psketch_out.csv.tmp"), std::string::npos);
    std::filesystem::remove(path);
}

TEST(Threads, ResolutionOrder)
{
    EXPECT_EQ(resolve_threads(5u), 5u);
    ::setenv("PSKETCH_THREADS", "3", 1);
    EXPECT_EQ(resolve_threads(std::nullopt), 3u);
    ::unsetenv("PSKETCH_THREADS");
    EXPECT_GE(resolve_threads(std::nullopt), 1u);
}
