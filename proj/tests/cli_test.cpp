#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "intraday/cli.hpp"
#include "intraday/report.hpp"
#include "test_support.hpp"

namespace intraday {
namespace {

namespace fs = std::filesystem;

struct CliResult {
    int code{};
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "intraday");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// A small market that keeps the whole pipeline fast.
std::vector<std::string> small_run(const fs::path& out) {
    return {"--out",          out.string(), "--sim.n_symbols", "30", "--sim.n_days", "12",
            "--respond.max_lag", "13",       "--deciles.days",  "1"};
}

std::vector<std::string> with(std::vector<std::string> base, std::initializer_list<std::string> extra) {
    base.insert(base.begin(), extra);
    return base;
}

TEST(ConfigText, CommentsWhitespaceAndOrder) {
    const auto entries = parse_config_text("# header\n  seed = 7  # trailing\n\nsim.spread=0.03\r\n");
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0], (std::pair<std::string, std::string>{"seed", "7"}));
    EXPECT_EQ(entries[1], (std::pair<std::string, std::string>{"sim.spread", "0.03"}));
    EXPECT_THROW(parse_config_text("no equals sign\n"), ConfigError);
}

TEST(RunConfig, DefaultsFileThenOverrides) {
    const auto c = make_run_config({{"seed", "5"}, {"threads", "3"}}, {{"seed", "9"}});
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.sim.seed, 9u);
    EXPECT_EQ(c.threads, 3);
    EXPECT_EQ(c.width_minutes, 30);
    EXPECT_EQ(c.effective_max_lag(), 65);
    EXPECT_EQ(c.trades, fs::path("out") / "data" / "trades.csv");
    EXPECT_EQ(c.cost_mode, CostMode::Raw);

    const auto five = make_run_config({}, {{"interval", "5m"}});
    EXPECT_EQ(five.intervals_per_day(), 78);
    EXPECT_EQ(five.sim.intervals_per_day, 78);
    EXPECT_EQ(five.effective_max_lag(), 390);
}

TEST(RunConfig, InvalidKeysAndValuesNameTheKey) {
    auto key_of = [](const ConfigEntries& overrides) -> std::string {
        try {
            make_run_config({}, overrides);
        } catch (const ConfigError& e) {
            return e.key();
        }
        return "";
    };
    EXPECT_EQ(key_of({{"no_such_key", "1"}}), "no_such_key");
    EXPECT_EQ(key_of({{"threads", "two"}}), "threads");
    EXPECT_EQ(key_of({{"interval", "15m"}}), "interval");
    EXPECT_EQ(key_of({{"winsorize", "yes"}}), "winsorize");
    EXPECT_EQ(key_of({{"cost_mode", "mid"}}), "cost_mode");
    EXPECT_EQ(key_of({{"from", "2004-13-01"}}), "from");
    EXPECT_EQ(key_of({{"sim.volatility", "-0.1"}}), "sim.volatility");
}

TEST(RunConfig, HashIgnoresOutputLocation) {
    const auto a = make_run_config({}, {{"out", "x"}});
    const auto b = make_run_config({}, {{"out", "y"}});
    const auto c = make_run_config({}, {{"seed", "2"}});
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_NE(a.hash(), c.hash());
    for (const auto& [key, value] : a.entries) EXPECT_NE(key, "out");
}

TEST(Cli, UsageAndUnknownCommand) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
    const auto r = run({"frobnicate"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
}

TEST(Cli, UnknownKeyExitsWithTwo) {
    testing::TempDir dir;
    const auto r = run({"simulate", "--out", dir.path().string(), "--bogus", "1"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bogus"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "data"));
}

TEST(Cli, MissingInputPathExitsWithTwoAndNamesIt) {
    testing::TempDir dir;
    const auto missing = (dir / "nowhere" / "trades.csv").string();
    const auto r = run({"bars", "--out", dir.path().string(), "--data.trades", missing});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;

    const auto cfg = run({"bars", "--config", (dir / "absent.conf").string()});
    EXPECT_EQ(cfg.code, 2);
    EXPECT_NE(cfg.err.find("absent.conf"), std::string::npos);

    // respond before bars: the bar store is the missing input.
    ASSERT_EQ(run(with(small_run(dir.path()), {"simulate"})).code, 0);
    const auto respond = run(with(small_run(dir.path()), {"respond"}));
    EXPECT_EQ(respond.code, 2);
    EXPECT_NE(respond.err.find("bar_store.csv"), std::string::npos) << respond.err;
}

TEST(Cli, EqualsFormAndAlias) {
    testing::TempDir dir;
    const auto r = run({"simulate", "--out=" + dir.path().string(), "--sim.n_symbols=3", "--sim.n_days=2",
                        "--cost-mode", "cross"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = testing::read_text(dir / "run_manifest.txt");
    EXPECT_NE(manifest.find("config.cost_mode = cross"), std::string::npos);
    EXPECT_NE(manifest.find("config.sim.n_symbols = 3"), std::string::npos);
}

TEST(Cli, ConfigFileWithOverride) {
    testing::TempDir dir;
    testing::write_text(dir / "run.conf", "seed = 11\nsim.n_symbols = 4\nsim.n_days = 2\n");
    const auto r = run({"simulate", "--config", (dir / "run.conf").string(), "--out", dir.path().string(),
                        "--seed", "12"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = testing::read_text(dir / "run_manifest.txt");
    EXPECT_NE(manifest.find("seed = 12\n"), std::string::npos);
    EXPECT_NE(manifest.find("config.sim.n_symbols = 4\n"), std::string::npos);
    EXPECT_NE(manifest.find("engine_version = 1.0.0\n"), std::string::npos);
    EXPECT_NE(manifest.find("command = simulate\n"), std::string::npos);
}

TEST(Cli, FullPipelineWritesTheLayout) {
    testing::TempDir dir;
    const auto r = run(with(small_run(dir.path()), {"all", "--bars.signed_trades", "on", "--winsorize", "on",
                                                    "--dimson", "on", "--cost-mode", "cross",
                                                    "--respond.multi_lag", "on", "--dimson.leads_lags", "2"}));
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* p : {"data/trades.csv", "data/quotes.csv", "data/meta.csv", "data/calendar.txt",
                          "bars/bars.csv", "bars/bar_store.csv", "bars/ingest.txt", "bars/signed_trades.csv",
                          "curves/txn.csv", "curves/mid.csv", "curves/txn_slot=0.csv", "curves/controlled_gamma.csv",
                          "curves/joint_txn.csv", "deciles/deciles.csv", "tables/table_I.csv", "tables/table_I.txt",
                          "tables/table_VIII.csv", "figures/fig1_returns.csv", "figures/fig6_controls.csv",
                          "figures/fig_joint.csv", "run_manifest.txt"}) {
        EXPECT_TRUE(fs::exists(dir / p)) << p;
    }
    const auto curve = read_curve_csv(dir / "curves" / "txn.csv");
    ASSERT_EQ(curve.size(), 13u);
    const auto records = read_decile_csv(dir / "deciles" / "deciles.csv");
    bool has_cross = false, has_dimson = false, has_wins = false;
    for (const auto& rec : records) {
        has_cross |= rec.strategy == "day1_daily_cross";
        has_dimson |= rec.strategy == "day1_daily_dimson";
        has_wins |= rec.strategy == "day1_daily_wins";
    }
    EXPECT_TRUE(has_cross);
    EXPECT_TRUE(has_dimson);
    EXPECT_TRUE(has_wins);
    // Table I has one row per lag plus the header.
    const auto table = testing::read_text(dir / "tables" / "table_I.csv");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 14);
}

TEST(Cli, SameSeedReproducesEveryOutput) {
    testing::TempDir a;
    testing::TempDir b;
    ASSERT_EQ(run(with(small_run(a.path()), {"all"})).code, 0);
    ASSERT_EQ(run(with(small_run(b.path()), {"all", "--threads", "3"})).code, 0);
    for (const char* p : {"data/trades.csv", "bars/bar_store.csv", "curves/txn.csv", "curves/dlog_volume.csv",
                          "deciles/deciles.csv", "tables/table_II.csv", "tables/table_IV.txt",
                          "figures/fig3_quote_returns.csv"}) {
        EXPECT_EQ(testing::read_text(a / p), testing::read_text(b / p)) << p;
    }
}

TEST(Cli, NullMarketGivesFlatCurves) {
    testing::TempDir dir;
    const auto r = run({"all", "--out", dir.path().string(), "--sim.n_symbols", "150", "--sim.n_days", "20",
                        "--sim.spread", "0", "--deciles.days", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto curve = read_curve_csv(dir / "curves" / "txn.csv");
    ASSERT_EQ(curve.size(), 65u);
    int large = 0;
    for (const auto& p : curve) large += std::fabs(p.t_stat) > 3.0;
    EXPECT_LE(large, 2);
}

TEST(Cli, ReportWithoutResultsIsMissingInput) {
    testing::TempDir dir;
    EXPECT_EQ(run({"report", "--out", dir.path().string()}).code, 2);
}

}  // namespace
}  // namespace intraday
