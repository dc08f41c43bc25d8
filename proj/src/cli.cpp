#include "intraday/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "intraday/bars.hpp"
#include "intraday/regression.hpp"
#include "intraday/report.hpp"
#include "intraday/signing.hpp"

namespace intraday {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

const std::map<std::string, std::string, std::less<>>& flag_aliases() {
    static const std::map<std::string, std::string, std::less<>> aliases{{"cost-mode", "cost_mode"}};
    return aliases;
}

// ---- typed value parsing -------------------------------------------------

template <class Int>
Int parse_integer(const std::string& key, const std::string& value, Int lo, Int hi) {
    Int v{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) throw ConfigError(key, "expected an integer, got '" + value + "'");
    if (v < lo || v > hi) throw ConfigError(key, "value " + value + " out of range");
    return v;
}

double parse_number(const std::string& key, const std::string& value) {
    double v{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v)) {
        throw ConfigError(key, "expected a number, got '" + value + "'");
    }
    return v;
}

bool parse_switch(const std::string& key, const std::string& value) {
    if (value == "on") return true;
    if (value == "off") return false;
    throw ConfigError(key, "expected on|off, got '" + value + "'");
}

std::optional<std::chrono::sys_days> parse_date_key(const std::string& key, const std::string& value) {
    if (value.empty()) return std::nullopt;
    auto d = parse_iso_date(value);
    if (!d) throw ConfigError(key, "expected YYYY-MM-DD, got '" + value + "'");
    return d;
}

// ---- pipeline files ------------------------------------------------------

struct Layout {
    fs::path data, bars, curves, deciles, tables, figures, manifest;
    explicit Layout(const fs::path& out)
        : data(out / "data"), bars(out / "bars"), curves(out / "curves"), deciles(out / "deciles"),
          tables(out / "tables"), figures(out / "figures"), manifest(out / "run_manifest.txt") {}
};

void require_path(const fs::path& path) {
    if (!fs::exists(path)) throw MissingPathError(path);
}

TradingCalendar load_run_calendar(const RunConfig& config) {
    require_path(config.calendar);
    TradingCalendar calendar(load_calendar_dates(config.calendar), config.width_minutes, config.time_zone);
    calendar = calendar.restricted(config.from, config.to);
    if (calendar.num_days() == 0) throw std::runtime_error("no trading days in the selected date range");
    return calendar;
}

BarSet load_run_bars(const RunConfig& config) {
    const TradingCalendar calendar = load_run_calendar(config);
    const fs::path store = Layout(config.out).bars / "bar_store.csv";
    require_path(store);
    return read_bar_store(store, calendar);
}

void write_run_manifest(const RunConfig& config, std::string_view command) {
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config.hash()));
    ConfigEntries entries{{"engine_version", std::string(kEngineVersion)},
                          {"command", std::string(command)},
                          {"config_hash", hash},
                          {"seed", std::to_string(config.seed)}};
    for (const auto& [key, value] : config.entries) entries.emplace_back("config." + key, value);
    write_manifest(entries, Layout(config.out).manifest);
}

void log_stats(std::ostream& log, std::string_view what, const LoadStats& stats) {
    log << what << ": rows=" << stats.rows << " emitted=" << stats.emitted << " rejected=" << stats.rejected
        << " out_of_session=" << stats.out_of_session << '\n';
    for (const auto& sample : stats.reject_samples) log << "  " << sample << '\n';
}

std::string slot_slice(int slot) { return "slot=" + std::to_string(slot); }

// ---- report layouts -----------------------------------------------------

AxisEntry axis(std::string label) { return AxisEntry{std::move(label), {}, {}, {}, {}}; }

std::string day_strategy(int day, std::string_view kind) { return "day" + std::to_string(day) + "_" + std::string(kind); }

std::vector<TableSpec> standard_tables(const RunConfig& config) {
    const int days = config.strategy_days;
    const int per_day = config.intervals_per_day();
    std::vector<TableSpec> tables;

    TableSpec t1{"table_I", "Return responses by lag (bp, Fama-MacBeth)", "lag", {}, {}};
    for (int k = 1; k <= config.effective_max_lag(); ++k) {
        AxisEntry row = axis(std::to_string(k));
        row.series = "txn";
        row.slice = "all";
        row.item = "lag=" + std::to_string(k);
        t1.rows.push_back(row);
    }
    t1.columns = {AxisEntry{"mean_bp", {}, {}, {}, Measure::Mean}, AxisEntry{"t_stat", {}, {}, {}, Measure::TStat}};
    tables.push_back(t1);

    auto decile_columns = [](std::string_view slice) {
        std::vector<AxisEntry> cols;
        for (int d = 1; d <= kDeciles; ++d) {
            AxisEntry c{"D" + std::to_string(d), {}, std::string(slice), std::to_string(d), Measure::Mean};
            cols.push_back(c);
        }
        cols.push_back(AxisEntry{"10-1", {}, std::string(slice), "10-1", Measure::Mean});
        cols.push_back(AxisEntry{"t(10-1)", {}, std::string(slice), "10-1", Measure::TStat});
        return cols;
    };

    TableSpec t2{"table_II", "Daily strategy decile returns (bp)", "strategy", {}, decile_columns("all")};
    for (int d = 1; d <= days; ++d) {
        AxisEntry row = axis("Day " + std::to_string(d));
        row.series = day_strategy(d, "daily");
        t2.rows.push_back(row);
    }
    tables.push_back(t2);

    TableSpec t3{"table_III", "Daily versus nondaily strategies (bp)", "strategy", {}, decile_columns("all")};
    for (int d = 1; d <= days; ++d) {
        for (std::string_view kind : {"daily", "nondaily"}) {
            AxisEntry row = axis("Day " + std::to_string(d) + " " + std::string(kind));
            row.series = day_strategy(d, kind);
            t3.rows.push_back(row);
        }
    }
    tables.push_back(t3);

    TableSpec t4{"table_IV", "Daily strategy 10-1 returns by time of day (bp)", "slice", {}, {}};
    std::vector<std::string> slices{"open"};
    for (int s = 1; s < per_day - 1; ++s) slices.push_back(slot_slice(s));
    slices.push_back("close");
    slices.push_back("mid");
    slices.push_back("mid=slot_avg");
    for (const auto& s : slices) {
        AxisEntry row = axis(s);
        row.slice = s;
        row.item = "10-1";
        t4.rows.push_back(row);
    }
    for (int d = 1; d <= days; ++d) {
        t4.columns.push_back(AxisEntry{"Day " + std::to_string(d), day_strategy(d, "daily"), {}, {}, Measure::Mean});
    }
    tables.push_back(t4);

    // Table V: price and trade-count filters.
    TableSpec t5{"table_V", "Daily strategy 10-1 returns with liquidity filters (bp)", "strategy", {}, {}};
    t5.columns = {AxisEntry{"10-1", {}, "all", "10-1", Measure::Mean},
                  AxisEntry{"t", {}, "all", "10-1", Measure::TStat},
                  AxisEntry{"n", {}, "all", "10-1", Measure::Count}};
    for (int d = 1; d <= days; ++d) {
        for (auto [suffix, label] : {std::pair{"daily", "all stocks"}, std::pair{"daily_price", "price filter"},
                                     std::pair{"daily_trades", "trade filter"}}) {
            AxisEntry row = axis("Day " + std::to_string(d) + " " + label);
            row.series = day_strategy(d, suffix);
            t5.rows.push_back(row);
        }
    }
    tables.push_back(t5);

    TableSpec t6{"table_VI", "Daily strategy 10-1 returns by size tercile (bp)", "strategy", {}, {}};
    for (std::string_view g : {"S", "M", "L"}) {
        const std::string slice = "size=" + std::string(g);
        t6.columns.push_back(AxisEntry{slice, {}, slice, "10-1", Measure::Mean});
        t6.columns.push_back(AxisEntry{"t(" + slice + ")", {}, slice, "10-1", Measure::TStat});
    }
    for (std::string_view f : {"0", "1"}) {
        const std::string slice = "sp500=" + std::string(f);
        t6.columns.push_back(AxisEntry{slice, {}, slice, "10-1", Measure::Mean});
        t6.columns.push_back(AxisEntry{"t(" + slice + ")", {}, slice, "10-1", Measure::TStat});
    }
    for (int d = 1; d <= days; ++d) {
        AxisEntry row = axis("Day " + std::to_string(d));
        row.series = day_strategy(d, "daily");
        t6.rows.push_back(row);
    }
    tables.push_back(t6);

    TableSpec t7{"table_VII", "Spread-crossing daily strategy 10-1 returns (bp)", "strategy", {}, {}};
    for (std::string_view slice : {"all", "size=S", "size=M", "size=L"}) {
        t7.columns.push_back(AxisEntry{std::string(slice), {}, std::string(slice), "10-1", Measure::Mean});
        t7.columns.push_back(
            AxisEntry{"t(" + std::string(slice) + ")", {}, std::string(slice), "10-1", Measure::TStat});
    }
    for (int d = 1; d <= days; ++d) {
        AxisEntry row = axis("Day " + std::to_string(d));
        row.series = day_strategy(d, "daily_cross");
        t7.rows.push_back(row);
    }
    tables.push_back(t7);

    TableSpec t8{"table_VIII", "Robustness: raw, Winsorized and Dimson-adjusted 10-1 returns (bp)", "strategy", {}, {}};
    t8.columns = {AxisEntry{"10-1", {}, "all", "10-1", Measure::Mean}, AxisEntry{"t", {}, "all", "10-1", Measure::TStat}};
    for (int d = 1; d <= days; ++d) {
        for (auto [suffix, label] : {std::pair{"daily", "raw"}, std::pair{"daily_wins", "winsorized"},
                                     std::pair{"nondaily", "nondaily raw"}, std::pair{"nondaily_wins", "nondaily winsorized"},
                                     std::pair{"daily_dimson", "Dimson-adjusted"}}) {
            AxisEntry row = axis("Day " + std::to_string(d) + " " + label);
            row.series = day_strategy(d, suffix);
            t8.rows.push_back(row);
        }
    }
    tables.push_back(t8);
    return tables;
}

struct FigureSpec {
    std::string file;
    std::vector<std::string> series;
};

std::vector<FigureSpec> standard_figures(int per_day) {
    std::vector<FigureSpec> figs{
        {"fig1_returns.csv", {"txn"}},
        {"fig3_quote_returns.csv", {"txn", "bid", "ask", "mid"}},
        {"fig4_time_of_day.csv", {}},
        {"fig5_volume.csv", {"dlog_volume", "dlog_small_volume", "dlog_large_volume", "d_order_imbalance"}},
        {"fig_volatility_spread.csv", {"pct_abs_return", "pct_rel_spread"}},
        {"fig6_controls.csv",
         {"controlled_gamma", "controlled_dlog_volume", "controlled_pct_abs_return", "controlled_pct_rel_spread",
          "controlled_d_order_imbalance"}},
        {"fig_joint.csv", {"joint_txn"}},
    };
    for (int s = 0; s < per_day; ++s) figs[2].series.push_back("txn_" + slot_slice(s));
    return figs;
}

}  // namespace

// ---- configuration ------------------------------------------------------

ConfigEntries parse_config_text(std::string_view text, std::string_view origin) {
    ConfigEntries entries;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(std::string(line), std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
        }
        entries.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return entries;
}

ConfigEntries read_config_file(const fs::path& path) {
    require_path(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.string());
}

const ConfigEntries& default_config_entries() {
    static const ConfigEntries defaults{
        {"out", "out"},
        {"data.trades", ""},
        {"data.quotes", ""},
        {"data.meta", ""},
        {"data.calendar", ""},
        {"threads", "1"},
        {"interval", "30m"},
        {"timezone", "America/New_York"},
        {"from", ""},
        {"to", ""},
        {"winsorize", "off"},
        {"winsorize.level", "0.01"},
        {"dimson", "off"},
        {"dimson.leads_lags", "13"},
        {"cost_mode", "raw"},
        {"seed", "1"},
        {"sim.n_symbols", "100"},
        {"sim.n_days", "20"},
        {"sim.first_date", "2004-01-05"},
        {"sim.volatility", "0.001"},
        {"sim.spread", "0.02"},
        {"sim.bounce_prob", "1"},
        {"sim.injection_bp", "0"},
        {"sim.injection_days", "40"},
        {"sim.injection_slot", ""},
        {"sim.shock", "0"},
        {"sim.volume_amplitude", "0"},
        {"sim.trades_per_interval", "2"},
        {"sim.large_prob", "0.1"},
        {"sim.price_low", "20"},
        {"sim.price_high", "80"},
        {"respond.max_lag", "0"},
        {"respond.multi_lag", "off"},
        {"respond.newey_west", "0"},
        {"deciles.days", "5"},
        {"deciles.min_price", "5"},
        {"deciles.min_trades", "10"},
        {"deciles.max_spread", "0.001"},
        {"bars.signed_trades", "off"},
    };
    return defaults;
}

std::uint64_t RunConfig::hash() const {
    std::string canonical;
    for (const auto& [key, value] : entries) canonical += key + "=" + value + "\n";
    return fnv1a64(canonical);
}

RunConfig make_run_config(const ConfigEntries& file_entries, const ConfigEntries& overrides) {
    std::map<std::string, std::string> values(default_config_entries().begin(), default_config_entries().end());
    for (const auto* source : {&file_entries, &overrides}) {
        for (const auto& [key, value] : *source) {
            auto it = values.find(key);
            if (it == values.end()) throw ConfigError(key, "unknown key");
            it->second = value;
        }
    }
    auto get = [&](const char* key) -> const std::string& { return values.at(key); };

    RunConfig c;
    c.out = get("out");
    if (c.out.empty()) throw ConfigError("out", "must not be empty");
    const Layout layout(c.out);
    auto data_path = [&](const char* key, const char* file) {
        const auto& v = get(key);
        return v.empty() ? layout.data / file : fs::path(v);
    };
    c.trades = data_path("data.trades", "trades.csv");
    c.quotes = data_path("data.quotes", "quotes.csv");
    c.meta = data_path("data.meta", "meta.csv");
    c.calendar = data_path("data.calendar", "calendar.txt");

    c.threads = parse_integer<int>("threads", get("threads"), 1, 1024);
    const auto& interval = get("interval");
    if (interval == "30m") {
        c.width_minutes = 30;
    } else if (interval == "5m") {
        c.width_minutes = 5;
    } else {
        throw ConfigError("interval", "expected 30m|5m, got '" + interval + "'");
    }
    const auto tz = parse_time_zone(get("timezone"));
    if (!tz) throw ConfigError("timezone", "expected America/New_York|UTC");
    c.time_zone = *tz;
    c.from = parse_date_key("from", get("from"));
    c.to = parse_date_key("to", get("to"));
    if (c.from && c.to && *c.from > *c.to) throw ConfigError("from", "after 'to'");

    c.winsorize = parse_switch("winsorize", get("winsorize"));
    c.winsorize_level = parse_number("winsorize.level", get("winsorize.level"));
    if (!(c.winsorize_level > 0 && c.winsorize_level < 0.5)) throw ConfigError("winsorize.level", "must lie in (0, 0.5)");
    c.dimson = parse_switch("dimson", get("dimson"));
    c.dimson_leads_lags = parse_integer<int>("dimson.leads_lags", get("dimson.leads_lags"), 0, 200);
    const auto& cost = get("cost_mode");
    if (cost == "raw") {
        c.cost_mode = CostMode::Raw;
    } else if (cost == "cross") {
        c.cost_mode = CostMode::CrossSpread;
    } else {
        throw ConfigError("cost_mode", "expected raw|cross, got '" + cost + "'");
    }
    c.seed = parse_integer<std::uint64_t>("seed", get("seed"), 0, UINT64_MAX);

    SimConfig& s = c.sim;
    s.n_symbols = parse_integer<std::size_t>("sim.n_symbols", get("sim.n_symbols"), 1, 999'999);
    s.n_days = parse_integer<std::size_t>("sim.n_days", get("sim.n_days"), 1, 100'000);
    const auto first = parse_date_key("sim.first_date", get("sim.first_date"));
    if (!first) throw ConfigError("sim.first_date", "required");
    s.first_date = *first;
    s.intervals_per_day = c.intervals_per_day();
    s.volatility = parse_number("sim.volatility", get("sim.volatility"));
    s.spread = parse_number("sim.spread", get("sim.spread"));
    s.bounce_prob = parse_number("sim.bounce_prob", get("sim.bounce_prob"));
    s.injection.amplitude_bp = parse_number("sim.injection_bp", get("sim.injection_bp"));
    s.injection.persistence_days = parse_integer<int>("sim.injection_days", get("sim.injection_days"), 1, 100'000);
    if (!get("sim.injection_slot").empty()) {
        s.injection.slot = parse_integer<int>("sim.injection_slot", get("sim.injection_slot"), 0, s.intervals_per_day - 1);
    }
    s.shock_magnitude = parse_number("sim.shock", get("sim.shock"));
    s.volume_amplitude = parse_number("sim.volume_amplitude", get("sim.volume_amplitude"));
    s.trades_per_interval = parse_number("sim.trades_per_interval", get("sim.trades_per_interval"));
    s.large_trade_prob = parse_number("sim.large_prob", get("sim.large_prob"));
    s.price_low = parse_number("sim.price_low", get("sim.price_low"));
    s.price_high = parse_number("sim.price_high", get("sim.price_high"));
    s.seed = c.seed;
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        throw ConfigError(what.substr(0, what.find(':')), what.substr(what.find(':') + 2));
    }

    c.max_lag = parse_integer<int>("respond.max_lag", get("respond.max_lag"), 0, 100'000);
    c.multi_lag = parse_switch("respond.multi_lag", get("respond.multi_lag"));
    c.newey_west_lags = parse_integer<int>("respond.newey_west", get("respond.newey_west"), 0, 1000);
    c.strategy_days = parse_integer<int>("deciles.days", get("deciles.days"), 1, 100);
    c.min_price = parse_number("deciles.min_price", get("deciles.min_price"));
    c.min_avg_trades = parse_number("deciles.min_trades", get("deciles.min_trades"));
    c.max_rel_spread = parse_number("deciles.max_spread", get("deciles.max_spread"));
    c.signed_trades = parse_switch("bars.signed_trades", get("bars.signed_trades"));

    // The output location does not affect results, so it stays out of the
    // hash and the manifest.
    for (const auto& [key, value] : values) {
        if (key != "out") c.entries.emplace_back(key, value);
    }
    return c;
}

// ---- commands -----------------------------------------------------------

void cmd_simulate(const RunConfig& config, std::ostream& log) {
    const Layout layout(config.out);
    const SimFiles files = write_simulation(config.sim, layout.data, config.threads);
    log << "simulate: " << config.sim.n_symbols << " symbols x " << config.sim.n_days << " days, "
        << files.trade_count << " trades, " << files.quote_count << " quotes -> " << layout.data.string() << '\n';
    write_run_manifest(config, "simulate");
}

void cmd_bars(const RunConfig& config, std::ostream& log) {
    const Layout layout(config.out);
    require_path(config.trades);
    require_path(config.quotes);
    const TradingCalendar calendar = load_run_calendar(config);
    SymbolTable symbols;
    auto trades = load_trades(config.trades, calendar, symbols);
    auto quotes = load_quotes(config.quotes, calendar, symbols);
    log_stats(log, "trades", trades.stats);
    log_stats(log, "quotes", quotes.stats);

    const BarSet bars = build_bars(trades.ticks, quotes.ticks, symbols, calendar, config.threads);
    write_bar_export(bars, layout.bars / "bars.csv");
    write_bar_store(bars, layout.bars / "bar_store.csv");
    if (config.signed_trades) {
        const auto signed_trades = sign_trades(trades.ticks, quotes.ticks, config.threads);
        write_signed_trades(signed_trades, symbols, layout.bars / "signed_trades.csv");
    }
    {
        std::ofstream summary(layout.bars / "ingest.txt");
        log_stats(summary, "trades", trades.stats);
        log_stats(summary, "quotes", quotes.stats);
        summary << "symbols: " << bars.symbols.size() << "\nbars: " << bars.bar_count() << '\n';
    }
    log << "bars: " << bars.symbols.size() << " symbols, " << bars.bar_count() << " bars -> " << layout.bars.string()
        << '\n';
    write_run_manifest(config, "bars");
}

void cmd_respond(const RunConfig& config, std::ostream& log) {
    const Layout layout(config.out);
    const BarSet bars = load_run_bars(config);
    const int max_lag = config.effective_max_lag();
    const int per_day = bars.calendar.intervals_per_day();
    const ResponseOptions options{config.threads, config.newey_west_lags};

    const PanelMatrix txn = txn_returns(bars);
    const DerivedPanels derived = derived_variables(bars, txn);
    const std::vector<std::pair<std::string, PanelMatrix>> panels{
        {"txn", txn},
        {"bid", quote_returns(bars, QuoteLeg::Bid)},
        {"ask", quote_returns(bars, QuoteLeg::Ask)},
        {"mid", quote_returns(bars, QuoteLeg::Mid)},
        {"dlog_volume", derived.dlog_volume},
        {"dlog_small_volume", derived.dlog_small_volume},
        {"dlog_large_volume", derived.dlog_large_volume},
        {"d_order_imbalance", derived.d_order_imbalance},
        {"pct_abs_return", derived.pct_abs_return},
        {"pct_rel_spread", derived.pct_rel_spread},
    };

    std::map<std::string, std::vector<CurvePoint>> curves;
    for (const auto& [name, panel] : panels) {
        auto& points = curves[name];
        for (int k = 1; k <= max_lag; ++k) {
            const ResponseCurve curve = lag_response(panel, k, options);
            points.push_back(to_curve_point(curve));
            if (name == "txn") {
                for (int s = 0; s < per_day; ++s) {
                    const FmStats fm = curve.conditional(
                        [per_day, s](std::int64_t t) { return t % per_day == s; }, config.newey_west_lags);
                    curves["txn_" + slot_slice(s)].push_back({k, fm.mean * 1e4, fm.t_stat, fm.n_periods});
                }
            }
        }
    }

    const std::vector<std::pair<std::string, const PanelMatrix*>> controls{
        {"dlog_volume", &derived.dlog_volume},
        {"pct_abs_return", &derived.pct_abs_return},
        {"pct_rel_spread", &derived.pct_rel_spread},
        {"d_order_imbalance", &derived.d_order_imbalance},
    };
    std::vector<const PanelMatrix*> control_ptrs;
    for (const auto& c : controls) control_ptrs.push_back(c.second);
    for (int k = 1; k <= max_lag; ++k) {
        const ControlledResponse r = controlled_response(txn, control_ptrs, k, options);
        curves["controlled_gamma"].push_back(to_curve_point(r.gamma));
        for (std::size_t j = 0; j < controls.size(); ++j) {
            curves["controlled_" + controls[j].first].push_back(to_curve_point(r.deltas[j]));
        }
    }

    if (config.multi_lag) {
        for (const auto& curve : multi_lag_response(txn, max_lag, options)) {
            curves["joint_txn"].push_back(to_curve_point(curve));
        }
    }

    for (const auto& [name, points] : curves) write_curve_csv(points, layout.curves / (name + ".csv"));
    log << "respond: " << curves.size() << " curves x " << max_lag << " lags -> " << layout.curves.string() << '\n';
    write_run_manifest(config, "respond");
}

void cmd_deciles(const RunConfig& config, std::ostream& log) {
    const Layout layout(config.out);
    const BarSet bars = load_run_bars(config);
    MetaTable meta;
    if (fs::exists(config.meta)) {
        LoadStats stats;
        meta = load_meta(config.meta, &stats);
        log_stats(log, "meta", stats);
    } else {
        log << "meta: " << config.meta.string() << " not found; size and index filters yield empty slices\n";
    }

    const MarketPanels panels = build_market_panels(bars);
    const FilterContext context(panels, meta);
    const TradingCalendar& cal = panels.calendar;
    const int per_day = cal.intervals_per_day();
    const auto slices = standard_time_slices(cal);
    const TimeSlice all_slice = *parse_time_slice("all", cal);

    std::optional<DimsonResult> dimson;
    if (config.dimson) {
        const auto market = equal_weighted_market(panels.returns);
        dimson = dimson_alpha(panels.returns, market, config.dimson_leads_lags, config.threads);
    }

    std::vector<DecileRecord> records;
    auto add = [&](const std::string& strategy, const std::string& slice, const SliceStats& stats) {
        auto r = decile_records(strategy, slice, stats);
        records.insert(records.end(), r.begin(), r.end());
    };
    auto run = [&](const StrategySpec& spec, std::optional<double> wins = std::nullopt,
                   const PanelMatrix* holding = nullptr) {
        StrategyOptions opts;
        opts.threads = config.threads;
        opts.winsorize_level = wins;
        opts.holding_returns = holding;
        return spec.cost == CostMode::CrossSpread ? cost_adjusted_spread(spec, context, opts)
                                                  : strategy_returns(spec, context, opts);
    };
    const std::optional<double> wins =
        config.winsorize ? std::optional<double>(config.winsorize_level) : std::nullopt;

    for (int d = 1; d <= config.strategy_days; ++d) {
        const auto daily_lags = LagStructure::for_day(LagStructure::Kind::Daily, d, per_day);
        const auto nondaily_lags = LagStructure::for_day(LagStructure::Kind::Nondaily, d, per_day);
        const std::string daily = day_strategy(d, "daily");
        const std::string nondaily = day_strategy(d, "nondaily");

        const DecileReport base = run({daily, daily_lags, CostMode::Raw, {}});
        for (const auto& slice : slices) add(daily, slice.key, slice_stats(base, slice, cal));
        const double slot_avg = midday_average_of_slot_means(base, cal);
        records.push_back({daily, "mid=slot_avg", "10-1", slot_avg * 1e4, std::nan(""),
                           std::isnan(slot_avg) ? 0u : static_cast<std::size_t>(std::max(0, per_day - 2))});

        const DecileReport nd = run({nondaily, nondaily_lags, CostMode::Raw, {}});
        add(nondaily, "all", slice_stats(nd, all_slice, cal));
        if (wins) {
            add(daily + "_wins", "all", slice_stats(base, all_slice, cal, wins));
            add(nondaily + "_wins", "all", slice_stats(nd, all_slice, cal, wins));
        }

        FilterSet price;
        price.min_price = config.min_price;
        add(daily + "_price", "all", slice_stats(run({daily, daily_lags, CostMode::Raw, price}), all_slice, cal));
        FilterSet active;
        active.min_avg_trades = config.min_avg_trades;
        add(daily + "_trades", "all", slice_stats(run({daily, daily_lags, CostMode::Raw, active}), all_slice, cal));

        const std::pair<SizeGroup, const char*> groups[] = {
            {SizeGroup::Small, "size=S"}, {SizeGroup::Medium, "size=M"}, {SizeGroup::Large, "size=L"}};
        for (const auto& [group, key] : groups) {
            FilterSet f;
            f.size = group;
            add(daily, key, slice_stats(run({daily, daily_lags, CostMode::Raw, f}), all_slice, cal));
        }
        for (bool member : {false, true}) {
            FilterSet f;
            f.sp500 = member;
            add(daily, member ? "sp500=1" : "sp500=0",
                slice_stats(run({daily, daily_lags, CostMode::Raw, f}), all_slice, cal));
        }

        if (config.cost_mode == CostMode::CrossSpread) {
            const std::string cross = daily + "_cross";
            FilterSet f;
            f.max_rel_spread = config.max_rel_spread;
            add(cross, "all", slice_stats(run({cross, daily_lags, CostMode::CrossSpread, f}), all_slice, cal));
            for (const auto& [group, key] : groups) {
                FilterSet g = f;
                g.size = group;
                add(cross, key, slice_stats(run({cross, daily_lags, CostMode::CrossSpread, g}), all_slice, cal));
            }
        }
        if (dimson) {
            const std::string adj = daily + "_dimson";
            add(adj, "all",
                slice_stats(run({adj, daily_lags, CostMode::Raw, {}}, std::nullopt, &dimson->adjusted), all_slice, cal));
        }
    }

    write_decile_csv(records, layout.deciles / "deciles.csv");
    log << "deciles: " << records.size() << " cells -> " << (layout.deciles / "deciles.csv").string() << '\n';
    write_run_manifest(config, "deciles");
}

void cmd_report(const RunConfig& config, std::ostream& log) {
    const Layout layout(config.out);
    ResultStore results;
    std::map<std::string, NamedCurve> curves;
    if (fs::is_directory(layout.curves)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(layout.curves)) {
            if (entry.path().extension() == ".csv") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            NamedCurve curve{f.stem().string(), read_curve_csv(f)};
            results.add_curve(curve);
            curves.emplace(curve.series, std::move(curve));
        }
    }
    const fs::path decile_file = layout.deciles / "deciles.csv";
    if (fs::exists(decile_file)) results.add_deciles(read_decile_csv(decile_file));
    if (results.empty()) throw MissingPathError(layout.curves);

    std::size_t n_tables = 0;
    for (const auto& spec : standard_tables(config)) {
        emit_table(spec, results, layout.tables);
        ++n_tables;
    }
    std::size_t n_figures = 0;
    for (const auto& fig : standard_figures(config.intervals_per_day())) {
        std::vector<NamedCurve> selected;
        for (const auto& name : fig.series) {
            if (auto it = curves.find(name); it != curves.end()) selected.push_back(it->second);
        }
        if (selected.empty()) continue;
        emit_figure_data(selected, layout.figures / fig.file);
        ++n_figures;
    }
    log << "report: " << n_tables << " tables, " << n_figures << " figure files -> " << config.out.string() << '\n';
    write_run_manifest(config, "report");
}

// ---- entry point --------------------------------------------------------

namespace {

void print_usage(std::ostream& out) {
    out << "usage: intraday <simulate|bars|respond|deciles|report|all> [--config FILE] [--KEY VALUE]...\n"
           "\n"
           "flags: --config --threads --out --interval {30m|5m} --from YYYY-MM-DD --to YYYY-MM-DD\n"
           "       --winsorize {on|off} --cost-mode {raw|cross} --seed U64\n"
           "any configuration key may be overridden as --key value; keys and defaults:\n";
    for (const auto& [key, value] : default_config_entries()) out << "  " << key << " = " << value << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    if (argc < 2) {
        print_usage(err);
        return 2;
    }
    const std::string command = argv[1];
    if (command == "--help" || command == "-h" || command == "help") {
        print_usage(out);
        return 0;
    }
    using Command = void (*)(const RunConfig&, std::ostream&);
    const std::map<std::string, std::vector<Command>> commands{
        {"simulate", {cmd_simulate}},
        {"bars", {cmd_bars}},
        {"respond", {cmd_respond}},
        {"deciles", {cmd_deciles}},
        {"report", {cmd_report}},
        {"all", {cmd_simulate, cmd_bars, cmd_respond, cmd_deciles, cmd_report}},
    };
    const auto found = commands.find(command);
    if (found == commands.end()) {
        err << "error: unknown command '" << command << "'\n";
        print_usage(err);
        return 2;
    }

    try {
        std::optional<fs::path> config_file;
        ConfigEntries overrides;
        for (int i = 2; i < argc; ++i) {
            std::string arg = argv[i];
            if (!arg.starts_with("--")) throw ConfigError(arg, "expected --key value");
            arg.erase(0, 2);
            std::string value;
            if (const auto eq = arg.find('='); eq != std::string::npos) {
                value = arg.substr(eq + 1);
                arg.erase(eq);
            } else {
                if (i + 1 >= argc) throw ConfigError(arg, "missing value");
                value = argv[++i];
            }
            if (auto alias = flag_aliases().find(arg); alias != flag_aliases().end()) arg = alias->second;
            if (arg == "config") {
                config_file = value;
            } else {
                overrides.emplace_back(arg, value);
            }
        }
        const ConfigEntries file_entries = config_file ? read_config_file(*config_file) : ConfigEntries{};
        const RunConfig config = make_run_config(file_entries, overrides);
        for (Command cmd : found->second) cmd(config, out);
        return 0;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const MissingPathError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace intraday
