#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intraday/marketdata.hpp"
#include "intraday/signing.hpp"

namespace intraday {

// Trades of at least this many shares count as large.
inline constexpr std::int32_t kLargeTradeShares = 1000;

struct IntervalBar {
    std::uint32_t day{};
    std::uint32_t slot{};
    std::optional<Price> first_price;  // first trade in the interval
    std::optional<Price> last_price;
    std::optional<Price> open_bid;     // quote prevailing at interval start
    std::optional<Price> open_ask;
    std::optional<Price> close_bid;    // quote prevailing at interval end
    std::optional<Price> close_ask;
    std::int64_t volume{};
    std::int64_t small_volume{};
    std::int64_t large_volume{};
    std::int64_t buy_volume{};
    std::int64_t sell_volume{};
    std::int64_t trade_count{};

    bool empty() const { return trade_count == 0; }
    std::int64_t order_imbalance() const { return buy_volume - sell_volume; }
    std::optional<double> close_mid() const;
    // (ask - bid) / mid at interval start.
    std::optional<double> open_rel_spread() const;
};

// Bars for every (symbol, day, slot) cell that saw at least one in-session
// trade or quote. Rows are symbols in lexicographic order; each row is
// ordered by slot.
struct BarSet {
    TradingCalendar calendar;
    std::vector<std::string> symbols;
    std::vector<std::vector<IntervalBar>> rows;

    std::size_t bar_count() const;
    std::size_t num_periods() const { return calendar.num_periods(); }
    std::int64_t global_index(const IntervalBar& bar) const { return calendar.global_index({bar.day, bar.slot}); }
};

// Trades and quotes must be ordered by (symbol id, ts). Ticks outside the
// calendar's sessions are ignored.
BarSet build_bars(std::span<const TradeTick> trades, std::span<const QuoteTick> quotes, const SymbolTable& symbols,
                  const TradingCalendar& calendar, int threads = 1);

// Symbol x interval matrix of one variable, stored interval-major so each
// cross-section is contiguous. Missing cells hold NaN and are only ever
// tested through has()/is_missing().
class PanelMatrix {
public:
    PanelMatrix() = default;
    PanelMatrix(std::string tag, std::size_t n_symbols, std::size_t n_periods)
        : tag_(std::move(tag)), n_symbols_(n_symbols), n_periods_(n_periods),
          values_(n_symbols * n_periods, missing_value()) {}

    static constexpr double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
    static bool is_missing(double v) { return std::isnan(v); }

    const std::string& tag() const { return tag_; }
    void set_tag(std::string tag) { tag_ = std::move(tag); }
    std::size_t n_symbols() const { return n_symbols_; }
    std::size_t n_periods() const { return n_periods_; }

    double at(std::size_t symbol, std::size_t t) const { return values_[t * n_symbols_ + symbol]; }
    double& at(std::size_t symbol, std::size_t t) { return values_[t * n_symbols_ + symbol]; }
    bool has(std::size_t symbol, std::size_t t) const { return !is_missing(at(symbol, t)); }
    std::span<const double> cross_section(std::size_t t) const {
        return {values_.data() + t * n_symbols_, n_symbols_};
    }
    std::span<double> cross_section(std::size_t t) { return {values_.data() + t * n_symbols_, n_symbols_}; }
    const std::vector<double>& values() const { return values_; }

    bool same_grid(const PanelMatrix& other) const {
        return n_symbols_ == other.n_symbols_ && n_periods_ == other.n_periods_;
    }

private:
    std::string tag_;
    std::size_t n_symbols_{0};
    std::size_t n_periods_{0};
    std::vector<double> values_;
};

// Within-day transaction returns. Slot 0 is measured from the first trade
// of the day, so overnight moves never enter.
PanelMatrix txn_returns(const BarSet& bars);

enum class QuoteLeg { Bid, Ask, Mid };
PanelMatrix quote_returns(const BarSet& bars, QuoteLeg leg);

struct DerivedPanels {
    PanelMatrix dlog_volume;
    PanelMatrix d_order_imbalance;   // shares
    PanelMatrix pct_abs_return;      // |r(t)| / |r(t-1)| - 1
    PanelMatrix pct_rel_spread;      // open relative spread, same form
    PanelMatrix dlog_small_volume;
    PanelMatrix dlog_large_volume;
};

// Differences chain across the overnight boundary (slot 0 against the prior
// day's last slot). Zero denominators and empty bars give missing values.
DerivedPanels derived_variables(const BarSet& bars, const PanelMatrix& txn);

// Raw per-bar quantities on the panel grid.
enum class BarField {
    LastPrice,
    LastPriceCarried,  // most recent trade price at or before t, across days
    TradeCount,        // zero where no bar exists
    Volume,
    OrderImbalance,
    OpenRelSpread,
    OpenBid,
    OpenAsk,
    CloseBid,
    CloseAsk,
};
PanelMatrix bar_field_panel(const BarSet& bars, BarField field);

// symbol,date,slot,last,bid,ask,mid,rel_spread,volume,small_vol,large_vol,oi,trades
void write_bar_export(const BarSet& bars, const std::filesystem::path& path);

// Full-fidelity bar file used to pass bars between pipeline stages.
void write_bar_store(const BarSet& bars, const std::filesystem::path& path);
BarSet read_bar_store(const std::filesystem::path& path, const TradingCalendar& calendar);

// symbol,ts_ms,price,size,side
void write_signed_trades(std::span<const SignedTrade> trades, const SymbolTable& symbols,
                         const std::filesystem::path& path);

}  // namespace intraday
