#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intraday/bars.hpp"
#include "intraday/regression.hpp"

namespace intraday {

inline constexpr int kDeciles = 10;

// Ranks by (value, symbol id) and splits n = 10q + r into deciles 0..9 where
// the r lowest deciles get q + 1 members. nullopt when n < 10.
std::optional<std::vector<int>> decile_assign(std::span<const double> signal, std::span<const std::uint32_t> symbol_ids);

struct LagStructure {
    enum class Kind { Daily, Nondaily };
    Kind kind{Kind::Daily};
    std::vector<int> lags;
    std::size_t min_present{1};

    static LagStructure daily(int k);
    // Window of lags [first, last]; at least two thirds must be present.
    static LagStructure nondaily(int first, int last);
    // Day-d strategies for a calendar with P intervals per day:
    // daily uses lag d*P, nondaily uses lags (d-1)*P+1 .. d*P-1.
    static LagStructure for_day(Kind kind, int day, int intervals_per_day);
    int max_lag() const;
};

enum class CostMode { Raw, CrossSpread };
enum class SizeGroup { Small = 0, Medium = 1, Large = 2 };

struct FilterSet {
    std::optional<double> min_price;          // currency, at formation
    std::optional<double> min_avg_trades;     // per interval over the prior calendar month
    std::optional<double> max_rel_spread;     // dimensionless, at the start of the held interval
    std::optional<SizeGroup> size;            // tercile of prior year-end market cap
    std::optional<bool> sp500;
};

struct StrategySpec {
    std::string name;
    LagStructure lags;
    CostMode cost{CostMode::Raw};
    FilterSet filters;
};

// Everything strategies and filters read, aligned on one panel grid.
struct MarketPanels {
    TradingCalendar calendar;
    std::vector<std::string> symbols;
    PanelMatrix returns;          // formation signal source (txn returns)
    PanelMatrix price_carried;
    PanelMatrix trade_count;
    PanelMatrix open_rel_spread;
    PanelMatrix open_bid;
    PanelMatrix open_ask;
    PanelMatrix close_bid;
    PanelMatrix close_ask;
};

MarketPanels build_market_panels(const BarSet& bars);

// Precomputed per-symbol inputs of the metadata and activity filters.
class FilterContext {
public:
    FilterContext(const MarketPanels& panels, const MetaTable& meta);

    // Average trades per interval over the calendar month before day's month.
    std::optional<double> prior_month_avg_trades(std::size_t symbol, std::size_t day) const;
    std::optional<SizeGroup> size_group(std::size_t symbol, int year) const;
    std::optional<bool> sp500(std::size_t symbol, int year) const;
    const MarketPanels& panels() const { return *panels_; }

private:
    const MarketPanels* panels_;
    std::vector<const SecurityMeta*> meta_;  // per symbol, may be null
    std::vector<int> month_keys_;            // distinct month keys in calendar order
    std::vector<std::vector<double>> month_avg_;  // [month index][symbol]
    std::vector<int> day_month_index_;
    std::map<int, std::vector<std::optional<SizeGroup>>> terciles_;  // by cap year
};

enum class FilterKind { MinPrice, MinAvgTrades, MaxRelSpread, Size, Sp500 };

// Active filters in evaluation order.
std::vector<FilterKind> active_filters(const FilterSet& filters);

// Symbols eligible at holding interval t. Filters are independent predicates,
// so the result does not depend on `order` (defaults to active_filters()).
std::vector<char> apply_filters(const FilterSet& filters, const FilterContext& context, std::size_t t,
                                std::span<const FilterKind> order = {});

struct DecilePeriod {
    std::int64_t t{};
    std::array<double, kDeciles> mean{};
    std::array<std::uint32_t, kDeciles> count{};
    double spread{};  // mean[9] - mean[0]
};

struct DecileReport {
    std::string strategy;
    CostMode cost{CostMode::Raw};
    std::vector<DecilePeriod> periods;  // ascending t
    std::array<FmStats, kDeciles> decile_fm{};
    FmStats spread_fm;
    std::size_t skipped{};  // periods with fewer than 10 eligible symbols
};

struct StrategyOptions {
    int threads{1};
    // Holding-period returns for raw mode; defaults to panels.returns.
    const PanelMatrix* holding_returns{nullptr};
    // Monthly winsorization of each series before FM aggregation.
    std::optional<double> winsorize_level;
};

DecileReport strategy_returns(const StrategySpec& spec, const FilterContext& context,
                              const StrategyOptions& options = {});

// Cross-spread variant: buys at the ask and sells at the bid within the held
// interval; stocks with an opening relative spread above 10 bp are dropped
// unless the spec sets its own limit.
DecileReport cost_adjusted_spread(StrategySpec spec, const FilterContext& context,
                                  const StrategyOptions& options = {});

inline constexpr double kDefaultMaxRelSpread = 0.0010;

// Time-of-sample conditioning of a decile report.
struct TimeSlice {
    std::string key;  // e.g. "slot=3", "open", "weekday=2", "tom=1", "all"
    std::function<bool(std::int64_t)> keep;
};

std::vector<TimeSlice> standard_time_slices(const TradingCalendar& calendar);
std::optional<TimeSlice> parse_time_slice(std::string_view key, const TradingCalendar& calendar);

struct SliceStats {
    std::array<FmStats, kDeciles> decile_fm{};
    FmStats spread_fm;
};

SliceStats slice_stats(const DecileReport& report, const TimeSlice& slice, const TradingCalendar& calendar,
                       std::optional<double> winsorize_level = std::nullopt);

// Average of per-slot FM means over the mid-day slots (pooled alternative
// is the "mid" slice).
double midday_average_of_slot_means(const DecileReport& report, const TradingCalendar& calendar);

}  // namespace intraday
