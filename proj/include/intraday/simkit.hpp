#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intraday/marketdata.hpp"
#include "intraday/regression.hpp"

namespace intraday {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The whole
// stream is a pure function of (counter, key), so every draw can be
// addressed directly and reproduced in any language.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter counter, Key key);
};

// Sequential draws from one addressed Philox stream. The counter is laid out
// as (symbol, stream id, cell, block index); the key is the 64-bit seed.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint32_t symbol, std::uint32_t stream, std::uint32_t cell);

    std::uint32_t next_u32();
    double uniform();                      // (0, 1), 53-bit resolution
    double normal();                       // Box-Muller
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive
    std::uint32_t poisson(double mean);    // inversion
    bool bernoulli(double p) { return uniform() < p; }

private:
    Philox4x32::Key key_;
    Philox4x32::Counter counter_;
    Philox4x32::Counter buffer_{};
    int used_{4};
};

struct InjectionConfig {
    double amplitude_bp{0.0};      // cross-sectional sd of the injected mean
    int persistence_days{40};      // D: correlation (D - j) / D at j days
    std::optional<int> slot;       // restrict to one slot; all slots when unset
};

struct SimConfig {
    std::size_t n_symbols{100};
    std::size_t n_days{20};
    int intervals_per_day{13};     // 13 (30-minute) or 78 (5-minute)
    std::chrono::sys_days first_date{std::chrono::year{2004} / std::chrono::January / 5};
    double volatility{0.001};      // sd of the efficient mid return per interval
    double spread{0.02};           // full quoted spread, currency
    double bounce_prob{1.0};       // probability a trade prints at bid or ask
    InjectionConfig injection;
    double shock_magnitude{0.0};   // sd of a mid shock reverting next interval
    double volume_amplitude{0.0};  // log-intensity amplitude of slot volume pattern
    double trades_per_interval{2.0};
    double large_trade_prob{0.1};
    double price_low{20.0};
    double price_high{80.0};
    std::uint64_t seed{1};

    int width_minutes() const { return 390 / intervals_per_day; }
    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

inline constexpr double kQuoteTick = 1e-4;
inline constexpr std::int32_t kSmallTradeShares = 100;
inline constexpr std::int32_t kLargeTradeSharesSim = 2000;

struct SymbolPath {
    std::vector<TradeTick> trades;  // ts order
    std::vector<QuoteTick> quotes;  // ts order
};

std::string sim_symbol_name(std::size_t index);
TradingCalendar sim_calendar(const SimConfig& config);

// Ticks of one symbol; independent of every other symbol.
SymbolPath simulate_symbol(const SimConfig& config, const TradingCalendar& calendar, std::uint32_t symbol);

MetaTable simulate_meta(const SimConfig& config, const TradingCalendar& calendar);

struct SimMarket {
    TradingCalendar calendar;
    SymbolTable symbols;
    std::vector<TradeTick> trades;  // (symbol id, ts) order
    std::vector<QuoteTick> quotes;
    MetaTable meta;
};

SimMarket simulate(const SimConfig& config, int threads = 1);

struct SimFiles {
    std::filesystem::path trades;
    std::filesystem::path quotes;
    std::filesystem::path meta;
    std::filesystem::path calendar;
    std::size_t trade_count{};
    std::size_t quote_count{};
};

// Streams the market to trades.csv, quotes.csv, meta.csv and calendar.txt
// in `dir`, generating symbols in parallel blocks.
SimFiles write_simulation(const SimConfig& config, const std::filesystem::path& dir, int threads = 1);

// Reference OLS: normal equations in extended precision solved by Gaussian
// elimination with partial pivoting.
struct OracleFit {
    bool singular{false};
    std::vector<double> coef;
};
OracleFit oracle_ols(std::span<const double> y, const DesignMatrix& x);

enum class ReturnKind { Transaction, Midpoint };

// Closed-form moments of the simulated returns (ignoring quote rounding and
// the drift of price levels).
double expected_return_variance(const SimConfig& config, ReturnKind kind = ReturnKind::Transaction);
double expected_lag_slope(const SimConfig& config, int lag, ReturnKind kind = ReturnKind::Transaction);

// Mean of the top decile of a standard normal: phi(z_0.9) / 0.1.
inline constexpr double kTopDecileNormalMean = 1.7549833193248680;

// Expected 10-1 spread of a daily strategy at `lag` under joint normality.
double expected_decile_spread(const SimConfig& config, int lag);

// Expected cross-spread 10-1 return in a world with no price moves: each
// leg pays the quoted spread on entry and exit, averaged over price levels.
double expected_cross_spread_cost(const SimConfig& config);

}  // namespace intraday
