#include "intraday/simkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "csv.hpp"
#include "intraday/parallel.hpp"

namespace intraday {

namespace {

constexpr std::uint32_t kStreamInjection = 0;
constexpr std::uint32_t kStreamVolume = 1;
constexpr std::uint32_t kStreamInterval = 2;
constexpr std::uint32_t kStreamSymbol = 3;
constexpr std::uint32_t kStreamShock = 4;

constexpr std::uint32_t kCellPriceLevel = 0;
constexpr std::uint32_t kCellCapBase = 1000;  // + (year - 1900)

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

std::int64_t round_to_tick_micros(double price) {
    constexpr double ticks_per_unit = 1.0 / kQuoteTick;
    constexpr std::int64_t micros_per_tick = static_cast<std::int64_t>(Price::kScale * kQuoteTick + 0.5);
    return static_cast<std::int64_t>(std::nearbyint(price * ticks_per_unit)) * micros_per_tick;
}

std::uint32_t cap_cell(int year) { return kCellCapBase + static_cast<std::uint32_t>(year - 1900); }

double year_end_cap(const SimConfig& config, std::uint32_t symbol, int year) {
    RandomStream rng(config.seed, symbol, kStreamSymbol, cap_cell(year));
    return std::exp(std::log(1e9) + rng.normal());
}

// Mean of (m - h)/(m + h) and (m + h)/(m - h) for m uniform on [lo, hi].
double mean_ratio(double lo, double hi, double signed_h) {
    if (hi - lo < 1e-12) return (lo - signed_h) / (lo + signed_h);
    // (m - s)/(m + s) = 1 - 2s/(m + s)
    return 1.0 - 2.0 * signed_h * std::log((hi + signed_h) / (lo + signed_h)) / (hi - lo);
}

double mean_inverse_square_price(const SimConfig& config) {
    return 1.0 / (config.price_low * config.price_high);
}

void append_price(std::string& out, Price p) {
    std::int64_t micros = p.micros();
    if (micros < 0) {
        out.push_back('-');
        micros = -micros;
    }
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), micros / Price::kScale);
    out.append(buf, ptr);
    std::int64_t frac = micros % Price::kScale;
    char digits[6];
    for (int i = 5; i >= 0; --i) {
        digits[i] = static_cast<char>('0' + frac % 10);
        frac /= 10;
    }
    int keep = 6;
    while (keep > 2 && digits[keep - 1] == '0') --keep;
    out.push_back('.');
    out.append(digits, static_cast<std::size_t>(keep));
}

template <class Int>
void append_int(std::string& out, Int v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint32_t symbol, std::uint32_t stream, std::uint32_t cell)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{symbol, stream, cell, 0} {}

std::uint32_t RandomStream::next_u32() {
    if (used_ == 4) {
        buffer_ = Philox4x32::block(counter_, key_);
        ++counter_[3];
        used_ = 0;
    }
    return buffer_[static_cast<std::size_t>(used_++)];
}

double RandomStream::uniform() {
    const std::uint64_t a = next_u32() >> 5;
    const std::uint64_t b = next_u32() >> 6;
    return (static_cast<double>((a << 26) | b) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const auto span = static_cast<double>(hi - lo + 1);
    const auto offset = static_cast<std::int64_t>(uniform() * span);
    return lo + std::min<std::int64_t>(offset, hi - lo);
}

std::uint32_t RandomStream::poisson(double mean) {
    if (mean <= 0) return 0;
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint32_t k = 0;
    while (u > cdf && k < 10'000) {
        ++k;
        p *= mean / k;
        cdf += p;
        if (p == 0.0 && static_cast<double>(k) > mean) break;
    }
    return k;
}

void SimConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("sim." + field + ": " + why);
    };
    if (n_symbols == 0) fail("n_symbols", "must be positive");
    if (n_symbols > 999'999) fail("n_symbols", "at most 999999");
    if (n_days == 0) fail("n_days", "must be positive");
    if (intervals_per_day != 13 && intervals_per_day != 78) fail("intervals_per_day", "must be 13 or 78");
    if (!(volatility >= 0) || !std::isfinite(volatility)) fail("volatility", "must be finite and >= 0");
    if (!(spread >= 0) || !std::isfinite(spread)) fail("spread", "must be finite and >= 0");
    if (!(bounce_prob >= 0 && bounce_prob <= 1)) fail("bounce_prob", "must lie in [0, 1]");
    if (!std::isfinite(injection.amplitude_bp)) fail("injection_bp", "must be finite");
    if (injection.persistence_days < 1) fail("injection_days", "must be at least 1");
    if (injection.slot && (*injection.slot < 0 || *injection.slot >= intervals_per_day)) {
        fail("injection_slot", "outside the trading day");
    }
    if (!(shock_magnitude >= 0) || !std::isfinite(shock_magnitude)) fail("shock", "must be finite and >= 0");
    if (!std::isfinite(volume_amplitude)) fail("volume_amplitude", "must be finite");
    if (!(trades_per_interval >= 0 && trades_per_interval <= 500)) fail("trades_per_interval", "must lie in [0, 500]");
    if (!(large_trade_prob >= 0 && large_trade_prob <= 1)) fail("large_prob", "must lie in [0, 1]");
    if (!(price_low > 0) || !(price_high >= price_low) || !std::isfinite(price_high)) {
        fail("price_low", "need 0 < price_low <= price_high");
    }
    if (price_low - spread / 2 < 10 * kQuoteTick) fail("spread", "too wide for price_low");
}

std::string sim_symbol_name(std::size_t index) {
    std::string digits = std::to_string(index);
    return "S" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

TradingCalendar sim_calendar(const SimConfig& config) {
    return TradingCalendar::weekdays(config.first_date, config.n_days, config.width_minutes());
}

SymbolPath simulate_symbol(const SimConfig& config, const TradingCalendar& calendar, std::uint32_t symbol) {
    const std::size_t days = calendar.num_days();
    const auto per_day = static_cast<std::size_t>(calendar.intervals_per_day());
    const double half_spread = config.spread / 2;
    const std::uint64_t seed = config.seed;

    SymbolPath path;
    path.quotes.reserve(days * (per_day + 1));
    path.trades.reserve(static_cast<std::size_t>(static_cast<double>(days * per_day) *
                                                 (std::max(2.0, config.trades_per_interval) + 1.0)));

    double mid = 0;
    {
        RandomStream rng(seed, symbol, kStreamSymbol, kCellPriceLevel);
        mid = config.price_low + (config.price_high - config.price_low) * rng.uniform();
    }

    std::vector<double> intensity(per_day, config.trades_per_interval);
    if (config.volume_amplitude != 0.0) {
        for (std::size_t s = 0; s < per_day; ++s) {
            RandomStream rng(seed, symbol, kStreamVolume, static_cast<std::uint32_t>(s));
            intensity[s] = config.trades_per_interval * std::exp(config.volume_amplitude * rng.normal());
        }
    }

    // Injected slot means: moving sums of D iid normals per slot.
    const auto window = static_cast<std::size_t>(config.injection.persistence_days);
    const bool injecting = config.injection.amplitude_bp != 0.0;
    const double inject_scale = config.injection.amplitude_bp * 1e-4 / std::sqrt(static_cast<double>(window));
    std::vector<std::vector<double>> innovations;  // [slot][day + window - 1]
    std::vector<double> running(per_day, 0.0);
    auto innovation_cell = [&](std::size_t slot, std::size_t index) {
        return static_cast<std::uint32_t>(slot * (days + window) + index);
    };
    auto slot_injected = [&](std::size_t slot) {
        return injecting && (!config.injection.slot || static_cast<std::size_t>(*config.injection.slot) == slot);
    };
    if (injecting) {
        innovations.assign(per_day, {});
        for (std::size_t s = 0; s < per_day; ++s) {
            if (!slot_injected(s)) continue;
            innovations[s].resize(days + window - 1);
            for (std::size_t j = 0; j < innovations[s].size(); ++j) {
                RandomStream rng(seed, symbol, kStreamInjection, innovation_cell(s, j));
                innovations[s][j] = rng.normal();
            }
            for (std::size_t j = 0; j + 1 < window; ++j) running[s] += innovations[s][j];
        }
    }

    double prev_shock = 0.0;
    const auto sym = static_cast<SymbolId>(symbol);
    auto make_quote = [&](std::int64_t ts) {
        std::int64_t bid = round_to_tick_micros(mid - half_spread);
        std::int64_t ask = round_to_tick_micros(mid + half_spread);
        const std::int64_t floor_micros = round_to_tick_micros(kQuoteTick);
        bid = std::max(bid, floor_micros);
        ask = std::max(ask, bid);
        path.quotes.push_back({sym, ts, Price::from_micros(bid), Price::from_micros(ask)});
    };

    std::vector<std::int64_t> times;
    for (std::size_t d = 0; d < days; ++d) {
        make_quote(calendar.session_open_ms(d));
        for (std::size_t s = 0; s < per_day; ++s) {
            const std::size_t t = d * per_day + s;
            const std::int64_t start = calendar.slot_start_ms(d, s);
            const std::int64_t end = calendar.slot_end_ms(d, s);
            const std::int64_t jump_at = start + (end - start) / 2;

            double injected = 0.0;
            if (slot_injected(s)) {
                running[s] += innovations[s][d + window - 1];
                injected = inject_scale * running[s];
                running[s] -= innovations[s][d];
            }
            double shock = 0.0;
            if (config.shock_magnitude > 0) {
                RandomStream rng(seed, symbol, kStreamShock, static_cast<std::uint32_t>(t));
                shock = config.shock_magnitude * rng.normal();
            }

            RandomStream rng(seed, symbol, kStreamInterval, static_cast<std::uint32_t>(t));
            const double ret = config.volatility * rng.normal() + injected + shock - prev_shock;
            prev_shock = shock;

            const QuoteTick before = path.quotes.back();
            mid = std::max(mid * (1.0 + ret), 100 * kQuoteTick);
            make_quote(jump_at);
            const QuoteTick after = path.quotes.back();

            const auto n = std::max<std::uint32_t>(2, rng.poisson(intensity[s]));
            times.resize(n);
            times[0] = rng.uniform_int(start, jump_at - 1);
            times[1] = rng.uniform_int(jump_at, end - 1);
            for (std::size_t j = 2; j < n; ++j) times[j] = rng.uniform_int(start, end - 1);
            std::sort(times.begin(), times.end());
            for (std::int64_t ts : times) {
                const QuoteTick& q = ts >= jump_at ? after : before;
                Price price;
                if (rng.bernoulli(config.bounce_prob)) {
                    price = rng.bernoulli(0.5) ? q.ask : q.bid;
                } else {
                    price = Price::from_micros((q.bid.micros() + q.ask.micros()) / 2);
                }
                const std::int32_t size = rng.bernoulli(config.large_trade_prob) ? kLargeTradeSharesSim : kSmallTradeShares;
                path.trades.push_back({sym, size, ts, price});
            }
        }
    }
    return path;
}

MetaTable simulate_meta(const SimConfig& config, const TradingCalendar& calendar) {
    MetaTable meta;
    if (calendar.num_days() == 0) return meta;
    const int first_year = calendar.year(0) - 1;
    const int last_year = calendar.year(calendar.num_days() - 1);
    for (int year = first_year; year <= last_year; ++year) {
        std::vector<double> caps(config.n_symbols);
        for (std::size_t i = 0; i < config.n_symbols; ++i) {
            caps[i] = year_end_cap(config, static_cast<std::uint32_t>(i), year);
        }
        std::vector<double> sorted = caps;
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[sorted.size() / 2];
        for (std::size_t i = 0; i < config.n_symbols; ++i) {
            auto& entry = meta[sim_symbol_name(i)];
            entry.year_end_market_cap[year] = caps[i];
            entry.sp500_member[year] = caps[i] >= median;
        }
    }
    return meta;
}

SimMarket simulate(const SimConfig& config, int threads) {
    config.validate();
    SimMarket market;
    market.calendar = sim_calendar(config);
    std::vector<SymbolPath> paths(config.n_symbols);
    parallel_for(config.n_symbols, threads, [&](std::size_t i) {
        paths[i] = simulate_symbol(config, market.calendar, static_cast<std::uint32_t>(i));
    });
    std::size_t n_trades = 0;
    std::size_t n_quotes = 0;
    for (const auto& p : paths) {
        n_trades += p.trades.size();
        n_quotes += p.quotes.size();
    }
    market.trades.reserve(n_trades);
    market.quotes.reserve(n_quotes);
    for (std::size_t i = 0; i < config.n_symbols; ++i) {
        market.symbols.intern(sim_symbol_name(i));
        market.trades.insert(market.trades.end(), paths[i].trades.begin(), paths[i].trades.end());
        market.quotes.insert(market.quotes.end(), paths[i].quotes.begin(), paths[i].quotes.end());
        paths[i] = {};
    }
    market.meta = simulate_meta(config, market.calendar);
    return market;
}

SimFiles write_simulation(const SimConfig& config, const std::filesystem::path& dir, int threads) {
    config.validate();
    const TradingCalendar calendar = sim_calendar(config);
    SimFiles files{dir / "trades.csv", dir / "quotes.csv", dir / "meta.csv", dir / "calendar.txt", 0, 0};

    auto trades_out = csv::open_output(files.trades);
    auto quotes_out = csv::open_output(files.quotes);
    trades_out << "symbol,ts_ms,price,size\n";
    quotes_out << "symbol,ts_ms,bid,ask\n";

    const std::size_t block = std::max<std::size_t>(1, static_cast<std::size_t>(resolve_threads(threads)) * 4);
    std::vector<std::string> trade_text(block);
    std::vector<std::string> quote_text(block);
    std::vector<std::size_t> trade_counts(block);
    std::vector<std::size_t> quote_counts(block);
    for (std::size_t first = 0; first < config.n_symbols; first += block) {
        const std::size_t count = std::min(block, config.n_symbols - first);
        parallel_for(count, threads, [&](std::size_t j) {
            const auto symbol = static_cast<std::uint32_t>(first + j);
            const SymbolPath path = simulate_symbol(config, calendar, symbol);
            const std::string name = sim_symbol_name(symbol);
            std::string& tt = trade_text[j];
            std::string& qt = quote_text[j];
            tt.clear();
            qt.clear();
            for (const auto& tr : path.trades) {
                tt += name;
                tt.push_back(',');
                append_int(tt, tr.ts_ms);
                tt.push_back(',');
                append_price(tt, tr.price);
                tt.push_back(',');
                append_int(tt, tr.size);
                tt.push_back('\n');
            }
            for (const auto& q : path.quotes) {
                qt += name;
                qt.push_back(',');
                append_int(qt, q.ts_ms);
                qt.push_back(',');
                append_price(qt, q.bid);
                qt.push_back(',');
                append_price(qt, q.ask);
                qt.push_back('\n');
            }
            trade_counts[j] = path.trades.size();
            quote_counts[j] = path.quotes.size();
        });
        for (std::size_t j = 0; j < count; ++j) {
            trades_out.write(trade_text[j].data(), static_cast<std::streamsize>(trade_text[j].size()));
            quotes_out.write(quote_text[j].data(), static_cast<std::streamsize>(quote_text[j].size()));
            files.trade_count += trade_counts[j];
            files.quote_count += quote_counts[j];
        }
    }
    if (!trades_out || !quotes_out) throw std::runtime_error("write failed under " + dir.string());

    const MetaTable meta = simulate_meta(config, calendar);
    auto meta_out = csv::open_output(files.meta);
    meta_out << "symbol,year,market_cap,sp500_flag\n";
    for (const auto& [name, entry] : meta) {
        for (const auto& [year, cap] : entry.year_end_market_cap) {
            meta_out << name << ',' << year << ',' << csv::format_real(cap) << ','
                     << (entry.sp500(year).value_or(false) ? 1 : 0) << '\n';
        }
    }

    auto cal_out = csv::open_output(files.calendar);
    for (const auto& date : calendar.dates()) cal_out << format_iso_date(date) << '\n';
    return files;
}

OracleFit oracle_ols(std::span<const double> y, const DesignMatrix& x) {
    if (y.size() != x.rows) throw std::invalid_argument("oracle_ols: size mismatch");
    if (x.rows > 10'000) throw std::invalid_argument("oracle_ols: at most 10000 observations");
    const std::size_t p = x.cols;
    OracleFit fit;
    if (p == 0 || x.rows < p) {
        fit.singular = true;
        return fit;
    }
    // Augmented normal equations [X'X | X'y], accumulated term by term.
    std::vector<long double> a(p * (p + 1), 0.0L);
    auto cell = [&](std::size_t r, std::size_t c) -> long double& { return a[r * (p + 1) + c]; };
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t r = 0; r < p; ++r) {
            const long double xr = x(i, r);
            for (std::size_t c = 0; c < p; ++c) cell(r, c) += xr * static_cast<long double>(x(i, c));
            cell(r, p) += xr * static_cast<long double>(y[i]);
        }
    }
    long double scale = 0.0L;
    for (std::size_t r = 0; r < p; ++r) scale = std::max(scale, std::fabs(cell(r, r)));
    const long double tiny = scale * static_cast<long double>(kRankTolerance) * static_cast<long double>(kRankTolerance);

    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r) {
            if (std::fabs(cell(r, col)) > std::fabs(cell(pivot, col))) pivot = r;
        }
        if (!(std::fabs(cell(pivot, col)) > tiny)) {
            fit.singular = true;
            return fit;
        }
        if (pivot != col) {
            for (std::size_t c = 0; c <= p; ++c) std::swap(cell(pivot, c), cell(col, c));
        }
        for (std::size_t r = col + 1; r < p; ++r) {
            const long double f = cell(r, col) / cell(col, col);
            if (f == 0.0L) continue;
            for (std::size_t c = col; c <= p; ++c) cell(r, c) -= f * cell(col, c);
        }
    }
    std::vector<long double> beta(p);
    for (std::size_t r = p; r-- > 0;) {
        long double acc = cell(r, p);
        for (std::size_t c = r + 1; c < p; ++c) acc -= cell(r, c) * beta[c];
        beta[r] = acc / cell(r, r);
    }
    fit.coef.assign(beta.begin(), beta.end());
    return fit;
}

double expected_return_variance(const SimConfig& config, ReturnKind kind) {
    const double a = config.injection.amplitude_bp * 1e-4;
    double var = config.volatility * config.volatility + 2 * config.shock_magnitude * config.shock_magnitude;
    if (config.injection.slot) {
        var += a * a / config.intervals_per_day;
    } else {
        var += a * a;
    }
    if (kind == ReturnKind::Transaction) {
        const double h = config.spread / 2;
        var += 2 * config.bounce_prob * h * h * mean_inverse_square_price(config);
    }
    return var;
}

double expected_lag_slope(const SimConfig& config, int lag, ReturnKind kind) {
    if (lag < 1) throw std::invalid_argument("lag must be at least 1");
    const double var = expected_return_variance(config, kind);
    if (var <= 0) return 0.0;
    double cov = 0.0;
    const int per_day = config.intervals_per_day;
    if (lag % per_day == 0) {
        const int j = lag / per_day;
        const int d = config.injection.persistence_days;
        const double a = config.injection.amplitude_bp * 1e-4;
        const double rho = j < d ? static_cast<double>(d - j) / d : 0.0;
        cov += rho * a * a / (config.injection.slot ? per_day : 1);
    }
    if (lag == 1) {
        cov -= config.shock_magnitude * config.shock_magnitude;
        if (kind == ReturnKind::Transaction) {
            const double h = config.spread / 2;
            cov -= config.bounce_prob * h * h * mean_inverse_square_price(config);
        }
    }
    return cov / var;
}

double expected_decile_spread(const SimConfig& config, int lag) {
    const double sd = std::sqrt(expected_return_variance(config));
    return expected_lag_slope(config, lag) * 2 * kTopDecileNormalMean * sd;
}

double expected_cross_spread_cost(const SimConfig& config) {
    const double h = config.spread / 2;
    const double lo = config.price_low;
    const double hi = config.price_high;
    // Long leg closeBid/openAsk - 1, short decile closeAsk/openBid - 1.
    return mean_ratio(lo, hi, h) - mean_ratio(lo, hi, -h);
}

}  // namespace intraday
