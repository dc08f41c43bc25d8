#include "intraday/portfolio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "intraday/parallel.hpp"

namespace intraday {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::optional<int> parse_small_int(std::string_view s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<int> month_keys_of(const DecileReport& report, const TradingCalendar& calendar) {
    std::vector<int> keys;
    keys.reserve(report.periods.size());
    for (const auto& p : report.periods) keys.push_back(calendar.month_key(calendar.from_global(p.t).day));
    return keys;
}

// FM statistics of every decile series and the spread over the periods in
// `selected`, optionally winsorized per month on the full sample first.
SliceStats summarize(const DecileReport& report, const std::vector<char>& selected, const TradingCalendar& calendar,
                     std::optional<double> winsorize_level) {
    SliceStats out;
    const std::size_t n = report.periods.size();
    std::vector<int> keys;
    if (winsorize_level) keys = month_keys_of(report, calendar);
    auto stats_of = [&](auto&& value_of) {
        std::vector<double> series(n);
        for (std::size_t i = 0; i < n; ++i) series[i] = value_of(report.periods[i]);
        if (winsorize_level) series = winsorize_monthly(series, keys, *winsorize_level).values;
        std::vector<double> kept;
        for (std::size_t i = 0; i < n; ++i) {
            if (selected[i]) kept.push_back(series[i]);
        }
        return fama_macbeth(kept);
    };
    for (int d = 0; d < kDeciles; ++d) {
        out.decile_fm[static_cast<std::size_t>(d)] =
            stats_of([d](const DecilePeriod& p) { return p.mean[static_cast<std::size_t>(d)]; });
    }
    out.spread_fm = stats_of([](const DecilePeriod& p) { return p.spread; });
    return out;
}

}  // namespace

std::optional<std::vector<int>> decile_assign(std::span<const double> signal, std::span<const std::uint32_t> symbol_ids) {
    if (signal.size() != symbol_ids.size()) throw std::invalid_argument("decile_assign: size mismatch");
    const std::size_t n = signal.size();
    if (n < static_cast<std::size_t>(kDeciles)) return std::nullopt;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (signal[a] != signal[b]) return signal[a] < signal[b];
        return symbol_ids[a] < symbol_ids[b];
    });
    const std::size_t q = n / kDeciles;
    const std::size_t r = n % kDeciles;
    std::vector<int> labels(n);
    std::size_t pos = 0;
    for (std::size_t d = 0; d < static_cast<std::size_t>(kDeciles); ++d) {
        const std::size_t size = q + (d < r ? 1 : 0);
        for (std::size_t j = 0; j < size; ++j) labels[order[pos++]] = static_cast<int>(d);
    }
    return labels;
}

LagStructure LagStructure::daily(int k) {
    if (k < 1) throw std::invalid_argument("daily lag must be at least 1");
    return LagStructure{Kind::Daily, {k}, 1};
}

LagStructure LagStructure::nondaily(int first, int last) {
    if (first < 1 || last < first) throw std::invalid_argument("bad nondaily lag window");
    LagStructure s{Kind::Nondaily, {}, 0};
    for (int k = first; k <= last; ++k) s.lags.push_back(k);
    s.min_present = (2 * s.lags.size() + 2) / 3;
    return s;
}

LagStructure LagStructure::for_day(Kind kind, int day, int intervals_per_day) {
    if (day < 1) throw std::invalid_argument("strategy day must be at least 1");
    if (kind == Kind::Daily) return daily(day * intervals_per_day);
    return nondaily((day - 1) * intervals_per_day + 1, day * intervals_per_day - 1);
}

int LagStructure::max_lag() const { return lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end()); }

MarketPanels build_market_panels(const BarSet& bars) {
    MarketPanels p;
    p.calendar = bars.calendar;
    p.symbols = bars.symbols;
    p.returns = txn_returns(bars);
    p.price_carried = bar_field_panel(bars, BarField::LastPriceCarried);
    p.trade_count = bar_field_panel(bars, BarField::TradeCount);
    p.open_rel_spread = bar_field_panel(bars, BarField::OpenRelSpread);
    p.open_bid = bar_field_panel(bars, BarField::OpenBid);
    p.open_ask = bar_field_panel(bars, BarField::OpenAsk);
    p.close_bid = bar_field_panel(bars, BarField::CloseBid);
    p.close_ask = bar_field_panel(bars, BarField::CloseAsk);
    return p;
}

FilterContext::FilterContext(const MarketPanels& panels, const MetaTable& meta) : panels_(&panels) {
    const std::size_t n = panels.symbols.size();
    const auto& cal = panels.calendar;
    const auto per_day = static_cast<std::size_t>(cal.intervals_per_day());

    meta_.resize(n, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = meta.find(panels.symbols[i]);
        if (it != meta.end()) meta_[i] = &it->second;
    }

    day_month_index_.resize(cal.num_days());
    std::vector<std::size_t> intervals_in_month;
    for (std::size_t d = 0; d < cal.num_days(); ++d) {
        const int key = cal.month_key(d);
        if (month_keys_.empty() || month_keys_.back() != key) {
            month_keys_.push_back(key);
            month_avg_.emplace_back(n, 0.0);
            intervals_in_month.push_back(0);
        }
        const std::size_t m = month_keys_.size() - 1;
        day_month_index_[d] = static_cast<int>(m);
        intervals_in_month[m] += per_day;
        for (std::size_t s = 0; s < per_day; ++s) {
            const auto counts = panels.trade_count.cross_section(d * per_day + s);
            for (std::size_t i = 0; i < n; ++i) month_avg_[m][i] += counts[i];
        }
    }
    for (std::size_t m = 0; m < month_avg_.size(); ++m) {
        for (auto& v : month_avg_[m]) v /= static_cast<double>(intervals_in_month[m]);
    }

    std::set<int> years;
    for (const auto* m : meta_) {
        if (!m) continue;
        for (const auto& [year, cap] : m->year_end_market_cap) years.insert(year);
    }
    for (int year : years) {
        std::vector<std::pair<double, std::size_t>> caps;
        for (std::size_t i = 0; i < n; ++i) {
            if (!meta_[i]) continue;
            if (auto cap = meta_[i]->market_cap(year)) caps.emplace_back(*cap, i);
        }
        std::sort(caps.begin(), caps.end());
        auto& groups = terciles_[year];
        groups.assign(n, std::nullopt);
        for (std::size_t rank = 0; rank < caps.size(); ++rank) {
            groups[caps[rank].second] = static_cast<SizeGroup>(3 * rank / caps.size());
        }
    }
}

std::optional<double> FilterContext::prior_month_avg_trades(std::size_t symbol, std::size_t day) const {
    const int m = day_month_index_.at(day);
    if (m == 0) return std::nullopt;
    if (month_keys_[static_cast<std::size_t>(m - 1)] != month_keys_[static_cast<std::size_t>(m)] - 1) {
        return std::nullopt;  // calendar skips the previous month
    }
    return month_avg_[static_cast<std::size_t>(m - 1)][symbol];
}

std::optional<SizeGroup> FilterContext::size_group(std::size_t symbol, int year) const {
    auto it = terciles_.find(year);
    if (it == terciles_.end()) return std::nullopt;
    return it->second[symbol];
}

std::optional<bool> FilterContext::sp500(std::size_t symbol, int year) const {
    if (!meta_[symbol]) return std::nullopt;
    return meta_[symbol]->sp500(year);
}

std::vector<FilterKind> active_filters(const FilterSet& f) {
    std::vector<FilterKind> kinds;
    if (f.min_price) kinds.push_back(FilterKind::MinPrice);
    if (f.min_avg_trades) kinds.push_back(FilterKind::MinAvgTrades);
    if (f.max_rel_spread) kinds.push_back(FilterKind::MaxRelSpread);
    if (f.size) kinds.push_back(FilterKind::Size);
    if (f.sp500) kinds.push_back(FilterKind::Sp500);
    return kinds;
}

std::vector<char> apply_filters(const FilterSet& filters, const FilterContext& context, std::size_t t,
                                std::span<const FilterKind> order) {
    const auto& panels = context.panels();
    const auto& cal = panels.calendar;
    const std::size_t n = panels.symbols.size();
    const std::size_t day = cal.from_global(static_cast<std::int64_t>(t)).day;
    const int year = cal.year(day);
    std::vector<FilterKind> defaults;
    if (order.empty()) {
        defaults = active_filters(filters);
        order = defaults;
    }
    std::vector<char> eligible(n, 1);
    for (FilterKind kind : order) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!eligible[i]) continue;
            bool pass = true;
            switch (kind) {
                case FilterKind::MinPrice: {
                    const double price = t > 0 ? panels.price_carried.at(i, t - 1) : kNaN;
                    pass = !std::isnan(price) && price >= *filters.min_price;
                    break;
                }
                case FilterKind::MinAvgTrades: {
                    const auto avg = context.prior_month_avg_trades(i, day);
                    pass = avg && *avg >= *filters.min_avg_trades;
                    break;
                }
                case FilterKind::MaxRelSpread: {
                    const double spread = panels.open_rel_spread.at(i, t);
                    pass = !std::isnan(spread) && spread <= *filters.max_rel_spread;
                    break;
                }
                case FilterKind::Size: {
                    const auto group = context.size_group(i, year - 1);
                    pass = group && *group == *filters.size;
                    break;
                }
                case FilterKind::Sp500: {
                    const auto member = context.sp500(i, year);
                    pass = member && *member == *filters.sp500;
                    break;
                }
            }
            if (!pass) eligible[i] = 0;
        }
    }
    return eligible;
}

DecileReport strategy_returns(const StrategySpec& spec, const FilterContext& context, const StrategyOptions& options) {
    const auto& panels = context.panels();
    const PanelMatrix& holding = options.holding_returns ? *options.holding_returns : panels.returns;
    if (!holding.same_grid(panels.returns)) throw std::invalid_argument("holding returns are not on the panel grid");
    if (spec.lags.lags.empty()) throw std::invalid_argument("strategy has no formation lags");

    DecileReport report;
    report.strategy = spec.name;
    report.cost = spec.cost;
    const std::size_t n = panels.symbols.size();
    const std::size_t periods = panels.returns.n_periods();
    const auto first_t = static_cast<std::size_t>(spec.lags.max_lag());
    if (periods <= first_t) return report;

    const std::size_t count = periods - first_t;
    std::vector<std::optional<DecilePeriod>> per_t(count);
    std::vector<char> skipped(count, 0);
    parallel_for(count, options.threads, [&](std::size_t idx) {
        const std::size_t t = idx + first_t;
        const auto eligible = apply_filters(spec.filters, context, t);
        std::vector<double> signal;
        std::vector<std::uint32_t> ids;
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (!eligible[i]) continue;
            if (spec.cost == CostMode::Raw) {
                if (!holding.has(i, t)) continue;
            } else if (!panels.open_bid.has(i, t) || !panels.open_ask.has(i, t) || !panels.close_bid.has(i, t) ||
                       !panels.close_ask.has(i, t)) {
                continue;
            }
            double sum = 0;
            std::size_t present = 0;
            for (int k : spec.lags.lags) {
                const double v = panels.returns.at(i, t - static_cast<std::size_t>(k));
                if (PanelMatrix::is_missing(v)) continue;
                sum += v;
                ++present;
            }
            if (present == 0 || present < spec.lags.min_present) continue;
            signal.push_back(sum / static_cast<double>(present));
            ids.push_back(static_cast<std::uint32_t>(i));
            members.push_back(i);
        }
        const auto labels = decile_assign(signal, ids);
        if (!labels) {
            skipped[idx] = 1;
            return;
        }
        DecilePeriod period;
        period.t = static_cast<std::int64_t>(t);
        std::array<double, kDeciles> sums{};
        for (std::size_t m = 0; m < members.size(); ++m) {
            const std::size_t i = members[m];
            const auto d = static_cast<std::size_t>((*labels)[m]);
            double r = 0;
            if (spec.cost == CostMode::Raw) {
                r = holding.at(i, t);
            } else if (d >= static_cast<std::size_t>(kDeciles / 2)) {
                r = panels.close_bid.at(i, t) / panels.open_ask.at(i, t) - 1.0;  // buy at the ask, sell at the bid
            } else {
                r = panels.close_ask.at(i, t) / panels.open_bid.at(i, t) - 1.0;  // short: sell at the bid, cover at the ask
            }
            sums[d] += r;
            ++period.count[d];
        }
        for (std::size_t d = 0; d < static_cast<std::size_t>(kDeciles); ++d) {
            period.mean[d] = sums[d] / static_cast<double>(period.count[d]);
        }
        period.spread = period.mean[kDeciles - 1] - period.mean[0];
        per_t[idx] = period;
    });
    for (std::size_t idx = 0; idx < count; ++idx) {
        report.skipped += static_cast<std::size_t>(skipped[idx]);
        if (per_t[idx]) report.periods.push_back(*per_t[idx]);
    }
    std::vector<char> all(report.periods.size(), 1);
    const auto stats = summarize(report, all, panels.calendar, options.winsorize_level);
    report.decile_fm = stats.decile_fm;
    report.spread_fm = stats.spread_fm;
    return report;
}

DecileReport cost_adjusted_spread(StrategySpec spec, const FilterContext& context, const StrategyOptions& options) {
    spec.cost = CostMode::CrossSpread;
    if (!spec.filters.max_rel_spread) spec.filters.max_rel_spread = kDefaultMaxRelSpread;
    return strategy_returns(spec, context, options);
}

std::optional<TimeSlice> parse_time_slice(std::string_view key, const TradingCalendar& calendar) {
    const TradingCalendar* cal = &calendar;
    const int per_day = calendar.intervals_per_day();
    auto slot_of = [per_day](std::int64_t t) { return static_cast<int>(t % per_day); };
    auto day_of = [per_day](std::int64_t t) { return static_cast<std::size_t>(t / per_day); };
    const std::string k(key);
    if (key == "all") return TimeSlice{k, [](std::int64_t) { return true; }};
    if (key == "open") return TimeSlice{k, [=](std::int64_t t) { return slot_of(t) == 0; }};
    if (key == "close") return TimeSlice{k, [=](std::int64_t t) { return slot_of(t) == per_day - 1; }};
    if (key == "mid") {
        return TimeSlice{k, [=](std::int64_t t) { return slot_of(t) > 0 && slot_of(t) < per_day - 1; }};
    }
    const auto eq = key.find('=');
    if (eq == std::string_view::npos) return std::nullopt;
    const auto name = key.substr(0, eq);
    const auto value = parse_small_int(key.substr(eq + 1));
    if (!value) return std::nullopt;
    const int v = *value;
    if (name == "slot" && v >= 0 && v < per_day) return TimeSlice{k, [=](std::int64_t t) { return slot_of(t) == v; }};
    if (name == "weekday" && v >= 1 && v <= 5) {
        return TimeSlice{k, [=](std::int64_t t) { return cal->weekday(day_of(t)) == v; }};
    }
    if (name == "month" && v >= 1 && v <= 12) {
        return TimeSlice{k, [=](std::int64_t t) { return cal->month(day_of(t)) == v; }};
    }
    if (name == "tom" && (v == 0 || v == 1)) {
        return TimeSlice{k, [=](std::int64_t t) { return cal->is_turn_of_month(day_of(t)) == (v == 1); }};
    }
    return std::nullopt;
}

std::vector<TimeSlice> standard_time_slices(const TradingCalendar& calendar) {
    std::vector<std::string> keys{"all", "open", "mid", "close"};
    for (int s = 0; s < calendar.intervals_per_day(); ++s) keys.push_back("slot=" + std::to_string(s));
    for (int w = 1; w <= 5; ++w) keys.push_back("weekday=" + std::to_string(w));
    for (int m = 1; m <= 12; ++m) keys.push_back("month=" + std::to_string(m));
    keys.push_back("tom=0");
    keys.push_back("tom=1");
    std::vector<TimeSlice> slices;
    for (const auto& k : keys) slices.push_back(*parse_time_slice(k, calendar));
    return slices;
}

SliceStats slice_stats(const DecileReport& report, const TimeSlice& slice, const TradingCalendar& calendar,
                       std::optional<double> winsorize_level) {
    std::vector<char> selected(report.periods.size());
    for (std::size_t i = 0; i < report.periods.size(); ++i) selected[i] = slice.keep(report.periods[i].t) ? 1 : 0;
    return summarize(report, selected, calendar, winsorize_level);
}

double midday_average_of_slot_means(const DecileReport& report, const TradingCalendar& calendar) {
    const int per_day = calendar.intervals_per_day();
    double sum = 0;
    int used = 0;
    for (int s = 1; s < per_day - 1; ++s) {
        const auto slice = parse_time_slice("slot=" + std::to_string(s), calendar);
        const auto stats = slice_stats(report, *slice, calendar);
        if (stats.spread_fm.n_periods == 0) continue;
        sum += stats.spread_fm.mean;
        ++used;
    }
    return used > 0 ? sum / used : kNaN;
}

}  // namespace intraday
