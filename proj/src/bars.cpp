#include "intraday/bars.hpp"

#include <algorithm>
#include <numeric>

#include "csv.hpp"
#include "intraday/parallel.hpp"

namespace intraday {

namespace {

using Range = std::pair<std::size_t, std::size_t>;

template <class Tick>
std::vector<Range> ranges_by_symbol(std::span<const Tick> ticks, std::size_t n_symbols) {
    std::vector<Range> ranges(n_symbols, {0, 0});
    std::size_t i = 0;
    while (i < ticks.size()) {
        std::size_t j = i;
        while (j < ticks.size() && ticks[j].symbol == ticks[i].symbol) ++j;
        if (ticks[i].symbol < n_symbols) ranges[ticks[i].symbol] = {i, j};
        i = j;
    }
    return ranges;
}

std::vector<IntervalBar> build_symbol_bars(std::span<const TradeTick> trades, std::span<const QuoteTick> quotes,
                                           const TradingCalendar& calendar) {
    std::vector<IntervalBar> bars;
    TradeSigner signer;
    std::optional<PrevailingQuote> day_quote;
    std::int64_t current_day = -1;
    IntervalBar* bar = nullptr;
    bool open_from_first_quote = false;

    auto close_bar = [&] {
        if (bar && day_quote) {
            bar->close_bid = day_quote->bid;
            bar->close_ask = day_quote->ask;
        }
    };

    std::size_t ti = 0;
    std::size_t qi = 0;
    while (ti < trades.size() || qi < quotes.size()) {
        const bool take_quote = qi < quotes.size() && (ti == trades.size() || quotes[qi].ts_ms <= trades[ti].ts_ms);
        const std::int64_t ts = take_quote ? quotes[qi].ts_ms : trades[ti].ts_ms;
        const auto loc = calendar.locate(ts);
        if (!loc) {
            take_quote ? ++qi : ++ti;
            continue;
        }
        if (loc->day != current_day) {
            close_bar();
            bar = nullptr;
            day_quote.reset();
            current_day = loc->day;
        }
        if (!bar || bar->slot != loc->slot) {
            close_bar();
            IntervalBar fresh;
            fresh.day = loc->day;
            fresh.slot = loc->slot;
            if (day_quote) {
                fresh.open_bid = day_quote->bid;
                fresh.open_ask = day_quote->ask;
            }
            open_from_first_quote = !day_quote;
            bars.push_back(fresh);
            bar = &bars.back();
        }
        if (take_quote) {
            const QuoteTick& q = quotes[qi++];
            signer.on_quote(q);
            day_quote = PrevailingQuote{q.bid, q.ask};
            // A quote stamped exactly at the interval start prevails at the start.
            if (open_from_first_quote || q.ts_ms == calendar.slot_start_ms(loc->day, loc->slot)) {
                bar->open_bid = q.bid;
                bar->open_ask = q.ask;
                open_from_first_quote = false;
            }
        } else {
            const TradeTick& t = trades[ti++];
            const Side side = signer.on_trade(t);
            if (!bar->first_price) bar->first_price = t.price;
            bar->last_price = t.price;
            bar->volume += t.size;
            (t.size >= kLargeTradeShares ? bar->large_volume : bar->small_volume) += t.size;
            if (side == Side::Buy) bar->buy_volume += t.size;
            if (side == Side::Sell) bar->sell_volume += t.size;
            ++bar->trade_count;
        }
    }
    close_bar();
    return bars;
}

double ratio_minus_one(Price num, Price den) { return num.to_double() / den.to_double() - 1.0; }

std::optional<double> leg_value(const std::optional<Price>& bid, const std::optional<Price>& ask, QuoteLeg leg) {
    if (!bid || !ask) return std::nullopt;
    switch (leg) {
        case QuoteLeg::Bid: return bid->to_double();
        case QuoteLeg::Ask: return ask->to_double();
        case QuoteLeg::Mid: return 0.5 * (bid->to_double() + ask->to_double());
    }
    return std::nullopt;
}

std::optional<double> close_leg(const IntervalBar& b, QuoteLeg leg) { return leg_value(b.close_bid, b.close_ask, leg); }
std::optional<double> open_leg(const IntervalBar& b, QuoteLeg leg) { return leg_value(b.open_bid, b.open_ask, leg); }

template <class Fn>
void for_each_bar_pair(const BarSet& bars, Fn&& fn) {
    for (std::size_t row = 0; row < bars.rows.size(); ++row) {
        const IntervalBar* prev = nullptr;
        std::int64_t prev_t = -2;
        for (const auto& bar : bars.rows[row]) {
            const std::int64_t t = bars.global_index(bar);
            fn(row, static_cast<std::size_t>(t), bar, prev_t == t - 1 ? prev : nullptr);
            prev = &bar;
            prev_t = t;
        }
    }
}

std::string price_or_na(const std::optional<Price>& p) { return p ? p->to_string() : "NA"; }

std::optional<Price> parse_optional_price(std::string_view s, bool& ok) {
    if (s == "NA" || s.empty()) return std::nullopt;
    auto p = Price::parse(s);
    if (!p) ok = false;
    return p;
}

}  // namespace

std::optional<double> IntervalBar::close_mid() const {
    if (!close_bid || !close_ask) return std::nullopt;
    return 0.5 * (close_bid->to_double() + close_ask->to_double());
}

std::optional<double> IntervalBar::open_rel_spread() const {
    if (!open_bid || !open_ask) return std::nullopt;
    const double bid = open_bid->to_double();
    const double ask = open_ask->to_double();
    return (ask - bid) / (0.5 * (ask + bid));
}

std::size_t BarSet::bar_count() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.size();
    return n;
}

BarSet build_bars(std::span<const TradeTick> trades, std::span<const QuoteTick> quotes, const SymbolTable& symbols,
                  const TradingCalendar& calendar, int threads) {
    BarSet out;
    out.calendar = calendar;
    std::vector<SymbolId> order(symbols.size());
    std::iota(order.begin(), order.end(), SymbolId{0});
    std::sort(order.begin(), order.end(),
              [&](SymbolId a, SymbolId b) { return symbols.name(a) < symbols.name(b); });
    const auto trade_ranges = ranges_by_symbol(trades, symbols.size());
    const auto quote_ranges = ranges_by_symbol(quotes, symbols.size());

    out.symbols.reserve(order.size());
    for (auto id : order) out.symbols.push_back(symbols.name(id));
    out.rows.resize(order.size());
    parallel_for(order.size(), threads, [&](std::size_t row) {
        const auto id = order[row];
        const auto [tb, te] = trade_ranges[id];
        const auto [qb, qe] = quote_ranges[id];
        out.rows[row] = build_symbol_bars(trades.subspan(tb, te - tb), quotes.subspan(qb, qe - qb), calendar);
    });
    return out;
}

PanelMatrix txn_returns(const BarSet& bars) {
    PanelMatrix panel("txn_return", bars.rows.size(), bars.num_periods());
    for_each_bar_pair(bars, [&](std::size_t row, std::size_t t, const IntervalBar& bar, const IntervalBar* prev) {
        if (!bar.last_price) return;
        if (bar.slot == 0) {
            panel.at(row, t) = ratio_minus_one(*bar.last_price, *bar.first_price);
        } else if (prev && prev->last_price) {
            panel.at(row, t) = ratio_minus_one(*bar.last_price, *prev->last_price);
        }
    });
    return panel;
}

PanelMatrix quote_returns(const BarSet& bars, QuoteLeg leg) {
    static constexpr const char* kTags[] = {"bid_return", "ask_return", "mid_return"};
    PanelMatrix panel(kTags[static_cast<int>(leg)], bars.rows.size(), bars.num_periods());
    for_each_bar_pair(bars, [&](std::size_t row, std::size_t t, const IntervalBar& bar, const IntervalBar* prev) {
        const auto close = close_leg(bar, leg);
        if (!close) return;
        std::optional<double> base;
        if (bar.slot == 0) {
            base = open_leg(bar, leg);
        } else if (prev) {
            base = close_leg(*prev, leg);
        }
        if (base) panel.at(row, t) = *close / *base - 1.0;
    });
    return panel;
}

DerivedPanels derived_variables(const BarSet& bars, const PanelMatrix& txn) {
    const std::size_t n = bars.rows.size();
    const std::size_t periods = bars.num_periods();
    DerivedPanels out{
        PanelMatrix("dlog_volume", n, periods),      PanelMatrix("d_order_imbalance", n, periods),
        PanelMatrix("pct_abs_return", n, periods),   PanelMatrix("pct_rel_spread", n, periods),
        PanelMatrix("dlog_small_volume", n, periods), PanelMatrix("dlog_large_volume", n, periods),
    };
    auto log_change = [](std::int64_t now, std::int64_t before) -> double {
        if (now <= 0 || before <= 0) return PanelMatrix::missing_value();
        return std::log(static_cast<double>(now)) - std::log(static_cast<double>(before));
    };
    for_each_bar_pair(bars, [&](std::size_t row, std::size_t t, const IntervalBar& bar, const IntervalBar* prev) {
        if (!prev || bar.empty() || prev->empty()) return;
        out.dlog_volume.at(row, t) = log_change(bar.volume, prev->volume);
        out.dlog_small_volume.at(row, t) = log_change(bar.small_volume, prev->small_volume);
        out.dlog_large_volume.at(row, t) = log_change(bar.large_volume, prev->large_volume);
        out.d_order_imbalance.at(row, t) = static_cast<double>(bar.order_imbalance() - prev->order_imbalance());
        const auto spread_now = bar.open_rel_spread();
        const auto spread_before = prev->open_rel_spread();
        if (spread_now && spread_before && *spread_before > 0.0) {
            out.pct_rel_spread.at(row, t) = *spread_now / *spread_before - 1.0;
        }
    });
    for (std::size_t row = 0; row < n; ++row) {
        for (std::size_t t = 1; t < periods; ++t) {
            const double now = txn.at(row, t);
            const double before = txn.at(row, t - 1);
            if (PanelMatrix::is_missing(now) || PanelMatrix::is_missing(before) || before == 0.0) continue;
            out.pct_abs_return.at(row, t) = std::abs(now) / std::abs(before) - 1.0;
        }
    }
    return out;
}

PanelMatrix bar_field_panel(const BarSet& bars, BarField field) {
    static constexpr const char* kTags[] = {"last_price", "last_price_carried", "trade_count", "volume",
                                            "order_imbalance", "open_rel_spread", "open_bid", "open_ask",
                                            "close_bid", "close_ask"};
    PanelMatrix panel(kTags[static_cast<int>(field)], bars.rows.size(), bars.num_periods());
    auto value = [](const std::optional<Price>& p) { return p ? p->to_double() : PanelMatrix::missing_value(); };
    for (std::size_t row = 0; row < bars.rows.size(); ++row) {
        if (field == BarField::TradeCount) {
            for (std::size_t t = 0; t < bars.num_periods(); ++t) panel.at(row, t) = 0.0;
        }
        double carried = PanelMatrix::missing_value();
        std::size_t next_t = 0;
        for (const auto& bar : bars.rows[row]) {
            const auto t = static_cast<std::size_t>(bars.global_index(bar));
            if (field == BarField::LastPriceCarried) {
                for (; next_t < t; ++next_t) panel.at(row, next_t) = carried;
                if (bar.last_price) carried = bar.last_price->to_double();
                panel.at(row, t) = carried;
                next_t = t + 1;
                continue;
            }
            double v = PanelMatrix::missing_value();
            switch (field) {
                case BarField::LastPrice: v = value(bar.last_price); break;
                case BarField::TradeCount: v = static_cast<double>(bar.trade_count); break;
                case BarField::Volume: v = static_cast<double>(bar.volume); break;
                case BarField::OrderImbalance:
                    v = bar.empty() ? PanelMatrix::missing_value() : static_cast<double>(bar.order_imbalance());
                    break;
                case BarField::OpenRelSpread: v = bar.open_rel_spread().value_or(PanelMatrix::missing_value()); break;
                case BarField::OpenBid: v = value(bar.open_bid); break;
                case BarField::OpenAsk: v = value(bar.open_ask); break;
                case BarField::CloseBid: v = value(bar.close_bid); break;
                case BarField::CloseAsk: v = value(bar.close_ask); break;
                case BarField::LastPriceCarried: break;
            }
            panel.at(row, t) = v;
        }
        if (field == BarField::LastPriceCarried) {
            for (; next_t < bars.num_periods(); ++next_t) panel.at(row, next_t) = carried;
        }
    }
    return panel;
}

void write_bar_export(const BarSet& bars, const std::filesystem::path& path) {
    auto out = csv::open_output(path);
    out << "symbol,date,slot,last,bid,ask,mid,rel_spread,volume,small_vol,large_vol,oi,trades\n";
    for (std::size_t row = 0; row < bars.rows.size(); ++row) {
        for (const auto& b : bars.rows[row]) {
            out << bars.symbols[row] << ',' << format_iso_date(bars.calendar.date(b.day)) << ',' << b.slot << ','
                << price_or_na(b.last_price) << ',' << price_or_na(b.close_bid) << ',' << price_or_na(b.close_ask)
                << ',' << csv::format_real(b.close_mid().value_or(PanelMatrix::missing_value())) << ','
                << csv::format_real(b.open_rel_spread().value_or(PanelMatrix::missing_value())) << ',' << b.volume
                << ',' << b.small_volume << ',' << b.large_volume << ',' << b.order_imbalance() << ','
                << b.trade_count << '\n';
        }
    }
}

namespace {
constexpr std::string_view kStoreHeader =
    "symbol,date,slot,first,last,open_bid,open_ask,close_bid,close_ask,volume,small_vol,large_vol,buy_vol,sell_vol,"
    "trades";
}

void write_bar_store(const BarSet& bars, const std::filesystem::path& path) {
    auto out = csv::open_output(path);
    out << kStoreHeader << '\n';
    for (std::size_t row = 0; row < bars.rows.size(); ++row) {
        for (const auto& b : bars.rows[row]) {
            out << bars.symbols[row] << ',' << format_iso_date(bars.calendar.date(b.day)) << ',' << b.slot << ','
                << price_or_na(b.first_price) << ',' << price_or_na(b.last_price) << ',' << price_or_na(b.open_bid)
                << ',' << price_or_na(b.open_ask) << ',' << price_or_na(b.close_bid) << ','
                << price_or_na(b.close_ask) << ',' << b.volume << ',' << b.small_volume << ',' << b.large_volume
                << ',' << b.buy_volume << ',' << b.sell_volume << ',' << b.trade_count << '\n';
        }
    }
}

BarSet read_bar_store(const std::filesystem::path& path, const TradingCalendar& calendar) {
    csv::LineReader reader(path);
    std::string_view line;
    if (!reader.next(line) || line != kStoreHeader) throw InputError(path.string() + ": not a bar store file");
    BarSet out;
    out.calendar = calendar;
    std::string current;
    std::string_view f[15];
    while (reader.next(line)) {
        if (line.empty()) continue;
        auto fail = [&](const char* why) {
            return InputError(path.string() + ": line " + std::to_string(reader.line_number()) + ": " + why);
        };
        if (csv::split(line, f, 15) != 15) throw fail("expected 15 fields");
        const auto date = parse_iso_date(f[1]);
        const auto slot = csv::parse_int<std::uint32_t>(f[2]);
        if (!date || !slot) throw fail("bad date or slot");
        if (*slot >= static_cast<std::uint32_t>(calendar.intervals_per_day())) {
            throw fail("slot outside the calendar's interval grid");
        }
        if (f[0] != current) {
            if (!out.symbols.empty() && f[0] < std::string_view(out.symbols.back())) throw fail("symbols not sorted");
            current = std::string(f[0]);
            out.symbols.push_back(current);
            out.rows.emplace_back();
        }
        const auto day = calendar.day_of(*date);
        if (!day) continue;  // outside the selected date range
        IntervalBar b;
        b.day = static_cast<std::uint32_t>(*day);
        b.slot = *slot;
        bool ok = true;
        b.first_price = parse_optional_price(f[3], ok);
        b.last_price = parse_optional_price(f[4], ok);
        b.open_bid = parse_optional_price(f[5], ok);
        b.open_ask = parse_optional_price(f[6], ok);
        b.close_bid = parse_optional_price(f[7], ok);
        b.close_ask = parse_optional_price(f[8], ok);
        std::int64_t* counts[] = {&b.volume, &b.small_volume, &b.large_volume, &b.buy_volume, &b.sell_volume,
                                  &b.trade_count};
        for (int k = 0; k < 6; ++k) {
            const auto v = csv::parse_int<std::int64_t>(f[9 + k]);
            if (!v) ok = false;
            else *counts[k] = *v;
        }
        if (!ok) throw fail("bad numeric field");
        out.rows.back().push_back(b);
    }
    return out;
}

void write_signed_trades(std::span<const SignedTrade> trades, const SymbolTable& symbols,
                         const std::filesystem::path& path) {
    auto out = csv::open_output(path);
    out << "symbol,ts_ms,price,size,side\n";
    for (const auto& s : trades) {
        const char* side = s.side == Side::Buy ? "buy" : s.side == Side::Sell ? "sell" : "unclassified";
        out << symbols.name(s.trade.symbol) << ',' << s.trade.ts_ms << ',' << s.trade.price.to_string() << ','
            << s.trade.size << ',' << side << '\n';
    }
}

}  // namespace intraday
