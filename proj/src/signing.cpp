#include "intraday/signing.hpp"

#include <algorithm>

#include "intraday/parallel.hpp"

namespace intraday {

Side classify_trade(Price price, const std::optional<PrevailingQuote>& quote, std::optional<Price> last_distinct) {
    if (!quote) return Side::Unclassified;
    // Compare 2 * price against bid + ask to stay in exact integer arithmetic.
    const std::int64_t twice_price = 2 * price.micros();
    const std::int64_t twice_mid = quote->bid.micros() + quote->ask.micros();
    if (twice_price > twice_mid) return Side::Buy;
    if (twice_price < twice_mid) return Side::Sell;
    if (!last_distinct) return Side::Unclassified;
    if (price > *last_distinct) return Side::Buy;
    if (price < *last_distinct) return Side::Sell;
    return Side::Unclassified;
}

Side TradeSigner::on_trade(const TradeTick& trade) {
    std::optional<Price> reference;
    if (last_price_ && trade.price != *last_price_) {
        reference = last_price_;
    } else {
        reference = prior_distinct_;
    }
    const Side side = classify_trade(trade.price, quote_, reference);
    if (!last_price_ || trade.price != *last_price_) {
        prior_distinct_ = last_price_;
        last_price_ = trade.price;
    }
    return side;
}

namespace {

template <class Tick>
std::vector<std::pair<std::size_t, std::size_t>> symbol_ranges(std::span<const Tick> ticks, std::size_t n_symbols) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges(n_symbols, {0, 0});
    std::size_t i = 0;
    while (i < ticks.size()) {
        std::size_t j = i;
        while (j < ticks.size() && ticks[j].symbol == ticks[i].symbol) ++j;
        ranges[ticks[i].symbol] = {i, j};
        i = j;
    }
    return ranges;
}

}  // namespace

std::vector<SignedTrade> sign_trades(std::span<const TradeTick> trades, std::span<const QuoteTick> quotes,
                                     int threads) {
    SymbolId max_symbol = 0;
    for (const auto& t : trades) max_symbol = std::max(max_symbol, t.symbol);
    for (const auto& q : quotes) max_symbol = std::max(max_symbol, q.symbol);
    const std::size_t n_symbols = trades.empty() && quotes.empty() ? 0 : static_cast<std::size_t>(max_symbol) + 1;
    const auto trade_ranges = symbol_ranges(trades, n_symbols);
    const auto quote_ranges = symbol_ranges(quotes, n_symbols);

    std::vector<SignedTrade> out(trades.size());
    parallel_for(n_symbols, threads, [&](std::size_t s) {
        TradeSigner signer;
        auto [qi, qend] = quote_ranges[s];
        for (std::size_t i = trade_ranges[s].first; i < trade_ranges[s].second; ++i) {
            while (qi < qend && quotes[qi].ts_ms <= trades[i].ts_ms) signer.on_quote(quotes[qi++]);
            out[i].trade = trades[i];
            out[i].side = signer.on_trade(trades[i]);
            out[i].quote = signer.quote();
        }
    });
    return out;
}

OrderImbalance order_imbalance(std::span<const SignedTrade> trades) {
    OrderImbalance oi;
    for (const auto& t : trades) {
        oi.empty = false;
        switch (t.side) {
            case Side::Buy: oi.buy_volume += t.trade.size; break;
            case Side::Sell: oi.sell_volume += t.trade.size; break;
            case Side::Unclassified: oi.unclassified_volume += t.trade.size; break;
        }
    }
    oi.shares = oi.buy_volume - oi.sell_volume;
    return oi;
}

}  // namespace intraday
