#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "intraday/marketdata.hpp"

namespace intraday {

enum class Side : std::int8_t { Sell = -1, Unclassified = 0, Buy = 1 };

struct PrevailingQuote {
    Price bid;
    Price ask;
    double mid() const { return 0.5 * (bid.to_double() + ask.to_double()); }
};

// Lee-Ready variant without the quote delay: midpoint test first, then the
// tick test against the last price that differed from the current one.
Side classify_trade(Price price, const std::optional<PrevailingQuote>& quote, std::optional<Price> last_distinct);

struct SignedTrade {
    TradeTick trade;
    Side side{Side::Unclassified};
    std::optional<PrevailingQuote> quote;
};

// Streaming classifier state for one symbol. Feed quotes and trades in
// timestamp order; a quote with the same timestamp as a trade must be fed
// first to count as prevailing.
class TradeSigner {
public:
    void on_quote(const QuoteTick& quote) { quote_ = PrevailingQuote{quote.bid, quote.ask}; }
    Side on_trade(const TradeTick& trade);
    const std::optional<PrevailingQuote>& quote() const { return quote_; }

private:
    std::optional<PrevailingQuote> quote_;
    std::optional<Price> last_price_;
    std::optional<Price> prior_distinct_;
};

// Signs every trade. Both inputs must be ordered by (symbol id, ts).
std::vector<SignedTrade> sign_trades(std::span<const TradeTick> trades, std::span<const QuoteTick> quotes,
                                     int threads = 1);

struct OrderImbalance {
    std::int64_t shares{};  // buy volume minus sell volume
    std::int64_t buy_volume{};
    std::int64_t sell_volume{};
    std::int64_t unclassified_volume{};
    bool empty{true};
};

// Unclassified volume is reported separately and left out of the imbalance.
OrderImbalance order_imbalance(std::span<const SignedTrade> trades);

}  // namespace intraday
