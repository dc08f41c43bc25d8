#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace intraday {

using SymbolId = std::uint32_t;

// Fixed-point price in millionths of a currency unit. Ingestion keeps decimal
// prices exact; arithmetic that produces returns converts to double.
class Price {
public:
    static constexpr std::int64_t kScale = 1'000'000;

    constexpr Price() = default;
    static constexpr Price from_micros(std::int64_t micros) { return Price{micros}; }
    static Price from_double(double value);

    // Accepts an optional sign, digits and up to six fractional digits
    // (extra trailing zeros are allowed). Returns nullopt on anything else.
    static std::optional<Price> parse(std::string_view text);

    constexpr std::int64_t micros() const { return micros_; }
    constexpr double to_double() const { return static_cast<double>(micros_) / kScale; }
    std::string to_string() const;

    constexpr auto operator<=>(const Price&) const = default;

private:
    constexpr explicit Price(std::int64_t micros) : micros_(micros) {}
    std::int64_t micros_{0};
};

}  // namespace intraday
