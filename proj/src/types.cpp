#include "intraday/types.hpp"

#include <cmath>
#include <limits>

namespace intraday {

Price Price::from_double(double value) {
    return Price{static_cast<std::int64_t>(std::llround(value * static_cast<double>(kScale)))};
}

std::optional<Price> Price::parse(std::string_view text) {
    if (text.empty()) return std::nullopt;
    bool negative = false;
    std::size_t pos = 0;
    if (text[0] == '-' || text[0] == '+') {
        negative = text[0] == '-';
        ++pos;
    }
    constexpr std::int64_t kLimit = std::numeric_limits<std::int64_t>::max() / 10 / kScale;
    std::int64_t whole = 0;
    std::size_t whole_digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
        if (whole > kLimit) return std::nullopt;
        whole = whole * 10 + (text[pos] - '0');
        ++pos;
        ++whole_digits;
    }
    std::int64_t frac = 0;
    std::size_t frac_digits = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            const int digit = text[pos] - '0';
            if (frac_digits < 6) {
                frac = frac * 10 + digit;
            } else if (digit != 0) {
                return std::nullopt;  // finer than one micro
            }
            ++frac_digits;
            ++pos;
        }
    }
    if (pos != text.size() || (whole_digits == 0 && frac_digits == 0)) return std::nullopt;
    for (std::size_t i = std::min<std::size_t>(frac_digits, 6); i < 6; ++i) frac *= 10;
    const std::int64_t micros = whole * kScale + frac;
    return Price{negative ? -micros : micros};
}

std::string Price::to_string() const {
    const bool negative = micros_ < 0;
    const std::int64_t abs = negative ? -micros_ : micros_;
    std::string out = negative ? "-" : "";
    out += std::to_string(abs / kScale);
    std::string frac = std::to_string(abs % kScale);
    frac.insert(0, 6 - frac.size(), '0');
    while (frac.size() > 2 && frac.back() == '0') frac.pop_back();
    out += '.';
    out += frac;
    return out;
}

}  // namespace intraday
