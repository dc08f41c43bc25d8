#pragma once

// Internal helpers for the line-oriented CSV files the engine reads and writes.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "intraday/marketdata.hpp"

namespace intraday::csv {

// Buffered line reader; strips a trailing '\r'. Lines are views into an
// internal buffer and stay valid until the next call.
class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_) throw InputError("cannot open " + path.string());
        buffer_.resize(1 << 20);
    }

    bool next(std::string_view& line) {
        for (;;) {
            const auto nl = pending_.find('\n', scan_);
            if (nl != std::string::npos) {
                line = std::string_view(pending_).substr(start_, nl - start_);
                start_ = scan_ = nl + 1;
                if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
                ++line_no_;
                return true;
            }
            scan_ = pending_.size();
            if (!fill()) {
                if (start_ >= pending_.size()) return false;
                line = std::string_view(pending_).substr(start_);
                start_ = scan_ = pending_.size();
                if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
                ++line_no_;
                return true;
            }
        }
    }

    std::size_t line_number() const { return line_no_; }

private:
    bool fill() {
        if (!in_) return false;
        in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (got == 0) return false;
        pending_.erase(0, start_);
        scan_ -= start_;
        start_ = 0;
        pending_.append(buffer_.data(), got);
        return true;
    }

    std::ifstream in_;
    std::vector<char> buffer_;
    std::string pending_;
    std::size_t start_{0};
    std::size_t scan_{0};
    std::size_t line_no_{0};
};

// Splits on ',' into at most `max_fields` views; returns the field count.
inline std::size_t split(std::string_view line, std::string_view* fields, std::size_t max_fields) {
    std::size_t count = 0;
    std::size_t begin = 0;
    while (count < max_fields) {
        const auto comma = line.find(',', begin);
        if (comma == std::string_view::npos) {
            fields[count++] = line.substr(begin);
            return count;
        }
        fields[count++] = line.substr(begin, comma - begin);
        begin = comma + 1;
    }
    return count + 1;  // more fields than allowed
}

inline std::vector<std::string_view> split_all(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t begin = 0;
    for (;;) {
        const auto comma = line.find(',', begin);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(begin));
            return out;
        }
        out.push_back(line.substr(begin, comma - begin));
        begin = comma + 1;
    }
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
    Int value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

// "NA" and empty fields parse as NaN (missing).
inline std::optional<double> parse_real(std::string_view s) {
    if (s.empty() || s == "NA") return std::numeric_limits<double>::quiet_NaN();
    double value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

// Shortest round-trip representation; NaN renders as NA.
inline std::string format_real(double value) {
    if (std::isnan(value)) return "NA";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace intraday::csv
