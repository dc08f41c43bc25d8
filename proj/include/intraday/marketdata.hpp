#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "intraday/types.hpp"

namespace intraday {

struct TradeTick {
    SymbolId symbol{};
    std::int32_t size{};
    std::int64_t ts_ms{};
    Price price{};
};

struct QuoteTick {
    SymbolId symbol{};
    std::int64_t ts_ms{};
    Price bid{};
    Price ask{};
};

// Interns ticker strings. Ids are dense and assigned in first-seen order.
class SymbolTable {
public:
    SymbolId intern(std::string_view name);
    std::optional<SymbolId> find(std::string_view name) const;
    const std::string& name(SymbolId id) const { return names_.at(id); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, SymbolId> index_;
};

struct SecurityMeta {
    std::map<int, double> year_end_market_cap;
    std::map<int, bool> sp500_member;

    std::optional<double> market_cap(int year) const;
    std::optional<bool> sp500(int year) const;
    std::optional<int> first_year() const;
    std::optional<int> last_year() const;
};

using MetaTable = std::map<std::string, SecurityMeta, std::less<>>;

enum class ExchangeTimeZone { NewYork, Utc };

std::optional<ExchangeTimeZone> parse_time_zone(std::string_view name);
std::string_view time_zone_name(ExchangeTimeZone tz);

// UTC offset in minutes of the exchange's local clock on a given civil date.
// New York follows the US daylight-saving rules in force since 1987.
int utc_offset_minutes(ExchangeTimeZone tz, std::chrono::sys_days local_date);

struct SlotRef {
    std::uint32_t day{};
    std::uint32_t slot{};
    auto operator<=>(const SlotRef&) const = default;
};

// Trading dates plus the 09:30-16:00 session split into equal intervals.
// Global interval index t = day * intervals_per_day + slot.
class TradingCalendar {
public:
    static constexpr int kOpenMinute = 9 * 60 + 30;
    static constexpr int kCloseMinute = 16 * 60;
    static constexpr int kSessionMinutes = kCloseMinute - kOpenMinute;

    TradingCalendar() = default;
    TradingCalendar(std::vector<std::chrono::sys_days> dates, int width_minutes,
                    ExchangeTimeZone tz = ExchangeTimeZone::NewYork);

    // Monday-Friday dates starting at `first` (inclusive).
    static TradingCalendar weekdays(std::chrono::sys_days first, std::size_t count, int width_minutes,
                                    ExchangeTimeZone tz = ExchangeTimeZone::NewYork);

    int width_minutes() const { return width_minutes_; }
    int intervals_per_day() const { return intervals_per_day_; }
    ExchangeTimeZone time_zone() const { return tz_; }
    std::size_t num_days() const { return dates_.size(); }
    std::size_t num_periods() const { return dates_.size() * static_cast<std::size_t>(intervals_per_day_); }
    const std::vector<std::chrono::sys_days>& dates() const { return dates_; }
    std::chrono::sys_days date(std::size_t day) const { return dates_.at(day); }
    std::optional<std::size_t> day_of(std::chrono::sys_days date) const;

    std::int64_t session_open_ms(std::size_t day) const { return open_ms_.at(day); }
    std::int64_t session_close_ms(std::size_t day) const;
    std::int64_t slot_start_ms(std::size_t day, std::size_t slot) const;
    std::int64_t slot_end_ms(std::size_t day, std::size_t slot) const;

    std::optional<SlotRef> locate(std::int64_t ts_ms) const;

    std::int64_t global_index(SlotRef ref) const {
        return static_cast<std::int64_t>(ref.day) * intervals_per_day_ + ref.slot;
    }
    SlotRef from_global(std::int64_t t) const {
        return {static_cast<std::uint32_t>(t / intervals_per_day_), static_cast<std::uint32_t>(t % intervals_per_day_)};
    }

    // Restricts to dates in [from, to]; either bound may be absent.
    TradingCalendar restricted(std::optional<std::chrono::sys_days> from,
                               std::optional<std::chrono::sys_days> to) const;

    // 1 = Monday ... 5 = Friday.
    int weekday(std::size_t day) const;
    int month(std::size_t day) const;
    int year(std::size_t day) const;
    // Months are keyed as year * 12 + (month - 1).
    int month_key(std::size_t day) const;
    bool is_turn_of_month(std::size_t day) const;

private:
    std::vector<std::chrono::sys_days> dates_;
    std::vector<std::int64_t> open_ms_;
    int width_minutes_{30};
    int intervals_per_day_{13};
    ExchangeTimeZone tz_{ExchangeTimeZone::NewYork};
};

// Maps a UTC millisecond timestamp to its (day, slot). 16:00:00.000 exactly
// belongs to the last slot; anything outside the session is nullopt.
std::optional<SlotRef> interval_of(std::int64_t ts_ms, const TradingCalendar& calendar);

std::optional<std::chrono::sys_days> parse_iso_date(std::string_view text);
std::string format_iso_date(std::chrono::sys_days date);

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LoadStats {
    std::size_t rows{};
    std::size_t emitted{};
    std::size_t rejected{};
    std::size_t out_of_session{};
    std::vector<std::string> reject_samples;  // first few diagnostics, "line N: reason"
};

template <class Tick>
struct TickBatch {
    std::vector<Tick> ticks;  // ordered by (symbol id, ts), file order kept for ties
    LoadStats stats;
};

// Trade CSV: symbol,ts_ms,price,size. Quote CSV: symbol,ts_ms,bid,ask.
// Throws InputError when the file cannot be opened or the header is wrong.
TickBatch<TradeTick> load_trades(const std::filesystem::path& path, const TradingCalendar& calendar,
                                 SymbolTable& symbols);
TickBatch<QuoteTick> load_quotes(const std::filesystem::path& path, const TradingCalendar& calendar,
                                 SymbolTable& symbols);

// Meta CSV: symbol,year,market_cap,sp500_flag.
MetaTable load_meta(const std::filesystem::path& path, LoadStats* stats = nullptr);
// One ISO date per line; blank lines and '#' comments are ignored.
std::vector<std::chrono::sys_days> load_calendar_dates(const std::filesystem::path& path);

}  // namespace intraday
