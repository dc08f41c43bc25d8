#include "intraday/marketdata.hpp"

#include <algorithm>
#include <cstdio>

#include "csv.hpp"

namespace intraday {

namespace chr = std::chrono;

namespace {

constexpr std::int64_t kMsPerMinute = 60'000;
constexpr std::int64_t kMsPerDay = 86'400'000;
constexpr std::size_t kMaxRejectSamples = 20;

chr::sys_days nth_sunday(chr::year y, chr::month m, unsigned n) {
    return chr::sys_days{chr::year_month_weekday{y, m, chr::weekday_indexed{chr::Sunday, n}}};
}

chr::sys_days last_sunday(chr::year y, chr::month m) {
    return chr::sys_days{chr::year_month_weekday_last{y, m, chr::weekday_last{chr::Sunday}}};
}

void note_reject(LoadStats& stats, std::size_t line, std::string_view reason) {
    ++stats.rejected;
    if (stats.reject_samples.size() < kMaxRejectSamples) {
        stats.reject_samples.push_back("line " + std::to_string(line) + ": " + std::string(reason));
    }
}

void expect_header(csv::LineReader& reader, const std::filesystem::path& path, std::string_view expected) {
    std::string_view header;
    if (!reader.next(header)) throw InputError(path.string() + ": empty file, expected header '" + std::string(expected) + "'");
    if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.remove_prefix(3);  // UTF-8 BOM
    if (header != expected) {
        throw InputError(path.string() + ": header '" + std::string(header) + "' does not match '" +
                         std::string(expected) + "'");
    }
}

template <class Tick>
void order_by_symbol_time(std::vector<Tick>& ticks) {
    auto less = [](const Tick& a, const Tick& b) {
        return a.symbol != b.symbol ? a.symbol < b.symbol : a.ts_ms < b.ts_ms;
    };
    if (!std::is_sorted(ticks.begin(), ticks.end(), less)) std::stable_sort(ticks.begin(), ticks.end(), less);
}

// Parses a four-column tick file; `parse_row` converts fields 2..3 and returns
// an error string on rejection.
template <class Tick, class RowParser>
TickBatch<Tick> load_tick_file(const std::filesystem::path& path, std::string_view header,
                               const TradingCalendar& calendar, SymbolTable& symbols, RowParser&& parse_row) {
    csv::LineReader reader(path);
    expect_header(reader, path, header);
    TickBatch<Tick> batch;
    std::string_view line;
    std::string_view fields[4];
    while (reader.next(line)) {
        if (line.empty()) continue;
        ++batch.stats.rows;
        if (csv::split(line, fields, 4) != 4) {
            note_reject(batch.stats, reader.line_number(), "expected 4 fields");
            continue;
        }
        if (fields[0].empty()) {
            note_reject(batch.stats, reader.line_number(), "empty symbol");
            continue;
        }
        const auto ts = csv::parse_int<std::int64_t>(fields[1]);
        if (!ts) {
            note_reject(batch.stats, reader.line_number(), "bad timestamp");
            continue;
        }
        Tick tick{};
        tick.ts_ms = *ts;
        if (const char* error = parse_row(fields[2], fields[3], tick)) {
            note_reject(batch.stats, reader.line_number(), error);
            continue;
        }
        if (!calendar.locate(*ts)) {
            ++batch.stats.out_of_session;
            continue;
        }
        tick.symbol = symbols.intern(fields[0]);
        batch.ticks.push_back(tick);
    }
    batch.stats.emitted = batch.ticks.size();
    order_by_symbol_time(batch.ticks);
    return batch;
}

}  // namespace

SymbolId SymbolTable::intern(std::string_view name) {
    // Heterogeneous lookup on unordered_map needs C++20 transparent hashing,
    // which libstdc++ 11 lacks; the temporary string is cheap next to parsing.
    std::string key(name);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    const auto id = static_cast<SymbolId>(names_.size());
    names_.push_back(key);
    index_.emplace(std::move(key), id);
    return id;
}

std::optional<SymbolId> SymbolTable::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<double> SecurityMeta::market_cap(int year) const {
    auto it = year_end_market_cap.find(year);
    if (it == year_end_market_cap.end()) return std::nullopt;
    return it->second;
}

std::optional<bool> SecurityMeta::sp500(int year) const {
    auto it = sp500_member.find(year);
    if (it == sp500_member.end()) return std::nullopt;
    return it->second;
}

std::optional<int> SecurityMeta::first_year() const {
    if (year_end_market_cap.empty()) return std::nullopt;
    return year_end_market_cap.begin()->first;
}

std::optional<int> SecurityMeta::last_year() const {
    if (year_end_market_cap.empty()) return std::nullopt;
    return year_end_market_cap.rbegin()->first;
}

std::optional<ExchangeTimeZone> parse_time_zone(std::string_view name) {
    if (name == "America/New_York") return ExchangeTimeZone::NewYork;
    if (name == "UTC") return ExchangeTimeZone::Utc;
    return std::nullopt;
}

std::string_view time_zone_name(ExchangeTimeZone tz) {
    return tz == ExchangeTimeZone::NewYork ? "America/New_York" : "UTC";
}

int utc_offset_minutes(ExchangeTimeZone tz, chr::sys_days local_date) {
    if (tz == ExchangeTimeZone::Utc) return 0;
    const chr::year_month_day ymd{local_date};
    const auto y = ymd.year();
    chr::sys_days dst_start;
    chr::sys_days dst_end;
    if (y >= chr::year{2007}) {
        dst_start = nth_sunday(y, chr::March, 2);
        dst_end = nth_sunday(y, chr::November, 1);
    } else {
        dst_start = nth_sunday(y, chr::April, 1);
        dst_end = last_sunday(y, chr::October);
    }
    // Transitions happen at 02:00 on Sundays, when the exchange is closed.
    const bool daylight = local_date >= dst_start && local_date < dst_end;
    return daylight ? -240 : -300;
}

TradingCalendar::TradingCalendar(std::vector<chr::sys_days> dates, int width_minutes, ExchangeTimeZone tz)
    : dates_(std::move(dates)), width_minutes_(width_minutes), tz_(tz) {
    if (width_minutes != 30 && width_minutes != 5) {
        throw std::invalid_argument("interval width must be 30 or 5 minutes, got " + std::to_string(width_minutes));
    }
    intervals_per_day_ = kSessionMinutes / width_minutes;
    std::sort(dates_.begin(), dates_.end());
    dates_.erase(std::unique(dates_.begin(), dates_.end()), dates_.end());
    open_ms_.reserve(dates_.size());
    for (auto d : dates_) {
        const std::int64_t local_midnight = static_cast<std::int64_t>(d.time_since_epoch().count()) * kMsPerDay;
        const std::int64_t local_open = local_midnight + kOpenMinute * kMsPerMinute;
        open_ms_.push_back(local_open - utc_offset_minutes(tz, d) * kMsPerMinute);
    }
}

TradingCalendar TradingCalendar::weekdays(chr::sys_days first, std::size_t count, int width_minutes,
                                          ExchangeTimeZone tz) {
    std::vector<chr::sys_days> dates;
    dates.reserve(count);
    for (auto d = first; dates.size() < count; d += chr::days{1}) {
        const chr::weekday wd{d};
        if (wd != chr::Saturday && wd != chr::Sunday) dates.push_back(d);
    }
    return TradingCalendar(std::move(dates), width_minutes, tz);
}

std::optional<std::size_t> TradingCalendar::day_of(chr::sys_days date) const {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), date);
    if (it == dates_.end() || *it != date) return std::nullopt;
    return static_cast<std::size_t>(it - dates_.begin());
}

std::int64_t TradingCalendar::session_close_ms(std::size_t day) const {
    return open_ms_.at(day) + kSessionMinutes * kMsPerMinute;
}

std::int64_t TradingCalendar::slot_start_ms(std::size_t day, std::size_t slot) const {
    return open_ms_.at(day) + static_cast<std::int64_t>(slot) * width_minutes_ * kMsPerMinute;
}

std::int64_t TradingCalendar::slot_end_ms(std::size_t day, std::size_t slot) const {
    return slot_start_ms(day, slot + 1);
}

std::optional<SlotRef> TradingCalendar::locate(std::int64_t ts_ms) const {
    auto it = std::upper_bound(open_ms_.begin(), open_ms_.end(), ts_ms);
    if (it == open_ms_.begin()) return std::nullopt;
    const auto day = static_cast<std::size_t>(it - open_ms_.begin()) - 1;
    const std::int64_t offset = ts_ms - open_ms_[day];
    const std::int64_t session_ms = kSessionMinutes * kMsPerMinute;
    if (offset > session_ms) return std::nullopt;
    const std::int64_t width_ms = width_minutes_ * kMsPerMinute;
    const auto slot = std::min<std::int64_t>(offset / width_ms, intervals_per_day_ - 1);
    return SlotRef{static_cast<std::uint32_t>(day), static_cast<std::uint32_t>(slot)};
}

TradingCalendar TradingCalendar::restricted(std::optional<chr::sys_days> from, std::optional<chr::sys_days> to) const {
    std::vector<chr::sys_days> kept;
    for (auto d : dates_) {
        if (from && d < *from) continue;
        if (to && d > *to) continue;
        kept.push_back(d);
    }
    return TradingCalendar(std::move(kept), width_minutes_, tz_);
}

int TradingCalendar::weekday(std::size_t day) const {
    return static_cast<int>(chr::weekday{dates_.at(day)}.iso_encoding());
}

int TradingCalendar::month(std::size_t day) const {
    return static_cast<int>(static_cast<unsigned>(chr::year_month_day{dates_.at(day)}.month()));
}

int TradingCalendar::year(std::size_t day) const {
    return static_cast<int>(chr::year_month_day{dates_.at(day)}.year());
}

int TradingCalendar::month_key(std::size_t day) const {
    return year(day) * 12 + month(day) - 1;
}

namespace {

bool is_weekday(chr::sys_days d) {
    const chr::weekday wd{d};
    return wd != chr::Saturday && wd != chr::Sunday;
}

// At the calendar edges the neighbouring session is unknown; fall back to
// whether any weekday of the same month lies beyond the edge.
bool weekday_in_same_month(chr::sys_days from, int step) {
    const chr::year_month_day start{from};
    for (chr::sys_days d = from + chr::days{step};; d += chr::days{step}) {
        const chr::year_month_day ymd{d};
        if (ymd.month() != start.month()) return false;
        if (is_weekday(d)) return true;
    }
}

}  // namespace

bool TradingCalendar::is_turn_of_month(std::size_t day) const {
    const int key = month_key(day);
    const bool first = day == 0 ? !weekday_in_same_month(dates_[day], -1) : month_key(day - 1) != key;
    const bool last =
        day + 1 == dates_.size() ? !weekday_in_same_month(dates_[day], 1) : month_key(day + 1) != key;
    return first || last;
}

std::optional<SlotRef> interval_of(std::int64_t ts_ms, const TradingCalendar& calendar) {
    return calendar.locate(ts_ms);
}

std::optional<chr::sys_days> parse_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    const auto y = csv::parse_int<int>(text.substr(0, 4));
    const auto m = csv::parse_int<unsigned>(text.substr(5, 2));
    const auto d = csv::parse_int<unsigned>(text.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    const chr::year_month_day ymd{chr::year{*y}, chr::month{*m}, chr::day{*d}};
    if (!ymd.ok()) return std::nullopt;
    return chr::sys_days{ymd};
}

std::string format_iso_date(chr::sys_days date) {
    const chr::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

TickBatch<TradeTick> load_trades(const std::filesystem::path& path, const TradingCalendar& calendar,
                                 SymbolTable& symbols) {
    return load_tick_file<TradeTick>(
        path, "symbol,ts_ms,price,size", calendar, symbols,
        [](std::string_view price_field, std::string_view size_field, TradeTick& tick) -> const char* {
            const auto price = Price::parse(price_field);
            if (!price) return "bad price";
            if (price->micros() <= 0) return "price must be positive";
            const auto size = csv::parse_int<std::int32_t>(size_field);
            if (!size) return "bad size";
            if (*size < 1) return "size must be at least 1";
            tick.price = *price;
            tick.size = *size;
            return nullptr;
        });
}

TickBatch<QuoteTick> load_quotes(const std::filesystem::path& path, const TradingCalendar& calendar,
                                 SymbolTable& symbols) {
    return load_tick_file<QuoteTick>(
        path, "symbol,ts_ms,bid,ask", calendar, symbols,
        [](std::string_view bid_field, std::string_view ask_field, QuoteTick& tick) -> const char* {
            const auto bid = Price::parse(bid_field);
            const auto ask = Price::parse(ask_field);
            if (!bid || !ask) return "bad quote price";
            if (bid->micros() <= 0 || ask->micros() <= 0) return "quote prices must be positive";
            if (*bid > *ask) return "crossed quote (bid > ask)";
            tick.bid = *bid;
            tick.ask = *ask;
            return nullptr;
        });
}

MetaTable load_meta(const std::filesystem::path& path, LoadStats* stats) {
    csv::LineReader reader(path);
    expect_header(reader, path, "symbol,year,market_cap,sp500_flag");
    LoadStats local;
    LoadStats& st = stats ? *stats : local;
    MetaTable table;
    std::string_view line;
    std::string_view fields[4];
    while (reader.next(line)) {
        if (line.empty()) continue;
        ++st.rows;
        if (csv::split(line, fields, 4) != 4 || fields[0].empty()) {
            note_reject(st, reader.line_number(), "expected 4 fields");
            continue;
        }
        const auto year = csv::parse_int<int>(fields[1]);
        const auto cap = csv::parse_real(fields[2]);
        const auto flag = csv::parse_int<int>(fields[3]);
        if (!year || !cap || !flag || (*flag != 0 && *flag != 1)) {
            note_reject(st, reader.line_number(), "unparseable meta row");
            continue;
        }
        auto& meta = table[std::string(fields[0])];
        if (!std::isnan(*cap)) {
            if (*cap <= 0) {
                note_reject(st, reader.line_number(), "market cap must be positive");
                continue;
            }
            meta.year_end_market_cap[*year] = *cap;
        }
        meta.sp500_member[*year] = *flag == 1;
        ++st.emitted;
    }
    return table;
}

std::vector<chr::sys_days> load_calendar_dates(const std::filesystem::path& path) {
    csv::LineReader reader(path);
    std::vector<chr::sys_days> dates;
    std::string_view line;
    while (reader.next(line)) {
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
        if (line.empty() || line.front() == '#') continue;
        const auto date = parse_iso_date(line);
        if (!date) {
            throw InputError(path.string() + ": line " + std::to_string(reader.line_number()) + ": bad date '" +
                             std::string(line) + "'");
        }
        dates.push_back(*date);
    }
    return dates;
}

}  // namespace intraday
