#include "intraday/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "csv.hpp"

namespace intraday {

namespace {

constexpr double kBasisPoints = 1e4;

std::string_view decile_label(std::size_t d) {
    static constexpr std::string_view labels[] = {"1", "2", "3", "4", "5", "6", "7", "8", "9", "10"};
    return labels[d];
}

std::string format_cell(std::optional<double> value, Measure measure) {
    if (!value || std::isnan(*value)) return "NA";
    if (measure == Measure::Count) return std::to_string(static_cast<long long>(*value));
    return format_fixed2(*value);
}

[[noreturn]] void bad_row(const std::filesystem::path& path, std::size_t line, std::string_view why) {
    throw InputError(path.string() + ": line " + std::to_string(line) + ": " + std::string(why));
}

template <class T>
T require(std::optional<T> v, const std::filesystem::path& path, std::size_t line, std::string_view field) {
    if (!v) bad_row(path, line, "bad " + std::string(field));
    return *v;
}

void expect_header(csv::LineReader& reader, std::string_view header, const std::filesystem::path& path) {
    std::string_view line;
    if (!reader.next(line)) throw InputError(path.string() + ": empty file");
    if (line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (line != header) throw InputError(path.string() + ": expected header '" + std::string(header) + "'");
}

}  // namespace

std::string format_fixed2(double value) {
    if (!std::isfinite(value)) return "NA";
    const double scaled = std::nearbyint(value * 100.0);  // default rounding mode: half to even
    if (std::fabs(scaled) > 9.0e15) return "NA";
    auto cents = static_cast<long long>(scaled);
    const bool negative = cents < 0;
    if (negative) cents = -cents;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", negative ? "-" : "", cents / 100, cents % 100);
    return buf;
}

std::string format_bp(double raw) { return format_fixed2(raw * kBasisPoints); }

CurvePoint to_curve_point(const ResponseCurve& curve) {
    return {curve.lag, curve.fm.mean * kBasisPoints, curve.fm.t_stat, curve.fm.n_periods};
}

void write_curve_csv(const std::vector<CurvePoint>& points, const std::filesystem::path& path) {
    auto out = csv::open_output(path);
    out << "lag,mean_bp,t_stat,n_periods\n";
    for (const auto& p : points) {
        const double mean = p.n_periods > 0 ? p.mean_bp : std::nan("");
        out << p.lag << ',' << csv::format_real(mean) << ',' << csv::format_real(p.t_stat) << ',' << p.n_periods
            << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path) {
    csv::LineReader reader(path);
    expect_header(reader, "lag,mean_bp,t_stat,n_periods", path);
    std::vector<CurvePoint> points;
    std::string_view line;
    std::string_view f[4];
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto ln = reader.line_number();
        if (csv::split(line, f, 4) != 4) bad_row(path, ln, "expected 4 fields");
        CurvePoint p;
        p.lag = require(csv::parse_int<int>(f[0]), path, ln, "lag");
        p.mean_bp = require(csv::parse_real(f[1]), path, ln, "mean_bp");
        p.t_stat = require(csv::parse_real(f[2]), path, ln, "t_stat");
        p.n_periods = require(csv::parse_int<std::size_t>(f[3]), path, ln, "n_periods");
        points.push_back(p);
    }
    return points;
}

std::vector<DecileRecord> decile_records(const std::string& strategy, const std::string& slice,
                                         const SliceStats& stats) {
    std::vector<DecileRecord> out;
    for (std::size_t d = 0; d < static_cast<std::size_t>(kDeciles); ++d) {
        const auto& fm = stats.decile_fm[d];
        out.push_back({strategy, slice, std::string(decile_label(d)),
                       fm.n_periods > 0 ? fm.mean * kBasisPoints : std::nan(""), fm.t_stat, fm.n_periods});
    }
    const auto& fm = stats.spread_fm;
    out.push_back({strategy, slice, "10-1", fm.n_periods > 0 ? fm.mean * kBasisPoints : std::nan(""), fm.t_stat,
                   fm.n_periods});
    return out;
}

void write_decile_csv(const std::vector<DecileRecord>& records, const std::filesystem::path& path) {
    auto out = csv::open_output(path);
    out << "strategy,slice,decile,mean_bp,t_stat,n\n";
    for (const auto& r : records) {
        out << r.strategy << ',' << r.slice << ',' << r.decile << ',' << csv::format_real(r.mean_bp) << ','
            << csv::format_real(r.t_stat) << ',' << r.n << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<DecileRecord> read_decile_csv(const std::filesystem::path& path) {
    csv::LineReader reader(path);
    expect_header(reader, "strategy,slice,decile,mean_bp,t_stat,n", path);
    std::vector<DecileRecord> records;
    std::string_view line;
    std::string_view f[6];
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto ln = reader.line_number();
        if (csv::split(line, f, 6) != 6) bad_row(path, ln, "expected 6 fields");
        DecileRecord r;
        r.strategy = f[0];
        r.slice = f[1];
        r.decile = f[2];
        r.mean_bp = require(csv::parse_real(f[3]), path, ln, "mean_bp");
        r.t_stat = require(csv::parse_real(f[4]), path, ln, "t_stat");
        r.n = require(csv::parse_int<std::size_t>(f[5]), path, ln, "n");
        records.push_back(std::move(r));
    }
    return records;
}

void ResultStore::add_curve(const NamedCurve& curve) {
    for (const auto& p : curve.points) {
        values_[{curve.series, "all", "lag=" + std::to_string(p.lag)}] = {p.mean_bp, p.t_stat, p.n_periods};
    }
}

void ResultStore::add_deciles(const std::vector<DecileRecord>& records) {
    for (const auto& r : records) values_[{r.strategy, r.slice, r.decile}] = {r.mean_bp, r.t_stat, r.n};
}

std::optional<double> ResultStore::get(const Key& key, Measure measure) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const Value& v = it->second;
    if (v.n == 0) return std::nullopt;  // empty slice: missing, never zero
    switch (measure) {
        case Measure::Mean: return v.mean_bp;
        case Measure::TStat: return v.t_stat;
        case Measure::Count: return static_cast<double>(v.n);
    }
    return std::nullopt;
}

RenderedTable render_table(const TableSpec& spec, const ResultStore& results) {
    RenderedTable table;
    table.header.push_back(spec.row_header);
    for (const auto& c : spec.columns) table.header.push_back(c.label);
    for (const auto& r : spec.rows) {
        std::vector<std::string> line{r.label};
        for (const auto& c : spec.columns) {
            const auto series = c.series ? c.series : r.series;
            const auto slice = c.slice ? c.slice : r.slice;
            const auto item = c.item ? c.item : r.item;
            const auto measure = c.measure ? c.measure : r.measure;
            if (!series || !slice || !item || !measure) {
                throw std::invalid_argument(spec.id + ": cell (" + r.label + ", " + c.label + ") is not fully addressed");
            }
            line.push_back(format_cell(results.get({*series, *slice, *item}, *measure), *measure));
        }
        table.cells.push_back(std::move(line));
    }
    return table;
}

void emit_table(const TableSpec& spec, const ResultStore& results, const std::filesystem::path& dir) {
    const RenderedTable table = render_table(spec, results);

    auto csv_out = csv::open_output(dir / (spec.id + ".csv"));
    auto write_csv_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) csv_out << (i ? "," : "") << row[i];
        csv_out << '\n';
    };
    write_csv_row(table.header);
    for (const auto& row : table.cells) write_csv_row(row);

    std::vector<std::size_t> width(table.header.size(), 0);
    auto widen = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    };
    widen(table.header);
    for (const auto& row : table.cells) widen(row);

    auto txt = csv::open_output(dir / (spec.id + ".txt"));
    auto write_txt_row = [&](const std::vector<std::string>& row) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            const std::string pad(width[i] - row[i].size(), ' ');
            if (i == 0) {
                line += row[i] + pad;
            } else {
                line += "  " + pad + row[i];
            }
        }
        txt << line << '\n';
    };
    txt << spec.title << '\n';
    write_txt_row(table.header);
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    txt << std::string(total - 2, '-') << '\n';
    for (const auto& row : table.cells) write_txt_row(row);
    if (!csv_out || !txt) throw std::runtime_error("write failed under " + dir.string());
}

void emit_figure_data(const std::vector<NamedCurve>& curves, const std::filesystem::path& path) {
    auto out = csv::open_output(path);
    out << "lag,value,t_stat,series\n";
    for (const auto& curve : curves) {
        for (const auto& p : curve.points) {
            const bool present = p.n_periods > 0;
            out << p.lag << ',' << (present ? format_fixed2(p.mean_bp) : "NA") << ','
                << (present ? format_fixed2(p.t_stat) : "NA") << ',' << curve.series << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

void write_manifest(const std::vector<std::pair<std::string, std::string>>& entries,
                    const std::filesystem::path& path) {
    auto out = csv::open_output(path);
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace intraday
