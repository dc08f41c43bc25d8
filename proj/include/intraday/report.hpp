#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "intraday/portfolio.hpp"
#include "intraday/regression.hpp"

namespace intraday {

inline constexpr std::string_view kEngineVersion = "1.0.0";

// Fixed two-decimal rendering with round-half-to-even; NaN renders as NA.
std::string format_fixed2(double value);
// Raw return -> basis points (x 1e4) at two decimals.
std::string format_bp(double raw);

// One lag of a response curve in report units.
struct CurvePoint {
    int lag{};
    double mean_bp{};
    double t_stat{};
    std::size_t n_periods{};
};

struct NamedCurve {
    std::string series;
    std::vector<CurvePoint> points;  // ascending lag
};

CurvePoint to_curve_point(const ResponseCurve& curve);

// lag,mean_bp,t_stat,n_periods at full precision.
void write_curve_csv(const std::vector<CurvePoint>& points, const std::filesystem::path& path);
std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path);

// One cell of a decile report: decile is "1".."10" or "10-1".
struct DecileRecord {
    std::string strategy;
    std::string slice;
    std::string decile;
    double mean_bp{};
    double t_stat{};
    std::size_t n{};
};

std::vector<DecileRecord> decile_records(const std::string& strategy, const std::string& slice,
                                         const SliceStats& stats);

// strategy,slice,decile,mean_bp,t_stat,n at full precision.
void write_decile_csv(const std::vector<DecileRecord>& records, const std::filesystem::path& path);
std::vector<DecileRecord> read_decile_csv(const std::filesystem::path& path);

enum class Measure { Mean, TStat, Count };

// Every reportable number addressed by (series, slice, item, measure):
// deciles use (strategy, slice, decile); curves use (series, "all", "lag=k").
class ResultStore {
public:
    struct Key {
        std::string series;
        std::string slice;
        std::string item;
        auto operator<=>(const Key&) const = default;
    };
    struct Value {
        double mean_bp{};
        double t_stat{};
        std::size_t n{};
    };

    void add_curve(const NamedCurve& curve);
    void add_deciles(const std::vector<DecileRecord>& records);
    std::optional<double> get(const Key& key, Measure measure) const;
    bool empty() const { return values_.empty(); }

private:
    std::map<Key, Value> values_;
};

// A table axis entry fixes some coordinates of its cells; row and column
// entries together must fix series, slice, item and measure.
struct AxisEntry {
    std::string label;
    std::optional<std::string> series;
    std::optional<std::string> slice;
    std::optional<std::string> item;
    std::optional<Measure> measure;
};

struct TableSpec {
    std::string id;          // file stem, e.g. "table_II"
    std::string title;
    std::string row_header;
    std::vector<AxisEntry> rows;
    std::vector<AxisEntry> columns;
};

struct RenderedTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> cells;  // rows x (1 + columns)
};

RenderedTable render_table(const TableSpec& spec, const ResultStore& results);

// Writes <dir>/<id>.csv and <dir>/<id>.txt.
void emit_table(const TableSpec& spec, const ResultStore& results, const std::filesystem::path& dir);

// Long format lag,value,t_stat,series; one row per (series, lag).
void emit_figure_data(const std::vector<NamedCurve>& curves, const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view text);

// key = value lines in insertion order.
void write_manifest(const std::vector<std::pair<std::string, std::string>>& entries,
                    const std::filesystem::path& path);

}  // namespace intraday
