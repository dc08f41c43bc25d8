#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "intraday/marketdata.hpp"
#include "intraday/portfolio.hpp"
#include "intraday/simkit.hpp"

namespace intraday {

// Unknown key or unparsable value; names the key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& why)
        : std::runtime_error("config key '" + key + "': " + why), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// A required input file or directory does not exist.
class MissingPathError : public std::runtime_error {
public:
    explicit MissingPathError(const std::filesystem::path& path)
        : std::runtime_error("missing input path: " + path.string()), path_(path) {}
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

// Flat `key = value` text with `#` comments.
ConfigEntries parse_config_text(std::string_view text, std::string_view origin = "config");
ConfigEntries read_config_file(const std::filesystem::path& path);

struct RunConfig {
    std::filesystem::path out{"out"};
    std::filesystem::path trades;
    std::filesystem::path quotes;
    std::filesystem::path meta;
    std::filesystem::path calendar;
    int threads{1};
    int width_minutes{30};
    ExchangeTimeZone time_zone{ExchangeTimeZone::NewYork};
    std::optional<std::chrono::sys_days> from;
    std::optional<std::chrono::sys_days> to;
    bool winsorize{false};
    double winsorize_level{0.01};
    bool dimson{false};
    int dimson_leads_lags{13};
    CostMode cost_mode{CostMode::Raw};
    std::uint64_t seed{1};
    SimConfig sim;
    int max_lag{0};  // 0: five trading days
    bool multi_lag{false};
    int newey_west_lags{0};
    int strategy_days{5};
    double min_price{5.0};
    double min_avg_trades{10.0};
    double max_rel_spread{kDefaultMaxRelSpread};
    bool signed_trades{false};

    // Effective key/value pairs in canonical (sorted) order.
    ConfigEntries entries;

    int intervals_per_day() const { return 390 / width_minutes; }
    int effective_max_lag() const { return max_lag > 0 ? max_lag : 5 * intervals_per_day(); }
    std::uint64_t hash() const;
};

// Defaults, then the file, then overrides; every key is validated before
// any computation starts.
RunConfig make_run_config(const ConfigEntries& file_entries, const ConfigEntries& overrides);

// Documented keys with their defaults, for help output.
const ConfigEntries& default_config_entries();

void cmd_simulate(const RunConfig& config, std::ostream& log);
void cmd_bars(const RunConfig& config, std::ostream& log);
void cmd_respond(const RunConfig& config, std::ostream& log);
void cmd_deciles(const RunConfig& config, std::ostream& log);
void cmd_report(const RunConfig& config, std::ostream& log);

// Exit codes: 0 success, 2 missing input path or invalid configuration,
// 1 any other failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace intraday
