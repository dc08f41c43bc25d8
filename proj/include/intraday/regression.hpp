#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "intraday/bars.hpp"

namespace intraday {

// Row-major dense matrix used for regression designs.
struct DesignMatrix {
    std::size_t rows{0};
    std::size_t cols{0};
    std::vector<double> data;

    DesignMatrix() = default;
    DesignMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class FitStatus { Ok, RankDeficient, TooFewObservations };

struct OlsFit {
    FitStatus status{FitStatus::TooFewObservations};
    std::vector<double> coef;  // in column order of the design
    bool ok() const { return status == FitStatus::Ok; }
};

// Relative pivot threshold below which a design is treated as rank deficient.
inline constexpr double kRankTolerance = 1e-10;

// OLS by column-pivoted Householder QR. X must already contain the intercept
// column if one is wanted. Requires n > p.
OlsFit xs_ols(std::span<const double> y, const DesignMatrix& x);

struct SimpleFit {
    double alpha{};
    double gamma{};
};

// Intercept plus one regressor: gamma = cov(y, x) / var(x).
std::optional<SimpleFit> xs_slope(std::span<const double> y, std::span<const double> x);

// Zero-cost portfolio weights w with sum(w) = 0 and w . x = 1; w . y equals
// the simple-regression slope of y on x.
std::vector<double> implied_weights(std::span<const double> x);

struct FmStats {
    double mean{};
    double t_stat{};      // NaN when fewer than two periods or zero dispersion
    double std_error{};
    std::size_t n_periods{};
};

// Time-series mean of cross-sectional estimates with its t-statistic.
// newey_west_lags = 0 gives the plain sample-variance standard error.
FmStats fama_macbeth(std::span<const double> series, int newey_west_lags = 0);

struct SlopeObservation {
    std::int64_t t{};
    double value{};
    std::uint32_t n{};  // cross-section size
};

struct ResponseCurve {
    int lag{};
    std::vector<SlopeObservation> slopes;  // ascending t
    FmStats fm;
    std::size_t skipped{};        // cross-sections that could not be estimated
    std::size_t small_sections{}; // estimated with n < 30

    // FM statistics over the subset of periods accepted by `keep(t)`.
    FmStats conditional(const std::function<bool(std::int64_t)>& keep, int newey_west_lags = 0) const;
};

struct ResponseOptions {
    int threads{1};
    int newey_west_lags{0};
};

inline constexpr std::uint32_t kSmallCrossSection = 30;

// Simple regression of y(t) on x(t - k) across symbols, for every t.
ResponseCurve cross_response(const PanelMatrix& y, const PanelMatrix& x, int k, const ResponseOptions& options = {});

// Regression of a panel on its own k-th lag.
ResponseCurve lag_response(const PanelMatrix& panel, int k, const ResponseOptions& options = {});

// Same engine applied to a derived variable panel.
inline ResponseCurve variable_response(const PanelMatrix& panel, int k, const ResponseOptions& options = {}) {
    return lag_response(panel, k, options);
}

// Joint regression on lags 1..max_lag; element j is the curve for lag j + 1.
std::vector<ResponseCurve> multi_lag_response(const PanelMatrix& panel, int max_lag,
                                              const ResponseOptions& options = {});

struct ControlledResponse {
    ResponseCurve gamma;
    std::vector<ResponseCurve> deltas;  // one per control, same order
};

// Return on lagged return plus lagged controls; rows missing any control are
// dropped from that cross-section.
ControlledResponse controlled_response(const PanelMatrix& returns, std::span<const PanelMatrix* const> controls,
                                       int k, const ResponseOptions& options = {});

// Equal-weighted mean of the available returns at each t (NaN if none).
std::vector<double> equal_weighted_market(const PanelMatrix& returns);

struct DimsonFit {
    bool estimated{false};
    double alpha{};
    std::vector<double> betas;  // market lags -L..+L
    std::size_t n_obs{};
};

struct DimsonResult {
    std::vector<DimsonFit> fits;  // per symbol
    PanelMatrix adjusted;         // r - sum(beta_j * m_{t+j}) = alpha + residual
};

// Market model with leads and lags of the market return. Periods without the
// full set of leads and lags are dropped from the fit.
DimsonResult dimson_alpha(const PanelMatrix& returns, std::span<const double> market, int leads_lags = 13,
                          int threads = 1);

enum class PercentileRule {
    // Inward order statistic: x[ceil(h)] for the low tail, x[floor(h)] for
    // the high tail, h = (n - 1) * q. Idempotent.
    OrderStatistic,
    // Linear interpolation between neighbouring order statistics.
    Interpolated,
};

struct WinsorizeResult {
    std::vector<double> values;
    std::vector<int> unmodified_months;  // months with fewer than 3 observations
};

// Clips each month's observations to that month's [level, 1 - level]
// percentiles. month_keys[i] labels values[i]; NaN values pass through.
WinsorizeResult winsorize_monthly(std::span<const double> values, std::span<const int> month_keys,
                                  double level = 0.01, PercentileRule rule = PercentileRule::OrderStatistic);

}  // namespace intraday
