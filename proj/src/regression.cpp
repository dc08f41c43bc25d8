#include "intraday/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "intraday/parallel.hpp"

namespace intraday {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_grid(const PanelMatrix& a, const PanelMatrix& b) {
    if (!a.same_grid(b)) throw std::invalid_argument("panels " + a.tag() + " and " + b.tag() + " are not aligned");
}

void finish_curve(ResponseCurve& curve, std::vector<std::optional<SlopeObservation>>& per_t, int nw_lags) {
    for (auto& obs : per_t) {
        if (!obs) continue;
        if (obs->n < kSmallCrossSection) ++curve.small_sections;
        curve.slopes.push_back(*obs);
    }
    std::vector<double> series;
    series.reserve(curve.slopes.size());
    for (const auto& s : curve.slopes) series.push_back(s.value);
    curve.fm = fama_macbeth(series, nw_lags);
}

}  // namespace

OlsFit xs_ols(std::span<const double> y, const DesignMatrix& x) {
    if (x.rows != y.size()) throw std::invalid_argument("xs_ols: design rows do not match y");
    OlsFit fit;
    if (x.cols == 0 || x.rows <= x.cols) return fit;
    Eigen::Map<const RowMajor> design(x.data.data(), static_cast<Eigen::Index>(x.rows),
                                      static_cast<Eigen::Index>(x.cols));
    Eigen::Map<const Eigen::VectorXd> response(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < static_cast<Eigen::Index>(x.cols)) {
        fit.status = FitStatus::RankDeficient;
        return fit;
    }
    const Eigen::VectorXd beta = qr.solve(response);
    fit.status = FitStatus::Ok;
    fit.coef.assign(beta.data(), beta.data() + beta.size());
    return fit;
}

std::optional<SimpleFit> xs_slope(std::span<const double> y, std::span<const double> x) {
    if (x.size() != y.size()) throw std::invalid_argument("xs_slope: size mismatch");
    const std::size_t n = x.size();
    if (n < 3) return std::nullopt;
    double mx = 0;
    double my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0;
    double sxy = 0;
    double ssq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
        ssq += x[i] * x[i];
    }
    if (!(sxx > kRankTolerance * kRankTolerance * ssq)) return std::nullopt;
    const double gamma = sxy / sxx;
    return SimpleFit{my - gamma * mx, gamma};
}

std::vector<double> implied_weights(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> w(n, 0.0);
    if (n == 0) return w;
    double mx = 0;
    for (double v : x) mx += v;
    mx /= static_cast<double>(n);
    double sxx = 0;
    for (double v : x) sxx += (v - mx) * (v - mx);
    if (sxx == 0) return w;
    for (std::size_t i = 0; i < n; ++i) w[i] = (x[i] - mx) / sxx;
    return w;
}

FmStats fama_macbeth(std::span<const double> series, int newey_west_lags) {
    FmStats out;
    out.n_periods = series.size();
    if (series.empty()) {
        out.mean = kNaN;
        out.t_stat = kNaN;
        out.std_error = kNaN;
        return out;
    }
    const double n = static_cast<double>(series.size());
    double mean = 0;
    for (double v : series) mean += v;
    mean /= n;
    out.mean = mean;
    if (series.size() < 2) {
        out.t_stat = kNaN;
        out.std_error = kNaN;
        return out;
    }
    double var_of_mean = 0;
    if (newey_west_lags <= 0) {
        double ss = 0;
        for (double v : series) ss += (v - mean) * (v - mean);
        var_of_mean = ss / (n - 1.0) / n;
    } else {
        auto autocov = [&](std::size_t lag) {
            double acc = 0;
            for (std::size_t i = lag; i < series.size(); ++i) acc += (series[i] - mean) * (series[i - lag] - mean);
            return acc / n;
        };
        double long_run = autocov(0);
        const auto q = static_cast<std::size_t>(newey_west_lags);
        for (std::size_t l = 1; l <= q && l < series.size(); ++l) {
            long_run += 2.0 * (1.0 - static_cast<double>(l) / static_cast<double>(q + 1)) * autocov(l);
        }
        var_of_mean = long_run / n;
    }
    out.std_error = var_of_mean > 0 ? std::sqrt(var_of_mean) : 0.0;
    out.t_stat = out.std_error > 0 ? mean / out.std_error : kNaN;
    return out;
}

FmStats ResponseCurve::conditional(const std::function<bool(std::int64_t)>& keep, int newey_west_lags) const {
    std::vector<double> series;
    for (const auto& s : slopes) {
        if (keep(s.t)) series.push_back(s.value);
    }
    return fama_macbeth(series, newey_west_lags);
}

ResponseCurve cross_response(const PanelMatrix& y, const PanelMatrix& x, int k, const ResponseOptions& options) {
    check_grid(y, x);
    if (k < 1) throw std::invalid_argument("lag must be at least 1");
    ResponseCurve curve;
    curve.lag = k;
    const std::size_t periods = y.n_periods();
    const auto lag = static_cast<std::size_t>(k);
    if (periods <= lag) return curve;
    std::vector<std::optional<SlopeObservation>> per_t(periods - lag);
    std::vector<char> skipped(periods - lag, 0);
    parallel_for(periods - lag, options.threads, [&](std::size_t idx) {
        const std::size_t t = idx + lag;
        const auto ys = y.cross_section(t);
        const auto xs = x.cross_section(t - lag);
        std::vector<double> yy;
        std::vector<double> xx;
        yy.reserve(ys.size());
        xx.reserve(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) {
            if (PanelMatrix::is_missing(ys[i]) || PanelMatrix::is_missing(xs[i])) continue;
            yy.push_back(ys[i]);
            xx.push_back(xs[i]);
        }
        if (yy.empty()) return;
        const auto fit = xs_slope(yy, xx);
        if (!fit) {
            skipped[idx] = 1;
            return;
        }
        per_t[idx] = SlopeObservation{static_cast<std::int64_t>(t), fit->gamma, static_cast<std::uint32_t>(yy.size())};
    });
    for (char s : skipped) curve.skipped += static_cast<std::size_t>(s);
    finish_curve(curve, per_t, options.newey_west_lags);
    return curve;
}

ResponseCurve lag_response(const PanelMatrix& panel, int k, const ResponseOptions& options) {
    return cross_response(panel, panel, k, options);
}

std::vector<ResponseCurve> multi_lag_response(const PanelMatrix& panel, int max_lag, const ResponseOptions& options) {
    if (max_lag < 1) throw std::invalid_argument("max_lag must be at least 1");
    // A single lag is the simple regression; reuse that path so both agree exactly.
    if (max_lag == 1) return {lag_response(panel, 1, options)};
    const auto lags = static_cast<std::size_t>(max_lag);
    std::vector<ResponseCurve> curves(lags);
    for (std::size_t j = 0; j < lags; ++j) curves[j].lag = static_cast<int>(j + 1);
    const std::size_t periods = panel.n_periods();
    if (periods <= lags) return curves;
    const std::size_t count = periods - lags;
    std::vector<std::vector<std::optional<SlopeObservation>>> per_t(lags, std::vector<std::optional<SlopeObservation>>(count));
    std::vector<char> skipped(count, 0);
    parallel_for(count, options.threads, [&](std::size_t idx) {
        const std::size_t t = idx + lags;
        const auto ys = panel.cross_section(t);
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            if (PanelMatrix::is_missing(ys[i])) continue;
            bool complete = true;
            for (std::size_t j = 1; j <= lags && complete; ++j) complete = panel.has(i, t - j);
            if (complete) members.push_back(i);
        }
        if (members.empty()) return;
        if (members.size() <= lags + 1) {
            skipped[idx] = 1;
            return;
        }
        DesignMatrix x(members.size(), lags + 1);
        std::vector<double> yy(members.size());
        for (std::size_t r = 0; r < members.size(); ++r) {
            const std::size_t i = members[r];
            yy[r] = ys[i];
            x(r, 0) = 1.0;
            for (std::size_t j = 1; j <= lags; ++j) x(r, j) = panel.at(i, t - j);
        }
        const auto fit = xs_ols(yy, x);
        if (!fit.ok()) {
            skipped[idx] = 1;
            return;
        }
        for (std::size_t j = 0; j < lags; ++j) {
            per_t[j][idx] = SlopeObservation{static_cast<std::int64_t>(t), fit.coef[j + 1],
                                             static_cast<std::uint32_t>(members.size())};
        }
    });
    for (std::size_t j = 0; j < lags; ++j) {
        for (char s : skipped) curves[j].skipped += static_cast<std::size_t>(s);
        finish_curve(curves[j], per_t[j], options.newey_west_lags);
    }
    return curves;
}

ControlledResponse controlled_response(const PanelMatrix& returns, std::span<const PanelMatrix* const> controls, int k,
                                       const ResponseOptions& options) {
    if (k < 1) throw std::invalid_argument("lag must be at least 1");
    for (const auto* c : controls) check_grid(returns, *c);
    const std::size_t n_controls = controls.size();
    const std::size_t p = n_controls + 2;
    ControlledResponse out;
    out.gamma.lag = k;
    out.deltas.resize(n_controls);
    for (auto& d : out.deltas) d.lag = k;
    const auto lag = static_cast<std::size_t>(k);
    const std::size_t periods = returns.n_periods();
    if (periods <= lag) return out;
    const std::size_t count = periods - lag;
    std::vector<std::vector<std::optional<SlopeObservation>>> per_t(n_controls + 1,
                                                                    std::vector<std::optional<SlopeObservation>>(count));
    std::vector<char> skipped(count, 0);
    parallel_for(count, options.threads, [&](std::size_t idx) {
        const std::size_t t = idx + lag;
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < returns.n_symbols(); ++i) {
            if (!returns.has(i, t) || !returns.has(i, t - lag)) continue;
            bool complete = true;
            for (const auto* c : controls) complete = complete && c->has(i, t - lag);
            if (complete) members.push_back(i);
        }
        if (members.empty()) return;
        if (members.size() <= p) {
            skipped[idx] = 1;
            return;
        }
        DesignMatrix x(members.size(), p);
        std::vector<double> yy(members.size());
        for (std::size_t r = 0; r < members.size(); ++r) {
            const std::size_t i = members[r];
            yy[r] = returns.at(i, t);
            x(r, 0) = 1.0;
            x(r, 1) = returns.at(i, t - lag);
            for (std::size_t c = 0; c < n_controls; ++c) x(r, c + 2) = controls[c]->at(i, t - lag);
        }
        const auto fit = xs_ols(yy, x);
        if (!fit.ok()) {
            skipped[idx] = 1;
            return;
        }
        const auto n = static_cast<std::uint32_t>(members.size());
        for (std::size_t c = 0; c <= n_controls; ++c) {
            per_t[c][idx] = SlopeObservation{static_cast<std::int64_t>(t), fit.coef[c + 1], n};
        }
    });
    std::size_t total_skipped = 0;
    for (char s : skipped) total_skipped += static_cast<std::size_t>(s);
    out.gamma.skipped = total_skipped;
    finish_curve(out.gamma, per_t[0], options.newey_west_lags);
    for (std::size_t c = 0; c < n_controls; ++c) {
        out.deltas[c].skipped = total_skipped;
        finish_curve(out.deltas[c], per_t[c + 1], options.newey_west_lags);
    }
    return out;
}

std::vector<double> equal_weighted_market(const PanelMatrix& returns) {
    std::vector<double> market(returns.n_periods(), kNaN);
    for (std::size_t t = 0; t < returns.n_periods(); ++t) {
        double sum = 0;
        std::size_t n = 0;
        for (double v : returns.cross_section(t)) {
            if (PanelMatrix::is_missing(v)) continue;
            sum += v;
            ++n;
        }
        if (n > 0) market[t] = sum / static_cast<double>(n);
    }
    return market;
}

DimsonResult dimson_alpha(const PanelMatrix& returns, std::span<const double> market, int leads_lags, int threads) {
    if (market.size() != returns.n_periods()) throw std::invalid_argument("market series length mismatch");
    if (leads_lags < 0) throw std::invalid_argument("leads_lags must be nonnegative");
    const auto window = static_cast<std::size_t>(leads_lags);
    const std::size_t width = 2 * window + 1;
    const std::size_t periods = returns.n_periods();

    // Periods with a complete market window.
    std::vector<char> window_ok(periods, 0);
    for (std::size_t t = window; t + window < periods; ++t) {
        bool ok = true;
        for (std::size_t j = 0; j < width && ok; ++j) ok = !std::isnan(market[t - window + j]);
        window_ok[t] = ok ? 1 : 0;
    }

    DimsonResult out;
    out.fits.resize(returns.n_symbols());
    out.adjusted = PanelMatrix(returns.tag() + "_dimson", returns.n_symbols(), periods);
    parallel_for(returns.n_symbols(), threads, [&](std::size_t i) {
        std::vector<std::size_t> obs;
        for (std::size_t t = 0; t < periods; ++t) {
            if (window_ok[t] && returns.has(i, t)) obs.push_back(t);
        }
        DimsonFit& fit = out.fits[i];
        fit.n_obs = obs.size();
        if (obs.size() <= width + 1) return;
        DesignMatrix x(obs.size(), width + 1);
        std::vector<double> y(obs.size());
        for (std::size_t r = 0; r < obs.size(); ++r) {
            const std::size_t t = obs[r];
            y[r] = returns.at(i, t);
            x(r, 0) = 1.0;
            for (std::size_t j = 0; j < width; ++j) x(r, j + 1) = market[t - window + j];
        }
        const auto ols = xs_ols(y, x);
        if (!ols.ok()) return;
        fit.estimated = true;
        fit.alpha = ols.coef[0];
        fit.betas.assign(ols.coef.begin() + 1, ols.coef.end());
        for (std::size_t t : obs) {
            double systematic = 0;
            for (std::size_t j = 0; j < width; ++j) systematic += fit.betas[j] * market[t - window + j];
            out.adjusted.at(i, t) = returns.at(i, t) - systematic;
        }
    });
    return out;
}

WinsorizeResult winsorize_monthly(std::span<const double> values, std::span<const int> month_keys, double level,
                                  PercentileRule rule) {
    if (values.size() != month_keys.size()) throw std::invalid_argument("winsorize: key count mismatch");
    if (!(level >= 0.0 && level < 0.5)) throw std::invalid_argument("winsorize: level must be in [0, 0.5)");
    WinsorizeResult out;
    out.values.assign(values.begin(), values.end());
    std::map<int, std::vector<std::size_t>> months;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isnan(values[i])) months[month_keys[i]].push_back(i);
    }
    constexpr double kFuzz = 1e-9;
    for (const auto& [key, idx] : months) {
        if (idx.size() < 3) {
            out.unmodified_months.push_back(key);
            continue;
        }
        std::vector<double> sorted;
        sorted.reserve(idx.size());
        for (auto i : idx) sorted.push_back(values[i]);
        std::sort(sorted.begin(), sorted.end());
        const double last = static_cast<double>(sorted.size() - 1);
        const double h_lo = last * level;
        const double h_hi = last * (1.0 - level);
        double lo = 0;
        double hi = 0;
        if (rule == PercentileRule::OrderStatistic) {
            lo = sorted[static_cast<std::size_t>(std::ceil(h_lo - kFuzz))];
            hi = sorted[static_cast<std::size_t>(std::floor(h_hi + kFuzz))];
        } else {
            auto interp = [&](double h) {
                const auto below = static_cast<std::size_t>(std::floor(h));
                const auto above = std::min(below + 1, sorted.size() - 1);
                const double frac = h - static_cast<double>(below);
                return sorted[below] + frac * (sorted[above] - sorted[below]);
            };
            lo = interp(h_lo);
            hi = interp(h_hi);
        }
        for (auto i : idx) out.values[i] = std::clamp(values[i], lo, hi);
    }
    return out;
}

}  // namespace intraday
