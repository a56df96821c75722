#include "qlsarma/forecasting.hpp"

#include <cmath>
#include <sstream>

#include "qlsarma/errors.hpp"

namespace qlsarma {

namespace {

void check_request(const ModelSpec& spec, const ForecastRequest& req) {
    if (req.horizon < 1) throw InputError("forecast horizon must be >= 1");
    if (req.future_X.rows() != req.horizon || req.future_X.cols() != spec.k + 1) {
        std::ostringstream msg;
        msg << "future mean design must be " << req.horizon << " x " << spec.k + 1 << ", got "
            << req.future_X.rows() << " x " << req.future_X.cols();
        throw InputError(msg.str());
    }
    if (req.future_W.rows() != req.horizon || req.future_W.cols() != spec.l + 1) {
        std::ostringstream msg;
        msg << "future dispersion design must be " << req.horizon << " x " << spec.l + 1 << ", got "
            << req.future_W.rows() << " x " << req.future_W.cols();
        throw InputError(msg.str());
    }
    if (!req.future_X.allFinite() || !req.future_W.allFinite()) throw InputError("future designs contain non-finite entries");
    if (req.interval_levels) {
        const auto [lo, hi] = *req.interval_levels;
        if (!(lo > 0.0 && lo < hi && hi < 1.0)) throw InputError("interval levels must satisfy 0 < lo < hi < 1");
    }
}

}  // namespace

Eigen::VectorXd forecast_path(const FitResult& fit, const DesignData& data, const ForecastRequest& req) {
    const ModelSpec& spec = fit.spec;
    check_request(spec, req);
    if (data.X.cols() != spec.k + 1 || data.n() != fit.innovations.size())
        throw ShapeError("data do not match the fitted model");
    const LinkFunctions h{spec.mean_link};
    const Eigen::Index n = data.n();
    const Eigen::Index H = req.horizon;
    const ParamVector& prm = fit.params;

    Eigen::MatrixXd X(n + H, spec.k + 1);
    X << data.X, req.future_X;
    const Eigen::VectorXd xb = X * prm.beta;
    Eigen::VectorXd hy(n + H);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n + H);
    for (Eigen::Index t = 0; t < n; ++t) hy[t] = h.apply(data.y[t]);
    r.head(n) = fit.innovations;

    Eigen::VectorXd out(H);
    for (Eigen::Index t = n; t < n + H; ++t) {
        double eta = xb[t];
        for (int i = 1; i <= spec.p; ++i) eta += prm.phi[i - 1] * (hy[t - i] - xb[t - i]);
        for (int j = 1; j <= spec.q; ++j) eta += prm.theta[j - 1] * r[t - j];
        if (!std::isfinite(eta)) throw NumericError("forecast recursion is not finite", static_cast<std::size_t>(t));
        hy[t] = eta;
        out[t - n] = h.inverse(eta);
    }
    return out;
}

ForecastResult forecast_with_band(const FitResult& fit, const FitResult& lower_fit, const FitResult& upper_fit,
                                  const DesignData& data, const ForecastRequest& req) {
    ForecastResult res;
    res.basis_tau = fit.spec.tau_level;
    res.point = forecast_path(fit, data, req);
    res.lower = forecast_path(lower_fit, data, req);
    res.upper = forecast_path(upper_fit, data, req);
    for (Eigen::Index i = 0; i < res.point.size(); ++i)
        if ((*res.lower)[i] > res.point[i] || res.point[i] > (*res.upper)[i]) ++res.coherence_violations;
    return res;
}

ForecastResult forecast(const FitResult& fit, const DesignData& data, const ForecastRequest& req) {
    check_request(fit.spec, req);
    if (!req.interval_levels) {
        ForecastResult res;
        res.basis_tau = fit.spec.tau_level;
        res.point = forecast_path(fit, data, req);
        return res;
    }
    auto band_fit = [&](double tau) {
        ModelSpec s = fit.spec;
        s.tau_level = tau;
        return qlsarma::fit(LikelihoodContext(s, data), req.fit_config, fit.params);
    };
    const FitResult lo = band_fit(req.interval_levels->first);
    const FitResult hi = band_fit(req.interval_levels->second);
    return forecast_with_band(fit, lo, hi, data, req);
}

ForecastMetrics forecast_metrics(const Eigen::VectorXd& actual, const Eigen::VectorXd& point,
                                 const std::optional<Eigen::VectorXd>& lower,
                                 const std::optional<Eigen::VectorXd>& upper, const Eigen::VectorXd& insample,
                                 double alpha) {
    const Eigen::Index h = actual.size();
    if (h == 0 || point.size() != h) throw InputError("actual and point forecasts must have equal, nonzero length");
    if (lower.has_value() != upper.has_value()) throw InputError("interval needs both lower and upper bounds");
    if (lower && (lower->size() != h || upper->size() != h)) throw InputError("interval bounds must match the horizon");
    if (insample.size() < 2) throw InputError("in-sample series needs at least two values for scaling");
    const double scale = (insample.tail(insample.size() - 1) - insample.head(insample.size() - 1)).cwiseAbs().mean();
    if (!(scale > 0.0)) throw InputError("in-sample series is constant; MASE/MSIS scaling is zero");

    ForecastMetrics m;
    const Eigen::ArrayXd err = (actual - point).array();
    m.rmse = std::sqrt(err.square().mean());
    m.mae = err.abs().mean();
    m.mase = m.mae / scale;
    const Eigen::ArrayXd denom = actual.array().abs() + point.array().abs();
    m.smape = (denom > 0.0).select(200.0 * err.abs() / denom, 0.0).mean();
    if (lower) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
        const Eigen::ArrayXd l = lower->array(), u = upper->array(), a = actual.array();
        const Eigen::ArrayXd score = (u - l) + (2.0 / alpha) * (l - a).max(0.0) + (2.0 / alpha) * (a - u).max(0.0);
        m.msis = score.mean() / scale;
    }
    return m;
}

}  // namespace qlsarma
