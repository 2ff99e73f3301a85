#include "hetdeconv/estimators.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hetdeconv/errors.hpp"

namespace hetdeconv {

Sample::Sample(std::vector<double> x, std::vector<double> w, std::vector<double> y, ErrorEnsemble ensemble)
    : x_(std::move(x)), w_(std::move(w)), y_(std::move(y)), ensemble_(std::move(ensemble)) {
    const std::size_t n = x_.size();
    if (w_.size() != n || y_.size() != n || ensemble_.size() != n) {
        std::ostringstream msg;
        msg << "sample arrays disagree in length: x=" << n << " w=" << w_.size() << " y=" << y_.size()
            << " ensemble=" << ensemble_.size();
        throw DimensionMismatch(msg.str());
    }
    if (n < 2) throw std::invalid_argument("sample needs at least two observations");
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(x_[j]) || !std::isfinite(w_[j]) || !std::isfinite(y_[j])) {
            throw std::invalid_argument("sample entry " + std::to_string(j) + " is not finite");
        }
    }
}

Sample Sample::with_responses(std::vector<double> y) const { return Sample(x_, w_, std::move(y), ensemble_); }

void validate_bandwidths(const Bandwidths& bw) {
    if (!(bw.h > 0.0) || !(bw.b > 0.0) || !std::isfinite(bw.h) || !std::isfinite(bw.b)) {
        throw std::invalid_argument("bandwidths must be finite and positive");
    }
}

PointEstimate floored_ratio(double numerator, double denominator, double floor) {
    if (std::abs(denominator) > floor) return {numerator / denominator, false};
    const double signed_floor = denominator < 0.0 ? -floor : floor;
    return {numerator / signed_floor, true};
}

PointEstimate anchored_ratio(double anchor, double centered, double raw, double weight, double scale,
                             double floor) {
    const double density = weight * scale;
    if (std::abs(density) > floor) return {anchor + centered / weight, false};
    return {raw * scale / (density < 0.0 ? -floor : floor), true};
}

DeconvEstimator::DeconvEstimator(Sample sample, Bandwidths bw, DeconvWeights weights)
    : sample_(std::move(sample)), bw_(bw), weights_(std::move(weights)) {
    validate_bandwidths(bw_);
    if (weights_.observations() != sample_.size()) {
        throw DimensionMismatch("deconvolution weights do not match the sample size");
    }
    if (weights_.bandwidth() != bw_.b) {
        throw std::invalid_argument("deconvolution weights were built for a different b");
    }
}

double DeconvEstimator::m_hat(double x, double t) const {
    const auto& xs = sample_.x();
    const auto& ws = sample_.w();
    const auto& ys = sample_.y();
    double sum = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        if (ys[j] == 0.0) continue;
        sum += ys[j] * kernel_K((x - xs[j]) / bw_.h) * weights_.eval(j, (t - ws[j]) / bw_.b);
    }
    return sum / (bw_.h * bw_.b);
}

double DeconvEstimator::f_hat(double x, double t) const {
    const auto& xs = sample_.x();
    const auto& ws = sample_.w();
    double sum = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        sum += kernel_K((x - xs[j]) / bw_.h) * weights_.eval(j, (t - ws[j]) / bw_.b);
    }
    return sum / (bw_.h * bw_.b);
}

PointEstimate DeconvEstimator::r_hat(double x, double t) const {
    // One pass so m_hat and f_hat see identical kernel values.
    const auto& xs = sample_.x();
    const auto& ws = sample_.w();
    const auto& ys = sample_.y();
    const double anchor = ys.front();
    double raw = 0.0;
    double centered = 0.0;
    double weight = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double k = kernel_K((x - xs[j]) / bw_.h) * weights_.eval(j, (t - ws[j]) / bw_.b);
        raw += ys[j] * k;
        centered += (ys[j] - anchor) * k;
        weight += k;
    }
    return anchored_ratio(anchor, centered, raw, weight, 1.0 / (bw_.h * bw_.b), ridge_floor());
}

DeconvEstimator fit(const Sample& sample, const Bandwidths& bw, const QuadratureGrid& quad) {
    validate_bandwidths(bw);
    const auto report = validate_ensemble(sample.ensemble(), bw.b, quad.nodes());
    if (!report.passed) {
        std::ostringstream msg;
        msg << "error ensemble fails validation at b=" << bw.b << ": S(v) <= " << kDenominatorFloor
            << " at v=" << report.failing_frequencies.front();
        throw EnsembleInvalid(report.failing_frequencies.front(), msg.str());
    }
    return DeconvEstimator(sample, bw, DeconvWeights(sample.ensemble(), bw.b, quad));
}

PointEstimate naive_estimator(const Sample& sample, const Bandwidths& bw, double x, double t) {
    validate_bandwidths(bw);
    const auto& xs = sample.x();
    const auto& ws = sample.w();
    const auto& ys = sample.y();
    const double anchor = ys.front();
    double raw = 0.0;
    double centered = 0.0;
    double weight = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double k = kernel_K((x - xs[j]) / bw.h) * kernel_K((t - ws[j]) / bw.b);
        raw += ys[j] * k;
        centered += (ys[j] - anchor) * k;
        weight += k;
    }
    const double scale = 1.0 / (static_cast<double>(xs.size()) * bw.h * bw.b);
    return anchored_ratio(anchor, centered, raw, weight, scale, ridge_floor(bw.h, bw.b));
}

double theta_hat(const Sample& sample) {
    const auto& xs = sample.x();
    const auto& ys = sample.y();
    const double n = static_cast<double>(xs.size());
    double x_bar = 0.0;
    double y_bar = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        x_bar += xs[j];
        y_bar += ys[j];
    }
    x_bar /= n;
    y_bar /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double dx = xs[j] - x_bar;
        sxy += dx * (ys[j] - y_bar);
        sxx += dx * dx;
    }
    if (!(sxx > 0.0)) throw DegenerateDesign("covariate X has zero sample variance");
    return sxy / sxx;
}

namespace {

DeconvWeights validated_weights(const ErrorEnsemble& ens, double b, const QuadratureGrid& quad) {
    if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("bandwidth must be finite and positive");
    const auto report = validate_ensemble(ens, b, quad.nodes());
    if (!report.passed) {
        std::ostringstream msg;
        msg << "error ensemble fails validation at b=" << b << ": S(v) <= " << kDenominatorFloor
            << " at v=" << report.failing_frequencies.front();
        throw EnsembleInvalid(report.failing_frequencies.front(), msg.str());
    }
    return DeconvWeights(ens, b, quad);
}

}  // namespace

PartialLinearEstimator::PartialLinearEstimator(const Sample& sample, double b, const QuadratureGrid& quad,
                                               double theta)
    : w_(sample.w()), theta_(theta), weights_(validated_weights(sample.ensemble(), b, quad)) {
    if (!std::isfinite(theta)) throw std::invalid_argument("theta must be finite");
    residuals_.resize(sample.size());
    for (std::size_t j = 0; j < sample.size(); ++j) residuals_[j] = sample.y()[j] - sample.x()[j] * theta;
}

PointEstimate PartialLinearEstimator::offset(double t) const {
    const double b = weights_.bandwidth();
    const double anchor = residuals_.front();
    double raw = 0.0;
    double centered = 0.0;
    double weight = 0.0;
    for (std::size_t j = 0; j < w_.size(); ++j) {
        const double l = weights_.eval(j, (t - w_[j]) / b);
        raw += l * residuals_[j];
        centered += l * (residuals_[j] - anchor);
        weight += l;
    }
    return anchored_ratio(anchor, centered, raw, weight, 1.0 / b, 1e-8 / b);
}

PointEstimate PartialLinearEstimator::eval(double x, double t) const {
    auto est = offset(t);
    est.value += x * theta_;
    return est;
}

PointEstimate eval_r_tilde(const Sample& sample, double b, const QuadratureGrid& quad, double theta,
                           double x, double t) {
    return PartialLinearEstimator(sample, b, quad, theta).eval(x, t);
}

double variance_bound_diagnostic(const ErrorEnsemble& ens, const Bandwidths& bw, const QuadratureGrid& quad,
                                 double c_sup) {
    validate_bandwidths(bw);
    if (!(c_sup > 0.0) || !std::isfinite(c_sup)) throw std::invalid_argument("c_sup must be finite and positive");
    const auto nodes = quad.nodes();
    const auto weights = quad.weights();
    const double log_floor = std::log(kDenominatorFloor);
    double integral = 0.0;
    for (std::size_t m = 0; m < nodes.size(); ++m) {
        const double lft = kernel_L_ft(nodes[m]);
        if (lft == 0.0) continue;
        const double v = nodes[m] / bw.b;
        const double log_s = ens.log_denominator(v);
        if (!(log_s >= log_floor)) {
            std::ostringstream msg;
            msg << "deconvolution denominator S(v) below floor at v=" << v;
            throw DegenerateDenominator(v, msg.str());
        }
        integral += weights[m] * lft * lft * std::exp(-log_s);
    }
    return c_sup * integral / (2.0 * std::numbers::pi * bw.h * bw.b);
}

}  // namespace hetdeconv
