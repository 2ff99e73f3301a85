// Serial reference implementations, evaluated point by point through the
// estimator objects. Kept for cross-checking the OpenMP kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hetdeconv/grid.hpp"

namespace hetdeconv::reference {

namespace {

Surface make_surface(std::span<const double> xs, std::span<const double> ts) {
    Surface out;
    out.xs.assign(xs.begin(), xs.end());
    out.ts.assign(ts.begin(), ts.end());
    out.value.assign(xs.size() * ts.size(), 0.0);
    out.flagged.assign(xs.size() * ts.size(), 0);
    return out;
}

template <typename Fn>
Surface fill_surface(std::span<const double> xs, std::span<const double> ts, Fn&& fn) {
    Surface out = make_surface(xs, ts);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t k = 0; k < ts.size(); ++k) {
            const PointEstimate est = fn(xs[i], ts[k]);
            out.value[i * ts.size() + k] = est.value;
            out.flagged[i * ts.size() + k] = est.flagged ? 1 : 0;
        }
    }
    return out;
}

}  // namespace

double eval_deconv_kernel(const DeconvWeights& weights, std::size_t j, double arg) {
    const auto nodes = weights.nodes();
    const auto q = weights.quadrature_weights();
    const auto w = weights.weights_row(j);
    std::complex<double> sum = 0.0;
    double magnitude = 0.0;
    for (std::size_t m = 0; m < nodes.size(); ++m) {
        const std::complex<double> term = q[m] * std::exp(std::complex<double>(0.0, -nodes[m] * arg)) * w[m];
        sum += term;
        magnitude += std::abs(term);
    }
    sum /= 2.0 * std::numbers::pi;
    magnitude /= 2.0 * std::numbers::pi;
    if (std::abs(sum.imag()) > 1e-10 * std::max(1.0, magnitude)) {
        std::ostringstream msg;
        msg << "deconvolution kernel has imaginary part " << sum.imag() << " at j=" << j << " arg=" << arg;
        throw std::logic_error(msg.str());
    }
    return sum.real();
}

Surface r_hat_surface(const DeconvEstimator& est, std::span<const double> xs, std::span<const double> ts) {
    return fill_surface(xs, ts, [&](double x, double t) { return est.r_hat(x, t); });
}

Surface naive_surface(const Sample& sample, const Bandwidths& bw, std::span<const double> xs,
                      std::span<const double> ts) {
    return fill_surface(xs, ts, [&](double x, double t) { return naive_estimator(sample, bw, x, t); });
}

Surface r_tilde_surface(const PartialLinearEstimator& est, std::span<const double> xs, std::span<const double> ts) {
    return fill_surface(xs, ts, [&](double x, double t) { return est.eval(x, t); });
}

}  // namespace hetdeconv::reference
