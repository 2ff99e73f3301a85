#include <cmath>
#include <cstddef>
#include <vector>

#include "hetdeconv/grid.hpp"

namespace hetdeconv {

namespace {

using Index = std::ptrdiff_t;

Index as_index(std::size_t n) { return static_cast<Index>(n); }

}  // namespace

Matrix tabulate_deconv_kernel(const DeconvWeights& weights, std::span<const double> surrogates,
                              std::span<const double> ts) {
    const std::size_t n = surrogates.size();
    Matrix table(n, ts.size());
    const double b = weights.bandwidth();
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < as_index(n); ++j) {
        const auto jj = static_cast<std::size_t>(j);
        for (std::size_t k = 0; k < ts.size(); ++k) {
            table(jj, k) = weights.eval(jj, (ts[k] - surrogates[jj]) / b);
        }
    }
    return table;
}

Matrix tabulate_gaussian_kernel(std::span<const double> centers, std::span<const double> points,
                                double bandwidth) {
    Matrix table(centers.size(), points.size());
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < as_index(centers.size()); ++j) {
        const auto jj = static_cast<std::size_t>(j);
        for (std::size_t k = 0; k < points.size(); ++k) {
            table(jj, k) = kernel_K((points[k] - centers[jj]) / bandwidth);
        }
    }
    return table;
}

Surface ratio_surface(const Matrix& kx, const Matrix& kt, std::span<const double> y, std::span<const double> xs,
                      std::span<const double> ts, double scale, double floor) {
    const std::size_t n = y.size();
    const std::size_t nx = xs.size();
    const std::size_t nt = ts.size();
    Surface out;
    out.xs.assign(xs.begin(), xs.end());
    out.ts.assign(ts.begin(), ts.end());
    out.value.assign(nx * nt, 0.0);
    out.density.assign(nx * nt, 0.0);
    out.flagged.assign(nx * nt, 0);
    const double anchor = y.empty() ? 0.0 : y[0];

#pragma omp parallel
    {
        std::vector<double> raw(nt);
        std::vector<double> centered(nt);
        std::vector<double> weight(nt);
#pragma omp for schedule(static)
        for (Index i = 0; i < as_index(nx); ++i) {
            const auto ii = static_cast<std::size_t>(i);
            std::fill(raw.begin(), raw.end(), 0.0);
            std::fill(centered.begin(), centered.end(), 0.0);
            std::fill(weight.begin(), weight.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const double a = kx(j, ii);
                const double yj = y[j];
                const double dy = yj - anchor;
                const double* row = kt.data.data() + j * nt;
                for (std::size_t k = 0; k < nt; ++k) {
                    const double kk = a * row[k];
                    raw[k] += yj * kk;
                    centered[k] += dy * kk;
                    weight[k] += kk;
                }
            }
            for (std::size_t k = 0; k < nt; ++k) {
                const auto est = anchored_ratio(anchor, centered[k], raw[k], weight[k], scale, floor);
                out.value[ii * nt + k] = est.value;
                out.density[ii * nt + k] = weight[k] * scale;
                out.flagged[ii * nt + k] = est.flagged ? 1 : 0;
            }
        }
    }
    return out;
}

std::vector<PointEstimate> ratio_curve(const Matrix& kt, std::span<const double> y, double scale, double floor) {
    const std::size_t n = y.size();
    const std::size_t nt = kt.cols;
    std::vector<PointEstimate> out(nt);
    const double anchor = y.empty() ? 0.0 : y[0];
#pragma omp parallel for schedule(static)
    for (Index k = 0; k < as_index(nt); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        double raw = 0.0;
        double centered = 0.0;
        double weight = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double l = kt(j, kk);
            raw += l * y[j];
            centered += l * (y[j] - anchor);
            weight += l;
        }
        out[kk] = anchored_ratio(anchor, centered, raw, weight, scale, floor);
    }
    return out;
}

Surface r_hat_surface(const DeconvEstimator& est, std::span<const double> xs, std::span<const double> ts) {
    const auto& s = est.sample();
    const auto& bw = est.bandwidths();
    const Matrix kx = tabulate_gaussian_kernel(s.x(), xs, bw.h);
    const Matrix kt = tabulate_deconv_kernel(est.weights(), s.w(), ts);
    return ratio_surface(kx, kt, s.y(), xs, ts, 1.0 / (bw.h * bw.b), est.ridge_floor());
}

Surface naive_surface(const Sample& sample, const Bandwidths& bw, std::span<const double> xs,
                      std::span<const double> ts) {
    validate_bandwidths(bw);
    const Matrix kx = tabulate_gaussian_kernel(sample.x(), xs, bw.h);
    const Matrix kt = tabulate_gaussian_kernel(sample.w(), ts, bw.b);
    const double scale = 1.0 / (static_cast<double>(sample.size()) * bw.h * bw.b);
    return ratio_surface(kx, kt, sample.y(), xs, ts, scale, ridge_floor(bw.h, bw.b));
}

Surface partial_linear_surface(double theta, std::span<const PointEstimate> offsets, std::span<const double> xs,
                               std::span<const double> ts) {
    Surface out;
    out.xs.assign(xs.begin(), xs.end());
    out.ts.assign(ts.begin(), ts.end());
    out.value.resize(xs.size() * ts.size());
    out.flagged.resize(xs.size() * ts.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t k = 0; k < ts.size(); ++k) {
            out.value[i * ts.size() + k] = xs[i] * theta + offsets[k].value;
            out.flagged[i * ts.size() + k] = offsets[k].flagged ? 1 : 0;
        }
    }
    return out;
}

Surface r_tilde_surface(const PartialLinearEstimator& est, std::span<const double> xs, std::span<const double> ts) {
    const double b = est.bandwidth();
    const Matrix kt = tabulate_deconv_kernel(est.weights(), est.surrogates(), ts);
    const auto offsets = ratio_curve(kt, est.residuals(), 1.0 / b, 1e-8 / b);
    return partial_linear_surface(est.theta(), offsets, xs, ts);
}

}  // namespace hetdeconv
