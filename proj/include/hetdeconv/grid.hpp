#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hetdeconv/estimators.hpp"
#include "hetdeconv/kernels.hpp"

namespace hetdeconv {

/// Evenly spaced points over [min, max], endpoints included.
struct GridAxis {
    double min = -2.0;
    double max = 2.0;
    std::size_t count = 20;

    std::vector<double> points() const;
    friend bool operator==(const GridAxis&, const GridAxis&) = default;
};

/// Row-major n x m matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

/// Estimates over a tensor grid; entry (i, k) belongs to (xs[i], ts[k]).
struct Surface {
    std::vector<double> xs;
    std::vector<double> ts;
    std::vector<double> value;
    /// Denominator on the density scale (f_hat for r_hat); empty if not produced.
    std::vector<double> density;
    std::vector<unsigned char> flagged;

    double at(std::size_t i, std::size_t k) const { return value[i * ts.size() + k]; }
    bool is_flagged(std::size_t i, std::size_t k) const { return flagged[i * ts.size() + k] != 0; }
    std::size_t flagged_count() const;
};

/// Sets the OpenMP worker count; values < 1 restore the runtime default.
void set_workers(int workers);
int worker_count();

// OpenMP kernels. Each has a serial counterpart in hetdeconv::reference.

/// table(j, k) = L_{U_j}((ts[k] - surrogates[j]) / b).
Matrix tabulate_deconv_kernel(const DeconvWeights& weights, std::span<const double> surrogates,
                              std::span<const double> ts);

/// table(j, k) = K((points[k] - centers[j]) / bandwidth), K standard normal.
Matrix tabulate_gaussian_kernel(std::span<const double> centers, std::span<const double> points,
                                double bandwidth);

/// Ratio surface from separable kernel tables: with k_j(i, k) = kx(j, i) kt(j, k),
/// returns the anchored_ratio of y over k_j at each (i, k).
Surface ratio_surface(const Matrix& kx, const Matrix& kt, std::span<const double> y, std::span<const double> xs,
                      std::span<const double> ts, double scale, double floor);

/// t-only ratio curve: sum_j kt(j, k) y_j / sum_j kt(j, k) with anchoring and floor.
std::vector<PointEstimate> ratio_curve(const Matrix& kt, std::span<const double> y, double scale, double floor);

Surface r_hat_surface(const DeconvEstimator& est, std::span<const double> xs, std::span<const double> ts);
Surface naive_surface(const Sample& sample, const Bandwidths& bw, std::span<const double> xs,
                      std::span<const double> ts);
Surface r_tilde_surface(const PartialLinearEstimator& est, std::span<const double> xs, std::span<const double> ts);

/// x theta + offset(t) assembled into a surface.
Surface partial_linear_surface(double theta, std::span<const PointEstimate> offsets, std::span<const double> xs,
                               std::span<const double> ts);

namespace reference {

/// Full complex quadrature sum of the deconvolution kernel. Throws
/// std::logic_error if the imaginary part exceeds 1e-10 relative to the
/// absolute sum of terms.
double eval_deconv_kernel(const DeconvWeights& weights, std::size_t j, double arg);

Surface r_hat_surface(const DeconvEstimator& est, std::span<const double> xs, std::span<const double> ts);
Surface naive_surface(const Sample& sample, const Bandwidths& bw, std::span<const double> xs,
                      std::span<const double> ts);
Surface r_tilde_surface(const PartialLinearEstimator& est, std::span<const double> xs, std::span<const double> ts);

}  // namespace reference

}  // namespace hetdeconv
