#pragma once

#include <cstddef>
#include <vector>

#include "hetdeconv/error_models.hpp"
#include "hetdeconv/kernels.hpp"

namespace hetdeconv {

/// Observed triples (X_j, W_j, Y_j) with W_j = T_j + U_j, U_j ~ ensemble.model(j).
class Sample {
public:
    /// Throws DimensionMismatch on unequal lengths, std::invalid_argument on
    /// n < 2 or non-finite entries.
    Sample(std::vector<double> x, std::vector<double> w, std::vector<double> y, ErrorEnsemble ensemble);

    std::size_t size() const noexcept { return x_.size(); }
    const std::vector<double>& x() const noexcept { return x_; }
    const std::vector<double>& w() const noexcept { return w_; }
    const std::vector<double>& y() const noexcept { return y_; }
    const ErrorEnsemble& ensemble() const noexcept { return ensemble_; }

    /// Copy with the responses replaced; same covariates and ensemble.
    Sample with_responses(std::vector<double> y) const;

private:
    std::vector<double> x_;
    std::vector<double> w_;
    std::vector<double> y_;
    ErrorEnsemble ensemble_;
};

/// Smoothing parameters: h for the error-free X, b for the contaminated T.
struct Bandwidths {
    double h = 0.0;
    double b = 0.0;

    friend bool operator==(const Bandwidths&, const Bandwidths&) = default;
};

/// Throws std::invalid_argument unless both bandwidths are finite and positive.
void validate_bandwidths(const Bandwidths& bw);

/// A ratio estimate; `flagged` marks a denominator that hit the ridge floor.
struct PointEstimate {
    double value = 0.0;
    bool flagged = false;
};

/// Floor on the density-scale denominator: 1e-8 / (h b).
inline double ridge_floor(double h, double b) { return 1e-8 / (h * b); }

/// num / den, or num / (sign(den) * floor) with the flag set when |den| <= floor.
PointEstimate floored_ratio(double numerator, double denominator, double floor);

/// Kernel-weighted mean of responses from three running sums over the same
/// kernel weights k_j:
///   raw      = sum_j y_j k_j
///   centered = sum_j (y_j - anchor) k_j
///   weight   = sum_j k_j
/// `scale` maps the sums to the density scale the floor applies to. Unflagged
/// points return anchor + centered / weight, which is exact for constant y
/// however large the kernel weights are; flagged points return the floored
/// ratio raw / (sign(weight) floor).
PointEstimate anchored_ratio(double anchor, double centered, double raw, double weight, double scale,
                             double floor);

/// Fitted partial deconvolution regression estimator
///
///     r_hat(x, t) = m_hat(x, t) / f_hat(x, t),
///     m_hat(x, t) = (hb)^-1 sum_j Y_j K((x - X_j)/h) L_{U_j}((t - W_j)/b),
///
/// with f_hat the same sum without Y_j. There is no explicit 1/n: the psi_j
/// weights inside L_{U_j} already carry the normalisation.
class DeconvEstimator {
public:
    DeconvEstimator(Sample sample, Bandwidths bw, DeconvWeights weights);

    const Sample& sample() const noexcept { return sample_; }
    const Bandwidths& bandwidths() const noexcept { return bw_; }
    const DeconvWeights& weights() const noexcept { return weights_; }
    double ridge_floor() const noexcept { return hetdeconv::ridge_floor(bw_.h, bw_.b); }

    double m_hat(double x, double t) const;
    double f_hat(double x, double t) const;
    PointEstimate r_hat(double x, double t) const;

private:
    Sample sample_;
    Bandwidths bw_;
    DeconvWeights weights_;
};

/// Validates the ensemble at b over the quadrature nodes, then tabulates the
/// deconvolution weights. Throws EnsembleInvalid on validation failure.
DeconvEstimator fit(const Sample& sample, const Bandwidths& bw, const QuadratureGrid& quad);

inline double eval_m_hat(const DeconvEstimator& est, double x, double t) { return est.m_hat(x, t); }
inline double eval_f_hat(const DeconvEstimator& est, double x, double t) { return est.f_hat(x, t); }
inline PointEstimate eval_r_hat(const DeconvEstimator& est, double x, double t) { return est.r_hat(x, t); }

/// Nadaraya-Watson with Gaussian kernels in both directions, treating W as T.
PointEstimate naive_estimator(const Sample& sample, const Bandwidths& bw, double x, double t);

/// Centered least-squares slope of Y on X. Throws DegenerateDesign if X is constant.
double theta_hat(const Sample& sample);

/// Partial-linear estimator
///
///     r_tilde(x, t) = x theta + sum_j L_{U_j}((t - W_j)/b) (Y_j - X_j theta) / sum_j L_{U_j}((t - W_j)/b).
///
/// Only the b-direction deconvolution kernel is used; the denominator is
/// floored on the density scale b^-1 sum_j L_{U_j} at 1e-8 / b.
class PartialLinearEstimator {
public:
    PartialLinearEstimator(const Sample& sample, double b, const QuadratureGrid& quad, double theta);

    double theta() const noexcept { return theta_; }
    double bandwidth() const noexcept { return weights_.bandwidth(); }
    const DeconvWeights& weights() const noexcept { return weights_; }
    const std::vector<double>& residuals() const noexcept { return residuals_; }
    const std::vector<double>& surrogates() const noexcept { return w_; }

    /// The t-only part: weighted residual mean at t.
    PointEstimate offset(double t) const;
    PointEstimate eval(double x, double t) const;

private:
    std::vector<double> w_;
    std::vector<double> residuals_;
    double theta_;
    DeconvWeights weights_;
};

PointEstimate eval_r_tilde(const Sample& sample, double b, const QuadratureGrid& quad, double theta,
                           double x, double t);

/// Upper bound on the variance of m_hat,
///
///     c_sup (2 pi h)^-1 \int |L^ft(v b)|^2 / S(v) dv
///       = c_sup (2 pi h b)^-1 \int_{-1}^{1} L^ft(u)^2 / S(u / b) du.
///
/// Throws DegenerateDenominator if S vanishes on the support.
double variance_bound_diagnostic(const ErrorEnsemble& ens, const Bandwidths& bw,
                                 const QuadratureGrid& quad, double c_sup);

}  // namespace hetdeconv
