#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hetdeconv/error_models.hpp"

namespace hetdeconv {

enum class QuadratureRule { GaussLegendre, Trapezoid };

/// Nodes and weights on [-1, 1], symmetric about zero.
class QuadratureGrid {
public:
    static constexpr std::size_t kMinNodes = 16;

    static QuadratureGrid gauss_legendre(std::size_t nodes);
    /// Closed trapezoid rule including both endpoints.
    static QuadratureGrid trapezoid(std::size_t nodes);
    static QuadratureGrid make(QuadratureRule rule, std::size_t nodes);

    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> weights() const noexcept { return weights_; }
    QuadratureRule rule() const noexcept { return rule_; }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    QuadratureGrid(QuadratureRule rule, std::vector<double> nodes, std::vector<double> weights)
        : rule_(rule), nodes_(std::move(nodes)), weights_(std::move(weights)) {}

    QuadratureRule rule_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Gauss-Legendre, 128 nodes.
const QuadratureGrid& default_quadrature();

/// Standard normal density.
double kernel_K(double u);
/// (1 - v^2)^3 on [-1, 1], zero outside.
double kernel_L_ft(double v);
/// Inverse Fourier transform of kernel_L_ft, by quadrature.
double kernel_L(double u, const QuadratureGrid& quad);
double kernel_L(double u);

/// Tabulated integrand of the generalized deconvolution kernel
///
///     L_{U_j}(a) = (2 pi)^-1 \int exp(-i v a) L^ft(v) psi_j(v / b) dv
///
/// for every observation j, ready for repeated evaluation at arbitrary a.
/// All supported error families are symmetric, so psi_j is real and even and
/// the kernel is a cosine sum over the non-negative half of the nodes.
class DeconvWeights {
public:
    DeconvWeights(const ErrorEnsemble& ens, double bandwidth, const QuadratureGrid& quad);

    std::size_t observations() const noexcept { return n_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    double bandwidth() const noexcept { return bandwidth_; }
    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> quadrature_weights() const noexcept { return quad_weights_; }

    /// w_{j,m} = L^ft(v_m) psi_j(v_m / b).
    double weight(std::size_t j, std::size_t m) const { return weights_[j * nodes_.size() + m]; }
    std::span<const double> weights_row(std::size_t j) const {
        return {weights_.data() + j * nodes_.size(), nodes_.size()};
    }

    /// L_{U_j}(arg), 0-based j.
    double eval(std::size_t j, double arg) const;

    /// Non-negative half of the nodes with folded coefficients.
    std::span<const double> half_nodes() const noexcept { return half_nodes_; }
    std::span<const double> folded_row(std::size_t j) const {
        return {folded_.data() + j * half_nodes_.size(), half_nodes_.size()};
    }

private:
    std::size_t n_;
    double bandwidth_;
    std::vector<double> nodes_;
    std::vector<double> quad_weights_;
    std::vector<double> weights_;  // n x M
    std::vector<double> half_nodes_;
    std::vector<double> folded_;   // n x half, includes q_m / (2 pi)
};

/// Throws DegenerateDenominator if S vanishes at any scaled node.
DeconvWeights build_deconv_weights(const ErrorEnsemble& ens, double bandwidth,
                                   const QuadratureGrid& quad);

inline double eval_deconv_kernel(const DeconvWeights& w, std::size_t j, double arg) {
    return w.eval(j, arg);
}

}  // namespace hetdeconv
