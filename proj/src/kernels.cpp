#include "hetdeconv/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hetdeconv/errors.hpp"

namespace hetdeconv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_min_nodes(std::size_t m) {
    if (m < QuadratureGrid::kMinNodes) {
        throw std::invalid_argument("quadrature grid needs at least 16 nodes");
    }
}

}  // namespace

QuadratureGrid QuadratureGrid::gauss_legendre(std::size_t m) {
    require_min_nodes(m);
    std::vector<double> nodes(m);
    std::vector<double> weights(m);
    const std::size_t half = (m + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        // Newton on P_m starting from the Tricomi approximation of the i-th root.
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(m) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= m; ++k) {
                const double kk = static_cast<double>(k);
                const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(m) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[m - 1 - i] = x;
        nodes[i] = -x;
        weights[m - 1 - i] = w;
        weights[i] = w;
    }
    if (m % 2 == 1) nodes[m / 2] = 0.0;
    return {QuadratureRule::GaussLegendre, std::move(nodes), std::move(weights)};
}

QuadratureGrid QuadratureGrid::trapezoid(std::size_t m) {
    require_min_nodes(m);
    std::vector<double> nodes(m);
    std::vector<double> weights(m);
    const double step = 2.0 / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
        nodes[i] = -1.0 + step * static_cast<double>(i);
        weights[i] = step;
    }
    // exact symmetry about zero
    for (std::size_t i = 0; i < m / 2; ++i) nodes[m - 1 - i] = -nodes[i];
    if (m % 2 == 1) nodes[m / 2] = 0.0;
    weights.front() = weights.back() = 0.5 * step;
    return {QuadratureRule::Trapezoid, std::move(nodes), std::move(weights)};
}

QuadratureGrid QuadratureGrid::make(QuadratureRule rule, std::size_t nodes) {
    return rule == QuadratureRule::GaussLegendre ? gauss_legendre(nodes) : trapezoid(nodes);
}

const QuadratureGrid& default_quadrature() {
    static const QuadratureGrid grid = QuadratureGrid::gauss_legendre(128);
    return grid;
}

double kernel_K(double u) { return std::exp(-0.5 * u * u) / std::sqrt(kTwoPi); }

double kernel_L_ft(double v) {
    if (std::abs(v) > 1.0) return 0.0;
    const double r = 1.0 - v * v;
    return r * r * r;
}

double kernel_L(double u, const QuadratureGrid& quad) {
    const auto nodes = quad.nodes();
    const auto weights = quad.weights();
    double sum = 0.0;
    for (std::size_t m = 0; m < nodes.size(); ++m) {
        sum += weights[m] * std::cos(u * nodes[m]) * kernel_L_ft(nodes[m]);
    }
    return sum / kTwoPi;
}

double kernel_L(double u) { return kernel_L(u, default_quadrature()); }

DeconvWeights::DeconvWeights(const ErrorEnsemble& ens, double bandwidth, const QuadratureGrid& quad)
    : n_(ens.size()),
      bandwidth_(bandwidth),
      nodes_(quad.nodes().begin(), quad.nodes().end()),
      quad_weights_(quad.weights().begin(), quad.weights().end()) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw std::invalid_argument("bandwidth must be finite and positive");
    }
    const std::size_t m_count = nodes_.size();
    // S is j-independent: one log-sum-exp per node.
    std::vector<double> freqs(m_count);
    for (std::size_t m = 0; m < m_count; ++m) freqs[m] = nodes_[m] / bandwidth;
    const auto log_den = ens.tabulate_log_denominator(freqs);

    weights_.assign(n_ * m_count, 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
        const double lft = kernel_L_ft(nodes_[m]);
        if (lft == 0.0) continue;
        for (std::size_t j = 0; j < n_; ++j) {
            weights_[j * m_count + m] = lft * ens.psi_real(j, freqs[m], log_den[m]);
        }
    }

    // Fold the symmetric node pairs (v, -v) into one cosine term.
    std::vector<std::size_t> positive;
    for (std::size_t m = 0; m < m_count; ++m) {
        if (nodes_[m] >= 0.0) positive.push_back(m);
    }
    half_nodes_.reserve(positive.size());
    for (std::size_t m : positive) half_nodes_.push_back(nodes_[m]);
    folded_.assign(n_ * positive.size(), 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
        for (std::size_t p = 0; p < positive.size(); ++p) {
            const std::size_t m = positive[p];
            const std::size_t mirror = m_count - 1 - m;
            double c = quad_weights_[m] * weights_[j * m_count + m];
            if (mirror != m) c += quad_weights_[mirror] * weights_[j * m_count + mirror];
            folded_[j * positive.size() + p] = c / kTwoPi;
        }
    }
}

double DeconvWeights::eval(std::size_t j, double arg) const {
    const std::size_t half = half_nodes_.size();
    const double* c = folded_.data() + j * half;
    double sum = 0.0;
    for (std::size_t p = 0; p < half; ++p) sum += c[p] * std::cos(half_nodes_[p] * arg);
    return sum;
}

DeconvWeights build_deconv_weights(const ErrorEnsemble& ens, double bandwidth,
                                   const QuadratureGrid& quad) {
    return DeconvWeights(ens, bandwidth, quad);
}

}  // namespace hetdeconv
