#include "hetdeconv/error_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hetdeconv/errors.hpp"

namespace hetdeconv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite_nonnegative(double value, const char* what) {
    if (!std::isfinite(value) || value < 0.0) {
        throw std::invalid_argument(std::string(what) + " must be finite and non-negative");
    }
}

}  // namespace

std::string_view to_string(ErrorFamily family) {
    switch (family) {
        case ErrorFamily::Gaussian: return "gaussian";
        case ErrorFamily::Laplace: return "laplace";
        case ErrorFamily::Degenerate: return "degenerate";
        case ErrorFamily::Fejer: return "fejer";
    }
    return "unknown";
}

ErrorFamily parse_error_family(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "gaussian" || lower == "normal") return ErrorFamily::Gaussian;
    if (lower == "laplace") return ErrorFamily::Laplace;
    if (lower == "degenerate" || lower == "none") return ErrorFamily::Degenerate;
    if (lower == "fejer") return ErrorFamily::Fejer;
    throw std::invalid_argument("unknown error family '" + std::string(name) + "'");
}

ErrorModel ErrorModel::gaussian(double variance) {
    require_finite_nonnegative(variance, "gaussian variance");
    return {ErrorFamily::Gaussian, variance};
}

ErrorModel ErrorModel::laplace(double variance) {
    require_finite_nonnegative(variance, "laplace variance");
    return {ErrorFamily::Laplace, variance};
}

ErrorModel ErrorModel::degenerate() { return {ErrorFamily::Degenerate, 0.0}; }

ErrorModel ErrorModel::fejer(double cutoff) {
    if (!(cutoff > 0.0) || !std::isfinite(cutoff)) {
        throw std::invalid_argument("fejer cutoff must be finite and positive");
    }
    return {ErrorFamily::Fejer, cutoff};
}

ErrorModel ErrorModel::make(ErrorFamily family, double parameter) {
    switch (family) {
        case ErrorFamily::Gaussian: return gaussian(parameter);
        case ErrorFamily::Laplace: return laplace(parameter);
        case ErrorFamily::Degenerate: return degenerate();
        case ErrorFamily::Fejer: return fejer(parameter);
    }
    throw std::invalid_argument("unknown error family");
}

double ErrorModel::variance() const noexcept {
    return family_ == ErrorFamily::Fejer ? kInf : param_;
}

double ErrorModel::log_abs_cf(double v) const {
    switch (family_) {
        case ErrorFamily::Gaussian: return -0.5 * param_ * v * v;
        case ErrorFamily::Laplace: return -std::log1p(0.5 * param_ * v * v);
        case ErrorFamily::Degenerate: return 0.0;
        case ErrorFamily::Fejer: {
            const double r = 1.0 - std::abs(v) / param_;
            return r > 0.0 ? std::log(r) : -kInf;
        }
    }
    return -kInf;
}

std::complex<double> ErrorModel::cf(double v) const {
    switch (family_) {
        case ErrorFamily::Gaussian: return std::exp(-0.5 * param_ * v * v);
        case ErrorFamily::Laplace: return 1.0 / (1.0 + 0.5 * param_ * v * v);
        case ErrorFamily::Degenerate: return 1.0;
        case ErrorFamily::Fejer: return std::max(0.0, 1.0 - std::abs(v) / param_);
    }
    return 0.0;
}

ErrorEnsemble::ErrorEnsemble(std::vector<ErrorModel> models) : models_(std::move(models)) {
    if (models_.empty()) throw std::invalid_argument("error ensemble needs at least one model");
}

double ErrorEnsemble::log_denominator(double v) const {
    // log-sum-exp of 2 log|cf_k(v)|
    double peak = -kInf;
    for (const auto& m : models_) peak = std::max(peak, 2.0 * m.log_abs_cf(v));
    if (peak == -kInf) return -kInf;
    double sum = 0.0;
    for (const auto& m : models_) sum += std::exp(2.0 * m.log_abs_cf(v) - peak);
    return peak + std::log(sum);
}

double ErrorEnsemble::denominator(double v) const {
    double sum = 0.0;
    for (const auto& m : models_) sum += std::norm(m.cf(v));
    return sum;
}

double ErrorEnsemble::psi_real(std::size_t j, double v, double log_den) const {
    if (!(log_den >= std::log(kDenominatorFloor))) {
        std::ostringstream msg;
        msg << "deconvolution denominator S(v) below floor at v=" << v;
        throw DegenerateDenominator(v, msg.str());
    }
    // Built-in characteristic functions are real and non-negative.
    return std::exp(models_.at(j).log_abs_cf(-v) - log_den);
}

std::complex<double> ErrorEnsemble::psi(std::size_t j, double v) const {
    return psi_real(j, v, log_denominator(v));
}

std::vector<double> ErrorEnsemble::tabulate_log_denominator(std::span<const double> frequencies) const {
    std::vector<double> out;
    out.reserve(frequencies.size());
    for (double v : frequencies) out.push_back(log_denominator(v));
    return out;
}

std::complex<double> cf(const ErrorModel& model, double v) { return model.cf(v); }

double ensemble_denominator(const ErrorEnsemble& ens, double v) { return ens.denominator(v); }

std::complex<double> psi(const ErrorEnsemble& ens, std::size_t j, double v) { return ens.psi(j, v); }

ValidationReport validate_ensemble(const ErrorEnsemble& ens, double bandwidth,
                                   std::span<const double> unit_nodes) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw std::invalid_argument("bandwidth must be finite and positive");
    }
    ValidationReport report;
    report.bandwidth = bandwidth;
    report.min_log_denominator = kInf;
    const double log_floor = std::log(kDenominatorFloor);
    for (std::size_t m = 0; m < unit_nodes.size(); ++m) {
        const double v = unit_nodes[m] / bandwidth;
        const double log_s = ens.log_denominator(v);
        if (log_s < report.min_log_denominator) {
            report.min_log_denominator = log_s;
            report.argmin_frequency = v;
        }
        if (!(log_s >= log_floor)) {
            report.failing_nodes.push_back(m);
            report.failing_frequencies.push_back(v);
        }
    }
    report.min_denominator = std::exp(report.min_log_denominator);
    report.passed = !unit_nodes.empty() && report.failing_nodes.empty();
    return report;
}

}  // namespace hetdeconv
