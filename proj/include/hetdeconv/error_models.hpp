#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hetdeconv {

/// Distribution families for a single measurement error U_j.
///
/// All families are symmetric about zero, so their characteristic functions
/// are real and even. `Fejer` has a compactly supported characteristic
/// function (1 - |v|/c)_+ and exists to construct ensembles whose
/// deconvolution denominator vanishes; it is not used for data generation.
enum class ErrorFamily { Gaussian, Laplace, Degenerate, Fejer };

std::string_view to_string(ErrorFamily family);
/// Accepts "gaussian"/"normal", "laplace", "degenerate"/"none", "fejer".
ErrorFamily parse_error_family(std::string_view name);

/// Law of one measurement error, exposed through its characteristic function.
class ErrorModel {
public:
    static ErrorModel gaussian(double variance);
    /// Laplace law with the given variance; scale beta = sqrt(variance / 2).
    static ErrorModel laplace(double variance);
    static ErrorModel degenerate();
    /// Fejer law whose characteristic function is (1 - |v|/cutoff)_+.
    static ErrorModel fejer(double cutoff);
    /// Dispatches on family; `parameter` is the variance, or the cutoff for Fejer.
    static ErrorModel make(ErrorFamily family, double parameter);

    ErrorFamily family() const noexcept { return family_; }
    /// Variance for Gaussian/Laplace/Degenerate, cutoff for Fejer.
    double parameter() const noexcept { return param_; }
    /// Infinite for Fejer (its density decays like 1/u^2).
    double variance() const noexcept;

    std::complex<double> cf(double v) const;
    /// log|cf(v)|, -inf where the characteristic function vanishes.
    double log_abs_cf(double v) const;

    friend bool operator==(const ErrorModel&, const ErrorModel&) = default;

private:
    ErrorModel(ErrorFamily family, double param) : family_(family), param_(param) {}

    ErrorFamily family_;
    double param_;
};

/// Floor below which S(v) is treated as zero.
inline constexpr double kDenominatorFloor = 1e-300;

/// The n per-observation error laws of one sample.
///
/// S(v) = sum_k |cf_k(v)|^2 is evaluated in the log domain, so Gaussian tails
/// at large frequencies do not underflow before the floor is reached.
class ErrorEnsemble {
public:
    explicit ErrorEnsemble(std::vector<ErrorModel> models);

    std::size_t size() const noexcept { return models_.size(); }
    const ErrorModel& model(std::size_t j) const { return models_.at(j); }
    std::span<const ErrorModel> models() const noexcept { return models_; }

    /// S(v); may underflow to 0 for extreme Gaussian frequencies.
    double denominator(double v) const;
    /// log S(v), -inf if every characteristic function vanishes at v.
    double log_denominator(double v) const;

    /// psi_j(v) = cf_j(-v) / S(v), 0-based j. Throws DegenerateDenominator.
    std::complex<double> psi(std::size_t j, double v) const;
    /// Same as psi() with log S(v) supplied by the caller.
    double psi_real(std::size_t j, double v, double log_denominator) const;

    /// log S at every frequency in `frequencies`.
    std::vector<double> tabulate_log_denominator(std::span<const double> frequencies) const;

private:
    std::vector<ErrorModel> models_;
};

std::complex<double> cf(const ErrorModel& model, double v);
double ensemble_denominator(const ErrorEnsemble& ens, double v);
std::complex<double> psi(const ErrorEnsemble& ens, std::size_t j, double v);

struct ValidationReport {
    double bandwidth = 0.0;
    double min_denominator = 0.0;      ///< min S over the tested frequencies
    double min_log_denominator = 0.0;  ///< log of the above, finite even when S underflows
    double argmin_frequency = 0.0;
    bool passed = false;
    std::vector<std::size_t> failing_nodes;
    std::vector<double> failing_frequencies;
};

/// Checks S(v_m / b) > kDenominatorFloor at each unit node v_m in [-1, 1].
ValidationReport validate_ensemble(const ErrorEnsemble& ens, double bandwidth,
                                   std::span<const double> unit_nodes);

}  // namespace hetdeconv
