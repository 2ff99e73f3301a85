#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hetdeconv/error_models.hpp"
#include "hetdeconv/estimators.hpp"
#include "hetdeconv/grid.hpp"
#include "hetdeconv/kernels.hpp"

namespace hetdeconv {

/// Model1: r(x, t) = x^2 exp(-t^2 / 2).  Model2: r(x, t) = 3x + cos(t).
enum class Model { Model1, Model2 };

std::string_view to_string(Model model);
Model parse_model(std::string_view name);

inline constexpr double kModel2Slope = 3.0;
inline constexpr double kNoiseSd = 0.25;
/// Base error variance: 0.2 Var(T) with T ~ Uniform[-2, 2].
inline constexpr double kBaseErrorVariance = 0.2 * (16.0 / 12.0);

double true_r(Model model, double x, double t);

/// Observation j (1-based) gets variance kBaseErrorVariance (1 + j/n).
/// Supports Gaussian, Laplace and Degenerate families.
ErrorEnsemble build_ensemble(ErrorFamily family, std::size_t n);

using Rng = std::mt19937_64;

/// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t x);
/// Seed of replication `rep`: seed XOR mix64(rep).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t rep);

struct GeneratedData {
    Model model;
    Sample sample;
    std::vector<double> latent_t;

    double truth(double x, double t) const { return true_r(model, x, t); }
};

/// X, T ~ Uniform[-2, 2], eps ~ N(0, 0.25^2), U_j ~ ensemble.model(j),
/// Y = r(X, T) + eps, W = T + U. Draws are sequential per observation.
GeneratedData generate(Model model, std::size_t n, const ErrorEnsemble& ensemble, Rng& rng);

struct AseResult {
    double ase = 0.0;
    std::size_t excluded = 0;
    std::size_t evaluated = 0;
};

/// Mean squared error over unflagged grid points. Throws AllPointsExcluded.
AseResult ase(const Surface& estimate, Model model);
AseResult ase(const std::function<PointEstimate(double, double)>& estimate, Model model,
              std::span<const double> xs, std::span<const double> ts);

enum class Estimator { RHat, Naive, RTilde };

std::string_view to_string(Estimator estimator);
Estimator parse_estimator(std::string_view name);

struct SearchResult {
    std::vector<Bandwidths> pairs;
    /// nullopt where the pair could not be fitted (see failures).
    std::vector<std::optional<AseResult>> scores;
    std::vector<std::string> failures;
    std::optional<std::size_t> best;

    const Bandwidths& best_pair() const { return pairs.at(best.value()); }
    const AseResult& best_score() const { return *scores.at(best.value()); }
};

/// Oracle search for r_hat or the naive estimator. Minimises ASE; ties go to
/// the smaller h, then the smaller b, then the earlier entry.
SearchResult bandwidth_search(const GeneratedData& data, Estimator estimator, std::span<const Bandwidths> grid,
                              std::span<const double> xs, std::span<const double> ts, const QuadratureGrid& quad);

/// Oracle search for r_tilde over b only; the returned pairs carry h = NaN.
SearchResult partial_linear_search(const GeneratedData& data, double theta, std::span<const double> b_values,
                                   std::span<const double> xs, std::span<const double> ts,
                                   const QuadratureGrid& quad);

struct SimulationConfig {
    Model model = Model::Model1;
    ErrorFamily family = ErrorFamily::Gaussian;
    std::size_t n = 100;
    std::size_t reps = 20;
    GridAxis h_grid{0.02, 0.2, 5};
    GridAxis b_grid{0.02, 0.2, 5};
    /// Shared by the x and t directions.
    GridAxis eval_grid{-2.0, 2.0, 20};
    std::size_t quad_nodes = 64;
    std::uint64_t seed = 20240611;

    /// Protocol size: 50x50 evaluation grid, 100 replications, 10x10 bandwidths, 128 nodes.
    void apply_full_scale();
    /// Tensor grid, h-major.
    std::vector<Bandwidths> bandwidth_pairs() const;
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;

    friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

struct RepOptimum {
    Bandwidths pair;
    double ase = 0.0;
    std::size_t excluded = 0;
};

struct EstimatorReport {
    Estimator estimator = Estimator::RHat;
    std::vector<Bandwidths> pairs;
    std::vector<double> mean_ase;         ///< per pair, over reps where it was valid; NaN if never
    std::vector<std::size_t> valid_reps;  ///< per pair
    std::vector<std::optional<RepOptimum>> per_rep;
    double mean_optimal_ase = 0.0;
    std::size_t rep_count = 0;
    std::size_t excluded_points = 0;  ///< summed over reps at each rep's optimum
    Bandwidths modal_pair;            ///< most frequently selected optimum
};

struct RepFailure {
    std::size_t rep = 0;
    std::string message;
};

struct AseReport {
    SimulationConfig config;
    std::vector<EstimatorReport> estimators;
    std::vector<RepFailure> failures;
    std::vector<double> theta_hats;  ///< Model2 only, NaN for failed reps

    const EstimatorReport& get(Estimator estimator) const;
};

/// Runs config.reps independent replications, in parallel over OpenMP
/// workers. Results do not depend on the worker count. Failing replications
/// are recorded, never fatal.
AseReport run_replications(const SimulationConfig& config);

enum class Axis { FixX, FixT };

std::string_view to_string(Axis axis);
Axis parse_axis(std::string_view name);

struct CrossSectionPoint {
    double coord = 0.0;
    double estimate = 0.0;
    double truth = 0.0;
    bool flagged = false;
};

inline constexpr std::size_t kCrossSectionPoints = 200;

/// -2 + 4k/points for k = 0..points-1, so 0 is a node whenever points is even.
std::vector<double> cross_section_coords(std::size_t points = kCrossSectionPoints);

/// Evaluates `estimate` along the free axis at cross_section_coords(points).
std::vector<CrossSectionPoint> cross_section(const std::function<PointEstimate(double, double)>& estimate,
                                             Model model, Axis axis, double value,
                                             std::size_t points = kCrossSectionPoints);

/// Fits `estimator` on `data` at `bw` (r_tilde uses theta_hat and bw.b).
std::vector<CrossSectionPoint> cross_section(const GeneratedData& data, Estimator estimator, Axis axis, double value,
                                             const Bandwidths& bw, const QuadratureGrid& quad,
                                             std::size_t points = kCrossSectionPoints);

}  // namespace hetdeconv
