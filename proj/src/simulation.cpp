#include "hetdeconv/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hetdeconv/errors.hpp"

namespace hetdeconv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool better(const AseResult& a, const Bandwidths& pa, const AseResult& b, const Bandwidths& pb) {
    if (a.ase != b.ase) return a.ase < b.ase;
    if (pa.h != pb.h) return pa.h < pb.h;
    return pa.b < pb.b;
}

void pick_best(SearchResult& result) {
    for (std::size_t p = 0; p < result.pairs.size(); ++p) {
        if (!result.scores[p]) continue;
        if (!result.best || better(*result.scores[p], result.pairs[p], *result.scores[*result.best],
                                   result.pairs[*result.best])) {
            result.best = p;
        }
    }
}

std::optional<DeconvWeights> try_weights(const ErrorEnsemble& ens, double b, const QuadratureGrid& quad,
                                         std::string& failure) {
    const auto report = validate_ensemble(ens, b, quad.nodes());
    if (!report.passed) {
        std::ostringstream msg;
        msg << "ensemble invalid at b=" << b << " (S below floor at v=" << report.failing_frequencies.front()
            << ")";
        failure = msg.str();
        return std::nullopt;
    }
    return DeconvWeights(ens, b, quad);
}

}  // namespace

std::string_view to_string(Model model) { return model == Model::Model1 ? "model1" : "model2"; }

Model parse_model(std::string_view name) {
    const auto s = lowercase(name);
    if (s == "model1" || s == "1") return Model::Model1;
    if (s == "model2" || s == "2") return Model::Model2;
    throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

double true_r(Model model, double x, double t) {
    if (model == Model::Model1) return x * x * std::exp(-0.5 * t * t);
    return x * kModel2Slope + std::cos(t);
}

ErrorEnsemble build_ensemble(ErrorFamily family, std::size_t n) {
    if (n < 1) throw std::invalid_argument("ensemble size must be at least 1");
    if (family == ErrorFamily::Fejer) throw std::invalid_argument("fejer errors are not a simulation family");
    std::vector<ErrorModel> models;
    models.reserve(n);
    for (std::size_t j = 1; j <= n; ++j) {
        const double variance = kBaseErrorVariance * (1.0 + static_cast<double>(j) / static_cast<double>(n));
        models.push_back(ErrorModel::make(family, variance));
    }
    return ErrorEnsemble(std::move(models));
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t rep) { return seed ^ mix64(rep); }

GeneratedData generate(Model model, std::size_t n, const ErrorEnsemble& ensemble, Rng& rng) {
    if (ensemble.size() != n) throw DimensionMismatch("ensemble size does not match n");
    std::uniform_real_distribution<double> uniform(-2.0, 2.0);
    std::normal_distribution<double> noise(0.0, kNoiseSd);
    std::normal_distribution<double> standard_normal(0.0, 1.0);
    std::exponential_distribution<double> exponential(1.0);

    std::vector<double> x(n), w(n), y(n), t(n);
    for (std::size_t j = 0; j < n; ++j) {
        x[j] = uniform(rng);
        t[j] = uniform(rng);
        const double eps = noise(rng);
        const auto& m = ensemble.model(j);
        double u = 0.0;
        switch (m.family()) {
            case ErrorFamily::Gaussian: u = std::sqrt(m.variance()) * standard_normal(rng); break;
            case ErrorFamily::Laplace: {
                // difference of two unit exponentials is standard Laplace
                const double e1 = exponential(rng);
                const double e2 = exponential(rng);
                u = std::sqrt(0.5 * m.variance()) * (e1 - e2);
                break;
            }
            case ErrorFamily::Degenerate: break;
            case ErrorFamily::Fejer: throw std::invalid_argument("cannot sample fejer errors");
        }
        y[j] = true_r(model, x[j], t[j]) + eps;
        w[j] = t[j] + u;
    }
    return GeneratedData{model, Sample(std::move(x), std::move(w), std::move(y), ensemble), std::move(t)};
}

AseResult ase(const Surface& estimate, Model model) {
    AseResult out;
    double sum = 0.0;
    for (std::size_t i = 0; i < estimate.xs.size(); ++i) {
        for (std::size_t k = 0; k < estimate.ts.size(); ++k) {
            if (estimate.is_flagged(i, k)) {
                ++out.excluded;
                continue;
            }
            const double d = estimate.at(i, k) - true_r(model, estimate.xs[i], estimate.ts[k]);
            sum += d * d;
            ++out.evaluated;
        }
    }
    if (out.evaluated == 0) throw AllPointsExcluded("every evaluation point hit the ridge floor");
    out.ase = sum / static_cast<double>(out.evaluated);
    return out;
}

AseResult ase(const std::function<PointEstimate(double, double)>& estimate, Model model,
              std::span<const double> xs, std::span<const double> ts) {
    if (xs.empty() || ts.empty()) throw std::invalid_argument("evaluation grid is empty");
    Surface s;
    s.xs.assign(xs.begin(), xs.end());
    s.ts.assign(ts.begin(), ts.end());
    for (double x : xs) {
        for (double t : ts) {
            const auto e = estimate(x, t);
            s.value.push_back(e.value);
            s.flagged.push_back(e.flagged ? 1 : 0);
        }
    }
    return ase(s, model);
}

std::string_view to_string(Estimator estimator) {
    switch (estimator) {
        case Estimator::RHat: return "r_hat";
        case Estimator::Naive: return "naive";
        case Estimator::RTilde: return "r_tilde";
    }
    return "unknown";
}

Estimator parse_estimator(std::string_view name) {
    const auto s = lowercase(name);
    if (s == "r_hat" || s == "rhat") return Estimator::RHat;
    if (s == "naive") return Estimator::Naive;
    if (s == "r_tilde" || s == "rtilde") return Estimator::RTilde;
    throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

SearchResult bandwidth_search(const GeneratedData& data, Estimator estimator, std::span<const Bandwidths> grid,
                              std::span<const double> xs, std::span<const double> ts, const QuadratureGrid& quad) {
    if (grid.empty()) throw std::invalid_argument("bandwidth grid is empty");
    if (estimator == Estimator::RTilde) {
        throw std::invalid_argument("use partial_linear_search for r_tilde");
    }
    const Sample& s = data.sample;
    SearchResult result;
    result.pairs.assign(grid.begin(), grid.end());
    result.scores.resize(grid.size());
    result.failures.resize(grid.size());

    // Kernel tables are separable in (h, b); build each once.
    std::map<double, Matrix> kx_cache;
    std::map<double, std::optional<Matrix>> kt_cache;
    std::map<double, std::string> kt_failure;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const Bandwidths& bw = grid[p];
        validate_bandwidths(bw);
        auto kt_it = kt_cache.find(bw.b);
        if (kt_it == kt_cache.end()) {
            std::optional<Matrix> table;
            if (estimator == Estimator::Naive) {
                table = tabulate_gaussian_kernel(s.w(), ts, bw.b);
            } else {
                std::string failure;
                if (auto weights = try_weights(s.ensemble(), bw.b, quad, failure)) {
                    table = tabulate_deconv_kernel(*weights, s.w(), ts);
                } else {
                    kt_failure[bw.b] = failure;
                }
            }
            kt_it = kt_cache.emplace(bw.b, std::move(table)).first;
        }
        if (!kt_it->second) {
            result.failures[p] = kt_failure[bw.b];
            continue;
        }
        auto kx_it = kx_cache.find(bw.h);
        if (kx_it == kx_cache.end()) {
            kx_it = kx_cache.emplace(bw.h, tabulate_gaussian_kernel(s.x(), xs, bw.h)).first;
        }
        const double scale = estimator == Estimator::Naive
                                 ? 1.0 / (static_cast<double>(s.size()) * bw.h * bw.b)
                                 : 1.0 / (bw.h * bw.b);
        const Surface surface =
            ratio_surface(kx_it->second, *kt_it->second, s.y(), xs, ts, scale, ridge_floor(bw.h, bw.b));
        try {
            result.scores[p] = ase(surface, data.model);
        } catch (const AllPointsExcluded& e) {
            result.failures[p] = e.what();
        }
    }
    pick_best(result);
    return result;
}

SearchResult partial_linear_search(const GeneratedData& data, double theta, std::span<const double> b_values,
                                   std::span<const double> xs, std::span<const double> ts,
                                   const QuadratureGrid& quad) {
    if (b_values.empty()) throw std::invalid_argument("bandwidth grid is empty");
    const Sample& s = data.sample;
    std::vector<double> residuals(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) residuals[j] = s.y()[j] - s.x()[j] * theta;

    SearchResult result;
    result.scores.resize(b_values.size());
    result.failures.resize(b_values.size());
    for (std::size_t p = 0; p < b_values.size(); ++p) {
        const double b = b_values[p];
        result.pairs.push_back({kNaN, b});
        if (!(b > 0.0)) throw std::invalid_argument("bandwidths must be finite and positive");
        std::string failure;
        auto weights = try_weights(s.ensemble(), b, quad, failure);
        if (!weights) {
            result.failures[p] = failure;
            continue;
        }
        const Matrix kt = tabulate_deconv_kernel(*weights, s.w(), ts);
        const auto offsets = ratio_curve(kt, residuals, 1.0 / b, 1e-8 / b);
        try {
            result.scores[p] = ase(partial_linear_surface(theta, offsets, xs, ts), data.model);
        } catch (const AllPointsExcluded& e) {
            result.failures[p] = e.what();
        }
    }
    // h is NaN throughout, so order by ASE then b.
    for (std::size_t p = 0; p < result.pairs.size(); ++p) {
        if (!result.scores[p]) continue;
        if (!result.best) {
            result.best = p;
            continue;
        }
        const auto& cur = *result.scores[*result.best];
        const auto& cand = *result.scores[p];
        if (cand.ase < cur.ase || (cand.ase == cur.ase && result.pairs[p].b < result.pairs[*result.best].b)) {
            result.best = p;
        }
    }
    return result;
}

void SimulationConfig::apply_full_scale() {
    reps = 100;
    h_grid.count = 10;
    b_grid.count = 10;
    eval_grid.count = 50;
    quad_nodes = 128;
}

std::vector<Bandwidths> SimulationConfig::bandwidth_pairs() const {
    std::vector<Bandwidths> out;
    for (double h : h_grid.points()) {
        for (double b : b_grid.points()) out.push_back({h, b});
    }
    return out;
}

void SimulationConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument(field + ": " + why);
    };
    if (n < 2) fail("n", "must be at least 2");
    if (reps < 1) fail("reps", "must be at least 1");
    if (family != ErrorFamily::Gaussian && family != ErrorFamily::Laplace && family != ErrorFamily::Degenerate) {
        fail("error_family", "must be gaussian, laplace or degenerate");
    }
    auto check_bw = [&](const GridAxis& axis, const std::string& name) {
        if (axis.count < 1) fail(name + ".count", "must be at least 1");
        if (!(axis.min > 0.0) || !std::isfinite(axis.max) || !(axis.max >= axis.min)) {
            fail(name, "bandwidths must be positive with max >= min");
        }
    };
    check_bw(h_grid, "h_grid");
    check_bw(b_grid, "b_grid");
    if (eval_grid.count < 1) fail("eval_grid.count", "must be at least 1");
    if (!(eval_grid.min >= -2.0) || !(eval_grid.max <= 2.0) || !(eval_grid.max >= eval_grid.min)) {
        fail("eval_grid", "must lie within [-2, 2] with max >= min");
    }
    if (quad_nodes < QuadratureGrid::kMinNodes) fail("quad_nodes", "must be at least 16");
}

const EstimatorReport& AseReport::get(Estimator estimator) const {
    for (const auto& e : estimators) {
        if (e.estimator == estimator) return e;
    }
    throw std::out_of_range("estimator not present in report: " + std::string(to_string(estimator)));
}

namespace {

struct RepResult {
    std::vector<SearchResult> searches;  // one per estimator, report order
    double theta = kNaN;
    std::optional<std::string> failure;
};

void aggregate(EstimatorReport& report, std::span<const RepResult> reps, std::size_t slot) {
    const std::size_t pairs = report.pairs.size();
    report.mean_ase.assign(pairs, 0.0);
    report.valid_reps.assign(pairs, 0);
    report.per_rep.assign(reps.size(), std::nullopt);
    std::vector<std::size_t> votes(pairs, 0);
    double optimal_sum = 0.0;
    for (std::size_t r = 0; r < reps.size(); ++r) {
        if (reps[r].failure) continue;
        const SearchResult& s = reps[r].searches[slot];
        for (std::size_t p = 0; p < pairs; ++p) {
            if (!s.scores[p]) continue;
            report.mean_ase[p] += s.scores[p]->ase;
            ++report.valid_reps[p];
        }
        if (!s.best) continue;
        const auto& score = s.best_score();
        report.per_rep[r] = RepOptimum{s.best_pair(), score.ase, score.excluded};
        optimal_sum += score.ase;
        report.excluded_points += score.excluded;
        ++report.rep_count;
        ++votes[*s.best];
    }
    for (std::size_t p = 0; p < pairs; ++p) {
        report.mean_ase[p] = report.valid_reps[p] > 0 ? report.mean_ase[p] / static_cast<double>(report.valid_reps[p])
                                                      : kNaN;
    }
    report.mean_optimal_ase = report.rep_count > 0 ? optimal_sum / static_cast<double>(report.rep_count) : kNaN;
    // Mode of selected pairs; ties go to the first in pair-grid order.
    std::size_t top = 0;
    report.modal_pair = {kNaN, kNaN};
    for (std::size_t p = 0; p < pairs; ++p) {
        if (votes[p] > top) {
            top = votes[p];
            report.modal_pair = report.pairs[p];
        }
    }
}

}  // namespace

AseReport run_replications(const SimulationConfig& config) {
    config.validate();
    const auto pairs = config.bandwidth_pairs();
    const auto b_values = config.b_grid.points();
    const auto xs = config.eval_grid.points();
    const auto ts = xs;
    const auto quad = QuadratureGrid::gauss_legendre(config.quad_nodes);
    const ErrorEnsemble ensemble = build_ensemble(config.family, config.n);

    std::vector<Estimator> estimators{Estimator::RHat, Estimator::Naive};
    if (config.model == Model::Model2) estimators.push_back(Estimator::RTilde);

    std::vector<RepResult> results(config.reps);
    const auto rep_count = static_cast<std::ptrdiff_t>(config.reps);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < rep_count; ++r) {
        RepResult& out = results[static_cast<std::size_t>(r)];
        try {
            Rng rng(substream_seed(config.seed, static_cast<std::uint64_t>(r)));
            const GeneratedData data = generate(config.model, config.n, ensemble, rng);
            for (Estimator e : estimators) {
                if (e == Estimator::RTilde) {
                    out.theta = theta_hat(data.sample);
                    out.searches.push_back(partial_linear_search(data, out.theta, b_values, xs, ts, quad));
                } else {
                    out.searches.push_back(bandwidth_search(data, e, pairs, xs, ts, quad));
                }
            }
        } catch (const std::exception& ex) {
            out.failure = ex.what();
        }
    }

    AseReport report;
    report.config = config;
    for (std::size_t r = 0; r < results.size(); ++r) {
        if (results[r].failure) report.failures.push_back({r, *results[r].failure});
        if (config.model == Model::Model2) report.theta_hats.push_back(results[r].theta);
    }
    for (std::size_t slot = 0; slot < estimators.size(); ++slot) {
        EstimatorReport er;
        er.estimator = estimators[slot];
        if (er.estimator == Estimator::RTilde) {
            for (double b : b_values) er.pairs.push_back({kNaN, b});
        } else {
            er.pairs = pairs;
        }
        aggregate(er, results, slot);
        report.estimators.push_back(std::move(er));
    }
    return report;
}

std::string_view to_string(Axis axis) { return axis == Axis::FixX ? "fix_x" : "fix_t"; }

Axis parse_axis(std::string_view name) {
    const auto s = lowercase(name);
    if (s == "fix_x" || s == "x") return Axis::FixX;
    if (s == "fix_t" || s == "t") return Axis::FixT;
    throw std::invalid_argument("unknown axis '" + std::string(name) + "'");
}

namespace {

void check_section_value(double value) {
    if (!(value >= -2.0 && value <= 2.0)) throw std::invalid_argument("cross-section value must lie in [-2, 2]");
}

}  // namespace

std::vector<double> cross_section_coords(std::size_t points) {
    if (points == 0) throw std::invalid_argument("cross-section needs at least one point");
    std::vector<double> out(points);
    for (std::size_t k = 0; k < points; ++k) {
        out[k] = -2.0 + 4.0 * static_cast<double>(k) / static_cast<double>(points);
    }
    return out;
}

std::vector<CrossSectionPoint> cross_section(const std::function<PointEstimate(double, double)>& estimate,
                                             Model model, Axis axis, double value, std::size_t points) {
    check_section_value(value);
    const auto coords = cross_section_coords(points);
    std::vector<CrossSectionPoint> out;
    out.reserve(coords.size());
    for (double c : coords) {
        const double x = axis == Axis::FixX ? value : c;
        const double t = axis == Axis::FixX ? c : value;
        const auto e = estimate(x, t);
        out.push_back({c, e.value, true_r(model, x, t), e.flagged});
    }
    return out;
}

std::vector<CrossSectionPoint> cross_section(const GeneratedData& data, Estimator estimator, Axis axis, double value,
                                             const Bandwidths& bw, const QuadratureGrid& quad, std::size_t points) {
    check_section_value(value);
    const auto coords = cross_section_coords(points);
    const std::vector<double> fixed{value};
    const auto& xs = axis == Axis::FixX ? fixed : coords;
    const auto& ts = axis == Axis::FixX ? coords : fixed;
    Surface surface;
    switch (estimator) {
        case Estimator::RHat: surface = r_hat_surface(fit(data.sample, bw, quad), xs, ts); break;
        case Estimator::Naive: surface = naive_surface(data.sample, bw, xs, ts); break;
        case Estimator::RTilde: {
            const PartialLinearEstimator est(data.sample, bw.b, quad, theta_hat(data.sample));
            surface = r_tilde_surface(est, xs, ts);
            break;
        }
    }
    std::vector<CrossSectionPoint> out;
    out.reserve(coords.size());
    for (std::size_t c = 0; c < coords.size(); ++c) {
        const std::size_t i = axis == Axis::FixX ? 0 : c;
        const std::size_t k = axis == Axis::FixX ? c : 0;
        const double x = surface.xs[i];
        const double t = surface.ts[k];
        out.push_back({coords[c], surface.at(i, k), true_r(data.model, x, t), surface.is_flagged(i, k)});
    }
    return out;
}

}  // namespace hetdeconv
