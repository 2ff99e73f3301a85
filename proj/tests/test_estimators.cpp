#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hetdeconv/errors.hpp"
#include "hetdeconv/estimators.hpp"
#include "hetdeconv/grid.hpp"
#include "hetdeconv/simulation.hpp"
#include "oracles.hpp"

using namespace hetdeconv;

namespace {

struct Draw {
    std::vector<double> x, w, y;
};

Draw draw(std::size_t n, std::uint64_t seed, double spread = 1.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-spread, spread);
    std::normal_distribution<double> z(0.0, 0.3);
    Draw d;
    for (std::size_t j = 0; j < n; ++j) {
        d.x.push_back(u(rng));
        d.w.push_back(u(rng));
        d.y.push_back(std::sin(d.x.back()) + 0.5 * d.w.back() + z(rng));
    }
    return d;
}

ErrorEnsemble same(const ErrorModel& m, std::size_t n) { return ErrorEnsemble(std::vector<ErrorModel>(n, m)); }

ErrorEnsemble hetero(ErrorFamily family, std::size_t n, double base = 0.1) {
    std::vector<ErrorModel> models;
    for (std::size_t j = 1; j <= n; ++j) {
        models.push_back(ErrorModel::make(family, base * (1.0 + double(j) / double(n))));
    }
    return ErrorEnsemble(models);
}

Sample make_sample(const Draw& d, ErrorEnsemble ens) { return Sample(d.x, d.w, d.y, std::move(ens)); }

const QuadratureGrid& quad64() {
    static const auto q = QuadratureGrid::gauss_legendre(64);
    return q;
}

}  // namespace

TEST_CASE("sample construction") {
    const Draw d = draw(5, 1);
    CHECK_THROWS_AS(Sample(d.x, d.w, {1.0, 2.0}, same(ErrorModel::degenerate(), 5)), DimensionMismatch);
    CHECK_THROWS_AS(make_sample(d, same(ErrorModel::degenerate(), 4)), DimensionMismatch);
    CHECK_THROWS_AS(Sample({1.0}, {1.0}, {1.0}, same(ErrorModel::degenerate(), 1)), std::invalid_argument);
    Draw bad = d;
    bad.w[2] = std::nan("");
    CHECK_THROWS_AS(make_sample(bad, same(ErrorModel::degenerate(), 5)), std::invalid_argument);
    CHECK_THROWS_AS(validate_bandwidths({0.1, -0.1}), std::invalid_argument);
    CHECK_THROWS_AS(validate_bandwidths({std::nan(""), 0.1}), std::invalid_argument);
}

TEST_CASE("fit") {
    SUBCASE("minimal sample evaluates to finite values") {
        const Sample s({0.0, 1.0}, {0.5, -0.5}, {1.0, 2.0}, hetero(ErrorFamily::Gaussian, 2));
        const auto est = fit(s, {0.2, 0.2}, quad64());
        for (double x : {-3.0, 0.0, 0.7}) {
            for (double t : {-1.0, 0.2, 5.0}) {
                CHECK(std::isfinite(eval_m_hat(est, x, t)));
                CHECK(std::isfinite(eval_f_hat(est, x, t)));
                CHECK(std::isfinite(eval_r_hat(est, x, t).value));
            }
        }
    }

    SUBCASE("vanishing characteristic function") {
        const Draw d = draw(10, 2);
        try {
            (void)fit(make_sample(d, same(ErrorModel::fejer(5.0), 10)), {0.2, 0.1}, quad64());
            FAIL("expected EnsembleInvalid");
        } catch (const EnsembleInvalid& e) {
            CHECK(std::abs(e.frequency()) >= 5.0);
        }
        // the same ensemble is fine once every scaled node stays inside the support
        CHECK_NOTHROW((void)fit(make_sample(d, same(ErrorModel::fejer(5.0), 10)), {0.2, 0.25}, quad64()));
    }
}

TEST_CASE("m_hat") {
    const Draw d = draw(40, 3);
    const Bandwidths bw{0.25, 0.2};

    SUBCASE("zero responses") {
        Draw z = d;
        std::fill(z.y.begin(), z.y.end(), 0.0);
        const auto est = fit(make_sample(z, hetero(ErrorFamily::Laplace, 40)), bw, quad64());
        CHECK(eval_m_hat(est, 0.3, -0.2) == 0.0);
    }

    SUBCASE("single contributing observation") {
        const double h = 0.3, b = 0.25;
        const Sample s({0.4, -1.0}, {0.1, 1.2}, {2.5, 0.0}, same(ErrorModel::degenerate(), 2));
        const auto est = fit(s, {h, b}, default_quadrature());
        for (double x : {0.0, 0.5}) {
            for (double t : {-0.3, 0.4}) {
                // psi = 1/2 for two degenerate laws
                const double expected = 2.5 * oracle::normal_pdf((x - 0.4) / h) *
                                        oracle::closed_form_L((t - 0.1) / b) / (2.0 * h * b);
                CHECK(eval_m_hat(est, x, t) == doctest::Approx(expected).epsilon(1e-10));
            }
        }
    }

    SUBCASE("constant responses scale f_hat") {
        Draw c = d;
        std::fill(c.y.begin(), c.y.end(), 2.0);
        const auto est = fit(make_sample(c, hetero(ErrorFamily::Gaussian, 40)), bw, quad64());
        for (double x : {-1.0, 0.0, 0.9}) {
            for (double t : {-0.5, 0.3}) CHECK(eval_m_hat(est, x, t) == 2.0 * eval_f_hat(est, x, t));
        }
        std::fill(c.y.begin(), c.y.end(), 3.7);
        const auto est2 = fit(make_sample(c, hetero(ErrorFamily::Gaussian, 40)), bw, quad64());
        CHECK(eval_m_hat(est2, 0.2, 0.1) == doctest::Approx(3.7 * eval_f_hat(est2, 0.2, 0.1)).epsilon(1e-13));
    }
}

TEST_CASE("f_hat") {
    const Draw d = draw(60, 4);

    SUBCASE("degenerate errors give the ordinary bivariate density estimate") {
        const Bandwidths bw{0.3, 0.2};
        const auto est = fit(make_sample(d, same(ErrorModel::degenerate(), 60)), bw, default_quadrature());
        for (double x : {-1.0, 0.0, 1.2}) {
            for (double t : {-0.8, 0.5}) {
                double kde = 0.0;
                for (std::size_t j = 0; j < 60; ++j) {
                    kde += oracle::normal_pdf((x - d.x[j]) / bw.h) * oracle::closed_form_L((t - d.w[j]) / bw.b);
                }
                kde /= 60.0 * bw.h * bw.b;
                CHECK(std::abs(eval_f_hat(est, x, t) - kde) <= 1e-8);
            }
        }
    }

    SUBCASE("decays far from the data in x") {
        const Bandwidths bw{0.2, 0.2};
        const auto est = fit(make_sample(d, hetero(ErrorFamily::Laplace, 60)), bw, quad64());
        const double xmax = *std::max_element(d.x.begin(), d.x.end());
        CHECK(std::abs(eval_f_hat(est, xmax + 20.0 * bw.h, 0.0)) < 1e-6);
    }

    SUBCASE("integrates to one on Model 1 data") {
        const std::size_t n = 500;
        Rng rng(99);
        const auto ens = build_ensemble(ErrorFamily::Gaussian, n);
        const auto data = generate(Model::Model1, n, ens, rng);
        const Bandwidths bw{0.2, 0.2};
        const auto est = fit(data.sample, bw, quad64());
        // f_hat is separable per observation, so a fine tensor grid sum factorises.
        const double step = 0.01;
        std::vector<double> grid;
        for (double v = -8.0; v <= 8.0 + 1e-12; v += step) grid.push_back(v);
        const Matrix kx = tabulate_gaussian_kernel(data.sample.x(), grid, bw.h);
        const Matrix kt = tabulate_deconv_kernel(est.weights(), data.sample.w(), grid);
        double mass = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double sx = 0.0, st = 0.0;
            for (double v : kx.row(j)) sx += v;
            for (double v : kt.row(j)) st += v;
            mass += sx * st;
        }
        mass *= step * step / (bw.h * bw.b);
        CHECK(mass == doctest::Approx(1.0).epsilon(0.05));
        // spot-check the tensor value against direct evaluation
        CHECK(kx(3, 700) * kt(3, 900) / (bw.h * bw.b) ==
              doctest::Approx(kernel_K((grid[700] - data.sample.x()[3]) / bw.h) *
                              est.weights().eval(3, (grid[900] - data.sample.w()[3]) / bw.b) / (bw.h * bw.b)));
    }
}

TEST_CASE("r_hat") {
    SUBCASE("constant response is reproduced exactly") {
        Draw d = draw(80, 5, 2.0);
        std::fill(d.y.begin(), d.y.end(), 3.7);
        for (auto fam : {ErrorFamily::Gaussian, ErrorFamily::Laplace}) {
            for (Bandwidths bw : {Bandwidths{0.02, 0.02}, Bandwidths{0.2, 0.02}, Bandwidths{0.05, 0.2}}) {
                const auto est = fit(make_sample(d, hetero(fam, 80, 4.0 / 15.0)), bw, quad64());
                for (double x = -2.0; x <= 2.0; x += 0.4) {
                    for (double t = -2.0; t <= 2.0; t += 0.4) {
                        const auto r = eval_r_hat(est, x, t);
                        if (!r.flagged) CHECK(std::abs(r.value - 3.7) <= 1e-12);
                    }
                }
            }
        }
    }

    SUBCASE("degenerate errors reduce to bivariate Nadaraya-Watson") {
        const Draw d = draw(200, 6);
        const Bandwidths bw{0.3, 0.25};
        const auto est = fit(make_sample(d, same(ErrorModel::degenerate(), 200)), bw, default_quadrature());
        for (int i = 0; i < 10; ++i) {
            for (int k = 0; k < 10; ++k) {
                const double x = -1.5 + 3.0 * i / 9.0;
                const double t = -1.5 + 3.0 * k / 9.0;
                const auto r = eval_r_hat(est, x, t);
                CHECK_FALSE(r.flagged);
                CHECK(std::abs(r.value - oracle::nadaraya_watson(d.x, d.w, d.y, bw.h, bw.b, x, t)) <= 1e-8);
            }
        }
    }

    SUBCASE("homoscedastic Laplace reduces to the classical partial deconvolution estimator") {
        const std::size_t n = 60;
        const Draw d = draw(n, 7);
        const double s = 0.2;
        const Bandwidths bw{0.3, 0.3};
        const auto est = fit(make_sample(d, same(ErrorModel::laplace(s), n)), bw, default_quadrature());
        const oracle::HomoscedasticEstimator ref{d.x, d.w, d.y, bw.h, bw.b,
                                                 [s](double v) { return 1.0 / (1.0 + 0.5 * s * v * v); }};
        for (double x : {-1.0, 0.2, 1.1}) {
            for (double t : {-0.9, 0.0, 0.8}) {
                const auto [m, f] = ref.sums(x, t);
                CHECK(std::abs(eval_f_hat(est, x, t) - f) <= 1e-8);
                CHECK(std::abs(eval_m_hat(est, x, t) - m) <= 1e-8);
                CHECK(std::abs(eval_r_hat(est, x, t).value - m / f) <= 1e-8);
            }
        }
    }

    SUBCASE("affine equivariance in y") {
        const Draw d = draw(70, 8);
        const Bandwidths bw{0.25, 0.2};
        const auto ens = hetero(ErrorFamily::Laplace, 70);
        const auto est = fit(make_sample(d, ens), bw, quad64());
        Draw t = d;
        for (double& y : t.y) y = -1.5 * y + 4.0;
        const auto est2 = fit(make_sample(t, ens), bw, quad64());
        for (double x : {-0.8, 0.4}) {
            for (double tt : {-0.3, 0.6}) {
                const auto a = eval_r_hat(est, x, tt);
                const auto b = eval_r_hat(est2, x, tt);
                REQUIRE_FALSE(a.flagged);
                CHECK(b.value == doctest::Approx(-1.5 * a.value + 4.0).epsilon(1e-11));
            }
        }
    }

    SUBCASE("location equivariance in x") {
        const Draw d = draw(70, 9);
        const Bandwidths bw{0.25, 0.2};
        const auto ens = hetero(ErrorFamily::Gaussian, 70);
        const auto est = fit(make_sample(d, ens), bw, quad64());
        const double delta = 0.75;
        Draw s = d;
        for (double& x : s.x) x += delta;
        const auto est2 = fit(make_sample(s, ens), bw, quad64());
        for (double x : {-0.8, 0.4, 1.0}) {
            for (double t : {-0.3, 0.6}) {
                CHECK(std::abs(eval_r_hat(est, x, t).value - eval_r_hat(est2, x + delta, t).value) <= 1e-12);
            }
        }
    }

    SUBCASE("tiny denominators are flagged and floored") {
        const Draw d = draw(30, 10, 1.0);
        const Bandwidths bw{0.05, 0.05};
        const auto est = fit(make_sample(d, hetero(ErrorFamily::Gaussian, 30)), bw, quad64());
        const auto far = eval_r_hat(est, 30.0, 0.0);
        CHECK(far.flagged);
        CHECK(est.ridge_floor() == doctest::Approx(1e-8 / (bw.h * bw.b)));
        CHECK(std::isfinite(far.value));
    }
}

TEST_CASE("ratio helpers") {
    CHECK(floored_ratio(6.0, 2.0, 1e-3).value == 3.0);
    CHECK_FALSE(floored_ratio(6.0, 2.0, 1e-3).flagged);
    const auto f = floored_ratio(1.0, -1e-9, 1e-3);
    CHECK(f.flagged);
    CHECK(f.value == doctest::Approx(-1000.0));
    const auto a = anchored_ratio(2.0, 0.5, 4.5, 1.0, 1.0, 1e-8);
    CHECK(a.value == 2.5);
    CHECK_FALSE(a.flagged);
}

TEST_CASE("naive estimator") {
    Draw d = draw(50, 11);
    std::fill(d.y.begin(), d.y.end(), -1.25);
    const auto s = make_sample(d, hetero(ErrorFamily::Gaussian, 50));
    for (double x : {-1.0, 0.3}) {
        for (double t : {-0.5, 1.0}) CHECK(naive_estimator(s, {0.2, 0.2}, x, t).value == -1.25);
    }
    // Gaussian product-kernel Nadaraya-Watson written out directly
    const Draw e = draw(50, 12);
    const auto s2 = make_sample(e, hetero(ErrorFamily::Gaussian, 50));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < 50; ++j) {
        const double k = oracle::normal_pdf((0.1 - e.x[j]) / 0.3) * oracle::normal_pdf((-0.2 - e.w[j]) / 0.15);
        num += e.y[j] * k;
        den += k;
    }
    CHECK(naive_estimator(s2, {0.3, 0.15}, 0.1, -0.2).value == doctest::Approx(num / den).epsilon(1e-13));
}

TEST_CASE("naive and r_hat agree in quality without measurement error") {
    const std::size_t n = 500;
    Rng rng(2024);
    const auto ens = build_ensemble(ErrorFamily::Degenerate, n);
    const auto data = generate(Model::Model1, n, ens, rng);
    const auto xs = GridAxis{-2.0, 2.0, 20}.points();
    std::vector<Bandwidths> grid;
    for (double h : GridAxis{0.05, 0.4, 6}.points()) {
        for (double b : GridAxis{0.05, 0.4, 6}.points()) grid.push_back({h, b});
    }
    const auto r = bandwidth_search(data, Estimator::RHat, grid, xs, xs, quad64());
    const auto nv = bandwidth_search(data, Estimator::Naive, grid, xs, xs, quad64());
    REQUIRE(r.best);
    REQUIRE(nv.best);
    CHECK(nv.best_score().ase <= 2.0 * r.best_score().ase);
}

TEST_CASE("theta_hat") {
    std::vector<double> x{-1.0, 0.5, 2.0, 3.5, -0.2};
    std::vector<double> w{0.0, 0.1, 0.2, 0.3, 0.4};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * v);
    const auto ens = same(ErrorModel::degenerate(), 5);
    CHECK(theta_hat(Sample(x, w, y, ens)) == doctest::Approx(3.0).epsilon(1e-15));
    for (double& v : y) v += 5.0;
    CHECK(theta_hat(Sample(x, w, y, ens)) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK_THROWS_AS(theta_hat(Sample({1.0, 1.0}, {0.0, 1.0}, {2.0, 3.0}, same(ErrorModel::degenerate(), 2))),
                    DegenerateDesign);

    SUBCASE("root-n consistent on Model 2") {
        const std::size_t n = 500;
        const auto e2 = build_ensemble(ErrorFamily::Gaussian, n);
        int close = 0;
        const int seeds = 100;
        for (int s = 0; s < seeds; ++s) {
            Rng rng(substream_seed(77, s));
            const auto data = generate(Model::Model2, n, e2, rng);
            close += std::abs(theta_hat(data.sample) - 3.0) < 0.2;
        }
        CHECK(close >= 95);
    }
}

TEST_CASE("r_tilde") {
    const std::size_t n = 60;
    const Draw d = draw(n, 13);

    SUBCASE("exact linear response") {
        Draw lin = d;
        const double theta = 2.25;
        for (std::size_t j = 0; j < n; ++j) lin.y[j] = theta * lin.x[j];
        const auto s = make_sample(lin, hetero(ErrorFamily::Laplace, n));
        const PartialLinearEstimator est(s, 0.2, quad64(), theta);
        for (double x : {-1.0, 0.0, 1.7}) {
            for (double t : {-1.0, 0.0, 0.9}) {
                const auto r = est.eval(x, t);
                if (!r.flagged) CHECK(r.value == doctest::Approx(x * theta).epsilon(1e-13));
                CHECK(eval_r_tilde(s, 0.2, quad64(), theta, x, t).value == r.value);
            }
        }
    }

    SUBCASE("degenerate errors reduce to one-dimensional Nadaraya-Watson of residuals") {
        const auto s = make_sample(d, same(ErrorModel::degenerate(), n));
        const double theta = theta_hat(s);
        const double b = 0.25;
        const PartialLinearEstimator est(s, b, default_quadrature(), theta);
        std::vector<double> res;
        for (std::size_t j = 0; j < n; ++j) res.push_back(d.y[j] - theta * d.x[j]);
        for (double x : {-1.2, 0.5}) {
            for (double t : {-1.0, -0.1, 0.6, 1.3}) {
                const double expected = x * theta + oracle::nadaraya_watson_1d(d.w, res, b, t);
                CHECK(std::abs(est.eval(x, t).value - expected) <= 1e-8);
            }
        }
    }

    SUBCASE("vanishing characteristic function") {
        CHECK_THROWS_AS(PartialLinearEstimator(make_sample(d, same(ErrorModel::fejer(2.0), n)), 0.1, quad64(), 1.0),
                        EnsembleInvalid);
    }
}

TEST_CASE("variance bound diagnostic") {
    const auto quad = default_quadrature();

    SUBCASE("degenerate ensemble has a closed form") {
        const std::size_t n = 10;
        const auto ens = same(ErrorModel::degenerate(), n);
        const Bandwidths bw{0.1, 0.2};
        const double c_sup = 1.7;
        // \int_{-1}^{1} (1 - u^2)^6 du = 2048 / 3003
        const double poly = oracle::simpson([](double u) { return std::pow(1.0 - u * u, 6); }, -1.0, 1.0, 2000);
        CHECK(poly == doctest::Approx(2048.0 / 3003.0).epsilon(1e-12));
        const double expected = c_sup * (2048.0 / 3003.0) / (2.0 * oracle::kPi * bw.h * bw.b * n);
        CHECK(variance_bound_diagnostic(ens, bw, quad, c_sup) == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("inverse in h") {
        const auto ens = build_ensemble(ErrorFamily::Laplace, 50);
        for (double b : {0.05, 0.2}) {
            const double a = variance_bound_diagnostic(ens, {0.1, b}, quad, 1.0);
            const double c = variance_bound_diagnostic(ens, {0.05, b}, quad, 1.0);
            CHECK(std::abs(c / a - 2.0) <= 1e-12 * 2.0);
        }
    }

    SUBCASE("Gaussian ensemble grows as b shrinks") {
        const auto ens = build_ensemble(ErrorFamily::Gaussian, 100);
        const double a = variance_bound_diagnostic(ens, {0.1, 0.2}, quad, 1.0);
        const double b = variance_bound_diagnostic(ens, {0.1, 0.1}, quad, 1.0);
        const double c = variance_bound_diagnostic(ens, {0.1, 0.05}, quad, 1.0);
        CHECK(a < b);
        CHECK(b < c);
    }

    SUBCASE("vanishing characteristic function") {
        CHECK_THROWS_AS(variance_bound_diagnostic(same(ErrorModel::fejer(1.0), 4), {0.1, 0.1}, quad, 1.0),
                        DegenerateDenominator);
    }
}

TEST_CASE("r_hat tracks the truth at (1, 0) on Model 1 with n = 500") {
    SimulationConfig cfg;
    cfg.n = 500;
    const auto pairs = cfg.bandwidth_pairs();
    const auto xs = cfg.eval_grid.points();
    const auto ens = build_ensemble(ErrorFamily::Gaussian, cfg.n);
    const int seeds = 20;
    int close = 0;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(substream_seed(cfg.seed, s));
        const auto data = generate(Model::Model1, cfg.n, ens, rng);
        const auto search = bandwidth_search(data, Estimator::RHat, pairs, xs, xs, quad64());
        REQUIRE(search.best);
        const auto r = fit(data.sample, search.best_pair(), quad64()).r_hat(1.0, 0.0);
        close += !r.flagged && std::abs(r.value - 1.0) < 0.25;
    }
    CHECK(close >= 18);
}
