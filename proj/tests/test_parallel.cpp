#include <doctest.h>

#include <cmath>
#include <vector>

#include "hetdeconv/grid.hpp"
#include "hetdeconv/simulation.hpp"

using namespace hetdeconv;

namespace {

GeneratedData sample_data(Model model, ErrorFamily family, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return generate(model, n, build_ensemble(family, n), rng);
}

void check_close(const Surface& a, const Surface& b, double tol) {
    REQUIRE(a.value.size() == b.value.size());
    for (std::size_t i = 0; i < a.value.size(); ++i) {
        CHECK(a.flagged[i] == b.flagged[i]);
        CHECK(std::abs(a.value[i] - b.value[i]) <= tol * std::max(1.0, std::abs(b.value[i])));
    }
}

void check_identical(const Surface& a, const Surface& b) {
    REQUIRE(a.value.size() == b.value.size());
    for (std::size_t i = 0; i < a.value.size(); ++i) {
        CHECK(a.value[i] == b.value[i]);
        CHECK(a.flagged[i] == b.flagged[i]);
    }
}

}  // namespace

TEST_CASE("grid axis") {
    const auto p = GridAxis{-2.0, 2.0, 5}.points();
    CHECK(p == std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0});
    CHECK(GridAxis{0.3, 0.3, 1}.points() == std::vector<double>{0.3});
    CHECK_THROWS(GridAxis{0.0, 1.0, 0}.points());
    CHECK_THROWS(GridAxis{1.0, 0.0, 3}.points());
}

TEST_CASE("kernel tables match pointwise evaluation") {
    const auto data = sample_data(Model::Model1, ErrorFamily::Laplace, 40, 3);
    const auto quad = QuadratureGrid::gauss_legendre(64);
    const DeconvWeights w(data.sample.ensemble(), 0.1, quad);
    const auto ts = GridAxis{-2.0, 2.0, 17}.points();
    const Matrix kt = tabulate_deconv_kernel(w, data.sample.w(), ts);
    const Matrix kx = tabulate_gaussian_kernel(data.sample.x(), ts, 0.2);
    for (std::size_t j = 0; j < 40; ++j) {
        for (std::size_t k = 0; k < ts.size(); ++k) {
            const double arg = (ts[k] - data.sample.w()[j]) / 0.1;
            CHECK(kt(j, k) == doctest::Approx(reference::eval_deconv_kernel(w, j, arg)).epsilon(1e-12));
            CHECK(kx(j, k) == kernel_K((ts[k] - data.sample.x()[j]) / 0.2));
        }
    }
}

TEST_CASE("OpenMP surfaces agree with the serial reference") {
    const auto quad = QuadratureGrid::gauss_legendre(64);
    const auto xs = GridAxis{-2.0, 2.0, 13}.points();
    const auto ts = GridAxis{-2.0, 2.0, 11}.points();
    for (auto family : {ErrorFamily::Gaussian, ErrorFamily::Laplace}) {
        const auto data = sample_data(Model::Model2, family, 80, 17);
        for (Bandwidths bw : {Bandwidths{0.2, 0.2}, Bandwidths{0.05, 0.1}}) {
            const auto est = fit(data.sample, bw, quad);
            const Surface fast = r_hat_surface(est, xs, ts);
            check_close(fast, reference::r_hat_surface(est, xs, ts), 1e-10);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                for (std::size_t k = 0; k < ts.size(); ++k) {
                    CHECK(fast.density[i * ts.size() + k] ==
                          doctest::Approx(est.f_hat(xs[i], ts[k])).epsilon(1e-10).scale(1.0));
                }
            }
            check_close(naive_surface(data.sample, bw, xs, ts), reference::naive_surface(data.sample, bw, xs, ts),
                        1e-12);
            const PartialLinearEstimator pl(data.sample, bw.b, quad, theta_hat(data.sample));
            check_close(r_tilde_surface(pl, xs, ts), reference::r_tilde_surface(pl, xs, ts), 1e-10);
        }
    }
}

TEST_CASE("surfaces do not depend on the worker count") {
    const auto quad = QuadratureGrid::gauss_legendre(64);
    const auto data = sample_data(Model::Model1, ErrorFamily::Gaussian, 100, 5);
    const auto xs = GridAxis{-2.0, 2.0, 20}.points();
    const auto est = fit(data.sample, {0.1, 0.1}, quad);
    set_workers(1);
    const Surface one = r_hat_surface(est, xs, xs);
    const Surface naive_one = naive_surface(data.sample, {0.1, 0.1}, xs, xs);
    for (int workers : {2, 3, 8}) {
        set_workers(workers);
        CHECK(worker_count() == workers);
        check_identical(r_hat_surface(est, xs, xs), one);
        check_identical(naive_surface(data.sample, {0.1, 0.1}, xs, xs), naive_one);
    }
    set_workers(0);
    CHECK(worker_count() >= 1);
}
