#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <ncw/states.hpp>
#include <ncw/tight_photocount.hpp>

#include <cmath>
#include <vector>

using namespace ncw;
using geom::Vector;

namespace {

Vector vec3(double a, double b, double c) {
    Vector v(3);
    v << a, b, c;
    return v;
}

// Plain 3-D cross product written out, independent of geometry.hpp.
Vector cross3(const Vector& a, const Vector& b) {
    return vec3(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]);
}

bool parallel(const Vector& a, const Vector& b, double tol = 1e-10) {
    const Vector ua = a / a.norm(), ub = b / b.norm();
    return (ua - ub).norm() <= tol || (ua + ub).norm() <= tol;
}

}  // namespace

TEST_CASE("sup_over_curve finds analytic maxima") {
    auto grid = tight::make_curve_grid(det::click(2));
    Vector lam(2);
    lam << 0.0, 1.0;  // Pi(t).lam = 2t(1-t), max 1/2 at t = 1/2
    auto [sup, ts] = tight::sup_over_curve(grid, lam);
    CHECK(sup == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ts == doctest::Approx(0.5).epsilon(1e-9));

    lam << 1.0, 0.0;  // t^2, max 1 at t = 1
    std::tie(sup, ts) = tight::sup_over_curve(grid, lam);
    CHECK(sup == doctest::Approx(1.0));
    CHECK(ts == doctest::Approx(1.0));
}

TEST_CASE("N=2 tangent family") {
    for (auto dm : {det::click(2), det::pnr(2)}) {
        for (double t : {0.2, 0.5, 0.8}) {
            auto tf = tight::lambda_n2(dm, t);
            CHECK(tf.lambda.norm() == doctest::Approx(1.0).epsilon(1e-12));
            // tangency: orthogonal to the curve velocity at the node
            CHECK(std::abs(det::q_vector_deriv(dm, t, 1).dot(tf.lambda)) <= 1e-12);
            // supporting: rhs is the global supremum
            auto grid = tight::make_curve_grid(dm, 4001);
            auto [sup, ts] = tight::sup_over_curve(grid, tf.lambda);
            (void)ts;
            CHECK(sup - tf.rhs <= 1e-9);
        }
    }
    // click tangent direction in closed form: normal to (2t, 2-4t)
    auto tf = tight::lambda_n2(det::click(2), 0.3);
    Vector expect(2);
    expect << -(2 - 4 * 0.3), 2 * 0.3;
    CHECK(parallel(tf.lambda, expect, 1e-12));
    CHECK(tight::lambda_down()[0] == 0.0);
    CHECK(tight::lambda_down()[1] == -1.0);
}

TEST_CASE("N=2 nonlinear margins") {
    SUBCASE("coherent states sit exactly on the boundary") {
        for (double a0 : {0.3, 0.9, 1.6}) {
            const auto Pc = states::photocount_dist(states::coherent(a0), det::click(2));
            CHECK(std::abs(tight::nonlinear_n2(Pc, det::click(2)).value) <= 1e-12);
            const auto Pp = states::photocount_dist(states::coherent(a0), det::pnr(2));
            CHECK(std::abs(tight::nonlinear_n2(Pp, det::pnr(2)).value) <= 1e-12);
        }
    }
    SUBCASE("lossy Fock states: click margin in closed form") {
        for (int n : {1, 2, 3}) {
            for (double eta : {0.3, 0.7, 0.95}) {
                const auto P = states::photocount_dist(states::fock_with_loss(n, eta),
                                                       det::click(2));
                const double expect =
                    4.0 * (std::pow(1.0 - eta / 2.0, 2 * n) - std::pow(1.0 - eta, n));
                CHECK(tight::nonlinear_n2(P, det::click(2)).value ==
                      doctest::Approx(expect).epsilon(1e-11));
                CHECK(expect > 0.0);
            }
        }
    }
    SUBCASE("lossy Fock states: PNR margin in closed form") {
        for (int n : {1, 2}) {
            for (double eta : {0.4, 0.7}) {
                const auto P = states::photocount_dist(states::fock_with_loss(n, eta),
                                                       det::pnr(2));
                const double p0 = std::pow(1.0 - eta, n);
                const double p1 = n * eta * std::pow(1.0 - eta, n - 1);
                CHECK(tight::nonlinear_n2(P, det::pnr(2)).value ==
                      doctest::Approx(p1 + p0 * std::log(p0)).epsilon(1e-11));
            }
        }
    }
    SUBCASE("degenerate P(0) = 0") {
        Eigen::VectorXd P(3);
        P << 0.0, 0.4, 0.6;
        auto m = tight::nonlinear_n2(P, det::pnr(2));
        CHECK(m.degenerate);
        CHECK(m.value == doctest::Approx(0.4));
    }
}

TEST_CASE("N=3 test function directions") {
    SUBCASE("PNR tau=0 closed form (u^2/2, -u, 1)") {
        auto grid = tight::make_curve_grid(det::pnr(3), 4001);
        for (double t1 : {0.4, 0.7}) {
            auto tf = tight::lambda_n3(det::pnr(3), t1, 0.0, grid);
            const double u = -3.0 * std::log(t1);
            CHECK(parallel(tf.lambda, vec3(u * u / 2.0, -u, 1.0), 1e-9));
        }
    }
    SUBCASE("click tau=1 closed form (3t^2, 2t^2+2t-1, t(t+2))") {
        auto grid = tight::make_curve_grid(det::click(3), 4001);
        for (double t1 : {0.3, 0.6}) {
            auto tf = tight::lambda_n3(det::click(3), t1, 1.0, grid);
            CHECK(parallel(tf.lambda,
                           vec3(3 * t1 * t1, 2 * t1 * t1 + 2 * t1 - 1, t1 * (t1 + 2)), 1e-9));
        }
    }
    SUBCASE("matches a hand-written cross product") {
        for (auto dm : {det::click(3), det::pnr(3)}) {
            auto grid = tight::make_curve_grid(dm, 4001);
            for (double tau : {0.0, 1.0}) {
                for (double t1 : {0.35, 0.65}) {
                    auto tf = tight::lambda_n3(dm, t1, tau, grid);
                    const Vector raw = cross3(det::q_vector(dm, t1) - det::q_vector(dm, tau),
                                              det::q_vector_deriv(dm, t1, 1));
                    CHECK(parallel(tf.lambda, raw, 1e-10));
                    // tangency and equal-value conditions at the node
                    CHECK(std::abs(det::q_vector_deriv(dm, t1, 1).dot(tf.lambda)) <= 1e-10);
                    CHECK(det::q_vector(dm, t1).dot(tf.lambda) ==
                          doctest::Approx(tf.rhs).epsilon(1e-10));
                }
            }
        }
    }
}

TEST_CASE("N=3 nonlinear margins") {
    SUBCASE("coherent states are on the boundary of all four forms") {
        for (auto dm : {det::click(3), det::pnr(3)}) {
            for (double a0 : {0.4, 1.0, 1.8}) {
                const auto P = states::photocount_dist(states::coherent(a0), dm);
                auto [m0, m1] = tight::nonlinear_n3(P, dm);
                CHECK(std::abs(m0.value) <= 1e-12);
                CHECK(std::abs(m1.value) <= 1e-12);
            }
        }
    }
    SUBCASE("two-photon state with loss, PNR") {
        const auto P = states::photocount_dist(states::fock_with_loss(2, 0.7), det::pnr(3));
        auto [m0, m1] = tight::nonlinear_n3(P, det::pnr(3));
        // P = (0.09, 0.42, 0.49, 0): discriminant margin 0.42^2 - 2*0.09*0.49
        CHECK(m0.value == doctest::Approx(0.0882).epsilon(1e-10));
        CHECK(m0.value > 0.0);
        (void)m1;
    }
    SUBCASE("sign agreement with the linear family scan, tau=0") {
        // nonlinear tau=0 margin positive iff some linear test function flags it
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto dm : {det::click(3), det::pnr(3)}) {
            auto grid = tight::make_curve_grid(dm, 4001);
            int checked = 0;
            for (int trial = 0; trial < 60; ++trial) {
                Eigen::VectorXd P(4);
                double a = u(rng), b = u(rng), c = u(rng);
                double lo = std::min({a, b, c}), mid = a + b + c - std::min({a, b, c}) -
                                                        std::max({a, b, c});
                double hi = std::max({a, b, c});
                P << lo, mid - lo, hi - mid, 1.0 - hi;
                const double nl = tight::nonlinear_n3(P, dm).first.value;
                double best = -1e300;
                for (int i = 1; i < 200; ++i) {
                    const double t1 = i / 200.0;
                    try {
                        auto tf = tight::lambda_n3(dm, t1, 0.0, grid);
                        best = std::max(best, P.head(3).dot(tf.lambda) - tf.rhs);
                    } catch (const tight::degeneracy_error&) {
                    }
                }
                if (std::abs(nl) > 1e-7 && std::abs(best) > 1e-7) {
                    CHECK((nl > 0) == (best > 0));
                    ++checked;
                }
            }
            CHECK(checked > 30);
        }
    }
}

TEST_CASE("odd-N construction") {
    SUBCASE("m=1 reduces to the N=3 family") {
        for (auto dm : {det::click(3), det::pnr(3)}) {
            auto grid = tight::make_curve_grid(dm, 4001);
            for (double tau : {0.0, 1.0}) {
                auto a = tight::lambda_n3(dm, 0.45, tau, grid);
                auto b = tight::lambda_odd(dm, {0.45}, tau, grid);
                CHECK((a.lambda - b.lambda).norm() <= 1e-12);
                CHECK(a.rhs == doctest::Approx(b.rhs));
            }
        }
    }
    SUBCASE("N=5 equal-value and tangency conditions") {
        auto dm = det::click(5);
        auto grid = tight::make_curve_grid(dm, 4001);
        const std::vector<double> nodes = {0.3, 0.7};
        for (double tau : {0.0, 1.0}) {
            auto tf = tight::lambda_odd(dm, nodes, tau, grid);
            CHECK(tf.lambda.norm() == doctest::Approx(1.0).epsilon(1e-12));
            for (double t : nodes) {
                CHECK(det::q_vector(dm, t).dot(tf.lambda) ==
                      doctest::Approx(tf.rhs).epsilon(1e-9));
                CHECK(std::abs(det::q_vector_deriv(dm, t, 1).dot(tf.lambda)) <= 1e-9);
            }
            auto [sup, ts] = tight::sup_over_curve(grid, tf.lambda);
            (void)ts;
            CHECK(sup - tf.rhs <= 1e-9);
        }
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(tight::lambda_odd(det::click(5), {0.7, 0.3}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(tight::lambda_odd(det::click(5), {0.3}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(tight::lambda_n3(det::click(3), 0.4, 0.5), std::invalid_argument);
    }
}

TEST_CASE("critical-point structure of the odd-N test functions") {
    for (auto dm : {det::click(5), det::pnr(5)}) {
        auto grid = tight::make_curve_grid(dm, 4001);
        auto tf = tight::lambda_odd(dm, {0.3, 0.7}, 0.0, grid);
        auto rep = tight::verify_statement2(dm, tf);
        CHECK(rep.extra_critical_points == 2);
        CHECK(rep.second_deriv_zeros == 3);
        CHECK(rep.interlaced);
        CHECK(rep.global_max_at_nodes);
    }
}

TEST_CASE("violation maximization over nodes") {
    SUBCASE("classical statistics never violate") {
        const auto P = states::photocount_dist(states::coherent(1.1), det::click(3));
        auto rep = tight::max_violation(P, det::click(3), 1);
        CHECK(rep.margin <= 1e-9);
    }
    SUBCASE("lossy single photon violates, m=1") {
        const auto P = states::photocount_dist(states::fock_with_loss(1, 0.8), det::click(3));
        auto rep = tight::max_violation(P, det::click(3), 1);
        CHECK(rep.margin > 1e-4);
        REQUIRE(rep.nodes.size() == 1);
        CHECK(rep.nodes[0] > 0.0);
        CHECK(rep.nodes[0] < 1.0);
        // reported maximum is at least what the tight family gives pointwise
        auto grid = tight::make_curve_grid(det::click(3), 4001);
        double scan = -1e300;
        for (int i = 1; i < 100; ++i) {
            try {
                auto tf = tight::lambda_n3(det::click(3), i / 100.0, rep.tau, grid);
                scan = std::max(scan, P.head(3).dot(tf.lambda) - tf.rhs);
            } catch (const tight::degeneracy_error&) {
            }
        }
        CHECK(rep.margin >= scan - 1e-8);
    }
    SUBCASE("lossy single photon violates, m=2") {
        const auto P = states::photocount_dist(states::fock_with_loss(1, 0.8), det::click(5));
        auto rep = tight::max_violation(P, det::click(5), 2, 2);
        CHECK(rep.margin > 1e-5);
        REQUIRE(rep.nodes.size() == 2);
        CHECK(rep.nodes[0] < rep.nodes[1]);
    }
}
