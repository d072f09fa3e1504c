#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cqosc/model.hpp"

using namespace cqosc;
using namespace cqosc::model;

namespace {

OscillatorConfig config(double wc, double wq, double a, double d2,
                        ActionConvention c = ActionConvention::Saturated) {
    OscillatorConfig cfg;
    cfg.omega_c = wc;
    cfg.omega_q = wq;
    cfg.alpha = a;
    cfg.d2 = d2;
    cfg.action_convention = c;
    return cfg;
}

Path random_path(const TimeGrid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    std::vector<double> v(g.n());
    for (double& x : v) x = n01(rng);
    return Path(g, v);
}

// Trapezoid rule written out independently of model::integrate.
double trapezoid(const TimeGrid& g, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k) s += 0.5 * (f[k] + f[k + 1]) * g.dt();
    return s;
}

}  // namespace

TEST_CASE("config invariants") {
    auto cfg = config(1.0, 2.0, 0.3, 2.5);
    CHECK(cfg.d0() == doctest::Approx(0.1));
    cfg.d2 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.d2 = 1.0;
    cfg.omega_c = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(action_convention_from_string(to_string(ActionConvention::DecoherenceDiffusion)) ==
          ActionConvention::DecoherenceDiffusion);
}

TEST_CASE("time grid") {
    const TimeGrid g(1.0, 3.0, 5);
    CHECK(g.dt() == 0.5);
    CHECK(g.time(4) == 3.0);
    try {
        TimeGrid bad(0.0, 1.0, 3);
        FAIL("expected GridTooSmall");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GridTooSmall);
    }
    CHECK_THROWS_AS(TimeGrid(1.0, 1.0, 10), Error);
}

TEST_CASE("second derivative") {
    SUBCASE("constant path gives zero") {
        const TimeGrid g(0.0, 2.0, 11);
        const Path d = second_derivative(Path::sample(g, [](double) { return 3.7; }));
        for (std::size_t k = 0; k < g.n(); ++k) CHECK(std::abs(d[k]) < 1e-12);
    }
    SUBCASE("exact for quadratics") {
        const TimeGrid g(-1.0, 2.0, 31);
        const Path d = second_derivative(Path::sample(g, [](double t) { return t * t; }));
        for (std::size_t k = 0; k < g.n(); ++k) CHECK(d[k] == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("sine converges to -sin") {
        const TimeGrid g(0.0, 2.0, 2001);
        const Path d = second_derivative(Path::sample(g, [](double t) { return std::sin(t); }));
        double worst = 0.0;
        for (std::size_t k = 1; k + 1 < g.n(); ++k) worst = std::max(worst, std::abs(d[k] + std::sin(g.time(k))));
        CHECK(worst < 1e-5);
    }
    SUBCASE("boundary stencil is second order") {
        double prev = 0.0;
        for (std::size_t n : {101, 201, 401}) {
            const TimeGrid g(0.0, 1.0, n);
            const Path d = second_derivative(Path::sample(g, [](double t) { return std::exp(t); }));
            const double err = std::abs(d[0] - 1.0);
            if (prev > 0.0) CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.1));
            prev = err;
        }
    }
}

TEST_CASE("action: trivial cases") {
    const TimeGrid g(0.0, 3.0, 301);
    const auto cfg = config(1.3, 0.7, 0.4, 2.0);
    const Path zero = Path::zeros(g);

    SUBCASE("zero paths") {
        for (auto c : {ActionConvention::Saturated, ActionConvention::DecoherenceDiffusion}) {
            auto cc = cfg;
            cc.action_convention = c;
            const auto w = evaluate_action(HybridPaths(zero, zero, zero), cc);
            CHECK(w.log_magnitude == 0.0);
            CHECK(w.phase == 0.0);
        }
    }
    SUBCASE("on-shell classical path with zero quantum branches") {
        double prev = 1.0;
        for (std::size_t n : {201, 401, 801}) {
            const TimeGrid gg(0.0, 3.0, n);
            const Path q = Path::sample(gg, [&](double t) { return std::cos(cfg.omega_c * t); });
            const Path z = Path::zeros(gg);
            const auto w = evaluate_action(HybridPaths(q, z, z), cfg);
            CHECK(w.phase == 0.0);
            CHECK(std::abs(w.log_magnitude) < prev);
            prev = std::abs(w.log_magnitude);
        }
        CHECK(prev < 1e-4);
    }
    SUBCASE("constant equation-of-motion defect") {
        // q = c / wc^2 gives q'' + wc^2 q = c everywhere.
        const double c = 0.8;
        const Path q = Path::sample(g, [&](double) { return c / (cfg.omega_c * cfg.omega_c); });
        const auto w = evaluate_action(HybridPaths(q, zero, zero), cfg);
        CHECK(w.log_magnitude == doctest::Approx(-c * c * g.duration() / (2.0 * cfg.d2)).epsilon(1e-12));
    }
}

TEST_CASE("action: conventions agree on the unitary and linear pieces") {
    std::mt19937_64 rng(42);
    const TimeGrid g(0.0, 2.0, 64);
    for (int trial = 0; trial < 20; ++trial) {
        const HybridPaths p(random_path(g, rng), random_path(g, rng), random_path(g, rng));
        const auto sat = evaluate_action(p, config(0.9, 1.4, 0.35, 0.8, ActionConvention::Saturated));
        const auto dd = evaluate_action(p, config(0.9, 1.4, 0.35, 0.8, ActionConvention::DecoherenceDiffusion));
        CHECK(sat.phase == dd.phase);
        // The conventions differ only in the a^2 (Q+^2 + Q-^2) coefficient:
        // DD - Sat = -(a^2 / (8 D2)) int (Q+^2 + Q-^2).
        std::vector<double> sq(g.n());
        for (std::size_t k = 0; k < g.n(); ++k) {
            sq[k] = p.q_plus[k] * p.q_plus[k] + p.q_minus[k] * p.q_minus[k];
            const double d = p.q_plus[k] - p.q_minus[k], s = p.q_plus[k] + p.q_minus[k];
            CHECK(d * d + s * s == doctest::Approx(2.0 * sq[k]).epsilon(1e-14));
        }
        const double expected = -(0.35 * 0.35) / (8.0 * 0.8) * trapezoid(g, sq);
        // Random paths have a huge (L q)^2 term, so the difference carries its roundoff.
        const double scale = std::abs(sat.log_magnitude) + std::abs(dd.log_magnitude);
        CHECK(std::abs(dd.log_magnitude - sat.log_magnitude - expected) < 1e-14 * scale + 1e-12);
    }
}

TEST_CASE("action: phase matches a hand-written Lagrangian") {
    const TimeGrid g(0.0, 1.0, 1001);
    const auto cfg = config(1.0, 2.0, 0.5, 1.0);
    const Path q = Path::sample(g, [](double t) { return t; });
    const Path qp = Path::sample(g, [](double t) { return std::sin(t); });
    const Path z = Path::zeros(g);
    // int_0^1 [1/2 cos^2 - 2 sin^2 - 0.5 t sin t] dt in closed form.
    const double kin = 0.5 * (0.5 + std::sin(2.0) / 4.0);
    const double pot = -2.0 * (0.5 - std::sin(2.0) / 4.0);
    const double lin = -0.5 * (std::sin(1.0) - std::cos(1.0));
    const auto w = evaluate_action(HybridPaths(q, qp, z), cfg);
    CHECK(w.phase == doctest::Approx(kin + pot + lin).epsilon(1e-6));
}

TEST_CASE("action: additivity under concatenation up to O(dt)") {
    const auto cfg = config(1.1, 0.6, 0.3, 1.5);
    auto split_gap = [&](std::size_t n) {
        auto make = [&](double a, double b, std::size_t m) {
            const TimeGrid g(a, b, m);
            return HybridPaths(Path::sample(g, [](double t) { return std::sin(2.0 * t) + 0.3 * t; }),
                               Path::sample(g, [](double t) { return std::cos(t); }),
                               Path::sample(g, [](double t) { return 0.5 * t * t; }));
        };
        const auto whole = evaluate_action(make(0.0, 2.0, 2 * n - 1), cfg);
        const auto left = evaluate_action(make(0.0, 1.0, n), cfg);
        const auto right = evaluate_action(make(1.0, 2.0, n), cfg);
        CHECK(std::abs(whole.phase - left.phase - right.phase) < 1e-12 * (1.0 + std::abs(whole.phase)));
        return std::abs(whole.log_magnitude - left.log_magnitude - right.log_magnitude);
    };
    const double coarse = split_gap(101);
    const double fine = split_gap(201);
    CHECK(fine < coarse);
    CHECK(fine < 1e-2);
}

TEST_CASE("decoherence weight") {
    const TimeGrid g(0.0, std::numbers::pi / 2.0, 4001);
    const auto cfg = config(1.0, 1.0, 0.6, 2.0);
    CHECK(decoherence_weight(Path::zeros(g), cfg) == 0.0);

    // Boundary-pinned sin(wQ t)/sin(wQ t_f) with dQ_i = 0, dQ_f = 1, wQ = 1.
    const Path dq = Path::sample(g, [](double t) { return std::sin(t); });
    const double expected = -(0.36 / 16.0) * (std::numbers::pi / 4.0);
    CHECK(decoherence_weight(dq, cfg) == doctest::Approx(expected).epsilon(1e-7));

    std::mt19937_64 rng(7);
    for (int k = 0; k < 10; ++k) {
        const Path a = random_path(g, rng), b = random_path(g, rng);
        const double lam = 0.1 + k;
        CHECK(decoherence_weight(a * lam, cfg) == doctest::Approx(lam * lam * decoherence_weight(a, cfg)).epsilon(1e-12));
        const double lhs = decoherence_weight(a + b, cfg) + decoherence_weight(a - b, cfg);
        const double rhs = 2.0 * decoherence_weight(a, cfg) + 2.0 * decoherence_weight(b, cfg);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        CHECK(decoherence_weight(a, cfg) <= 0.0);
    }
}

TEST_CASE("paths and CSV") {
    const TimeGrid g(0.25, 1.75, 7);
    const Path p = Path::sample(g, [](double t) { return std::exp(t) / 3.0; });
    const std::string csv = path_to_csv(p);
    CHECK(csv.rfind("t,value\n", 0) == 0);
    const Path back = path_from_csv(csv);
    CHECK(back.grid() == g);
    for (std::size_t k = 0; k < g.n(); ++k) CHECK(back[k] == p[k]);

    CHECK_THROWS_AS(Path(g, std::vector<double>(3, 0.0)), Error);
    CHECK_THROWS_AS(Path(g, std::vector<double>(7, NAN)), Error);
    const Path other = Path::zeros(TimeGrid(0.0, 1.0, 7));
    try {
        (void)(p + other);
        FAIL("expected GridMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GridMismatch);
    }
}
