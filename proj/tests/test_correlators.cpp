#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cqosc/correlators.hpp"

using namespace cqosc;
using namespace cqosc::correlators;
using lattice::Species;

namespace {

constexpr double kPi = std::numbers::pi;

OscillatorConfig config(double wc, double wq, double a, double d2) {
    OscillatorConfig cfg;
    cfg.omega_c = wc;
    cfg.omega_q = wq;
    cfg.alpha = a;
    cfg.d2 = d2;
    return cfg;
}

QuadratureSpec with_eta(double eta) {
    QuadratureSpec spec;
    spec.eta = eta;
    return spec;
}

}  // namespace

TEST_CASE("quantum propagators: residue forms") {
    SUBCASE("weak-coupling limit at tau = 0") {
        const auto cfg = config(1.0, 1.0, 1e-6, 1.0);
        CHECK(std::abs(free_quantum_plus(0.0, cfg).value - cplx(-kPi, 0.0)) < 1e-9);
        CHECK(std::abs(free_quantum_minus(0.0, cfg).value - cplx(-kPi, 0.0)) < 1e-9);
    }
    SUBCASE("independent implementations are conjugate") {
        const auto cfg = config(1.0, 1.3, 0.4, 0.7);
        double worst = 0.0;
        for (int k = -200; k <= 200; ++k) {
            const double tau = 0.05 * k;
            const cplx p = free_quantum_plus(tau, cfg).value, m = free_quantum_minus(tau, cfg).value;
            worst = std::max(worst, std::abs(m - std::conj(p)));
            CHECK(std::abs(m) == doctest::Approx(std::abs(p)).epsilon(1e-14));
        }
        CHECK(worst < 1e-10);
    }
    SUBCASE("decay in |tau|") {
        const auto cfg = config(1.0, 0.8, 0.5, 1.0);
        double prev = INFINITY;
        for (int k = 0; k <= 400; ++k) {
            const double mag = std::abs(free_quantum_plus(0.05 * k, cfg).value);
            CHECK(mag <= prev);
            prev = mag;
        }
    }
    SUBCASE("solves the damped oscillator equation away from tau = 0") {
        // (d^2 + wQ^2 - i eps) F'+ = 0 for tau != 0.
        const auto cfg = config(1.0, 1.2, 0.6, 0.9);
        const double eps = pole_shift(cfg), h = 1e-3, tau = 0.7;
        auto f = [&](double t) { return free_quantum_plus(t, cfg).value; };
        const cplx d2 = (f(tau + h) - 2.0 * f(tau) + f(tau - h)) / (h * h);
        const cplx lhs = d2 + cplx(1.44, -eps) * f(tau);
        CHECK(std::abs(lhs) < 1e-5 * std::abs(f(tau)));
        // Jump of the derivative at 0 is the -i * (-2 pi) source strength.
        const cplx jump = (f(h) - f(0.0)) / h - (f(0.0) - f(-h)) / h;
        CHECK(std::abs(jump - cplx(0.0, 2.0 * kPi)) < 1e-2);
    }
}

TEST_CASE("quantum propagators: quadrature agrees with residues") {
    const auto cfg = config(1.0, 1.0, 0.4, 0.5);
    QuadratureSpec spec;
    spec.p_max = 800.0;
    for (double tau : {0.0, 0.5, 2.0, -3.0}) {
        const auto qp = free_quantum_plus(tau, cfg, spec);
        const auto rp = free_quantum_plus(tau, cfg);
        CHECK(qp.method == Method::Quadrature);
        CHECK(std::abs(qp.value - rp.value) <= qp.accuracy_estimate + rp.accuracy_estimate);
        CHECK(std::abs(qp.value - rp.value) < 1e-6 * std::abs(rp.value));
        const auto qm = free_quantum_minus(tau, cfg, spec);
        const auto rm = free_quantum_minus(tau, cfg);
        CHECK(std::abs(qm.value - rm.value) <= qm.accuracy_estimate + rm.accuracy_estimate);
    }
    SUBCASE("refinement stays within the reported accuracy") {
        QuadratureSpec fine = spec;
        fine.p_max *= 2.0;
        fine.n_points *= 2;
        const auto a = free_quantum_plus(1.0, cfg, spec), b = free_quantum_plus(1.0, cfg, fine);
        CHECK(std::abs(a.value - b.value) < a.accuracy_estimate);
    }
    SUBCASE("cutoff guard") {
        QuadratureSpec coarse;
        coarse.p_max = 2.0;
        try {
            free_quantum_plus(0.0, cfg, coarse);
            FAIL("expected CutoffTooSmall");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::CutoffTooSmall);
        }
    }
}

TEST_CASE("classical propagator") {
    const auto cfg = config(1.0, 1.0, 0.0, 1.0);
    SUBCASE("partial fractions agree with quadrature") {
        const auto spec = with_eta(1e-4);
        const auto r = free_classical(0.0, cfg, spec, Method::Residue);
        const auto q = free_classical(0.0, cfg, spec, Method::Quadrature);
        CHECK(std::abs(r.value - q.value) < 1e-6 * std::abs(r.value));
        for (double tau : {0.3, 2.5, 7.0}) {
            const auto s = with_eta(0.3);
            const auto rr = free_classical(tau, cfg, s, Method::Residue);
            const auto qq = free_classical(tau, cfg, s, Method::Quadrature);
            CHECK(std::abs(rr.value - qq.value) <= rr.accuracy_estimate + qq.accuracy_estimate);
        }
    }
    SUBCASE("even in tau") {
        const auto spec = with_eta(0.01);
        for (double tau : {0.1, 1.0, 3.3, 10.0}) {
            CHECK(free_classical(tau, cfg, spec).value == free_classical(-tau, cfg, spec).value);
        }
    }
    SUBCASE("derivatives of the kernel") {
        const double eta = 0.2;
        const ClassicalKernel k(config(1.3, 1.0, 0.0, 2.0), eta);
        const double h = 1e-3;
        for (double tau : {0.4, 1.5, -2.0}) {
            const cplx fd2 = (k.value(tau + h) - 2.0 * k.value(tau) + k.value(tau - h)) / (h * h);
            CHECK(std::abs(fd2 - k.second(tau)) < 1e-5 * std::abs(k.second(tau)) + 1e-7);
            const cplx fd4 = (k.second(tau + h) - 2.0 * k.second(tau) + k.second(tau - h)) / (h * h);
            CHECK(std::abs(fd4 - k.fourth(tau)) < 1e-5 * std::abs(k.fourth(tau)) + 1e-7);
            // (d^2 + wc^2)^2 A = -i eta A away from tau = 0.
            const double w2 = 1.69;
            const cplx l2 = k.fourth(tau) + 2.0 * w2 * k.second(tau) + w2 * w2 * k.value(tau);
            CHECK(std::abs(l2 + cplx(0.0, eta) * k.value(tau)) < 1e-10 * std::abs(k.value(tau)));
        }
        // A' is continuous through 0 while A''' jumps by the contact weight.
        const cplx jump3 = (k.second(h) - k.second(0.0)) / h - (k.second(0.0) - k.second(-h)) / h;
        CHECK(std::abs(jump3 - k.delta_weight()) < 1e-2 * k.delta_weight());
        const cplx jump1 = (k.value(h) - k.value(0.0)) / h - (k.value(0.0) - k.value(-h)) / h;
        // One-sided differences leave h A''(0) plus h^2 (jump of A''') / 6.
        CHECK(std::abs(jump1 - h * k.second(0.0)) < h * h * std::abs(k.delta_weight()) / 3.0);
    }
    SUBCASE("eta limit of sqrt(eta) A is stable and monotone") {
        double prev_gap = INFINITY;
        for (double eta = 1e-2; eta > 1e-7; eta /= 4.0) {
            const cplx a = std::sqrt(eta) * free_classical(0.5, cfg, with_eta(eta)).value;
            const cplx b = std::sqrt(eta / 2.0) * free_classical(0.5, cfg, with_eta(eta / 2.0)).value;
            const double gap = std::abs(a - b);
            CHECK(gap < 5.0 * std::sqrt(eta));
            CHECK(gap <= prev_gap);
            prev_gap = gap;
        }
        const auto v = free_classical(0.5, cfg, with_eta(1e-3));
        REQUIRE(v.eta_sensitivity);
        CHECK(*v.eta_sensitivity > 0.0);
    }
    SUBCASE("guards") {
        try {
            free_classical(0.0, cfg, with_eta(1e-15));
            FAIL("expected EtaUnderflow");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EtaUnderflow);
        }
        QuadratureSpec bad = with_eta(0.1);
        bad.n_points = 10;
        CHECK_THROWS_AS(free_classical(0.0, cfg, bad), Error);
        CHECK(default_eta(config(2.0, 1.0, 0.0, 1.0)) == doctest::Approx(16e-6));
    }
}

TEST_CASE("corrected correlators: structural properties") {
    const auto cfg = config(1.0, 1.5, 0.1, 1.0);
    auto spec = with_eta(1.0);
    const TimeGrid window(0.0, 40.0, 401);

    SUBCASE("alpha = 0 gives the free propagators") {
        const auto free_cfg = config(1.0, 1.5, 0.0, 1.0);
        CHECK(corrected_qq(18.0, 21.0, free_cfg, window, spec).value == free_classical(-3.0, free_cfg, spec).value);
        CHECK(corrected_QQ_plus(18.0, 21.0, free_cfg, window, spec).value == free_quantum_plus(-3.0, free_cfg).value);
    }
    SUBCASE("s <-> t symmetry") {
        const cplx a = corrected_qq(17.0, 22.5, cfg, window, spec).value;
        const cplx b = corrected_qq(22.5, 17.0, cfg, window, spec).value;
        CHECK(std::abs(a - b) < 1e-12 * std::abs(a));
        const cplx c = corrected_QQ_plus(17.0, 22.5, cfg, window, spec).value;
        const cplx d = corrected_QQ_plus(22.5, 17.0, cfg, window, spec).value;
        CHECK(std::abs(c - d) < 1e-12 * std::abs(c));
    }
    SUBCASE("ket correlator by conjugation") {
        const auto p = corrected_QQ_plus(19.0, 20.0, cfg, window, spec);
        const auto m = corrected_QQ_minus(19.0, 20.0, cfg, window, spec);
        CHECK(m.value == std::conj(p.value));
    }
    SUBCASE("stationarity") {
        const TimeGrid shifted(5.0, 45.0, 401);
        const cplx a = corrected_qq(18.0, 20.0, cfg, window, spec).value;
        const cplx b = corrected_qq(23.0, 25.0, cfg, shifted, spec).value;
        CHECK(std::abs(a - b) < 1e-10 * std::abs(a));
    }
    SUBCASE("window guards") {
        CHECK_THROWS_AS(corrected_qq(-1.0, 20.0, cfg, window, spec), Error);
        const TimeGrid tiny(19.0, 21.0, 21);
        try {
            corrected_QQ_plus(19.5, 20.5, config(1.0, 1.5, 0.5, 1.0), tiny, spec);
            FAIL("expected WindowTooSmall");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::WindowTooSmall);
        }
    }
}

TEST_CASE("corrected correlators against the exact lattice moments") {
    SUBCASE("<q q> at a = 0.05, D2 = 10") {
        const auto cfg = config(1.0, 2.0, 0.05, 10.0);
        const auto spec = with_eta(1.0);
        const TimeGrid g(0.0, 200.0, 2001);
        lattice::AssembleOptions opts;
        opts.eta = 1.0;
        const auto sys = lattice::LatticeSystem::assemble(cfg, g, opts);
        const std::size_t s = 1000, t = 1012;
        const cplx exact = lattice::moment(sys, {Species::Classical, s}, {Species::Classical, t}) /
                           lattice::species_normalization(Species::Classical);
        const cplx pert = corrected_qq(g.time(s), g.time(t), cfg, TimeGrid(60.0, 140.0, 801), spec).value;
        CHECK(std::abs(exact - pert) < 1e-2 * std::abs(exact));
    }
    SUBCASE("<Q+ Q+> at a = 0.05") {
        const auto cfg = config(1.0, 1.0, 0.05, 0.05);
        auto spec = with_eta(1.0);
        spec.check_window = false;
        const TimeGrid g(0.0, 3000.0, 30001);
        lattice::AssembleOptions opts;
        opts.eta = 1.0;
        const auto sys = lattice::LatticeSystem::assemble(cfg, g, opts);
        const std::size_t s = 15000, t = 15010;
        const cplx exact = lattice::moment(sys, {Species::Plus, s}, {Species::Plus, t}) /
                           lattice::species_normalization(Species::Plus);
        const cplx free = free_quantum_plus(g.time(s) - g.time(t), cfg).value;
        const cplx pert = corrected_QQ_plus(g.time(s), g.time(t), cfg, TimeGrid(1000.0, 2000.0, 10001), spec).value;
        CHECK(std::abs(exact - pert) < 1e-2 * std::abs(exact));
        // The correction itself is resolved: lattice and continuum shifts agree,
        // which removes the O(dt^2) error of the free lattice propagator.
        auto free_opts = opts;
        free_opts.include_interaction = false;
        const cplx lattice_free = lattice::moment(lattice::LatticeSystem::assemble(cfg, g, free_opts),
                                                  {Species::Plus, s}, {Species::Plus, t}) /
                                  lattice::species_normalization(Species::Plus);
        CHECK(std::abs((exact - lattice_free) - (pert - free)) < 0.2 * std::abs(pert - free));
    }
}

TEST_CASE("second-order corrections with lattice kernels: residual is O(a^4)") {
    // A short window keeps lattice modes of the Q+ block away from w_Q; near such
    // a mode the free propagator grows like 1/eps ~ 1/a^2 and the series stalls.
    const TimeGrid g(0.0, 20.0, 201);
    lattice::AssembleOptions opts;
    opts.eta = 1.0;
    const std::size_t s = 100, t = 110;
    for (Species sp : {Species::Classical, Species::Plus}) {
        std::vector<double> res;
        for (double a : {0.2, 0.1, 0.05}) {
            const auto cfg = config(1.0, 2.0, a, 1.0);
            const auto full = lattice::LatticeSystem::assemble(cfg, g, opts);
            auto free_opts = opts;
            free_opts.include_interaction = false;
            const auto free = lattice::LatticeSystem::assemble(cfg, g, free_opts);
            const cplx order2 = lattice_order2_correction(sp, s, t, cfg, g, opts);
            res.push_back(std::abs(lattice::moment(full, {sp, s}, {sp, t}) - lattice::moment(free, {sp, s}, {sp, t}) - order2));
        }
        const double slope = std::log(res[0] / res[2]) / std::log(4.0);
        CHECK(slope == doctest::Approx(4.0).epsilon(0.125));
    }
}

TEST_CASE("vertex factor") {
    const auto cfg = config(1.4, 1.0, 0.3, 2.0);
    const auto plus = vertex_factor(Branch::Plus, cfg);
    const auto minus = vertex_factor(Branch::Minus, cfg);
    CHECK(plus.scalar.real() == minus.scalar.real());
    CHECK(plus.scalar.imag() == -minus.scalar.imag());
    CHECK(plus.derivative == minus.derivative);
    CHECK(plus.scalar == cplx(-0.3 * 1.96 / 2.0, -0.3));
    SUBCASE("annihilates on-shell classical paths up to the imaginary part") {
        const TimeGrid g(0.0, 3.0, 3001);
        const model::Path q = model::Path::sample(g, [](double t) { return std::cos(1.4 * t); });
        const auto v = plus.apply(q);
        for (std::size_t k = 1; k + 1 < g.n(); ++k) {
            CHECK(std::abs(v[k] - cplx(0.0, -0.3) * q[k]) < 1e-6);
        }
    }
    SUBCASE("quadratic path") {
        const TimeGrid g(-1.0, 1.0, 21);
        const model::Path q = model::Path::sample(g, [](double t) { return t * t; });
        for (const auto& vf : {plus, minus}) {
            const double sign = vf.branch == Branch::Plus ? 1.0 : -1.0;
            const auto v = vf.apply(q);
            for (std::size_t k = 0; k < g.n(); ++k) {
                const double t = g.time(k);
                const cplx expected = -0.3 * cplx((2.0 + 1.96 * t * t) / 2.0, sign * t * t);
                CHECK(std::abs(v[k] - expected) < 1e-9);
            }
        }
    }
}

TEST_CASE("scan CSV") {
    std::vector<ScanPoint> scan{{0.5, {cplx(1.0, -2.0), Method::Quadrature, 1e-9, std::nullopt}}};
    const std::string csv = scan_to_csv(scan);
    CHECK(csv == "tau,re,im,method,accuracy\n0.5,1,-2,quadrature,1.0000000000000001e-09\n");
}
