#include "cqosc/mpp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace cqosc::mpp {

std::string to_string(Regime r) {
    switch (r) {
        case Regime::WeakCouplingLargeD2: return "weak_coupling_large_d2";
        case Regime::HeavyClassical: return "heavy_classical";
        case Regime::HeavyQuantum: return "heavy_quantum";
    }
    return "unknown";
}

Regime regime_from_string(const std::string& s) {
    if (s == "weak_coupling_large_d2") return Regime::WeakCouplingLargeD2;
    if (s == "heavy_classical") return Regime::HeavyClassical;
    if (s == "heavy_quantum") return Regime::HeavyQuantum;
    throw Error(ErrorCode::InvalidArgument, "unknown regime '" + s + "'");
}

namespace {

double checked_sin_window(const TimeGrid& grid, double omega_q) {
    const double s = std::sin(omega_q * grid.duration());
    if (std::abs(s) < kDegenerateSinTolerance) {
        throw Error(ErrorCode::DegenerateBVP,
                    "sin(omega_q (t_f - t_i)) vanishes: Dirichlet problem is degenerate");
    }
    return s;
}

/// Trapezoidal running integrals g(t) = int_{t_i}^{t} sin(w (t - s)) f(s) ds
/// for every node, via sin(w(t-s)) = sin(wt) cos(ws) - cos(wt) sin(ws).
std::vector<double> running_sine_convolution(const TimeGrid& grid, std::span<const double> f,
                                             double w) {
    const std::size_t n = grid.n();
    const double h = grid.dt();
    std::vector<double> out(n, 0.0);
    double c_acc = 0.0;
    double s_acc = 0.0;
    double prev_c = std::cos(w * grid.t_i()) * f[0];
    double prev_s = std::sin(w * grid.t_i()) * f[0];
    for (std::size_t k = 1; k < n; ++k) {
        const double t = grid.time(k);
        const double cur_c = std::cos(w * t) * f[k];
        const double cur_s = std::sin(w * t) * f[k];
        c_acc += 0.5 * h * (prev_c + cur_c);
        s_acc += 0.5 * h * (prev_s + cur_s);
        prev_c = cur_c;
        prev_s = cur_s;
        out[k] = std::sin(w * t) * c_acc - std::cos(w * t) * s_acc;
    }
    return out;
}

Path forced_branch(const Path& q, double q_i, double q_f, const OscillatorConfig& cfg,
                   const std::vector<double>& conv, double full_conv, double sin_window) {
    const auto& grid = q.grid();
    const double w = cfg.omega_q;
    std::vector<double> out(grid.n());
    for (std::size_t k = 0; k < grid.n(); ++k) {
        const double t = grid.time(k);
        const double homog =
            (q_i * std::sin(w * (grid.t_f() - t)) + q_f * std::sin(w * (t - grid.t_i()))) / sin_window;
        const double forced =
            conv[k] + std::sin(w * (grid.t_i() - t)) / sin_window * full_conv;
        out[k] = homog - cfg.alpha / w * forced;
    }
    // Pin the ends exactly; the forced term vanishes there analytically.
    out.front() = q_i;
    out.back() = q_f;
    return Path(grid, std::move(out));
}

Path interior_only(const TimeGrid& grid, std::vector<double> v, std::size_t skip) {
    for (std::size_t k = 0; k < skip && k < v.size(); ++k) {
        v[k] = 0.0;
        v[v.size() - 1 - k] = 0.0;
    }
    return Path(grid, std::move(v));
}

MppCoefficients solve_endpoint_system(const model::ClassicalEndpoints& e, double w,
                                      const TimeGrid& grid) {
    const double ti = grid.t_i();
    const double tf = grid.t_f();
    const double si = std::sin(w * ti), ci = std::cos(w * ti);
    const double sf = std::sin(w * tf), cf = std::cos(w * tf);
    Eigen::Matrix4d m;
    // value, first and second derivative of sin, cos, t sin, t cos at t_i
    m << si, ci, ti * si, ti * ci,
        w * ci, -w * si, si + w * ti * ci, ci - w * ti * si,
        -w * w * si, -w * w * ci, 2.0 * w * ci - w * w * ti * si, -2.0 * w * si - w * w * ti * ci,
        sf, cf, tf * sf, tf * cf;
    Eigen::Vector4d rhs(e.q_i, e.qdot_i, e.qddot_i, e.q_f);

    // Column scaling keeps the conditioning check independent of time units.
    Eigen::Vector4d scale;
    for (int j = 0; j < 4; ++j) scale(j) = std::max(m.col(j).cwiseAbs().maxCoeff(), 1e-300);
    const Eigen::Matrix4d ms = m * scale.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::Matrix4d> svd(ms);
    const auto& sv = svd.singularValues();
    if (!(sv(3) > 1e-12 * sv(0))) {
        throw Error(ErrorCode::SingularBoundarySystem,
                    "boundary data do not determine the zeroth-order MPP coefficients");
    }
    const Eigen::Vector4d x = ms.fullPivLu().solve(rhs).cwiseQuotient(scale);
    return {x(0), x(1), x(2), x(3)};
}

}  // namespace

double evaluate_zeroth(const MppCoefficients& c, double omega_c, double t) {
    const double s = std::sin(omega_c * t);
    const double co = std::cos(omega_c * t);
    return c.a1 * s + c.a2 * co + t * (c.b1 * s + c.b2 * co);
}

double max_abs(const Path& p) {
    double m = 0.0;
    for (double v : p.values()) m = std::max(m, std::abs(v));
    return m;
}

Path free_quantum_interpolant(const TimeGrid& grid, double q_i, double q_f, double omega_q) {
    const double s = checked_sin_window(grid, omega_q);
    std::vector<double> out(grid.n());
    for (std::size_t k = 0; k < grid.n(); ++k) {
        const double t = grid.time(k);
        out[k] = (q_i * std::sin(omega_q * (grid.t_f() - t)) +
                  q_f * std::sin(omega_q * (t - grid.t_i()))) / s;
    }
    out.front() = q_i;
    out.back() = q_f;
    return Path(grid, std::move(out));
}

std::pair<Path, Path> solve_forced_quantum(const Path& q, const BoundaryConditions& bc,
                                           const OscillatorConfig& cfg) {
    cfg.validate();
    bc.validate();
    const auto& grid = q.grid();
    const double sin_window = checked_sin_window(grid, cfg.omega_q);
    const auto conv = running_sine_convolution(grid, q.values(), cfg.omega_q);
    const double full = conv.back();
    return {forced_branch(q, bc.quantum.plus_i, bc.quantum.plus_f, cfg, conv, full, sin_window),
            forced_branch(q, bc.quantum.minus_i, bc.quantum.minus_f, cfg, conv, full, sin_window)};
}

Path forced_ode_residual(const Path& q, const Path& branch, const OscillatorConfig& cfg) {
    model::require_same_grid(q, branch);
    const Path acc = model::second_derivative(branch);
    const double w2 = cfg.omega_q * cfg.omega_q;
    std::vector<double> r(q.size());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = acc[k] + w2 * branch[k] + cfg.alpha * q[k];
    return interior_only(q.grid(), std::move(r), 1);
}

MppSolution mpp_zeroth(const BoundaryConditions& bc, const OscillatorConfig& cfg,
                       const TimeGrid& grid) {
    cfg.validate();
    bc.validate();
    if (!(cfg.omega_c > 0.0)) {
        throw Error(ErrorCode::SingularBoundarySystem, "zeroth-order MPP requires omega_c > 0");
    }
    MppCoefficients c;
    if (const auto* e = std::get_if<model::ClassicalEndpoints>(&bc.classical)) {
        c = solve_endpoint_system(*e, cfg.omega_c, grid);
    } else {
        c = std::get<MppCoefficients>(bc.classical);
    }
    Path q = Path::sample(grid, [&](double t) { return evaluate_zeroth(c, cfg.omega_c, t); });
    return MppSolution{0, std::move(q), c, std::nullopt, cfg};
}

MppSolution mpp_first(const BoundaryConditions& bc, const OscillatorConfig& cfg,
                      const TimeGrid& grid) {
    cfg.validate();
    const double wc = cfg.omega_c;
    const double wq = cfg.omega_q;
    if (std::abs(wc - wq) < kResonanceTolerance * std::max(wc, wq)) {
        throw Error(ErrorCode::Resonance,
                    "omega_c == omega_q: first-order MPP correction is undefined at resonance");
    }
    const double sin_window = checked_sin_window(grid, wq);
    MppSolution sol = mpp_zeroth(bc, cfg, grid);

    const double qbar_i = bc.quantum.mean_i();
    const double qbar_f = bc.quantum.mean_f();
    const double ti = grid.t_i();
    const double tf = grid.t_f();
    const double pref = cfg.alpha / ((wq * wq - wc * wc) * sin_window);
    const double cos_coef = qbar_i * std::sin(wq * tf) - qbar_f * std::sin(wq * ti);
    const double sin_coef = qbar_f * std::cos(wq * ti) - qbar_i * std::cos(wq * tf);

    std::vector<double> v(grid.n());
    for (std::size_t k = 0; k < grid.n(); ++k) {
        const double t = grid.time(k);
        v[k] = sol.q[k] + pref * (cos_coef * std::cos(wq * t) + sin_coef * std::sin(wq * t));
    }
    sol.q = Path(grid, std::move(v));
    sol.order = 1;
    return sol;
}

Path eom_residual(const Path& q, const BoundaryConditions& bc, const OscillatorConfig& cfg) {
    const auto& grid = q.grid();
    if (grid.n() < 8) throw Error(ErrorCode::GridTooSmall, "MPP residual needs at least 8 nodes");
    const auto [qp, qm] = solve_forced_quantum(q, bc, cfg);
    const double wc2 = cfg.omega_c * cfg.omega_c;
    const double wq = cfg.omega_q;
    const double a = cfg.alpha;

    const Path qdd = model::second_derivative(q);
    const Path q4 = model::second_derivative(qdd);

    // The two bracketed time integrals of sin(wQ(.)) alone.
    const std::vector<double> ones(grid.n(), 1.0);
    const auto running = running_sine_convolution(grid, ones, wq);
    const double full = running.back();
    const double sin_window = std::sin(wq * grid.duration());

    std::vector<double> r(grid.n());
    for (std::size_t k = 0; k < grid.n(); ++k) {
        const double t = grid.time(k);
        const double qbar = 0.5 * (qp[k] + qm[k]);
        const double eom = qdd[k] + wc2 * q[k];
        const double kernel = std::sin(wq * (grid.t_i() - t)) / sin_window * full + running[k];
        const double bracket = q[k] - (eom + 0.5 * a * qbar) * kernel / wq;
        r[k] = q4[k] + 2.0 * wc2 * qdd[k] + wc2 * wc2 * q[k] + a * qbar * (wc2 - wq * wq) -
               a * a * bracket;
    }
    return interior_only(grid, std::move(r), 2);
}

HybridPaths solve_regime(Regime regime, const BoundaryConditions& bc, const OscillatorConfig& cfg,
                         const TimeGrid& grid) {
    switch (regime) {
        case Regime::WeakCouplingLargeD2: {
            Path q = mpp_first(bc, cfg, grid).q;
            auto [qp, qm] = solve_forced_quantum(q, bc, cfg);
            return HybridPaths(std::move(q), std::move(qp), std::move(qm));
        }
        case Regime::HeavyClassical: {
            Path q = mpp_zeroth(bc, cfg, grid).q;
            auto [qp, qm] = solve_forced_quantum(q, bc, cfg);
            return HybridPaths(std::move(q), std::move(qp), std::move(qm));
        }
        case Regime::HeavyQuantum: {
            Path qp = free_quantum_interpolant(grid, bc.quantum.plus_i, bc.quantum.plus_f, cfg.omega_q);
            Path qm = free_quantum_interpolant(grid, bc.quantum.minus_i, bc.quantum.minus_f, cfg.omega_q);
            Path q = mpp_first(bc, cfg, grid).q;
            return HybridPaths(std::move(q), std::move(qp), std::move(qm));
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown regime");
}

ComplexWeight onshell_propagator(const HybridPaths& paths, const OscillatorConfig& cfg) {
    cfg.validate();
    const auto& grid = paths.grid();
    const Path delta = paths.q_plus - paths.q_minus;
    const Path mean = (paths.q_plus + paths.q_minus) * 0.5;
    const Path qdd = model::second_derivative(paths.q);
    const double wq2 = cfg.omega_q * cfg.omega_q;
    const double wc2 = cfg.omega_c * cfg.omega_c;
    const double a = cfg.alpha;

    std::vector<double> ph(grid.n());
    std::vector<double> mag(grid.n());
    for (std::size_t k = 0; k < grid.n(); ++k) {
        const double q = paths.q[k];
        ph[k] = -0.5 * wq2 * delta[k] * mean[k] - a * q * delta[k];
        const double eom = qdd[k] + wc2 * q;
        const double p = paths.q_plus[k];
        const double m = paths.q_minus[k];
        mag[k] = eom * eom + 2.0 * a * eom * mean[k] + 0.25 * a * a * (p * p + m * m);
    }
    ComplexWeight out;
    out.phase = 0.5 * model::kinetic_integral(delta, mean) + model::integrate(grid, ph);
    out.log_magnitude = -model::integrate(grid, mag) / (2.0 * cfg.d2);
    return out;
}

}  // namespace cqosc::mpp
