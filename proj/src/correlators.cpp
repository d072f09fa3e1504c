#include "cqosc/correlators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace cqosc::correlators {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};

// int dp e^{-ip tau} / (p^2 - k^2) for the root k with Im k < 0.
cplx simple_pole(cplx k, double tau) { return -kI * kPi * std::exp(-kI * k * std::abs(tau)) / k; }

cplx lower_root(cplx k2) {
    cplx k = std::sqrt(k2);
    if (k.imag() > 0.0) k = -k;
    return k;
}

double roundoff(cplx v, double phase) { return 64.0 * std::numeric_limits<double>::epsilon() * std::abs(v) * (1.0 + phase); }

void require_eta(double eta) {
    if (!(eta >= 100.0 * std::numeric_limits<double>::epsilon())) {
        throw Error(ErrorCode::EtaUnderflow, "eta below 100 * machine epsilon");
    }
}

struct Integral {
    cplx value;
    double error = 0.0;
};

// 2 int_0^P f(p) cos(p tau) dp on segments refined around a near-real pole.
Integral cosine_integral(const std::function<cplx(double)>& f, double tau, double pole, double width,
                         const QuadratureSpec& spec) {
    const double P = spec.p_max;
    std::vector<double> cuts;
    for (std::size_t k = 0; k <= spec.n_points; ++k) cuts.push_back(P * static_cast<double>(k) / spec.n_points);
    for (double m : {0.0, 1.0, 4.0, 16.0, 64.0, 256.0}) {
        for (double x : {pole - m * width, pole + m * width}) {
            if (x > 0.0 && x < P) cuts.push_back(x);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    Integral out;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k], b = cuts[k + 1];
        if (!(b > a)) continue;
        double err_re = 0.0, err_im = 0.0;
        const double re = GK::integrate([&](double p) { return (f(p) * std::cos(p * tau)).real(); }, a, b, 15,
                                        1e-11, &err_re);
        const double im = GK::integrate([&](double p) { return (f(p) * std::cos(p * tau)).imag(); }, a, b, 15,
                                        1e-11, &err_im);
        out.value += cplx(re, im);
        out.error += std::abs(err_re) + std::abs(err_im);
    }
    out.value *= 2.0;
    out.error *= 2.0;
    return out;
}

// int dp e^{-ip tau} / (p^2 - kappa2) by quadrature, after removing 1/(p^2+1).
Integral pole_quadrature(cplx kappa2, double tau, const QuadratureSpec& spec) {
    spec.validate();
    const cplx k = lower_root(kappa2);
    if (k.imag() == 0.0) {
        throw Error(ErrorCode::InvalidArgument, "quadrature needs a pole off the real axis (a > 0)");
    }
    const cplx c = kappa2 + 1.0;
    const double tail = 2.0 * std::abs(c) / (3.0 * std::pow(spec.p_max, 3));
    if (tail > spec.tolerance) {
        throw Error(ErrorCode::CutoffTooSmall, "momentum tail estimate exceeds tolerance; raise p_max");
    }
    auto g = [&](double p) { return c / ((p * p - kappa2) * (p * p + 1.0)); };
    Integral out = cosine_integral(g, tau, std::abs(k.real()), std::abs(k.imag()), spec);
    out.value += kPi * std::exp(-std::abs(tau));
    out.error += tail;
    return out;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::Residue: return "residue";
        case Method::Quadrature: return "quadrature";
        case Method::Lattice: return "lattice";
    }
    return "?";
}

void QuadratureSpec::validate() const {
    if (!(p_max > 0.0) || !std::isfinite(p_max)) throw Error(ErrorCode::InvalidArgument, "p_max must be > 0");
    if (n_points < 64) throw Error(ErrorCode::InvalidArgument, "n_points must be >= 64");
    if (eta && !(*eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "eta must be > 0");
    if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be > 0");
    if (!(window_tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "window_tolerance must be > 0");
}

double default_eta(const OscillatorConfig& cfg) {
    const double w4 = std::pow(cfg.omega_c, 4);
    return w4 > 0.0 ? 1e-6 * w4 : 1e-6;
}

double pole_shift(const OscillatorConfig& cfg) { return cfg.alpha * cfg.alpha / (4.0 * cfg.d2); }

// Quantum propagators ---------------------------------------------------------

CorrelatorValue free_quantum_plus(double tau, const OscillatorConfig& cfg) {
    cfg.validate();
    // Pole of 1/(p^2 - w~^2) in the lower half plane: w~ = sqrt(wQ^2 - i eps).
    const cplx w = std::sqrt(cplx(cfg.omega_q * cfg.omega_q, -pole_shift(cfg)));
    if (std::abs(w) == 0.0) throw Error(ErrorCode::InvalidArgument, "zero quantum frequency and coupling");
    const cplx v = -kI * (-kI * kPi / w) * std::exp(-kI * w * std::abs(tau));
    return {v, Method::Residue, roundoff(v, std::abs(w * tau)), std::nullopt};
}

CorrelatorValue free_quantum_minus(double tau, const OscillatorConfig& cfg) {
    cfg.validate();
    // +i int e^{-ip tau}/(p^2 - w^^2): closing below picks p = -w^, w^ = sqrt(wQ^2 + i eps).
    const cplx w = std::sqrt(cplx(cfg.omega_q * cfg.omega_q, pole_shift(cfg)));
    if (std::abs(w) == 0.0) throw Error(ErrorCode::InvalidArgument, "zero quantum frequency and coupling");
    const cplx residue_sum = -2.0 * kPi * kI * std::exp(kI * w * std::abs(tau)) / (-2.0 * w);
    const cplx v = kI * residue_sum;
    return {v, Method::Residue, roundoff(v, std::abs(w * tau)), std::nullopt};
}

CorrelatorValue free_quantum_plus(double tau, const OscillatorConfig& cfg, const QuadratureSpec& spec) {
    cfg.validate();
    const double w2 = cfg.omega_q * cfg.omega_q;
    const Integral i = pole_quadrature(cplx(w2, -pole_shift(cfg)), tau, spec);
    return {-kI * i.value, Method::Quadrature, i.error, std::nullopt};
}

CorrelatorValue free_quantum_minus(double tau, const OscillatorConfig& cfg, const QuadratureSpec& spec) {
    cfg.validate();
    const double w2 = cfg.omega_q * cfg.omega_q;
    const Integral i = pole_quadrature(cplx(w2, pole_shift(cfg)), tau, spec);
    return {kI * i.value, Method::Quadrature, i.error, std::nullopt};
}

// Classical propagator --------------------------------------------------------

ClassicalKernel::ClassicalKernel(const OscillatorConfig& cfg, double eta) : d2_(cfg.d2) {
    cfg.validate();
    require_eta(eta);
    // (x - r)(x + r) = x^2 + i eta with x = p^2 - wc^2.
    r_ = std::polar(std::sqrt(eta), -kPi / 4.0);
    const double w2 = cfg.omega_c * cfg.omega_c;
    k1_ = lower_root(w2 + r_);
    k2_ = lower_root(w2 - r_);
}

cplx ClassicalKernel::value(double tau) const {
    return d2_ / (2.0 * r_) * (simple_pole(k1_, tau) - simple_pole(k2_, tau));
}

cplx ClassicalKernel::second(double tau) const {
    return d2_ / (2.0 * r_) * (-k1_ * k1_ * simple_pole(k1_, tau) + k2_ * k2_ * simple_pole(k2_, tau));
}

cplx ClassicalKernel::fourth(double tau) const {
    const cplx a = k1_ * k1_, b = k2_ * k2_;
    return d2_ / (2.0 * r_) * (a * a * simple_pole(k1_, tau) - b * b * simple_pole(k2_, tau));
}

double ClassicalKernel::delta_weight() const { return 2.0 * kPi * d2_; }

double ClassicalKernel::cancellation_scale(double tau) const {
    return std::abs(d2_ / (2.0 * r_)) * (std::abs(simple_pole(k1_, tau)) + std::abs(simple_pole(k2_, tau)));
}

CorrelatorValue free_classical(double tau, const OscillatorConfig& cfg, const QuadratureSpec& spec,
                               Method method) {
    cfg.validate();
    spec.validate();
    const double eta = spec.eta.value_or(default_eta(cfg));
    require_eta(eta);
    const ClassicalKernel kernel(cfg, eta);
    const ClassicalKernel half(cfg, 0.5 * eta);
    CorrelatorValue out;
    out.eta_sensitivity = std::abs(kernel.value(tau) - half.value(tau));
    if (method == Method::Residue) {
        out.value = kernel.value(tau);
        out.method = Method::Residue;
        // The two pole terms cancel to O(sqrt(eta)) of their size.
        const double scale = kernel.cancellation_scale(tau);
        out.accuracy_estimate = roundoff(scale, 0.0);
        return out;
    }
    if (method != Method::Quadrature) throw Error(ErrorCode::InvalidArgument, "free_classical: unsupported method");
    const double tail = 2.0 * cfg.d2 / (3.0 * std::pow(spec.p_max, 3));
    if (tail > spec.tolerance) {
        throw Error(ErrorCode::CutoffTooSmall, "momentum tail estimate exceeds tolerance; raise p_max");
    }
    const double w2 = cfg.omega_c * cfg.omega_c;
    auto f = [&](double p) {
        const double x = p * p - w2;
        return cplx(cfg.d2, 0.0) / cplx(x * x, eta);
    };
    const double width = std::sqrt(eta) / (2.0 * cfg.omega_c + std::pow(eta, 0.25));
    const Integral i = cosine_integral(f, tau, cfg.omega_c, width, spec);
    out.value = i.value;
    out.method = Method::Quadrature;
    out.accuracy_estimate = i.error + tail;
    return out;
}

// Corrected correlators -------------------------------------------------------

namespace {

// y_i = sum_j K(i - j) x_j with K tabulated at offsets -(n-1)..(n-1).
std::vector<cplx> toeplitz(const std::vector<cplx>& table, const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    std::vector<cplx> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx* k = table.data() + (i + n - 1);  // k[-j] = K(i - j)
        cplx acc(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) acc += *(k - static_cast<std::ptrdiff_t>(j)) * x[j];
        y[i] = acc;
    }
    return y;
}

cplx dot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx acc(0.0, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

std::vector<cplx> offsets_table(const TimeGrid& g, const std::function<cplx(double)>& f) {
    const std::size_t n = g.n();
    std::vector<cplx> t(2 * n - 1);
    for (std::size_t d = 0; d < 2 * n - 1; ++d) {
        t[d] = f((static_cast<double>(d) - static_cast<double>(n - 1)) * g.dt());
    }
    return t;
}

std::vector<cplx> weighted_samples(const TimeGrid& g, const std::function<cplx(double)>& f) {
    const auto w = g.trapezoid_weights();
    std::vector<cplx> out(g.n());
    for (std::size_t k = 0; k < g.n(); ++k) out[k] = w[k] * f(g.time(k));
    return out;
}

// Double integral of the O(a^2) term of <q(s) q(t)> with continuum kernels.
cplx qq_integral(double s, double t, const OscillatorConfig& cfg, const TimeGrid& g, double eta) {
    const ClassicalKernel A(cfg, eta);
    const double wc2 = cfg.omega_c * cfg.omega_c;
    const double a = cfg.alpha, d2 = cfg.d2;
    auto fp = [&](double x) { return free_quantum_plus(x, cfg).value; };
    auto fm = [&](double x) { return free_quantum_minus(x, cfg).value; };
    const auto fs = offsets_table(g, [&](double x) { return fp(x) + fm(x); });
    const auto fd = offsets_table(g, [&](double x) { return fp(x) - fm(x); });
    auto la = [&](double x) { return A.second(x) + wc2 * A.value(x); };
    const auto a_s = weighted_samples(g, [&](double w) { return A.value(s - w); });
    const auto a_t = weighted_samples(g, [&](double w) { return A.value(t - w); });
    const auto la_s = weighted_samples(g, [&](double w) { return la(s - w); });
    const auto la_t = weighted_samples(g, [&](double w) { return la(t - w); });

    const cplx diff_block = a * a / (4.0 * d2 * d2) * dot(la_s, toeplitz(fs, la_t));
    const cplx noise_block = -a * a * dot(a_s, toeplitz(fs, a_t));
    const cplx mixed = kI * a * a / d2 * 0.5 * (dot(a_s, toeplitz(fd, la_t)) + dot(a_t, toeplitz(fd, la_s)));
    return diff_block + noise_block + mixed;
}

// Double integral of the O(a^2) term of <Q+(s) Q+(t)>, including the contact term of d^4 A.
cplx qplus_integral(double s, double t, const OscillatorConfig& cfg, const TimeGrid& g, double eta) {
    const ClassicalKernel A(cfg, eta);
    const double wc2 = cfg.omega_c * cfg.omega_c;
    const double a = cfg.alpha, d2 = cfg.d2;
    const double c_diff = a * a / (4.0 * d2 * d2);
    const auto k = offsets_table(g, [&](double x) {
        const cplx v = A.value(x), v2 = A.second(x), v4 = A.fourth(x);
        const cplx l2 = v4 + 2.0 * wc2 * v2 + wc2 * wc2 * v;
        return c_diff * l2 - a * a * v + kI * a * a / d2 * (wc2 * v + v2);
    });
    auto f = [&](double x) { return free_quantum_plus(x, cfg).value; };
    const auto f_s = weighted_samples(g, [&](double w) { return f(s - w); });
    const auto f_t = weighted_samples(g, [&](double w) { return f(t - w); });
    cplx contact(0.0, 0.0);
    const auto w = g.trapezoid_weights();
    for (std::size_t j = 0; j < g.n(); ++j) contact += w[j] * f(s - g.time(j)) * f(t - g.time(j));
    return dot(f_s, toeplitz(k, f_t)) + c_diff * A.delta_weight() * contact;
}

using Integrand = cplx (*)(double, double, const OscillatorConfig&, const TimeGrid&, double);

CorrelatorValue corrected(Integrand integral, cplx free_value, double free_accuracy, double s, double t,
                          const OscillatorConfig& cfg, const TimeGrid& window, const QuadratureSpec& spec) {
    cfg.validate();
    spec.validate();
    if (s < window.t_i() || s > window.t_f() || t < window.t_i() || t > window.t_f()) {
        throw Error(ErrorCode::InvalidArgument, "s and t must lie inside the window");
    }
    CorrelatorValue out;
    out.method = Method::Residue;
    out.value = free_value;
    out.accuracy_estimate = free_accuracy;
    if (cfg.alpha == 0.0) return out;
    const double eta = spec.eta.value_or(default_eta(cfg));
    require_eta(eta);
    // Continuum kernels are 2 pi (classical) and -2 pi (quantum) times the
    // Gaussian moments; the correction in continuum units is -P / (4 pi^2).
    const double scale = -1.0 / (4.0 * kPi * kPi);
    const cplx delta = scale * integral(s, t, cfg, window, eta);
    out.value += delta;
    if (spec.check_window) {
        const double half = 0.5 * window.duration();
        const TimeGrid doubled(window.t_i() - half, window.t_f() + half, 2 * window.n() - 1);
        const cplx wide = scale * integral(s, t, cfg, doubled, eta);
        const double change = std::abs(wide - delta);
        if (change > spec.window_tolerance * std::abs(out.value)) {
            throw Error(ErrorCode::WindowTooSmall, "correction changes by more than window_tolerance when the window is doubled");
        }
        out.accuracy_estimate += change;
    }
    return out;
}

}  // namespace

CorrelatorValue corrected_qq(double s, double t, const OscillatorConfig& cfg, const TimeGrid& window,
                             const QuadratureSpec& spec) {
    const CorrelatorValue free = free_classical(s - t, cfg, spec);
    CorrelatorValue out = corrected(qq_integral, free.value, free.accuracy_estimate, s, t, cfg, window, spec);
    out.eta_sensitivity = free.eta_sensitivity;
    return out;
}

CorrelatorValue corrected_QQ_plus(double s, double t, const OscillatorConfig& cfg, const TimeGrid& window,
                                  const QuadratureSpec& spec) {
    const CorrelatorValue free = free_quantum_plus(s - t, cfg);
    return corrected(qplus_integral, free.value, free.accuracy_estimate, s, t, cfg, window, spec);
}

CorrelatorValue corrected_QQ_minus(double s, double t, const OscillatorConfig& cfg, const TimeGrid& window,
                                   const QuadratureSpec& spec) {
    CorrelatorValue out = corrected_QQ_plus(s, t, cfg, window, spec);
    out.value = std::conj(out.value);
    return out;
}

// Lattice-kernel corrections ----------------------------------------------------

cplx lattice_order2_correction(lattice::Species species, std::size_t s, std::size_t t,
                                const OscillatorConfig& cfg, const TimeGrid& grid,
                                const lattice::AssembleOptions& options) {
    using lattice::Species;
    if (cfg.action_convention != model::ActionConvention::Saturated) {
        throw Error(ErrorCode::InvalidArgument, "O(a^2) corrections are defined for the saturated action");
    }
    if (species == Species::Minus) {
        throw Error(ErrorCode::InvalidArgument, "use Classical or Plus; Minus follows by conjugation");
    }
    lattice::AssembleOptions free_opts = options;
    free_opts.include_interaction = false;
    const auto sys = lattice::LatticeSystem::assemble(cfg, grid, free_opts);
    const lattice::GaussianSolver solver(sys);
    const long n = static_cast<long>(grid.n());
    if (s >= grid.n() || t >= grid.n()) throw Error(ErrorCode::InvalidArgument, "node out of range");

    auto block_solve = [&](Species sp, const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
        Eigen::VectorXcd full = Eigen::VectorXcd::Zero(3 * n);
        full.segment(static_cast<long>(sp) * n, n) = x;
        return solver.solve(full).segment(static_cast<long>(sp) * n, n);
    };
    auto unit = [&](std::size_t k) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
        e(static_cast<long>(k)) = 1.0;
        return e;
    };
    const auto ops = lattice::build_operators(grid, cfg.omega_c);
    const Eigen::VectorXcd w = ops.weights.cast<cplx>();
    auto tdot = [](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return (a.transpose() * b)(0); };
    const double a = cfg.alpha, d2 = cfg.d2;
    const double c_diff = a * a / (4.0 * d2 * d2);

    if (species == Species::Classical) {
        const Eigen::VectorXcd A_s = block_solve(Species::Classical, unit(s));
        const Eigen::VectorXcd A_t = block_solve(Species::Classical, unit(t));
        const Eigen::VectorXcd wa_s = w.cwiseProduct(A_s), wa_t = w.cwiseProduct(A_t);
        const Eigen::VectorXcd wla_s = w.cwiseProduct(ops.eom * A_s);
        const Eigen::VectorXcd wla_t = w.cwiseProduct(ops.eom * A_t);
        auto both = [&](const Eigen::VectorXcd& x, double sign) {
            return Eigen::VectorXcd(block_solve(Species::Plus, x) + sign * block_solve(Species::Minus, x));
        };
        const cplx diff_block = c_diff * tdot(wla_s, both(wla_t, 1.0));
        const cplx noise_block = -a * a * tdot(wa_s, both(wa_t, 1.0));
        const cplx mixed = kI * a * a / d2 * 0.5 * (tdot(wa_s, both(wla_t, -1.0)) + tdot(wa_t, both(wla_s, -1.0)));
        return diff_block + noise_block + mixed;
    }
    const Eigen::VectorXcd F_s = block_solve(Species::Plus, unit(s));
    const Eigen::VectorXcd F_t = block_solve(Species::Plus, unit(t));
    const Eigen::VectorXcd u_s = w.cwiseProduct(F_s), u_t = w.cwiseProduct(F_t);
    const lattice::SparseMatrix lt = ops.eom.transpose();
    const Eigen::VectorXcd lu_s = lt * u_s, lu_t = lt * u_t;
    const Eigen::VectorXcd g_ut = block_solve(Species::Classical, u_t);
    const Eigen::VectorXcd g_lut = block_solve(Species::Classical, lu_t);
    const cplx noise_block = -a * a * tdot(u_s, g_ut);
    const cplx diff_block = c_diff * tdot(lu_s, g_lut);
    const cplx mixed = kI * a * a / d2 * 0.5 * (tdot(u_s, g_lut) + tdot(lu_s, g_ut));
    return noise_block + diff_block + mixed;
}

// Vertex factor ---------------------------------------------------------------

VertexFactor vertex_factor(Branch branch, const OscillatorConfig& cfg) {
    cfg.validate();
    const double sign = branch == Branch::Plus ? 1.0 : -1.0;
    const double a = cfg.alpha;
    return {branch, cplx(-a * cfg.omega_c * cfg.omega_c / cfg.d2, -a * sign), -a / cfg.d2};
}

std::vector<cplx> VertexFactor::apply(const Path& p) const {
    const Path dd = model::second_derivative(p);
    std::vector<cplx> out(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = scalar * p[k] + derivative * dd[k];
    return out;
}

std::string scan_to_csv(const std::vector<ScanPoint>& scan) {
    std::string out = "tau,re,im,method,accuracy\n";
    char buf[160];
    for (const auto& pt : scan) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%.17g\n", pt.tau, pt.value.value.real(),
                      pt.value.value.imag(), to_string(pt.value.method).c_str(), pt.value.accuracy_estimate);
        out += buf;
    }
    return out;
}

}  // namespace cqosc::correlators
