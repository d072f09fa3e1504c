#include "cqosc/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace cqosc {

std::string_view error_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::GridTooSmall: return "GridTooSmall";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::DegenerateBVP: return "DegenerateBVP";
        case ErrorCode::SingularBoundarySystem: return "SingularBoundarySystem";
        case ErrorCode::Resonance: return "Resonance";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::UnstableStep: return "UnstableStep";
        case ErrorCode::CutoffTooSmall: return "CutoffTooSmall";
        case ErrorCode::EtaUnderflow: return "EtaUnderflow";
        case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    }
    return "Unknown";
}

}  // namespace cqosc

namespace cqosc::model {

std::string to_string(ActionConvention c) {
    return c == ActionConvention::Saturated ? "saturated" : "decoherence_diffusion";
}

ActionConvention action_convention_from_string(const std::string& s) {
    if (s == "saturated") return ActionConvention::Saturated;
    if (s == "decoherence_diffusion") return ActionConvention::DecoherenceDiffusion;
    throw Error(ErrorCode::InvalidArgument, "unknown action convention '" + s + "'");
}

void OscillatorConfig::validate() const {
    if (!std::isfinite(omega_c) || !std::isfinite(omega_q) || !std::isfinite(alpha) ||
        !std::isfinite(d2)) {
        throw Error(ErrorCode::InvalidArgument, "oscillator parameters must be finite");
    }
    if (omega_c < 0.0 || omega_q < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "frequencies must be non-negative");
    }
    if (!(d2 > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "diffusion coefficient d2 must be positive");
    }
}

// TimeGrid ------------------------------------------------------------------

TimeGrid::TimeGrid(double t_i, double t_f, std::size_t n) : t_i_(t_i), t_f_(t_f), n_(n) {
    if (!std::isfinite(t_i) || !std::isfinite(t_f) || !(t_f > t_i)) {
        throw Error(ErrorCode::InvalidArgument, "time grid requires finite t_f > t_i");
    }
    if (n < 4) {
        throw Error(ErrorCode::GridTooSmall, "time grid needs at least 4 nodes");
    }
    dt_ = (t_f - t_i) / static_cast<double>(n - 1);
}

std::vector<double> TimeGrid::trapezoid_weights() const {
    std::vector<double> w(n_, dt_);
    w.front() = 0.5 * dt_;
    w.back() = 0.5 * dt_;
    return w;
}

bool TimeGrid::operator==(const TimeGrid& other) const {
    return n_ == other.n_ && t_i_ == other.t_i_ && t_f_ == other.t_f_;
}

// Path ----------------------------------------------------------------------

Path::Path(TimeGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.n()) {
        throw Error(ErrorCode::GridMismatch, "path length does not match its grid");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "path values must be finite");
    }
}

Path Path::zeros(const TimeGrid& grid) { return Path(grid, std::vector<double>(grid.n(), 0.0)); }

Path Path::sample(const TimeGrid& grid, const std::function<double(double)>& f) {
    std::vector<double> v(grid.n());
    for (std::size_t k = 0; k < grid.n(); ++k) v[k] = f(grid.time(k));
    return Path(grid, std::move(v));
}

void require_same_grid(const Path& a, const Path& b) {
    if (!(a.grid() == b.grid())) {
        throw Error(ErrorCode::GridMismatch, "paths live on different time grids");
    }
}

Path Path::operator+(const Path& other) const {
    require_same_grid(*this, other);
    std::vector<double> v(values_);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += other.values_[k];
    return Path(grid_, std::move(v));
}

Path Path::operator-(const Path& other) const {
    require_same_grid(*this, other);
    std::vector<double> v(values_);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= other.values_[k];
    return Path(grid_, std::move(v));
}

Path Path::operator*(double s) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= s;
    return Path(grid_, std::move(v));
}

HybridPaths::HybridPaths(Path q_, Path q_plus_, Path q_minus_)
    : q(std::move(q_)), q_plus(std::move(q_plus_)), q_minus(std::move(q_minus_)) {
    require_same_grid(q, q_plus);
    require_same_grid(q, q_minus);
}

void BoundaryConditions::validate() const {
    auto finite = [](double x) { return std::isfinite(x); };
    bool ok = finite(quantum.plus_i) && finite(quantum.minus_i) && finite(quantum.plus_f) &&
              finite(quantum.minus_f);
    if (const auto* e = std::get_if<ClassicalEndpoints>(&classical)) {
        ok = ok && finite(e->q_i) && finite(e->qdot_i) && finite(e->qddot_i) && finite(e->q_f);
    } else {
        const auto& c = std::get<MppCoefficients>(classical);
        ok = ok && finite(c.a1) && finite(c.a2) && finite(c.b1) && finite(c.b2);
    }
    if (!ok) throw Error(ErrorCode::InvalidArgument, "boundary conditions must be finite");
}

// Discrete calculus ---------------------------------------------------------

std::vector<StencilEntry> second_derivative_stencil(const TimeGrid& grid) {
    const std::size_t n = grid.n();
    const double h2 = 1.0 / (grid.dt() * grid.dt());
    std::vector<StencilEntry> out;
    out.reserve(3 * n + 2);
    // f''(x0) ~ (2 f0 - 5 f1 + 4 f2 - f3) / h^2
    const double edge[4] = {2.0, -5.0, 4.0, -1.0};
    for (std::size_t j = 0; j < 4; ++j) out.push_back({0, j, edge[j] * h2});
    for (std::size_t k = 1; k + 1 < n; ++k) {
        out.push_back({k, k - 1, h2});
        out.push_back({k, k, -2.0 * h2});
        out.push_back({k, k + 1, h2});
    }
    for (std::size_t j = 0; j < 4; ++j) out.push_back({n - 1, n - 1 - j, edge[j] * h2});
    return out;
}

Path second_derivative(const Path& p) {
    const std::size_t n = p.size();
    if (n < 4) throw Error(ErrorCode::GridTooSmall, "second derivative needs at least 4 nodes");
    std::vector<double> out(n, 0.0);
    for (const auto& e : second_derivative_stencil(p.grid())) out[e.row] += e.value * p[e.col];
    return Path(p.grid(), std::move(out));
}

double integrate(const TimeGrid& grid, std::span<const double> f) {
    if (f.size() != grid.n()) throw Error(ErrorCode::GridMismatch, "sample count does not match grid");
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t k = 1; k + 1 < f.size(); ++k) s += f[k];
    return s * grid.dt();
}

double kinetic_integral(const Path& a, const Path& b) {
    require_same_grid(a, b);
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < a.size(); ++k) {
        s += (a[k + 1] - a[k]) * (b[k + 1] - b[k]);
    }
    return s / a.grid().dt();
}

// Action --------------------------------------------------------------------

namespace {

/// Unitary Lagrangian integral for one branch, including -a q Q.
double branch_lagrangian(const Path& q, const Path& branch, const OscillatorConfig& cfg) {
    const auto& grid = q.grid();
    std::vector<double> f(grid.n());
    const double w2 = cfg.omega_q * cfg.omega_q;
    for (std::size_t k = 0; k < f.size(); ++k) {
        f[k] = -0.5 * w2 * branch[k] * branch[k] - cfg.alpha * q[k] * branch[k];
    }
    return 0.5 * kinetic_integral(branch, branch) + integrate(grid, f);
}

}  // namespace

ComplexWeight evaluate_action(const HybridPaths& paths, const OscillatorConfig& cfg) {
    cfg.validate();
    const auto& grid = paths.grid();
    const auto& q = paths.q;
    const auto& qp = paths.q_plus;
    const auto& qm = paths.q_minus;

    ComplexWeight out;
    out.phase = branch_lagrangian(q, qp, cfg) - branch_lagrangian(q, qm, cfg);

    const Path qdd = second_derivative(q);
    const double wc2 = cfg.omega_c * cfg.omega_c;
    const double a = cfg.alpha;
    std::vector<double> f(grid.n());
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double eom = qdd[k] + wc2 * q[k];
        const double sum = qp[k] + qm[k];
        if (cfg.action_convention == ActionConvention::DecoherenceDiffusion) {
            const double diff = qp[k] - qm[k];
            const double drift = eom + 0.5 * a * sum;
            f[k] = -0.5 * cfg.d0() * a * a * diff * diff - drift * drift / (2.0 * cfg.d2);
        } else {
            f[k] = -(eom * eom + a * eom * sum + 0.25 * a * a * (qp[k] * qp[k] + qm[k] * qm[k])) /
                   (2.0 * cfg.d2);
        }
    }
    out.log_magnitude = integrate(grid, f);
    return out;
}

double decoherence_weight(const Path& delta_q, const OscillatorConfig& cfg) {
    cfg.validate();
    std::vector<double> sq(delta_q.size());
    for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = delta_q[k] * delta_q[k];
    return -0.5 * cfg.d0() * cfg.alpha * cfg.alpha * integrate(delta_q.grid(), sq);
}

// CSV -----------------------------------------------------------------------

std::string path_to_csv(const Path& p) {
    std::string out = "t,value\n";
    char buf[64];
    for (std::size_t k = 0; k < p.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.grid().time(k), p[k]);
        out += buf;
    }
    return out;
}

Path path_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "t,value") {
        throw Error(ErrorCode::InvalidArgument, "path CSV must start with header 't,value'");
    }
    std::vector<double> ts;
    std::vector<double> vs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "malformed CSV row");
        ts.push_back(std::stod(line.substr(0, comma)));
        vs.push_back(std::stod(line.substr(comma + 1)));
    }
    if (ts.size() < 4) throw Error(ErrorCode::GridTooSmall, "path CSV has fewer than 4 rows");
    return Path(TimeGrid(ts.front(), ts.back(), ts.size()), std::move(vs));
}

}  // namespace cqosc::model
