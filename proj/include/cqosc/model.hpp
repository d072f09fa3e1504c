#pragma once

// Domain types and action evaluation for a quantum oscillator Q (bra/ket
// branches Q+ and Q-) linearly coupled to a diffusing classical oscillator q.
// Units: hbar = 1, unit masses.

#include <array>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cqosc/errors.hpp"

namespace cqosc::model {

enum class ActionConvention {
    /// Decoherence term -(D0 a^2/2)(Q+ - Q-)^2 plus the completed-square
    /// diffusion term -(1/2D2)(q'' + wc^2 q + (a/2)(Q+ + Q-))^2.
    DecoherenceDiffusion,
    /// Expanded second line with the a^2/4 (Q+^2 + Q-^2) coefficient.
    Saturated,
};

std::string to_string(ActionConvention c);
ActionConvention action_convention_from_string(const std::string& s);

struct OscillatorConfig {
    double omega_c = 1.0;
    double omega_q = 1.0;
    double alpha = 0.0;
    double d2 = 1.0;
    ActionConvention action_convention = ActionConvention::Saturated;

    /// Decoherence coefficient from the saturated trade-off 4 D0 = 1/D2.
    double d0() const { return 0.25 / d2; }

    /// Throws InvalidArgument unless d2 > 0, frequencies >= 0 and all finite.
    void validate() const;
};

class TimeGrid {
public:
    TimeGrid(double t_i, double t_f, std::size_t n);

    double t_i() const { return t_i_; }
    double t_f() const { return t_f_; }
    std::size_t n() const { return n_; }
    double dt() const { return dt_; }
    double duration() const { return t_f_ - t_i_; }
    double time(std::size_t k) const { return t_i_ + static_cast<double>(k) * dt_; }

    /// Trapezoidal quadrature weights (dt/2 at the two ends, dt inside).
    std::vector<double> trapezoid_weights() const;

    bool operator==(const TimeGrid& other) const;

private:
    double t_i_;
    double t_f_;
    std::size_t n_;
    double dt_;
};

class Path {
public:
    Path(TimeGrid grid, std::vector<double> values);

    static Path zeros(const TimeGrid& grid);
    static Path sample(const TimeGrid& grid, const std::function<double(double)>& f);

    const TimeGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t k) const { return values_[k]; }
    std::size_t size() const { return values_.size(); }

    Path operator+(const Path& other) const;
    Path operator-(const Path& other) const;
    Path operator*(double s) const;

private:
    TimeGrid grid_;
    std::vector<double> values_;
};

/// Classical path q with the bra (Q+) and ket (Q-) branches on one grid.
struct HybridPaths {
    Path q;
    Path q_plus;
    Path q_minus;

    HybridPaths(Path q_, Path q_plus_, Path q_minus_);
    const TimeGrid& grid() const { return q.grid(); }
};

/// Value of the complex action I = log_magnitude + i * phase.
struct ComplexWeight {
    double log_magnitude = 0.0;
    double phase = 0.0;
};

/// Endpoint data for the classical oscillator: q(t_i), q'(t_i), q''(t_i), q(t_f).
struct ClassicalEndpoints {
    double q_i = 0.0;
    double qdot_i = 0.0;
    double qddot_i = 0.0;
    double q_f = 0.0;
};

/// Coefficients of A1 sin(wc t) + A2 cos(wc t) + t (B1 sin(wc t) + B2 cos(wc t)).
struct MppCoefficients {
    double a1 = 0.0;
    double a2 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
};

struct QuantumEndpoints {
    double plus_i = 0.0;
    double minus_i = 0.0;
    double plus_f = 0.0;
    double minus_f = 0.0;

    double mean_i() const { return 0.5 * (plus_i + minus_i); }
    double mean_f() const { return 0.5 * (plus_f + minus_f); }
};

struct BoundaryConditions {
    QuantumEndpoints quantum;
    std::variant<ClassicalEndpoints, MppCoefficients> classical = ClassicalEndpoints{};

    void validate() const;
};

// Discrete calculus ---------------------------------------------------------

/// Second derivative: central three-point stencil inside, one-sided
/// second-order four-point stencils at the two end nodes. Requires n >= 4.
Path second_derivative(const Path& p);

/// Stencil weights of second_derivative as (row, col, value) triplets.
struct StencilEntry {
    std::size_t row;
    std::size_t col;
    double value;
};
std::vector<StencilEntry> second_derivative_stencil(const TimeGrid& grid);

/// Trapezoidal integral of samples on a grid.
double integrate(const TimeGrid& grid, std::span<const double> f);

/// Integral of the product of the derivatives of the piecewise-linear
/// interpolants of a and b: sum_k (a[k+1]-a[k]) (b[k+1]-b[k]) / dt.
double kinetic_integral(const Path& a, const Path& b);

// Action --------------------------------------------------------------------

/// Classical-quantum action for the convention stored in cfg.
ComplexWeight evaluate_action(const HybridPaths& paths, const OscillatorConfig& cfg);

/// -(D0 a^2 / 2) * integral (dQ)^2 with D0 = 1/(4 D2). Always <= 0.
double decoherence_weight(const Path& delta_q, const OscillatorConfig& cfg);

// CSV -------------------------------------------------------------------------

/// `t,value` header, one row per node, 17 significant digits.
std::string path_to_csv(const Path& p);
Path path_from_csv(const std::string& text);

void require_same_grid(const Path& a, const Path& b);

}  // namespace cqosc::model
