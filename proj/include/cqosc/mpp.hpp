#pragma once

// Saddle-point and most-probable-path (MPP) solutions.
//
// The quantum branches extremize the imaginary action, giving the forced
// oscillator Q'' + wQ^2 Q + a q = 0 pinned at both ends. The classical path
// extremizes the real (diffusive) action; to zeroth order in the coupling it
// is annihilated by (d^2 + wc^2)^2, to first order it picks up a term
// proportional to the free mean branch Qbar.

#include <optional>
#include <string>
#include <utility>

#include "cqosc/model.hpp"

namespace cqosc::mpp {

using model::BoundaryConditions;
using model::ComplexWeight;
using model::HybridPaths;
using model::MppCoefficients;
using model::OscillatorConfig;
using model::Path;
using model::TimeGrid;

enum class Regime {
    WeakCouplingLargeD2,
    HeavyClassical,
    HeavyQuantum,
};

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct MppSolution {
    int order = 0;
    Path q;
    MppCoefficients coefficients;
    std::optional<Regime> regime;
    OscillatorConfig config;
};

/// Relative resonance tolerance on |wc - wQ|.
inline constexpr double kResonanceTolerance = 1e-9;
/// Threshold on |sin(wQ (t_f - t_i))| below which the Dirichlet problem is degenerate.
inline constexpr double kDegenerateSinTolerance = 1e-9;

/// Boundary-pinned solution of Q'' + wQ^2 Q + a q = 0 for both branches.
/// Convolutions are trapezoidal on the grid of q.
std::pair<Path, Path> solve_forced_quantum(const Path& q, const BoundaryConditions& bc,
                                           const OscillatorConfig& cfg);

/// Free (a = 0) boundary-pinned interpolant for a single branch.
Path free_quantum_interpolant(const TimeGrid& grid, double q_i, double q_f, double omega_q);

/// Zeroth-order MPP. Coefficients are taken from the boundary data, either
/// directly or by solving the 4x4 endpoint system.
MppSolution mpp_zeroth(const BoundaryConditions& bc, const OscillatorConfig& cfg,
                       const TimeGrid& grid);

/// Zeroth-order MPP plus the coupling-linear correction driven by the mean
/// quantum endpoints. Throws Resonance when wc == wQ.
MppSolution mpp_first(const BoundaryConditions& bc, const OscillatorConfig& cfg,
                      const TimeGrid& grid);

/// Left-hand side of the integro-differential MPP equation evaluated on q.
/// The first and last two nodes are set to zero (fourth derivative is not
/// resolved there). Requires n >= 8.
Path eom_residual(const Path& q, const BoundaryConditions& bc, const OscillatorConfig& cfg);

/// Residual of Q'' + wQ^2 Q + a q on interior nodes (ends set to zero).
Path forced_ode_residual(const Path& q, const Path& branch, const OscillatorConfig& cfg);

HybridPaths solve_regime(Regime regime, const BoundaryConditions& bc, const OscillatorConfig& cfg,
                         const TimeGrid& grid);

/// Exponent of the on-shell propagator (fluctuation prefactor excluded).
ComplexWeight onshell_propagator(const HybridPaths& paths, const OscillatorConfig& cfg);

/// Evaluate the coefficient form A1 sin + A2 cos + t (B1 sin + B2 cos).
double evaluate_zeroth(const MppCoefficients& c, double omega_c, double t);

double max_abs(const Path& p);

}  // namespace cqosc::mpp
