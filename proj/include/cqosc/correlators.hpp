#pragma once

// Free propagators and their O(a^2) corrections.
//
// Conventions (hbar = 1, unit masses):
//   F'+(tau) = -i int dp e^{-ip tau} / (p^2 - wQ^2 + i a^2/(4 D2))
//   F'-(tau) = +i int dp e^{-ip tau} / (p^2 - wQ^2 - i a^2/(4 D2))
//   A(tau)   = D2 int dp e^{-ip tau} / ((p^2 - wc^2)^2 + i eta)
// Lattice Gaussian moments equal these times species_normalization().

#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cqosc/lattice.hpp"
#include "cqosc/model.hpp"

namespace cqosc::correlators {

using cplx = std::complex<double>;
using model::OscillatorConfig;
using model::Path;
using model::TimeGrid;

enum class Method { Residue, Quadrature, Lattice };
std::string to_string(Method m);

enum class Branch { Plus, Minus };

struct QuadratureSpec {
    double p_max = 400.0;
    std::size_t n_points = 256;
    /// Regulator of the classical propagator; default_eta(cfg) when unset.
    std::optional<double> eta;
    /// Maximum admissible tail (cutoff) error.
    double tolerance = 1e-6;
    /// Relative tolerance of the window-doubling test for corrected correlators.
    double window_tolerance = 1e-2;
    bool check_window = true;

    void validate() const;
};

struct CorrelatorValue {
    cplx value;
    Method method = Method::Residue;
    double accuracy_estimate = 0.0;
    /// |A(eta) - A(eta/2)| for the classical propagator.
    std::optional<double> eta_sensitivity;
};

/// 1e-6 * wc^4 (or 1e-6 when wc = 0).
double default_eta(const OscillatorConfig& cfg);
/// Quantum pole shift a^2/(4 D2).
double pole_shift(const OscillatorConfig& cfg);

CorrelatorValue free_quantum_plus(double tau, const OscillatorConfig& cfg);
CorrelatorValue free_quantum_plus(double tau, const OscillatorConfig& cfg, const QuadratureSpec& spec);
CorrelatorValue free_quantum_minus(double tau, const OscillatorConfig& cfg);
CorrelatorValue free_quantum_minus(double tau, const OscillatorConfig& cfg, const QuadratureSpec& spec);

/// Partial-fraction closed form (Residue) or direct momentum quadrature.
CorrelatorValue free_classical(double tau, const OscillatorConfig& cfg, const QuadratureSpec& spec,
                               Method method = Method::Residue);

/// A(tau) and tau-derivatives from the partial-fraction form.
/// fourth() omits the distributional 2 pi D2 delta(tau), reported by delta_weight().
class ClassicalKernel {
public:
    ClassicalKernel(const OscillatorConfig& cfg, double eta);
    cplx value(double tau) const;
    cplx second(double tau) const;
    cplx fourth(double tau) const;
    double delta_weight() const;
    /// Size of the two partial-fraction terms before they cancel.
    double cancellation_scale(double tau) const;

private:
    double d2_;
    cplx r_;
    cplx k1_, k2_;  // roots with Im k < 0 of k^2 = wc^2 + r and wc^2 - r
};

/// <q(s) q(t)> through O(a^2): free_classical(s - t) plus the double time
/// integral of the O(a^2) correction over the window (trapezoidal).
CorrelatorValue corrected_qq(double s, double t, const OscillatorConfig& cfg, const TimeGrid& window,
                             const QuadratureSpec& spec);
/// <Q+(s) Q+(t)> through O(a^2).
CorrelatorValue corrected_QQ_plus(double s, double t, const OscillatorConfig& cfg,
                                  const TimeGrid& window, const QuadratureSpec& spec);
/// conj(corrected_QQ_plus): the ket correlator by conjugation.
CorrelatorValue corrected_QQ_minus(double s, double t, const OscillatorConfig& cfg,
                                   const TimeGrid& window, const QuadratureSpec& spec);

/// O(a^2) terms of the corrected correlators evaluated with lattice kernels
/// (free M^-1 blocks, stencil L, trapezoid weights), in lattice moment units.
/// `species` is Classical for <q q> or Plus for <Q+ Q+>.
cplx lattice_order2_correction(lattice::Species species, std::size_t s, std::size_t t,
                                const OscillatorConfig& cfg, const TimeGrid& grid,
                                const lattice::AssembleOptions& options = {});

/// -a (+-i + (1/D2)(d^2 + wc^2)) as scalar part + second-derivative part.
struct VertexFactor {
    Branch branch;
    cplx scalar;       ///< -a(+-i) - a wc^2 / D2
    double derivative; ///< -a / D2, multiplies d^2
    std::vector<cplx> apply(const Path& p) const;
};

VertexFactor vertex_factor(Branch branch, const OscillatorConfig& cfg);

struct ScanPoint {
    double tau;
    CorrelatorValue value;
};

/// `tau,re,im,method,accuracy` with 17 significant digits.
std::string scan_to_csv(const std::vector<ScanPoint>& scan);

}  // namespace cqosc::correlators
