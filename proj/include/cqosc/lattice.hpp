#pragma once

// Lattice Gaussian oracle. The discretized action is written as
//
//     I[y] = -1/2 y^T M y + J^T y,    y = (q_0..q_{n-1}, Q+_0.., Q-_0..),
//
// with the same stencils and trapezoid weights used by model::evaluate_action,
// so the two agree to roundoff on any path. Moments <y_a y_b> of exp(I) are
// (M^-1)_ab, computed with a banded complex LU.

#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cqosc/model.hpp"

namespace cqosc::lattice {

using cplx = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor, long>;
using model::OscillatorConfig;
using model::TimeGrid;

enum class Species { Classical = 0, Plus = 1, Minus = 2 };

std::string to_string(Species s);

struct Site {
    Species species;
    std::size_t node;
};

struct AssembleOptions {
    bool include_interaction = true;
    /// Continuum-matched regulator: adds +i (eta / D2) W to the q-block so the
    /// free classical moment approaches (1/2pi) D2 int dp e^{-ip tau}/((p^2-wc^2)^2 + i eta).
    /// When unset, a tiny diagonal i * 1e-8 * ||M||_inf is used instead.
    std::optional<double> eta;
    /// Scale of the unitary kinetic and mass terms (1 for the action).
    double unitary_scale = 1.0;
};

/// Discrete operators shared by assembly and the perturbative correction.
struct Operators {
    Eigen::VectorXd weights;  ///< trapezoid weights
    SparseMatrix kinetic;     ///< int Qdot^2 = Q^T T Q (forward differences)
    SparseMatrix eom;         ///< L = second-derivative stencil + wc^2
};

Operators build_operators(const TimeGrid& grid, double omega_c);

class LatticeSystem {
public:
    static LatticeSystem assemble(const OscillatorConfig& cfg, const TimeGrid& grid,
                                  const AssembleOptions& options = {});

    /// Generic system from an explicit symmetric matrix (no species layout).
    static LatticeSystem from_matrix(SparseMatrix m, Eigen::VectorXcd j = {});

    /// Matrix of the action (regulator excluded).
    const SparseMatrix& m() const { return m_; }
    /// Diagonal regulator added to m for all solves.
    const Eigen::VectorXcd& regulator() const { return regulator_; }
    const Eigen::VectorXcd& j() const { return j_; }
    void set_source(Eigen::VectorXcd j);

    long dim() const { return m_.rows(); }
    bool has_layout() const { return grid_.has_value(); }
    const TimeGrid& grid() const;
    const OscillatorConfig& config() const;
    bool includes_interaction() const { return includes_interaction_; }

    long index(Site s) const;

    /// -1/2 y^T m y + J^T y (regulator excluded).
    cplx quadratic_action(const Eigen::VectorXcd& y) const;

    /// Maximum |m - m^T| entry.
    double asymmetry() const;

    /// `row col re im` triplets, one per stored nonzero.
    std::string dump_triplets() const;

private:
    SparseMatrix m_;
    Eigen::VectorXcd regulator_;
    Eigen::VectorXcd j_;
    std::optional<TimeGrid> grid_;
    std::optional<OscillatorConfig> cfg_;
    bool includes_interaction_ = false;
};

/// Pack (q, Q+, Q-) samples into a lattice vector.
Eigen::VectorXcd pack(const model::HybridPaths& paths);

/// Banded LU of m + regulator; reusable for many moments on one system.
class GaussianSolver {
public:
    explicit GaussianSolver(const LatticeSystem& sys);
    ~GaussianSolver();
    GaussianSolver(GaussianSolver&&) noexcept;
    GaussianSolver& operator=(GaussianSolver&&) noexcept;

    Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const;
    /// Column b of M^-1.
    Eigen::VectorXcd column(long b) const;
    cplx moment(long a, long b) const;
    /// log det M (imaginary part defined modulo 2 pi).
    cplx log_det() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

cplx moment(const LatticeSystem& sys, Site a, Site b);
cplx moment(const LatticeSystem& sys, long a, long b);

using MomentTable = std::map<std::pair<long, long>, cplx>;
/// All pair moments among the given sites (both orderings stored).
MomentTable moment_table(const LatticeSystem& sys, const std::vector<Site>& sites);

/// -1/2 log det M + 1/2 J^T M^-1 J.
cplx log_partition(const LatticeSystem& sys);
/// log Z[J] / Z[0] = 1/2 J^T M^-1 J.
cplx normalized_log_partition(const LatticeSystem& sys);

/// |<a b>_full - (<a b>_free + order2)| / |<a b>_free| on one grid.
double perturbative_vs_exact(const OscillatorConfig& cfg, const TimeGrid& grid, Site a, Site b,
                             cplx order2_value, const AssembleOptions& options = {});

/// On-shell propagator exponent evaluated as a lattice quadratic form.
model::ComplexWeight onshell_exponent(const model::HybridPaths& paths, const OscillatorConfig& cfg);

/// Ratio (lattice moment) / (continuum propagator) per species.
double species_normalization(Species s);

}  // namespace cqosc::lattice
