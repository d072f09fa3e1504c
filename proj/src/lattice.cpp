#include "cqosc/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace cqosc::lattice {

namespace {

constexpr cplx kI{0.0, 1.0};

using Triplet = Eigen::Triplet<cplx, long>;

SparseMatrix diagonal(const Eigen::VectorXd& d) {
    SparseMatrix out(d.size(), d.size());
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(d.size()));
    for (long k = 0; k < d.size(); ++k) t.emplace_back(k, k, cplx(d(k), 0.0));
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

void add_block(std::vector<Triplet>& out, const SparseMatrix& block, long row_offset,
               long col_offset, cplx scale) {
    if (scale == cplx(0.0, 0.0)) return;
    for (long c = 0; c < block.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(block, c); it; ++it) {
            out.emplace_back(row_offset + it.row(), col_offset + it.col(), scale * it.value());
        }
    }
}

double inf_norm(const SparseMatrix& m) {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(m.rows());
    for (long c = 0; c < m.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(m, c); it; ++it) rows(it.row()) += std::abs(it.value());
    }
    return rows.size() ? rows.maxCoeff() : 0.0;
}

}  // namespace

std::string to_string(Species s) {
    switch (s) {
        case Species::Classical: return "q";
        case Species::Plus: return "Q+";
        case Species::Minus: return "Q-";
    }
    return "?";
}

double species_normalization(Species s) {
    const double inv_two_pi = 0.5 / std::numbers::pi;
    return s == Species::Classical ? inv_two_pi : -inv_two_pi;
}

Operators build_operators(const TimeGrid& grid, double omega_c) {
    const long n = static_cast<long>(grid.n());
    Operators ops;
    const auto w = grid.trapezoid_weights();
    ops.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), n);

    std::vector<Triplet> t;
    const double inv_dt = 1.0 / grid.dt();
    for (long k = 0; k + 1 < n; ++k) {
        t.emplace_back(k, k, inv_dt);
        t.emplace_back(k + 1, k + 1, inv_dt);
        t.emplace_back(k, k + 1, -inv_dt);
        t.emplace_back(k + 1, k, -inv_dt);
    }
    ops.kinetic.resize(n, n);
    ops.kinetic.setFromTriplets(t.begin(), t.end());

    t.clear();
    for (const auto& e : model::second_derivative_stencil(grid)) {
        t.emplace_back(static_cast<long>(e.row), static_cast<long>(e.col), e.value);
    }
    for (long k = 0; k < n; ++k) t.emplace_back(k, k, omega_c * omega_c);
    ops.eom.resize(n, n);
    ops.eom.setFromTriplets(t.begin(), t.end());
    return ops;
}

// LatticeSystem ---------------------------------------------------------------

LatticeSystem LatticeSystem::assemble(const OscillatorConfig& cfg, const TimeGrid& grid,
                                      const AssembleOptions& options) {
    cfg.validate();
    if (grid.n() < 8) throw Error(ErrorCode::GridTooSmall, "lattice assembly needs at least 8 nodes");
    const long n = static_cast<long>(grid.n());
    const Operators ops = build_operators(grid, cfg.omega_c);
    const SparseMatrix w = diagonal(ops.weights);
    const SparseMatrix lt = ops.eom.transpose();
    const SparseMatrix lt_w = lt * w;
    const SparseMatrix lt_w_l = lt_w * ops.eom;
    const SparseMatrix unitary = ops.kinetic - cplx(cfg.omega_q * cfg.omega_q) * w;

    const double a = cfg.alpha;
    const double d2 = cfg.d2;
    const double u = options.unitary_scale;
    const long qo = 0, po = n, mo = 2 * n;

    std::vector<Triplet> t;
    // Unitary parts: i(1/2 Qdot^2 - 1/2 w^2 Q^2) on Q+, the negative on Q-.
    add_block(t, unitary, po, po, -kI * u);
    add_block(t, unitary, mo, mo, kI * u);
    // Diffusion of the classical oscillator: (1/D2) L^T W L.
    add_block(t, lt_w_l, qo, qo, 1.0 / d2);

    const double quad = a * a / (4.0 * d2);
    if (cfg.action_convention == model::ActionConvention::Saturated) {
        add_block(t, w, po, po, quad);
        add_block(t, w, mo, mo, quad);
    } else {
        const double deco = cfg.d0() * a * a;
        add_block(t, w, po, po, quad + deco);
        add_block(t, w, mo, mo, quad + deco);
        add_block(t, w, po, mo, quad - deco);
        add_block(t, w, mo, po, quad - deco);
    }

    if (options.include_interaction) {
        // -q^T [ +-i a W + (a / 2 D2) L^T W ] Q+-
        const SparseMatrix wt = w;
        add_block(t, wt, qo, po, kI * a);
        add_block(t, wt, po, qo, kI * a);
        add_block(t, wt, qo, mo, -kI * a);
        add_block(t, wt, mo, qo, -kI * a);
        const SparseMatrix w_l = w * ops.eom;
        add_block(t, lt_w, qo, po, a / (2.0 * d2));
        add_block(t, w_l, po, qo, a / (2.0 * d2));
        add_block(t, lt_w, qo, mo, a / (2.0 * d2));
        add_block(t, w_l, mo, qo, a / (2.0 * d2));
    }

    LatticeSystem sys;
    sys.m_.resize(3 * n, 3 * n);
    sys.m_.setFromTriplets(t.begin(), t.end());
    // Sparse products leave roundoff-level asymmetry in L^T W L; average it away.
    sys.m_ = 0.5 * (sys.m_ + SparseMatrix(sys.m_.transpose()));
    sys.m_.prune(cplx(0.0, 0.0));
    sys.j_ = Eigen::VectorXcd::Zero(3 * n);
    sys.regulator_ = Eigen::VectorXcd::Zero(3 * n);
    if (options.eta) {
        if (!(*options.eta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "eta must be >= 0");
        for (long k = 0; k < n; ++k) sys.regulator_(qo + k) = kI * (*options.eta / d2) * ops.weights(k);
    } else {
        const double tiny = 1e-8 * inf_norm(sys.m_);
        for (long k = 0; k < n; ++k) sys.regulator_(qo + k) = kI * tiny;
    }
    sys.grid_ = grid;
    sys.cfg_ = cfg;
    sys.includes_interaction_ = options.include_interaction;
    return sys;
}

LatticeSystem LatticeSystem::from_matrix(SparseMatrix m, Eigen::VectorXcd j) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw Error(ErrorCode::InvalidArgument, "lattice matrix must be square and non-empty");
    }
    LatticeSystem sys;
    sys.m_ = std::move(m);
    sys.j_ = j.size() ? std::move(j) : Eigen::VectorXcd::Zero(sys.m_.rows());
    if (sys.j_.size() != sys.m_.rows()) throw Error(ErrorCode::InvalidArgument, "source size mismatch");
    sys.regulator_ = Eigen::VectorXcd::Zero(sys.m_.rows());
    return sys;
}

void LatticeSystem::set_source(Eigen::VectorXcd j) {
    if (j.size() != dim()) throw Error(ErrorCode::InvalidArgument, "source size mismatch");
    j_ = std::move(j);
}

const TimeGrid& LatticeSystem::grid() const {
    if (!grid_) throw Error(ErrorCode::InvalidArgument, "system has no time grid");
    return *grid_;
}

const OscillatorConfig& LatticeSystem::config() const {
    if (!cfg_) throw Error(ErrorCode::InvalidArgument, "system has no oscillator config");
    return *cfg_;
}

long LatticeSystem::index(Site s) const {
    const long n = static_cast<long>(grid().n());
    if (s.node >= grid().n()) throw Error(ErrorCode::InvalidArgument, "site node out of range");
    return static_cast<long>(s.species) * n + static_cast<long>(s.node);
}

cplx LatticeSystem::quadratic_action(const Eigen::VectorXcd& y) const {
    if (y.size() != dim()) throw Error(ErrorCode::GridMismatch, "vector size does not match system");
    const Eigen::VectorXcd my = m_ * y;
    return -0.5 * (y.transpose() * my)(0) + (j_.transpose() * y)(0);
}

double LatticeSystem::asymmetry() const {
    const SparseMatrix diff = m_ - SparseMatrix(m_.transpose());
    double worst = 0.0;
    for (long c = 0; c < diff.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(diff, c); it; ++it) worst = std::max(worst, std::abs(it.value()));
    }
    return worst;
}

std::string LatticeSystem::dump_triplets() const {
    std::string out;
    char buf[128];
    for (long c = 0; c < m_.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(m_, c); it; ++it) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g %.17g\n", it.row(), it.col(),
                          it.value().real(), it.value().imag());
            out += buf;
        }
    }
    return out;
}

Eigen::VectorXcd pack(const model::HybridPaths& paths) {
    const long n = static_cast<long>(paths.grid().n());
    Eigen::VectorXcd y(3 * n);
    for (long k = 0; k < n; ++k) {
        y(k) = paths.q[static_cast<std::size_t>(k)];
        y(n + k) = paths.q_plus[static_cast<std::size_t>(k)];
        y(2 * n + k) = paths.q_minus[static_cast<std::size_t>(k)];
    }
    return y;
}

// GaussianSolver --------------------------------------------------------------

struct GaussianSolver::Impl {
    long n = 0;
    long kl = 0;
    long ku = 0;
    long ldab = 0;
    std::vector<long> perm;  // perm[original] = banded index
    std::vector<cplx> ab;
    std::vector<lapack_int> ipiv;
};

namespace {

std::pair<long, long> bandwidths(const SparseMatrix& m, const std::vector<long>& perm) {
    long kl = 0, ku = 0;
    for (long c = 0; c < m.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
            const long d = perm[static_cast<std::size_t>(it.row())] - perm[static_cast<std::size_t>(c)];
            kl = std::max(kl, d);
            ku = std::max(ku, -d);
        }
    }
    return {kl, ku};
}

}  // namespace

GaussianSolver::GaussianSolver(const LatticeSystem& sys) : impl_(std::make_unique<Impl>()) {
    auto& s = *impl_;
    s.n = sys.dim();
    std::vector<long> identity(static_cast<std::size_t>(s.n));
    for (long i = 0; i < s.n; ++i) identity[static_cast<std::size_t>(i)] = i;
    s.perm = identity;
    auto [kl, ku] = bandwidths(sys.m(), identity);
    if (sys.has_layout()) {
        // Node-major ordering keeps the q-Q couplings inside a narrow band.
        const long nodes = static_cast<long>(sys.grid().n());
        std::vector<long> inter(static_cast<std::size_t>(s.n));
        for (long i = 0; i < s.n; ++i) inter[static_cast<std::size_t>(i)] = (i % nodes) * 3 + i / nodes;
        const auto [kl2, ku2] = bandwidths(sys.m(), inter);
        if (kl2 + ku2 < kl + ku) {
            s.perm = std::move(inter);
            kl = kl2;
            ku = ku2;
        }
    }
    s.kl = kl;
    s.ku = ku;
    s.ldab = 2 * kl + ku + 1;
    s.ab.assign(static_cast<std::size_t>(s.ldab * s.n), cplx(0.0, 0.0));
    auto at = [&](long r, long c) -> cplx& {
        return s.ab[static_cast<std::size_t>(kl + ku + r - c + c * s.ldab)];
    };
    const auto& m = sys.m();
    for (long c = 0; c < m.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
            at(s.perm[static_cast<std::size_t>(it.row())], s.perm[static_cast<std::size_t>(c)]) += it.value();
        }
    }
    for (long i = 0; i < s.n; ++i) {
        const long p = s.perm[static_cast<std::size_t>(i)];
        at(p, p) += sys.regulator()(i);
    }
    s.ipiv.assign(static_cast<std::size_t>(s.n), 0);
    const lapack_int info = LAPACKE_zgbtrf(LAPACK_COL_MAJOR, static_cast<lapack_int>(s.n),
                                           static_cast<lapack_int>(s.n), static_cast<lapack_int>(kl),
                                           static_cast<lapack_int>(ku), s.ab.data(),
                                           static_cast<lapack_int>(s.ldab), s.ipiv.data());
    if (info != 0) {
        throw Error(ErrorCode::SingularSystem, "banded LU failed (info=" + std::to_string(info) + ")");
    }
    double biggest = 0.0, smallest = INFINITY;
    for (long j = 0; j < s.n; ++j) {
        const double u = std::abs(s.ab[static_cast<std::size_t>(kl + ku + j * s.ldab)]);
        biggest = std::max(biggest, u);
        smallest = std::min(smallest, u);
    }
    if (!(smallest > 1e-15 * biggest)) {
        throw Error(ErrorCode::SingularSystem, "near-zero pivot in lattice factorization");
    }
}

GaussianSolver::~GaussianSolver() = default;
GaussianSolver::GaussianSolver(GaussianSolver&&) noexcept = default;
GaussianSolver& GaussianSolver::operator=(GaussianSolver&&) noexcept = default;

Eigen::VectorXcd GaussianSolver::solve(const Eigen::VectorXcd& rhs) const {
    const auto& s = *impl_;
    if (rhs.size() != s.n) throw Error(ErrorCode::InvalidArgument, "rhs size mismatch");
    std::vector<cplx> b(static_cast<std::size_t>(s.n));
    for (long i = 0; i < s.n; ++i) b[static_cast<std::size_t>(s.perm[static_cast<std::size_t>(i)])] = rhs(i);
    const lapack_int info = LAPACKE_zgbtrs(
        LAPACK_COL_MAJOR, 'N', static_cast<lapack_int>(s.n), static_cast<lapack_int>(s.kl),
        static_cast<lapack_int>(s.ku), 1, s.ab.data(), static_cast<lapack_int>(s.ldab),
        s.ipiv.data(), b.data(), static_cast<lapack_int>(s.n));
    if (info != 0) throw Error(ErrorCode::SingularSystem, "banded solve failed");
    Eigen::VectorXcd x(s.n);
    for (long i = 0; i < s.n; ++i) x(i) = b[static_cast<std::size_t>(s.perm[static_cast<std::size_t>(i)])];
    return x;
}

Eigen::VectorXcd GaussianSolver::column(long b) const {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(impl_->n);
    e(b) = 1.0;
    return solve(e);
}

// Canonical ordering makes moment(a, b) and moment(b, a) bit-identical.
cplx GaussianSolver::moment(long a, long b) const { return column(std::max(a, b))(std::min(a, b)); }

cplx GaussianSolver::log_det() const {
    const auto& s = *impl_;
    cplx acc(0.0, 0.0);
    long swaps = 0;
    for (long j = 0; j < s.n; ++j) {
        acc += std::log(s.ab[static_cast<std::size_t>(s.kl + s.ku + j * s.ldab)]);
        if (s.ipiv[static_cast<std::size_t>(j)] != j + 1) ++swaps;
    }
    double im = acc.imag() + (swaps % 2 ? std::numbers::pi : 0.0);
    im = std::remainder(im, 2.0 * std::numbers::pi);
    return {acc.real(), im};
}

// Free functions ----------------------------------------------------------------

cplx moment(const LatticeSystem& sys, long a, long b) {
    if (a < 0 || b < 0 || a >= sys.dim() || b >= sys.dim()) {
        throw Error(ErrorCode::InvalidArgument, "moment index out of range");
    }
    return GaussianSolver(sys).moment(a, b);
}

cplx moment(const LatticeSystem& sys, Site a, Site b) { return moment(sys, sys.index(a), sys.index(b)); }

MomentTable moment_table(const LatticeSystem& sys, const std::vector<Site>& sites) {
    const GaussianSolver solver(sys);
    MomentTable table;
    for (const Site& b : sites) {
        const long ib = sys.index(b);
        const Eigen::VectorXcd col = solver.column(ib);
        for (const Site& a : sites) {
            const long ia = sys.index(a);
            if (ia > ib) continue;
            table[{ia, ib}] = col(ia);
            table[{ib, ia}] = col(ia);
        }
    }
    return table;
}

cplx normalized_log_partition(const LatticeSystem& sys) {
    if (sys.j().isZero(0.0)) return {0.0, 0.0};
    const GaussianSolver solver(sys);
    const Eigen::VectorXcd x = solver.solve(sys.j());
    return 0.5 * (sys.j().transpose() * x)(0);
}

cplx log_partition(const LatticeSystem& sys) {
    const GaussianSolver solver(sys);
    cplx source(0.0, 0.0);
    if (!sys.j().isZero(0.0)) source = 0.5 * (sys.j().transpose() * solver.solve(sys.j()))(0);
    return -0.5 * solver.log_det() + source;
}

double perturbative_vs_exact(const OscillatorConfig& cfg, const TimeGrid& grid, Site a, Site b,
                             cplx order2_value, const AssembleOptions& options) {
    AssembleOptions full_opts = options;
    full_opts.include_interaction = true;
    AssembleOptions free_opts = options;
    free_opts.include_interaction = false;
    const LatticeSystem full = LatticeSystem::assemble(cfg, grid, full_opts);
    const LatticeSystem free = LatticeSystem::assemble(cfg, grid, free_opts);
    const cplx m_full = moment(full, a, b);
    const cplx m_free = moment(free, a, b);
    return std::abs(m_full - (m_free + order2_value)) / std::abs(m_free);
}

model::ComplexWeight onshell_exponent(const model::HybridPaths& paths, const OscillatorConfig& cfg) {
    OscillatorConfig saturated = cfg;
    saturated.action_convention = model::ActionConvention::Saturated;
    AssembleOptions opts;
    opts.include_interaction = true;
    opts.unitary_scale = 0.5;
    opts.eta = 0.0;
    const LatticeSystem sys = LatticeSystem::assemble(saturated, paths.grid(), opts);
    const cplx v = sys.quadratic_action(pack(paths));
    return {v.real(), v.imag()};
}

}  // namespace cqosc::lattice
