#pragma once

// Langevin sampler for the classical sector. The real part of the action is
// an Onsager-Machlup weight for
//
//     q'' + wc^2 q + a Qbar(t) = xi(t),   <xi(t) xi(t')> = D2 delta(t - t'),
//
// integrated here with a symplectic Euler step on (q, p = q').

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cqosc/model.hpp"

namespace cqosc::lattice {

struct LangevinOptions {
    double q0 = 0.0;
    double p0 = 0.0;
    std::optional<model::Path> qbar_forcing;
    std::uint64_t seed = 0;
    std::size_t n_traj = 1;
    /// UnstableStep is raised when dt * wc exceeds this.
    double max_step_ratio = 0.1;
    /// Number of trajectories kept in full (the first ones by index).
    std::size_t keep_trajectories = 0;
    /// Node pairs (i, j) whose covariance <q_i q_j> is accumulated.
    std::vector<std::pair<std::size_t, std::size_t>> covariance_pairs;
};

struct PairMoment {
    std::size_t i = 0;
    std::size_t j = 0;
    double mean = 0.0;            ///< <q_i q_j> (raw second moment)
    double standard_error = 0.0;
};

struct LangevinEnsemble {
    model::TimeGrid grid{0.0, 1.0, 4};
    std::size_t n_traj = 0;
    std::uint64_t seed = 0;
    std::vector<model::Path> trajectories;
    std::vector<double> mean_q;
    std::vector<double> var_q;
    std::vector<double> mean_energy;
    std::vector<double> var_energy;
    std::vector<PairMoment> pairs;
    /// Mean over trajectories of the least-squares slope of E(t), and its standard error.
    double energy_slope = 0.0;
    double energy_slope_se = 0.0;
};

/// Standard normal variate for (seed, trajectory, step); counter based, so
/// streams do not depend on evaluation order.
double gaussian_variate(std::uint64_t seed, std::uint64_t traj, std::uint64_t step);

/// Threads used for ensembles: CQOSC_THREADS if set, else hardware concurrency.
unsigned worker_threads();

LangevinEnsemble langevin_sample(const model::OscillatorConfig& cfg, const model::TimeGrid& grid,
                                 const LangevinOptions& options);

/// `t,traj_0,traj_1,...` with 17 significant digits.
std::string trajectories_to_csv(const LangevinEnsemble& e);
/// `t,mean_q,var_q,mean_energy,var_energy`.
std::string energy_table_to_csv(const LangevinEnsemble& e);

}  // namespace cqosc::lattice
