#include "cqosc/langevin.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <thread>

namespace cqosc::lattice {

namespace {

constexpr std::size_t kBlock = 512;

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Two independent normals per (seed, traj, pair index) via Box-Muller.
std::pair<double, double> normal_pair(std::uint64_t seed, std::uint64_t traj, std::uint64_t m) {
    const std::uint64_t key = mix(mix(seed) ^ (traj * 0xd1b54a32d192ed03ULL)) ^ (m * 0x8cb92ba72f3d8dd7ULL);
    const std::uint64_t h1 = mix(key);
    const std::uint64_t h2 = mix(key ^ 0x5851f42d4c957f2dULL);
    const double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
}

struct BlockSums {
    std::vector<double> q, q2, e, e2;
    std::vector<double> pair, pair2;
    double slope = 0.0, slope2 = 0.0;
    std::vector<std::vector<double>> kept;
};

}  // namespace

double gaussian_variate(std::uint64_t seed, std::uint64_t traj, std::uint64_t step) {
    const auto [a, b] = normal_pair(seed, traj, step / 2);
    return step % 2 ? b : a;
}

unsigned worker_threads() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CQOSC_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
    }
    return hw;
}

LangevinEnsemble langevin_sample(const model::OscillatorConfig& cfg, const model::TimeGrid& grid,
                                 const LangevinOptions& options) {
    if (!std::isfinite(cfg.omega_c) || !std::isfinite(cfg.alpha) || !std::isfinite(cfg.d2) ||
        cfg.omega_c < 0.0 || cfg.d2 < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "langevin needs finite wc >= 0 and d2 >= 0");
    }
    if (options.n_traj < 1) throw Error(ErrorCode::InvalidArgument, "n_traj must be >= 1");
    if (!std::isfinite(options.q0) || !std::isfinite(options.p0)) {
        throw Error(ErrorCode::InvalidArgument, "initial conditions must be finite");
    }
    const double dt = grid.dt();
    if (dt * cfg.omega_c > options.max_step_ratio) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "dt*wc = %g exceeds %g; reduce dt (increase n)",
                      dt * cfg.omega_c, options.max_step_ratio);
        throw Error(ErrorCode::UnstableStep, msg);
    }
    if (options.qbar_forcing && !(options.qbar_forcing->grid() == grid)) {
        throw Error(ErrorCode::GridMismatch, "forcing path must share the sampling grid");
    }
    const std::size_t n = grid.n();
    for (const auto& [i, j] : options.covariance_pairs) {
        if (i >= n || j >= n) throw Error(ErrorCode::InvalidArgument, "covariance node out of range");
    }

    std::vector<double> force(n, 0.0);
    if (options.qbar_forcing) {
        for (std::size_t k = 0; k < n; ++k) force[k] = -cfg.alpha * (*options.qbar_forcing)[k];
    }
    // Least-squares slope weights: slope = sum_k c_k E_k.
    std::vector<double> c(n);
    {
        double tbar = 0.0;
        for (std::size_t k = 0; k < n; ++k) tbar += grid.time(k);
        tbar /= static_cast<double>(n);
        double stt = 0.0;
        for (std::size_t k = 0; k < n; ++k) stt += (grid.time(k) - tbar) * (grid.time(k) - tbar);
        for (std::size_t k = 0; k < n; ++k) c[k] = (grid.time(k) - tbar) / stt;
    }

    const double w2 = cfg.omega_c * cfg.omega_c;
    const double kick = std::sqrt(cfg.d2 * dt);
    const std::size_t n_pairs = options.covariance_pairs.size();
    const std::size_t n_blocks = (options.n_traj + kBlock - 1) / kBlock;
    std::vector<BlockSums> blocks(n_blocks);

    auto run_block = [&](std::size_t b) {
        BlockSums& s = blocks[b];
        s.q.assign(n, 0.0);
        s.q2.assign(n, 0.0);
        s.e.assign(n, 0.0);
        s.e2.assign(n, 0.0);
        s.pair.assign(n_pairs, 0.0);
        s.pair2.assign(n_pairs, 0.0);
        std::vector<double> qs(n);
        const std::size_t first = b * kBlock;
        const std::size_t last = std::min(options.n_traj, first + kBlock);
        for (std::size_t traj = first; traj < last; ++traj) {
            double q = options.q0;
            double p = options.p0;
            double slope = 0.0;
            double spare = 0.0;
            for (std::size_t k = 0;; ++k) {
                const double energy = 0.5 * p * p + 0.5 * w2 * q * q;
                qs[k] = q;
                s.q[k] += q;
                s.q2[k] += q * q;
                s.e[k] += energy;
                s.e2[k] += energy * energy;
                slope += c[k] * energy;
                if (k + 1 == n) break;
                double xi;
                if (k % 2 == 0) {
                    const auto pr = normal_pair(options.seed, traj, k / 2);
                    xi = pr.first;
                    spare = pr.second;
                } else {
                    xi = spare;
                }
                p += dt * (-w2 * q + force[k]) + kick * xi;
                q += dt * p;
            }
            s.slope += slope;
            s.slope2 += slope * slope;
            for (std::size_t m = 0; m < n_pairs; ++m) {
                const double v = qs[options.covariance_pairs[m].first] * qs[options.covariance_pairs[m].second];
                s.pair[m] += v;
                s.pair2[m] += v * v;
            }
            if (traj < options.keep_trajectories) s.kept.push_back(qs);
        }
    };

    const unsigned threads = std::min<std::size_t>(worker_threads(), n_blocks);
    if (threads <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t b; (b = next.fetch_add(1)) < n_blocks;) run_block(b);
            });
        }
        for (auto& th : pool) th.join();
    }

    // Reduce in block order so results do not depend on scheduling.
    LangevinEnsemble out;
    out.grid = grid;
    out.n_traj = options.n_traj;
    out.seed = options.seed;
    out.mean_q.assign(n, 0.0);
    out.var_q.assign(n, 0.0);
    out.mean_energy.assign(n, 0.0);
    out.var_energy.assign(n, 0.0);
    std::vector<double> pair(n_pairs, 0.0), pair2(n_pairs, 0.0);
    double slope = 0.0, slope2 = 0.0;
    for (auto& s : blocks) {
        for (std::size_t k = 0; k < n; ++k) {
            out.mean_q[k] += s.q[k];
            out.var_q[k] += s.q2[k];
            out.mean_energy[k] += s.e[k];
            out.var_energy[k] += s.e2[k];
        }
        for (std::size_t m = 0; m < n_pairs; ++m) {
            pair[m] += s.pair[m];
            pair2[m] += s.pair2[m];
        }
        slope += s.slope;
        slope2 += s.slope2;
        for (auto& traj : s.kept) out.trajectories.emplace_back(grid, std::move(traj));
    }
    const double nt = static_cast<double>(options.n_traj);
    auto finish = [nt](double sum, double sum2, double& mean, double& var) {
        mean = sum / nt;
        var = nt > 1.0 ? std::max(0.0, (sum2 - nt * mean * mean) / (nt - 1.0)) : 0.0;
    };
    for (std::size_t k = 0; k < n; ++k) {
        finish(out.mean_q[k], out.var_q[k], out.mean_q[k], out.var_q[k]);
        finish(out.mean_energy[k], out.var_energy[k], out.mean_energy[k], out.var_energy[k]);
    }
    for (std::size_t m = 0; m < n_pairs; ++m) {
        double mean, var;
        finish(pair[m], pair2[m], mean, var);
        out.pairs.push_back({options.covariance_pairs[m].first, options.covariance_pairs[m].second, mean,
                             std::sqrt(var / nt)});
    }
    double var;
    finish(slope, slope2, out.energy_slope, var);
    out.energy_slope_se = std::sqrt(var / nt);
    return out;
}

std::string trajectories_to_csv(const LangevinEnsemble& e) {
    std::string out = "t";
    for (std::size_t j = 0; j < e.trajectories.size(); ++j) out += ",traj_" + std::to_string(j);
    out += '\n';
    char buf[64];
    for (std::size_t k = 0; k < e.grid.n(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", e.grid.time(k));
        out += buf;
        for (const auto& p : e.trajectories) {
            std::snprintf(buf, sizeof buf, ",%.17g", p[k]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::string energy_table_to_csv(const LangevinEnsemble& e) {
    std::string out = "t,mean_q,var_q,mean_energy,var_energy\n";
    char buf[160];
    for (std::size_t k = 0; k < e.grid.n(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", e.grid.time(k), e.mean_q[k],
                      e.var_q[k], e.mean_energy[k], e.var_energy[k]);
        out += buf;
    }
    return out;
}

}  // namespace cqosc::lattice
