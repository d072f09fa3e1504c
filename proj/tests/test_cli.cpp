#include <doctest.h>

#include <cmath>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "cqosc/cli.hpp"
#include "cqosc/mpp.hpp"
#include "test_util.hpp"

using namespace cqosc;
using testutil::read_csv;
using testutil::slurp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run_cli(const std::string& command, const fs::path& dir, const std::string& config,
                const std::vector<std::string>& extra = {}) {
    const fs::path cfg = dir / (command + ".ini");
    testutil::spit(cfg, config);
    std::vector<std::string> args{"cqosc", command, "--config", cfg.string(), "--out", (dir / "out").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

const char* kReference = R"([oscillator]
omega_c = 1
omega_q = 2.5
alpha = 0.1
d2 = 4

[grid]
t_i = 0
t_f = 2
n = 1000

[mpp]
order = 0
q_i = 0
qdot_i = 0
qddot_i = 0
q_f = 1
plus_i = 0.2
minus_i = -0.1
plus_f = 0.5
minus_f = 0.3
)";

}  // namespace

TEST_CASE("mpp command") {
    const auto dir = testutil::fresh_dir("cli_mpp");
    const auto r = run_cli("mpp", dir, kReference);
    REQUIRE(r.code == 0);
    const auto q = read_csv(dir / "out/q.csv");
    REQUIRE(q.size() == 1000);
    const double den = std::sin(2.0) - 2.0 * std::cos(2.0);
    for (const auto& row : q) CHECK(std::abs(row[1] - (std::sin(row[0]) - row[0] * std::cos(row[0])) / den) < 1e-10);
    const auto manifest = nlohmann::json::parse(slurp(dir / "out/mpp_manifest.json"));
    CHECK(manifest["status"] == "pass");
    CHECK(manifest["config"]["oscillator"]["omega_q"] == "2.5");
    CHECK(manifest["input_sha256"].get<std::string>().size() == 64);

    SUBCASE("byte-identical reruns") {
        const std::string first = slurp(dir / "out/q_plus.csv") + slurp(dir / "out/mpp_manifest.json");
        REQUIRE(run_cli("mpp", dir, kReference).code == 0);
        CHECK(first == slurp(dir / "out/q_plus.csv") + slurp(dir / "out/mpp_manifest.json"));
    }
    SUBCASE("alpha = 0 gives the free interpolant") {
        std::string text = kReference;
        text.replace(text.find("alpha = 0.1"), 11, "alpha = 0");
        REQUIRE(run_cli("mpp", dir, text).code == 0);
        const auto qp = read_csv(dir / "out/q_plus.csv");
        const model::TimeGrid g(0.0, 2.0, 1000);
        const auto free = mpp::free_quantum_interpolant(g, 0.2, 0.5, 2.5);
        for (std::size_t k = 0; k < g.n(); ++k) CHECK(qp[k][1] == free[k]);
    }
}

TEST_CASE("config errors") {
    const auto dir = testutil::fresh_dir("cli_errors");
    const auto r = run_cli("mpp", dir, "[oscillator]\nomega_c = one\n");
    CHECK(r.code == 2);
    const auto err = nlohmann::json::parse(r.err);
    CHECK(err["error"] == "ConfigError");
    CHECK(run_cli("mpp", dir, "this is [not an ini").code == 2);
    CHECK(run_cli("langevin", dir, "[oscillator]\nomega_c=1\nomega_q=1\nd2=-1\n[grid]\nt_f=1\nn=100\n").code == 2);

    std::vector<const char*> argv{"cqosc", "mpp"};
    std::ostringstream out, e2;
    CHECK(cli::run(2, argv.data(), out, e2) == 2);
}

TEST_CASE("solver errors carry their names") {
    const auto dir = testutil::fresh_dir("cli_solver");
    std::string text = kReference;
    text.replace(text.find("omega_q = 2.5"), 13, "omega_q = 1.0");
    text.replace(text.find("order = 0"), 9, "order = 1");
    const auto r = run_cli("mpp", dir, text);
    CHECK(r.code == 1);
    CHECK(nlohmann::json::parse(r.err)["error"] == "Resonance");
}

TEST_CASE("correlators command") {
    const auto dir = testutil::fresh_dir("cli_corr");
    const std::string base = R"([oscillator]
omega_c = 1
omega_q = 1.5
alpha = 0.3
d2 = 1
[correlators]
kind = free
tau_min = -4
tau_max = 4
n_tau = 81
eta = 0.5
)";
    REQUIRE(run_cli("correlators", dir, base).code == 0);
    const auto plus = read_csv(dir / "out/quantum_plus.csv");
    const auto minus = read_csv(dir / "out/quantum_minus.csv");
    const auto cls = read_csv(dir / "out/classical.csv");
    double gap = 0.0;
    for (std::size_t k = 0; k < plus.size(); ++k) {
        gap = std::max(gap, std::hypot(minus[k][1] - plus[k][1], minus[k][2] + plus[k][2]));
        const auto& mirror = cls[cls.size() - 1 - k];
        CHECK(cls[k][1] == mirror[1]);
        CHECK(cls[k][2] == mirror[2]);
    }
    CHECK(gap < 1e-10);

    SUBCASE("corrected scan at alpha = 0 equals the free scan") {
        std::string free0 = base;
        free0.replace(free0.find("alpha = 0.3"), 11, "alpha = 0");
        REQUIRE(run_cli("correlators", dir, free0).code == 0);
        const auto free_cls = read_csv(dir / "out/classical.csv");
        const auto free_plus = read_csv(dir / "out/quantum_plus.csv");
        std::string corr = free0;
        corr.replace(corr.find("kind = free"), 11, "kind = corrected");
        corr += "window_t_i = 0\nwindow_t_f = 20\nwindow_n = 201\n";
        REQUIRE(run_cli("correlators", dir, corr).code == 0);
        // Corrected scans evaluate at t - s with t = s + tau, so only roundoff differs.
        const auto qq = read_csv(dir / "out/corrected_qq.csv");
        const auto qp = read_csv(dir / "out/corrected_QQ_plus.csv");
        REQUIRE(qq.size() == free_cls.size());
        for (std::size_t k = 0; k < qq.size(); ++k) {
            CHECK(qq[k][0] == free_cls[k][0]);
            CHECK(std::hypot(qq[k][1] - free_cls[k][1], qq[k][2] - free_cls[k][2]) < 1e-12);
            CHECK(std::hypot(qp[k][1] - free_plus[k][1], qp[k][2] - free_plus[k][2]) < 1e-12);
        }
        const auto side = nlohmann::json::parse(slurp(dir / "out/corrected.json"));
        CHECK(side["alpha"] == "0");
    }
}

TEST_CASE("lattice_check command") {
    const auto dir = testutil::fresh_dir("cli_lattice");
    const std::string text = R"([oscillator]
omega_c = 1
omega_q = 2
alpha = 0
d2 = 1
[grid]
t_i = 0
t_f = 20
n = 201
[lattice_check]
tau = 1
eta = 1
alphas = 0.2, 0.1, 0.05
)";
    const auto r = run_cli("lattice_check", dir, text);
    CHECK(r.code == 0);
    const auto rep = nlohmann::json::parse(slurp(dir / "out/lattice_check.json"));
    CHECK(rep["free"]["q"]["pass"] == true);
    CHECK(std::abs(std::stod(rep["sweep"]["q"]["slope"].get<std::string>()) - 4.0) < 0.5);
    CHECK(std::abs(std::stod(rep["sweep"]["Q+"]["slope"].get<std::string>()) - 4.0) < 0.5);
}

TEST_CASE("langevin command") {
    const auto dir = testutil::fresh_dir("cli_langevin");
    const std::string text = R"([oscillator]
omega_c = 1
omega_q = 1
alpha = 0
d2 = 0
[grid]
t_f = 5
n = 5001
[langevin]
q0 = 1
n_traj = 8
keep = 2
)";
    REQUIRE(run_cli("langevin", dir, text, {"--seed", "3"}).code == 0);
    const auto energy = read_csv(dir / "out/energy.csv");
    for (const auto& row : energy) CHECK(std::abs(row[3] - 0.5) < 1e-3);
    const std::string first = slurp(dir / "out/langevin_summary.json");
    REQUIRE(run_cli("langevin", dir, text, {"--seed", "3"}).code == 0);
    CHECK(first == slurp(dir / "out/langevin_summary.json"));

    std::string unstable = text;
    unstable.replace(unstable.find("n = 5001"), 8, "n = 11");
    const auto r = run_cli("langevin", dir, unstable);
    CHECK(r.code == 1);
    const auto err = nlohmann::json::parse(r.err);
    CHECK(err["error"] == "UnstableStep");
    CHECK(err.contains("hint"));
}

TEST_CASE("decoherence_scan command") {
    const auto dir = testutil::fresh_dir("cli_deco");
    const std::string text = R"([oscillator]
omega_c = 1
omega_q = 1
alpha = 0.5
d2 = 1
[grid]
t_f = 1.3
n = 401
[decoherence]
delta_min = -2
delta_max = 2
n = 21
)";
    REQUIRE(run_cli("decoherence_scan", dir, text).code == 0);
    const auto rows = read_csv(dir / "out/decoherence_surface.csv");
    CHECK(rows.size() == 441);
    double peak = 0.0;
    for (const auto& row : rows) {
        if (row[0] == 0.0 && row[1] == 0.0) peak = row[3];
        else CHECK(row[3] < 1.0);
    }
    CHECK(peak == 1.0);
}

#ifdef CQOSC_CLI_PATH
TEST_CASE("installed executable") {
    const auto dir = testutil::fresh_dir("cli_exe");
    testutil::spit(dir / "bad.ini", "[oscillator]\nomega_c = x\n");
    const std::string cmd = std::string(CQOSC_CLI_PATH) + " mpp --config " + (dir / "bad.ini").string() + " --out " +
                            (dir / "o").string() + " 2> " + (dir / "err.txt").string();
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    CHECK(slurp(dir / "err.txt").find("\"error\":\"ConfigError\"") != std::string::npos);
}
#endif
