#include "cqosc/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace cqosc::io {

std::string decimal(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::InvalidArgument, "SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

json to_json(const model::OscillatorConfig& cfg) {
    return {{"omega_c", decimal(cfg.omega_c)},
            {"omega_q", decimal(cfg.omega_q)},
            {"alpha", decimal(cfg.alpha)},
            {"d2", decimal(cfg.d2)},
            {"d0", decimal(cfg.d0())},
            {"action_convention", model::to_string(cfg.action_convention)}};
}

json to_json(const model::TimeGrid& grid) {
    return {{"t_i", decimal(grid.t_i())}, {"t_f", decimal(grid.t_f())}, {"n", grid.n()}, {"dt", decimal(grid.dt())}};
}

json to_json(const mpp::MppSolution& sol) {
    json j;
    j["order"] = sol.order;
    j["coefficients"] = {{"a1", decimal(sol.coefficients.a1)},
                         {"a2", decimal(sol.coefficients.a2)},
                         {"b1", decimal(sol.coefficients.b1)},
                         {"b2", decimal(sol.coefficients.b2)}};
    j["regime"] = sol.regime ? json(mpp::to_string(*sol.regime)) : json(nullptr);
    j["config"] = to_json(sol.config);
    j["grid"] = to_json(sol.q.grid());
    return j;
}

json error_json(const Error& e) { return {{"error", std::string(e.name())}, {"message", e.what()}}; }

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::InvalidArgument, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cqosc::io
