#pragma once

// Command implementations behind the `cqosc` executable. Each command reads a
// validated RunConfig, writes its files into out_dir and returns whether all
// requested checks passed.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "cqosc/model.hpp"

namespace cqosc::cli {

struct RunConfig {
    std::string command;
    std::string text;                    ///< config file contents, hashed into manifests
    boost::property_tree::ptree tree;
    model::OscillatorConfig oscillator;
    std::optional<model::TimeGrid> grid;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = ".";
};

/// Parse INI text. Throws ConfigError on malformed input or invalid values.
RunConfig parse_config(const std::string& command, const std::string& text,
                       std::optional<std::uint64_t> seed = std::nullopt,
                       std::optional<std::filesystem::path> out_dir = std::nullopt);

struct CommandResult {
    bool passed = true;
    std::vector<std::string> files;
};

CommandResult cmd_mpp(const RunConfig& rc);
CommandResult cmd_correlators(const RunConfig& rc);
CommandResult cmd_lattice_check(const RunConfig& rc);
CommandResult cmd_langevin(const RunConfig& rc);
CommandResult cmd_decoherence_scan(const RunConfig& rc);

/// Full CLI: exit 0 on success, 1 on solver/tolerance failure, 2 on config errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cqosc::cli
