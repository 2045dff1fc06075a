#pragma once

// Configuration, dispatch and report rendering for the gprice command line.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gprice/errors.hpp"
#include "gprice/fgbm.hpp"
#include "gprice/grid.hpp"
#include "gprice/scenario.hpp"
#include "gprice/sublinear.hpp"

namespace gprice::cli {

using Json = nlohmann::ordered_json;

enum class Command { price, simulate, fgbm, cps, hedge, capacity };
enum class Format { json, csv };

const char* to_string(Command c);
const char* to_string(Format f);
std::optional<Command> parse_command(std::string_view s);
std::optional<Format> parse_format(std::string_view s);

struct ProblemConfig {
    ScalarFunction payoff = ScalarFunction::zero();
    double maturity = 1.0;
    double rate = 0.0;
    double spot = 1.0;
    double x_min = 0.0;
    double x_max = 1.0;

    bool operator==(const ProblemConfig&) const = default;
};

struct ControlConfig {
    std::vector<double> breakpoints{0.0};
    std::vector<double> sigma;
    std::vector<double> mu;

    bool operator==(const ControlConfig&) const = default;
};

struct SimulationConfig {
    std::size_t n_paths = 1000;
    std::size_t n_steps = 250;
    std::optional<double> s0;       // defaults to problem.spot
    std::optional<double> horizon;  // defaults to problem.maturity
    std::vector<ControlConfig> controls;  // empty: default constant family
    bool include_feedback = false;

    bool operator==(const SimulationConfig&) const = default;
};

struct FgbmConfig {
    double hurst = 0.5;
    double sigma = 0.0;
    double horizon = 1.0;
    std::size_t n_steps = 1024;
    std::size_t n_paths = 1;
    FgbmMethod method = FgbmMethod::automatic;
    std::optional<double> s0;  // set: simulate the asset S instead of B_H
    double drift = 0.0;

    bool operator==(const FgbmConfig&) const = default;
};

struct CpsConfig {
    double epsilon = 0.1;
    bool operator==(const CpsConfig&) const = default;
};

struct HedgeConfig {
    /// Shortfall threshold as a fraction of the ask value at the spot.
    double tolerance = 0.005;
    bool operator==(const HedgeConfig&) const = default;
};

struct CapacityConfig {
    double eta = 1.0;
    bool operator==(const CapacityConfig&) const = default;
};

struct FilesConfig {
    std::optional<std::string> input_path;
    std::optional<std::string> output_paths;
    std::optional<std::string> ask_surface;
    std::optional<std::string> bid_surface;
    std::optional<std::string> shadow_path;

    bool operator==(const FilesConfig&) const = default;
};

struct RunConfig {
    Command command = Command::price;
    std::uint64_t seed = 0;
    Format format = Format::json;
    std::optional<std::string> output;
    bool wall_clock = false;
    std::optional<UncertaintyBand> band;
    std::optional<ProblemConfig> problem;
    GridSpec grid;
    std::optional<SimulationConfig> simulation;
    std::optional<FgbmConfig> fgbm;
    std::optional<CpsConfig> cps;
    std::optional<HedgeConfig> hedge;
    std::optional<CapacityConfig> capacity;
    FilesConfig files;

    bool operator==(const RunConfig&) const = default;
};

/// Every problem found in a config, each prefixed by its field path.
class ConfigError : public InvalidArgument {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// Parses and validates a JSON config. Unknown keys are errors. Throws
/// ConfigError listing all problems.
RunConfig parse_config(std::string_view text);

/// Canonical form with all defaults filled in; parse_config(emit) round-trips.
Json emit_config(const RunConfig& config);

/// Executes the command and returns the report document
/// {inputs, outputs, provenance, timing}. Data files named in `files` are
/// written as a side effect.
Json run(const RunConfig& config);

/// Rounds every floating value to 12 significant digits and renders the
/// report as indented JSON or as flattened `key,value` CSV.
std::string render_report(const Json& report, Format format);

/// Full command-line entry point; returns the process exit status.
int main_entry(int argc, char** argv);

}  // namespace gprice::cli
