#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hetdeconv/simulation.hpp"

namespace hetdeconv {

inline constexpr int kSchemaVersion = 1;

struct QueryGrid {
    GridAxis x{-2.0, 2.0, 20};
    GridAxis t{-2.0, 2.0, 20};

    friend bool operator==(const QueryGrid&, const QueryGrid&) = default;
};

struct CrossSectionSpec {
    Axis axis = Axis::FixX;
    double value = 1.0;
    Estimator estimator = Estimator::RHat;

    friend bool operator==(const CrossSectionSpec&, const CrossSectionSpec&) = default;
};

/// Everything a CLI run can be configured with.
struct RunConfig {
    SimulationConfig simulation;
    double c_sup = 1.0;
    /// Fixed bandwidths for estimate and cross-section.
    std::optional<double> h;
    std::optional<double> b;
    /// Observation file (columns x, w, y) for estimate.
    std::optional<std::string> data;
    /// Per-row error laws (columns family, parameter) for estimate and validate.
    std::optional<std::string> errors;
    QueryGrid query_grid;
    CrossSectionSpec cross_section;

    /// Semantic checks beyond the schema. Throws ConfigError.
    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// A configuration problem. `field` is a dotted key path (may be empty) and
/// `line` the 1-based source line when known (0 otherwise).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, std::size_t line, const std::string& message);

    const std::string& field() const noexcept { return field_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string field_;
    std::size_t line_;
};

/// Adjustments layered over the document, in this order: full-scale sizes,
/// then the seed, then each "dotted.key=value" override. Override values are
/// read as JSON when they parse and as strings otherwise.
struct ConfigLayers {
    bool full_scale = false;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

/// Parses a JSON document. Unknown keys, wrong types and out-of-range values
/// raise ConfigError.
RunConfig parse_config(std::string_view text, const ConfigLayers& layers = {});
/// Reads `path`; an empty path means the built-in defaults.
RunConfig load_config(const std::string& path, const ConfigLayers& layers = {});

/// Pretty-printed JSON with a trailing newline.
std::string emit_config(const RunConfig& config);

}  // namespace hetdeconv
