#pragma once

#include "frsde/fracop.hpp"
#include "frsde/galerkin.hpp"
#include "frsde/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace frsde {

enum class ExperimentKind { Check, Eig, Simulate, Moments, Aldous, Converge };

std::string to_string(ExperimentKind kind);
/// Throws std::invalid_argument for unknown names.
ExperimentKind experiment_kind_from_string(const std::string& name);

struct CheckSettings {
    int n_modes = 16;
    SampleGrid grid;
    StateSampling sampling;
};

struct EigSettings {
    int count = 0;  // 0 writes every eigenvalue
};

struct SimulateSettings {
    int n_modes = 16;
    std::uint64_t path_index = 0;
};

struct MomentsSettings {
    std::vector<int> levels = {8, 16, 32};
    std::vector<double> p_exp = {1.0, 2.0};
    std::vector<double> x_norms = {0.5, 1.0};
    std::size_t paths = 2000;
    double factor = 1.25;
    double confidence = 0.95;
};

struct AldousSettings {
    int n_modes = 16;
    std::size_t paths = 1000;
    std::vector<double> delta = {0.004, 0.006, 0.01, 0.016, 0.024, 0.04};
    std::vector<double> theta = {0.0, 0.2, 0.4, 0.6, 0.8};
    std::vector<double> test_function = {1.0};  // eigen-coefficients
    double noise_fraction = 0.2;
    double excursion_quantile = 0.99;
    double excursion_factor = 2.0;
};

struct ConvergeSettings {
    std::vector<int> levels = {8, 16, 32};
    std::size_t paths = 1000;
    double confidence = 0.95;
};

/// One experiment. Only the section of `kind` enters the normalized form.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Check;
    std::string output_dir = "out";
    OperatorMode operator_mode = OperatorMode::IntegralFEM;
    SpaceConfig space;  // space.p mirrors drift.p
    DriftF drift;
    DriftH perturbation;
    NoiseModel noise;
    SchemeConfig scheme;
    std::vector<double> initial = {1.0};  // eigen-coefficients of x

    CheckSettings check;
    EigSettings eig;
    SimulateSettings simulate;
    MomentsSettings moments;
    AldousSettings aldous;
    ConvergeSettings converge;
};

/// Every schema and constraint violation found in one pass.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// `kind` comes from the command line; a `kind` key in the file must agree.
ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind = std::nullopt,
                              const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> kind = std::nullopt);

/// Empty when valid.
std::vector<std::string> validate(const ExperimentConfig& cfg);

/// Canonical tree with all defaults filled; output_dir is excluded.
nlohmann::json normalized(const ExperimentConfig& cfg);
/// SHA-256 of the compact dump of normalized(cfg).
std::string config_hash(const ExperimentConfig& cfg);
/// Loads back to an identical normalized config.
std::string to_toml(const ExperimentConfig& cfg);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

} // namespace frsde
