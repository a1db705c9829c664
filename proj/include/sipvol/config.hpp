#pragma once

#include "sipvol/experiment.hpp"
#include "sipvol/lowrank.hpp"
#include "sipvol/simulate.hpp"
#include "sipvol/spot_vol.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sipvol {

/// Everything a CLI run needs. Serialised as sectioned key=value text:
///
///   [dgp]
///   m = 23400
///   [predict]
///   methods = sip,ave
struct RunConfig {
    DgpParams dgp{};
    PreAvgConfig spot{};
    RankPolicy rank{};
    double ridge = 0.0;
    std::vector<Method> methods = all_methods();
    std::vector<double> omegas{0.1, 0.5, 0.9};
    std::vector<int> D_list{50, 100, 150, 200};
    std::vector<double> study_omegas{0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<double> q0s{0.01, 0.02, 0.05, 0.1, 0.2};
    int window = 63;
    int replications = 500;
    int threads = 1;
    std::string output_dir = "out";
    std::string ticks_path;
    std::string volmatrix_path;

    bool operator==(const RunConfig&) const = default;
};

/// Section-qualified keys ("dgp.m", "predict.methods", ...) in serialisation order.
std::vector<std::string> config_keys();

/// Sets one key from its text form; throws ConfigError on unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

/// Range checks across fields.
void validate(const RunConfig& cfg);

std::string serialize(const RunConfig& cfg);
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Applies SIPVOL_OUTPUT_DIR and SIPVOL_THREADS when set.
void apply_env_overrides(RunConfig& cfg);

StudyConfig study_config(const RunConfig& cfg);

}  // namespace sipvol
