#pragma once

#include "sipvol/evaluation.hpp"
#include "sipvol/experiment.hpp"
#include "sipvol/lowrank.hpp"
#include "sipvol/simulate.hpp"
#include "sipvol/spot_vol.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace sipvol::io {

using json = nlohmann::json;

/// Shortest text that parses back to the same double.
std::string format_double(double v);

// Tick CSV: header "day,s,t,y", one row per tick, days numbered from 1.
void write_ticks_csv(const std::filesystem::path& path, const std::vector<TickDay>& days);
std::vector<TickDay> read_ticks_csv(const std::filesystem::path& path);

/// Day x grid table. CSV header is "day" followed by the grid times.
struct VolTable {
    Eigen::MatrixXd values;
    std::vector<int> days;
    std::vector<double> grid;
};

void write_volmatrix_csv(const std::filesystem::path& path, const VolTable& table);
VolTable read_volmatrix_csv(const std::filesystem::path& path);
VolTable make_table(const Eigen::MatrixXd& values);

json to_json(const DgpParams& p);
DgpParams dgp_from_json(const json& j);

json to_json(const Prediction& p);
json to_json(const SpotCurve& c, int day);
json to_json(const BacktestReport& r);
json to_json(const StudyResult& r, const StudyConfig& cfg);

/// Flat table rows: method,metric,omega,D,value,p_adj.
void write_report_table_csv(const std::filesystem::path& path, const BacktestReport& r);

/// One row per (method, D, omega) cell of a simulation study.
void write_study_csv(const std::filesystem::path& path, const StudyResult& r);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

}  // namespace sipvol::io
