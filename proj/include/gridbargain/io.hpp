#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridbargain/bargaining.hpp"
#include "gridbargain/codes.hpp"
#include "gridbargain/model.hpp"
#include "gridbargain/rg_forecast.hpp"
#include "gridbargain/scheduling.hpp"

namespace gridbargain::io {

namespace fs = std::filesystem;

/// Fixed 9-significant-digit rendering used for every CSV number.
std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> header;  // empty when read without a header
  std::vector<std::vector<double>> rows;
};

/// Throws Error(FileError) naming the path on I/O or parse failure.
CsvTable read_csv(const fs::path& path, bool has_header);
void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// Model file: JSON with horizon, users, grid, optional graph, and paths
// (relative to the model file) of a demand CSV (one column per user id) and
// a price CSV (columns p_buy,p_sell).
MicrogridModel load_model(const fs::path& path);

/// Writes <dir>/model.json, demand.csv and price.csv.
void save_model(const MicrogridModel& model, const fs::path& dir);

/// K rows x T columns, no header.
std::vector<Series> load_scenarios(const fs::path& path);
void save_scenarios(const fs::path& path, const std::vector<Series>& profiles);

struct ScenarioSource {
  std::string user;
  fs::path path;
  WeatherKind kind = WeatherKind::Solar;
};

/// Lattice over [0, max]^k for the listed users (0-based); other users keep
/// gamma = 0.
struct GammaSweep {
  std::vector<std::size_t> users;
  std::size_t steps = 11;
  double max = 1.0;
};

enum class SolverChoice { Centralized, Distributed };

struct ExperimentConfig {
  fs::path model;
  std::vector<ScenarioSource> scenarios;
  ClassifyOptions classify;
  WeatherForecast forecast;
  std::optional<std::vector<double>> gamma;
  std::optional<GammaSweep> gamma_sweep;
  SolverChoice solver = SolverChoice::Centralized;
  CodesConfig codes;
  ScheduleOptions schedule;
  MonteCarloSpec monte_carlo;
  std::vector<std::string> honest;  // user ids; empty = no Monte Carlo
  fs::path output = "out";
};

/// Relative paths inside the config are resolved against its directory.
/// Throws ValidationError (bad values) or Error(FileError).
ExperimentConfig load_config(const fs::path& path);

SolverChoice parse_solver(const std::string& name);
std::string to_string(SolverChoice s);

}  // namespace gridbargain::io
