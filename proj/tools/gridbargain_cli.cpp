// gridbargain: forecast -> schedule -> allocate -> resilience driver.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gridbargain/error.hpp"
#include "gridbargain/io.hpp"
#include "gridbargain/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gridbargain;
using pipeline::ojson;

namespace {

enum Exit { kOk = 0, kValidation = 2, kSolver = 3, kBargaining = 4 };

struct Options {
  std::string config;
  std::string out;
  std::string solver;
  std::string d_vector;
  std::optional<double> jsoc;
  std::string gamma;
  std::string honest;
  std::string log_messages;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::size_t sweep_steps = 0;
  std::size_t lattice = 0;
  bool verify_oracle = false;
  bool uniform_equal = false;
  bool full = false;
};

class Timer {
 public:
  void mark(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    timings_[stage] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  const ojson& json() const { return timings_; }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  ojson timings_ = ojson::object();
};

[[noreturn]] void invalid(const std::string& field, const std::string& rule) {
  throw ValidationError(std::vector<Violation>{{field, rule}});
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Infeasible:
    case ErrorCode::SolverStall:
    case ErrorCode::NoConvergence:
      return kSolver;
    case ErrorCode::BargainingFailed:
      return kBargaining;
    default:
      return kValidation;
  }
}

void write_json(const fs::path& path, const ojson& j) {
  io::write_text(path, j.dump(2) + "\n");
  spdlog::info("wrote {}", path.string());
}

void write_table(const fs::path& path, const pipeline::Table& t) {
  io::write_csv(path, t.header, t.rows);
  spdlog::info("wrote {}", path.string());
}

// Everything a command needs, loaded lazily from the config.
struct Session {
  explicit Session(const Options& o) : opt(o) {
    if (!opt.config.empty()) {
      config = io::load_config(opt.config);
      if (opt.uniform_equal) {
        config->classify.weights = ConditionalWeights::UniformEqual;
      }
      if (opt.seed) {
        config->classify.seed = *opt.seed;
        config->monte_carlo.seed = *opt.seed;
      }
      if (opt.samples) {
        config->monte_carlo.samples = *opt.samples;
      }
      if (!opt.solver.empty()) {
        config->solver = io::parse_solver(opt.solver);
      }
    } else if (!opt.solver.empty()) {
      io::parse_solver(opt.solver);
    }
  }

  const io::ExperimentConfig& cfg() const {
    if (!config) {
      invalid("config", "--config is required for this command");
    }
    return *config;
  }

  fs::path out_dir() const {
    if (!opt.out.empty()) {
      return opt.out;
    }
    return config ? config->output : fs::path("out");
  }

  const MicrogridModel& the_model() {
    if (!model) {
      model = io::load_model(cfg().model);
      for (const auto& w : model_warnings(*model)) {
        spdlog::warn("{}", w);
      }
    }
    return *model;
  }

  const pipeline::ForecastStage& forecast() {
    if (!forecast_stage) {
      forecast_stage = pipeline::run_forecast(cfg(), the_model());
      timer.mark("forecast_s");
    }
    return *forecast_stage;
  }

  const pipeline::ScheduleStage& schedule() {
    if (!schedule_stage) {
      const auto& rg = forecast().rg;
      pipeline::ScheduleRequest req;
      req.solver = cfg().solver;
      req.verify_oracle = opt.verify_oracle;
      req.seed = opt.seed.value_or(0);
      if (!opt.log_messages.empty()) {
        const fs::path log_path = opt.log_messages;
        std::error_code ec;
        if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path(), ec);
        log_stream.open(log_path);
        if (!log_stream) {
          throw Error(ErrorCode::FileError, opt.log_messages + ": cannot open for writing");
        }
        req.observer.log = &log_stream;
      }
      schedule_stage = pipeline::run_schedule(the_model(), rg, cfg(), req);
      timer.mark("schedule_s");
      spdlog::info("J_soc = {:.6f} ({} solver)", schedule_stage->social.social_cost,
                   io::to_string(schedule_stage->solver));
    }
    return *schedule_stage;
  }

  pipeline::BargainInput bargain_input() {
    pipeline::BargainInput in;
    if (!opt.d_vector.empty()) {
      if (!opt.jsoc) {
        invalid("jsoc", "--jsoc is required with --d-vector");
      }
      in.ideal = pipeline::parse_list(opt.d_vector, "d-vector");
      in.social_cost = *opt.jsoc;
      for (std::size_t i = 0; i < in.ideal.size(); ++i) {
        in.ids.push_back("u" + std::to_string(i + 1));
      }
    } else {
      const auto& s = schedule();
      for (const auto& u : the_model().users) {
        in.ids.push_back(u.id);
      }
      in.ideal = s.ideal;
      in.social_cost = s.social.social_cost;
    }
    if (!opt.gamma.empty()) {
      in.gamma = pipeline::parse_list(opt.gamma, "gamma");
    } else if (config && config->gamma) {
      in.gamma = *config->gamma;
    }
    return in;
  }

  std::vector<bool> honest_mask(const std::vector<std::string>& ids) const {
    std::vector<std::string> tokens;
    if (!opt.honest.empty()) {
      std::stringstream ss(opt.honest);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        tokens.push_back(tok);
      }
    } else if (config) {
      tokens = config->honest;
    }
    if (tokens.empty()) {
      return {};
    }
    std::vector<bool> mask(ids.size(), false);
    for (const auto& t : tokens) {
      mask[pipeline::resolve_user(ids, t)] = true;
    }
    return mask;
  }

  MonteCarloSpec mc_spec() const {
    MonteCarloSpec spec = config ? config->monte_carlo : MonteCarloSpec{};
    if (opt.samples) {
      spec.samples = *opt.samples;
    }
    if (opt.seed) {
      spec.seed = *opt.seed;
    }
    return spec;
  }

  const Options& opt;
  std::optional<io::ExperimentConfig> config;
  std::optional<MicrogridModel> model;
  std::optional<pipeline::ForecastStage> forecast_stage;
  std::optional<pipeline::ScheduleStage> schedule_stage;
  std::ofstream log_stream;
  Timer timer;
};

void write_forecast_files(Session& s) {
  const auto& model = s.the_model();
  const auto& rg = s.forecast().rg;
  for (const auto& [user, series] : rg.by_user) {
    pipeline::Table t{{"t", "rg_kw"}, {}};
    for (std::size_t k = 0; k < series.size(); ++k) {
      t.rows.push_back({static_cast<double>(k), series[k]});
    }
    write_table(s.out_dir() / ("forecast_" + user + ".csv"), t);
  }
  write_json(s.out_dir() / "forecast.json", pipeline::forecast_json(model, rg));
}

int cmd_forecast(Session& s) {
  write_forecast_files(s);
  return kOk;
}

int cmd_schedule(Session& s) {
  const auto& st = s.schedule();
  write_json(s.out_dir() / "schedule.json", pipeline::schedule_json(s.the_model(), st, s.opt.full));
  write_table(s.out_dir() / "schedule.csv", pipeline::schedule_table(s.the_model(), st.social.decision));
  if (!st.converged) {
    spdlog::error("distributed solver did not converge: {}", st.codes->diagnostics);
    return kSolver;
  }
  return kOk;
}

std::optional<ojson> maybe_region(Session& s, const pipeline::BargainInput& in, double eps0) {
  const auto honest = s.honest_mask(in.ids);
  if (honest.empty()) {
    return std::nullopt;
  }
  const auto spec = s.mc_spec();
  const auto est = estimate_regions(in.ideal, eps0, honest, spec);
  s.timer.mark("monte_carlo_s");
  return pipeline::region_json(in.ids, honest, spec, est);
}

int cmd_bargain(Session& s) {
  const auto in = s.bargain_input();
  const auto st = pipeline::run_bargain(in);
  auto j = pipeline::bargain_json(in, st);
  if (auto region = maybe_region(s, in, st.ideal_discount)) {
    j["monte_carlo"] = *region;
  }
  write_json(s.out_dir() / "bargain.json", j);

  std::optional<io::GammaSweep> sweep;
  if (s.config && s.config->gamma_sweep) {
    sweep = s.config->gamma_sweep;
  }
  if (s.opt.sweep_steps > 0) {
    if (!sweep) {
      sweep = io::GammaSweep{};
      for (std::size_t i = 0; i < in.ideal.size(); ++i) {
        sweep->users.push_back(i);
      }
    }
    sweep->steps = s.opt.sweep_steps;
  }
  if (sweep) {
    write_table(s.out_dir() / "gamma_sweep.csv", pipeline::gamma_sweep_table(in, *sweep));
  }
  if (!st.allocation.success) {
    spdlog::error("bargaining failed: discount {:.6f} < 0", st.allocation.discount);
    return kBargaining;
  }
  return kOk;
}

int cmd_region(Session& s) {
  const auto in = s.bargain_input();
  const double eps0 = ideal_discount(in.ideal, in.social_cost);
  const auto honest = s.honest_mask(in.ids);
  if (honest.empty()) {
    invalid("honest", "--honest (or monte_carlo.honest) is required");
  }
  const auto spec = s.mc_spec();
  const auto est = estimate_regions(in.ideal, eps0, honest, spec);
  s.timer.mark("monte_carlo_s");
  auto j = pipeline::region_json(in.ids, honest, spec, est);
  j["ideal_discount"] = eps0;
  write_json(s.out_dir() / "region.json", j);
  if (s.opt.lattice > 1) {
    write_table(s.out_dir() / "region_lattice.csv",
                pipeline::region_lattice_table(in.ids, in.ideal, eps0, honest, s.opt.lattice));
  }
  return kOk;
}

int cmd_report(Session& s) {
  write_forecast_files(s);
  const auto& st = s.schedule();
  const auto& model = s.the_model();
  write_table(s.out_dir() / "schedule.csv", pipeline::schedule_table(model, st.social.decision));

  ojson report;
  report["forecast"] = pipeline::forecast_json(model, s.forecast().rg);
  report["schedule"] = pipeline::schedule_json(model, st, s.opt.full);
  const auto in = s.bargain_input();
  const auto bs = pipeline::run_bargain(in);
  report["bargaining"] = pipeline::bargain_json(in, bs);
  if (auto region = maybe_region(s, in, bs.ideal_discount)) {
    report["monte_carlo"] = *region;
  }
  write_json(s.out_dir() / "report.json", report);
  write_json(s.out_dir() / "timings.json", s.timer.json());
  if (!st.converged) {
    return kSolver;
  }
  return bs.allocation.success ? kOk : kBargaining;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)");
  cmd->add_option("--out", o.out, "output directory (default: config output)");
  cmd->add_option("--seed", o.seed, "seed for classification weights, masks and Monte Carlo");
  cmd->add_option("--solver", o.solver, "centralized | distributed");
  cmd->add_flag("--uniform-equal", o.uniform_equal, "equal conditional scenario weights");
}

void add_bargain_inputs(CLI::App* cmd, Options& o) {
  cmd->add_option("--d-vector", o.d_vector, "ideal selfish costs D_i, comma separated (cents)");
  cmd->add_option("--jsoc", o.jsoc, "social cost J_soc (cents), used with --d-vector");
  cmd->add_option("--gamma", o.gamma, "selfish cost adjustment factors, comma separated");
  cmd->add_option("--honest", o.honest, "honest users (ids or 1-based indices), comma separated");
  cmd->add_option("--samples", o.samples, "Monte Carlo samples");
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("gridbargain");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("GRIDBARGAIN_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Microgrid cooperative scheduling and Nash bargaining cost allocation"};
  app.require_subcommand(1);
  Options o;

  auto* forecast = app.add_subcommand("forecast", "predict RG profiles from scenario pools");
  add_common(forecast, o);

  auto* schedule = app.add_subcommand("schedule", "solve the social scheduling problem");
  add_common(schedule, o);
  schedule->add_flag("--verify-oracle", o.verify_oracle, "also run the other solver and report the gap");
  schedule->add_flag("--full", o.full, "include full decision series in the report");
  schedule->add_option("--log-messages", o.log_messages, "JSON-lines dump of distributed messages");

  auto* bargain = app.add_subcommand("bargain", "cost allocation and resilience analysis");
  add_common(bargain, o);
  add_bargain_inputs(bargain, o);
  bargain->add_option("--sweep-steps", o.sweep_steps, "gamma lattice points per swept user");

  auto* region = app.add_subcommand("region", "Monte Carlo manipulation-region probabilities");
  add_common(region, o);
  add_bargain_inputs(region, o);
  region->add_option("--lattice", o.lattice, "also export a lattice with this many points per axis");

  auto* report = app.add_subcommand("report", "run the full pipeline");
  add_common(report, o);
  add_bargain_inputs(report, o);
  report->add_flag("--verify-oracle", o.verify_oracle, "also run the other solver and report the gap");
  report->add_flag("--full", o.full, "include full decision series in the report");
  report->add_option("--log-messages", o.log_messages, "JSON-lines dump of distributed messages");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kValidation;
  }

  try {
    Session s(o);
    if (forecast->parsed()) return cmd_forecast(s);
    if (schedule->parsed()) return cmd_schedule(s);
    if (bargain->parsed()) return cmd_bargain(s);
    if (region->parsed()) return cmd_region(s);
    if (report->parsed()) return cmd_report(s);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    for (const auto& v : e.violations()) {
      std::cerr << "  " << v.field << ": " << v.rule << "\n";
    }
    return kValidation;
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kValidation;
  }
  return kOk;
}
