#include "gridbargain/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gridbargain/error.hpp"
#include "json.hpp"

namespace gridbargain::io {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void file_error(const fs::path& path, const std::string& what) {
  throw Error(ErrorCode::FileError, path.string() + ": " + what);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(trim(cell));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

json parse_json(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    file_error(path, std::string("invalid JSON: ") + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Collects typed field reads so a config reports every problem at once.
class Fields {
 public:
  template <class T>
  std::optional<T> get(const json& obj, const std::string& key, const std::string& where,
                       bool required = true) {
    const auto name = where.empty() ? key : where + "." + key;
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) {
      if (required) {
        violations.push_back({name, "required"});
      }
      return std::nullopt;
    }
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      violations.push_back({name, "wrong type"});
      return std::nullopt;
    }
  }

  void fail(const std::string& field, const std::string& rule) {
    violations.push_back({field, rule});
  }

  void finish() const {
    if (!violations.empty()) {
      throw ValidationError(violations);
    }
  }

  std::vector<Violation> violations;
};

BdcModel parse_bdc(const json& j, const std::string& where, Fields& f) {
  if (j.is_number()) {
    return ConstantBdc{j.get<double>()};
  }
  if (j.is_object() && j.contains("constant")) {
    return ConstantBdc{f.get<double>(j, "constant", where).value_or(0.0)};
  }
  if (j.is_object() && j.contains("piecewise")) {
    PiecewiseSocBdc p;
    const auto& arr = j.at("piecewise");
    if (!arr.is_array()) {
      f.fail(where + ".piecewise", "must be an array");
      return p;
    }
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const auto w = where + ".piecewise[" + std::to_string(k) + "]";
      p.breakpoints.push_back({f.get<double>(arr[k], "soc", w).value_or(0.0),
                               f.get<double>(arr[k], "cents_per_kwh", w).value_or(0.0)});
    }
    return p;
  }
  f.fail(where, "expected a number, {\"constant\": c} or {\"piecewise\": [...]}");
  return ConstantBdc{};
}

ojson bdc_json(const BdcModel& bdc) {
  if (const auto* c = std::get_if<ConstantBdc>(&bdc)) {
    return ojson{{"constant", c->cents_per_kwh}};
  }
  ojson arr = ojson::array();
  for (const auto& b : std::get<PiecewiseSocBdc>(bdc).breakpoints) {
    arr.push_back(ojson{{"soc", b.soc_fraction}, {"cents_per_kwh", b.cents_per_kwh}});
  }
  return ojson{{"piecewise", arr}};
}

const char* rg_name(RgType t) {
  switch (t) {
    case RgType::Pv: return "pv";
    case RgType::Wt: return "wt";
    case RgType::None: break;
  }
  return "none";
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    file_error(path, "cannot open for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    file_error(path, "cannot open for writing");
  }
  out << text;
  if (!out) {
    file_error(path, "write failed");
  }
}

CsvTable read_csv(const fs::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) {
    file_error(path, "cannot open for reading");
  }
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    auto cells = split(line);
    if (has_header && table.header.empty() && lineno == 1) {
      table.header = std::move(cells);
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size()) {
        file_error(path, "line " + std::to_string(lineno) + ": not a number: '" + c + "'");
      }
      row.push_back(v);
    }
    const auto width = table.header.empty() ? (table.rows.empty() ? row.size() : table.rows[0].size())
                                            : table.header.size();
    if (row.size() != width) {
      file_error(path, "line " + std::to_string(lineno) + ": expected " + std::to_string(width) +
                           " columns, got " + std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::string text;
  for (std::size_t k = 0; k < header.size(); ++k) {
    text += (k ? "," : "") + header[k];
  }
  if (!header.empty()) {
    text += '\n';
  }
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      text += (k ? "," : "") + format_number(row[k]);
    }
    text += '\n';
  }
  write_text(path, text);
}

MicrogridModel load_model(const fs::path& path) {
  const json j = parse_json(path);
  const auto base = path.parent_path();
  Fields f;
  MicrogridModel m;

  if (j.contains("horizon")) {
    const auto& h = j.at("horizon");
    m.horizon.steps = f.get<std::size_t>(h, "steps", "horizon").value_or(24);
    m.horizon.dt = f.get<double>(h, "dt", "horizon").value_or(1.0);
  }
  if (j.contains("grid")) {
    m.grid.max_kw = f.get<double>(j.at("grid"), "max_kw", "grid", false);
  }
  const auto users = j.contains("users") ? j.at("users") : json::array();
  if (!users.is_array() || users.empty()) {
    f.fail("users", "at least one user required");
  }
  for (std::size_t i = 0; users.is_array() && i < users.size(); ++i) {
    const auto& u = users[i];
    const auto w = "users[" + std::to_string(i) + "]";
    UserSpec spec;
    spec.id = f.get<std::string>(u, "id", w).value_or("");
    const auto kind = f.get<std::string>(u, "kind", w).value_or("passive");
    if (kind == "active") {
      spec.kind = UserKind::Active;
    } else if (kind != "passive") {
      f.fail(w + ".kind", "must be 'passive' or 'active'");
    }
    if (u.contains("rg") && !u.at("rg").is_null()) {
      const auto& rg = u.at("rg");
      const auto type = f.get<std::string>(rg, "type", w + ".rg").value_or("none");
      if (type == "pv") {
        spec.rg.type = RgType::Pv;
      } else if (type == "wt") {
        spec.rg.type = RgType::Wt;
      } else if (type != "none") {
        f.fail(w + ".rg.type", "must be 'pv', 'wt' or 'none'");
      }
      spec.rg.size_kw = f.get<double>(rg, "size_kw", w + ".rg", spec.rg.type != RgType::None).value_or(0.0);
    }
    if (u.contains("desd") && !u.at("desd").is_null()) {
      const auto& d = u.at("desd");
      const auto wd = w + ".desd";
      DesdParams p;
      p.initial_kwh = f.get<double>(d, "initial_kwh", wd).value_or(0.0);
      p.min_kwh = f.get<double>(d, "min_kwh", wd).value_or(0.0);
      p.max_kwh = f.get<double>(d, "max_kwh", wd).value_or(0.0);
      p.rating_kw = f.get<double>(d, "rating_kw", wd).value_or(0.0);
      p.efficiency = f.get<double>(d, "efficiency", wd).value_or(1.0);
      if (d.contains("bdc")) {
        p.bdc = parse_bdc(d.at("bdc"), wd + ".bdc", f);
      } else {
        f.fail(wd + ".bdc", "required");
      }
      spec.desd = p;
    }
    m.users.push_back(std::move(spec));
  }
  if (j.contains("graph") && !j.at("graph").is_null()) {
    const auto& g = j.at("graph");
    m.graph.nodes = f.get<std::size_t>(g, "nodes", "graph").value_or(0);
    const auto edges =
        f.get<std::vector<std::pair<std::size_t, std::size_t>>>(g, "edges", "graph").value_or(
            std::vector<std::pair<std::size_t, std::size_t>>{});
    m.graph.edges = edges;
  }

  const auto demand_file = f.get<std::string>(j, "demand_csv", "");
  const auto price_file = f.get<std::string>(j, "price_csv", "");
  f.finish();

  const auto demand_path = resolve(base, *demand_file);
  const auto demand = read_csv(demand_path, true);
  m.demands.assign(m.users.size(), Series{});
  for (std::size_t i = 0; i < m.users.size(); ++i) {
    const auto it = std::find(demand.header.begin(), demand.header.end(), m.users[i].id);
    if (it == demand.header.end()) {
      file_error(demand_path, "no column for user '" + m.users[i].id + "'");
    }
    const auto col = static_cast<std::size_t>(it - demand.header.begin());
    for (const auto& row : demand.rows) {
      m.demands[i].push_back(row[col]);
    }
  }

  const auto price_path = resolve(base, *price_file);
  const auto price = read_csv(price_path, true);
  const auto col_of = [&](const std::string& name) {
    const auto it = std::find(price.header.begin(), price.header.end(), name);
    if (it == price.header.end()) {
      file_error(price_path, "missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - price.header.begin());
  };
  const auto cb = col_of("p_buy");
  const auto cs = col_of("p_sell");
  for (const auto& row : price.rows) {
    m.prices.buy.push_back(row[cb]);
    m.prices.sell.push_back(row[cs]);
  }
  return validate_model(std::move(m));
}

void save_model(const MicrogridModel& model, const fs::path& dir) {
  ojson j;
  j["horizon"] = {{"steps", model.horizon.steps}, {"dt", model.horizon.dt}};
  j["demand_csv"] = "demand.csv";
  j["price_csv"] = "price.csv";
  if (model.grid.max_kw) {
    j["grid"] = {{"max_kw", *model.grid.max_kw}};
  }
  ojson users = ojson::array();
  for (const auto& u : model.users) {
    ojson ju;
    ju["id"] = u.id;
    ju["kind"] = u.is_active() ? "active" : "passive";
    if (u.has_rg()) {
      ju["rg"] = {{"type", rg_name(u.rg.type)}, {"size_kw", u.rg.size_kw}};
    }
    if (u.desd) {
      const auto& d = *u.desd;
      ju["desd"] = {{"initial_kwh", d.initial_kwh}, {"min_kwh", d.min_kwh},
                    {"max_kwh", d.max_kwh},         {"rating_kw", d.rating_kw},
                    {"efficiency", d.efficiency},   {"bdc", bdc_json(d.bdc)}};
    }
    users.push_back(ju);
  }
  j["users"] = users;
  if (!model.graph.edges.empty()) {
    ojson edges = ojson::array();
    for (const auto& [a, b] : model.graph.edges) {
      edges.push_back({a, b});
    }
    j["graph"] = {{"nodes", model.graph.nodes}, {"edges", edges}};
  }
  write_text(dir / "model.json", j.dump(2) + "\n");

  std::vector<std::string> header;
  for (const auto& u : model.users) {
    header.push_back(u.id);
  }
  std::vector<std::vector<double>> rows(model.horizon.steps);
  for (std::size_t t = 0; t < model.horizon.steps; ++t) {
    for (const auto& d : model.demands) {
      rows[t].push_back(d[t]);
    }
  }
  write_csv(dir / "demand.csv", header, rows);
  rows.assign(model.horizon.steps, {});
  for (std::size_t t = 0; t < model.horizon.steps; ++t) {
    rows[t] = {model.prices.buy[t], model.prices.sell[t]};
  }
  write_csv(dir / "price.csv", {"p_buy", "p_sell"}, rows);
}

std::vector<Series> load_scenarios(const fs::path& path) {
  auto table = read_csv(path, false);
  if (table.rows.empty()) {
    file_error(path, "no scenarios");
  }
  return std::move(table.rows);
}

void save_scenarios(const fs::path& path, const std::vector<Series>& profiles) {
  write_csv(path, {}, profiles);
}

SolverChoice parse_solver(const std::string& name) {
  if (name == "centralized") {
    return SolverChoice::Centralized;
  }
  if (name == "distributed") {
    return SolverChoice::Distributed;
  }
  throw ValidationError({{"solver", "must be 'centralized' or 'distributed', got '" + name + "'"}});
}

std::string to_string(SolverChoice s) {
  return s == SolverChoice::Centralized ? "centralized" : "distributed";
}

ExperimentConfig load_config(const fs::path& path) {
  const json j = parse_json(path);
  const auto base = path.parent_path();
  Fields f;
  ExperimentConfig cfg;

  cfg.model = resolve(base, f.get<std::string>(j, "model", "").value_or(""));
  if (j.contains("scenarios")) {
    const auto& sc = j.at("scenarios");
    if (!sc.is_object()) {
      f.fail("scenarios", "must map user id to {path, kind}");
    } else {
      for (const auto& [user, entry] : sc.items()) {
        const auto w = "scenarios." + user;
        ScenarioSource src;
        src.user = user;
        src.path = resolve(base, f.get<std::string>(entry, "path", w).value_or(""));
        const auto kind = f.get<std::string>(entry, "kind", w).value_or("solar");
        if (kind == "wind") {
          src.kind = WeatherKind::Wind;
        } else if (kind != "solar") {
          f.fail(w + ".kind", "must be 'solar' or 'wind'");
        }
        cfg.scenarios.push_back(std::move(src));
      }
    }
  }
  if (j.contains("classify")) {
    const auto& c = j.at("classify");
    const auto weights = f.get<std::string>(c, "weights", "classify", false).value_or("uniform_random");
    if (weights == "uniform_equal") {
      cfg.classify.weights = ConditionalWeights::UniformEqual;
    } else if (weights != "uniform_random") {
      f.fail("classify.weights", "must be 'uniform_random' or 'uniform_equal'");
    }
    cfg.classify.seed = f.get<std::uint64_t>(c, "seed", "classify", false).value_or(0);
  }
  if (j.contains("forecast")) {
    const auto& fc = j.at("forecast");
    cfg.forecast.solar = f.get<std::vector<double>>(fc, "solar", "forecast", false).value_or(std::vector<double>{});
    cfg.forecast.wind = f.get<std::vector<double>>(fc, "wind", "forecast", false).value_or(std::vector<double>{});
  }
  cfg.gamma = f.get<std::vector<double>>(j, "gamma", "", false);
  if (cfg.gamma) {
    for (std::size_t i = 0; i < cfg.gamma->size(); ++i) {
      if (!((*cfg.gamma)[i] >= 0.0)) {
        f.fail("gamma[" + std::to_string(i) + "]", "must be >= 0");
      }
    }
  }
  if (j.contains("gamma_sweep")) {
    const auto& s = j.at("gamma_sweep");
    GammaSweep sw;
    sw.users = f.get<std::vector<std::size_t>>(s, "users", "gamma_sweep").value_or(std::vector<std::size_t>{});
    sw.steps = f.get<std::size_t>(s, "steps", "gamma_sweep", false).value_or(11);
    sw.max = f.get<double>(s, "max", "gamma_sweep", false).value_or(1.0);
    if (sw.steps < 2) {
      f.fail("gamma_sweep.steps", "must be >= 2");
    }
    if (!(sw.max > 0.0)) {
      f.fail("gamma_sweep.max", "must be > 0");
    }
    cfg.gamma_sweep = sw;
  }
  if (const auto solver = f.get<std::string>(j, "solver", "", false)) {
    if (*solver == "distributed") {
      cfg.solver = SolverChoice::Distributed;
    } else if (*solver != "centralized") {
      f.fail("solver", "must be 'centralized' or 'distributed'");
    }
  }
  if (j.contains("codes")) {
    const auto& c = j.at("codes");
    auto& k = cfg.codes;
    k.penalty = f.get<double>(c, "penalty", "codes", false).value_or(k.penalty);
    k.max_iterations = f.get<int>(c, "max_iterations", "codes", false).value_or(k.max_iterations);
    k.balance_tolerance = f.get<double>(c, "balance_tolerance", "codes", false).value_or(k.balance_tolerance);
    k.consensus_tolerance = f.get<double>(c, "consensus_tolerance", "codes", false).value_or(k.consensus_tolerance);
    k.max_consensus_rounds = f.get<int>(c, "max_consensus_rounds", "codes", false).value_or(k.max_consensus_rounds);
    k.mask_scale = f.get<double>(c, "mask_scale", "codes", false).value_or(k.mask_scale);
  }
  if (j.contains("schedule")) {
    cfg.schedule.terminal_soc_at_least_initial =
        f.get<bool>(j.at("schedule"), "terminal_soc_at_least_initial", "schedule", false).value_or(false);
  }
  if (j.contains("monte_carlo")) {
    const auto& mc = j.at("monte_carlo");
    cfg.monte_carlo.samples = f.get<std::uint64_t>(mc, "samples", "monte_carlo", false).value_or(cfg.monte_carlo.samples);
    cfg.monte_carlo.seed = f.get<std::uint64_t>(mc, "seed", "monte_carlo", false).value_or(0);
    cfg.monte_carlo.threads = f.get<unsigned>(mc, "threads", "monte_carlo", false).value_or(0);
    cfg.honest = f.get<std::vector<std::string>>(mc, "honest", "monte_carlo", false).value_or(std::vector<std::string>{});
  }
  if (const auto out = f.get<std::string>(j, "output", "", false)) {
    cfg.output = resolve(base, *out);
  } else {
    cfg.output = base / "out";
  }
  f.finish();

  try {
    validate_forecast(cfg.forecast);
  } catch (const ValidationError& e) {
    auto v = e.violations();
    for (auto& x : v) {
      x.field = "forecast." + x.field;
    }
    throw ValidationError(v);
  }
  if (!fs::exists(cfg.model)) {
    file_error(cfg.model, "model file not found");
  }
  for (const auto& s : cfg.scenarios) {
    if (!fs::exists(s.path)) {
      file_error(s.path, "scenario file for user '" + s.user + "' not found");
    }
  }
  return cfg;
}

}  // namespace gridbargain::io
