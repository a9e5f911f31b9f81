#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gridbargain {

// Units throughout: power kW, energy kWh, prices cents/kWh, costs cents,
// time hours.

using Series = std::vector<double>;

struct Horizon {
  std::size_t steps = 24;
  double dt = 1.0;  // hours per step
};

struct PriceProfile {
  Series buy;   // p_b(t)
  Series sell;  // p_s(t)
};

struct ConstantBdc {
  double cents_per_kwh = 0.0;
};

struct SocBreakpoint {
  double soc_fraction = 0.0;
  double cents_per_kwh = 0.0;
};

// Step function over state of charge: breakpoint k's cost applies for
// soc fraction in [s_k, s_{k+1}); below the first breakpoint the first cost
// applies.
struct PiecewiseSocBdc {
  std::vector<SocBreakpoint> breakpoints;
};

using BdcModel = std::variant<ConstantBdc, PiecewiseSocBdc>;

/// Unit degradation cost (cents/kWh of throughput) at the given SOC fraction.
double unit_bdc(const BdcModel& bdc, double soc_fraction);

bool is_constant(const BdcModel& bdc);

struct DesdParams {
  double initial_kwh = 0.0;
  double min_kwh = 0.0;
  double max_kwh = 0.0;
  double rating_kw = 0.0;
  double efficiency = 1.0;  // kappa, applied on both charge and discharge
  BdcModel bdc = ConstantBdc{};
};

enum class UserKind { Passive, Active };
enum class RgType { None, Pv, Wt };

struct RgUnit {
  RgType type = RgType::None;
  double size_kw = 0.0;
};

// Raw user declaration. Validation enforces that passive users carry neither
// storage nor generation and that active users carry storage.
struct UserSpec {
  std::string id;
  UserKind kind = UserKind::Passive;
  std::optional<DesdParams> desd;
  RgUnit rg;

  bool is_active() const { return kind == UserKind::Active; }
  bool has_rg() const { return rg.type != RgType::None; }
};

struct GridLimits {
  std::optional<double> max_kw;  // filled with a non-binding default by validation
};

/// Undirected graph over r user nodes (0..r-1) plus the grid node (index r).
struct CommGraph {
  std::size_t nodes = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::vector<std::vector<std::size_t>> adjacency() const;
  bool connected() const;
};

CommGraph ring_graph(std::size_t nodes);

struct MicrogridModel {
  Horizon horizon;
  std::vector<UserSpec> users;
  std::vector<Series> demands;  // one per user
  PriceProfile prices;
  GridLimits grid;
  CommGraph graph;  // empty edge list means "use the default ring"

  std::size_t user_count() const { return users.size(); }
  std::size_t grid_node() const { return users.size(); }
  double grid_max_kw() const;
  std::size_t index_of(const std::string& user_id) const;
};

/// Checks every invariant and fills defaults (grid limit, ring graph).
/// Throws ValidationError listing all violations, or Error(DisconnectedGraph).
MicrogridModel validate_model(MicrogridModel raw);

/// Advisory checks that do not fail validation (e.g. p_s >= p_b arbitrage).
std::vector<std::string> model_warnings(const MicrogridModel& model);

/// Stored energy after each step: E0 - sum_{tau<=t} (P+/kappa - kappa P-) dt.
Series soc_trajectory(const DesdParams& desd, const Series& discharge,
                      const Series& charge, double dt);

}  // namespace gridbargain
