#include "config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

namespace scerm_cli {

using nlohmann::json;

const char* command_name(Command c) {
  switch (c) {
    case Command::Solve: return "solve";
    case Command::Diagnose: return "diagnose";
    case Command::Verify: return "verify";
    case Command::Rates: return "rates";
    case Command::Concentration: return "concentration";
  }
  return "?";
}

namespace {

class Reader {
 public:
  explicit Reader(ConfigErrors& e) : err_(e) {}

  void error(const std::string& path, const std::string& msg) { err_.messages.push_back(path + ": " + msg); }

  bool object(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
      error(path, "expected an object");
      return false;
    }
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!ok.count(it.key())) error(path + "." + it.key(), "unknown key");
    return true;
  }

  std::optional<double> number(const json& j, const std::string& path) {
    if (!j.is_number() || !std::isfinite(j.get<double>())) {
      error(path, "expected a finite number");
      return std::nullopt;
    }
    return j.get<double>();
  }

  std::optional<long> integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
      error(path, "expected an integer");
      return std::nullopt;
    }
    return j.get<long>();
  }

  template <class T, class F>
  std::vector<T> list(const json& j, const std::string& path, F&& item) {
    std::vector<T> out;
    if (!j.is_array()) {
      error(path, "expected an array");
      return out;
    }
    for (size_t i = 0; i < j.size(); ++i)
      if (auto v = item(j[i], path + "[" + std::to_string(i) + "]")) out.push_back(*v);
    return out;
  }

  std::vector<double> numbers(const json& j, const std::string& path) {
    return list<double>(j, path, [&](const json& x, const std::string& p) { return number(x, p); });
  }

  std::vector<long> integers(const json& j, const std::string& path) {
    return list<long>(j, path, [&](const json& x, const std::string& p) { return integer(x, p); });
  }

  // reads an optional field into `dst`
  void opt_num(const json& j, const std::string& path, const char* key, double& dst) {
    if (j.contains(key))
      if (auto v = number(j[key], path + "." + key)) dst = *v;
  }
  void opt_int(const json& j, const std::string& path, const char* key, long& dst) {
    if (j.contains(key))
      if (auto v = integer(j[key], path + "." + key)) dst = *v;
  }

 private:
  ConfigErrors& err_;
};

void check_delta(Reader& rd, double delta, const std::string& path) {
  if (!(delta > 0 && delta <= 0.5)) rd.error(path, "delta must lie in (0, 0.5]");
}

void check_positive(Reader& rd, const std::vector<double>& v, const std::string& path) {
  for (size_t i = 0; i < v.size(); ++i)
    if (!(v[i] > 0)) rd.error(path + "[" + std::to_string(i) + "]", "lambda must be positive");
}

void parse_solver(Reader& rd, const json& j, scerm_solver_config& s) {
  const std::string p = "solver";
  if (!rd.object(j, p, {"tol", "max_iter", "shrink", "c1", "max_halvings"})) return;
  rd.opt_num(j, p, "tol", s.tol);
  long mi = s.max_iter, mh = s.max_halvings;
  rd.opt_int(j, p, "max_iter", mi);
  rd.opt_int(j, p, "max_halvings", mh);
  s.max_iter = static_cast<int>(mi);
  s.max_halvings = static_cast<int>(mh);
  rd.opt_num(j, p, "shrink", s.shrink);
  rd.opt_num(j, p, "c1", s.c1);
  if (!(s.tol > 0)) rd.error(p + ".tol", "must be positive");
  if (s.max_iter < 1) rd.error(p + ".max_iter", "must be >= 1");
  if (!(s.shrink > 0 && s.shrink < 1)) rd.error(p + ".shrink", "must lie in (0, 1)");
  if (!(s.c1 > 0 && s.c1 < 1)) rd.error(p + ".c1", "must lie in (0, 1)");
  if (s.max_halvings < 1) rd.error(p + ".max_halvings", "must be >= 1");
}

void parse_solve(Reader& rd, const json& j, SolveSection& s) {
  const std::string p = "solve";
  if (!rd.object(j, p, {"lambdas", "n"})) return;
  if (!j.contains("lambdas")) rd.error(p + ".lambdas", "missing required key");
  else s.lambdas = rd.numbers(j["lambdas"], p + ".lambdas");
  for (size_t i = 0; i < s.lambdas.size(); ++i)
    if (!(s.lambdas[i] >= 0)) rd.error(p + ".lambdas[" + std::to_string(i) + "]", "lambda must be >= 0");
  rd.opt_int(j, p, "n", s.n);
  if (s.n < 0) rd.error(p + ".n", "must be >= 0");
  if (s.n > 0)
    for (size_t i = 0; i < s.lambdas.size(); ++i)
      if (!(s.lambdas[i] > 0)) rd.error(p + ".lambdas[" + std::to_string(i) + "]", "sample solves need lambda > 0");
}

void parse_rates(Reader& rd, const json& j, RatesSection& s) {
  const std::string p = "rates";
  if (!rd.object(j, p, {"regime", "n_grid", "replicates", "delta", "lambda_override", "c0", "r", "alpha", "L",
                        "Q", "burn_in", "tolerance", "assert_bound"}))
    return;
  if (!j.contains("regime") || !j["regime"].is_string()) {
    rd.error(p + ".regime", "expected one of none, source, source_capacity");
  } else {
    std::string r = j["regime"];
    if (r == "none") s.regime = SCERM_REGIME_NONE;
    else if (r == "source") s.regime = SCERM_REGIME_SOURCE;
    else if (r == "source_capacity") s.regime = SCERM_REGIME_SOURCE_CAPACITY;
    else rd.error(p + ".regime", "unknown regime '" + r + "'");
  }
  if (!j.contains("n_grid")) rd.error(p + ".n_grid", "missing required key");
  else s.n_grid = rd.integers(j["n_grid"], p + ".n_grid");
  if (j.contains("n_grid") && s.n_grid.empty()) rd.error(p + ".n_grid", "must not be empty");
  for (size_t i = 0; i < s.n_grid.size(); ++i) {
    if (s.n_grid[i] < 1) rd.error(p + ".n_grid[" + std::to_string(i) + "]", "must be >= 1");
    if (i > 0 && s.n_grid[i] <= s.n_grid[i - 1]) rd.error(p + ".n_grid", "must be strictly increasing");
  }
  rd.opt_int(j, p, "replicates", s.replicates);
  if (s.replicates < 1) rd.error(p + ".replicates", "must be >= 1");
  rd.opt_num(j, p, "delta", s.delta);
  check_delta(rd, s.delta, p + ".delta");
  if (j.contains("lambda_override")) {
    s.lambda_override = rd.numbers(j["lambda_override"], p + ".lambda_override");
    check_positive(rd, s.lambda_override, p + ".lambda_override");
    if (s.lambda_override.size() != s.n_grid.size()) rd.error(p + ".lambda_override", "needs one value per n");
  }
  auto opt = [&](const char* key, std::optional<double>& dst) {
    if (j.contains(key))
      if (auto v = rd.number(j[key], p + "." + key)) dst = *v;
  };
  opt("c0", s.c0);
  opt("r", s.r);
  opt("alpha", s.alpha);
  opt("L", s.L);
  opt("Q", s.Q);
  opt("tolerance", s.tolerance);
  if (s.c0 && !(*s.c0 > 0)) rd.error(p + ".c0", "must be positive");
  if (s.r && !(*s.r > 0 && *s.r <= 0.5)) rd.error(p + ".r", "source exponent r must lie in (0, 0.5]");
  if (s.alpha && !(*s.alpha >= 1)) rd.error(p + ".alpha", "capacity exponent alpha must be >= 1");
  if (s.L && !(*s.L > 0)) rd.error(p + ".L", "must be positive");
  if (s.Q && !(*s.Q > 0)) rd.error(p + ".Q", "must be positive");
  if (s.tolerance && !(*s.tolerance > 0)) rd.error(p + ".tolerance", "must be positive");
  long b = s.burn_in;
  rd.opt_int(j, p, "burn_in", b);
  if (b < 0) rd.error(p + ".burn_in", "must be >= 0");
  s.burn_in = static_cast<int>(b);
  if (j.contains("assert_bound")) {
    if (!j["assert_bound"].is_boolean()) rd.error(p + ".assert_bound", "expected a boolean");
    else s.assert_bound = j["assert_bound"];
  }
}

void parse_concentration(Reader& rd, const json& j, ConcentrationSection& s) {
  const std::string p = "concentration";
  if (!rd.object(j, p, {"kind", "lambda", "n", "replicates", "delta", "k", "theta"})) return;
  if (j.contains("kind")) {
    if (!j["kind"].is_string() || (j["kind"] != "hessian" && j["kind"] != "gradient"))
      rd.error(p + ".kind", "expected hessian or gradient");
    else s.kind = j["kind"];
  }
  if (!j.contains("lambda")) rd.error(p + ".lambda", "missing required key");
  else if (auto v = rd.number(j["lambda"], p + ".lambda")) s.lambda = *v;
  if (!(s.lambda > 0) && j.contains("lambda")) rd.error(p + ".lambda", "lambda must be positive");
  if (!j.contains("n")) rd.error(p + ".n", "missing required key");
  else rd.opt_int(j, p, "n", s.n);
  if (j.contains("n") && s.n < 1) rd.error(p + ".n", "must be >= 1");
  rd.opt_int(j, p, "replicates", s.replicates);
  if (s.replicates < 1) rd.error(p + ".replicates", "must be >= 1");
  rd.opt_num(j, p, "delta", s.delta);
  check_delta(rd, s.delta, p + ".delta");
  rd.opt_num(j, p, "k", s.k);
  if (!(s.k >= 4)) rd.error(p + ".k", "must be >= 4");
  if (j.contains("theta")) {
    if (s.kind != "hessian") rd.error(p + ".theta", "only used by the hessian experiment");
    s.theta = rd.numbers(j["theta"], p + ".theta");
  }
}

}  // namespace

std::optional<RunConfig> parse_config(const std::string& text, ConfigErrors& errors) {
  Reader rd(errors);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    rd.error("config", std::string("not valid JSON: ") + e.what());
    return std::nullopt;
  }
  RunConfig cfg;
  scerm_solver_config_default(&cfg.solver);
  if (!rd.object(doc, "config", {"command", "seed", "output", "population", "solver", "solve", "diagnose",
                                 "verify", "rates", "concentration"}))
    return std::nullopt;

  std::optional<Command> cmd;
  if (!doc.contains("command") || !doc["command"].is_string()) {
    rd.error("command", "expected one of solve, diagnose, verify, rates, concentration");
  } else {
    for (auto c : {Command::Solve, Command::Diagnose, Command::Verify, Command::Rates, Command::Concentration})
      if (doc["command"] == command_name(c)) cmd = c;
    if (!cmd) rd.error("command", "unknown command '" + doc["command"].get<std::string>() + "'");
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) rd.error("seed", "expected a nonnegative integer");
    else cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) rd.error("output", "expected a string");
    else cfg.output = doc["output"];
  }
  if (doc.contains("solver")) parse_solver(rd, doc["solver"], cfg.solver);

  if (cmd) {
    cfg.command = *cmd;
    // the section matching the command; sections of other commands are rejected
    const char* own = command_name(*cmd);
    for (auto c : {Command::Solve, Command::Diagnose, Command::Verify, Command::Rates, Command::Concentration})
      if (c != *cmd && doc.contains(command_name(c)))
        rd.error(command_name(c), std::string("section does not apply to command '") + own + "'");
    const bool needs_pop = *cmd != Command::Verify;
    if (needs_pop && !doc.contains("population")) rd.error("population", "missing required key");
    if (!needs_pop && doc.contains("population")) rd.error("population", "not used by verify");

    switch (*cmd) {
      case Command::Solve:
        if (!doc.contains("solve")) rd.error("solve", "missing required key");
        else parse_solve(rd, doc["solve"], cfg.solve);
        break;
      case Command::Diagnose:
        if (doc.contains("diagnose")) {
          const json& j = doc["diagnose"];
          if (rd.object(j, "diagnose", {"lambda_grid"}) && j.contains("lambda_grid")) {
            cfg.diagnose.lambda_grid = rd.numbers(j["lambda_grid"], "diagnose.lambda_grid");
            check_positive(rd, cfg.diagnose.lambda_grid, "diagnose.lambda_grid");
          }
        }
        break;
      case Command::Verify:
        if (doc.contains("verify")) {
          const json& j = doc["verify"];
          if (rd.object(j, "verify", {"trials_per_kind"})) rd.opt_int(j, "verify", "trials_per_kind", cfg.verify.trials_per_kind);
          if (cfg.verify.trials_per_kind < 1) rd.error("verify.trials_per_kind", "must be >= 1");
        }
        break;
      case Command::Rates:
        if (!doc.contains("rates")) rd.error("rates", "missing required key");
        else parse_rates(rd, doc["rates"], cfg.rates);
        break;
      case Command::Concentration:
        if (!doc.contains("concentration")) rd.error("concentration", "missing required key");
        else parse_concentration(rd, doc["concentration"], cfg.concentration);
        break;
    }
  }

  if (doc.contains("population") && cfg.command != Command::Verify) {
    cfg.population_json = doc["population"].dump();
    scerm_population* pop = nullptr;
    if (scerm_population_from_json(cfg.population_json.c_str(), &pop) != SCERM_OK) {
      std::string msg = scerm_last_error();
      // core messages already start with "population"
      if (msg.rfind("population", 0) == 0) errors.messages.push_back(msg);
      else rd.error("population", msg);
    } else {
      cfg.population.reset(pop);
    }
  }

  if (cfg.population && cfg.command == Command::Concentration && !cfg.concentration.theta.empty() &&
      cfg.concentration.theta.size() != scerm_population_dim(cfg.population.get()))
    rd.error("concentration.theta", "length does not match the population dimension");

  if (cfg.population && cfg.command == Command::Rates) {
    scerm_source_info si{};
    scerm_population_source_info(cfg.population.get(), &si);
    auto& r = cfg.rates;
    if (r.regime != SCERM_REGIME_NONE && !si.has_source && !(r.r && r.L))
      rd.error("rates", "source regimes need r and L (or a source generator)");
    if (r.regime == SCERM_REGIME_SOURCE_CAPACITY && !si.has_source && !(r.alpha && r.Q))
      rd.error("rates", "source_capacity needs alpha and Q (or a source generator)");
  }

  if (!errors.messages.empty()) return std::nullopt;
  return cfg;
}

}  // namespace scerm_cli
