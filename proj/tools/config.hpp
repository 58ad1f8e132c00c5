#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <scerm.h>

namespace scerm_cli {

enum class Command { Solve, Diagnose, Verify, Rates, Concentration };

const char* command_name(Command c);

struct PopulationDeleter {
  void operator()(scerm_population* p) const { scerm_population_free(p); }
};
using PopulationPtr = std::unique_ptr<scerm_population, PopulationDeleter>;

struct SolveSection {
  std::vector<double> lambdas;
  long n = 0;  // 0 solves on the population itself
};

struct DiagnoseSection {
  std::vector<double> lambda_grid;  // empty: dyadic default
};

struct VerifySection {
  long trials_per_kind = 10000;
};

struct RatesSection {
  scerm_regime regime = SCERM_REGIME_NONE;
  std::vector<long> n_grid;
  long replicates = 200;
  double delta = 0.1;
  std::vector<double> lambda_override;
  std::optional<double> c0;
  std::optional<double> r, alpha, L, Q;
  int burn_in = 1;
  std::optional<double> tolerance;  // |fitted - theoretical| allowed before exit 1
  bool assert_bound = false;        // exit 1 on guarded rows above 2 delta + 3 sigma
};

struct ConcentrationSection {
  std::string kind = "hessian";  // or "gradient"
  double lambda = 0;
  long n = 0;
  long replicates = 500;
  double delta = 0.1;
  double k = 4;
  std::vector<double> theta;  // hessian only; empty means theta*
};

struct RunConfig {
  Command command = Command::Solve;
  std::uint64_t seed = 0;
  std::string output = "out";
  std::string population_json;
  PopulationPtr population;
  scerm_solver_config solver{};
  SolveSection solve;
  DiagnoseSection diagnose;
  VerifySection verify;
  RatesSection rates;
  ConcentrationSection concentration;
};

struct ConfigErrors {
  std::vector<std::string> messages;  // each "path: message"
};

// Parses and validates a JSON config document. Returns nullopt and fills `errors`
// when the document is invalid; nothing is computed beyond building the population.
std::optional<RunConfig> parse_config(const std::string& text, ConfigErrors& errors);

}  // namespace scerm_cli
