#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace critdual {

// Outcome of one acceptance criterion. Runtime counts toward the pass flag.
struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  bool skipped = false;
  double seconds = 0, budget = 0;
  std::string detail;
  std::vector<std::pair<std::string, double>> metrics;
};

struct VerifyOptions {
  bool quick = false;     // only the criteria that finish in seconds
  std::vector<int> only;  // empty runs everything
  int jobs = 1;
  std::uint64_t seed = 1;
};

int criterion_count();
std::string criterion_name(int id);
// Budget in seconds for criterion id (1-based).
double criterion_budget(int id);
bool criterion_is_quick(int id);

CriterionResult run_criterion(int id, const VerifyOptions& opt = {});
std::vector<CriterionResult> run_acceptance(const VerifyOptions& opt = {});

// "PASS  3 dual/energy identity (12.3 s / 120 s): detail"
std::string format_line(const CriterionResult& r);

}  // namespace critdual
