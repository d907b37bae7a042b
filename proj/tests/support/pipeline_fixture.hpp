#pragma once

#include "vrag/pipeline.hpp"

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace vrag::testing {

struct StepResult {
  std::vector<std::string> args;
  int exit_code = 0;
  std::string out;
  std::string err;
};

inline StepResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  StepResult r;
  r.exit_code = pipeline::run(args, out, err);
  r.args = std::move(args);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Every subcommand in order against the rule-mode mock. Stops at the first
// non-zero exit and returns all steps run so far.
inline std::vector<StepResult> run_mock_pipeline(const std::filesystem::path& config,
                                                 const std::filesystem::path& out, std::uint64_t seed) {
  const std::vector<std::vector<std::string>> steps{
      {"ingest"},         {"plan-sample"},     {"index"},           {"retrieve"},
      {"annotate-fkd"},   {"classify"},        {"build-fcot"},      {"export-stage", "1"},
      {"export-stage", "2"}, {"export-stage", "3"}, {"infer"},       {"score-rewards"},
      {"eval"},           {"report"}};
  std::vector<StepResult> results;
  for (const auto& step : steps) {
    std::vector<std::string> args = step;
    for (const auto& a : {std::string("--config"), config.string(), std::string("--out"), out.string(),
                          std::string("--seed"), std::to_string(seed), std::string("--mock")}) {
      args.push_back(a);
    }
    results.push_back(run_cli(std::move(args)));
    if (results.back().exit_code != 0) break;
  }
  return results;
}

}  // namespace vrag::testing
