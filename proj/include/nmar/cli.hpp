// Command-line pipeline: synth, train, predict, eval, compare.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmar/data.hpp"
#include "nmar/model.hpp"
#include "nmar/training.hpp"

namespace nmar {

/// Everything a command can be configured with. Defaults, then a JSON file
/// (--config), then flags; the merged result is written to <out>/config.json.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "nmar_out";

  std::string corpus;
  std::string dev;
  std::string checkpoint;
  std::string vectors;
  std::string dev_vectors;
  std::string preds_a;
  std::string preds_b;

  Hyperparams hp;
  TrainerConfig trainer;
  SynthSpec synth;
  int dev_bags = 0;
  int test_bags = 0;
  int iterations = 10000;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Overrides only the fields present in j.
void from_json(const nlohmann::json& j, RunConfig& c);

/// Runs one command line (args excludes the program name) and returns the
/// process exit code: 0 success, 1 runtime failure, 2 usage or validation error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nmar
