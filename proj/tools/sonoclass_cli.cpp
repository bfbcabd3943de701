// Copyright 2026 The sonoclass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "sonoclass/config.hpp"
#include "sonoclass/error.hpp"
#include "sonoclass/pipeline.hpp"

namespace {

// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reproducible cross-validated training and evaluation of grayscale "
               "ultrasound image classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::string profile;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int fold = -1;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration file");
    cmd->add_option("--profile", profile, "Profile: desk or reproduction");
    cmd->add_option("--seed", seed, "Override the run seed")
        ->each([&seed_set](const std::string&) { seed_set = true; });
  };

  CLI::App* synth =
      app.add_subcommand("synth", "Generate a synthetic dataset at the configured manifest path");
  CLI::App* prepare =
      app.add_subcommand("prepare", "Standardize manifest images into the prepared store");
  CLI::App* split =
      app.add_subcommand("split", "Build and verify the patient-grouped fold plan");
  CLI::App* train = app.add_subcommand("train", "Train the configured backbones fold by fold");
  train->add_option("--fold", fold, "Train only this fold index");
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score the test partitions with the best checkpoints");
  CLI::App* report =
      app.add_subcommand("report", "Aggregate metrics into the final report and figures");
  for (CLI::App* cmd : {synth, prepare, split, train, evaluate, report}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidationError;
  }

  try {
    sonoclass::RunConfig config =
        config_path.empty()
            ? sonoclass::default_config(profile.empty() ? "desk" : profile)
            : sonoclass::load_run_config(config_path, profile);
    if (seed_set) {
      config.seed = seed;
      config.train.seed = seed;
      config.synth.seed = seed;
    }
    sonoclass::validate_run_config(config);

    if (app.got_subcommand(synth)) {
      sonoclass::cmd_synth(config);
    } else if (app.got_subcommand(prepare)) {
      sonoclass::cmd_prepare(config);
    } else if (app.got_subcommand(split)) {
      sonoclass::cmd_split(config);
    } else if (app.got_subcommand(train)) {
      sonoclass::cmd_train(config, fold);
    } else if (app.got_subcommand(evaluate)) {
      sonoclass::cmd_evaluate(config);
    } else if (app.got_subcommand(report)) {
      sonoclass::cmd_report(config);
    }
    return kOk;
  } catch (const sonoclass::PipelineError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return sonoclass::is_validation_error(e.code()) ? kValidationError : kRuntimeError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
}
