// Copyright 2026 The dsgd Authors
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

// Command line entry point.
//
// Exit codes: 0 success, 1 a requested bound validation failed, 2 config or
// usage error, 3 runtime failure (I/O, transport timeout, internal error).

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dsgd/config.hpp"
#include "dsgd/runner.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw dsgd::ConfigError("cannot open config file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_from_file(const std::string& path, bool force_bound_report) {
  dsgd::RunConfig cfg = dsgd::parse_config(read_file(path));
  if (force_bound_report) {
    cfg.emit_bound_report = true;
  }
  const dsgd::ExperimentOutcome outcome = dsgd::run_experiment(cfg, std::cout);
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsgd: distributed SGD protocol engine"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
  run_cmd->add_option("config", config_path, "key=value config file")
      ->required();

  auto* bounds_cmd = app.add_subcommand(
      "validate-bounds",
      "run an experiment and always emit and check the bound report");
  bounds_cmd->add_option("config", config_path, "key=value config file")
      ->required();

  std::uint32_t diag_p = 4;
  double diag_beta = 0.5;
  auto* diag_cmd = app.add_subcommand(
      "diagnose-mixing",
      "print closed-form vs enumerated mixing contraction factors");
  diag_cmd->add_option("--p", diag_p, "node count, 1 to 8")->required();
  diag_cmd->add_option("--beta", diag_beta, "mixing weight in [0, 1]")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // --help is not an error
  }

  try {
    if (run_cmd->parsed()) {
      return run_from_file(config_path, false);
    }
    if (bounds_cmd->parsed()) {
      return run_from_file(config_path, true);
    }
    if (diag_cmd->parsed()) {
      std::cout << dsgd::mixing_diagnostics_text(diag_p, diag_beta);
      return 0;
    }
  } catch (const dsgd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
