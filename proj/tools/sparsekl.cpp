/*
 * Copyright 2026 The sparsekl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sparsekl/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
  CLI::App app{"Sparse variational Gaussian processes with finite-oracle verification"};
  std::string task;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("task", task, "fit-regression | fit-classification | fit-cox | verify | generate")->required();
  app.add_option("--config", config, "JSON run configuration")->required();
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--out", out, "output directory (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sparsekl::kExitConfig;
  }
  std::optional<std::filesystem::path> out_dir;
  if (out) out_dir = *out;
  return sparsekl::run_command(task, config, seed, out_dir, std::cout, std::cerr);
}
