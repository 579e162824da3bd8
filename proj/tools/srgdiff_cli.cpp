// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver for the experiment pipeline, built on the C API.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "srgdiff/srgdiff.h"

namespace {

const char* const kDescriptions[] = {
    "generate the labelled synthetic corpus",
    "train the Stage-1 autoencoder",
    "train the Stage-2 latent diffusion models",
    "reconstruct high-density test windows from low-density input",
    "compute signal, feature and downstream metrics",
    "render band-power scalp maps as SVG",
};

int run(const std::string& stage, const std::string& config_path, const std::string& output_dir) {
  srgdiff_config* config = nullptr;
  srgdiff_status status = srgdiff_config_load(config_path.c_str(), &config);
  if (status == SRGDIFF_OK && !output_dir.empty()) status = srgdiff_config_set_output_dir(config, output_dir.c_str());
  srgdiff_artifacts* artifacts = nullptr;
  if (status == SRGDIFF_OK) status = srgdiff_run_stage(config, stage.c_str(), &artifacts);
  if (status != SRGDIFF_OK) {
    std::fprintf(stderr, "srgdiff %s: %s\n", stage.c_str(), srgdiff_last_error());
  } else {
    for (size_t i = 0; i < srgdiff_artifacts_count(artifacts); ++i)
      std::printf("%s\n", srgdiff_artifacts_path(artifacts, i));
  }
  srgdiff_artifacts_free(artifacts);
  srgdiff_config_free(config);
  return srgdiff_exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-guided latent diffusion for EEG spatial super-resolution"};
  app.set_version_flag("--version", std::string(srgdiff_version()));
  app.require_subcommand(1, 1);

  std::string config_path, output_dir;
  std::vector<std::string> names;
  for (size_t i = 0; i < srgdiff_stage_count(); ++i) {
    auto* sub = app.add_subcommand(srgdiff_stage_name(i), kDescriptions[i]);
    sub->add_option("-c,--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", output_dir, "override the output directory");
    names.emplace_back(srgdiff_stage_name(i));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::fprintf(stderr, "%s", app.help().c_str());
    return 1;
  }
  for (const auto& name : names)
    if (app.got_subcommand(name)) return run(name, config_path, output_dir);
  return 1;
}
