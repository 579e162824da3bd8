// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/srgdiff.h"

#include <array>
#include <exception>
#include <filesystem>
#include <functional>
#include <new>
#include <string>
#include <vector>

#include "srgdiff/error.hpp"
#include "srgdiff/experiment.hpp"

struct srgdiff_config {
  srgdiff::experiment::ExperimentConfig value;
  std::string output_dir;
};

struct srgdiff_artifacts {
  std::vector<std::string> paths;
};

namespace {

using srgdiff::experiment::ExperimentConfig;
using StageFn = std::vector<std::filesystem::path> (*)(const ExperimentConfig&);

struct Stage {
  const char* name;
  StageFn run;
};

constexpr std::array<Stage, 6> kStages{{
    {"synth", srgdiff::experiment::run_synth},
    {"train-vae", srgdiff::experiment::run_train_vae},
    {"train-sr", srgdiff::experiment::run_train_sr},
    {"superres", srgdiff::experiment::run_superres},
    {"eval", srgdiff::experiment::run_eval},
    {"topomap", srgdiff::experiment::run_topomap},
}};

thread_local std::string last_error;

srgdiff_status fail(srgdiff_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs body, mapping exceptions onto status codes.
srgdiff_status guarded(const std::function<void()>& body) {
  try {
    body();
    last_error.clear();
    return SRGDIFF_OK;
  } catch (const srgdiff::ConfigError& e) {
    return fail(SRGDIFF_ERR_CONFIG, e.what());
  } catch (const srgdiff::IoError& e) {
    return fail(SRGDIFF_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SRGDIFF_ERR_IO, e.what());
  } catch (const srgdiff::FormatError& e) {
    return fail(SRGDIFF_ERR_FORMAT, e.what());
  } catch (const srgdiff::IntegrityError& e) {
    return fail(SRGDIFF_ERR_FORMAT, e.what());
  } catch (const srgdiff::NumericalError& e) {
    return fail(SRGDIFF_ERR_NUMERICAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SRGDIFF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SRGDIFF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SRGDIFF_ERR_INTERNAL, "unknown error");
  }
}

srgdiff_status make_config(ExperimentConfig value, srgdiff_config** out) {
  *out = new srgdiff_config{std::move(value), {}};
  (*out)->output_dir = (*out)->value.output_dir.string();
  return SRGDIFF_OK;
}

}  // namespace

extern "C" {

const char* srgdiff_version(void) { return "1.0.0"; }

const char* srgdiff_last_error(void) { return last_error.c_str(); }

int srgdiff_exit_code(srgdiff_status status) {
  if (status == SRGDIFF_OK) return 0;
  if (status == SRGDIFF_ERR_CONFIG || status == SRGDIFF_ERR_ARGUMENT) return 1;
  return 2;
}

srgdiff_status srgdiff_config_load(const char* path, srgdiff_config** out) {
  if (!path || !out) return fail(SRGDIFF_ERR_ARGUMENT, "null argument to srgdiff_config_load");
  *out = nullptr;
  return guarded([&] { make_config(ExperimentConfig::load(path), out); });
}

srgdiff_status srgdiff_config_parse(const char* text, const char* base_dir, srgdiff_config** out) {
  if (!text || !out) return fail(SRGDIFF_ERR_ARGUMENT, "null argument to srgdiff_config_parse");
  *out = nullptr;
  return guarded([&] {
    make_config(ExperimentConfig::parse(text, base_dir ? std::filesystem::path(base_dir) : std::filesystem::path{}), out);
  });
}

void srgdiff_config_free(srgdiff_config* config) { delete config; }

const char* srgdiff_config_output_dir(const srgdiff_config* config) {
  return config ? config->output_dir.c_str() : "";
}

srgdiff_status srgdiff_config_set_output_dir(srgdiff_config* config, const char* dir) {
  if (!config || !dir) return fail(SRGDIFF_ERR_ARGUMENT, "null argument to srgdiff_config_set_output_dir");
  if (!*dir) return fail(SRGDIFF_ERR_CONFIG, "output directory must not be empty");
  return guarded([&] {
    config->value.output_dir = dir;
    config->output_dir = dir;
  });
}

size_t srgdiff_stage_count(void) { return kStages.size(); }

const char* srgdiff_stage_name(size_t index) { return index < kStages.size() ? kStages[index].name : nullptr; }

srgdiff_status srgdiff_run_stage(const srgdiff_config* config, const char* stage, srgdiff_artifacts** out) {
  if (out) *out = nullptr;
  if (!config || !stage) return fail(SRGDIFF_ERR_ARGUMENT, "null argument to srgdiff_run_stage");
  for (const auto& s : kStages) {
    if (std::string(stage) != s.name) continue;
    return guarded([&] {
      auto paths = s.run(config->value);
      if (!out) return;
      auto* list = new srgdiff_artifacts;
      for (const auto& p : paths) list->paths.push_back(p.string());
      *out = list;
    });
  }
  return fail(SRGDIFF_ERR_CONFIG, std::string("unknown stage '") + stage + "'");
}

size_t srgdiff_artifacts_count(const srgdiff_artifacts* artifacts) { return artifacts ? artifacts->paths.size() : 0; }

const char* srgdiff_artifacts_path(const srgdiff_artifacts* artifacts, size_t index) {
  if (!artifacts || index >= artifacts->paths.size()) return nullptr;
  return artifacts->paths[index].c_str();
}

void srgdiff_artifacts_free(srgdiff_artifacts* artifacts) { delete artifacts; }

srgdiff_status srgdiff_summary_value(const srgdiff_config* config, const char* key, double* value) {
  if (!config || !key || !value) return fail(SRGDIFF_ERR_ARGUMENT, "null argument to srgdiff_summary_value");
  return guarded([&] {
    const auto path = srgdiff::experiment::Layout{config->value.output_dir}.summary();
    if (!std::filesystem::exists(path)) throw srgdiff::ConfigError("missing evaluation summary; run eval first");
    const auto summary = srgdiff::experiment::read_summary(path);
    auto it = summary.find(key);
    if (it == summary.end()) throw srgdiff::ConfigError(std::string("summary has no key '") + key + "'");
    *value = it->second;
  });
}

}  // extern "C"
