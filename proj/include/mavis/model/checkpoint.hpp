// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned checkpoint container: named sections of shape-annotated parameter
// arrays plus the originating configuration. Loading into a live model
// validates both the config and the parameter structure and refuses on any
// mismatch.
//
// Layout (docs/FORMATS.md): "MVSC1\n" + u64 header length + header JSON +
// raw doubles (little-endian), concatenated in header order.

#ifndef MAVIS_MODEL_CHECKPOINT_HPP
#define MAVIS_MODEL_CHECKPOINT_HPP

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mavis/nn.hpp"

namespace mavis::model {

struct CheckpointData {
  std::string kind;  // "pretrain" | "finetune"
  nlohmann::json config;
  nlohmann::json extra;  // step counters, optimizer moments, schedules
  // section -> ordered (name, tensor)
  std::map<std::string, std::vector<std::pair<std::string, Tensor>>> sections;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const std::vector<std::pair<std::string, const ParamStore*>>& sections,
                     const nlohmann::json& config, const nlohmann::json& extra = {});

CheckpointData load_checkpoint(const std::filesystem::path& path);

// Copies a loaded section into a live store; refuses on missing/extra
// parameters or shape mismatches.
void apply_section(ParamStore& store, const CheckpointData& ckpt, const std::string& section);

// Compares a stored config subtree against the expected one and throws a
// UserError naming the path on mismatch.
void require_config_match(const nlohmann::json& stored, const nlohmann::json& expected,
                          const std::string& what);

// Short hex fingerprint of a config json (used in checkpoint file names).
std::string config_fingerprint(const nlohmann::json& config);

}  // namespace mavis::model

#endif  // MAVIS_MODEL_CHECKPOINT_HPP
