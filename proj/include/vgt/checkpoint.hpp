// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoints: little-endian, magic "VGTK", u32 format version, u32
// record count, then length-prefixed named records.
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vgt/config.hpp"
#include "vgt/model.hpp"
#include "vgt/optim.hpp"

namespace vgt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  Vocab vocab;
  ParamStore params;
  OptimizerState optimizer;
  std::map<std::string, std::string> rng;  // named stream states
  std::uint64_t epoch = 0;                 // completed epochs
  std::map<std::string, double> scalars;   // training bookkeeping
  std::vector<std::string> answers;        // open-ended answer set

  /// The model described by config + vocab with these parameters. Errors if
  /// the parameter names or shapes do not match the config.
  Model model() const;
};

std::string serialize_checkpoint(const Checkpoint& ck);
/// All-or-nothing: a truncated or corrupted buffer throws before anything
/// is returned.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

/// Model config with the sizes that follow the vocabulary filled in.
ModelConfig model_config(const RunConfig& cfg, const Vocab& vocab);

}  // namespace vgt
