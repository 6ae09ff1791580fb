#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "deskflow/params.hpp"

namespace deskflow::nn {

// Layout: a text header
//   deskflow-checkpoint v1\n
//   config_hash <hex>\n
//   tensors <count>\n
//   end\n
// then per tensor: uint32 name length, name bytes, uint32 ndim (4), 4 x int32
// shape, float32 data. All binary fields little-endian.

struct Checkpoint {
  std::string config_hash;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

std::string checkpoint_bytes(const ParamSet<float>& params, const std::string& config_hash);
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamSet<float>& params,
                     const std::string& config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into params by name. Every parameter must be
/// present with a matching shape; extra tensors are an error too.
void assign_checkpoint(const Checkpoint& ckpt, ParamSet<float>& params);

}  // namespace deskflow::nn
