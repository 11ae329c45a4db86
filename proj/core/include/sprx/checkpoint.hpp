#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "sprx/model.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  nlohmann::json meta = nlohmann::json::object();  // training config, step, seed
  ParamSet params;
  std::map<std::string, Tensor> state;  // optimizer moments, quantizer scales
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Layout: "SRXCKPT\0", u32 version, u32 header length, JSON header, then
/// blocks of (u32 name length, name, u32 rank, u32 extents..., u64 count,
/// float32 data). Written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws CheckpointError on bad magic, version, truncation, or parameters
/// that do not match the layout implied by the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, and additionally rejects a stored config that differs from
/// `expected`, naming the first differing key.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
