#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "moppo/autodiff.hpp"
#include "moppo/error.hpp"

namespace moppo {

class CheckpointError : public InputError {
 public:
  using InputError::InputError;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json meta;
  ParameterSet params;
};

/// Layout: magic "MOPPOCKP", u32 version, u64 metadata length, metadata JSON,
/// u32 array count, then per array u32 name length, name, u64 rows, u64 cols,
/// rows*cols little-endian doubles; finally the hex SHA-256 of everything before it (64 bytes).
std::string encode_checkpoint(const ParameterSet& params, const nlohmann::json& meta);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const ParameterSet& params, const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace moppo
