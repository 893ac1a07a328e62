#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ahrm/ppo.hpp"

namespace ahrm::ppo {

// Checkpoint layout, all integers little-endian:
//
//   char[8]  magic "AHRMCKPT"
//   u32      format version (1)
//   u32      obs_dim
//   u32      act_dim
//   u32      number of hidden layers H
//   u32[H]   hidden widths
//   u64      parameter count P
//   f64[P]   policy layers, value layers (each: weight column-major, bias),
//            then log_std
//
// Any trailing byte is an error.

std::vector<unsigned char> encode_checkpoint(const NetParams& params);
NetParams decode_checkpoint(const std::vector<unsigned char>& bytes);

void save(const NetParams& params, const std::filesystem::path& path);

/// Throws ParseError (with byte offset) on a malformed file and ShapeMismatch
/// when the stored dimensions differ from the expected ones.
NetParams load(const std::filesystem::path& path, std::optional<int> expected_obs_dim = {},
               std::optional<int> expected_act_dim = {});

}  // namespace ahrm::ppo
