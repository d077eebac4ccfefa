#pragma once

// Single-file model checkpoint, all integers and floats little-endian:
//
//   "VMF1"
//   u32 config_bytes, config text (flat "key = value" lines)
//   u32 record_count
//   record_count x { u32 name_bytes, name, u32 rank, rank x u64 extent,
//                    prod(extent) x f64 value }

#include "varmaformer/parameter.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace varmaformer {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string config_text;
  ParameterSnapshot parameters;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace varmaformer
