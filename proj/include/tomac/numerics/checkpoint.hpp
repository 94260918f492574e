#pragma once

#include "tomac/numerics/tensor.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace tomac::numerics
{

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class CheckpointVersionError : public CheckpointError
{
public:
  using CheckpointError::CheckpointError;
};

/// Parameter groups ("online", "target", ...) plus free-form metadata.
///
/// On disk: `manifest.txt` (key=value lines) and one flat little-endian float64 file per
/// tensor under `tensors/`.
struct Checkpoint
{
  std::map<std::string, std::string> metadata;
  std::map<std::string, ParamBundle> groups;
};

void write_checkpoint(const std::filesystem::path & dir, const Checkpoint & checkpoint);

/// Throws CheckpointVersionError when the manifest's format_version differs.
Checkpoint read_checkpoint(const std::filesystem::path & dir);

}  // namespace tomac::numerics
