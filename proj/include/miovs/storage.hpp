#pragma once

#include <string>

#include "miovs/model.hpp"
#include "miovs/types.hpp"

namespace miovs {

// Binary formats, all little-endian, 64-bit floats on disk. The exact byte
// layouts are documented in docs/formats.md; a file's length is derivable
// from its header and readers reject both truncation and trailing bytes.

inline constexpr char kDatasetMagic[9] = "MIODS001";
inline constexpr char kCheckpointMagic[9] = "MIOCK001";

/// Writes the dataset to a temporary file and atomically renames it over
/// `path`.
void write_dataset(const std::string& path, const Dataset& dataset);

Dataset read_dataset(const std::string& path);

void write_checkpoint(const std::string& path, const ModelParams& params);

/// Reads and validates a checkpoint: magic, layer-shape chain against the
/// embedded config, exact file length, and finiteness of every value.
ModelParams read_checkpoint(const std::string& path);

}  // namespace miovs
