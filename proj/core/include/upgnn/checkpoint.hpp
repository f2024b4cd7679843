#pragma once

#include <string>

#include "upgnn/model.hpp"

namespace upgnn {

// Flat, versioned binary file: magic, format version, ModelConfig, feature
// widths, then each named parameter matrix with its raw float32 payload.
// Round-trips bit-exactly on little-endian hosts.
void save_checkpoint(const UpliftModel& model, const std::string& path);

// Throws IoError when the file is unreadable or malformed.
UpliftModel load_checkpoint(const std::string& path);

}  // namespace upgnn
