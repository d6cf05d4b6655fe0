#pragma once

#include <map>
#include <string>

#include "imit/core/param.hpp"

namespace imit {

// On-disk model format: `<path>` holds a structured-text manifest (parameter
// names, shapes, offsets, a content hash, and free-form metadata such as spec
// fields, seed, and the loss log) and `<path>.f64` holds every value as a flat
// little-endian 64-bit-real array in manifest order.
struct Checkpoint {
    ParamVector params;
    std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::string& path, const ParamVector& params,
                     const std::map<std::string, std::string>& meta = {});

// Validates shapes, offsets, array length, and the content hash; failures
// name the offending parameter or file.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace imit
