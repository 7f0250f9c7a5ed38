#pragma once

#include <iosfwd>
#include <string>

#include "mmcrf/params.hpp"

namespace mmcrf {

// Text model file: header (version, penalty, row-order convention,
// modality specs, pair configs) followed by named matrices with explicit
// shapes. Values are written with round-trip-safe precision; reloading
// reproduces the bundle bit-exactly.
void write_model(const ParameterBundle& bundle, std::ostream& out);
ParameterBundle parse_model(std::istream& in, const std::string& name);

void save_model(const ParameterBundle& bundle, const std::string& path);
ParameterBundle load_model(const std::string& path);

std::string model_to_string(const ParameterBundle& bundle);

} // namespace mmcrf
