#pragma once

#include <string>

#include "osda/model.hpp"

namespace osda {

// Little-endian binary checkpoint:
//   magic "OSDACKP1", u32 version, u32 layer count,
//   per layer: u32 in, u32 out, u32 activation,
//   u32 feature_dim, u32 n_shared, u32 n_private,
//   then all parameters in declaration order as f64
//   (layer weights row-major, layer bias, classifier columns).
void save_checkpoint(const std::string& path, const Model& m);

// Validates the header before reading parameters.
Model load_checkpoint(const std::string& path);

}  // namespace osda
