#pragma once

#include <string>

#include "gfra/access.hpp"

namespace gfra {

// Binary instance container, little-endian:
//   "GFRA" | version u32 | m u32 | n u32 | batch_size u32
//   A row-major f64 (m*n), written once
//   per instance: x_true f64[n] | y f64[m] | support count u32 + indices u32
//                 | snr_db f64 | noise_sigma f64
void save_batch(const std::string& path, const PilotMatrix& pilots, const Batch& batch);
std::pair<PilotMatrix, Batch> load_batch(const std::string& path);

} // namespace gfra
