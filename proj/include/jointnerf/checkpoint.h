#pragma once

#include <stdexcept>
#include <string>

#include "jointnerf/trainer.h"

namespace jointnerf {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout, all integers u64 and payloads f64, little endian:
//   "NERFMM01", record count, then per record
//   name length, name bytes, rank, extents[rank], payload (row-major).
// Record names: meta/<key> (scalars), theta/<parameter>, phi, t, focal,
// adam_state/<group>/{step,m/<parameter>,v/<parameter>}, loss_history.
void SaveCheckpoint(const TrainState& state, const std::string& path);
TrainState LoadCheckpoint(const std::string& path);

}  // namespace jointnerf
