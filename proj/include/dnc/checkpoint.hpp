#pragma once

#include <cstddef>
#include <string>

#include "dnc/trainer.hpp"

namespace dnc {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    int format_version = kCheckpointFormatVersion;
    TrainConfig config;
    std::size_t num_classes = 0;
    Model model;
    std::string rng_state;  // textual mt19937_64 state
};

Checkpoint make_checkpoint(const TrainState& state);

// Layout: a text manifest ("DNC-CHECKPOINT", key=value lines, one
// "array <name> <f64|u64> <rows> <cols>" line per array, "payload_bytes=<n>",
// "end") followed by the arrays as raw little-endian 64-bit values in manifest
// order. Values are stored at full double precision.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dnc
