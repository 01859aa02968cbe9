#pragma once

#include <string>

#include "aircade/data.hpp"
#include "aircade/model.hpp"

namespace aircade {

// Checkpoint container: magic 'ACDE', version u32, then a manifest of named
// tensors (name, shape, absolute byte offset) followed by raw little-endian
// f64 blocks. Alongside the model parameters it carries two reserved groups:
// '__meta__.config' (model architecture + seed) and the '__norm__.*'
// normalization statistics, so a checkpoint is self-contained for inference.
// Save-load-save round-trips are byte-exact.

void save_checkpoint(const std::string& path, const AirCadeModel& model, const NormStats& stats);

struct LoadedCheckpoint {
    AirCadeModel model;
    NormStats stats;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/// Header listing for `inspect`: name and shape per manifest entry.
struct CheckpointEntryInfo {
    std::string name;
    Shape shape;
    uint64_t offset = 0;
};
std::vector<CheckpointEntryInfo> read_checkpoint_manifest(const std::string& path);

}  // namespace aircade
