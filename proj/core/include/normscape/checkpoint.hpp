#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "normscape/model.hpp"

namespace normscape {

// Optimizer-side state stored with a checkpoint so training can resume and
// reproduce an uninterrupted run exactly.
struct TrainStateInfo {
    int64_t epoch = 0;        // last completed epoch
    int64_t global_step = 0;
    double lr = 0.0;
    double best_validation_error = std::numeric_limits<double>::infinity();
    int64_t stale_epochs = 0;
    int64_t lr_drops = 0;
    std::string setting;      // norm-setting token
    bool present = false;
};

// A checkpoint is a JSON manifest at `path` (layer names, subnet tags,
// shapes, dtype, byte offsets, model config, optional train state) plus a
// raw little-endian array file at `path + ".bin"`. Round-trips are
// bit-exact.
template <std::floating_point T>
void save_checkpoint(const std::string& path, const ModelParams<T>& params,
                     const TrainStateInfo* state);

template <std::floating_point T>
ModelParams<T> load_checkpoint(const std::string& path, TrainStateInfo* state_out);

// Dtype token stored in a checkpoint manifest ("f32"/"f64"), for dispatch
// before choosing a load precision.
std::string checkpoint_dtype(const std::string& path);

}  // namespace normscape
