#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gait/model.hpp"

namespace gait {

// One serialized array: logical dims plus a 2D container holding the values.
// For matrices dims = {rows, cols}; vectors use {n} with an n×1 container.
struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    Eigen::MatrixXd data;
    std::uint8_t dtype = 2;  // payload precision: 1 = float32, 2 = float64
};

// Generic container IO. Byte layout (all integers little-endian):
//   magic "GGCK" | u32 version (=1) | u32 meta_len | meta (UTF-8 JSON)
//   | u32 tensor_count | per tensor: u32 name_len | name | u32 ndim
//   | u32 dims[ndim] | u8 dtype (1=f32, 2=f64) | row-major payload
struct CheckpointFile {
    std::string meta_json;
    std::vector<NamedTensor> tensors;
};

void save_checkpoint_file(const CheckpointFile& ckpt, const std::string& path);
CheckpointFile load_checkpoint_file(const std::string& path);

// Optimizer and loop counters carried alongside the model so training can
// resume exactly where it stopped.
struct TrainState {
    long next_epoch = 0;
    long global_step = 0;
    long adam_t = 0;
    std::vector<NamedTensor> opt_tensors;  // adam first/second moments
};

// Model checkpoints are self-describing: the meta JSON holds the full model
// configuration; tensors hold parameters and batch-norm running statistics
// (and, when a TrainState is supplied, optimizer moments under "adam.").
template <typename S>
void save_model_checkpoint(const GaitModel<S>& model, const std::string& path,
                           const TrainState* train_state = nullptr);

template <typename S>
GaitModel<S> load_model_checkpoint(const std::string& path, TrainState* train_state = nullptr);

}  // namespace gait
