#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gait/common.hpp"
#include "gait/features.hpp"
#include "gait/rng.hpp"
#include "gait/skeleton.hpp"
#include "gait/tensor.hpp"

namespace gait {

struct BlockConfig {
    int in_channels = 0;
    int out_channels = 0;
    int temporal_stride = 1;
    bool residual = false;
};

struct ModelConfig {
    int input_channels = 20;
    std::vector<BlockConfig> blocks;
    int embed_dim = 256;
    double dropout = 0.5;
    int temporal_kernel = 9;
    std::string skeleton = "openpose18";
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;

    // Default stack: 8 graph-temporal blocks widening 64→128→256 with
    // stride-2 temporal downsampling at each widening.
    static ModelConfig defaults() {
        ModelConfig cfg;
        cfg.blocks = chain({64, 64, 64, 128, 128, 128, 256, 256}, {4, 7}, cfg.input_channels);
        return cfg;
    }

    // Compact four-block variant for desk-scale experiments.
    static ModelConfig reduced() {
        ModelConfig cfg;
        cfg.blocks = chain({64, 64, 128, 256}, {3, 4}, cfg.input_channels);
        return cfg;
    }

    // Builds a block list from output widths; strided_blocks lists 1-based
    // positions that downsample time by 2. Residuals are used exactly where
    // shape is preserved (equal channels, stride 1).
    static std::vector<BlockConfig> chain(const std::vector<int>& widths,
                                          const std::vector<int>& strided_blocks, int c_in) {
        std::vector<BlockConfig> blocks;
        int prev = c_in;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            BlockConfig b;
            b.in_channels = prev;
            b.out_channels = widths[i];
            for (int s : strided_blocks) {
                if (s == static_cast<int>(i) + 1) b.temporal_stride = 2;
            }
            b.residual = b.in_channels == b.out_channels && b.temporal_stride == 1;
            blocks.push_back(b);
            prev = widths[i];
        }
        return blocks;
    }

    void validate() const {
        check_arg(input_channels >= 1, "model config: input_channels must be positive");
        check_arg(embed_dim >= 1, "model config: embed_dim must be positive");
        check_arg(temporal_kernel >= 1 && temporal_kernel % 2 == 1,
                  "model config: temporal_kernel must be odd");
        check_arg(dropout >= 0.0 && dropout < 1.0, "model config: dropout must be in [0, 1)");
        check_arg(!blocks.empty(), "model config: needs at least one block");
        int prev = input_channels;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const BlockConfig& b = blocks[i];
            check_arg(b.in_channels == prev,
                      "model config: block " + std::to_string(i) + " expects " +
                          std::to_string(b.in_channels) + " input channels but receives " +
                          std::to_string(prev));
            check_arg(b.out_channels >= 1, "model config: block " + std::to_string(i) +
                                               " has non-positive output channels");
            check_arg(b.temporal_stride == 1 || b.temporal_stride == 2,
                      "model config: block " + std::to_string(i) + " stride must be 1 or 2");
            if (b.residual) {
                check_arg(b.in_channels == b.out_channels && b.temporal_stride == 1,
                          "model config: block " + std::to_string(i) +
                              " cannot be residual (shape changes and no projection exists)");
            }
            prev = b.out_channels;
        }
    }

    // Temporal extents seen by each block output for an input of length T.
    std::vector<int> temporal_trace(int T) const {
        std::vector<int> trace{T};
        for (const BlockConfig& b : blocks) {
            T = (T + b.temporal_stride - 1) / b.temporal_stride;
            trace.push_back(T);
        }
        return trace;
    }
};

struct Embedding {
    Eigen::VectorXd vector;  // unit norm
    std::string label;       // subject id
    int view = 0;            // degrees
};

// The embedding network: input batch-norm, a stack of graph-temporal blocks,
// global mean pooling, a linear head, and projection to the unit sphere.
// Scalar type S is float for speed or double for verification.
template <typename S>
class GaitModel {
  public:
    using Mat = typename Tape<S>::Mat;

    struct Param {
        std::string name;
        Mat value;
        Mat grad;  // filled by collect_grads after a backward pass
    };

    ModelConfig cfg;
    Eigen::MatrixXd adjacency;  // normalized, kept in double as the master copy
    std::vector<Param> params;
    std::vector<BnState<S>> bn_states;  // [0] input bn, then 2 per block

    static GaitModel create(const ModelConfig& config, std::uint64_t seed,
                            const SkeletonDef* skeleton = nullptr) {
        config.validate();
        GaitModel model;
        model.cfg = config;

        SkeletonDef resolved;
        if (skeleton == nullptr) {
            resolved = skeleton_by_name(config.skeleton);
            skeleton = &resolved;
        }
        model.adjacency = normalize_adjacency(build_adjacency(*skeleton)).matrix;
        model.adjacency_s_ = model.adjacency.cast<S>();

        auto add_param = [&model](const std::string& name, int rows, int cols) -> Mat& {
            model.params.push_back(Param{name, Mat::Zero(rows, cols), Mat{}});
            return model.params.back().value;
        };
        auto he_uniform = [&](Mat& w, int fan_in, std::size_t index) {
            const double limit = std::sqrt(6.0 / fan_in);
            Rng rng(derive_seed(model_seed(seed), "init", {index}));
            for (long i = 0; i < w.size(); ++i) {
                w.data()[i] = static_cast<S>(rng.uniform(-limit, limit));
            }
        };
        auto glorot_uniform = [&](Mat& w, int fan_in, int fan_out, std::size_t index) {
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            Rng rng(derive_seed(model_seed(seed), "init", {index}));
            for (long i = 0; i < w.size(); ++i) {
                w.data()[i] = static_cast<S>(rng.uniform(-limit, limit));
            }
        };

        add_param("input_bn.gamma", config.input_channels, 1).setOnes();
        add_param("input_bn.beta", config.input_channels, 1);
        model.bn_states.push_back(BnState<S>::init(config.input_channels));

        for (std::size_t i = 0; i < config.blocks.size(); ++i) {
            const BlockConfig& b = config.blocks[i];
            const std::string prefix = "block" + std::to_string(i) + ".";
            Mat& w = add_param(prefix + "gcn.weight", b.in_channels, b.out_channels);
            he_uniform(w, b.in_channels, model.params.size() - 1);
            add_param(prefix + "bn1.gamma", b.out_channels, 1).setOnes();
            add_param(prefix + "bn1.beta", b.out_channels, 1);
            model.bn_states.push_back(BnState<S>::init(b.out_channels));
            Mat& kernel = add_param(prefix + "tconv.kernel", b.out_channels,
                                    config.temporal_kernel * b.out_channels);
            he_uniform(kernel, config.temporal_kernel * b.out_channels, model.params.size() - 1);
            add_param(prefix + "bn2.gamma", b.out_channels, 1).setOnes();
            add_param(prefix + "bn2.beta", b.out_channels, 1);
            model.bn_states.push_back(BnState<S>::init(b.out_channels));
        }

        const int c_last = config.blocks.back().out_channels;
        Mat& fc_w = add_param("fc.weight", config.embed_dim, c_last);
        glorot_uniform(fc_w, c_last, config.embed_dim, model.params.size() - 1);
        add_param("fc.bias", config.embed_dim, 1);
        return model;
    }

    long param_count() const {
        long n = 0;
        for (const Param& p : params) n += p.value.size();
        return n;
    }

    int joint_count() const { return static_cast<int>(adjacency.rows()); }

    Param* find_param(const std::string& name) {
        for (Param& p : params) {
            if (p.name == name) return &p;
        }
        return nullptr;
    }

    struct Forward {
        VarId embeddings = -1;         // embed_dim × B, unit-norm columns
        std::vector<VarId> param_ids;  // parallel to params
    };

    // Hooks for gradient checking: a caller may supply its own tape nodes for
    // selected parameters (by index) or for the input, so finite differences
    // can vary exactly one leaf while the rest stay fixed.
    struct ForwardOptions {
        bool train = false;
        std::uint64_t dropout_seed = 0;
        bool update_running = true;
        const std::vector<VarId>* param_ids = nullptr;
        VarId input_id = -1;
    };

    // Builds the network graph on the tape. In train mode, dropout masks are
    // derived from dropout_seed and batch statistics drive the normalization
    // (optionally updating the running averages); eval mode is deterministic.
    Forward forward(Tape<S>& tape, Mat input, Shape4 shape, bool train,
                    std::uint64_t dropout_seed = 0, bool update_running = true) {
        ForwardOptions opt;
        opt.train = train;
        opt.dropout_seed = dropout_seed;
        opt.update_running = update_running;
        return forward(tape, std::move(input), shape, opt);
    }

    Forward forward(Tape<S>& tape, Mat input, Shape4 shape, const ForwardOptions& opt) {
        check_arg(shape.c == cfg.input_channels,
                  "model forward: input has " + std::to_string(shape.c) + " channels, expected " +
                      std::to_string(cfg.input_channels));
        check_arg(shape.n == joint_count(),
                  "model forward: input has " + std::to_string(shape.n) + " joints, skeleton has " +
                      std::to_string(joint_count()));

        const bool train = opt.train;
        const std::uint64_t dropout_seed = opt.dropout_seed;
        const bool update_running = opt.update_running;

        Forward fwd;
        fwd.param_ids.reserve(params.size());
        if (opt.param_ids != nullptr) {
            check_arg(opt.param_ids->size() == params.size(),
                      "model forward: external parameter list has wrong length");
            fwd.param_ids = *opt.param_ids;
        } else {
            for (Param& p : params) {
                fwd.param_ids.push_back(tape.leaf(p.value, train));
            }
        }
        auto pid = [&fwd](std::size_t i) { return fwd.param_ids[i]; };

        VarId h = opt.input_id >= 0 ? opt.input_id : tape.leaf(std::move(input), shape, false);
        if (opt.input_id >= 0) {
            check_arg(tape.shape(h) == shape, "model forward: external input shape mismatch");
        }
        std::size_t pi = 0;
        std::size_t bni = 0;
        const S momentum = static_cast<S>(cfg.bn_momentum);
        const S epsilon = static_cast<S>(cfg.bn_epsilon);

        VarId g0 = pid(pi++), b0 = pid(pi++);
        h = batch_norm(tape, h, g0, b0, bn_states[bni++], train, momentum, epsilon,
                       update_running);

        for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
            const BlockConfig& blk = cfg.blocks[i];
            VarId w = pid(pi++);
            VarId bn1_g = pid(pi++), bn1_b = pid(pi++);
            VarId kernel = pid(pi++);
            VarId bn2_g = pid(pi++), bn2_b = pid(pi++);

            VarId g = spatial_gcn(tape, h, adjacency_s_, w);
            g = batch_norm(tape, g, bn1_g, bn1_b, bn_states[bni++], train, momentum, epsilon,
                           update_running);
            g = relu(tape, g);
            g = dropout(tape, g, cfg.dropout, train, derive_seed(dropout_seed, "dropout", {i}));
            g = conv_temporal(tape, g, kernel, cfg.temporal_kernel, blk.temporal_stride);
            g = batch_norm(tape, g, bn2_g, bn2_b, bn_states[bni++], train, momentum, epsilon,
                           update_running);
            if (blk.residual) g = add(tape, g, h);
            h = relu(tape, g);
        }

        VarId pooled = mean_pool_tn(tape, h);
        VarId emb = linear(tape, pooled, pid(pi), pid(pi + 1));
        pi += 2;
        fwd.embeddings = l2_normalize(tape, emb);
        return fwd;
    }

    // Copies gradients off the tape into params[i].grad (zeros if untouched).
    void collect_grads(Tape<S>& tape, const Forward& fwd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (tape.has_grad(fwd.param_ids[i])) {
                params[i].grad = tape.grad(fwd.param_ids[i]);
            } else {
                params[i].grad = Mat::Zero(params[i].value.rows(), params[i].value.cols());
            }
        }
    }

    const Mat& adjacency_cast() const { return adjacency_s_; }

  private:
    static std::uint64_t model_seed(std::uint64_t seed) { return derive_seed(seed, "model"); }

    Mat adjacency_s_;  // adjacency cast to the working scalar type
};

// Packs feature-tensor entries [first, first+count) into one network input.
template <typename S>
typename Tape<S>::Mat pack_batch(const FeatureTensor& ft, int first, int count) {
    check_arg(first >= 0 && count >= 1 && first + count <= ft.batch(),
              "pack_batch: entry range out of bounds");
    const long tn = static_cast<long>(ft.frames) * ft.joints;
    typename Tape<S>::Mat out(ft.channels(), static_cast<long>(count) * tn);
    for (int b = 0; b < count; ++b) {
        out.middleCols(static_cast<long>(b) * tn, tn) = ft.data[first + b].cast<S>();
    }
    return out;
}

// Eval-mode embedding of every entry, processed in chunks to bound memory.
// Views are attached per entry when provided.
template <typename S>
std::vector<Embedding> embed(GaitModel<S>& model, const FeatureTensor& features,
                             const std::vector<int>* views = nullptr, int chunk = 64) {
    check_arg(chunk >= 1, "embed: chunk size must be positive");
    std::vector<Embedding> out;
    const int B = features.batch();
    for (int start = 0; start < B; start += chunk) {
        const int count = std::min(chunk, B - start);
        Tape<S> tape;
        Shape4 shape{count, features.channels(), features.frames, features.joints};
        auto fwd = model.forward(tape, pack_batch<S>(features, start, count), shape,
                                 /*train=*/false);
        const auto& emb = tape.value(fwd.embeddings);
        for (int b = 0; b < count; ++b) {
            Embedding e;
            e.vector = emb.col(b).template cast<double>();
            e.label = features.labels[start + b];
            e.view = views != nullptr ? (*views)[start + b] : 0;
            out.push_back(std::move(e));
        }
    }
    return out;
}

}  // namespace gait
