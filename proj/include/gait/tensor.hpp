#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gait/common.hpp"
#include "gait/rng.hpp"

namespace gait {

// Logical extents of a batched feature map (B, C, T, N). The value itself is
// stored as a C × (B·T·N) matrix whose column (b·T + t)·N + n holds the feature
// vector of joint n at frame t of batch entry b. Plain matrices (weights,
// embeddings) use c = rows, b = columns, t = n = 1.
struct Shape4 {
    int b = 1, c = 1, t = 1, n = 1;

    long cols() const { return static_cast<long>(b) * t * n; }
    bool operator==(const Shape4&) const = default;
};

using VarId = int;

// Reverse-mode tape: nodes are created in topological order by the op
// functions below; backward() replays them once in reverse. Gradients are
// allocated lazily so untouched subgraphs cost nothing. A tape is used by one
// thread at a time and must stay at a fixed address while ops reference it.
template <typename S>
class Tape {
  public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    VarId leaf(Mat value, Shape4 shape, bool requires_grad) {
        check_arg(value.rows() == shape.c && value.cols() == shape.cols(),
                  "tape leaf: value is " + std::to_string(value.rows()) + "×" +
                      std::to_string(value.cols()) + " but shape wants " + std::to_string(shape.c) +
                      "×" + std::to_string(shape.cols()));
        nodes_.push_back(Node{std::move(value), Mat{}, shape, requires_grad, {}});
        return static_cast<VarId>(nodes_.size()) - 1;
    }

    // Plain-matrix leaf: rows are the feature axis, columns the batch axis.
    VarId leaf(Mat value, bool requires_grad) {
        Shape4 shape{static_cast<int>(value.cols()), static_cast<int>(value.rows()), 1, 1};
        return leaf(std::move(value), shape, requires_grad);
    }

    // Creates the node first so the backward closure can capture its own id.
    VarId add_op(Mat value, Shape4 shape, bool requires_grad) {
        nodes_.push_back(Node{std::move(value), Mat{}, shape, requires_grad, {}});
        return static_cast<VarId>(nodes_.size()) - 1;
    }

    // Installed only when the node participates in differentiation.
    void set_backward(VarId id, std::function<void(Tape&)> fn) {
        Node& nd = nodes_.at(id);
        if (nd.requires_grad) nd.backward = std::move(fn);
    }

    const Mat& value(VarId id) const { return nodes_.at(id).value; }
    Shape4 shape(VarId id) const { return nodes_.at(id).shape; }
    bool requires_grad(VarId id) const { return nodes_.at(id).requires_grad; }
    bool has_grad(VarId id) const { return nodes_.at(id).grad.size() > 0; }

    // Gradient of a node, allocated as zeros on first touch.
    Mat& grad(VarId id) {
        Node& nd = nodes_.at(id);
        if (nd.grad.size() == 0) nd.grad = Mat::Zero(nd.value.rows(), nd.value.cols());
        return nd.grad;
    }

    template <typename D>
    void accum_grad(VarId id, const Eigen::MatrixBase<D>& delta) {
        if (!nodes_.at(id).requires_grad) return;
        grad(id) += delta;
    }

    // Seeds d(loss)/d(loss) = 1 and walks the tape in reverse creation order,
    // which is a topological order, so each node is processed exactly once.
    void backward(VarId loss_id) {
        check_arg(nodes_.at(loss_id).value.size() == 1, "backward: loss node must be scalar");
        grad(loss_id)(0, 0) = S(1);
        for (VarId id = loss_id; id >= 0; --id) {
            Node& nd = nodes_[id];
            if (nd.backward && nd.grad.size() > 0) nd.backward(*this);
        }
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Mat value;
        Mat grad;
        Shape4 shape;
        bool requires_grad = false;
        std::function<void(Tape&)> backward;
    };
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra ops
// ---------------------------------------------------------------------------

template <typename S>
VarId add(Tape<S>& tape, VarId a, VarId b) {
    check_arg(tape.value(a).rows() == tape.value(b).rows() &&
                  tape.value(a).cols() == tape.value(b).cols(),
              "add: operand shapes differ");
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    VarId out = tape.add_op(tape.value(a) + tape.value(b), tape.shape(a), rg);
    tape.set_backward(out, [out, a, b](Tape<S>& t) {
        t.accum_grad(a, t.grad(out));
        t.accum_grad(b, t.grad(out));
    });
    return out;
}

template <typename S>
VarId scale(Tape<S>& tape, VarId a, S factor) {
    VarId out = tape.add_op(tape.value(a) * factor, tape.shape(a), tape.requires_grad(a));
    tape.set_backward(out, [out, a, factor](Tape<S>& t) {
        t.accum_grad(a, t.grad(out) * factor);
    });
    return out;
}

// Plain 2D matrix product: (m×k)·(k×n).
template <typename S>
VarId matmul(Tape<S>& tape, VarId a, VarId b) {
    check_arg(tape.value(a).cols() == tape.value(b).rows(),
              "matmul: inner dimensions differ (" + std::to_string(tape.value(a).cols()) +
                  " vs " + std::to_string(tape.value(b).rows()) + ")");
    typename Tape<S>::Mat y = tape.value(a) * tape.value(b);
    Shape4 shape{static_cast<int>(y.cols()), static_cast<int>(y.rows()), 1, 1};
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    VarId out = tape.add_op(std::move(y), shape, rg);
    tape.set_backward(out, [out, a, b](Tape<S>& t) {
        t.accum_grad(a, t.grad(out) * t.value(b).transpose());
        t.accum_grad(b, t.value(a).transpose() * t.grad(out));
    });
    return out;
}

template <typename S>
VarId relu(Tape<S>& tape, VarId x) {
    VarId out = tape.add_op(tape.value(x).cwiseMax(S(0)), tape.shape(x), tape.requires_grad(x));
    tape.set_backward(out, [out, x](Tape<S>& t) {
        t.accum_grad(x, ((t.value(x).array() > S(0)).template cast<S>() * t.grad(out).array())
                            .matrix());
    });
    return out;
}

// Inverted dropout: surviving entries are scaled by 1/(1-rate) so eval mode is
// the identity. The mask is regenerated from the seed in the backward pass
// instead of being stored.
template <typename S>
VarId dropout(Tape<S>& tape, VarId x, double rate, bool train, std::uint64_t seed) {
    check_arg(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
    if (!train || rate == 0.0) return x;

    const double keep = 1.0 - rate;
    const S boost = static_cast<S>(1.0 / keep);
    auto make_mask = [rate, keep, boost, seed](Eigen::Index rows, Eigen::Index cols) {
        typename Tape<S>::Mat mask(rows, cols);
        Rng rng(seed);
        S* p = mask.data();
        for (Eigen::Index i = 0; i < rows * cols; ++i) {
            p[i] = rng.uniform() < keep ? boost : S(0);
        }
        return mask;
    };

    typename Tape<S>::Mat mask = make_mask(tape.value(x).rows(), tape.value(x).cols());
    VarId out =
        tape.add_op(tape.value(x).cwiseProduct(mask), tape.shape(x), tape.requires_grad(x));
    tape.set_backward(out, [out, x, make_mask](Tape<S>& t) {
        t.accum_grad(x, t.grad(out).cwiseProduct(
                            make_mask(t.grad(out).rows(), t.grad(out).cols())));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Graph and temporal convolutions
// ---------------------------------------------------------------------------

// Per frame t of every batch entry: output = Wᵀ · X_t · Â, where X_t is the
// C×N channel-by-joint slice and Â the (symmetric) normalized adjacency.
// Activation is the caller's business.
template <typename S>
VarId spatial_gcn(Tape<S>& tape, VarId x, const typename Tape<S>::Mat& a_hat, VarId w) {
    const Shape4 sh = tape.shape(x);
    check_arg(a_hat.rows() == sh.n && a_hat.cols() == sh.n,
              "spatial_gcn: adjacency is " + std::to_string(a_hat.rows()) + "×" +
                  std::to_string(a_hat.cols()) + " but the joint axis has " + std::to_string(sh.n));
    check_arg(tape.value(w).rows() == sh.c,
              "spatial_gcn: weight input axis " + std::to_string(tape.value(w).rows()) +
                  " does not match channel axis " + std::to_string(sh.c));
    const int c_out = static_cast<int>(tape.value(w).cols());
    const long frames = static_cast<long>(sh.b) * sh.t;

    typename Tape<S>::Mat y = tape.value(w).transpose() * tape.value(x);
    for (long f = 0; f < frames; ++f) {
        y.middleCols(f * sh.n, sh.n) = (y.middleCols(f * sh.n, sh.n) * a_hat).eval();
    }

    Shape4 out_shape{sh.b, c_out, sh.t, sh.n};
    const bool rg = tape.requires_grad(x) || tape.requires_grad(w);
    VarId out = tape.add_op(std::move(y), out_shape, rg);
    tape.set_backward(out, [out, x, w, a_hat, sh, frames](Tape<S>& t) {
        // d(Wᵀ·X) = dY with each frame block right-multiplied by Âᵀ (= Â).
        typename Tape<S>::Mat dtmp = t.grad(out);
        for (long f = 0; f < frames; ++f) {
            dtmp.middleCols(f * sh.n, sh.n) =
                (dtmp.middleCols(f * sh.n, sh.n) * a_hat.transpose()).eval();
        }
        t.accum_grad(w, t.value(x) * dtmp.transpose());
        t.accum_grad(x, t.value(w) * dtmp);
    });
    return out;
}

namespace detail {

// Gathers the k-frame temporal neighborhoods of every (entry, output frame)
// into a (k·C) × (B·T_out·N) matrix; columns cross entry boundaries never,
// frames outside [0, T) contribute zeros (same-padding of (k-1)/2).
template <typename S>
void im2col_temporal(const typename Tape<S>::Mat& x, Shape4 sh, int k, int stride, int t_out,
                     typename Tape<S>::Mat& cols) {
    const int pad = (k - 1) / 2;
    cols.setZero(static_cast<long>(k) * sh.c, static_cast<long>(sh.b) * t_out * sh.n);
    for (int b = 0; b < sh.b; ++b) {
        for (int to = 0; to < t_out; ++to) {
            const long dst = (static_cast<long>(b) * t_out + to) * sh.n;
            for (int kk = 0; kk < k; ++kk) {
                const int ti = to * stride - pad + kk;
                if (ti < 0 || ti >= sh.t) continue;
                const long src = (static_cast<long>(b) * sh.t + ti) * sh.n;
                cols.block(static_cast<long>(kk) * sh.c, dst, sh.c, sh.n) =
                    x.middleCols(src, sh.n);
            }
        }
    }
}

}  // namespace detail

// 1-D convolution along the frame axis, independently per joint, zero-padded
// by (k-1)/2 on both temporal ends; output length ⌈T/stride⌉. The kernel is a
// C_out × (k·C) matrix whose column kk·C + c holds tap kk of input channel c.
template <typename S>
VarId conv_temporal(Tape<S>& tape, VarId x, VarId kernel, int k, int stride) {
    check_arg(k >= 1 && k % 2 == 1, "conv_temporal: kernel size must be odd, got " +
                                        std::to_string(k));
    check_arg(stride == 1 || stride == 2, "conv_temporal: stride must be 1 or 2");
    const Shape4 sh = tape.shape(x);
    check_arg(tape.value(kernel).cols() == static_cast<long>(k) * sh.c,
              "conv_temporal: kernel has " + std::to_string(tape.value(kernel).cols()) +
                  " columns, expected k·C = " + std::to_string(static_cast<long>(k) * sh.c));
    const int t_out = (sh.t + stride - 1) / stride;

    typename Tape<S>::Mat cols;
    detail::im2col_temporal<S>(tape.value(x), sh, k, stride, t_out, cols);
    typename Tape<S>::Mat y = tape.value(kernel) * cols;
    cols.resize(0, 0);  // the gather is recomputed in backward instead of stored

    Shape4 out_shape{sh.b, static_cast<int>(tape.value(kernel).rows()), t_out, sh.n};
    const bool rg = tape.requires_grad(x) || tape.requires_grad(kernel);
    VarId out = tape.add_op(std::move(y), out_shape, rg);
    tape.set_backward(out, [out, x, kernel, k, stride, sh, t_out](Tape<S>& t) {
        const typename Tape<S>::Mat& gy = t.grad(out);
        if (t.requires_grad(kernel)) {
            typename Tape<S>::Mat cols2;
            detail::im2col_temporal<S>(t.value(x), sh, k, stride, t_out, cols2);
            t.accum_grad(kernel, gy * cols2.transpose());
        }
        if (t.requires_grad(x)) {
            typename Tape<S>::Mat dcols = t.value(kernel).transpose() * gy;
            typename Tape<S>::Mat& gx = t.grad(x);
            const int pad = (k - 1) / 2;
            for (int b = 0; b < sh.b; ++b) {
                for (int to = 0; to < t_out; ++to) {
                    const long src = (static_cast<long>(b) * t_out + to) * sh.n;
                    for (int kk = 0; kk < k; ++kk) {
                        const int ti = to * stride - pad + kk;
                        if (ti < 0 || ti >= sh.t) continue;
                        const long dst = (static_cast<long>(b) * sh.t + ti) * sh.n;
                        gx.middleCols(dst, sh.n) +=
                            dcols.block(static_cast<long>(kk) * sh.c, src, sh.c, sh.n);
                    }
                }
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

// Per-channel running statistics, owned by the model, updated by train-mode
// forward passes when update_running is set.
template <typename S>
struct BnState {
    Eigen::Matrix<S, Eigen::Dynamic, 1> running_mean;
    Eigen::Matrix<S, Eigen::Dynamic, 1> running_var;

    static BnState init(int channels) {
        BnState st;
        st.running_mean = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(channels);
        st.running_var = Eigen::Matrix<S, Eigen::Dynamic, 1>::Ones(channels);
        return st;
    }
};

// Train mode normalizes each channel over every column (i.e. over B, T and N)
// with biased batch variance and folds the batch statistics into the running
// averages; eval mode applies the running statistics. gamma and beta are C×1.
template <typename S>
VarId batch_norm(Tape<S>& tape, VarId x, VarId gamma, VarId beta, BnState<S>& state, bool train,
                 S momentum, S epsilon, bool update_running = true) {
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    const Shape4 sh = tape.shape(x);
    const long m = tape.value(x).cols();
    check_arg(tape.value(gamma).rows() == sh.c && tape.value(gamma).cols() == 1 &&
                  tape.value(beta).rows() == sh.c && tape.value(beta).cols() == 1,
              "batch_norm: gamma/beta must be C×1 with C = " + std::to_string(sh.c));
    check_arg(state.running_mean.rows() == sh.c,
              "batch_norm: running stats sized for " + std::to_string(state.running_mean.rows()) +
                  " channels, input has " + std::to_string(sh.c));
    check_arg(epsilon >= S(0), "batch_norm: epsilon must be non-negative");

    Vec mu(sh.c), invstd(sh.c);
    if (train) {
        check_arg(m >= 2, "batch_norm: train mode needs at least 2 samples per channel");
        mu = tape.value(x).rowwise().mean();
        Vec var = (tape.value(x).colwise() - mu).array().square().matrix().rowwise().mean();
        invstd = (var.array() + epsilon).rsqrt();
        if (update_running) {
            state.running_mean = (S(1) - momentum) * state.running_mean + momentum * mu;
            state.running_var = (S(1) - momentum) * state.running_var + momentum * var;
        }
    } else {
        mu = state.running_mean;
        invstd = (state.running_var.array() + epsilon).rsqrt();
    }

    typename Tape<S>::Mat xhat =
        ((tape.value(x).colwise() - mu).array().colwise() * invstd.array()).matrix();
    typename Tape<S>::Mat y = ((xhat.array().colwise() * tape.value(gamma).col(0).array())
                                   .colwise() +
                               tape.value(beta).col(0).array())
                                  .matrix();

    const bool rg =
        tape.requires_grad(x) || tape.requires_grad(gamma) || tape.requires_grad(beta);
    VarId out = tape.add_op(std::move(y), sh, rg);
    // xhat is recomputed in backward from the saved input and the small
    // per-channel vectors to avoid storing another full-size tensor.
    tape.set_backward(out, [out, x, gamma, beta, mu, invstd, train, m](Tape<S>& t) {
        const typename Tape<S>::Mat& gy = t.grad(out);
        typename Tape<S>::Mat xhat2 =
            ((t.value(x).colwise() - mu).array().colwise() * invstd.array()).matrix();
        t.accum_grad(beta, gy.rowwise().sum());
        t.accum_grad(gamma, gy.cwiseProduct(xhat2).rowwise().sum());
        if (!t.requires_grad(x)) return;
        const Vec g = t.value(gamma).col(0);
        if (train) {
            // Through the batch statistics: dx = γ·invstd/m · (m·gy − Σgy − x̂·Σ(gy⊙x̂))
            Vec sum_gy = gy.rowwise().sum();
            Vec sum_gy_xhat = gy.cwiseProduct(xhat2).rowwise().sum();
            Vec coeff = g.cwiseProduct(invstd) / static_cast<S>(m);
            typename Tape<S>::Mat dx = (gy * static_cast<S>(m)).colwise() - sum_gy;
            dx -= (xhat2.array().colwise() * sum_gy_xhat.array()).matrix();
            dx = (dx.array().colwise() * coeff.array()).matrix();
            t.accum_grad(x, dx);
        } else {
            Vec coeff = g.cwiseProduct(invstd);
            t.accum_grad(x, (gy.array().colwise() * coeff.array()).matrix());
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Pooling, linear head, normalization, reductions
// ---------------------------------------------------------------------------

// Global mean over frames and joints: (B,C,T,N) → C×B matrix.
template <typename S>
VarId mean_pool_tn(Tape<S>& tape, VarId x) {
    const Shape4 sh = tape.shape(x);
    const long tn = static_cast<long>(sh.t) * sh.n;
    typename Tape<S>::Mat y(sh.c, sh.b);
    for (int b = 0; b < sh.b; ++b) {
        y.col(b) = tape.value(x).middleCols(b * tn, tn).rowwise().mean();
    }
    Shape4 out_shape{sh.b, sh.c, 1, 1};
    VarId out = tape.add_op(std::move(y), out_shape, tape.requires_grad(x));
    tape.set_backward(out, [out, x, sh, tn](Tape<S>& t) {
        typename Tape<S>::Mat& gx = t.grad(x);
        const typename Tape<S>::Mat& gy = t.grad(out);
        const S w = S(1) / static_cast<S>(tn);
        for (int b = 0; b < sh.b; ++b) {
            gx.middleCols(b * tn, tn).colwise() += gy.col(b) * w;
        }
    });
    return out;
}

// y = W·x + bias·1ᵀ with x as (D_in × B). Pass bias = -1 for none.
template <typename S>
VarId linear(Tape<S>& tape, VarId x, VarId w, VarId bias = -1) {
    check_arg(tape.value(w).cols() == tape.value(x).rows(),
              "linear: weight expects " + std::to_string(tape.value(w).cols()) +
                  " input features, got " + std::to_string(tape.value(x).rows()));
    typename Tape<S>::Mat y = tape.value(w) * tape.value(x);
    if (bias >= 0) {
        check_arg(tape.value(bias).rows() == y.rows() && tape.value(bias).cols() == 1,
                  "linear: bias must be D_out×1");
        y.colwise() += tape.value(bias).col(0);
    }
    Shape4 out_shape{static_cast<int>(y.cols()), static_cast<int>(y.rows()), 1, 1};
    bool rg = tape.requires_grad(x) || tape.requires_grad(w) ||
              (bias >= 0 && tape.requires_grad(bias));
    VarId out = tape.add_op(std::move(y), out_shape, rg);
    tape.set_backward(out, [out, x, w, bias](Tape<S>& t) {
        const typename Tape<S>::Mat& gy = t.grad(out);
        t.accum_grad(w, gy * t.value(x).transpose());
        t.accum_grad(x, t.value(w).transpose() * gy);
        if (bias >= 0) t.accum_grad(bias, gy.rowwise().sum());
    });
    return out;
}

// Column-wise projection to the unit sphere. A zero column is a hard error:
// its direction is undefined.
template <typename S>
VarId l2_normalize(Tape<S>& tape, VarId x) {
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    const long cols = tape.value(x).cols();
    Vec norms(cols);
    for (long j = 0; j < cols; ++j) {
        norms[j] = tape.value(x).col(j).norm();
        if (!(norms[j] > S(0))) {
            throw NumericError("l2_normalize: column " + std::to_string(j) +
                               " has zero norm; cannot normalize");
        }
    }
    typename Tape<S>::Mat y =
        (tape.value(x).array().rowwise() / norms.transpose().array()).matrix();
    VarId out = tape.add_op(std::move(y), tape.shape(x), tape.requires_grad(x));
    tape.set_backward(out, [out, x, norms](Tape<S>& t) {
        const typename Tape<S>::Mat& gy = t.grad(out);
        const typename Tape<S>::Mat& y2 = t.value(out);
        typename Tape<S>::Mat dx(gy.rows(), gy.cols());
        for (long j = 0; j < gy.cols(); ++j) {
            const S along = y2.col(j).dot(gy.col(j));
            dx.col(j) = (gy.col(j) - y2.col(j) * along) / norms[j];
        }
        t.accum_grad(x, dx);
    });
    return out;
}

// Frobenius inner product with a fixed weight matrix — the scalar reduction
// used to drive gradient checks of non-scalar ops.
template <typename S>
VarId inner(Tape<S>& tape, VarId x, typename Tape<S>::Mat weights) {
    check_arg(weights.rows() == tape.value(x).rows() && weights.cols() == tape.value(x).cols(),
              "inner: weight shape differs from input");
    typename Tape<S>::Mat y(1, 1);
    y(0, 0) = tape.value(x).cwiseProduct(weights).sum();
    VarId out = tape.add_op(std::move(y), Shape4{1, 1, 1, 1}, tape.requires_grad(x));
    tape.set_backward(out, [out, x, weights](Tape<S>& t) {
        t.accum_grad(x, weights * t.grad(out)(0, 0));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
    double max_rel_err = 0.0;
    long worst_coord = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    bool finite = true;
    std::vector<long> non_finite_coords;

    bool pass(double tol) const { return finite && max_rel_err <= tol; }
};

// Compares the reverse-mode gradient of a scalar-valued builder against
// central differences. `build` must be a pure function of the leaf value
// (freeze dropout seeds and running-stat updates). Checks all coordinates
// unless a subset is given. Relative error uses max(|a|,|n|,1e-8).
template <typename S>
GradCheckReport grad_check(const std::function<VarId(Tape<S>&, VarId)>& build,
                           const typename Tape<S>::Mat& x0, Shape4 shape, double h = 1e-5,
                           const std::vector<long>* coords = nullptr) {
    GradCheckReport report;

    Tape<S> tape;
    VarId leaf = tape.leaf(x0, shape, true);
    VarId loss = build(tape, leaf);
    check_arg(tape.value(loss).size() == 1, "grad_check: builder must produce a scalar");
    if (!std::isfinite(static_cast<double>(tape.value(loss)(0, 0)))) {
        report.finite = false;
        report.non_finite_coords.push_back(-1);
        return report;
    }
    tape.backward(loss);
    typename Tape<S>::Mat analytic;
    if (tape.has_grad(leaf)) {
        analytic = tape.grad(leaf);
    } else {
        analytic.setZero(x0.rows(), x0.cols());
    }

    auto eval = [&](const typename Tape<S>::Mat& x) -> double {
        Tape<S> t;
        VarId l = t.leaf(x, shape, false);
        VarId y = build(t, l);
        return static_cast<double>(t.value(y)(0, 0));
    };

    std::vector<long> all;
    if (coords == nullptr) {
        all.resize(static_cast<std::size_t>(x0.size()));
        for (long i = 0; i < x0.size(); ++i) all[static_cast<std::size_t>(i)] = i;
        coords = &all;
    }

    typename Tape<S>::Mat xp = x0;
    for (long idx : *coords) {
        const S orig = xp.data()[idx];
        xp.data()[idx] = orig + static_cast<S>(h);
        const double fp = eval(xp);
        xp.data()[idx] = orig - static_cast<S>(h);
        const double fm = eval(xp);
        xp.data()[idx] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            report.finite = false;
            report.non_finite_coords.push_back(idx);
            continue;
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = static_cast<double>(analytic.data()[idx]);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_coord = idx;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    return report;
}

}  // namespace gait
