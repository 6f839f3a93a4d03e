#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gait/common.hpp"
#include "gait/tensor.hpp"

namespace gait {

// Max-shifted log(Σ exp(v_i)) over the finite entries of v; -inf entries are
// treated as excluded terms. Empty input (all excluded) returns -inf.
template <typename Derived>
double logsumexp(const Eigen::MatrixBase<Derived>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (long i = 0; i < v.size(); ++i) {
        m = std::max(m, static_cast<double>(v(i)));
    }
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (long i = 0; i < v.size(); ++i) {
        s += std::exp(static_cast<double>(v(i)) - m);
    }
    return m + std::log(s);
}

// Numerically stable softmax of a vector (max-shifted).
template <typename Derived>
Eigen::VectorXd softmax(const Eigen::MatrixBase<Derived>& v) {
    Eigen::VectorXd out(v.size());
    double m = -std::numeric_limits<double>::infinity();
    for (long i = 0; i < v.size(); ++i) m = std::max(m, static_cast<double>(v(i)));
    double s = 0.0;
    for (long i = 0; i < v.size(); ++i) {
        out[i] = std::exp(static_cast<double>(v(i)) - m);
        s += out[i];
    }
    return out / s;
}

// Supervised contrastive loss over unit-norm embeddings z (D×B) with integer
// class labels: for each anchor i that has at least one same-class partner,
//   L_i = (1/|P(i)|) Σ_{p∈P(i)} [ logΣ_{a≠i} exp(z_i·z_a/τ) − z_i·z_p/τ ]
// and the result is the mean of L_i over those anchors. Anchors without
// positives are skipped; if no anchor has a positive the loss is 0 and
// *positive_free is set. The gradient is computed analytically in one piece.
template <typename S>
VarId supcon_loss(Tape<S>& tape, VarId z, const std::vector<int>& labels, double tau,
                  bool* positive_free = nullptr) {
    check_arg(tau > 0.0, "supcon_loss: temperature must be positive");
    const long B = tape.value(z).cols();
    check_arg(static_cast<long>(labels.size()) == B,
              "supcon_loss: " + std::to_string(labels.size()) + " labels for " +
                  std::to_string(B) + " embeddings");
    if (positive_free != nullptr) *positive_free = false;

    // Similarity logits S_ia = z_i·z_a / τ in double for the stable reductions.
    Eigen::MatrixXd zd = tape.value(z).template cast<double>();
    Eigen::MatrixXd logits = (zd.transpose() * zd) / tau;

    std::vector<std::vector<int>> positives(static_cast<std::size_t>(B));
    std::vector<int> anchors;
    for (long i = 0; i < B; ++i) {
        for (long p = 0; p < B; ++p) {
            if (p != i && labels[static_cast<std::size_t>(p)] == labels[static_cast<std::size_t>(i)]) {
                positives[static_cast<std::size_t>(i)].push_back(static_cast<int>(p));
            }
        }
        if (!positives[static_cast<std::size_t>(i)].empty()) anchors.push_back(static_cast<int>(i));
    }

    if (anchors.empty()) {
        if (positive_free != nullptr) *positive_free = true;
        typename Tape<S>::Mat zero(1, 1);
        zero(0, 0) = S(0);
        // A constant: no anchor contributes, so no gradient flows.
        return tape.add_op(std::move(zero), Shape4{1, 1, 1, 1}, false);
    }

    double loss = 0.0;
    // G_ia = ∂L/∂S_ia; the z gradient follows as (1/τ)·Z·(G + Gᵀ).
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(B, B);
    const double anchor_w = 1.0 / static_cast<double>(anchors.size());
    for (int i : anchors) {
        double m = -std::numeric_limits<double>::infinity();
        for (long a = 0; a < B; ++a) {
            if (a != i) m = std::max(m, logits(i, a));
        }
        double denom = 0.0;
        for (long a = 0; a < B; ++a) {
            if (a != i) denom += std::exp(logits(i, a) - m);
        }
        const double lse = m + std::log(denom);

        const auto& P = positives[static_cast<std::size_t>(i)];
        const double inv_p = 1.0 / static_cast<double>(P.size());
        double mean_pos = 0.0;
        for (int p : P) mean_pos += logits(i, p);
        mean_pos *= inv_p;
        loss += lse - mean_pos;

        for (long a = 0; a < B; ++a) {
            if (a == i) continue;
            G(i, a) = anchor_w * std::exp(logits(i, a) - m) / denom;
        }
        for (int p : P) G(i, p) -= anchor_w * inv_p;
    }
    loss *= anchor_w;
    check_numeric(std::isfinite(loss), "supcon_loss: non-finite loss value");

    typename Tape<S>::Mat out_val(1, 1);
    out_val(0, 0) = static_cast<S>(loss);
    VarId out = tape.add_op(std::move(out_val), Shape4{1, 1, 1, 1}, tape.requires_grad(z));
    Eigen::MatrixXd gz = (zd * (G + G.transpose())) / tau;
    tape.set_backward(out, [out, z, gz](Tape<S>& t) {
        t.accum_grad(z, (gz * static_cast<double>(t.grad(out)(0, 0))).template cast<S>());
    });
    return out;
}

}  // namespace gait
