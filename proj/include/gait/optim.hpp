#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gait/common.hpp"
#include "gait/model.hpp"

namespace gait {

// Piecewise-cosine one-cycle schedule: rises from max_lr/div_start to max_lr
// over the first floor(pct_start·total) steps, then anneals to max_lr/div_final
// by the final step.
struct OneCycle {
    double max_lr = 0.001;
    double pct_start = 0.3;
    double div_start = 25.0;
    double div_final = 1e4;

    double lr_at(long step, long total_steps) const {
        check_arg(total_steps >= 1, "onecycle: total_steps must be positive");
        check_arg(step >= 0 && step < total_steps,
                  "onecycle: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(total_steps) + ")");
        check_arg(max_lr > 0 && div_start > 0 && div_final > 0 && pct_start >= 0 &&
                      pct_start <= 1,
                  "onecycle: invalid schedule parameters");
        const long warm = static_cast<long>(pct_start * static_cast<double>(total_steps));
        const double lr0 = max_lr / div_start;
        const double lr_final = max_lr / div_final;
        if (step < warm) {
            const double p = static_cast<double>(step) / static_cast<double>(warm);
            return lr0 + (max_lr - lr0) * 0.5 * (1.0 - std::cos(M_PI * p));
        }
        const long span = total_steps - 1 - warm;
        if (span <= 0) return max_lr;  // degenerate: no annealing room
        const double p = static_cast<double>(step - warm) / static_cast<double>(span);
        return lr_final + (max_lr - lr_final) * 0.5 * (1.0 + std::cos(M_PI * p));
    }
};

// Adam with bias correction and an optional global-norm gradient clip.
// Moments are kept in double regardless of the model's working precision.
template <typename S>
class Adam {
  public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 0.0;  // 0 = no clipping

    void init(const std::vector<typename GaitModel<S>::Param>& params) {
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            m_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
            v_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
        }
        t_ = 0;
    }

    bool initialized() const { return !m_.empty(); }
    long step_count() const { return t_; }

    void step(std::vector<typename GaitModel<S>::Param>& params, double lr) {
        check_arg(m_.size() == params.size(), "adam: optimizer not initialized for this model");

        double scale = 1.0;
        if (clip_norm > 0.0) {
            double sq = 0.0;
            for (const auto& p : params) {
                sq += p.grad.template cast<double>().squaredNorm();
            }
            const double norm = std::sqrt(sq);
            if (norm > clip_norm) scale = clip_norm / norm;
        }

        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Eigen::MatrixXd g = params[i].grad.template cast<double>() * scale;
            m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
            v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
            Eigen::MatrixXd update =
                (m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + epsilon);
            params[i].value -= (lr * update).cast<S>();
        }
    }

    // Checkpoint plumbing: moments exposed by parameter index.
    const std::vector<Eigen::MatrixXd>& first_moments() const { return m_; }
    const std::vector<Eigen::MatrixXd>& second_moments() const { return v_; }
    void restore(std::vector<Eigen::MatrixXd> m, std::vector<Eigen::MatrixXd> v, long t) {
        m_ = std::move(m);
        v_ = std::move(v);
        t_ = t;
    }

  private:
    std::vector<Eigen::MatrixXd> m_, v_;
    long t_ = 0;
};

}  // namespace gait
