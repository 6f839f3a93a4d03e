#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gait/checkpoint.hpp"
#include "gait/common.hpp"
#include "gait/features.hpp"
#include "gait/log.hpp"
#include "gait/loss.hpp"
#include "gait/model.hpp"
#include "gait/optim.hpp"
#include "gait/pose.hpp"
#include "gait/rng.hpp"

namespace gait {

struct TrainConfig {
    int batch_size = 512;  // entries per step; even — every source yields two copies
    int epochs = 1;
    double max_lr = 0.001;
    double pct_start = 0.3;
    double div_start = 25.0;
    double div_final = 1e4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double clip_norm = 0.0;  // 0 = no gradient clipping
    double tau = 0.07;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = end only
    AugmentPolicy augment;

    void validate() const;
};

struct LossRecord {
    long epoch = 0;
    long step = 0;  // global optimizer step
    double lr = 0.0;
    double loss = 0.0;
};

// Dense integer ids by first occurrence, so contrastive labels can be compared
// cheaply within a batch.
std::vector<int> label_ids(const std::vector<std::string>& labels);

// Loss history CSV: header epoch,step,lr,loss; full double precision.
void save_history_csv(const std::vector<LossRecord>& history, const std::string& path);
std::vector<LossRecord> load_history_csv(const std::string& path);

// Seeded Fisher-Yates permutation of [0, n) for one epoch's source order.
std::vector<int> epoch_permutation(int n, std::uint64_t seed, long epoch);

// Draws sources perm[first, first+count) and augments each into a two-copy
// pair, so every label in the batch has at least one positive.
inline std::vector<std::pair<PoseSequence, PoseSequence>> sample_batch(
    const std::vector<PoseSequence>& dataset, const std::vector<int>& perm, int first, int count,
    const AugmentPolicy& policy, std::uint64_t seed, long epoch) {
    check_arg(first >= 0 && count >= 1 && first + count <= static_cast<int>(perm.size()),
              "sample_batch: source range out of bounds");
    std::vector<std::pair<PoseSequence, PoseSequence>> pairs;
    pairs.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const int pos = first + k;
        const int src = perm[static_cast<std::size_t>(pos)];
        const std::uint64_t pair_seed =
            derive_seed(seed, "aug",
                        {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(pos),
                         static_cast<std::uint64_t>(src)});
        pairs.push_back(two_views(dataset[static_cast<std::size_t>(src)], policy, pair_seed));
    }
    return pairs;
}

// Builds the optimizer/counter snapshot stored next to the model parameters.
template <typename S>
TrainState make_train_state(const GaitModel<S>& model, const Adam<S>& opt, long next_epoch,
                            long global_step) {
    TrainState st;
    st.next_epoch = next_epoch;
    st.global_step = global_step;
    st.adam_t = opt.step_count();
    const auto& m = opt.first_moments();
    const auto& v = opt.second_moments();
    check_arg(m.size() == model.params.size(), "train state: optimizer not sized to the model");
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const std::string& pname = model.params[i].name;
        NamedTensor tm;
        tm.name = "adam.m." + pname;
        tm.dims = {static_cast<std::uint32_t>(m[i].rows()), static_cast<std::uint32_t>(m[i].cols())};
        tm.data = m[i];
        st.opt_tensors.push_back(std::move(tm));
        NamedTensor tv;
        tv.name = "adam.v." + pname;
        tv.dims = {static_cast<std::uint32_t>(v[i].rows()), static_cast<std::uint32_t>(v[i].cols())};
        tv.data = v[i];
        st.opt_tensors.push_back(std::move(tv));
    }
    return st;
}

template <typename S>
void restore_optimizer(const GaitModel<S>& model, const TrainState& st, Adam<S>& opt) {
    std::vector<Eigen::MatrixXd> m, v;
    for (const auto& p : model.params) {
        const NamedTensor* tm = nullptr;
        const NamedTensor* tv = nullptr;
        for (const NamedTensor& t : st.opt_tensors) {
            if (t.name == "adam.m." + p.name) tm = &t;
            if (t.name == "adam.v." + p.name) tv = &t;
        }
        check_data(tm != nullptr && tv != nullptr,
                   "checkpoint is missing optimizer moments for parameter " + p.name);
        check_data(tm->data.rows() == p.value.rows() && tm->data.cols() == p.value.cols() &&
                       tv->data.rows() == p.value.rows() && tv->data.cols() == p.value.cols(),
                   "checkpoint optimizer moments have wrong shape for parameter " + p.name);
        m.push_back(tm->data);
        v.push_back(tv->data);
    }
    opt.restore(std::move(m), std::move(v), st.adam_t);
}

// The optimization loop: epoch permutations, two-copy augmentation, contrastive
// loss, Adam under a one-cycle schedule, periodic checkpoints, exact resume.
template <typename S>
class Trainer {
  public:
    Trainer(GaitModel<S>& model, const TrainConfig& cfg) : model_(model), cfg_(cfg) {
        cfg_.validate();
        opt_.beta1 = cfg_.beta1;
        opt_.beta2 = cfg_.beta2;
        opt_.epsilon = cfg_.adam_epsilon;
        opt_.clip_norm = cfg_.clip_norm;
    }

    Adam<S>& optimizer() { return opt_; }
    long global_step() const { return global_step_; }

    // One optimization step on an assembled batch. Returns the loss.
    double train_step(const FeatureTensor& batch, const std::vector<int>& labels, double lr,
                      std::uint64_t dropout_seed) {
        if (!opt_.initialized()) opt_.init(model_.params);
        try {
            Tape<S> tape;
            const Shape4 shape{batch.batch(), batch.channels(), batch.frames, batch.joints};
            auto fwd = model_.forward(tape, pack_batch<S>(batch, 0, batch.batch()), shape,
                                      /*train=*/true, dropout_seed);
            bool positive_free = false;
            VarId loss = supcon_loss(tape, fwd.embeddings, labels, cfg_.tau, &positive_free);
            if (positive_free) {
                log_warn("train_step: batch has no anchor with a positive; zero loss");
            }
            const double loss_value = static_cast<double>(tape.value(loss)(0, 0));
            tape.backward(loss);
            model_.collect_grads(tape, fwd);
            opt_.step(model_.params, lr);
            return loss_value;
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + "; " + batch_stats(batch, labels));
        }
    }

    // Full loop over (optionally resumed) epochs. Sequences shorter than the
    // crop window are cyclically padded once up front. Returns the records of
    // the steps this call executed.
    std::vector<LossRecord> fit(const std::vector<PoseSequence>& dataset,
                                const std::string& checkpoint_path = std::string(),
                                const TrainState* resume = nullptr) {
        const int ppb = cfg_.batch_size / 2;
        const int n = static_cast<int>(dataset.size());
        check_arg(n >= ppb, "fit: dataset has " + std::to_string(n) +
                                " sequences but the batch needs " + std::to_string(ppb) +
                                " sources");

        std::vector<PoseSequence> prepared;
        prepared.reserve(dataset.size());
        for (const PoseSequence& seq : dataset) {
            prepared.push_back(seq.num_frames() < cfg_.augment.temporal_crop_len
                                   ? pad_or_crop(seq, cfg_.augment.temporal_crop_len)
                                   : seq);
        }

        const long steps_per_epoch = (n + ppb - 1) / ppb;
        const long total_steps = steps_per_epoch * cfg_.epochs;
        OneCycle sched{cfg_.max_lr, cfg_.pct_start, cfg_.div_start, cfg_.div_final};

        long start_epoch = 0;
        if (resume != nullptr) {
            restore_optimizer(model_, *resume, opt_);
            start_epoch = resume->next_epoch;
            global_step_ = resume->global_step;
            check_arg(start_epoch <= cfg_.epochs,
                      "fit: checkpoint is past the configured epoch count");
        }
        if (!opt_.initialized()) opt_.init(model_.params);

        std::vector<LossRecord> history;
        for (long epoch = start_epoch; epoch < cfg_.epochs; ++epoch) {
            const std::vector<int> perm = epoch_permutation(n, cfg_.seed, epoch);
            for (long s = 0; s < steps_per_epoch; ++s) {
                const int first = static_cast<int>(s) * ppb;
                const int count = std::min(ppb, n - first);
                const auto pairs =
                    sample_batch(prepared, perm, first, count, cfg_.augment, cfg_.seed, epoch);
                const FeatureTensor ft = assemble_batch(pairs);
                const std::vector<int> ids = label_ids(ft.labels);
                const double lr = sched.lr_at(global_step_, total_steps);
                const double loss = train_step(
                    ft, ids, lr,
                    derive_seed(cfg_.seed, "drop",
                                {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(s)}));
                history.push_back(LossRecord{epoch, global_step_, lr, loss});
                ++global_step_;
            }
            if (!checkpoint_path.empty() && cfg_.checkpoint_every > 0 &&
                (epoch + 1) % cfg_.checkpoint_every == 0 && epoch + 1 < cfg_.epochs) {
                // periodic snapshots get their own names so the final write
                // cannot clobber a resume point
                const std::string snap = checkpoint_path + ".epoch" + std::to_string(epoch + 1);
                save(snap, epoch + 1);
                log_info("checkpoint written after epoch " + std::to_string(epoch + 1) + ": " +
                         snap);
            }
        }
        if (!checkpoint_path.empty()) {
            save(checkpoint_path, cfg_.epochs);
        }
        return history;
    }

  private:
    void save(const std::string& path, long next_epoch) {
        const TrainState st = make_train_state(model_, opt_, next_epoch, global_step_);
        save_model_checkpoint(model_, path, &st);
    }

    static std::string batch_stats(const FeatureTensor& batch, const std::vector<int>& labels) {
        double lo = 0.0, hi = 0.0, abs_sum = 0.0;
        long count = 0;
        for (const Eigen::MatrixXd& m : batch.data) {
            if (m.size() == 0) continue;
            if (count == 0) {
                lo = m.minCoeff();
                hi = m.maxCoeff();
            } else {
                lo = std::min(lo, m.minCoeff());
                hi = std::max(hi, m.maxCoeff());
            }
            abs_sum += m.cwiseAbs().sum();
            count += m.size();
        }
        std::vector<int> distinct = labels;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        return "batch stats: entries=" + std::to_string(batch.batch()) +
               " frames=" + std::to_string(batch.frames) +
               " joints=" + std::to_string(batch.joints) +
               " classes=" + std::to_string(distinct.size()) + " min=" + std::to_string(lo) +
               " max=" + std::to_string(hi) +
               " mean_abs=" + std::to_string(count > 0 ? abs_sum / static_cast<double>(count) : 0.0);
    }

    GaitModel<S>& model_;
    TrainConfig cfg_;
    Adam<S> opt_;
    long global_step_ = 0;
};

}  // namespace gait
