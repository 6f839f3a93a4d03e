#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gait/features.hpp"
#include "gait/model.hpp"
#include "gait/pose.hpp"

namespace gait {

double euclidean_distance(const Embedding& a, const Embedding& b);

// Index of the closest gallery embedding; distance ties keep the lowest index.
int rank1_index(const Embedding& probe, const std::vector<Embedding>& gallery);
std::string rank1_identify(const Embedding& probe, const std::vector<Embedding>& gallery);

// Identification accuracies split by camera view: rows are probe views,
// columns gallery views. Cells with no probes or an empty per-view gallery are
// NaN and excluded from every mean.
struct EvalReport {
    std::vector<int> views;                   // sorted unique view labels
    Eigen::MatrixXd rank1;                    // V×V accuracy, NaN = undefined
    Eigen::MatrixXi counts;                   // probes scored per cell
    std::vector<double> probe_view_means;     // arithmetic mean over defined row cells
    std::vector<double> gallery_view_means;   // arithmetic mean over defined column cells
    double overall = 0.0;                     // count-weighted mean over defined cells
    long correct_total = 0;
    long scored_total = 0;
};

EvalReport cross_view_eval(const std::vector<Embedding>& gallery,
                           const std::vector<Embedding>& probes);

// First sequence per (subject, view) in input order becomes gallery; the rest
// are probes.
void split_gallery_probe(const std::vector<PoseSequence>& all, std::vector<int>* gallery_idx,
                         std::vector<int>* probe_idx);

enum class FrameOrder { Sort, Shuffle };
FrameOrder frame_order_from_string(const std::string& s);

// Frame-order control: Sort keeps sequences as recorded; Shuffle permutes each
// sequence's frames with a per-sequence seeded generator.
PoseSequence shuffle_frames(const PoseSequence& seq, std::uint64_t seed);
std::vector<PoseSequence> temporal_control(const std::vector<PoseSequence>& dataset,
                                           FrameOrder order, std::uint64_t seed);

// Report output: JSON (full structure), CSV (matrix with view-label header row
// and column plus means), and a fixed-width text table.
void write_report_json(const EvalReport& report, const std::string& path);
EvalReport load_report_json(const std::string& path);
void write_report_csv(const EvalReport& report, const std::string& path);
std::string format_report_text(const EvalReport& report);

// Embeds whole sequences for evaluation: fixed length via central crop or
// cyclic padding, no augmentation, eval-mode network, chunked for memory.
template <typename S>
std::vector<Embedding> embed_sequences(GaitModel<S>& model,
                                       const std::vector<PoseSequence>& seqs, int t_fixed,
                                       int chunk = 64) {
    std::vector<Embedding> out;
    out.reserve(seqs.size());
    for (std::size_t start = 0; start < seqs.size(); start += static_cast<std::size_t>(chunk)) {
        const std::size_t count = std::min(static_cast<std::size_t>(chunk), seqs.size() - start);
        std::vector<PoseSequence> fixed;
        std::vector<int> views;
        fixed.reserve(count);
        for (std::size_t i = start; i < start + count; ++i) {
            fixed.push_back(pad_or_crop(seqs[i], t_fixed));
            views.push_back(seqs[i].view_label);
        }
        FeatureTensor ft = assemble_sequences(fixed);
        for (Embedding& e : embed(model, ft, &views, chunk)) {
            out.push_back(std::move(e));
        }
    }
    return out;
}

// Full protocol in one call: embed both sets, then score rank-1 per view pair.
template <typename S>
EvalReport cross_view_eval_sequences(GaitModel<S>& model,
                                     const std::vector<PoseSequence>& gallery,
                                     const std::vector<PoseSequence>& probes, int t_fixed) {
    return cross_view_eval(embed_sequences(model, gallery, t_fixed),
                           embed_sequences(model, probes, t_fixed));
}

}  // namespace gait
