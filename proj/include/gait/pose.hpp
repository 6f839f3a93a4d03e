#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gait/skeleton.hpp"

namespace gait {

// A tracked 2D pose sequence: T frames of N joints, each (x px, y px, confidence).
// Missing joints are encoded as (0, 0, 0) and are never interpolated.
struct PoseSequence {
    std::string subject_id;
    int view_label = 0;  // camera view in degrees
    std::string condition;
    std::shared_ptr<const SkeletonDef> skeleton;
    Eigen::MatrixXd x;     // T×N pixel x
    Eigen::MatrixXd y;     // T×N pixel y
    Eigen::MatrixXd conf;  // T×N detection confidence in [0,1]

    int num_frames() const { return static_cast<int>(x.rows()); }
    int num_joints() const { return static_cast<int>(x.cols()); }

    // Throws std::invalid_argument on shape mismatch or confidence outside [0,1].
    void validate() const;
};

// Shared handle to a built-in skeleton ("openpose18" or "coco17").
std::shared_ptr<const SkeletonDef> builtin_skeleton(const std::string& name);

struct AugmentPolicy {
    int temporal_crop_len = 64;       // random contiguous window length
    double coord_jitter_sigma = 0.0;  // pixels of Gaussian noise on detected joints
    double mirror_prob = 0.0;         // chance of a horizontal flip
    std::vector<int> resample_periods = {1};  // frame strides simulating pace changes

    void validate() const;
};

// Parameters of the planar kinematic walker used for desk-scale experiments.
// All angles are radians; amplitudes of zero freeze the figure completely.
struct SynthParams {
    double stride_freq = 1.0;   // strides per second
    double hip_amp = 0.55;      // thigh swing
    double knee_amp = 0.90;     // knee flexion
    double arm_amp = 0.40;      // shoulder swing
    double elbow_amp = 0.30;    // elbow flexion
    double bob_amp = 0.020;     // vertical pelvis bob, fraction of body scale
    double sway_amp = 0.010;    // lateral pelvis sway, fraction of body scale
    double phase = 0.0;         // global gait phase offset
    double body_scale = 120.0;  // pixels from pelvis to neck region
    double fps = 25.0;          // sampling rate of the virtual camera
    double view_deg = 90.0;     // 90 = side view, 0 = frontal
    double noise_sigma = 0.0;   // observation noise in pixels
};

// Deterministic walker on the 18-joint skeleton: limb angles are sinusoids of
// stride_freq, projected for the given view. Same (params, T, seed) gives a
// bit-identical sequence.
PoseSequence synth_gait(const SynthParams& params, int T, std::uint64_t seed);

// Applies, in order: integer-stride resampling (period drawn from the policy),
// random contiguous temporal crop, horizontal mirror with mirror_prob (reflect
// detected x about their mean and swap mirror-pair joints), and Gaussian jitter
// on joints with confidence > 0. Deterministic given seed.
PoseSequence augment(const PoseSequence& seq, const AugmentPolicy& policy, std::uint64_t seed);

// Two independent augment() calls with sub-seeds derived from seed. Labels are kept.
std::pair<PoseSequence, PoseSequence> two_views(const PoseSequence& seq,
                                                const AugmentPolicy& policy, std::uint64_t seed);

// Central crop if longer than T_fixed, cyclic repetition if shorter.
PoseSequence pad_or_crop(const PoseSequence& seq, int T_fixed);

// Per-frame OpenPose JSON directory → sequence (files in lexicographic order,
// first detected person per frame, empty frames become all-zero joints).
PoseSequence parse_openpose_json(const std::string& directory,
                                 std::shared_ptr<const SkeletonDef> skeleton);

// CSV with header t,joint,x,y,conf — one row per joint per frame. Rows absent
// from the file stay (0,0,0).
PoseSequence load_pose_csv(const std::string& path,
                           std::shared_ptr<const SkeletonDef> skeleton);
void save_pose_csv(const PoseSequence& seq, const std::string& path);

// Dataset index: JSON array of {subject_id, view, condition, path}. Paths are
// resolved relative to the index file; directories parse as OpenPose JSON,
// files as CSV.
struct DatasetEntry {
    std::string subject_id;
    int view = 0;
    std::string condition;
    std::string path;
};

std::vector<DatasetEntry> load_dataset_index(const std::string& index_path);
std::vector<PoseSequence> load_sequences(const std::string& index_path,
                                         std::shared_ptr<const SkeletonDef> skeleton);
void save_dataset_index(const std::vector<DatasetEntry>& entries, const std::string& index_path);

}  // namespace gait
