#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gait/pose.hpp"
#include "gait/skeleton.hpp"

namespace gait {

// Channel map of the assembled network input. Three disjoint streams cover
// [0, 20): per-frame joint geometry, inter-frame acceleration, and bone shape.
struct FeatureLayout {
    int joint_offset = 0;
    int joint_width = 2;   // distance and angle to the frame center
    int accel_offset = 2;
    int accel_width = 12;  // second differences at sampling periods 1 and 2
    int bone_offset = 14;
    int bone_width = 6;    // bone length/angle plus their differences

    int channels() const { return joint_width + accel_width + bone_width; }
};

// Batched network input of shape (B, C, T, N). Entry b is stored as a C×(T·N)
// matrix whose column t·N + n holds the feature vector of joint n at frame t.
struct FeatureTensor {
    FeatureLayout layout;
    int frames = 0;
    int joints = 0;
    std::vector<Eigen::MatrixXd> data;
    std::vector<std::string> labels;  // subject id per batch entry
    std::vector<int> copy_index;      // augmentation copy marker, 1 or 2

    int batch() const { return static_cast<int>(data.size()); }
    int channels() const { return layout.channels(); }
};

// Arithmetic mean coordinate over all joints of one frame (missing joints
// participate as recorded). frame_xy is N×2.
Eigen::Vector2d frame_center(const Eigen::MatrixXd& frame_xy);

// Full-quadrant arctangent in (−π, π], with angle(0, 0) = 0.
double angle(double dy, double dx);

// Difference with the result wrapped back into (−π, π].
double wrap_angle(double a);

// Each function returns one T×N matrix per output channel.
//
// Joint stream: distance and angle from each joint to its frame's center.
std::vector<Eigen::MatrixXd> joint_features(const PoseSequence& seq);

// Acceleration stream: for sampling periods Ts ∈ {1, 2}, the second differences
// at frames t−Ts, t, t+Ts (x and y interleaved). Any value whose stencil leaves
// [0, T) is exactly zero.
std::vector<Eigen::MatrixXd> acceleration_features(const PoseSequence& seq);

// Bone stream: per frame, each joint's bone points to its nearest connected
// joint (ties break to the lowest index); channels are bone length, bone angle,
// and their backward differences at periods 1 and 2 (angle differences wrapped).
// Differences reaching before frame 0 are exactly zero.
std::vector<Eigen::MatrixXd> bone_features(const PoseSequence& seq, const SkeletonDef& skeleton);

// Stacks all three streams per FeatureLayout into a (2·|pairs|, 20, T, N)
// tensor; the two augmentation copies of a pair become adjacent batch entries
// with the same subject label.
FeatureTensor assemble_batch(const std::vector<std::pair<PoseSequence, PoseSequence>>& pairs);

// Single-sequence variant used at evaluation time (one entry, copy_index 1).
FeatureTensor assemble_single(const PoseSequence& seq);

// Unpaired batch used at evaluation time: one entry per sequence, copy_index 1.
FeatureTensor assemble_sequences(const std::vector<PoseSequence>& seqs);

// Binary dump: magic "GGF1", B, C, T, N as little-endian uint32, then data as
// little-endian float32 in row-major (b, c, t, n) order. The sidecar written
// next to it (path + ".json") describes the channel layout.
void save_feature_tensor(const FeatureTensor& tensor, const std::string& path);
FeatureTensor load_feature_tensor(const std::string& path);

}  // namespace gait
