#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gait {

// Joint-graph topology: joint names, bone edges, and left/right mirror pairs.
// Everything is immutable after construction; share freely across threads.
struct SkeletonDef {
    std::string name;
    std::vector<std::string> joint_names;                // size N
    std::vector<std::pair<int, int>> edges;              // unordered joint-index pairs
    std::vector<std::pair<int, int>> mirror_pairs;       // (left, right) swaps
    std::vector<std::vector<int>> neighbor_candidates;   // per joint, connected joints ascending

    int joint_count() const { return static_cast<int>(joint_names.size()); }

    // Checks all structural invariants (index ranges, no self-loops or duplicate
    // edges, connectivity, mirror involution) and fills neighbor_candidates.
    // Throws std::invalid_argument describing the first violation.
    void validate();
};

// Built-in layouts. The 18-joint one follows the OpenPose BODY_18 convention,
// the 17-joint one the COCO keypoint convention.
SkeletonDef make_openpose18();
SkeletonDef make_coco17();

// Lookup by name ("openpose18" or "coco17"); throws std::invalid_argument otherwise.
SkeletonDef skeleton_by_name(const std::string& name);

// Loads {"name", "joints": [names], "edges": [[i,j]...], "mirror_pairs": [[l,r]...]}.
// The result is validated before being returned.
SkeletonDef load_skeleton_json(const std::string& path);

// Binary symmetric adjacency with zero diagonal: A(i,j) = 1 iff (i,j) is an edge.
Eigen::MatrixXd build_adjacency(const SkeletonDef& def);

// D̃^(-1/2) (A + I) D̃^(-1/2) where D̃ holds the row sums of A + I.
struct NormalizedAdjacency {
    Eigen::MatrixXd matrix;
};

// Requires A symmetric with zero diagonal. Entries are assembled as
// dinv[i] * (A+I)(i,j) * dinv[j] and mirrored so the result is symmetric to
// exact bit equality.
NormalizedAdjacency normalize_adjacency(const Eigen::MatrixXd& A);

}  // namespace gait
