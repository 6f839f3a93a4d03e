#include "gait/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "gait/common.hpp"

namespace gait {

void SkeletonDef::validate() {
    const int n = joint_count();
    check_arg(n >= 1, "skeleton '" + name + "': needs at least one joint");

    std::set<std::pair<int, int>> seen;
    for (const auto& [a, b] : edges) {
        check_arg(a >= 0 && a < n && b >= 0 && b < n,
                  "skeleton '" + name + "': edge (" + std::to_string(a) + "," +
                      std::to_string(b) + ") has endpoint outside [0," + std::to_string(n) + ")");
        check_arg(a != b, "skeleton '" + name + "': self-loop edge at joint " + std::to_string(a));
        auto key = std::minmax(a, b);
        check_arg(seen.insert(key).second,
                  "skeleton '" + name + "': duplicate edge (" + std::to_string(key.first) + "," +
                      std::to_string(key.second) + ")");
    }

    // Connectivity via BFS from joint 0.
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<char> visited(n, 0);
    std::vector<int> queue{0};
    visited[0] = 1;
    while (!queue.empty()) {
        int v = queue.back();
        queue.pop_back();
        for (int w : adj[v]) {
            if (!visited[w]) {
                visited[w] = 1;
                queue.push_back(w);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        check_arg(visited[i] != 0,
                  "skeleton '" + name + "': joint " + std::to_string(i) + " is disconnected");
    }

    std::set<int> mirrored;
    for (const auto& [l, r] : mirror_pairs) {
        check_arg(l >= 0 && l < n && r >= 0 && r < n,
                  "skeleton '" + name + "': mirror pair (" + std::to_string(l) + "," +
                      std::to_string(r) + ") has index outside [0," + std::to_string(n) + ")");
        check_arg(l != r, "skeleton '" + name + "': mirror pair maps joint " + std::to_string(l) +
                              " to itself");
        check_arg(mirrored.insert(l).second && mirrored.insert(r).second,
                  "skeleton '" + name + "': joint appears in more than one mirror pair");
    }

    neighbor_candidates.assign(n, {});
    for (int i = 0; i < n; ++i) {
        neighbor_candidates[i] = adj[i];
        std::sort(neighbor_candidates[i].begin(), neighbor_candidates[i].end());
    }
}

SkeletonDef make_openpose18() {
    SkeletonDef def;
    def.name = "openpose18";
    def.joint_names = {"nose",      "neck",      "r_shoulder", "r_elbow", "r_wrist",
                       "l_shoulder", "l_elbow",  "l_wrist",    "r_hip",   "r_knee",
                       "r_ankle",   "l_hip",     "l_knee",     "l_ankle", "r_eye",
                       "l_eye",     "r_ear",     "l_ear"};
    def.edges = {{0, 1},  {1, 2},  {2, 3},   {3, 4},   {1, 5},   {5, 6},
                 {6, 7},  {1, 8},  {8, 9},   {9, 10},  {1, 11},  {11, 12},
                 {12, 13}, {0, 14}, {14, 16}, {0, 15},  {15, 17}};
    def.mirror_pairs = {{5, 2}, {6, 3}, {7, 4}, {11, 8}, {12, 9}, {13, 10}, {15, 14}, {17, 16}};
    def.validate();
    return def;
}

SkeletonDef make_coco17() {
    SkeletonDef def;
    def.name = "coco17";
    def.joint_names = {"nose",       "l_eye",   "r_eye",   "l_ear",  "r_ear",  "l_shoulder",
                       "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist", "l_hip",
                       "r_hip",      "l_knee",  "r_knee",  "l_ankle", "r_ankle"};
    def.edges = {{0, 1},   {0, 2},   {1, 2},   {1, 3},   {2, 4},   {3, 5},  {4, 6},
                 {5, 6},   {5, 7},   {6, 8},   {7, 9},   {8, 10},  {5, 11}, {6, 12},
                 {11, 12}, {11, 13}, {12, 14}, {13, 15}, {14, 16}};
    def.mirror_pairs = {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}, {11, 12}, {13, 14}, {15, 16}};
    def.validate();
    return def;
}

SkeletonDef skeleton_by_name(const std::string& name) {
    if (name == "openpose18") return make_openpose18();
    if (name == "coco17") return make_coco17();
    throw std::invalid_argument("unknown skeleton '" + name +
                                "' (built-ins: openpose18, coco17)");
}

SkeletonDef load_skeleton_json(const std::string& path) {
    std::ifstream in(path);
    check_data(in.good(), "cannot open skeleton file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("skeleton file '" + path + "': " + e.what());
    }

    SkeletonDef def;
    try {
        def.name = doc.at("name").get<std::string>();
        def.joint_names = doc.at("joints").get<std::vector<std::string>>();
        for (const auto& e : doc.at("edges")) {
            check_data(e.is_array() && e.size() == 2,
                       "skeleton file '" + path + "': edge entries must be [i, j] pairs");
            def.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        if (doc.contains("mirror_pairs")) {
            for (const auto& m : doc.at("mirror_pairs")) {
                check_data(m.is_array() && m.size() == 2,
                           "skeleton file '" + path + "': mirror entries must be [l, r] pairs");
                def.mirror_pairs.emplace_back(m[0].get<int>(), m[1].get<int>());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("skeleton file '" + path + "': " + e.what());
    }
    def.validate();
    return def;
}

Eigen::MatrixXd build_adjacency(const SkeletonDef& def) {
    const int n = def.joint_count();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [a, b] : def.edges) {
        check_arg(a >= 0 && a < n && b >= 0 && b < n,
                  "adjacency: edge (" + std::to_string(a) + "," + std::to_string(b) +
                      ") has endpoint outside [0," + std::to_string(n) + ")");
        A(a, b) = 1.0;
        A(b, a) = 1.0;
    }
    return A;
}

NormalizedAdjacency normalize_adjacency(const Eigen::MatrixXd& A) {
    const auto n = A.rows();
    check_arg(A.cols() == n, "normalize_adjacency: matrix must be square");
    for (Eigen::Index i = 0; i < n; ++i) {
        check_arg(A(i, i) == 0.0, "normalize_adjacency: nonzero diagonal at joint " +
                                      std::to_string(i) + " (self-loops are added internally)");
        for (Eigen::Index j = i + 1; j < n; ++j) {
            check_arg(A(i, j) == A(j, i), "normalize_adjacency: input is not symmetric at (" +
                                              std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }

    Eigen::MatrixXd tilde = A + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd dinv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dinv[i] = 1.0 / std::sqrt(tilde.row(i).sum());
    }

    // Fill the upper triangle and mirror it so symmetry holds bit-for-bit.
    NormalizedAdjacency out;
    out.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            double v = dinv[i] * tilde(i, j) * dinv[j];
            out.matrix(i, j) = v;
            out.matrix(j, i) = v;
        }
    }
    return out;
}

}  // namespace gait
