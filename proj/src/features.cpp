#include "gait/features.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gait/common.hpp"

namespace gait {

Eigen::Vector2d frame_center(const Eigen::MatrixXd& frame_xy) {
    check_arg(frame_xy.rows() >= 1 && frame_xy.cols() == 2,
              "frame_center: expected an N×2 coordinate matrix");
    return frame_xy.colwise().mean();
}

double angle(double dy, double dx) {
    if (dy == 0.0 && dx == 0.0) return 0.0;
    double a = std::atan2(dy, dx);
    if (a == -M_PI) a = M_PI;  // keep the range (−π, π]
    return a;
}

double wrap_angle(double a) {
    double r = std::fmod(a + M_PI, 2.0 * M_PI);
    if (r <= 0.0) r += 2.0 * M_PI;
    return r - M_PI;
}

std::vector<Eigen::MatrixXd> joint_features(const PoseSequence& seq) {
    const int T = seq.num_frames(), N = seq.num_joints();
    std::vector<Eigen::MatrixXd> out(2, Eigen::MatrixXd::Zero(T, N));
    for (int t = 0; t < T; ++t) {
        const double xc = seq.x.row(t).mean();
        const double yc = seq.y.row(t).mean();
        for (int i = 0; i < N; ++i) {
            const double dx = seq.x(t, i) - xc;
            const double dy = seq.y(t, i) - yc;
            out[0](t, i) = std::hypot(dx, dy);
            out[1](t, i) = angle(dy, dx);
        }
    }
    return out;
}

std::vector<Eigen::MatrixXd> acceleration_features(const PoseSequence& seq) {
    const int T = seq.num_frames(), N = seq.num_joints();

    // Second difference of joint i's position at frame tau with period Ts;
    // exact zero whenever the three-frame stencil leaves [0, T).
    auto accel = [&](int i, int tau, int Ts) -> Eigen::Vector2d {
        if (tau - Ts < 0 || tau + Ts >= T) return Eigen::Vector2d::Zero();
        return {seq.x(tau + Ts, i) - 2.0 * seq.x(tau, i) + seq.x(tau - Ts, i),
                seq.y(tau + Ts, i) - 2.0 * seq.y(tau, i) + seq.y(tau - Ts, i)};
    };

    std::vector<Eigen::MatrixXd> out(12, Eigen::MatrixXd::Zero(T, N));
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < N; ++i) {
            int c = 0;
            for (int Ts : {1, 2}) {
                for (int tau : {t - Ts, t, t + Ts}) {
                    const Eigen::Vector2d a = accel(i, tau, Ts);
                    out[c++](t, i) = a.x();
                    out[c++](t, i) = a.y();
                }
            }
        }
    }
    return out;
}

std::vector<Eigen::MatrixXd> bone_features(const PoseSequence& seq, const SkeletonDef& skeleton) {
    const int T = seq.num_frames(), N = seq.num_joints();
    check_arg(N == skeleton.joint_count(), "bone_features: sequence/skeleton joint count mismatch");
    check_arg(!skeleton.neighbor_candidates.empty(),
              "bone_features: skeleton was not validated (neighbor candidates missing)");

    // Per-frame bone length and angle; the bone points from each joint to its
    // nearest connected joint in that frame (ties go to the lowest index, which
    // comes first in the ascending candidate list).
    Eigen::MatrixXd len = Eigen::MatrixXd::Zero(T, N);
    Eigen::MatrixXd ang = Eigen::MatrixXd::Zero(T, N);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < N; ++i) {
            const auto& cands = skeleton.neighbor_candidates[i];
            if (cands.empty()) continue;  // single-joint skeleton: no bones
            int best = cands[0];
            double best_d2 = std::pow(seq.x(t, i) - seq.x(t, best), 2) +
                             std::pow(seq.y(t, i) - seq.y(t, best), 2);
            for (std::size_t k = 1; k < cands.size(); ++k) {
                const int j = cands[k];
                const double d2 = std::pow(seq.x(t, i) - seq.x(t, j), 2) +
                                  std::pow(seq.y(t, i) - seq.y(t, j), 2);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = j;
                }
            }
            const double bx = seq.x(t, i) - seq.x(t, best);
            const double by = seq.y(t, i) - seq.y(t, best);
            len(t, i) = std::hypot(bx, by);
            ang(t, i) = angle(by, bx);
        }
    }

    std::vector<Eigen::MatrixXd> out(6, Eigen::MatrixXd::Zero(T, N));
    out[0] = len;
    out[1] = ang;
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < N; ++i) {
            for (int Ts : {1, 2}) {
                if (t - Ts >= 0) {
                    out[2 * Ts](t, i) = len(t, i) - len(t - Ts, i);
                    out[2 * Ts + 1](t, i) = wrap_angle(ang(t, i) - ang(t - Ts, i));
                }
            }
        }
    }
    return out;
}

namespace {

Eigen::MatrixXd pack_channels(const PoseSequence& seq) {
    const int T = seq.num_frames(), N = seq.num_joints();
    std::vector<Eigen::MatrixXd> chans = joint_features(seq);
    for (auto& m : acceleration_features(seq)) chans.push_back(std::move(m));
    for (auto& m : bone_features(seq, *seq.skeleton)) chans.push_back(std::move(m));

    Eigen::MatrixXd entry(static_cast<int>(chans.size()), T * N);
    for (int c = 0; c < static_cast<int>(chans.size()); ++c) {
        for (int t = 0; t < T; ++t) {
            for (int n = 0; n < N; ++n) entry(c, t * N + n) = chans[c](t, n);
        }
    }
    return entry;
}

}  // namespace

FeatureTensor assemble_batch(const std::vector<std::pair<PoseSequence, PoseSequence>>& pairs) {
    check_arg(!pairs.empty(), "assemble_batch: empty pair list");
    FeatureTensor out;
    out.frames = pairs.front().first.num_frames();
    out.joints = pairs.front().first.num_joints();

    for (const auto& [a, b] : pairs) {
        for (const PoseSequence* seq : {&a, &b}) {
            seq->validate();
            check_arg(seq->num_frames() == out.frames && seq->num_joints() == out.joints,
                      "assemble_batch: sequences disagree on frame or joint count");
            check_arg(seq->skeleton->name == pairs.front().first.skeleton->name,
                      "assemble_batch: sequences use different skeletons");
            out.data.push_back(pack_channels(*seq));
            if (!out.data.back().allFinite()) {
                throw NumericError("assemble_batch: non-finite feature value for subject '" +
                                   seq->subject_id + "'");
            }
            out.labels.push_back(seq->subject_id);
            out.copy_index.push_back(seq == &a ? 1 : 2);
        }
    }
    return out;
}

FeatureTensor assemble_single(const PoseSequence& seq) {
    return assemble_sequences({seq});
}

FeatureTensor assemble_sequences(const std::vector<PoseSequence>& seqs) {
    check_arg(!seqs.empty(), "assemble_sequences: empty sequence list");
    FeatureTensor out;
    out.frames = seqs.front().num_frames();
    out.joints = seqs.front().num_joints();
    for (const PoseSequence& seq : seqs) {
        seq.validate();
        check_arg(seq.num_frames() == out.frames && seq.num_joints() == out.joints,
                  "assemble_sequences: sequences disagree on frame or joint count");
        check_arg(seq.skeleton->name == seqs.front().skeleton->name,
                  "assemble_sequences: sequences use different skeletons");
        out.data.push_back(pack_channels(seq));
        if (!out.data.back().allFinite()) {
            throw NumericError("feature extraction: non-finite value for subject '" +
                               seq.subject_id + "'");
        }
        out.labels.push_back(seq.subject_id);
        out.copy_index.push_back(1);
    }
    return out;
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    check_data(in.good(), "feature file '" + path + "': truncated header");
    return v;
}

}  // namespace

void save_feature_tensor(const FeatureTensor& tensor, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check_data(out.good(), "cannot write feature file '" + path + "'");
    out.write("GGF1", 4);
    write_u32(out, static_cast<std::uint32_t>(tensor.batch()));
    write_u32(out, static_cast<std::uint32_t>(tensor.channels()));
    write_u32(out, static_cast<std::uint32_t>(tensor.frames));
    write_u32(out, static_cast<std::uint32_t>(tensor.joints));
    const int C = tensor.channels(), TN = tensor.frames * tensor.joints;
    std::vector<float> row(static_cast<std::size_t>(TN));
    for (const Eigen::MatrixXd& entry : tensor.data) {
        check_arg(entry.rows() == C && entry.cols() == TN,
                  "save_feature_tensor: entry shape does not match header");
        for (int c = 0; c < C; ++c) {
            for (int k = 0; k < TN; ++k) row[static_cast<std::size_t>(k)] = static_cast<float>(entry(c, k));
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
    }
    check_data(out.good(), "error while writing feature file '" + path + "'");

    nlohmann::json side;
    side["format"] = "GGF1";
    side["layout"] = {{"joint", {tensor.layout.joint_offset, tensor.layout.joint_width}},
                      {"acceleration", {tensor.layout.accel_offset, tensor.layout.accel_width}},
                      {"bone", {tensor.layout.bone_offset, tensor.layout.bone_width}}};
    side["labels"] = tensor.labels;
    side["copy_index"] = tensor.copy_index;
    std::ofstream sc(path + ".json");
    check_data(sc.good(), "cannot write feature sidecar '" + path + ".json'");
    sc << side.dump(2) << '\n';
}

FeatureTensor load_feature_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check_data(in.good(), "cannot open feature file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    check_data(in.good() && std::memcmp(magic, "GGF1", 4) == 0,
               "feature file '" + path + "': bad magic");
    FeatureTensor out;
    const std::uint32_t B = read_u32(in, path);
    const std::uint32_t C = read_u32(in, path);
    out.frames = static_cast<int>(read_u32(in, path));
    out.joints = static_cast<int>(read_u32(in, path));
    check_data(C == static_cast<std::uint32_t>(out.layout.channels()),
               "feature file '" + path + "': unexpected channel count " + std::to_string(C));

    const int TN = out.frames * out.joints;
    std::vector<float> row(static_cast<std::size_t>(TN));
    for (std::uint32_t b = 0; b < B; ++b) {
        Eigen::MatrixXd entry(static_cast<int>(C), TN);
        for (std::uint32_t c = 0; c < C; ++c) {
            in.read(reinterpret_cast<char*>(row.data()),
                    static_cast<std::streamsize>(row.size() * sizeof(float)));
            check_data(in.good(), "feature file '" + path + "': truncated data");
            for (int k = 0; k < TN; ++k) entry(static_cast<int>(c), k) = row[static_cast<std::size_t>(k)];
        }
        out.data.push_back(std::move(entry));
    }

    std::ifstream sc(path + ".json");
    if (sc.good()) {
        nlohmann::json side;
        try {
            sc >> side;
            out.labels = side.value("labels", std::vector<std::string>{});
            out.copy_index = side.value("copy_index", std::vector<int>{});
        } catch (const nlohmann::json::exception& e) {
            throw DataError("feature sidecar '" + path + ".json': " + e.what());
        }
    }
    if (out.labels.empty()) out.labels.assign(B, "");
    if (out.copy_index.empty()) out.copy_index.assign(B, 1);
    return out;
}

}  // namespace gait
