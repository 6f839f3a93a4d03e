#include "gait/pose.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gait/common.hpp"
#include "gait/rng.hpp"

namespace fs = std::filesystem;

namespace gait {

void PoseSequence::validate() const {
    check_arg(skeleton != nullptr, "pose sequence: missing skeleton");
    const int t = num_frames();
    const int n = num_joints();
    check_arg(t >= 1, "pose sequence: needs at least one frame");
    check_arg(n == skeleton->joint_count(),
              "pose sequence: " + std::to_string(n) + " joints but skeleton '" + skeleton->name +
                  "' has " + std::to_string(skeleton->joint_count()));
    check_arg(y.rows() == t && y.cols() == n && conf.rows() == t && conf.cols() == n,
              "pose sequence: x/y/conf shapes disagree");
    check_arg((conf.array() >= 0.0).all() && (conf.array() <= 1.0).all(),
              "pose sequence: confidence outside [0,1]");
}

std::shared_ptr<const SkeletonDef> builtin_skeleton(const std::string& name) {
    return std::make_shared<const SkeletonDef>(skeleton_by_name(name));
}

void AugmentPolicy::validate() const {
    check_arg(temporal_crop_len >= 5, "augment policy: temporal_crop_len must be >= 5");
    check_arg(coord_jitter_sigma >= 0.0, "augment policy: coord_jitter_sigma must be >= 0");
    check_arg(mirror_prob >= 0.0 && mirror_prob <= 1.0,
              "augment policy: mirror_prob must be in [0,1]");
    for (int p : resample_periods) {
        check_arg(p >= 1, "augment policy: resample periods must be >= 1");
    }
}

namespace {

// Segment endpoint offset for a limb hanging at `ang` radians from straight
// down, length L, seen from a camera yawed by view: the forward component is
// foreshortened by sin(view), vertical is unaffected.
struct Projector {
    double sin_view;
    double cos_view;
    double limb_dx(double ang, double len) const { return std::sin(ang) * len * sin_view; }
    double limb_dy(double ang, double len) const { return std::cos(ang) * len; }
};

}  // namespace

PoseSequence synth_gait(const SynthParams& params, int T, std::uint64_t seed) {
    check_arg(T >= 1, "synth_gait: T must be >= 1");
    check_arg(params.body_scale > 0.0, "synth_gait: body scale must be positive");
    check_arg(params.fps > 0.0, "synth_gait: fps must be positive");

    static const std::shared_ptr<const SkeletonDef> skel = builtin_skeleton("openpose18");
    const int N = skel->joint_count();

    PoseSequence seq;
    seq.skeleton = skel;
    seq.condition = "synth";
    seq.x.setZero(T, N);
    seq.y.setZero(T, N);
    seq.conf.setOnes(T, N);

    const double s = params.body_scale;
    const double view = params.view_deg * M_PI / 180.0;
    const Projector pr{std::sin(view), std::cos(view)};

    // Segment lengths and lateral offsets as fractions of body scale.
    const double torso = 0.60 * s, thigh = 0.28 * s, shank = 0.26 * s;
    const double uarm = 0.17 * s, farm = 0.16 * s;
    const double hip_off = 0.09 * s, shoulder_off = 0.11 * s;

    const double two_pi = 2.0 * M_PI;
    for (int t = 0; t < T; ++t) {
        const double phi = two_pi * params.stride_freq * t / params.fps + params.phase;

        const double pelvis_x = 320.0 + params.sway_amp * s * std::sin(phi) * pr.cos_view;
        const double pelvis_y = 400.0 - params.bob_amp * s * std::cos(2.0 * phi);
        const double neck_x = 320.0 + 0.5 * params.sway_amp * s * std::sin(phi) * pr.cos_view;
        const double neck_y = pelvis_y - torso;

        // Right leg leads at phase 0; the left leg and both arms are antiphase
        // to their counterparts. Knee and elbow flexion stay non-negative.
        const double thigh_r = params.hip_amp * std::sin(phi);
        const double thigh_l = params.hip_amp * std::sin(phi + M_PI);
        const double knee_r = params.knee_amp * (0.5 - 0.5 * std::cos(phi + M_PI / 3.0));
        const double knee_l = params.knee_amp * (0.5 - 0.5 * std::cos(phi + M_PI + M_PI / 3.0));
        const double arm_r = params.arm_amp * std::sin(phi + M_PI);
        const double arm_l = params.arm_amp * std::sin(phi);
        const double elbow_r = params.elbow_amp * (0.5 - 0.5 * std::cos(phi + M_PI));
        const double elbow_l = params.elbow_amp * (0.5 - 0.5 * std::cos(phi));

        auto put = [&](int j, double px, double py) {
            seq.x(t, j) = px;
            seq.y(t, j) = py;
        };

        put(1, neck_x, neck_y);  // neck
        const double nose_x = neck_x, nose_y = neck_y - 0.11 * s;
        put(0, nose_x, nose_y);
        put(14, nose_x + 0.030 * s * pr.cos_view, nose_y - 0.025 * s);  // r_eye
        put(15, nose_x - 0.030 * s * pr.cos_view, nose_y - 0.025 * s);  // l_eye
        put(16, nose_x + 0.063 * s * pr.cos_view, nose_y - 0.012 * s);  // r_ear
        put(17, nose_x - 0.063 * s * pr.cos_view, nose_y - 0.012 * s);  // l_ear

        const double rsx = neck_x + shoulder_off * pr.cos_view, rsy = neck_y + 0.02 * s;
        const double lsx = neck_x - shoulder_off * pr.cos_view, lsy = neck_y + 0.02 * s;
        put(2, rsx, rsy);
        put(3, rsx + pr.limb_dx(arm_r, uarm), rsy + pr.limb_dy(arm_r, uarm));
        put(4, seq.x(t, 3) + pr.limb_dx(arm_r + elbow_r, farm),
            seq.y(t, 3) + pr.limb_dy(arm_r + elbow_r, farm));
        put(5, lsx, lsy);
        put(6, lsx + pr.limb_dx(arm_l, uarm), lsy + pr.limb_dy(arm_l, uarm));
        put(7, seq.x(t, 6) + pr.limb_dx(arm_l + elbow_l, farm),
            seq.y(t, 6) + pr.limb_dy(arm_l + elbow_l, farm));

        const double rhx = pelvis_x + hip_off * pr.cos_view, lhx = pelvis_x - hip_off * pr.cos_view;
        put(8, rhx, pelvis_y);
        put(9, rhx + pr.limb_dx(thigh_r, thigh), pelvis_y + pr.limb_dy(thigh_r, thigh));
        put(10, seq.x(t, 9) + pr.limb_dx(thigh_r - knee_r, shank),
            seq.y(t, 9) + pr.limb_dy(thigh_r - knee_r, shank));
        put(11, lhx, pelvis_y);
        put(12, lhx + pr.limb_dx(thigh_l, thigh), pelvis_y + pr.limb_dy(thigh_l, thigh));
        put(13, seq.x(t, 12) + pr.limb_dx(thigh_l - knee_l, shank),
            seq.y(t, 12) + pr.limb_dy(thigh_l - knee_l, shank));
    }

    if (params.noise_sigma > 0.0) {
        Rng rng(derive_seed(seed, "synth.noise"));
        for (int t = 0; t < T; ++t) {
            for (int j = 0; j < N; ++j) {
                seq.x(t, j) += rng.normal(0.0, params.noise_sigma);
                seq.y(t, j) += rng.normal(0.0, params.noise_sigma);
            }
        }
    }
    return seq;
}

namespace {

PoseSequence take_frames(const PoseSequence& seq, const std::vector<int>& idx) {
    PoseSequence out = seq;
    const int n = seq.num_joints();
    out.x.resize(static_cast<int>(idx.size()), n);
    out.y.resize(static_cast<int>(idx.size()), n);
    out.conf.resize(static_cast<int>(idx.size()), n);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.x.row(static_cast<int>(k)) = seq.x.row(idx[k]);
        out.y.row(static_cast<int>(k)) = seq.y.row(idx[k]);
        out.conf.row(static_cast<int>(k)) = seq.conf.row(idx[k]);
    }
    return out;
}

void mirror_in_place(PoseSequence& seq) {
    // Reflect detected joints about their mean x, then swap left/right roles.
    // Missing joints stay exactly (0,0,0).
    double sum = 0.0;
    long count = 0;
    for (int t = 0; t < seq.num_frames(); ++t) {
        for (int j = 0; j < seq.num_joints(); ++j) {
            if (seq.conf(t, j) > 0.0) {
                sum += seq.x(t, j);
                ++count;
            }
        }
    }
    if (count == 0) return;
    const double mean_x = sum / static_cast<double>(count);
    for (int t = 0; t < seq.num_frames(); ++t) {
        for (int j = 0; j < seq.num_joints(); ++j) {
            if (seq.conf(t, j) > 0.0) seq.x(t, j) = 2.0 * mean_x - seq.x(t, j);
        }
    }
    for (const auto& [l, r] : seq.skeleton->mirror_pairs) {
        seq.x.col(l).swap(seq.x.col(r));
        seq.y.col(l).swap(seq.y.col(r));
        seq.conf.col(l).swap(seq.conf.col(r));
    }
}

}  // namespace

PoseSequence augment(const PoseSequence& seq, const AugmentPolicy& policy, std::uint64_t seed) {
    policy.validate();
    seq.validate();
    const int T = seq.num_frames();
    check_arg(T >= policy.temporal_crop_len,
              "augment: sequence has " + std::to_string(T) + " frames, shorter than crop length " +
                  std::to_string(policy.temporal_crop_len));

    // Pace resampling: keep every p-th frame. A resampled sequence shorter than
    // the crop window is extended cyclically before cropping.
    std::vector<int> periods = policy.resample_periods;
    if (periods.empty()) periods = {1};
    int period = periods.size() == 1
                     ? periods[0]
                     : periods[Rng(derive_seed(seed, "aug.period")).below(periods.size())];
    PoseSequence work;
    if (period > 1) {
        std::vector<int> idx;
        for (int t = 0; t < T; t += period) idx.push_back(t);
        work = take_frames(seq, idx);
        if (work.num_frames() < policy.temporal_crop_len) {
            work = pad_or_crop(work, policy.temporal_crop_len);
        }
    } else {
        work = seq;
    }

    const int span = work.num_frames() - policy.temporal_crop_len;
    int start = span == 0 ? 0
                          : static_cast<int>(Rng(derive_seed(seed, "aug.crop"))
                                                 .below(static_cast<std::uint64_t>(span) + 1));
    std::vector<int> window(policy.temporal_crop_len);
    for (int k = 0; k < policy.temporal_crop_len; ++k) window[k] = start + k;
    PoseSequence out = take_frames(work, window);

    if (policy.mirror_prob > 0.0 &&
        Rng(derive_seed(seed, "aug.mirror")).uniform() < policy.mirror_prob) {
        mirror_in_place(out);
    }

    if (policy.coord_jitter_sigma > 0.0) {
        Rng rng(derive_seed(seed, "aug.jitter"));
        for (int t = 0; t < out.num_frames(); ++t) {
            for (int j = 0; j < out.num_joints(); ++j) {
                if (out.conf(t, j) > 0.0) {
                    out.x(t, j) += rng.normal(0.0, policy.coord_jitter_sigma);
                    out.y(t, j) += rng.normal(0.0, policy.coord_jitter_sigma);
                }
            }
        }
    }
    return out;
}

std::pair<PoseSequence, PoseSequence> two_views(const PoseSequence& seq,
                                                const AugmentPolicy& policy, std::uint64_t seed) {
    return {augment(seq, policy, derive_seed(seed, "two_views", {1})),
            augment(seq, policy, derive_seed(seed, "two_views", {2}))};
}

PoseSequence pad_or_crop(const PoseSequence& seq, int T_fixed) {
    check_arg(T_fixed >= 1, "pad_or_crop: target length must be >= 1");
    const int T = seq.num_frames();
    if (T == T_fixed) return seq;
    std::vector<int> idx(T_fixed);
    if (T > T_fixed) {
        const int start = (T - T_fixed) / 2;
        for (int k = 0; k < T_fixed; ++k) idx[k] = start + k;
    } else {
        for (int k = 0; k < T_fixed; ++k) idx[k] = k % T;
    }
    return take_frames(seq, idx);
}

PoseSequence parse_openpose_json(const std::string& directory,
                                 std::shared_ptr<const SkeletonDef> skeleton) {
    check_arg(skeleton != nullptr, "parse_openpose_json: missing skeleton");
    check_data(fs::is_directory(directory),
               "pose directory '" + directory + "' does not exist");

    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path().string());
        }
    }
    check_data(!files.empty(), "pose directory '" + directory + "' has no .json frames");
    std::sort(files.begin(), files.end(),
              [](const std::string& a, const std::string& b) {
                  return fs::path(a).filename().string() < fs::path(b).filename().string();
              });

    const int N = skeleton->joint_count();
    PoseSequence seq;
    seq.skeleton = std::move(skeleton);
    const int T = static_cast<int>(files.size());
    seq.x.setZero(T, N);
    seq.y.setZero(T, N);
    seq.conf.setZero(T, N);

    for (int t = 0; t < T; ++t) {
        std::ifstream in(files[t]);
        check_data(in.good(), "cannot open pose frame '" + files[t] + "'");
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("pose frame '" + files[t] + "': " + e.what());
        }
        const auto people = doc.value("people", nlohmann::json::array());
        if (people.empty()) continue;  // no detection: frame stays all-zero
        const auto& kp = people.at(0).at("pose_keypoints_2d");
        check_data(kp.is_array() && static_cast<int>(kp.size()) == 3 * N,
                   "pose frame '" + files[t] + "': expected " + std::to_string(3 * N) +
                       " keypoint values, got " + std::to_string(kp.size()));
        for (int j = 0; j < N; ++j) {
            seq.x(t, j) = kp[3 * j].get<double>();
            seq.y(t, j) = kp[3 * j + 1].get<double>();
            seq.conf(t, j) = kp[3 * j + 2].get<double>();
        }
    }
    return seq;
}

PoseSequence load_pose_csv(const std::string& path,
                           std::shared_ptr<const SkeletonDef> skeleton) {
    check_arg(skeleton != nullptr, "load_pose_csv: missing skeleton");
    std::ifstream in(path);
    check_data(in.good(), "cannot open pose file '" + path + "'");

    std::string header;
    std::getline(in, header);
    check_data(header == "t,joint,x,y,conf",
               "pose file '" + path + "': expected header t,joint,x,y,conf");

    struct Row {
        int t, j;
        double x, y, c;
    };
    std::vector<Row> rows;
    int max_t = -1;
    const int N = skeleton->joint_count();
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Row r{};
        char c1, c2, c3, c4;
        std::istringstream ss(line);
        ss >> r.t >> c1 >> r.j >> c2 >> r.x >> c3 >> r.y >> c4 >> r.c;
        check_data(ss && c1 == ',' && c2 == ',' && c3 == ',' && c4 == ',',
                   "pose file '" + path + "': bad row at line " + std::to_string(line_no));
        check_data(r.t >= 0, "pose file '" + path + "': negative frame index at line " +
                                 std::to_string(line_no));
        check_data(r.j >= 0 && r.j < N, "pose file '" + path + "': joint index out of range at line " +
                                            std::to_string(line_no));
        max_t = std::max(max_t, r.t);
        rows.push_back(r);
    }
    check_data(max_t >= 0, "pose file '" + path + "': no data rows");

    PoseSequence seq;
    seq.skeleton = std::move(skeleton);
    seq.x.setZero(max_t + 1, N);
    seq.y.setZero(max_t + 1, N);
    seq.conf.setZero(max_t + 1, N);
    for (const Row& r : rows) {
        seq.x(r.t, r.j) = r.x;
        seq.y(r.t, r.j) = r.y;
        seq.conf(r.t, r.j) = r.c;
    }
    return seq;
}

void save_pose_csv(const PoseSequence& seq, const std::string& path) {
    std::ofstream out(path);
    check_data(out.good(), "cannot write pose file '" + path + "'");
    out << "t,joint,x,y,conf\n";
    out.precision(17);
    for (int t = 0; t < seq.num_frames(); ++t) {
        for (int j = 0; j < seq.num_joints(); ++j) {
            out << t << ',' << j << ',' << seq.x(t, j) << ',' << seq.y(t, j) << ','
                << seq.conf(t, j) << '\n';
        }
    }
    check_data(out.good(), "error while writing pose file '" + path + "'");
}

std::vector<DatasetEntry> load_dataset_index(const std::string& index_path) {
    std::ifstream in(index_path);
    check_data(in.good(), "cannot open dataset index '" + index_path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("dataset index '" + index_path + "': " + e.what());
    }
    check_data(doc.is_array(), "dataset index '" + index_path + "': expected a JSON array");

    std::vector<DatasetEntry> entries;
    for (const auto& item : doc) {
        DatasetEntry e;
        try {
            e.subject_id = item.at("subject_id").get<std::string>();
            e.view = item.at("view").get<int>();
            e.condition = item.value("condition", std::string{});
            e.path = item.at("path").get<std::string>();
        } catch (const nlohmann::json::exception& ex) {
            throw DataError("dataset index '" + index_path + "': " + ex.what());
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<PoseSequence> load_sequences(const std::string& index_path,
                                         std::shared_ptr<const SkeletonDef> skeleton) {
    const fs::path base = fs::path(index_path).parent_path();
    std::vector<PoseSequence> seqs;
    for (const DatasetEntry& e : load_dataset_index(index_path)) {
        fs::path p(e.path);
        if (p.is_relative()) p = base / p;
        PoseSequence seq = fs::is_directory(p) ? parse_openpose_json(p.string(), skeleton)
                                               : load_pose_csv(p.string(), skeleton);
        seq.subject_id = e.subject_id;
        seq.view_label = e.view;
        seq.condition = e.condition;
        seq.validate();
        seqs.push_back(std::move(seq));
    }
    return seqs;
}

void save_dataset_index(const std::vector<DatasetEntry>& entries, const std::string& index_path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const DatasetEntry& e : entries) {
        doc.push_back({{"subject_id", e.subject_id},
                       {"view", e.view},
                       {"condition", e.condition},
                       {"path", e.path}});
    }
    std::ofstream out(index_path);
    check_data(out.good(), "cannot write dataset index '" + index_path + "'");
    out << doc.dump(2) << '\n';
    check_data(out.good(), "error while writing dataset index '" + index_path + "'");
}

}  // namespace gait
