#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gait/pose.hpp"
#include "gait/rng.hpp"
#include "oracles.hpp"

using namespace gait;
namespace fs = std::filesystem;

namespace {

// Three-joint skeleton with one mirror pair, for controlled augment tests.
std::shared_ptr<const SkeletonDef> tiny_skeleton() {
    auto def = std::make_shared<SkeletonDef>();
    def->name = "tiny3";
    def->joint_names = {"root", "left", "right"};
    def->edges = {{0, 1}, {0, 2}};
    def->mirror_pairs = {{1, 2}};
    def->validate();
    return def;
}

PoseSequence tiny_sequence(int T) {
    PoseSequence seq;
    seq.subject_id = "s0";
    seq.skeleton = tiny_skeleton();
    seq.x.resize(T, 3);
    seq.y.resize(T, 3);
    seq.conf = Eigen::MatrixXd::Ones(T, 3);
    for (int t = 0; t < T; ++t) {
        seq.x.row(t) << 10.0 + t, 20.0 + t, 30.0 + t;
        seq.y.row(t) << 1.0 * t, 2.0 * t, 3.0 * t;
    }
    return seq;
}

bool frames_equal(const PoseSequence& a, const PoseSequence& b) {
    return a.x == b.x && a.y == b.y && a.conf == b.conf;
}

// Mean per-frame joint displacement magnitude, then the dominant bin of its
// naive discrete Fourier transform (bins 1..T/2).
int dominant_frequency_bin(const PoseSequence& seq) {
    const int T = seq.num_frames() - 1;
    std::vector<double> disp(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        double acc = 0.0;
        for (int j = 0; j < seq.num_joints(); ++j) {
            acc += std::hypot(seq.x(t + 1, j) - seq.x(t, j), seq.y(t + 1, j) - seq.y(t, j));
        }
        disp[static_cast<std::size_t>(t)] = acc / seq.num_joints();
    }
    int best = 1;
    double best_mag = -1.0;
    for (int k = 1; k <= T / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (int t = 0; t < T; ++t) {
            const double w = 2.0 * M_PI * k * t / T;
            re += disp[static_cast<std::size_t>(t)] * std::cos(w);
            im -= disp[static_cast<std::size_t>(t)] * std::sin(w);
        }
        const double mag = re * re + im * im;
        if (mag > best_mag) {
            best_mag = mag;
            best = k;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("synthetic walker is deterministic and well formed") {
    SynthParams p;
    p.noise_sigma = 1.5;
    PoseSequence a = synth_gait(p, 48, 7);
    PoseSequence b = synth_gait(p, 48, 7);
    CHECK(a.num_frames() == 48);
    CHECK(a.num_joints() == 18);
    CHECK(a.skeleton->name == "openpose18");
    a.validate();
    CHECK(frames_equal(a, b));

    // a different seed moves the observation noise
    PoseSequence c = synth_gait(p, 48, 8);
    CHECK_FALSE(frames_equal(a, c));

    // without noise the walker depends only on its parameters
    p.noise_sigma = 0.0;
    CHECK(frames_equal(synth_gait(p, 48, 7), synth_gait(p, 48, 9)));
}

TEST_CASE("stride frequencies separate in the displacement spectrum") {
    SynthParams lo, hi;
    lo.stride_freq = 1.0;
    hi.stride_freq = 1.3;  // 30% apart
    const int bin_lo = dominant_frequency_bin(synth_gait(lo, 129, 1));
    const int bin_hi = dominant_frequency_bin(synth_gait(hi, 129, 1));
    CHECK(bin_lo != bin_hi);
    CHECK(bin_hi > bin_lo);
}

TEST_CASE("pad_or_crop") {
    PoseSequence seq = tiny_sequence(10);

    SUBCASE("same length is identity") {
        CHECK(frames_equal(pad_or_crop(seq, 10), seq));
    }
    SUBCASE("longer input is cropped centrally") {
        PoseSequence out = pad_or_crop(seq, 4);
        REQUIRE(out.num_frames() == 4);
        // frames 3..6 of the original ((10-4)/2 = 3)
        for (int t = 0; t < 4; ++t) {
            CHECK(out.x.row(t) == seq.x.row(t + 3));
        }
    }
    SUBCASE("shorter input repeats cyclically") {
        PoseSequence out = pad_or_crop(seq, 23);
        REQUIRE(out.num_frames() == 23);
        for (int t = 0; t < 23; ++t) {
            CHECK(out.x.row(t) == seq.x.row(t % 10));
            CHECK(out.y.row(t) == seq.y.row(t % 10));
        }
    }
    SUBCASE("target must be positive") {
        CHECK_THROWS_AS(pad_or_crop(seq, 0), std::invalid_argument);
    }
}

TEST_CASE("augment with an all-off policy is the identity on frames") {
    PoseSequence seq = tiny_sequence(12);
    AugmentPolicy policy;
    policy.temporal_crop_len = 12;  // full window
    PoseSequence out = augment(seq, policy, 123);
    CHECK(frames_equal(out, seq));
}

TEST_CASE("temporal crop picks a contiguous window") {
    PoseSequence seq = tiny_sequence(20);
    AugmentPolicy policy;
    policy.temporal_crop_len = 8;
    PoseSequence out = augment(seq, policy, 42);
    REQUIRE(out.num_frames() == 8);
    // x increases by exactly 1 per original frame, so a contiguous window
    // keeps that property; locate the start from the first frame.
    const int start = static_cast<int>(out.x(0, 0) - 10.0);
    CHECK(start >= 0);
    CHECK(start + 8 <= 20);
    for (int t = 0; t < 8; ++t) CHECK(out.x.row(t) == seq.x.row(start + t));
    // deterministic in the seed
    CHECK(frames_equal(out, augment(seq, policy, 42)));
}

TEST_CASE("augment rejects sequences shorter than the crop window") {
    PoseSequence seq = tiny_sequence(6);
    AugmentPolicy policy;
    policy.temporal_crop_len = 8;
    CHECK_THROWS_AS(augment(seq, policy, 0), std::invalid_argument);
}

TEST_CASE("augment policy validation") {
    AugmentPolicy policy;
    policy.temporal_crop_len = 4;
    CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
    policy.temporal_crop_len = 8;
    policy.mirror_prob = 1.5;
    CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
    policy.mirror_prob = 0.0;
    policy.resample_periods = {0};
    CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
}

TEST_CASE("mirror applied twice restores the sequence exactly") {
    // Integer coordinates whose detected-x sum is divisible by the detection
    // count keep the reflection pivot exactly representable, which makes the
    // double reflection an exact involution.
    const int T = 8;
    PoseSequence seq;
    seq.subject_id = "s0";
    seq.skeleton = tiny_skeleton();
    seq.x.resize(T, 3);
    seq.y.resize(T, 3);
    seq.conf = Eigen::MatrixXd::Ones(T, 3);
    long sum = 0;
    for (int t = 0; t < T; ++t) {
        seq.x.row(t) << 100 + 3 * t, 200 - 2 * t, 300 + t;
        seq.y.row(t) << t, 2 * t, 3 * t;
        sum += (100 + 3 * t) + (200 - 2 * t) + (300 + t);
    }
    // pad the last entry so the sum is a multiple of 24 detections
    const long deficit = (24 - sum % 24) % 24;
    seq.x(T - 1, 2) += static_cast<double>(deficit);

    AugmentPolicy policy;
    policy.temporal_crop_len = T;
    policy.mirror_prob = 1.0;
    PoseSequence once = augment(seq, policy, 5);
    CHECK_FALSE(frames_equal(once, seq));
    PoseSequence twice = augment(once, policy, 99);
    CHECK(frames_equal(twice, seq));
}

TEST_CASE("mirror reflects detected joints and spares missing ones") {
    PoseSequence seq = tiny_sequence(6);
    seq.x(2, 1) = 0.0;
    seq.y(2, 1) = 0.0;
    seq.conf(2, 1) = 0.0;  // one missing joint

    AugmentPolicy policy;
    policy.temporal_crop_len = 6;
    policy.mirror_prob = 1.0;
    PoseSequence out = augment(seq, policy, 3);

    // detected mean over the 17 detected joints
    double sum = 0.0;
    int count = 0;
    for (int t = 0; t < 6; ++t) {
        for (int j = 0; j < 3; ++j) {
            if (seq.conf(t, j) > 0.0) {
                sum += seq.x(t, j);
                ++count;
            }
        }
    }
    const double mean_x = sum / count;

    // mirror-pair columns (1, 2) swap after reflecting
    for (int t = 0; t < 6; ++t) {
        if (t == 2) continue;
        CHECK(out.x(t, 1) == doctest::Approx(2.0 * mean_x - seq.x(t, 2)).epsilon(1e-12));
        CHECK(out.x(t, 2) == doctest::Approx(2.0 * mean_x - seq.x(t, 1)).epsilon(1e-12));
        CHECK(out.y(t, 1) == seq.y(t, 2));
    }
    // the missing joint travelled to column 2 unchanged
    CHECK(out.x(2, 2) == 0.0);
    CHECK(out.y(2, 2) == 0.0);
    CHECK(out.conf(2, 2) == 0.0);
}

TEST_CASE("jitter moves only detected joints") {
    PoseSequence seq = tiny_sequence(8);
    seq.conf(1, 0) = 0.0;
    AugmentPolicy policy;
    policy.temporal_crop_len = 8;
    policy.coord_jitter_sigma = 2.0;
    PoseSequence out = augment(seq, policy, 11);
    CHECK(out.x(1, 0) == seq.x(1, 0));
    CHECK(out.y(1, 0) == seq.y(1, 0));
    bool moved = false;
    for (int t = 0; t < 8 && !moved; ++t) {
        for (int j = 0; j < 3 && !moved; ++j) {
            if (seq.conf(t, j) > 0.0 && out.x(t, j) != seq.x(t, j)) moved = true;
        }
    }
    CHECK(moved);
}

TEST_CASE("resampling keeps every p-th frame") {
    PoseSequence seq = tiny_sequence(20);
    AugmentPolicy policy;
    policy.temporal_crop_len = 10;
    policy.resample_periods = {2};
    PoseSequence out = augment(seq, policy, 17);
    REQUIRE(out.num_frames() == 10);
    for (int t = 0; t < 10; ++t) CHECK(out.x.row(t) == seq.x.row(2 * t));
}

TEST_CASE("two augmentation copies keep identity and differ in content") {
    PoseSequence seq = tiny_sequence(30);
    seq.subject_id = "walker";
    seq.view_label = 45;
    AugmentPolicy policy;
    policy.temporal_crop_len = 10;
    policy.coord_jitter_sigma = 0.5;
    auto [a, b] = two_views(seq, policy, 2021);
    CHECK(a.subject_id == "walker");
    CHECK(b.subject_id == "walker");
    CHECK(a.view_label == 45);
    CHECK_FALSE(frames_equal(a, b));
    // deterministic in the seed
    auto [a2, b2] = two_views(seq, policy, 2021);
    CHECK(frames_equal(a, a2));
    CHECK(frames_equal(b, b2));
}

TEST_CASE("pose CSV round-trips bit-exactly") {
    SynthParams p;
    p.noise_sigma = 1.0;
    PoseSequence seq = synth_gait(p, 16, 3);
    const std::string path = "/tmp/gait_test_pose.csv";
    save_pose_csv(seq, path);
    PoseSequence back = load_pose_csv(path, builtin_skeleton("openpose18"));
    CHECK(back.x == seq.x);
    CHECK(back.y == seq.y);
    CHECK(back.conf == seq.conf);
    std::remove(path.c_str());
}

TEST_CASE("pose CSV rejects malformed input") {
    const std::string path = "/tmp/gait_test_pose_bad.csv";
    SUBCASE("wrong header") {
        std::ofstream(path) << "frame,joint,x,y,conf\n0,0,1,2,1\n";
        CHECK_THROWS_AS(load_pose_csv(path, builtin_skeleton("openpose18")), DataError);
    }
    SUBCASE("joint out of range") {
        std::ofstream(path) << "t,joint,x,y,conf\n0,99,1,2,1\n";
        CHECK_THROWS_AS(load_pose_csv(path, builtin_skeleton("openpose18")), DataError);
    }
    SUBCASE("garbled row") {
        std::ofstream(path) << "t,joint,x,y,conf\n0,0,oops,2,1\n";
        CHECK_THROWS_AS(load_pose_csv(path, builtin_skeleton("openpose18")), DataError);
    }
    std::remove(path.c_str());
}

TEST_CASE("per-frame keypoint JSON parses in filename order") {
    const std::string dir = "/tmp/gait_test_frames";
    fs::create_directories(dir);
    auto write_frame = [&](const std::string& name, double x0, bool empty) {
        nlohmann::json doc;
        if (empty) {
            doc["people"] = nlohmann::json::array();
        } else {
            std::vector<double> kp(18 * 3, 0.0);
            kp[0] = x0;
            kp[1] = 5.0;
            kp[2] = 0.9;
            doc["people"] = {{{"pose_keypoints_2d", kp}}};
        }
        std::ofstream(dir + "/" + name) << doc.dump();
    };
    write_frame("frame_000.json", 11.0, false);
    write_frame("frame_001.json", 0.0, true);
    write_frame("frame_002.json", 33.0, false);

    PoseSequence seq = parse_openpose_json(dir, builtin_skeleton("openpose18"));
    REQUIRE(seq.num_frames() == 3);
    CHECK(seq.x(0, 0) == 11.0);
    CHECK(seq.conf(0, 0) == 0.9);
    // the undetected frame stays all-zero
    CHECK(seq.x.row(1).isZero(0.0));
    CHECK(seq.conf.row(1).isZero(0.0));
    CHECK(seq.x(2, 0) == 33.0);
    fs::remove_all(dir);
}

TEST_CASE("dataset index round-trips and resolves relative paths") {
    const std::string dir = "/tmp/gait_test_index";
    fs::create_directories(dir);
    SynthParams p;
    PoseSequence seq = synth_gait(p, 12, 1);
    seq.subject_id = "s7";
    seq.view_label = 90;
    save_pose_csv(seq, dir + "/a.csv");

    std::vector<DatasetEntry> entries{{"s7", 90, "walk", "a.csv"}};
    save_dataset_index(entries, dir + "/index.json");
    auto back = load_dataset_index(dir + "/index.json");
    REQUIRE(back.size() == 1);
    CHECK(back[0].subject_id == "s7");
    CHECK(back[0].view == 90);
    CHECK(back[0].condition == "walk");
    CHECK(back[0].path == "a.csv");

    auto seqs = load_sequences(dir + "/index.json", builtin_skeleton("openpose18"));
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].subject_id == "s7");
    CHECK(seqs[0].view_label == 90);
    CHECK(seqs[0].x == seq.x);
    fs::remove_all(dir);
}

TEST_CASE("sequence validation rejects inconsistent data") {
    PoseSequence seq = tiny_sequence(4);
    SUBCASE("shape mismatch") {
        seq.y.resize(3, 3);
        CHECK_THROWS_AS(seq.validate(), std::invalid_argument);
    }
    SUBCASE("confidence outside [0,1]") {
        seq.conf(0, 0) = 1.5;
        CHECK_THROWS_AS(seq.validate(), std::invalid_argument);
    }
    SUBCASE("missing skeleton") {
        seq.skeleton = nullptr;
        CHECK_THROWS_AS(seq.validate(), std::invalid_argument);
    }
    SUBCASE("joint count differs from skeleton") {
        seq.skeleton = builtin_skeleton("openpose18");
        CHECK_THROWS_AS(seq.validate(), std::invalid_argument);
    }
}
