#include "gait/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "gait/common.hpp"
#include "gait/log.hpp"
#include "gait/rng.hpp"

namespace gait {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt_cell(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

double euclidean_distance(const Embedding& a, const Embedding& b) {
    check_arg(a.vector.size() == b.vector.size(),
              "euclidean_distance: dimension mismatch (" + std::to_string(a.vector.size()) +
                  " vs " + std::to_string(b.vector.size()) + ")");
    return (a.vector - b.vector).norm();
}

int rank1_index(const Embedding& probe, const std::vector<Embedding>& gallery) {
    check_arg(!gallery.empty(), "rank1_index: empty gallery");
    int best = 0;
    double best_d = euclidean_distance(probe, gallery[0]);
    for (int i = 1; i < static_cast<int>(gallery.size()); ++i) {
        const double d = euclidean_distance(probe, gallery[static_cast<std::size_t>(i)]);
        if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::string rank1_identify(const Embedding& probe, const std::vector<Embedding>& gallery) {
    return gallery[static_cast<std::size_t>(rank1_index(probe, gallery))].label;
}

EvalReport cross_view_eval(const std::vector<Embedding>& gallery,
                           const std::vector<Embedding>& probes) {
    EvalReport rep;
    std::set<int> view_set;
    for (const Embedding& e : gallery) view_set.insert(e.view);
    for (const Embedding& e : probes) view_set.insert(e.view);
    rep.views.assign(view_set.begin(), view_set.end());
    const int v = static_cast<int>(rep.views.size());
    rep.rank1 = Eigen::MatrixXd::Constant(v, v, kNan);
    rep.counts = Eigen::MatrixXi::Zero(v, v);

    std::map<int, std::vector<Embedding>> gallery_by_view;
    std::map<int, std::vector<const Embedding*>> probes_by_view;
    for (const Embedding& e : gallery) gallery_by_view[e.view].push_back(e);
    for (const Embedding& e : probes) probes_by_view[e.view].push_back(&e);

    for (int pi = 0; pi < v; ++pi) {
        for (int gi = 0; gi < v; ++gi) {
            const auto git = gallery_by_view.find(rep.views[static_cast<std::size_t>(gi)]);
            const auto pit = probes_by_view.find(rep.views[static_cast<std::size_t>(pi)]);
            if (git == gallery_by_view.end() || pit == probes_by_view.end()) {
                log_warn("cross_view_eval: cell probe=" +
                         std::to_string(rep.views[static_cast<std::size_t>(pi)]) + " gallery=" +
                         std::to_string(rep.views[static_cast<std::size_t>(gi)]) +
                         " is empty; excluded from means");
                continue;
            }
            long correct = 0;
            for (const Embedding* p : pit->second) {
                if (rank1_identify(*p, git->second) == p->label) ++correct;
            }
            const long total = static_cast<long>(pit->second.size());
            rep.rank1(pi, gi) = static_cast<double>(correct) / static_cast<double>(total);
            rep.counts(pi, gi) = static_cast<int>(total);
            rep.correct_total += correct;
            rep.scored_total += total;
        }
    }

    rep.probe_view_means.assign(static_cast<std::size_t>(v), kNan);
    rep.gallery_view_means.assign(static_cast<std::size_t>(v), kNan);
    for (int pi = 0; pi < v; ++pi) {
        double sum = 0.0;
        int defined = 0;
        for (int gi = 0; gi < v; ++gi) {
            if (!std::isnan(rep.rank1(pi, gi))) {
                sum += rep.rank1(pi, gi);
                ++defined;
            }
        }
        if (defined > 0) rep.probe_view_means[static_cast<std::size_t>(pi)] = sum / defined;
    }
    for (int gi = 0; gi < v; ++gi) {
        double sum = 0.0;
        int defined = 0;
        for (int pi = 0; pi < v; ++pi) {
            if (!std::isnan(rep.rank1(pi, gi))) {
                sum += rep.rank1(pi, gi);
                ++defined;
            }
        }
        if (defined > 0) rep.gallery_view_means[static_cast<std::size_t>(gi)] = sum / defined;
    }
    rep.overall = rep.scored_total > 0
                      ? static_cast<double>(rep.correct_total) / static_cast<double>(rep.scored_total)
                      : kNan;
    return rep;
}

void split_gallery_probe(const std::vector<PoseSequence>& all, std::vector<int>* gallery_idx,
                         std::vector<int>* probe_idx) {
    check_arg(gallery_idx != nullptr && probe_idx != nullptr,
              "split_gallery_probe: null output pointer");
    gallery_idx->clear();
    probe_idx->clear();
    std::set<std::pair<std::string, int>> seen;
    for (int i = 0; i < static_cast<int>(all.size()); ++i) {
        const PoseSequence& s = all[static_cast<std::size_t>(i)];
        if (seen.insert({s.subject_id, s.view_label}).second) {
            gallery_idx->push_back(i);
        } else {
            probe_idx->push_back(i);
        }
    }
}

FrameOrder frame_order_from_string(const std::string& s) {
    if (s == "sort") return FrameOrder::Sort;
    if (s == "shuffle") return FrameOrder::Shuffle;
    throw std::invalid_argument("frame order must be 'sort' or 'shuffle', got '" + s + "'");
}

PoseSequence shuffle_frames(const PoseSequence& seq, std::uint64_t seed) {
    const int t = seq.num_frames();
    std::vector<int> perm(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    rng.shuffle(perm);
    PoseSequence out = seq;
    for (int i = 0; i < t; ++i) {
        const int src = perm[static_cast<std::size_t>(i)];
        out.x.row(i) = seq.x.row(src);
        out.y.row(i) = seq.y.row(src);
        out.conf.row(i) = seq.conf.row(src);
    }
    return out;
}

std::vector<PoseSequence> temporal_control(const std::vector<PoseSequence>& dataset,
                                           FrameOrder order, std::uint64_t seed) {
    if (order == FrameOrder::Sort) return dataset;  // frames are stored in recorded order
    std::vector<PoseSequence> out;
    out.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out.push_back(shuffle_frames(dataset[i], derive_seed(seed, "temporal.shuffle", {i})));
    }
    return out;
}

void write_report_json(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["views"] = report.views;
    const int v = static_cast<int>(report.views.size());
    nlohmann::json rank1 = nlohmann::json::array();
    nlohmann::json counts = nlohmann::json::array();
    for (int pi = 0; pi < v; ++pi) {
        nlohmann::json row = nlohmann::json::array();
        nlohmann::json crow = nlohmann::json::array();
        for (int gi = 0; gi < v; ++gi) {
            if (std::isnan(report.rank1(pi, gi))) {
                row.push_back(nullptr);
            } else {
                row.push_back(report.rank1(pi, gi));
            }
            crow.push_back(report.counts(pi, gi));
        }
        rank1.push_back(std::move(row));
        counts.push_back(std::move(crow));
    }
    j["rank1"] = std::move(rank1);
    j["counts"] = std::move(counts);
    auto mean_array = [](const std::vector<double>& m) {
        nlohmann::json a = nlohmann::json::array();
        for (double x : m) {
            if (std::isnan(x)) {
                a.push_back(nullptr);
            } else {
                a.push_back(x);
            }
        }
        return a;
    };
    j["probe_view_means"] = mean_array(report.probe_view_means);
    j["gallery_view_means"] = mean_array(report.gallery_view_means);
    if (std::isnan(report.overall)) {
        j["overall"] = nullptr;
    } else {
        j["overall"] = report.overall;
    }
    j["correct_total"] = report.correct_total;
    j["scored_total"] = report.scored_total;
    std::ofstream out(path);
    check_data(out.good(), "cannot open report file for writing: " + path);
    out << j.dump(2) << "\n";
    check_data(out.good(), "failed writing report file: " + path);
}

EvalReport load_report_json(const std::string& path) {
    std::ifstream in(path);
    check_data(in.good(), "cannot open report file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed report JSON in " + path + ": " + e.what());
    }
    EvalReport rep;
    try {
        rep.views = j.at("views").get<std::vector<int>>();
        const int v = static_cast<int>(rep.views.size());
        rep.rank1 = Eigen::MatrixXd::Constant(v, v, kNan);
        rep.counts = Eigen::MatrixXi::Zero(v, v);
        const auto& rank1 = j.at("rank1");
        const auto& counts = j.at("counts");
        check_data(static_cast<int>(rank1.size()) == v && static_cast<int>(counts.size()) == v,
                   "report matrix size does not match view count in " + path);
        for (int pi = 0; pi < v; ++pi) {
            check_data(static_cast<int>(rank1[pi].size()) == v &&
                           static_cast<int>(counts[pi].size()) == v,
                       "report matrix row size mismatch in " + path);
            for (int gi = 0; gi < v; ++gi) {
                if (!rank1[pi][gi].is_null()) rep.rank1(pi, gi) = rank1[pi][gi].get<double>();
                rep.counts(pi, gi) = counts[pi][gi].get<int>();
            }
        }
        auto read_means = [v, &path](const nlohmann::json& a) {
            check_data(static_cast<int>(a.size()) == v,
                       "report mean array size mismatch in " + path);
            std::vector<double> m(static_cast<std::size_t>(v), kNan);
            for (int i = 0; i < v; ++i) {
                if (!a[i].is_null()) m[static_cast<std::size_t>(i)] = a[i].get<double>();
            }
            return m;
        };
        rep.probe_view_means = read_means(j.at("probe_view_means"));
        rep.gallery_view_means = read_means(j.at("gallery_view_means"));
        rep.overall = j.at("overall").is_null() ? kNan : j.at("overall").get<double>();
        rep.correct_total = j.at("correct_total").get<long>();
        rep.scored_total = j.at("scored_total").get<long>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report JSON missing or mistyped field in " + path + ": " + e.what());
    }
    return rep;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    check_data(out.good(), "cannot open report file for writing: " + path);
    const int v = static_cast<int>(report.views.size());
    out << "probe_view\\gallery_view";
    for (int gi = 0; gi < v; ++gi) out << "," << report.views[static_cast<std::size_t>(gi)];
    out << ",mean\n";
    for (int pi = 0; pi < v; ++pi) {
        out << report.views[static_cast<std::size_t>(pi)];
        for (int gi = 0; gi < v; ++gi) out << "," << fmt_cell(report.rank1(pi, gi));
        out << "," << fmt_cell(report.probe_view_means[static_cast<std::size_t>(pi)]) << "\n";
    }
    out << "mean";
    for (int gi = 0; gi < v; ++gi) {
        out << "," << fmt_cell(report.gallery_view_means[static_cast<std::size_t>(gi)]);
    }
    out << "," << fmt_cell(report.overall) << "\n";
    check_data(out.good(), "failed writing report file: " + path);
}

std::string format_report_text(const EvalReport& report) {
    std::ostringstream os;
    const int v = static_cast<int>(report.views.size());
    auto pct = [](double x) -> std::string {
        if (std::isnan(x)) return "    --";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * x);
        return buf;
    };
    os << "rank-1 accuracy (%), rows = probe view, columns = gallery view\n";
    os << "probe\\gallery";
    for (int gi = 0; gi < v; ++gi) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), " %6d", report.views[static_cast<std::size_t>(gi)]);
        os << buf;
    }
    os << "    mean\n";
    for (int pi = 0; pi < v; ++pi) {
        char head[32];
        std::snprintf(head, sizeof(head), "%13d", report.views[static_cast<std::size_t>(pi)]);
        os << head;
        for (int gi = 0; gi < v; ++gi) os << " " << pct(report.rank1(pi, gi));
        os << "  " << pct(report.probe_view_means[static_cast<std::size_t>(pi)]) << "\n";
    }
    os << "         mean";
    for (int gi = 0; gi < v; ++gi) {
        os << " " << pct(report.gallery_view_means[static_cast<std::size_t>(gi)]);
    }
    os << "  " << pct(report.overall) << "\n";
    os << "probes scored: " << report.scored_total << ", correct: " << report.correct_total
       << "\n";
    return os.str();
}

}  // namespace gait
