// Command-line front end for the gait pipeline: synthetic data generation,
// feature extraction, training, embedding, evaluation, gradient verification,
// and report rendering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gait/checkpoint.hpp"
#include "gait/common.hpp"
#include "gait/config.hpp"
#include "gait/eval.hpp"
#include "gait/features.hpp"
#include "gait/log.hpp"
#include "gait/model.hpp"
#include "gait/pose.hpp"
#include "gait/train.hpp"
#include "gait/verify.hpp"

namespace fs = std::filesystem;
using namespace gait;

namespace {

// ---------------------------------------------------------------------------
// gen-synth
// ---------------------------------------------------------------------------

struct GenSynthArgs {
    int classes = 10;
    int seqs_per_class = 20;
    int frames = 64;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::vector<int> views{90};
    double freq_lo = 0.7;
    double freq_hi = 1.9;
    double noise_sigma = 1.0;
    double train_frac = 0.0;  // >0 writes per-class index_train/index_test splits
};

void cmd_gen_synth(const GenSynthArgs& a) {
    check_arg(a.classes >= 1 && a.seqs_per_class >= 1, "gen-synth: need at least one class and sequence");
    check_arg(a.frames >= 2, "gen-synth: --frames must be >= 2");
    check_arg(a.freq_lo > 0 && a.freq_hi >= a.freq_lo, "gen-synth: invalid frequency range");
    check_arg(!a.views.empty(), "gen-synth: --views must not be empty");
    check_arg(a.train_frac >= 0.0 && a.train_frac < 1.0, "gen-synth: --train-frac must be in [0,1)");
    fs::create_directories(a.out_dir);

    std::vector<DatasetEntry> entries, train_entries, test_entries;
    for (int k = 0; k < a.classes; ++k) {
        // Classes differ only in stride frequency (geometric spacing); phase
        // and observation noise vary per sequence.
        const double f =
            a.classes == 1
                ? a.freq_lo
                : a.freq_lo * std::pow(a.freq_hi / a.freq_lo,
                                       static_cast<double>(k) / (a.classes - 1));
        const int train_count = static_cast<int>(a.train_frac * a.seqs_per_class);
        for (int m = 0; m < a.seqs_per_class; ++m) {
            const std::uint64_t seq_seed =
                derive_seed(a.seed, "synth", {static_cast<std::uint64_t>(k),
                                              static_cast<std::uint64_t>(m)});
            SynthParams p;
            p.stride_freq = f;
            p.phase = Rng(derive_seed(seq_seed, "synth.phase")).uniform(0.0, 2.0 * M_PI);
            p.noise_sigma = a.noise_sigma;
            p.view_deg = static_cast<double>(a.views[static_cast<std::size_t>(m) % a.views.size()]);

            PoseSequence seq = synth_gait(p, a.frames, seq_seed);
            char sid[16], fname[64];
            std::snprintf(sid, sizeof(sid), "s%03d", k);
            std::snprintf(fname, sizeof(fname), "s%03d_v%03d_%02d.csv", k,
                          static_cast<int>(p.view_deg), m);
            seq.subject_id = sid;
            seq.view_label = static_cast<int>(p.view_deg);
            seq.condition = "synth";
            save_pose_csv(seq, (fs::path(a.out_dir) / fname).string());

            DatasetEntry e{seq.subject_id, seq.view_label, seq.condition, fname};
            entries.push_back(e);
            if (a.train_frac > 0.0) {
                (m < train_count ? train_entries : test_entries).push_back(e);
            }
        }
    }
    save_dataset_index(entries, (fs::path(a.out_dir) / "index.json").string());
    if (a.train_frac > 0.0) {
        save_dataset_index(train_entries, (fs::path(a.out_dir) / "index_train.json").string());
        save_dataset_index(test_entries, (fs::path(a.out_dir) / "index_test.json").string());
    }
    log_info("gen-synth: wrote " + std::to_string(entries.size()) + " sequences to " + a.out_dir);
}

// ---------------------------------------------------------------------------
// extract-features
// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string index;
    std::string out;
    std::string skeleton = "openpose18";
    int crop = 0;  // 0 = keep native length (must be uniform across sequences)
};

void cmd_extract(const ExtractArgs& a) {
    auto skel = builtin_skeleton(a.skeleton);
    std::vector<PoseSequence> seqs = load_sequences(a.index, skel);
    check_data(!seqs.empty(), "extract-features: index lists no sequences: " + a.index);
    if (a.crop > 0) {
        for (PoseSequence& s : seqs) s = pad_or_crop(s, a.crop);
    }
    const FeatureTensor ft = assemble_sequences(seqs);
    save_feature_tensor(ft, a.out);
    log_info("extract-features: wrote " + std::to_string(ft.batch()) + " entries (" +
             std::to_string(ft.channels()) + "×" + std::to_string(ft.frames) + "×" +
             std::to_string(ft.joints) + ") to " + a.out);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string out = "model.ckpt";
    std::string history;
    std::optional<std::string> index;
    std::optional<std::string> arch;  // "default" | "reduced"
    std::optional<int> batch_size, epochs, checkpoint_every, crop_len, bits;
    std::optional<double> max_lr, tau, dropout, clip_norm, jitter_sigma, mirror_prob;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> train_order;
    std::string resume_from;
};

RunConfig resolve_train_config(const TrainArgs& a) {
    RunConfig cfg;
    if (!a.config.empty()) cfg = load_run_config(a.config);
    if (a.index) cfg.data_index = *a.index;
    if (a.arch) {
        if (*a.arch == "default") {
            cfg.model = ModelConfig::defaults();
        } else if (*a.arch == "reduced") {
            cfg.model = ModelConfig::reduced();
        } else {
            throw std::invalid_argument("--arch must be 'default' or 'reduced'");
        }
    }
    if (a.dropout) cfg.model.dropout = *a.dropout;
    if (a.batch_size) cfg.train.batch_size = *a.batch_size;
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (a.checkpoint_every) cfg.train.checkpoint_every = *a.checkpoint_every;
    if (a.crop_len) cfg.train.augment.temporal_crop_len = *a.crop_len;
    if (a.max_lr) cfg.train.max_lr = *a.max_lr;
    if (a.tau) cfg.train.tau = *a.tau;
    if (a.clip_norm) cfg.train.clip_norm = *a.clip_norm;
    if (a.jitter_sigma) cfg.train.augment.coord_jitter_sigma = *a.jitter_sigma;
    if (a.mirror_prob) cfg.train.augment.mirror_prob = *a.mirror_prob;
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.train_order) cfg.eval.train_order = *a.train_order;
    cfg.validate();
    check_arg(!cfg.data_index.empty(), "train: no dataset index (give --index or [data] index)");
    return cfg;
}

template <typename S>
void run_train(const TrainArgs& a, const RunConfig& cfg) {
    auto skel = builtin_skeleton(cfg.model.skeleton);
    std::vector<PoseSequence> dataset = load_sequences(cfg.data_index, skel);
    check_data(!dataset.empty(), "train: dataset is empty: " + cfg.data_index);
    const FrameOrder order = frame_order_from_string(cfg.eval.train_order);
    if (order == FrameOrder::Shuffle) {
        dataset = temporal_control(dataset, order, derive_seed(cfg.train.seed, "order.train"));
        log_info("train: frame order shuffled on the training data");
    }

    GaitModel<S> model;
    TrainState state;
    const TrainState* resume_state = nullptr;
    if (!a.resume_from.empty()) {
        model = load_model_checkpoint<S>(a.resume_from, &state);
        resume_state = &state;
        log_info("train: resuming from " + a.resume_from + " at epoch " +
                 std::to_string(state.next_epoch));
    } else {
        model = GaitModel<S>::create(cfg.model, cfg.train.seed);
    }

    Trainer<S> trainer(model, cfg.train);
    std::vector<LossRecord> history = trainer.fit(dataset, a.out, resume_state);
    log_info("train: wrote checkpoint " + a.out);

    if (!a.history.empty()) {
        std::vector<LossRecord> full;
        if (!a.resume_from.empty() && fs::exists(a.history)) {
            full = load_history_csv(a.history);
            // drop any records the resumed run re-executes
            const long first_new = history.empty() ? -1 : history.front().step;
            if (first_new >= 0) {
                full.erase(std::remove_if(full.begin(), full.end(),
                                          [first_new](const LossRecord& r) {
                                              return r.step >= first_new;
                                          }),
                           full.end());
            }
        }
        full.insert(full.end(), history.begin(), history.end());
        save_history_csv(full, a.history);
        log_info("train: wrote history " + a.history);
    }
    if (!history.empty()) {
        log_info("train: first loss " + std::to_string(history.front().loss) + ", last loss " +
                 std::to_string(history.back().loss));
    }
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

struct EmbedArgs {
    std::string checkpoint;
    std::string index;
    std::string out;
    int crop = 64;
    int bits = 64;
};

template <typename S>
void run_embed(const EmbedArgs& a) {
    GaitModel<S> model = load_model_checkpoint<S>(a.checkpoint);
    auto skel = builtin_skeleton(model.cfg.skeleton);
    std::vector<PoseSequence> seqs = load_sequences(a.index, skel);
    check_data(!seqs.empty(), "embed: index lists no sequences: " + a.index);
    std::vector<Embedding> embs = embed_sequences(model, seqs, a.crop);

    nlohmann::json j = nlohmann::json::array();
    for (const Embedding& e : embs) {
        nlohmann::json row;
        row["label"] = e.label;
        row["view"] = e.view;
        row["vector"] = std::vector<double>(e.vector.data(), e.vector.data() + e.vector.size());
        j.push_back(std::move(row));
    }
    std::ofstream out(a.out);
    check_data(out.good(), "embed: cannot open output file: " + a.out);
    out << j.dump(2) << "\n";
    check_data(out.good(), "embed: failed writing " + a.out);
    log_info("embed: wrote " + std::to_string(embs.size()) + " embeddings to " + a.out);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string index;    // single index, split into gallery/probe automatically
    std::string gallery;  // or explicit gallery + probe indexes
    std::string probe;
    std::string out = "report.json";
    std::string csv;
    std::string test_order = "sort";
    std::uint64_t seed = 0;
    int crop = 64;
    int bits = 64;
};

template <typename S>
void run_eval(const EvalArgs& a) {
    GaitModel<S> model = load_model_checkpoint<S>(a.checkpoint);
    auto skel = builtin_skeleton(model.cfg.skeleton);

    std::vector<PoseSequence> gallery, probes;
    if (!a.index.empty()) {
        check_arg(a.gallery.empty() && a.probe.empty(),
                  "eval: give either --index or --gallery/--probe, not both");
        std::vector<PoseSequence> all = load_sequences(a.index, skel);
        std::vector<int> gi, pi;
        split_gallery_probe(all, &gi, &pi);
        for (int i : gi) gallery.push_back(all[static_cast<std::size_t>(i)]);
        for (int i : pi) probes.push_back(all[static_cast<std::size_t>(i)]);
    } else {
        check_arg(!a.gallery.empty() && !a.probe.empty(),
                  "eval: need --index, or both --gallery and --probe");
        gallery = load_sequences(a.gallery, skel);
        probes = load_sequences(a.probe, skel);
    }
    check_data(!gallery.empty(), "eval: gallery is empty");
    check_data(!probes.empty(), "eval: probe set is empty");

    const FrameOrder order = frame_order_from_string(a.test_order);
    if (order == FrameOrder::Shuffle) {
        gallery = temporal_control(gallery, order, derive_seed(a.seed, "order.test.gallery"));
        probes = temporal_control(probes, order, derive_seed(a.seed, "order.test.probe"));
        log_info("eval: frame order shuffled on gallery and probe data");
    }

    const EvalReport report = cross_view_eval_sequences(model, gallery, probes, a.crop);
    write_report_json(report, a.out);
    if (!a.csv.empty()) write_report_csv(report, a.csv);
    std::cout << format_report_text(report);
    log_info("eval: wrote " + a.out);
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------

void cmd_grad_check(int bits, std::uint64_t seed) {
    check_arg(bits == 64, "grad-check: finite differences are only meaningful with --bits 64");
    const std::vector<GradCheckCase> cases = grad_check_suite(seed);
    bool all_pass = true;
    std::printf("%-36s %14s %s\n", "op", "max_rel_err", "status");
    for (const GradCheckCase& c : cases) {
        const bool ok = c.report.pass(kGradCheckTol);
        all_pass = all_pass && ok;
        std::printf("%-36s %14.3e %s\n", c.name.c_str(), c.report.max_rel_err,
                    ok ? "pass" : "FAIL");
        if (!ok && c.report.worst_coord >= 0) {
            std::printf("    worst coord %ld: analytic %.10e vs numeric %.10e\n",
                        c.report.worst_coord, c.report.worst_analytic, c.report.worst_numeric);
        }
    }
    check_numeric(all_pass, "gradient check failed (tolerance " + std::to_string(kGradCheckTol) +
                                ")");
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string history;
    std::string report;
    std::string compare;
    std::string out_dir;  // when set, SVG plots are written here
};

std::string svg_loss_curve(const std::vector<LossRecord>& history) {
    const double width = 720, height = 400, ml = 60, mr = 15, mt = 15, mb = 40;
    double lo = history.front().loss, hi = history.front().loss;
    for (const LossRecord& r : history) {
        lo = std::min(lo, r.loss);
        hi = std::max(hi, r.loss);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double x0 = ml, x1 = width - mr, y0 = height - mb, y1 = mt;
    const double n = static_cast<double>(history.size());
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
      << "\" stroke=\"black\"/>\n";
    s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double px = x0 + (x1 - x0) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5);
        const double py = y0 + (y1 - y0) * (history[i].loss - lo) / (hi - lo);
        s << px << "," << py << " ";
    }
    s << "\"/>\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.0f\" y=\"%.0f\" font-size=\"13\">step (0..%ld)</text>",
                  (x0 + x1) / 2 - 40, height - 12, history.back().step);
    s << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"8\" y=\"%.0f\" font-size=\"13\" transform=\"rotate(-90 14 %.0f)\">"
                  "loss %.4g..%.4g</text>",
                  (y0 + y1) / 2, (y0 + y1) / 2, lo, hi);
    s << buf << "\n</svg>\n";
    return s.str();
}

std::string svg_rank1_heatmap(const EvalReport& rep) {
    const int v = static_cast<int>(rep.views.size());
    const double cell = 46, ml = 70, mt = 50, legend = 30;
    const double width = ml + v * cell + 20, height = mt + v * cell + legend;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << ml << "\" y=\"18\" font-size=\"13\">rank-1 accuracy, rows = probe view, "
      << "columns = gallery view</text>\n";
    for (int pi = 0; pi < v; ++pi) {
        for (int gi = 0; gi < v; ++gi) {
            const double x = ml + gi * cell, y = mt + pi * cell;
            const double a = rep.rank1(pi, gi);
            std::string fill = "#dddddd";
            if (!std::isnan(a)) {
                const int g = static_cast<int>(235 - 195 * a);
                char c[16];
                std::snprintf(c, sizeof(c), "#%02x%02x%02x", g, g, 255);
                fill = c;
            }
            s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell - 2
              << "\" height=\"" << cell - 2 << "\" fill=\"" << fill << "\"/>\n";
            if (!std::isnan(a)) {
                char t[32];
                std::snprintf(t, sizeof(t), "%.0f", 100.0 * a);
                s << "<text x=\"" << x + cell / 2 - 8 << "\" y=\"" << y + cell / 2 + 4
                  << "\" font-size=\"12\">" << t << "</text>\n";
            }
        }
    }
    for (int i = 0; i < v; ++i) {
        s << "<text x=\"" << ml + i * cell + 10 << "\" y=\"" << mt - 8 << "\" font-size=\"12\">"
          << rep.views[static_cast<std::size_t>(i)] << "</text>\n";
        s << "<text x=\"" << 18 << "\" y=\"" << mt + i * cell + cell / 2 + 4
          << "\" font-size=\"12\">" << rep.views[static_cast<std::size_t>(i)] << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    check_data(out.good(), "cannot open file for writing: " + path);
    out << content;
    check_data(out.good(), "failed writing file: " + path);
}

void cmd_report(const ReportArgs& a) {
    check_arg(!a.history.empty() || !a.report.empty(),
              "report: give --history and/or --report");
    if (!a.out_dir.empty()) fs::create_directories(a.out_dir);

    if (!a.history.empty()) {
        const std::vector<LossRecord> history = load_history_csv(a.history);
        check_data(!history.empty(), "report: history has no records: " + a.history);
        double first_epoch_sum = 0, last_epoch_sum = 0, min_loss = history.front().loss;
        long first_epoch = history.front().epoch, last_epoch = history.back().epoch;
        long first_n = 0, last_n = 0;
        for (const LossRecord& r : history) {
            if (r.epoch == first_epoch) {
                first_epoch_sum += r.loss;
                ++first_n;
            }
            if (r.epoch == last_epoch) {
                last_epoch_sum += r.loss;
                ++last_n;
            }
            min_loss = std::min(min_loss, r.loss);
        }
        std::printf("history: %zu steps over epochs %ld..%ld\n", history.size(), first_epoch,
                    last_epoch);
        std::printf("  first-epoch mean loss %.6f, last-epoch mean loss %.6f, min loss %.6f\n",
                    first_epoch_sum / first_n, last_epoch_sum / last_n, min_loss);
        if (!a.out_dir.empty()) {
            const std::string path = (fs::path(a.out_dir) / "loss_curve.svg").string();
            write_text_file(path, svg_loss_curve(history));
            std::printf("  wrote %s\n", path.c_str());
        }
    }

    if (!a.report.empty()) {
        const EvalReport rep = load_report_json(a.report);
        std::cout << format_report_text(rep);
        if (!a.compare.empty()) {
            const EvalReport other = load_report_json(a.compare);
            std::printf("\ncomparison (%s vs %s):\n", a.report.c_str(), a.compare.c_str());
            std::printf("  overall %.2f%% vs %.2f%% (delta %+.2f points)\n", 100.0 * rep.overall,
                        100.0 * other.overall, 100.0 * (rep.overall - other.overall));
        }
        if (!a.out_dir.empty()) {
            const std::string path = (fs::path(a.out_dir) / "rank1_heatmap.svg").string();
            write_text_file(path, svg_rank1_heatmap(rep));
            std::printf("wrote %s\n", path.c_str());
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator_for_large_buffers();

    CLI::App app{"skeleton gait recognition pipeline"};
    app.require_subcommand(1);

    GenSynthArgs gen;
    auto* cmd_gen = app.add_subcommand("gen-synth", "generate a synthetic walking dataset");
    cmd_gen->add_option("--classes", gen.classes, "number of synthetic subjects");
    cmd_gen->add_option("--seqs-per-class", gen.seqs_per_class, "sequences per subject");
    cmd_gen->add_option("--frames", gen.frames, "frames per sequence");
    cmd_gen->add_option("--seed", gen.seed, "master random seed");
    cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
    cmd_gen->add_option("--views", gen.views, "camera views in degrees, cycled per sequence");
    cmd_gen->add_option("--freq-lo", gen.freq_lo, "lowest stride frequency (Hz)");
    cmd_gen->add_option("--freq-hi", gen.freq_hi, "highest stride frequency (Hz)");
    cmd_gen->add_option("--noise-sigma", gen.noise_sigma, "observation noise in pixels");
    cmd_gen->add_option("--train-frac", gen.train_frac,
                        "per-class fraction for index_train.json (rest goes to index_test.json)");
    cmd_gen->callback([&gen] { cmd_gen_synth(gen); });

    ExtractArgs ext;
    auto* cmd_ext =
        app.add_subcommand("extract-features", "assemble the feature tensor for a dataset");
    cmd_ext->alias("feature-dump");
    cmd_ext->add_option("--index", ext.index, "dataset index JSON")->required();
    cmd_ext->add_option("--out", ext.out, "output feature file")->required();
    cmd_ext->add_option("--skeleton", ext.skeleton, "skeleton name (openpose18 or coco17)");
    cmd_ext->add_option("--crop", ext.crop, "fixed length via central crop / cyclic pad (0 = native)");
    cmd_ext->callback([&ext] { cmd_extract(ext); });

    TrainArgs tr;
    auto* cmd_tr = app.add_subcommand("train", "train the embedding network");
    cmd_tr->add_option("--config", tr.config, "run config file (TOML subset or JSON)");
    cmd_tr->add_option("--index", tr.index, "dataset index JSON (overrides config)");
    cmd_tr->add_option("--out", tr.out, "checkpoint path");
    cmd_tr->add_option("--history", tr.history, "loss history CSV path");
    cmd_tr->add_option("--arch", tr.arch, "architecture preset: default or reduced");
    cmd_tr->add_option("--batch-size", tr.batch_size, "entries per step (even)");
    cmd_tr->add_option("--epochs", tr.epochs, "training epochs");
    cmd_tr->add_option("--checkpoint-every", tr.checkpoint_every, "epochs between checkpoints");
    cmd_tr->add_option("--crop-len", tr.crop_len, "augmentation crop length");
    cmd_tr->add_option("--max-lr", tr.max_lr, "schedule peak learning rate");
    cmd_tr->add_option("--tau", tr.tau, "contrastive temperature");
    cmd_tr->add_option("--dropout", tr.dropout, "dropout rate");
    cmd_tr->add_option("--clip-norm", tr.clip_norm, "global gradient-norm clip (0 = off)");
    cmd_tr->add_option("--jitter-sigma", tr.jitter_sigma, "augmentation coordinate noise");
    cmd_tr->add_option("--mirror-prob", tr.mirror_prob, "augmentation mirror probability");
    cmd_tr->add_option("--seed", tr.seed, "master random seed");
    cmd_tr->add_option("--train-order", tr.train_order, "frame order on training data: sort|shuffle");
    cmd_tr->add_option("--bits", tr.bits, "working precision: 32 or 64");
    cmd_tr->add_option("--resume-from", tr.resume_from,
                       "checkpoint to resume from (same config; continues to --epochs)");
    cmd_tr->callback([&tr] {
        const RunConfig cfg = resolve_train_config(tr);
        log_info("resolved config: " + run_config_to_json(cfg).dump());
        const int bits = tr.bits.value_or(64);
        check_arg(bits == 32 || bits == 64, "--bits must be 32 or 64");
        if (bits == 32) {
            run_train<float>(tr, cfg);
        } else {
            run_train<double>(tr, cfg);
        }
    });

    EmbedArgs em;
    auto* cmd_em = app.add_subcommand("embed", "embed sequences with a trained checkpoint");
    cmd_em->add_option("--checkpoint", em.checkpoint, "model checkpoint")->required();
    cmd_em->add_option("--index", em.index, "dataset index JSON")->required();
    cmd_em->add_option("--out", em.out, "output embeddings JSON")->required();
    cmd_em->add_option("--crop", em.crop, "fixed sequence length fed to the network");
    cmd_em->add_option("--bits", em.bits, "working precision: 32 or 64");
    cmd_em->callback([&em] {
        check_arg(em.bits == 32 || em.bits == 64, "--bits must be 32 or 64");
        if (em.bits == 32) {
            run_embed<float>(em);
        } else {
            run_embed<double>(em);
        }
    });

    EvalArgs ev;
    auto* cmd_ev = app.add_subcommand("eval", "gallery/probe identification report");
    cmd_ev->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
    cmd_ev->add_option("--index", ev.index, "single index; first sequence per (subject, view) "
                                            "becomes gallery");
    cmd_ev->add_option("--gallery", ev.gallery, "gallery index JSON");
    cmd_ev->add_option("--probe", ev.probe, "probe index JSON");
    cmd_ev->add_option("--out", ev.out, "output report JSON");
    cmd_ev->add_option("--csv", ev.csv, "also write the matrix as CSV");
    cmd_ev->add_option("--test-order", ev.test_order, "frame order on test data: sort|shuffle");
    cmd_ev->add_option("--seed", ev.seed, "seed for the shuffle control");
    cmd_ev->add_option("--crop", ev.crop, "fixed sequence length fed to the network");
    cmd_ev->add_option("--bits", ev.bits, "working precision: 32 or 64");
    cmd_ev->callback([&ev] {
        check_arg(ev.bits == 32 || ev.bits == 64, "--bits must be 32 or 64");
        if (ev.bits == 32) {
            run_eval<float>(ev);
        } else {
            run_eval<double>(ev);
        }
    });

    int gc_bits = 64;
    std::uint64_t gc_seed = 0;
    auto* cmd_gc = app.add_subcommand("grad-check", "verify gradients by finite differences");
    cmd_gc->add_option("--bits", gc_bits, "working precision (64 required)");
    cmd_gc->add_option("--seed", gc_seed, "master random seed");
    cmd_gc->callback([&gc_bits, &gc_seed] { cmd_grad_check(gc_bits, gc_seed); });

    ReportArgs rp;
    auto* cmd_rp = app.add_subcommand("report", "render history and report files");
    cmd_rp->add_option("--history", rp.history, "loss history CSV");
    cmd_rp->add_option("--report", rp.report, "evaluation report JSON");
    cmd_rp->add_option("--compare", rp.compare, "second report JSON for a delta line");
    cmd_rp->add_option("--out-dir", rp.out_dir, "directory for SVG plots");
    cmd_rp->callback([&rp] { cmd_report(rp); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints message and help text
        return code == 0 ? 0 : 1;      // usage errors are exit 1
    } catch (const DataError& e) {
        log_error(e.what());
        return 2;
    } catch (const NumericError& e) {
        log_error(e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        log_error(e.what());
        return 1;
    } catch (const std::exception& e) {
        log_error(std::string("unexpected error: ") + e.what());
        return 1;
    }
    return 0;
}
