#include "gait/train.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace gait {

void TrainConfig::validate() const {
    check_arg(batch_size >= 2 && batch_size % 2 == 0,
              "train config: batch_size must be even and >= 2 (two copies per source)");
    check_arg(epochs >= 1, "train config: epochs must be >= 1");
    check_arg(max_lr > 0.0, "train config: max_lr must be positive");
    check_arg(pct_start >= 0.0 && pct_start <= 1.0, "train config: pct_start must be in [0,1]");
    check_arg(div_start > 0.0 && div_final > 0.0,
              "train config: learning-rate divisors must be positive");
    check_arg(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
              "train config: adam betas must be in [0,1)");
    check_arg(adam_epsilon > 0.0, "train config: adam epsilon must be positive");
    check_arg(clip_norm >= 0.0, "train config: clip_norm must be >= 0");
    check_arg(tau > 0.0, "train config: tau must be positive");
    check_arg(checkpoint_every >= 0, "train config: checkpoint_every must be >= 0");
    augment.validate();
}

std::vector<int> label_ids(const std::vector<std::string>& labels) {
    std::unordered_map<std::string, int> ids;
    std::vector<int> out;
    out.reserve(labels.size());
    for (const std::string& s : labels) {
        auto [it, fresh] = ids.try_emplace(s, static_cast<int>(ids.size()));
        (void)fresh;
        out.push_back(it->second);
    }
    return out;
}

void save_history_csv(const std::vector<LossRecord>& history, const std::string& path) {
    std::ofstream out(path);
    check_data(out.good(), "cannot open history file for writing: " + path);
    out << "epoch,step,lr,loss\n";
    out << std::setprecision(17);
    for (const LossRecord& r : history) {
        out << r.epoch << "," << r.step << "," << r.lr << "," << r.loss << "\n";
    }
    check_data(out.good(), "failed writing history file: " + path);
}

std::vector<LossRecord> load_history_csv(const std::string& path) {
    std::ifstream in(path);
    check_data(in.good(), "cannot open history file: " + path);
    std::string line;
    check_data(static_cast<bool>(std::getline(in, line)), "empty history file: " + path);
    check_data(line == "epoch,step,lr,loss",
               "history file " + path + " line 1: expected header epoch,step,lr,loss");
    std::vector<LossRecord> history;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        LossRecord r;
        char c1 = 0, c2 = 0, c3 = 0;
        ss >> r.epoch >> c1 >> r.step >> c2 >> r.lr >> c3 >> r.loss;
        check_data(!ss.fail() && c1 == ',' && c2 == ',' && c3 == ',',
                   "history file " + path + " line " + std::to_string(line_no) +
                       ": malformed record '" + line + "'");
        history.push_back(r);
    }
    return history;
}

std::vector<int> epoch_permutation(int n, std::uint64_t seed, long epoch) {
    check_arg(n >= 0, "epoch_permutation: negative size");
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(seed, "epoch.perm", {static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(perm);
    return perm;
}

}  // namespace gait
