#include "gait/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "gait/common.hpp"
#include "gait/eval.hpp"

namespace gait {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Removes a # comment, ignoring # characters inside double-quoted strings.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (char c : key) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    }
    return true;
}

void require_keys(const nlohmann::json& section, const std::set<std::string>& allowed,
                  const std::string& name, const std::string& origin) {
    for (auto it = section.begin(); it != section.end(); ++it) {
        check_arg(allowed.count(it.key()) == 1, origin + ": unknown key '" + it.key() +
                                                    "' in section [" + name + "]");
    }
}

template <typename T>
void maybe(const nlohmann::json& section, const char* key, T& target,
           const std::string& origin) {
    if (!section.contains(key)) return;
    try {
        target = section.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(origin + ": bad value for '" + std::string(key) +
                                    "': " + e.what());
    }
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["input_channels"] = cfg.input_channels;
    j["embed_dim"] = cfg.embed_dim;
    j["dropout"] = cfg.dropout;
    j["temporal_kernel"] = cfg.temporal_kernel;
    j["skeleton"] = cfg.skeleton;
    j["bn_momentum"] = cfg.bn_momentum;
    j["bn_epsilon"] = cfg.bn_epsilon;
    nlohmann::json blocks = nlohmann::json::array();
    for (const BlockConfig& b : cfg.blocks) {
        blocks.push_back({{"in", b.in_channels},
                          {"out", b.out_channels},
                          {"stride", b.temporal_stride},
                          {"residual", b.residual}});
    }
    j["blocks"] = std::move(blocks);
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    const std::string origin = "model config";
    require_keys(j,
                 {"input_channels", "embed_dim", "dropout", "temporal_kernel", "skeleton",
                  "bn_momentum", "bn_epsilon", "blocks", "channels", "strided"},
                 "model", origin);
    ModelConfig cfg = ModelConfig::defaults();
    maybe(j, "input_channels", cfg.input_channels, origin);
    maybe(j, "embed_dim", cfg.embed_dim, origin);
    maybe(j, "dropout", cfg.dropout, origin);
    maybe(j, "temporal_kernel", cfg.temporal_kernel, origin);
    maybe(j, "skeleton", cfg.skeleton, origin);
    maybe(j, "bn_momentum", cfg.bn_momentum, origin);
    maybe(j, "bn_epsilon", cfg.bn_epsilon, origin);

    check_arg(!(j.contains("blocks") && j.contains("channels")),
              origin + ": give either 'blocks' or 'channels', not both");
    if (j.contains("blocks")) {
        cfg.blocks.clear();
        for (const auto& jb : j.at("blocks")) {
            BlockConfig b;
            b.in_channels = jb.at("in").get<int>();
            b.out_channels = jb.at("out").get<int>();
            b.temporal_stride = jb.value("stride", 1);
            b.residual = jb.value("residual", false);
            cfg.blocks.push_back(b);
        }
    } else if (j.contains("channels")) {
        std::vector<int> channels, strided;
        maybe(j, "channels", channels, origin);
        maybe(j, "strided", strided, origin);
        cfg.blocks = ModelConfig::chain(channels, strided, cfg.input_channels);
    } else if (j.contains("strided")) {
        throw std::invalid_argument(origin + ": 'strided' requires 'channels'");
    } else if (j.contains("input_channels")) {
        // default widths, rebuilt so the first block consumes the new width
        cfg.blocks = ModelConfig::chain({64, 64, 64, 128, 128, 128, 256, 256}, {4, 7},
                                        cfg.input_channels);
    }
    cfg.validate();
    return cfg;
}

void EvalConfig::validate() const {
    check_arg(crop_len >= 1, "eval config: crop_len must be >= 1");
    frame_order_from_string(train_order);
    frame_order_from_string(test_order);
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    eval.validate();
}

nlohmann::json parse_config_text(const std::string& text, const std::string& origin) {
    std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(origin + ": invalid JSON: " + e.what());
        }
    }

    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* section = &root;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        const std::string where = origin + " line " + std::to_string(line_no);
        if (body.front() == '[') {
            check_arg(body.back() == ']', where + ": unterminated section header");
            const std::string name = trim(body.substr(1, body.size() - 2));
            check_arg(valid_key(name), where + ": invalid section name '" + name + "'");
            root[name] = nlohmann::json::object();
            section = &root[name];
            continue;
        }
        const std::size_t eq = body.find('=');
        check_arg(eq != std::string::npos, where + ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        check_arg(valid_key(key), where + ": invalid key '" + key + "'");
        check_arg(!value.empty(), where + ": missing value for '" + key + "'");
        try {
            (*section)[key] = nlohmann::json::parse(value);
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument(where + ": value for '" + key +
                                        "' is not a JSON literal (strings need quotes): " + value);
        }
    }
    return root;
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::string& origin) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        check_arg(it.key() == "data" || it.key() == "model" || it.key() == "train" ||
                      it.key() == "eval",
                  origin + ": unknown section [" + it.key() + "]");
    }
    RunConfig cfg;
    if (j.contains("data")) {
        const auto& d = j.at("data");
        require_keys(d, {"index"}, "data", origin);
        maybe(d, "index", cfg.data_index, origin);
    }
    if (j.contains("model")) {
        try {
            cfg.model = model_config_from_json(j.at("model"));
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(origin + ": bad [model] section: " + e.what());
        }
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        require_keys(t,
                     {"batch_size", "epochs", "max_lr", "pct_start", "div_start", "div_final",
                      "beta1", "beta2", "adam_epsilon", "clip_norm", "tau", "seed",
                      "checkpoint_every", "crop_len", "jitter_sigma", "mirror_prob",
                      "resample_periods"},
                     "train", origin);
        maybe(t, "batch_size", cfg.train.batch_size, origin);
        maybe(t, "epochs", cfg.train.epochs, origin);
        maybe(t, "max_lr", cfg.train.max_lr, origin);
        maybe(t, "pct_start", cfg.train.pct_start, origin);
        maybe(t, "div_start", cfg.train.div_start, origin);
        maybe(t, "div_final", cfg.train.div_final, origin);
        maybe(t, "beta1", cfg.train.beta1, origin);
        maybe(t, "beta2", cfg.train.beta2, origin);
        maybe(t, "adam_epsilon", cfg.train.adam_epsilon, origin);
        maybe(t, "clip_norm", cfg.train.clip_norm, origin);
        maybe(t, "tau", cfg.train.tau, origin);
        maybe(t, "seed", cfg.train.seed, origin);
        maybe(t, "checkpoint_every", cfg.train.checkpoint_every, origin);
        maybe(t, "crop_len", cfg.train.augment.temporal_crop_len, origin);
        maybe(t, "jitter_sigma", cfg.train.augment.coord_jitter_sigma, origin);
        maybe(t, "mirror_prob", cfg.train.augment.mirror_prob, origin);
        maybe(t, "resample_periods", cfg.train.augment.resample_periods, origin);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        require_keys(e, {"crop_len", "train_order", "test_order"}, "eval", origin);
        maybe(e, "crop_len", cfg.eval.crop_len, origin);
        maybe(e, "train_order", cfg.eval.train_order, origin);
        maybe(e, "test_order", cfg.eval.test_order, origin);
    }
    cfg.validate();
    return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["data"] = {{"index", cfg.data_index}};
    j["model"] = model_config_to_json(cfg.model);
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"max_lr", cfg.train.max_lr},
                  {"pct_start", cfg.train.pct_start},
                  {"div_start", cfg.train.div_start},
                  {"div_final", cfg.train.div_final},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"adam_epsilon", cfg.train.adam_epsilon},
                  {"clip_norm", cfg.train.clip_norm},
                  {"tau", cfg.train.tau},
                  {"seed", cfg.train.seed},
                  {"checkpoint_every", cfg.train.checkpoint_every},
                  {"crop_len", cfg.train.augment.temporal_crop_len},
                  {"jitter_sigma", cfg.train.augment.coord_jitter_sigma},
                  {"mirror_prob", cfg.train.augment.mirror_prob},
                  {"resample_periods", cfg.train.augment.resample_periods}};
    j["eval"] = {{"crop_len", cfg.eval.crop_len},
                 {"train_order", cfg.eval.train_order},
                 {"test_order", cfg.eval.test_order}};
    return j;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    check_data(in.good(), "cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_json(parse_config_text(buf.str(), path), path);
}

}  // namespace gait
