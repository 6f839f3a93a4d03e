#include "gait/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gait/common.hpp"
#include "gait/config.hpp"
#include "gait/log.hpp"

namespace gait {

namespace {

constexpr char kMagic[4] = {'G', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    check_data(in.good(), "truncated checkpoint file: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

long dim_product(const std::vector<std::uint32_t>& dims) {
    long n = 1;
    for (std::uint32_t d : dims) n *= static_cast<long>(d);
    return n;
}

// Payloads are row-major over the logical dims; the in-memory container is a
// column-major rows×cols matrix (n×1 for vectors).
void write_payload(std::ostream& out, const NamedTensor& t) {
    const long rows = t.data.rows();
    const long cols = t.data.cols();
    if (t.dtype == 1) {
        std::vector<float> buf(static_cast<std::size_t>(rows * cols));
        std::size_t k = 0;
        for (long r = 0; r < rows; ++r) {
            for (long c = 0; c < cols; ++c) buf[k++] = static_cast<float>(t.data(r, c));
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    } else {
        std::vector<double> buf(static_cast<std::size_t>(rows * cols));
        std::size_t k = 0;
        for (long r = 0; r < rows; ++r) {
            for (long c = 0; c < cols; ++c) buf[k++] = t.data(r, c);
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(double)));
    }
}

void read_payload(std::istream& in, NamedTensor& t, const std::string& path) {
    long rows = 0, cols = 0;
    if (t.dims.size() == 1) {
        rows = static_cast<long>(t.dims[0]);
        cols = 1;
    } else if (t.dims.size() == 2) {
        rows = static_cast<long>(t.dims[0]);
        cols = static_cast<long>(t.dims[1]);
    } else {
        throw DataError("checkpoint tensor '" + t.name + "' in " + path + " has " +
                        std::to_string(t.dims.size()) + " dims; only 1 or 2 are supported");
    }
    t.data.resize(rows, cols);
    const std::size_t n = static_cast<std::size_t>(rows * cols);
    if (t.dtype == 1) {
        std::vector<float> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        check_data(in.good(), "truncated checkpoint payload for '" + t.name + "' in " + path);
        std::size_t k = 0;
        for (long r = 0; r < rows; ++r) {
            for (long c = 0; c < cols; ++c) t.data(r, c) = static_cast<double>(buf[k++]);
        }
    } else if (t.dtype == 2) {
        std::vector<double> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        check_data(in.good(), "truncated checkpoint payload for '" + t.name + "' in " + path);
        std::size_t k = 0;
        for (long r = 0; r < rows; ++r) {
            for (long c = 0; c < cols; ++c) t.data(r, c) = buf[k++];
        }
    } else {
        throw DataError("checkpoint tensor '" + t.name + "' in " + path +
                        " has unknown dtype " + std::to_string(t.dtype));
    }
}

}  // namespace

void save_checkpoint_file(const CheckpointFile& ckpt, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        check_data(out.good(), "cannot open checkpoint file for writing: " + tmp);
        out.write(kMagic, 4);
        put_u32(out, kVersion);
        put_u32(out, static_cast<std::uint32_t>(ckpt.meta_json.size()));
        out.write(ckpt.meta_json.data(), static_cast<std::streamsize>(ckpt.meta_json.size()));
        put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
        for (const NamedTensor& t : ckpt.tensors) {
            check_arg(t.dims.size() >= 1 && t.dims.size() <= 2,
                      "checkpoint tensor '" + t.name + "' must have 1 or 2 dims");
            const long expect = t.dims.size() == 1 ? static_cast<long>(t.dims[0])
                                                   : static_cast<long>(t.dims[0]) *
                                                         static_cast<long>(t.dims[1]);
            check_arg(expect == t.data.size(), "checkpoint tensor '" + t.name +
                                                   "' dims do not match its data size");
            put_u32(out, static_cast<std::uint32_t>(t.name.size()));
            out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
            put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
            for (std::uint32_t d : t.dims) put_u32(out, d);
            out.put(static_cast<char>(t.dtype));
            write_payload(out, t);
        }
        check_data(out.good(), "failed writing checkpoint file: " + tmp);
    }
    check_data(std::rename(tmp.c_str(), path.c_str()) == 0,
               "cannot move checkpoint into place: " + path);
}

CheckpointFile load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check_data(in.good(), "cannot open checkpoint file: " + path);
    char magic[4];
    in.read(magic, 4);
    check_data(in.good() && std::memcmp(magic, kMagic, 4) == 0,
               "not a checkpoint file (bad magic): " + path);
    const std::uint32_t version = get_u32(in, path);
    check_data(version == kVersion, "unsupported checkpoint version " + std::to_string(version) +
                                        " in " + path);
    CheckpointFile ckpt;
    const std::uint32_t meta_len = get_u32(in, path);
    ckpt.meta_json.resize(meta_len);
    in.read(ckpt.meta_json.data(), static_cast<std::streamsize>(meta_len));
    check_data(in.good(), "truncated checkpoint meta in " + path);
    const std::uint32_t count = get_u32(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const std::uint32_t name_len = get_u32(in, path);
        check_data(name_len <= 4096, "implausible tensor name length in " + path);
        t.name.resize(name_len);
        in.read(t.name.data(), static_cast<std::streamsize>(name_len));
        check_data(in.good(), "truncated tensor name in " + path);
        const std::uint32_t ndim = get_u32(in, path);
        check_data(ndim >= 1 && ndim <= 2,
                   "checkpoint tensor '" + t.name + "' in " + path + " has unsupported rank");
        for (std::uint32_t d = 0; d < ndim; ++d) t.dims.push_back(get_u32(in, path));
        check_data(dim_product(t.dims) <= (1L << 30),
                   "implausible tensor size for '" + t.name + "' in " + path);
        const int dtype = in.get();
        check_data(dtype != EOF, "truncated checkpoint file: " + path);
        t.dtype = static_cast<std::uint8_t>(dtype);
        read_payload(in, t, path);
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

namespace {

template <typename S>
NamedTensor tensor_of(const std::string& name, const typename GaitModel<S>::Mat& value) {
    NamedTensor t;
    t.name = name;
    t.dims = {static_cast<std::uint32_t>(value.rows()), static_cast<std::uint32_t>(value.cols())};
    t.data = value.template cast<double>();
    t.dtype = std::is_same_v<S, float> ? 1 : 2;
    return t;
}

template <typename S>
NamedTensor vector_of(const std::string& name, const Eigen::Matrix<S, Eigen::Dynamic, 1>& v) {
    NamedTensor t;
    t.name = name;
    t.dims = {static_cast<std::uint32_t>(v.size())};
    t.data = v.template cast<double>();
    t.dtype = std::is_same_v<S, float> ? 1 : 2;
    return t;
}

}  // namespace

template <typename S>
void save_model_checkpoint(const GaitModel<S>& model, const std::string& path,
                           const TrainState* train_state) {
    CheckpointFile ckpt;
    nlohmann::json meta;
    meta["format"] = "gait_model";
    meta["scalar"] = std::is_same_v<S, float> ? "f32" : "f64";
    meta["model"] = model_config_to_json(model.cfg);
    if (train_state != nullptr) {
        meta["train_state"] = {{"next_epoch", train_state->next_epoch},
                               {"global_step", train_state->global_step},
                               {"adam_t", train_state->adam_t}};
    }
    ckpt.meta_json = meta.dump();
    for (const auto& p : model.params) {
        ckpt.tensors.push_back(tensor_of<S>(p.name, p.value));
    }
    for (std::size_t i = 0; i < model.bn_states.size(); ++i) {
        const std::string prefix = "bn" + std::to_string(i) + ".";
        ckpt.tensors.push_back(vector_of<S>(prefix + "running_mean", model.bn_states[i].running_mean));
        ckpt.tensors.push_back(vector_of<S>(prefix + "running_var", model.bn_states[i].running_var));
    }
    if (train_state != nullptr) {
        for (const NamedTensor& t : train_state->opt_tensors) {
            ckpt.tensors.push_back(t);  // stored in double
        }
    }
    save_checkpoint_file(ckpt, path);
}

template <typename S>
GaitModel<S> load_model_checkpoint(const std::string& path, TrainState* train_state) {
    const CheckpointFile ckpt = load_checkpoint_file(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ckpt.meta_json);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid checkpoint meta JSON in " + path + ": " + e.what());
    }
    check_data(meta.value("format", "") == "gait_model",
               "checkpoint " + path + " does not hold a model");
    const std::string stored = meta.value("scalar", "f64");
    const std::string wanted = std::is_same_v<S, float> ? "f32" : "f64";
    if (stored != wanted) {
        log_warn("checkpoint " + path + " stores " + stored + " values; converting to " + wanted);
    }

    ModelConfig cfg;
    try {
        cfg = model_config_from_json(meta.at("model"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path + " has no model config: " + e.what());
    }
    // The file stores the skeleton by name, so only models over named skeletons
    // can be reconstructed; anything unresolvable is a data problem of the file.
    GaitModel<S> model;
    try {
        model = GaitModel<S>::create(cfg, /*seed=*/0);
    } catch (const std::invalid_argument& e) {
        throw DataError("checkpoint " + path + " holds an unloadable model config: " + e.what());
    }

    auto find = [&ckpt, &path](const std::string& name) -> const NamedTensor& {
        for (const NamedTensor& t : ckpt.tensors) {
            if (t.name == name) return t;
        }
        throw DataError("checkpoint " + path + " is missing tensor '" + name + "'");
    };
    for (auto& p : model.params) {
        const NamedTensor& t = find(p.name);
        check_data(t.data.rows() == p.value.rows() && t.data.cols() == p.value.cols(),
                   "checkpoint tensor '" + p.name + "' in " + path + " has wrong shape");
        p.value = t.data.cast<S>();
    }
    for (std::size_t i = 0; i < model.bn_states.size(); ++i) {
        const std::string prefix = "bn" + std::to_string(i) + ".";
        const NamedTensor& rm = find(prefix + "running_mean");
        const NamedTensor& rv = find(prefix + "running_var");
        check_data(rm.data.size() == model.bn_states[i].running_mean.size() &&
                       rv.data.size() == model.bn_states[i].running_var.size(),
                   "checkpoint normalization state " + std::to_string(i) + " in " + path +
                       " has wrong shape");
        model.bn_states[i].running_mean = rm.data.col(0).cast<S>();
        model.bn_states[i].running_var = rv.data.col(0).cast<S>();
    }

    if (train_state != nullptr) {
        check_data(meta.contains("train_state"),
                   "checkpoint " + path + " holds no training state; cannot resume from it");
        const auto& ts = meta.at("train_state");
        try {
            train_state->next_epoch = ts.at("next_epoch").get<long>();
            train_state->global_step = ts.at("global_step").get<long>();
            train_state->adam_t = ts.at("adam_t").get<long>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("checkpoint " + path + " has malformed training state: " + e.what());
        }
        train_state->opt_tensors.clear();
        for (const NamedTensor& t : ckpt.tensors) {
            if (t.name.rfind("adam.", 0) == 0) train_state->opt_tensors.push_back(t);
        }
    }
    return model;
}

template void save_model_checkpoint<float>(const GaitModel<float>&, const std::string&,
                                           const TrainState*);
template void save_model_checkpoint<double>(const GaitModel<double>&, const std::string&,
                                            const TrainState*);
template GaitModel<float> load_model_checkpoint<float>(const std::string&, TrainState*);
template GaitModel<double> load_model_checkpoint<double>(const std::string&, TrainState*);

}  // namespace gait
