#include "flooddan/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "flooddan/errors.hpp"

namespace flooddan {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'O', 'O', 'D', 'D', 'A', 'N'};
constexpr uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& in, const char* field) {
    uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4))
        fail(ErrorCategory::parse, std::string("truncated checkpoint while reading ") + field);
    return v;
}

uint64_t read_u64(std::istream& in, const char* field) {
    uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 8))
        fail(ErrorCategory::parse, std::string("truncated checkpoint while reading ") + field);
    return v;
}

nlohmann::json arch_to_json(const ArchConfig& a) {
    return {{"encoder_layers", a.encoder_layers}, {"encoder_channels", a.encoder_channels},
            {"encoder_kernel", a.encoder_kernel}, {"dropout", a.dropout},
            {"head_channels", a.head_channels},   {"critic_hidden", a.critic_hidden},
            {"critic_slope", a.critic_slope}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig a;
    a.encoder_layers = j.at("encoder_layers").get<int>();
    a.encoder_channels = j.at("encoder_channels").get<int>();
    a.encoder_kernel = j.at("encoder_kernel").get<int>();
    a.dropout = j.at("dropout").get<double>();
    a.head_channels = j.at("head_channels").get<int>();
    a.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
    a.critic_slope = j.at("critic_slope").get<double>();
    return a;
}

struct NamedTensor {
    uint32_t rows = 0;
    uint32_t cols = 0;
    std::vector<double> data;  // column-major
};

using TensorMap = std::map<std::string, NamedTensor>;

TensorMap collect_tensors(ModelBundle& bundle) {
    TensorMap tensors;
    TensorVisitor v;
    v.matrix = [&](const std::string& name, Eigen::MatrixXd& m) {
        NamedTensor t;
        t.rows = static_cast<uint32_t>(m.rows());
        t.cols = static_cast<uint32_t>(m.cols());
        t.data.assign(m.data(), m.data() + m.size());
        tensors[name] = std::move(t);
    };
    v.vector = [&](const std::string& name, Eigen::VectorXd& vec) {
        NamedTensor t;
        t.rows = static_cast<uint32_t>(vec.size());
        t.cols = 1;
        t.data.assign(vec.data(), vec.data() + vec.size());
        tensors[name] = std::move(t);
    };
    visit_tensors(bundle.encoder, "encoder", v);
    visit_tensors(bundle.head, "head", v);
    visit_tensors(bundle.critic, "critic", v);
    return tensors;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json meta;
    meta["version"] = kCheckpointVersion;
    meta["arch"] = arch_to_json(ckpt.bundle.arch);
    meta["station_count"] = ckpt.bundle.station_count;
    meta["window_length"] = ckpt.bundle.window_length;
    meta["head_mode"] = ckpt.head_mode == HeadMode::residual ? "residual" : "direct";
    meta["stage"] = ckpt.stage;
    meta["seed"] = ckpt.seed;
    meta["normalizer"] = {
        {"rain_min", std::vector<double>(ckpt.normalizer.rain_min().begin(),
                                         ckpt.normalizer.rain_min().end())},
        {"rain_max", std::vector<double>(ckpt.normalizer.rain_max().begin(),
                                         ckpt.normalizer.rain_max().end())},
        {"runoff_min", ckpt.normalizer.runoff_min()},
        {"runoff_max", ckpt.normalizer.runoff_max()},
    };
    meta["extra"] = ckpt.extra;
    const std::string meta_str = meta.dump();

    ModelBundle bundle = ckpt.bundle;  // visit_tensors needs mutable refs
    const TensorMap tensors = collect_tensors(bundle);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write checkpoint '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kFormatVersion);
    write_u64(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    write_u64(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        write_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, t.rows);
        write_u32(out, t.cols);
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!out) fail(ErrorCategory::io, "write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::dependency, "missing checkpoint '" + path + "'");

    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        fail(ErrorCategory::parse, "'" + path + "' is not a checkpoint (bad magic)");
    const uint32_t version = read_u32(in, "format version");
    if (version != kFormatVersion)
        fail(ErrorCategory::parse, "unsupported checkpoint format version " +
                                       std::to_string(version) + " in '" + path + "'");

    const uint64_t meta_len = read_u64(in, "metadata length");
    std::string meta_str(meta_len, '\0');
    if (!in.read(meta_str.data(), static_cast<std::streamsize>(meta_len)))
        fail(ErrorCategory::parse, "truncated checkpoint while reading metadata");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::parse, std::string("corrupt checkpoint metadata: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        const ArchConfig arch = arch_from_json(meta.at("arch"));
        const int d = meta.at("station_count").get<int>();
        const int T = meta.at("window_length").get<int>();
        ckpt.head_mode = meta.at("head_mode").get<std::string>() == "direct" ? HeadMode::direct
                                                                             : HeadMode::residual;
        ckpt.stage = meta.at("stage").get<std::string>();
        ckpt.seed = meta.at("seed").get<uint64_t>();
        const auto& nj = meta.at("normalizer");
        const auto rmin = nj.at("rain_min").get<std::vector<double>>();
        const auto rmax = nj.at("rain_max").get<std::vector<double>>();
        ckpt.normalizer.set_state(
            Eigen::Map<const Eigen::VectorXd>(rmin.data(), static_cast<Eigen::Index>(rmin.size())),
            Eigen::Map<const Eigen::VectorXd>(rmax.data(), static_cast<Eigen::Index>(rmax.size())),
            nj.at("runoff_min").get<double>(), nj.at("runoff_max").get<double>());
        ckpt.extra = meta.value("extra", nlohmann::json::object());
        ckpt.bundle = init_params(arch, d, T, ckpt.head_mode, ckpt.seed);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::parse, std::string("checkpoint metadata field missing: ") + e.what());
    }

    const uint64_t n_tensors = read_u64(in, "tensor count");
    TensorMap expected = collect_tensors(ckpt.bundle);
    TensorMap loaded;
    for (uint64_t i = 0; i < n_tensors; ++i) {
        const uint32_t name_len = read_u32(in, "tensor name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len))
            fail(ErrorCategory::parse, "truncated checkpoint while reading tensor name");
        NamedTensor t;
        t.rows = read_u32(in, "tensor rows");
        t.cols = read_u32(in, "tensor cols");
        auto it = expected.find(name);
        if (it == expected.end())
            fail(ErrorCategory::parse, "unexpected tensor '" + name + "' in '" + path + "'");
        if (it->second.rows != t.rows || it->second.cols != t.cols)
            fail(ErrorCategory::dimension,
                 "tensor '" + name + "' has shape (" + std::to_string(t.rows) + "," +
                     std::to_string(t.cols) + "), architecture requires (" +
                     std::to_string(it->second.rows) + "," + std::to_string(it->second.cols) + ")");
        t.data.resize(static_cast<size_t>(t.rows) * t.cols);
        if (!in.read(reinterpret_cast<char*>(t.data.data()),
                     static_cast<std::streamsize>(t.data.size() * sizeof(double))))
            fail(ErrorCategory::parse, "truncated checkpoint while reading tensor '" + name + "'");
        loaded[name] = std::move(t);
    }
    for (const auto& [name, t] : expected)
        if (!loaded.count(name))
            fail(ErrorCategory::parse, "checkpoint is missing tensor '" + name + "'");

    TensorVisitor v;
    v.matrix = [&](const std::string& name, Eigen::MatrixXd& m) {
        const auto& t = loaded.at(name);
        std::memcpy(m.data(), t.data.data(), t.data.size() * sizeof(double));
    };
    v.vector = [&](const std::string& name, Eigen::VectorXd& vec) {
        const auto& t = loaded.at(name);
        std::memcpy(vec.data(), t.data.data(), t.data.size() * sizeof(double));
    };
    visit_tensors(ckpt.bundle.encoder, "encoder", v);
    visit_tensors(ckpt.bundle.head, "head", v);
    visit_tensors(ckpt.bundle.critic, "critic", v);
    return ckpt;
}

void require_architecture(const Checkpoint& ckpt, int station_count, int window_length) {
    if (ckpt.bundle.station_count != station_count)
        fail(ErrorCategory::dimension,
             "checkpoint was trained for " + std::to_string(ckpt.bundle.station_count) +
                 " stations, pipeline expects " + std::to_string(station_count));
    if (ckpt.bundle.window_length != window_length)
        fail(ErrorCategory::dimension,
             "checkpoint window length " + std::to_string(ckpt.bundle.window_length) +
                 " differs from configured " + std::to_string(window_length));
}

}  // namespace flooddan
