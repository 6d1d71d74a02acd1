// flooddan: two-stage unsupervised domain adaptation for flood forecasting.
//
// Single entry point with subcommands synth | pretrain | adapt | evaluate |
// fewshot | plot. A JSON config file fully determines a run; every flag
// overrides the corresponding config key. Each command writes its artifacts
// plus a run manifest (the only file containing wall-clock timestamps), so
// reruns with identical config+seed are byte-identical everywhere else.

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "flooddan/checkpoint.hpp"
#include "flooddan/errors.hpp"
#include "flooddan/evaluation.hpp"
#include "flooddan/models.hpp"
#include "flooddan/series.hpp"
#include "flooddan/synthetic.hpp"
#include "flooddan/training.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flooddan;

namespace {

// --- logging ---------------------------------------------------------------

int log_level() {
    static const int level = [] {
        const char* v = std::getenv("FLOODDAN_LOG");
        if (!v) return 1;
        const std::string s(v);
        if (s == "quiet") return 0;
        if (s == "debug") return 2;
        return 1;
    }();
    return level;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[flooddan] " << msg << '\n';
}

void debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[flooddan:debug] " << msg << '\n';
}

// --- hashing / provenance ----------------------------------------------------

uint64_t fnv1a(const char* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    for (size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string digest_string(const std::string& s) { return hex64(fnv1a(s.data(), s.size())); }

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open '" + path + "' for digesting");
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    }
    return hex64(h);
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) fail(ErrorCategory::io, "cannot write '" + tmp + "'");
        out << content;
    }
    fs::rename(tmp, path);
}

void write_json_file(const std::string& path, const json& j) {
    atomic_write_text(path, j.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open '" + path + "'");
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        fail(ErrorCategory::parse, "'" + path + "': " + e.what());
    }
}

// --- run manifest ------------------------------------------------------------

struct Manifest {
    std::string command;
    json config;
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string started_at;

    void add_output(const std::string& path) { outputs.push_back(path); }

    void write(const std::string& out_dir) const {
        json j;
        j["command"] = command;
        j["config"] = config;
        j["config_digest"] = digest_string(config.dump());
        j["seed"] = seed;
        j["started_at"] = started_at;
        j["finished_at"] = now_iso8601();
        json ins = json::array();
        for (const auto& p : inputs) ins.push_back({{"path", p}, {"digest", digest_file(p)}});
        j["inputs"] = ins;
        json outs = json::array();
        for (const auto& p : outputs) {
            if (!fs::exists(p)) fail(ErrorCategory::integrity, "manifest names missing output '" + p + "'");
            outs.push_back({{"path", p}, {"digest", digest_file(p)}});
        }
        j["outputs"] = outs;
        write_json_file(out_dir + "/" + command + "_manifest.json", j);
    }
};

// --- config resolution ---------------------------------------------------------

json default_config() {
    return json{
        {"data",
         {{"source", "source.csv"},
          {"target", "target.csv"},
          {"window_length", 24},
          {"forecast_period", 6},
          {"train_fraction", 0.7},
          {"head_mode", "residual"}}},
        {"arch",
         {{"encoder_layers", 3},
          {"encoder_channels", 36},
          {"encoder_kernel", 2},
          {"dropout", 0.2},
          {"head_channels", 36},
          {"critic_hidden", {128, 128}},
          {"critic_slope", 0.2}}},
        {"train",
         {{"epochs", 100},
          {"batch_size", 64},
          {"learning_rate", 5e-4},
          {"weight_decay", 8e-3},
          {"seed", 1}}},
        {"adapt",
         {{"epochs", 100},
          {"batch_size", 64},
          {"learning_rate", 5e-4},
          {"weight_decay", 8e-3},
          {"seed", 1},
          {"gp_weight", 10.0},
          {"critic_steps", 5},
          {"warm_start", true}}},
        {"synth",
         {{"source",
           {{"name", "synthetic-source"},
            {"station_count", 11},
            {"series_length", 6000},
            {"storm_rate", 0.035},
            {"storm_intensity", 6.0},
            {"storm_duration", 10.0},
            {"response_time", 8.0},
            {"peak_delay", 2.0},
            {"baseflow", 20.0},
            {"noise_amplitude", 0.0},
            {"seed", 1}}},
          {"target",
           {{"name", "synthetic-target"},
            {"station_count", 7},
            {"series_length", 6000},
            {"storm_rate", 0.035},
            {"storm_intensity", 9.0},
            {"storm_duration", 10.0},
            {"response_time", 12.0},
            {"peak_delay", 2.0},
            {"baseflow", 30.0},
            {"noise_amplitude", 0.0},
            {"seed", 2}}}}},
        {"fewshot", {{"hours", {50, 100, 200, 400, 800}}, {"repeats", 20}, {"epochs", 100}, {"seed", 1}}}};
}

void deep_merge(json& base, const json& overlay) {
    if (!overlay.is_object() || !base.is_object()) {
        base = overlay;
        return;
    }
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (base.contains(it.key()))
            deep_merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "runs";
    std::optional<uint64_t> seed;
    std::optional<std::string> source_path;
    std::optional<std::string> target_path;
};

json resolve_config(const CommonOpts& opts) {
    json cfg = default_config();
    if (!opts.config_path.empty()) deep_merge(cfg, read_json_file(opts.config_path));
    if (opts.seed) {
        cfg["train"]["seed"] = *opts.seed;
        cfg["adapt"]["seed"] = *opts.seed;
        cfg["fewshot"]["seed"] = *opts.seed;
        cfg["synth"]["source"]["seed"] = *opts.seed;
        cfg["synth"]["target"]["seed"] = *opts.seed + 1;
    }
    if (opts.source_path) cfg["data"]["source"] = *opts.source_path;
    if (opts.target_path) cfg["data"]["target"] = *opts.target_path;
    return cfg;
}

ArchConfig arch_from(const json& cfg) {
    const json& a = cfg.at("arch");
    ArchConfig arch;
    arch.encoder_layers = a.at("encoder_layers").get<int>();
    arch.encoder_channels = a.at("encoder_channels").get<int>();
    arch.encoder_kernel = a.at("encoder_kernel").get<int>();
    arch.dropout = a.at("dropout").get<double>();
    arch.head_channels = a.at("head_channels").get<int>();
    arch.critic_hidden = a.at("critic_hidden").get<std::vector<int>>();
    arch.critic_slope = a.at("critic_slope").get<double>();
    return arch;
}

TrainConfig train_from(const json& section) {
    TrainConfig t;
    t.epochs = section.at("epochs").get<int>();
    t.batch_size = section.at("batch_size").get<int>();
    t.learning_rate = section.at("learning_rate").get<double>();
    t.weight_decay = section.at("weight_decay").get<double>();
    t.seed = section.at("seed").get<uint64_t>();
    return t;
}

AdaptConfig adapt_from(const json& cfg) {
    const json& section = cfg.at("adapt");
    AdaptConfig a;
    static_cast<TrainConfig&>(a) = train_from(section);
    a.gp_weight = section.at("gp_weight").get<double>();
    a.critic_steps = section.at("critic_steps").get<int>();
    a.warm_start = section.at("warm_start").get<bool>();
    return a;
}

SyntheticConfig synth_from(const json& section) {
    SyntheticConfig s;
    s.name = section.at("name").get<std::string>();
    s.station_count = section.at("station_count").get<int>();
    s.series_length = section.at("series_length").get<int>();
    s.storm_rate = section.at("storm_rate").get<double>();
    s.storm_intensity = section.at("storm_intensity").get<double>();
    s.storm_duration = section.at("storm_duration").get<double>();
    s.response_time = section.at("response_time").get<double>();
    s.peak_delay = section.at("peak_delay").get<double>();
    s.baseflow = section.at("baseflow").get<double>();
    s.noise_amplitude = section.at("noise_amplitude").get<double>();
    s.seed = section.at("seed").get<uint64_t>();
    return s;
}

WindowConfig window_from(const json& cfg) {
    WindowConfig w;
    w.window_length = cfg.at("data").at("window_length").get<int>();
    w.forecast_period = cfg.at("data").at("forecast_period").get<int>();
    w.validate();
    return w;
}

HeadMode head_mode_from(const json& cfg) {
    const std::string mode = cfg.at("data").at("head_mode").get<std::string>();
    if (mode == "residual") return HeadMode::residual;
    if (mode == "direct") return HeadMode::direct;
    fail(ErrorCategory::config, "head_mode must be 'residual' or 'direct', got '" + mode + "'");
}

std::string config_digest(const json& cfg) { return digest_string(cfg.dump()); }

// --- dataset preparation ---------------------------------------------------------

struct DomainData {
    HydroSeries train_raw, test_raw;
    Normalizer norm;
    std::vector<WindowedSample> train_labeled;
    std::vector<WindowedSample> train_unlabeled;
    std::vector<WindowedSample> test_labeled;
};

DomainData prepare_domain(const std::string& path, const json& cfg) {
    const WindowConfig w = window_from(cfg);
    const double fraction = cfg.at("data").at("train_fraction").get<double>();
    const HydroSeries series = load_series(path, SeriesSchema{});
    DomainData d;
    std::tie(d.train_raw, d.test_raw) =
        split_chronological(series, fraction, w.window_length + w.forecast_period + 1);
    d.norm = Normalizer::fit(d.train_raw);
    d.train_labeled = make_windows(d.norm.apply(d.train_raw), w, true);
    d.train_unlabeled = make_windows(d.norm.apply(d.train_raw), w, false);
    d.test_labeled = make_windows(d.norm.apply(d.test_raw), w, true);
    debug(path + ": " + std::to_string(d.train_labeled.size()) + " train / " +
          std::to_string(d.test_labeled.size()) + " test labeled windows");
    return d;
}

Checkpoint load_required_checkpoint(const std::string& path, const std::string& produced_by) {
    if (!fs::exists(path))
        fail(ErrorCategory::dependency,
             "missing checkpoint '" + path + "' — run '" + produced_by + "' first");
    return load_checkpoint(path);
}

std::vector<FeatureMap> feature_batch(const EncoderParams& enc,
                                      const std::vector<WindowedSample>& samples,
                                      size_t cap = 256) {
    if (samples.empty()) fail(ErrorCategory::size, "cannot build a feature batch from no samples");
    const size_t n = std::min(cap, samples.size());
    const size_t stride = std::max<size_t>(1, samples.size() / n);
    std::vector<FeatureMap> out;
    out.reserve(n);
    for (size_t i = 0; i < samples.size() && out.size() < n; i += stride)
        out.push_back(encoder_forward(enc, samples[i].x));
    return out;
}

json alignment_to_json(const AlignmentStats& s) {
    return json{{"mean_term", s.mean_term},
                {"cov_term", s.cov_term},
                {"distance", s.distance},
                {"channel_mean_gap",
                 std::vector<double>(s.channel_mean_gap.data(),
                                     s.channel_mean_gap.data() + s.channel_mean_gap.size())},
                {"channel_var_gap",
                 std::vector<double>(s.channel_var_gap.data(),
                                     s.channel_var_gap.data() + s.channel_var_gap.size())},
                {"histogram_edges", s.histogram_edges},
                {"histogram_source", s.histogram_a},
                {"histogram_target", s.histogram_b}};
}

// --- commands ----------------------------------------------------------------

int cmd_synth(const CommonOpts& opts) {
    const json cfg = resolve_config(opts);
    Manifest mf{"synth", cfg};
    mf.started_at = now_iso8601();
    const WindowConfig w = window_from(cfg);

    const SyntheticConfig src_cfg = synth_from(cfg.at("synth").at("source"));
    const SyntheticConfig tgt_cfg = synth_from(cfg.at("synth").at("target"));
    // Validate both configs before writing anything.
    src_cfg.validate(w.window_length + w.forecast_period);
    tgt_cfg.validate(w.window_length + w.forecast_period);
    mf.seed = src_cfg.seed;

    fs::create_directories(opts.out_dir);
    const std::string src_path = opts.out_dir + "/source.csv";
    const std::string tgt_path = opts.out_dir + "/target.csv";
    write_series(generate_synthetic(src_cfg), src_path);
    write_series(generate_synthetic(tgt_cfg), tgt_path);
    info("wrote " + src_path + " (" + std::to_string(src_cfg.station_count) + " stations) and " +
         tgt_path + " (" + std::to_string(tgt_cfg.station_count) + " stations)");

    mf.add_output(src_path);
    mf.add_output(tgt_path);
    mf.write(opts.out_dir);
    return 0;
}

int cmd_pretrain(const CommonOpts& opts) {
    const json cfg = resolve_config(opts);
    Manifest mf{"pretrain", cfg};
    mf.started_at = now_iso8601();

    const std::string source_path = cfg.at("data").at("source").get<std::string>();
    mf.inputs.push_back(source_path);
    const DomainData src = prepare_domain(source_path, cfg);
    const ArchConfig arch = arch_from(cfg);
    const TrainConfig tc = train_from(cfg.at("train"));
    const HeadMode mode = head_mode_from(cfg);
    mf.seed = tc.seed;

    info("pretraining on " + source_path + " (" + std::to_string(src.train_labeled.size()) +
         " windows, " + std::to_string(tc.epochs) + " epochs)");
    const PretrainResult result = pretrain(src.train_labeled, tc, arch, mode);

    fs::create_directories(opts.out_dir);
    const std::string digest = config_digest(cfg);

    // Supervised report on the held-out source test split plus the persistence
    // floor, both in original units.
    auto [trace_sup, report_sup] = predict(result.encoder, result.head, src.norm, src.test_labeled);
    report_sup.model = "supervised";
    report_sup.dataset = source_path + "/test";
    report_sup.seed = tc.seed;
    report_sup.config_digest = digest;
    auto [trace_lb, report_lb] = lower_bound_baseline(src.test_labeled, src.norm);
    report_lb.dataset = source_path + "/test";
    report_lb.seed = tc.seed;
    report_lb.config_digest = digest;
    info("source test DC " + std::to_string(report_sup.dc) + " (lower bound " +
         std::to_string(report_lb.dc) + ")");

    Checkpoint ckpt;
    ckpt.bundle = init_params(arch, static_cast<int>(src.train_raw.station_count()),
                              window_from(cfg).window_length, mode, tc.seed);
    ckpt.bundle.encoder = result.encoder;
    ckpt.bundle.head = result.head;
    ckpt.head_mode = mode;
    ckpt.stage = "pretrain";
    ckpt.seed = tc.seed;
    ckpt.normalizer = src.norm;
    ckpt.extra = json{{"config_digest", digest}, {"source", source_path}};

    const std::string ckpt_path = opts.out_dir + "/pretrain.ckpt";
    const std::string trace_path = opts.out_dir + "/pretrain_trace.jsonl";
    save_checkpoint(ckpt, ckpt_path);
    write_trace(result.trace, trace_path);
    write_report(report_sup, opts.out_dir + "/report_pretrain.json");
    write_report(report_lb, opts.out_dir + "/report_pretrain_lower_bound.json");

    mf.add_output(ckpt_path);
    mf.add_output(trace_path);
    mf.add_output(opts.out_dir + "/report_pretrain.json");
    mf.add_output(opts.out_dir + "/report_pretrain_lower_bound.json");
    mf.write(opts.out_dir);
    return 0;
}

int cmd_adapt(const CommonOpts& opts, std::string pretrained_path) {
    const json cfg = resolve_config(opts);
    Manifest mf{"adapt", cfg};
    mf.started_at = now_iso8601();

    if (pretrained_path.empty()) pretrained_path = opts.out_dir + "/pretrain.ckpt";
    const Checkpoint stage1 = load_required_checkpoint(pretrained_path, "pretrain");
    mf.inputs.push_back(pretrained_path);

    const std::string source_path = cfg.at("data").at("source").get<std::string>();
    const std::string target_path = cfg.at("data").at("target").get<std::string>();
    mf.inputs.push_back(source_path);
    mf.inputs.push_back(target_path);

    const WindowConfig w = window_from(cfg);
    const double fraction = cfg.at("data").at("train_fraction").get<double>();

    // Source windows are normalized with the stage-1 normalizer so the frozen
    // encoder sees the distribution it was trained on.
    const HydroSeries source_series = load_series(source_path, SeriesSchema{});
    auto [source_train_raw, source_test_raw] =
        split_chronological(source_series, fraction, w.window_length + w.forecast_period + 1);
    require_architecture(stage1, static_cast<int>(source_train_raw.station_count()),
                         w.window_length);
    const std::vector<WindowedSample> source_train =
        make_windows(stage1.normalizer.apply(source_train_raw), w, false);

    const DomainData tgt = prepare_domain(target_path, cfg);
    const ArchConfig arch = arch_from(cfg);
    const AdaptConfig ac = adapt_from(cfg);
    mf.seed = ac.seed;

    // Target labels feed only the per-epoch ratio diagnostic, never a gradient.
    ProbeContext probe;
    probe.samples = &tgt.train_labeled;
    probe.head = &stage1.bundle.head;
    probe.normalizer = &tgt.norm;

    info("adapting on " + target_path + " (" + std::to_string(tgt.train_unlabeled.size()) +
         " unlabeled windows, " + std::to_string(ac.epochs) + " epochs)");
    const AdaptResult result =
        adapt(tgt.train_unlabeled, source_train, stage1.bundle.encoder, ac, arch, probe);

    // Alignment diagnostics: source features from the frozen encoder versus
    // target features before (warm-start state) and after adaptation.
    const EncoderParams before = init_target_encoder(
        stage1.bundle.encoder, arch, static_cast<int>(tgt.train_raw.station_count()), ac);
    const auto source_features = feature_batch(stage1.bundle.encoder, source_train);
    const auto target_before = feature_batch(before, tgt.train_unlabeled);
    const auto target_after = feature_batch(result.target_encoder, tgt.train_unlabeled);
    const AlignmentStats stats_before = feature_alignment_stats(source_features, target_before);
    const AlignmentStats stats_after = feature_alignment_stats(source_features, target_after);
    info("alignment distance " + std::to_string(stats_before.distance) + " -> " +
         std::to_string(stats_after.distance));

    fs::create_directories(opts.out_dir);
    const std::string digest = config_digest(cfg);

    Checkpoint ckpt;
    ckpt.bundle = init_params(arch, static_cast<int>(tgt.train_raw.station_count()),
                              w.window_length, stage1.head_mode, ac.seed);
    ckpt.bundle.encoder = result.target_encoder;
    ckpt.bundle.head = stage1.bundle.head;  // frozen stage-1 head, carried for splicing
    ckpt.bundle.critic = result.critic;
    ckpt.head_mode = stage1.head_mode;
    ckpt.stage = "adapt";
    ckpt.seed = ac.seed;
    ckpt.normalizer = tgt.norm;
    ckpt.extra = json{{"config_digest", digest},
                      {"source", source_path},
                      {"target", target_path},
                      {"pretrained", pretrained_path}};

    const std::string ckpt_path = opts.out_dir + "/adapt.ckpt";
    const std::string trace_path = opts.out_dir + "/adapt_trace.jsonl";
    const std::string align_path = opts.out_dir + "/alignment.json";
    save_checkpoint(ckpt, ckpt_path);
    write_trace(result.trace, trace_path);
    write_json_file(align_path, json{{"before", alignment_to_json(stats_before)},
                                     {"after", alignment_to_json(stats_after)},
                                     {"config_digest", digest}});

    mf.add_output(ckpt_path);
    mf.add_output(trace_path);
    mf.add_output(align_path);
    mf.write(opts.out_dir);
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, std::string pretrained_path, std::string adapted_path) {
    const json cfg = resolve_config(opts);
    Manifest mf{"evaluate", cfg};
    mf.started_at = now_iso8601();

    if (pretrained_path.empty()) pretrained_path = opts.out_dir + "/pretrain.ckpt";
    if (adapted_path.empty()) adapted_path = opts.out_dir + "/adapt.ckpt";
    const Checkpoint stage1 = load_required_checkpoint(pretrained_path, "pretrain");
    const Checkpoint stage2 = load_required_checkpoint(adapted_path, "adapt");
    mf.inputs.push_back(pretrained_path);
    mf.inputs.push_back(adapted_path);

    const std::string target_path = cfg.at("data").at("target").get<std::string>();
    mf.inputs.push_back(target_path);
    const WindowConfig w = window_from(cfg);
    const double fraction = cfg.at("data").at("train_fraction").get<double>();

    const HydroSeries target_series = load_series(target_path, SeriesSchema{});
    auto [target_train_raw, target_test_raw] =
        split_chronological(target_series, fraction, w.window_length + w.forecast_period + 1);
    require_architecture(stage2, static_cast<int>(target_test_raw.station_count()),
                         w.window_length);
    // Normalize with the adaptation-time normalizer so evaluation sees exactly
    // the distribution the target encoder was adapted on.
    const std::vector<WindowedSample> test_windows =
        make_windows(stage2.normalizer.apply(target_test_raw), w, true);

    const std::string digest = config_digest(cfg);
    const uint64_t seed = stage2.seed;

    auto [trace, report] =
        predict(stage2.bundle.encoder, stage1.bundle.head, stage2.normalizer, test_windows);
    report.dataset = target_path + "/test";
    report.seed = seed;
    report.config_digest = digest;
    auto [trace_lb, report_lb] = lower_bound_baseline(test_windows, stage2.normalizer);
    report_lb.dataset = target_path + "/test";
    report_lb.seed = seed;
    report_lb.config_digest = digest;
    info("spliced DC " + std::to_string(report.dc) + " vs lower bound " +
         std::to_string(report_lb.dc) + " on " + std::to_string(report.n) + " samples");

    fs::create_directories(opts.out_dir);
    const std::string pred_path = opts.out_dir + "/predictions.csv";
    write_prediction_trace(trace, pred_path);
    write_report(report, opts.out_dir + "/report_spliced.json");
    write_report(report_lb, opts.out_dir + "/report_lower_bound.json");

    mf.seed = seed;
    mf.add_output(pred_path);
    mf.add_output(opts.out_dir + "/report_spliced.json");
    mf.add_output(opts.out_dir + "/report_lower_bound.json");
    mf.write(opts.out_dir);
    return 0;
}

int cmd_fewshot(const CommonOpts& opts, std::string unsupervised_report_path) {
    const json cfg = resolve_config(opts);
    Manifest mf{"fewshot", cfg};
    mf.started_at = now_iso8601();

    const std::string target_path = cfg.at("data").at("target").get<std::string>();
    mf.inputs.push_back(target_path);
    const DomainData tgt = prepare_domain(target_path, cfg);
    const ArchConfig arch = arch_from(cfg);

    TrainConfig tc = train_from(cfg.at("train"));
    tc.epochs = cfg.at("fewshot").at("epochs").get<int>();
    tc.seed = cfg.at("fewshot").at("seed").get<uint64_t>();
    const int repeats = cfg.at("fewshot").at("repeats").get<int>();
    const std::vector<int> hours = cfg.at("fewshot").at("hours").get<std::vector<int>>();
    mf.seed = tc.seed;

    fs::create_directories(opts.out_dir);
    const std::string digest = config_digest(cfg);

    std::vector<FewShotResult> results;
    for (int h : hours) {
        info("fewshot " + std::to_string(h) + " h x " + std::to_string(repeats) + " repeats");
        FewShotResult r =
            fewshot_run(tgt.train_labeled, tgt.test_labeled, h, tc, arch, tgt.norm, repeats);
        json j = r.to_json();
        j["config_digest"] = digest;
        const std::string path = opts.out_dir + "/fewshot_" + std::to_string(h) + ".json";
        write_json_file(path, j);
        mf.add_output(path);
        results.push_back(std::move(r));
    }

    if (unsupervised_report_path.empty())
        unsupervised_report_path = opts.out_dir + "/report_spliced.json";
    if (!fs::exists(unsupervised_report_path))
        fail(ErrorCategory::dependency, "missing unsupervised report '" + unsupervised_report_path +
                                            "' — run 'evaluate' first");
    mf.inputs.push_back(unsupervised_report_path);
    const MetricsReport unsup = read_report(unsupervised_report_path);
    const EquivalenceStatement st = supervision_equivalence(unsup, results);
    json ej = st.to_json();
    ej["hours_sweep"] = hours;
    ej["config_digest"] = digest;
    const std::string eq_path = opts.out_dir + "/equivalence.json";
    write_json_file(eq_path, ej);
    info(st.in_range ? ("unsupervised DC equivalent to [" + std::to_string(st.hours_low) + ", " +
                        std::to_string(st.hours_high) + "] supervision hours")
                     : "unsupervised DC outside the few-shot sweep range");

    mf.add_output(eq_path);
    mf.write(opts.out_dir);
    return 0;
}

// --- plotting ---------------------------------------------------------------

PredictionTrace read_prediction_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "truth,prediction")
        fail(ErrorCategory::parse, "'" + path + "' line 1: expected header 'truth,prediction'");
    std::vector<double> truths, preds;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        double t = 0.0, p = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf", &t, &p) != 2)
            fail(ErrorCategory::parse,
                 "'" + path + "' line " + std::to_string(lineno) + ": expected 'truth,prediction'");
        truths.push_back(t);
        preds.push_back(p);
    }
    if (truths.empty()) fail(ErrorCategory::parse, "'" + path + "' has no data rows (line 2)");
    PredictionTrace tr;
    tr.truths = Eigen::Map<Eigen::VectorXd>(truths.data(), static_cast<Eigen::Index>(truths.size()));
    tr.predictions = Eigen::Map<Eigen::VectorXd>(preds.data(), static_cast<Eigen::Index>(preds.size()));
    return tr;
}

void plot_predictions(const std::string& in_path, const std::string& out_path) {
    const PredictionTrace tr = read_prediction_trace(in_path);
    plot::Figure fig;
    fig.title = "Spliced-model forecast vs observed runoff";
    fig.x_label = "test sample (hour)";
    fig.y_label = "runoff (m^3/s)";
    plot::Series truth{"observed", "#1f77b4"};
    plot::Series pred{"predicted", "#d62728"};
    for (Eigen::Index i = 0; i < tr.truths.size(); ++i) {
        truth.x.push_back(static_cast<double>(i));
        truth.y.push_back(tr.truths[i]);
        pred.x.push_back(static_cast<double>(i));
        pred.y.push_back(tr.predictions[i]);
    }
    fig.series = {truth, pred};
    plot::write_svg(fig, out_path);
}

void plot_features(const std::string& in_path, const std::string& out_path) {
    const json j = read_json_file(in_path);
    if (!j.contains("after"))
        fail(ErrorCategory::parse, "'" + in_path + "' has no 'after' alignment record");
    const json& a = j.at("after");
    const auto edges = a.at("histogram_edges").get<std::vector<double>>();
    const auto hs = a.at("histogram_source").get<std::vector<double>>();
    const auto ht = a.at("histogram_target").get<std::vector<double>>();
    if (edges.size() != hs.size() + 1 || hs.size() != ht.size())
        fail(ErrorCategory::parse, "'" + in_path + "': inconsistent histogram sizes");
    plot::Figure fig;
    fig.title = "Source vs adapted target feature distribution";
    fig.x_label = "feature value";
    fig.y_label = "count";
    plot::Series src{"source features", "#1f77b4"};
    plot::Series tgt{"target features (adapted)", "#d62728"};
    src.bars = tgt.bars = true;
    for (size_t i = 0; i < hs.size(); ++i) {
        const double width = edges[i + 1] - edges[i];
        // Side-by-side half-width bars within each bin.
        src.x.push_back(edges[i] + 0.25 * width);
        src.y.push_back(hs[i]);
        tgt.x.push_back(edges[i] + 0.75 * width);
        tgt.y.push_back(ht[i]);
    }
    fig.series = {src, tgt};
    plot::write_svg(fig, out_path);
}

void plot_ratio(const std::string& in_path, const std::string& out_path) {
    const TrainTrace trace = read_trace(in_path);
    plot::Figure fig;
    fig.title = "Probe ratio mean(Y / Y-hat) per adaptation epoch";
    fig.x_label = "epoch";
    fig.y_label = "ratio";
    fig.has_hline = true;
    fig.hline = 1.0;
    fig.hline_label = "ideal";
    plot::Series s{"probe ratio", "#2ca02c"};
    for (const EpochRecord& e : trace.epochs) {
        if (!e.probe_ratio)
            fail(ErrorCategory::parse,
                 "'" + in_path + "': epoch " + std::to_string(e.epoch) + " has no probe ratio");
        s.x.push_back(static_cast<double>(e.epoch));
        s.y.push_back(*e.probe_ratio);
    }
    fig.series = {s};
    plot::write_svg(fig, out_path);
}

void plot_fewshot(const std::string& dir, const std::string& eq_path,
                  const std::string& out_path) {
    std::vector<std::pair<int, double>> curve;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("fewshot_", 0) != 0 || entry.path().extension() != ".json") continue;
        const std::string stem = name.substr(8, name.size() - 8 - 5);
        if (stem.empty() || stem.find_first_not_of("0123456789") != std::string::npos) continue;
        const FewShotResult r = FewShotResult::from_json(read_json_file(entry.path().string()));
        curve.emplace_back(r.hours, r.mean_dc);
    }
    if (curve.empty())
        fail(ErrorCategory::dependency, "no fewshot_*.json results in '" + dir + "'");
    std::sort(curve.begin(), curve.end());
    const json eq = read_json_file(eq_path);

    plot::Figure fig;
    fig.title = "Few-shot DC vs supervision hours";
    fig.x_label = "supervision (hours)";
    fig.y_label = "DC";
    fig.has_hline = true;
    fig.hline = eq.at("unsupervised_dc").get<double>();
    fig.hline_label = "unsupervised (adapted)";
    plot::Series s{"few-shot mean DC", "#1f77b4"};
    for (const auto& [h, dc_val] : curve) {
        s.x.push_back(static_cast<double>(h));
        s.y.push_back(dc_val);
    }
    fig.series = {s};
    plot::write_svg(fig, out_path);
}

int cmd_plot(const CommonOpts& opts) {
    const json cfg = resolve_config(opts);
    Manifest mf{"plot", cfg};
    mf.started_at = now_iso8601();
    const std::string& dir = opts.out_dir;
    fs::create_directories(dir);

    int emitted = 0;
    if (fs::exists(dir + "/predictions.csv")) {
        plot_predictions(dir + "/predictions.csv", dir + "/predictions.svg");
        mf.inputs.push_back(dir + "/predictions.csv");
        mf.add_output(dir + "/predictions.svg");
        ++emitted;
    }
    if (fs::exists(dir + "/alignment.json")) {
        plot_features(dir + "/alignment.json", dir + "/features.svg");
        mf.inputs.push_back(dir + "/alignment.json");
        mf.add_output(dir + "/features.svg");
        ++emitted;
    }
    if (fs::exists(dir + "/adapt_trace.jsonl")) {
        plot_ratio(dir + "/adapt_trace.jsonl", dir + "/ratio.svg");
        mf.inputs.push_back(dir + "/adapt_trace.jsonl");
        mf.add_output(dir + "/ratio.svg");
        ++emitted;
    }
    if (fs::exists(dir + "/equivalence.json")) {
        plot_fewshot(dir, dir + "/equivalence.json", dir + "/fewshot.svg");
        mf.inputs.push_back(dir + "/equivalence.json");
        mf.add_output(dir + "/fewshot.svg");
        ++emitted;
    }
    if (emitted == 0)
        fail(ErrorCategory::dependency,
             "no plottable artifacts in '" + dir + "' — run the pipeline first");
    info("emitted " + std::to_string(emitted) + " figure(s) in " + dir);
    mf.write(dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flooddan: two-stage unsupervised domain adaptation for flood forecasting"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string pretrained_path, adapted_path, unsupervised_report_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "JSON run configuration");
        sub->add_option("--out", opts.out_dir, "artifact directory (default: runs)");
        sub->add_option_function<uint64_t>(
            "--seed", [&](const uint64_t& v) { opts.seed = v; },
            "master seed; overrides every per-section seed");
        sub->add_option_function<std::string>(
            "--source", [&](const std::string& v) { opts.source_path = v; },
            "source-domain series file (overrides data.source)");
        sub->add_option_function<std::string>(
            "--target", [&](const std::string& v) { opts.target_path = v; },
            "target-domain series file (overrides data.target)");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate the synthetic source/target pair");
    add_common(synth);
    CLI::App* pre = app.add_subcommand("pretrain", "stage 1: supervised pretraining on the source");
    add_common(pre);
    CLI::App* ada = app.add_subcommand("adapt", "stage 2: adversarial target-encoder adaptation");
    add_common(ada);
    ada->add_option("--pretrained", pretrained_path, "stage-1 checkpoint (default: <out>/pretrain.ckpt)");
    CLI::App* eva = app.add_subcommand("evaluate", "splice inference + persistence baseline");
    add_common(eva);
    eva->add_option("--pretrained", pretrained_path, "stage-1 checkpoint (default: <out>/pretrain.ckpt)");
    eva->add_option("--adapted", adapted_path, "stage-2 checkpoint (default: <out>/adapt.ckpt)");
    CLI::App* few = app.add_subcommand("fewshot", "supervised few-shot sweep + equivalence statement");
    add_common(few);
    few->add_option("--report", unsupervised_report_path,
                    "unsupervised metrics report (default: <out>/report_spliced.json)");
    CLI::App* plt = app.add_subcommand("plot", "emit SVG figures from existing artifacts");
    add_common(plt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(opts);
        if (pre->parsed()) return cmd_pretrain(opts);
        if (ada->parsed()) return cmd_adapt(opts, pretrained_path);
        if (eva->parsed()) return cmd_evaluate(opts, pretrained_path, adapted_path);
        if (few->parsed()) return cmd_fewshot(opts, unsupervised_report_path);
        if (plt->parsed()) return cmd_plot(opts);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal_error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
