// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.
//
// Usage: acceptance <path-to-flooddan-cli>
//
// Criteria 1-4 and 10 exercise the library directly; 5-9, 11 and the optional
// 12 drive the CLI end to end on synthetic watersheds.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flooddan/checkpoint.hpp"
#include "flooddan/errors.hpp"
#include "flooddan/evaluation.hpp"
#include "flooddan/models.hpp"
#include "flooddan/series.hpp"
#include "flooddan/synthetic.hpp"
#include "flooddan/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flooddan;

namespace {

bool g_all_pass = true;

void criterion(int n, const std::string& label, bool ok, const std::string& detail = "") {
    std::printf("criterion %2d [%s]: %s%s\n", n, label.c_str(), ok ? "PASS" : "FAIL",
                detail.empty() ? "" : ("  (" + detail + ")").c_str());
    std::fflush(stdout);
    if (!ok) g_all_pass = false;
}

std::string g_cli;
fs::path g_work;

int run_cli(const std::string& args) {
    const std::string cmd = "FLOODDAN_LOG=quiet " + g_cli + " " + args;
    return std::system(cmd.c_str());
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    json j;
    in >> j;
    return j;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- numeric helpers --------------------------------------------------------

Eigen::VectorXd vec(std::initializer_list<double> vals) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (double x : vals) v[i++] = x;
    return v;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                              double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

template <typename F>
double finite_difference(F&& f, double* coord, double step = 1e-3) {
    const double saved = *coord;
    *coord = saved + step;
    const double hi = f();
    *coord = saved - step;
    const double lo = f();
    *coord = saved;
    return (hi - lo) / (2.0 * step);
}

bool close_rel(double a, double b, double tol = 1e-4) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom < tol;
}

// The critic's leaky-ReLU is piecewise linear; a finite-difference step must
// not cross a kink. Push biases so every hidden pre-activation stays at least
// `margin` from zero on every probe input; returns false when two inputs
// disagree on the push direction (caller picks another seed).
bool ensure_kink_margin(CriticParams& critic, const std::vector<Eigen::VectorXd>& inputs,
                        double margin = 0.03) {
    for (size_t l = 0; l + 1 < critic.layers.size(); ++l) {
        std::vector<Eigen::VectorXd> zs;
        for (const auto& x : inputs) {
            Eigen::VectorXd a = x;
            for (size_t k = 0; k < l; ++k) {
                Eigen::VectorXd z = critic.layers[k].w * a + critic.layers[k].b;
                a = z.unaryExpr(
                    [s = critic.leaky_slope](double v) { return v > 0.0 ? v : s * v; });
            }
            zs.push_back(critic.layers[l].w * a + critic.layers[l].b);
        }
        for (Eigen::Index i = 0; i < critic.layers[l].b.size(); ++i) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& z : zs) {
                lo = std::min(lo, z[i]);
                hi = std::max(hi, z[i]);
            }
            if (lo >= margin || hi <= -margin) continue;
            if (lo > -margin && hi < margin && lo < 0.0 && hi > 0.0) return false;  // straddle
            const double push = (hi <= 0.0 || -lo > hi) ? (-margin - hi) : (margin - lo);
            if ((lo < 0.0 && lo + push < 0.0 && hi + push > 0.0) ||
                (hi > 0.0 && hi + push > 0.0 && lo + push < 0.0))
                return false;
            critic.layers[l].b[i] += push;
            for (auto& z : zs) z[i] += push;
        }
    }
    return true;
}

Eigen::VectorXd flat(const FeatureMap& f) {
    return Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
}

// --- criterion 1: metric oracles ---------------------------------------------

void criterion_1() {
    bool ok = true;
    ok &= std::abs(mse(vec({2, 2, 2}), vec({1, 2, 3})) - 2.0 / 3.0) < 1e-12;
    ok &= std::abs(mse(vec({4, 5, 6}), vec({1, 2, 3})) - 9.0) < 1e-12;
    ok &= mse(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0;
    ok &= std::abs(dc(vec({2, 2, 2}), vec({1, 2, 3}))) < 1e-12;
    ok &= dc(vec({1, 2, 3}), vec({1, 2, 3})) == 1.0;

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 100 && ok; ++trial) {
        const int n = 2 + static_cast<int>(u(rng) / 2);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = u(rng);
        if ((y.array() - y[0]).abs().maxCoeff() == 0.0) y[0] += 1.0;
        ok &= dc(y, y) == 1.0;
        ok &= std::abs(dc(Eigen::VectorXd::Constant(n, y.mean()), y)) < 1e-10;
    }
    criterion(1, "metric oracles", ok);
}

// --- criterion 2: gradient correctness ----------------------------------------

void criterion_2() {
    bool ok = true;
    std::string detail;
    ArchConfig arch;
    arch.critic_hidden = {16, 16};  // fewer hidden units -> controllable kink margins
    const int T = 12, d = 5;

    // Encoder: scalar loss = sum(W .* enc(x)), eval mode.
    {
        std::mt19937_64 rng(31);
        EncoderParams enc = init_encoder(arch, d, rng);
        Eigen::MatrixXd x = random_matrix(d, T, rng);
        const Eigen::MatrixXd W = random_matrix(36, T, rng);
        auto loss = [&]() { return (W.array() * encoder_forward(enc, x).array()).sum(); };
        EncoderParams grads = zeros_like(enc);
        EncoderActivations acts;
        encoder_forward(enc, x, false, nullptr, &acts);
        encoder_backward(enc, acts, W, grads);
        auto pv = parameter_view(enc);
        auto gv = parameter_view(grads);
        std::uniform_int_distribution<size_t> pick(0, pv.size() - 1);
        for (int i = 0; i < 25; ++i) {
            const size_t j = pick(rng);
            if (!close_rel(*gv[j], finite_difference(loss, pv[j]))) {
                ok = false;
                detail = "encoder";
            }
        }
    }

    // Head: the scalar prediction itself.
    {
        std::mt19937_64 rng(37);
        HeadParams head = init_head(arch, HeadMode::residual, rng);
        FeatureMap f = random_matrix(36, T, rng);
        const Eigen::VectorXd yh = random_matrix(T, 1, rng).col(0);
        auto loss = [&]() { return head_forward(head, f, yh); };
        HeadParams grads = zeros_like(head);
        HeadActivations acts;
        head_forward(head, f, yh, &acts);
        head_backward(head, acts, 1.0, grads);
        auto pv = parameter_view(head);
        auto gv = parameter_view(grads);
        std::uniform_int_distribution<size_t> pick(0, pv.size() - 1);
        for (int i = 0; i < 25; ++i) {
            const size_t j = pick(rng);
            if (!close_rel(*gv[j], finite_difference(loss, pv[j]))) {
                ok = false;
                detail = "head";
            }
        }
    }

    // Critic score, generator_loss, gradient_penalty, critic_loss: all against
    // finite differences over parameters, with kink-free probe neighborhoods.
    uint64_t seed = 41;
    CriticParams critic;
    std::vector<FeatureMap> f_target, f_source;
    std::vector<double> epsilons = {0.3, 0.8};
    for (;; ++seed) {
        std::mt19937_64 rng(seed);
        critic = init_critic(arch, 36 * 8, rng);
        for (auto& l : critic.layers)
            l.b = random_matrix(l.b.size(), 1, rng, 0.1).col(0);
        f_target = {random_matrix(36, 8, rng), random_matrix(36, 8, rng)};
        f_source = {random_matrix(36, 8, rng), random_matrix(36, 8, rng)};
        std::vector<Eigen::VectorXd> probes;
        for (const auto& f : f_target) probes.push_back(flat(f));
        for (const auto& f : f_source) probes.push_back(flat(f));
        for (size_t i = 0; i < f_target.size(); ++i)
            probes.push_back(flat((epsilons[i] * f_target[i] +
                                   (1.0 - epsilons[i]) * f_source[i]).eval()));
        if (ensure_kink_margin(critic, probes)) break;
    }
    const double inv_b = 1.0 / static_cast<double>(f_target.size());

    {
        std::mt19937_64 rng(43);
        // critic score on one input
        CriticParams grads = zeros_like(critic);
        critic_backward(critic, flat(f_target[0]), 1.0, grads);
        auto loss = [&]() { return critic_forward(critic, f_target[0]); };
        auto pv = parameter_view(critic);
        auto gv = parameter_view(grads);
        std::uniform_int_distribution<size_t> pick(0, pv.size() - 1);
        for (int i = 0; i < 25; ++i) {
            const size_t j = pick(rng);
            if (!close_rel(*gv[j], finite_difference(loss, pv[j]))) {
                ok = false;
                detail = "critic";
            }
        }

        // generator_loss = -mean critic score
        CriticParams ggrads = zeros_like(critic);
        for (const auto& f : f_target) critic_backward(critic, flat(f), -inv_b, ggrads);
        auto gloss = [&]() { return generator_loss(critic, f_target); };
        auto ggv = parameter_view(ggrads);
        for (int i = 0; i < 25; ++i) {
            const size_t j = pick(rng);
            if (!close_rel(*ggv[j], finite_difference(gloss, pv[j]))) {
                ok = false;
                detail = "generator_loss";
            }
        }

        // gradient_penalty (double backprop through the critic)
        CriticParams pgrads = zeros_like(critic);
        for (size_t i = 0; i < f_target.size(); ++i) {
            const FeatureMap interp =
                epsilons[i] * f_target[i] + (1.0 - epsilons[i]) * f_source[i];
            critic_penalty_backward(critic, flat(interp), inv_b, pgrads);
        }
        auto ploss = [&]() { return gradient_penalty(critic, f_source, f_target, epsilons); };
        auto pgv = parameter_view(pgrads);
        for (int i = 0; i < 25; ++i) {
            const size_t j = pick(rng);
            if (!close_rel(*pgv[j], finite_difference(ploss, pv[j]))) {
                ok = false;
                detail = "gradient_penalty";
            }
        }

        // full critic_loss with gp_weight 10
        const double w_gp = 10.0;
        CriticParams cgrads = zeros_like(critic);
        for (size_t i = 0; i < f_target.size(); ++i) {
            critic_backward(critic, flat(f_target[i]), inv_b, cgrads);
            critic_backward(critic, flat(f_source[i]), -inv_b, cgrads);
            const FeatureMap interp =
                epsilons[i] * f_target[i] + (1.0 - epsilons[i]) * f_source[i];
            critic_penalty_backward(critic, flat(interp), w_gp * inv_b, cgrads);
        }
        auto closs = [&]() { return critic_loss(critic, f_source, f_target, w_gp, epsilons); };
        auto cgv = parameter_view(cgrads);
        for (int i = 0; i < 25; ++i) {
            const size_t j = pick(rng);
            if (!close_rel(*cgv[j], finite_difference(closs, pv[j]))) {
                ok = false;
                detail = "critic_loss";
            }
        }
    }
    criterion(2, "gradient correctness", ok, detail);
}

// --- criterion 3: gradient-penalty analytics ------------------------------------

CriticParams linear_critic(const Eigen::VectorXd& w) {
    CriticParams p;
    p.leaky_slope = 1.0;  // identity activation: exactly linear
    CriticParams::Dense l0;
    l0.w = w.transpose();
    l0.b = Eigen::VectorXd::Zero(1);
    CriticParams::Dense l1;
    l1.w = Eigen::MatrixXd::Identity(1, 1);
    l1.b = Eigen::VectorXd::Zero(1);
    p.layers = {l0, l1};
    return p;
}

void criterion_3() {
    bool ok = true;
    const int n = 36 * 8;
    std::mt19937_64 rng(53);
    const FeatureMap probe = random_matrix(36, 8, rng);

    // Constant critic: gradient 0 -> penalty (0-1)^2 = 1.
    const CriticParams constant = linear_critic(Eigen::VectorXd::Zero(n));
    ok &= std::abs(gradient_penalty_value(constant, flat(probe)) - 1.0) <= 1e-10;

    // Unit-norm linear critic -> penalty 0.
    Eigen::VectorXd w = random_matrix(n, 1, rng).col(0);
    w /= w.norm();
    ok &= std::abs(gradient_penalty_value(linear_critic(w), flat(probe))) <= 1e-10;

    // D(x) = 2 * sum(x): gradient is the constant vector 2, norm 2*sqrt(n).
    const CriticParams doubler = linear_critic(Eigen::VectorXd::Constant(n, 2.0));
    const double expected = std::pow(2.0 * std::sqrt(static_cast<double>(n)) - 1.0, 2.0);
    ok &= close_rel(gradient_penalty_value(doubler, flat(probe)), expected, 1e-8);

    criterion(3, "gradient-penalty analytics", ok);
}

// --- criterion 4: causality ----------------------------------------------------

void criterion_4() {
    bool ok = true;
    ArchConfig arch;
    std::mt19937_64 rng(59);
    const int d = 5, T = 30;
    const EncoderParams enc = init_encoder(arch, d, rng);
    const Eigen::MatrixXd x = random_matrix(d, T, rng);
    const FeatureMap base = encoder_forward(enc, x);

    // No future influence: perturbing column t leaves outputs at columns < t
    // unchanged.
    for (int t : {5, 14, 29}) {
        Eigen::MatrixXd xp = x;
        xp.col(t).array() += 10.0;
        const FeatureMap out = encoder_forward(enc, xp);
        if (t > 0 &&
            (out.leftCols(t) - base.leftCols(t)).cwiseAbs().maxCoeff() > 1e-10)
            ok = false;
    }

    // Finite receptive field: the last output ignores inputs older than 8 steps.
    ok &= enc.receptive_field() == 8;
    Eigen::MatrixXd occluded = x;
    occluded.leftCols(T - 8) = random_matrix(d, T - 8, rng);
    const FeatureMap out = encoder_forward(enc, occluded);
    ok &= (out.col(T - 1) - base.col(T - 1)).cwiseAbs().maxCoeff() <= 1e-10;
    // ...and inputs inside the receptive field do matter.
    Eigen::MatrixXd inside = x;
    inside.col(T - 2).array() += 1.0;
    ok &= (encoder_forward(enc, inside).col(T - 1) - base.col(T - 1)).cwiseAbs().maxCoeff() > 0.0;

    criterion(4, "causality and receptive field", ok);
}

// --- criteria 5-9, 11: pipeline runs -------------------------------------------

const char* kAcceptConfig = R"({
  "train": {"epochs": 60},
  "adapt": {"epochs": 30},
  "fewshot": {"hours": [50, 100, 200, 400, 800], "repeats": 20, "epochs": 30},
  "synth": {"source": {"series_length": 2500}, "target": {"series_length": 2500}}
})";

const char* kTinyConfig = R"({
  "train": {"epochs": 4},
  "adapt": {"epochs": 3},
  "synth": {"source": {"series_length": 700}, "target": {"series_length": 700}}
})";

struct SeedRun {
    fs::path dir;
    bool ok = false;
    double dc_supervised = 0.0, dc_adapted = 0.0, dc_lower = 0.0;
    double align_before = 0.0, align_after = 0.0;
    double ratio_first = 0.0, ratio_last = 0.0;
};

SeedRun run_pipeline_seed(const fs::path& cfg_path, uint64_t seed) {
    SeedRun r;
    r.dir = g_work / ("seed_" + std::to_string(seed));
    fs::create_directories(r.dir);
    const std::string base = "--config " + cfg_path.string() + " --out " + r.dir.string() +
                             " --seed " + std::to_string(seed);
    const std::string src = (r.dir / "source.csv").string();
    const std::string tgt = (r.dir / "target.csv").string();
    if (run_cli("synth " + base) != 0) return r;
    if (run_cli("pretrain " + base + " --source " + src) != 0) return r;
    if (run_cli("adapt " + base + " --source " + src + " --target " + tgt) != 0) return r;
    if (run_cli("evaluate " + base + " --target " + tgt) != 0) return r;
    // Fully supervised on the target: same trainer, target file as the source.
    fs::create_directories(r.dir / "sup");
    if (run_cli("pretrain --config " + cfg_path.string() + " --out " + (r.dir / "sup").string() +
                " --seed " + std::to_string(seed) + " --source " + tgt) != 0)
        return r;

    r.dc_adapted = read_json(r.dir / "report_spliced.json").at("dc").get<double>();
    r.dc_lower = read_json(r.dir / "report_lower_bound.json").at("dc").get<double>();
    r.dc_supervised = read_json(r.dir / "sup" / "report_pretrain.json").at("dc").get<double>();
    const json align = read_json(r.dir / "alignment.json");
    r.align_before = align.at("before").at("distance").get<double>();
    r.align_after = align.at("after").at("distance").get<double>();
    const TrainTrace trace = read_trace((r.dir / "adapt_trace.jsonl").string());
    if (trace.epochs.empty() || !trace.epochs.front().probe_ratio ||
        !trace.epochs.back().probe_ratio)
        return r;
    r.ratio_first = *trace.epochs.front().probe_ratio;
    r.ratio_last = *trace.epochs.back().probe_ratio;
    r.ok = true;
    return r;
}

void criterion_5() {
    // Full-scale stage-1 capability: d=11, L=6000, default 100-epoch config.
    const fs::path dir = g_work / "full_source";
    fs::create_directories(dir);
    bool ok = run_cli("synth --out " + dir.string() + " --seed 2024") == 0 &&
              run_cli("pretrain --out " + dir.string() + " --seed 2024 --source " +
                      (dir / "source.csv").string()) == 0;
    double dc_sup = 0.0, dc_lb = 0.0;
    if (ok) {
        dc_sup = read_json(dir / "report_pretrain.json").at("dc").get<double>();
        dc_lb = read_json(dir / "report_pretrain_lower_bound.json").at("dc").get<double>();
        ok = dc_sup >= 0.70 && dc_sup > dc_lb;
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "DC %.4f vs lower bound %.4f", dc_sup, dc_lb);
    criterion(5, "stage-1 capability (d=11, L=6000)", ok, detail);
}

void criteria_6_7_8_9(const std::vector<SeedRun>& runs) {
    // 6: ordering supervised >= adapted > lower, gap >= 0.03, for >=2/3 seeds.
    int ordering_ok = 0;
    std::string detail6;
    for (const SeedRun& r : runs) {
        const bool seed_ok = r.ok && r.dc_supervised >= r.dc_adapted &&
                             r.dc_adapted > r.dc_lower && r.dc_adapted - r.dc_lower >= 0.03;
        ordering_ok += seed_ok ? 1 : 0;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "[sup %.3f / adapt %.3f / lower %.3f] ",
                      r.dc_supervised, r.dc_adapted, r.dc_lower);
        detail6 += buf;
    }
    criterion(6, "stage-2 DC ordering (2/3 seeds)", ordering_ok >= 2, detail6);

    // 7: alignment distance strictly decreases, all 3 seeds.
    bool align_ok = true;
    std::string detail7;
    for (const SeedRun& r : runs) {
        align_ok &= r.ok && r.align_after < r.align_before;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "[%.1f -> %.1f] ", r.align_before, r.align_after);
        detail7 += buf;
    }
    criterion(7, "feature alignment improves (3/3 seeds)", align_ok, detail7);

    // 8: |mean(Y/Y-hat) - 1| shrinks from the first to the last adaptation
    // epoch for >=2/3 seeds.
    int ratio_ok = 0;
    std::string detail8;
    for (const SeedRun& r : runs) {
        ratio_ok += (r.ok && std::abs(r.ratio_last - 1.0) < std::abs(r.ratio_first - 1.0)) ? 1 : 0;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "[%.3f -> %.3f] ", r.ratio_first, r.ratio_last);
        detail8 += buf;
    }
    criterion(8, "probe ratio improves (2/3 seeds)", ratio_ok >= 2, detail8);

    // 9: few-shot sweep on the first seed's run; the adapted model's DC must
    // fall strictly inside the sweep's DC range.
    bool ok9 = false;
    std::string detail9 = "pipeline run failed";
    if (!runs.empty() && runs[0].ok) {
        const fs::path dir = runs[0].dir;
        const fs::path cfg_path = g_work / "accept_config.json";
        ok9 = run_cli("fewshot --config " + cfg_path.string() + " --out " + dir.string() +
                      " --seed 100 --target " + (dir / "target.csv").string()) == 0;
        if (ok9) {
            int files = 0;
            for (int h : {50, 100, 200, 400, 800}) {
                const fs::path p = dir / ("fewshot_" + std::to_string(h) + ".json");
                if (fs::exists(p) &&
                    read_json(p).at("dc_per_repeat").get<std::vector<double>>().size() == 20)
                    ++files;
            }
            const json eq = read_json(dir / "equivalence.json");
            ok9 = files == 5 && eq.at("in_range").get<bool>();
            char buf[128];
            std::snprintf(buf, sizeof(buf), "interval [%.0f, %.0f] h for DC %.3f",
                          eq.at("hours_low").get<double>(), eq.at("hours_high").get<double>(),
                          eq.at("unsupervised_dc").get<double>());
            detail9 = buf;
        }
    }
    criterion(9, "few-shot equivalence interval", ok9, detail9);
}

// --- criterion 10: freeze + label firewall ---------------------------------------

std::vector<WindowedSample> synthetic_windows(int d, int length, uint64_t seed, bool labeled) {
    SyntheticConfig cfg;
    cfg.station_count = d;
    cfg.series_length = length;
    cfg.seed = seed;
    const HydroSeries s = generate_synthetic(cfg);
    const Normalizer n = Normalizer::fit(s);
    return make_windows(n.apply(s), WindowConfig{24, 6}, labeled);
}

void criterion_10() {
    bool ok = true;
    ArchConfig arch;
    std::mt19937_64 rng(71);
    const auto source = synthetic_windows(4, 400, 10, true);
    auto clean = synthetic_windows(3, 300, 11, true);
    auto poisoned = clean;
    for (auto& s : poisoned) s.y = std::numeric_limits<double>::quiet_NaN();

    AdaptConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 5;
    EncoderParams source_encoder = init_encoder(arch, 4, rng);
    const uint64_t checksum_before = parameter_checksum(source_encoder);

    const AdaptResult a = adapt(clean, source, source_encoder, cfg, arch);
    const AdaptResult b = adapt(poisoned, source, source_encoder, cfg, arch);

    // Source encoder untouched by adaptation.
    ok &= parameter_checksum(source_encoder) == checksum_before;
    // Poisoned labels change nothing: no label reaches any gradient.
    ok &= parameter_checksum(a.target_encoder) == parameter_checksum(b.target_encoder);
    auto view = parameter_view(const_cast<EncoderParams&>(b.target_encoder));
    for (double* p : view) ok &= std::isfinite(*p);

    criterion(10, "encoder freeze + label firewall", ok);
}

// --- criterion 11: determinism + persistence --------------------------------------

void criterion_11() {
    bool ok = true;
    std::string detail;
    const fs::path cfg_path = g_work / "tiny_config.json";
    {
        std::ofstream out(cfg_path);
        out << kTinyConfig;
    }
    const fs::path dir = g_work / "repro";
    fs::create_directories(dir);
    const std::string base = "--config " + cfg_path.string() + " --out " + dir.string() +
                             " --seed 99";
    const std::string src = (dir / "source.csv").string();
    const std::string tgt = (dir / "target.csv").string();

    auto chain = [&]() {
        return run_cli("synth " + base) == 0 &&
               run_cli("pretrain " + base + " --source " + src) == 0 &&
               run_cli("adapt " + base + " --source " + src + " --target " + tgt) == 0 &&
               run_cli("evaluate " + base + " --target " + tgt) == 0;
    };
    ok &= chain();
    std::map<std::string, std::string> first;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.find("manifest") != std::string::npos) continue;
        first[name] = slurp(e.path());
    }
    ok &= chain();  // identical rerun in the same directory
    for (const auto& [name, bytes] : first) {
        if (slurp(dir / name) != bytes) {
            ok = false;
            detail = "rerun differs: " + name;
        }
    }

    // Checkpoint round-trip is bitwise-lossless.
    const Checkpoint loaded = load_checkpoint((dir / "adapt.ckpt").string());
    save_checkpoint(loaded, (dir / "adapt_roundtrip.ckpt").string());
    if (slurp(dir / "adapt.ckpt") != slurp(dir / "adapt_roundtrip.ckpt")) {
        ok = false;
        detail = "checkpoint round-trip differs";
    }

    // The dependency contract: evaluate without an adapt checkpoint fails with
    // a nonzero exit.
    const fs::path empty = g_work / "empty";
    fs::create_directories(empty);
    ok &= run_cli("evaluate --out " + empty.string() + " --target " + tgt +
                  " 2>/dev/null") != 0;

    criterion(11, "determinism + checkpoint persistence", ok, detail);
}

// --- criterion 12: optional real-data path ----------------------------------------

void criterion_12() {
    const char* src = std::getenv("FLOODDAN_REAL_SOURCE");
    const char* tgt = std::getenv("FLOODDAN_REAL_TARGET");
    if (!src || !tgt) {
        criterion(12, "real-data path", true, "skipped: no real data supplied");
        return;
    }
    const fs::path dir = g_work / "real";
    fs::create_directories(dir);
    const std::string base = "--out " + dir.string() + " --seed 1";
    bool ok = run_cli("pretrain " + base + " --source " + std::string(src)) == 0 &&
              run_cli("adapt " + base + " --source " + std::string(src) + " --target " +
                      std::string(tgt)) == 0 &&
              run_cli("evaluate " + base + " --target " + std::string(tgt)) == 0 &&
              fs::exists(dir / "report_spliced.json");
    criterion(12, "real-data path", ok);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-flooddan-cli>\n";
        return 2;
    }
    g_cli = argv[1];
    g_work = fs::temp_directory_path() / "flooddan_acceptance";
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();

    {
        const fs::path cfg_path = g_work / "accept_config.json";
        std::ofstream out(cfg_path);
        out << kAcceptConfig;
        out.close();
        std::vector<SeedRun> runs;
        for (uint64_t seed : {100, 200, 300})
            runs.push_back(run_pipeline_seed(cfg_path, seed));
        criteria_6_7_8_9(runs);
    }

    criterion_10();
    criterion_11();
    criterion_12();

    std::printf("acceptance: %s\n", g_all_pass ? "ALL PASS" : "FAILURES PRESENT");
    return g_all_pass ? 0 : 1;
}
