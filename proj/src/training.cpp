#include "flooddan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "flooddan/errors.hpp"

namespace flooddan {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline Eigen::Map<const Eigen::VectorXd> flat(const FeatureMap& f) {
    return {f.data(), f.size()};
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) fail(ErrorCategory::config, "epochs must be >= 1");
    if (batch_size < 1) fail(ErrorCategory::config, "batch_size must be >= 1");
    if (learning_rate <= 0.0) fail(ErrorCategory::config, "learning_rate must be > 0");
    if (weight_decay < 0.0) fail(ErrorCategory::config, "weight_decay must be >= 0");
}

void AdaptConfig::validate() const {
    TrainConfig::validate();
    if (gp_weight < 0.0) fail(ErrorCategory::config, "gp_weight must be >= 0");
    if (critic_steps < 1) fail(ErrorCategory::config, "critic_steps must be >= 1");
}

double cosine_lr(double base_lr, int64_t step, int64_t total_steps) {
    if (total_steps <= 1) return base_lr;
    const double phase = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * std::min(phase, 1.0)));
}

void write_trace(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write trace '" + path + "'");
    for (const auto& e : trace.epochs) {
        // wall_seconds stays in memory only: serialized artifacts must be
        // byte-identical across reruns, and wall clock lives in the manifest.
        nlohmann::json j{{"epoch", e.epoch},
                         {"loss", e.loss},
                         {"loss_g", e.loss_g},
                         {"loss_d", e.loss_d},
                         {"lr", e.learning_rate}};
        if (e.probe_ratio) j["probe_ratio"] = *e.probe_ratio;
        out << j.dump() << '\n';
    }
}

TrainTrace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open trace '" + path + "'");
    TrainTrace trace;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCategory::parse,
                 "trace '" + path + "' line " + std::to_string(lineno) + ": " + e.what());
        }
        EpochRecord r;
        r.epoch = j.value("epoch", 0);
        r.loss = j.value("loss", 0.0);
        r.loss_g = j.value("loss_g", 0.0);
        r.loss_d = j.value("loss_d", 0.0);
        r.learning_rate = j.value("lr", 0.0);
        r.wall_seconds = j.value("wall_seconds", 0.0);
        if (j.contains("probe_ratio")) r.probe_ratio = j["probe_ratio"].get<double>();
        trace.epochs.push_back(r);
    }
    if (trace.epochs.empty())
        fail(ErrorCategory::parse, "trace '" + path + "' has no records (line 1)");
    return trace;
}

AdamW::AdamW(size_t n_params, double beta1, double beta2, double eps)
    : m_(n_params, 0.0), v_(n_params, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(const std::vector<double*>& params, const std::vector<double*>& grads, double lr,
                 double weight_decay) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        fail(ErrorCategory::dimension, "optimizer state size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = *grads[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        *params[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps_) + weight_decay * *params[i]);
    }
}

RMSprop::RMSprop(size_t n_params, double alpha, double eps)
    : v_(n_params, 0.0), alpha_(alpha), eps_(eps) {}

void RMSprop::step(const std::vector<double*>& params, const std::vector<double*>& grads,
                   double lr, double weight_decay) {
    if (params.size() != v_.size() || grads.size() != v_.size())
        fail(ErrorCategory::dimension, "optimizer state size mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = *grads[i];
        v_[i] = alpha_ * v_[i] + (1.0 - alpha_) * g * g;
        *params[i] -= lr * (g / (std::sqrt(v_[i]) + eps_) + weight_decay * *params[i]);
    }
}

PretrainResult pretrain(const std::vector<WindowedSample>& source_train, const TrainConfig& cfg,
                        const ArchConfig& arch, HeadMode mode) {
    cfg.validate();
    if (source_train.empty()) fail(ErrorCategory::size, "pretrain needs a non-empty dataset");
    for (const auto& s : source_train)
        if (!s.y) fail(ErrorCategory::data, "pretrain needs labeled samples");

    const int d = static_cast<int>(source_train[0].x.rows());
    const int T = static_cast<int>(source_train[0].x.cols());

    std::mt19937_64 init_rng(mix_seed(cfg.seed, 0));
    PretrainResult result;
    result.encoder = init_encoder(arch, d, init_rng);
    result.head = init_head(arch, mode, init_rng);

    auto enc_view = parameter_view(result.encoder);
    auto head_view = parameter_view(result.head);
    std::vector<double*> params = enc_view;
    params.insert(params.end(), head_view.begin(), head_view.end());
    AdamW optimizer(params.size());

    const int64_t n = static_cast<int64_t>(source_train.size());
    const int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const int64_t total_steps = steps_per_epoch * cfg.epochs;

    std::vector<size_t> order(source_train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 dropout_rng(mix_seed(cfg.seed, 1));

    const auto start = std::chrono::steady_clock::now();
    int64_t step = 0;
    double last_finite_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 1000 + static_cast<uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        double last_lr = 0.0;
        for (int64_t b = 0; b < steps_per_epoch; ++b, ++step) {
            const int64_t lo = b * cfg.batch_size;
            const int64_t hi = std::min<int64_t>(lo + cfg.batch_size, n);
            const double inv_b = 1.0 / static_cast<double>(hi - lo);

            EncoderParams enc_grads = zeros_like(result.encoder);
            HeadParams head_grads = zeros_like(result.head);
            double batch_loss = 0.0;
            for (int64_t i = lo; i < hi; ++i) {
                const WindowedSample& s = source_train[order[static_cast<size_t>(i)]];
                EncoderActivations enc_acts;
                HeadActivations head_acts;
                const FeatureMap features =
                    encoder_forward(result.encoder, s.x, true, &dropout_rng, &enc_acts);
                const double pred = head_forward(result.head, features, s.y_history, &head_acts);
                const double err = pred - *s.y;
                batch_loss += err * err * inv_b;
                const Eigen::MatrixXd d_features =
                    head_backward(result.head, head_acts, 2.0 * err * inv_b, head_grads);
                encoder_backward(result.encoder, enc_acts, d_features, enc_grads);
            }
            if (!std::isfinite(batch_loss))
                fail(ErrorCategory::divergence,
                     "non-finite loss at step " + std::to_string(step) + " (last finite " +
                         std::to_string(last_finite_loss) + ")");
            last_finite_loss = batch_loss;

            auto eg = parameter_view(enc_grads);
            auto hg = parameter_view(head_grads);
            std::vector<double*> grads = eg;
            grads.insert(grads.end(), hg.begin(), hg.end());
            last_lr = cosine_lr(cfg.learning_rate, step, total_steps);
            optimizer.step(params, grads, last_lr, cfg.weight_decay);

            epoch_loss += batch_loss;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = epoch_loss / static_cast<double>(steps_per_epoch);
        rec.learning_rate = last_lr;
        rec.wall_seconds = elapsed_seconds(start);
        result.trace.epochs.push_back(rec);
        (void)T;
    }
    return result;
}

double generator_loss(const CriticParams& critic, const std::vector<FeatureMap>& target_features) {
    if (target_features.empty()) fail(ErrorCategory::size, "generator_loss needs a non-empty batch");
    double sum = 0.0;
    for (const auto& f : target_features) sum += critic_forward(critic, f);
    return -sum / static_cast<double>(target_features.size());
}

double gradient_penalty(const CriticParams& critic, const std::vector<FeatureMap>& source_features,
                        const std::vector<FeatureMap>& target_features,
                        const std::vector<double>& epsilons) {
    if (source_features.size() != target_features.size() ||
        source_features.size() != epsilons.size())
        fail(ErrorCategory::size, "gradient_penalty batches must have equal sizes");
    if (source_features.empty()) fail(ErrorCategory::size, "gradient_penalty needs a non-empty batch");
    double sum = 0.0;
    for (size_t i = 0; i < source_features.size(); ++i) {
        const FeatureMap interp =
            epsilons[i] * target_features[i] + (1.0 - epsilons[i]) * source_features[i];
        sum += gradient_penalty_value(critic, flat(interp));
    }
    return sum / static_cast<double>(source_features.size());
}

double critic_loss(const CriticParams& critic, const std::vector<FeatureMap>& source_features,
                   const std::vector<FeatureMap>& target_features, double gp_weight,
                   const std::vector<double>& epsilons) {
    if (source_features.size() != target_features.size())
        fail(ErrorCategory::size, "critic_loss batches must have equal sizes");
    double score_gap = 0.0;
    for (size_t i = 0; i < source_features.size(); ++i)
        score_gap += critic_forward(critic, target_features[i]) -
                     critic_forward(critic, source_features[i]);
    score_gap /= static_cast<double>(source_features.size());
    return score_gap + gp_weight * gradient_penalty(critic, source_features, target_features, epsilons);
}

namespace {

// Deterministic shuffled index stream that reshuffles when exhausted.
class IndexStream {
public:
    IndexStream(size_t n, uint64_t seed) : order_(n), rng_(seed) {
        std::iota(order_.begin(), order_.end(), 0);
        std::shuffle(order_.begin(), order_.end(), rng_);
    }

    size_t next() {
        if (pos_ == order_.size()) {
            std::shuffle(order_.begin(), order_.end(), rng_);
            pos_ = 0;
        }
        return order_[pos_++];
    }

private:
    std::vector<size_t> order_;
    std::mt19937_64 rng_;
    size_t pos_ = 0;
};

double probe_ratio_statistic(const ProbeContext& probe, const EncoderParams& target_encoder) {
    double sum = 0.0;
    size_t count = 0;
    for (const auto& s : *probe.samples) {
        if (!s.y) continue;
        const FeatureMap features = encoder_forward(target_encoder, s.x);
        const double pred_norm = head_forward(*probe.head, features, s.y_history);
        const double pred = probe.normalizer->denormalize_runoff(pred_norm);
        const double truth = probe.normalizer->denormalize_runoff(*s.y);
        if (pred != 0.0) {
            sum += truth / pred;
            ++count;
        }
    }
    return count > 0 ? sum / static_cast<double>(count) : std::nan("");
}

}  // namespace

EncoderParams init_target_encoder(const EncoderParams& source_encoder, const ArchConfig& arch,
                                  int target_stations, const AdaptConfig& cfg) {
    std::mt19937_64 init_rng(mix_seed(cfg.seed, 2));
    if (cfg.warm_start) {
        // Copy the pretrained encoder; only the first layer is re-initialized
        // when the station counts differ.
        EncoderParams enc = source_encoder;
        if (target_stations != static_cast<int>(source_encoder.input_channels())) {
            const EncoderParams fresh = init_encoder(arch, target_stations, init_rng);
            enc.layers[0] = fresh.layers[0];
            enc.skip_proj[0] = fresh.skip_proj[0];
        }
        return enc;
    }
    return init_encoder(arch, target_stations, init_rng);
}

AdaptResult adapt(const std::vector<WindowedSample>& target_train,
                  const std::vector<WindowedSample>& source_train,
                  const EncoderParams& source_encoder, const AdaptConfig& cfg,
                  const ArchConfig& arch, const ProbeContext& probe) {
    cfg.validate();
    if (target_train.empty() || source_train.empty())
        fail(ErrorCategory::size, "adapt needs non-empty source and target datasets");

    const int d_target = static_cast<int>(target_train[0].x.rows());
    const int T = static_cast<int>(target_train[0].x.cols());

    AdaptResult result;
    result.target_encoder = init_target_encoder(source_encoder, arch, d_target, cfg);
    std::mt19937_64 critic_rng(mix_seed(cfg.seed, 6));
    result.critic = init_critic(arch, arch.encoder_channels * T, critic_rng);

    auto enc_params = parameter_view(result.target_encoder);
    auto critic_params = parameter_view(result.critic);
    RMSprop enc_opt(enc_params.size());
    RMSprop critic_opt(critic_params.size());

    const int64_t gen_steps_per_epoch =
        std::max<int64_t>(1, static_cast<int64_t>(target_train.size()) / cfg.batch_size);
    const int64_t total_gen_steps = gen_steps_per_epoch * cfg.epochs;
    const int64_t total_critic_steps = total_gen_steps * cfg.critic_steps;

    IndexStream target_stream(target_train.size(), mix_seed(cfg.seed, 3));
    IndexStream source_stream(source_train.size(), mix_seed(cfg.seed, 4));
    std::mt19937_64 eps_rng(mix_seed(cfg.seed, 5));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const size_t B = static_cast<size_t>(
        std::min<int64_t>(cfg.batch_size,
                          static_cast<int64_t>(std::min(target_train.size(), source_train.size()))));
    const double inv_b = 1.0 / static_cast<double>(B);

    const auto start = std::chrono::steady_clock::now();
    int64_t gen_step = 0;
    int64_t critic_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_g = 0.0;
        double epoch_d = 0.0;
        double last_lr = 0.0;
        for (int64_t gs = 0; gs < gen_steps_per_epoch; ++gs, ++gen_step) {
            for (int cs = 0; cs < cfg.critic_steps; ++cs, ++critic_step) {
                CriticParams grads = zeros_like(result.critic);
                double loss_d = 0.0;
                double penalty_sum = 0.0;
                for (size_t i = 0; i < B; ++i) {
                    const WindowedSample& ts = target_train[target_stream.next()];
                    const WindowedSample& ss = source_train[source_stream.next()];
                    const FeatureMap f_target = encoder_forward(result.target_encoder, ts.x);
                    const FeatureMap f_source = encoder_forward(source_encoder, ss.x);
                    loss_d += (critic_forward(result.critic, f_target) -
                               critic_forward(result.critic, f_source)) *
                              inv_b;
                    critic_backward(result.critic, flat(f_target), inv_b, grads);
                    critic_backward(result.critic, flat(f_source), -inv_b, grads);
                    const double eps = unit(eps_rng);
                    const FeatureMap interp = eps * f_target + (1.0 - eps) * f_source;
                    penalty_sum += critic_penalty_backward(result.critic, flat(interp),
                                                           cfg.gp_weight * inv_b, grads);
                }
                loss_d += cfg.gp_weight * penalty_sum * inv_b;
                if (!std::isfinite(loss_d))
                    fail(ErrorCategory::divergence,
                         "non-finite critic loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(critic_step));
                const double lr = cosine_lr(cfg.learning_rate, critic_step, total_critic_steps);
                critic_opt.step(critic_params, parameter_view(grads), lr, cfg.weight_decay);
                epoch_d += loss_d;
            }

            EncoderParams enc_grads = zeros_like(result.target_encoder);
            double loss_g = 0.0;
            for (size_t i = 0; i < B; ++i) {
                const WindowedSample& ts = target_train[target_stream.next()];
                EncoderActivations acts;
                const FeatureMap f_target =
                    encoder_forward(result.target_encoder, ts.x, false, nullptr, &acts);
                loss_g -= critic_forward(result.critic, f_target) * inv_b;
                const Eigen::VectorXd g = critic_input_gradient(result.critic, flat(f_target));
                const Eigen::MatrixXd d_features =
                    -inv_b * Eigen::Map<const Eigen::MatrixXd>(g.data(), f_target.rows(),
                                                               f_target.cols());
                encoder_backward(result.target_encoder, acts, d_features, enc_grads);
            }
            if (!std::isfinite(loss_g))
                fail(ErrorCategory::divergence,
                     "non-finite generator loss at epoch " + std::to_string(epoch) + ", step " +
                         std::to_string(gen_step));
            last_lr = cosine_lr(cfg.learning_rate, gen_step, total_gen_steps);
            enc_opt.step(enc_params, parameter_view(enc_grads), last_lr, cfg.weight_decay);
            epoch_g += loss_g;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_g = epoch_g / static_cast<double>(gen_steps_per_epoch);
        rec.loss_d = epoch_d / static_cast<double>(gen_steps_per_epoch * cfg.critic_steps);
        rec.learning_rate = last_lr;
        rec.wall_seconds = elapsed_seconds(start);
        if (probe.samples && probe.head && probe.normalizer)
            rec.probe_ratio = probe_ratio_statistic(probe, result.target_encoder);
        result.trace.epochs.push_back(rec);
    }
    return result;
}

}  // namespace flooddan
