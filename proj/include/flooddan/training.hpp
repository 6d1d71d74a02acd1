#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flooddan/models.hpp"
#include "flooddan/series.hpp"

namespace flooddan {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 5e-4;
    double weight_decay = 8e-3;
    uint64_t seed = 0;

    void validate() const;
};

struct AdaptConfig : TrainConfig {
    double gp_weight = 10.0;  // w_GP
    int critic_steps = 5;     // critic updates per generator update
    bool warm_start = true;   // initialize target encoder from the source encoder

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;    // stage 1 MSE
    double loss_g = 0.0;  // stage 2 generator loss
    double loss_d = 0.0;  // stage 2 critic loss
    double learning_rate = 0.0;
    std::optional<double> probe_ratio;  // mean(Y / Y_hat) on the labeled probe
    double wall_seconds = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
};

// One record per epoch, line-delimited JSON.
void write_trace(const TrainTrace& trace, const std::string& path);
TrainTrace read_trace(const std::string& path);

// Cosine decay to zero: full learning rate at step 0, zero at the last step.
double cosine_lr(double base_lr, int64_t step, int64_t total_steps);

// --- optimizers ----------------------------------------------------------

// Decoupled weight decay in both optimizers: the decay term never enters the
// moment estimates.
class AdamW {
public:
    explicit AdamW(size_t n_params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const std::vector<double*>& params, const std::vector<double*>& grads, double lr,
              double weight_decay);

private:
    std::vector<double> m_, v_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

class RMSprop {
public:
    explicit RMSprop(size_t n_params, double alpha = 0.99, double eps = 1e-8);
    void step(const std::vector<double*>& params, const std::vector<double*>& grads, double lr,
              double weight_decay);

private:
    std::vector<double> v_;
    double alpha_, eps_;
};

// --- stage 1: supervised pretraining -------------------------------------

struct PretrainResult {
    EncoderParams encoder;
    HeadParams head;
    TrainTrace trace;
};

// Minimizes batch-mean squared error with AdamW under a cosine schedule.
// Deterministic given cfg.seed and the dataset order.
PretrainResult pretrain(const std::vector<WindowedSample>& source_train, const TrainConfig& cfg,
                        const ArchConfig& arch, HeadMode mode = HeadMode::residual);

// --- stage 2: adversarial adaptation -------------------------------------

// Batch losses, exposed for testing. Both use batch means; the gradient
// penalty interpolates F~ = eps*F_target + (1-eps)*F_source per sample.
double generator_loss(const CriticParams& critic, const std::vector<FeatureMap>& target_features);

double gradient_penalty(const CriticParams& critic, const std::vector<FeatureMap>& source_features,
                        const std::vector<FeatureMap>& target_features,
                        const std::vector<double>& epsilons);

double critic_loss(const CriticParams& critic, const std::vector<FeatureMap>& source_features,
                   const std::vector<FeatureMap>& target_features, double gp_weight,
                   const std::vector<double>& epsilons);

// Labeled target samples used only for the per-epoch ratio diagnostic; they
// never contribute to any gradient.
struct ProbeContext {
    const std::vector<WindowedSample>* samples = nullptr;
    const HeadParams* head = nullptr;
    const Normalizer* normalizer = nullptr;
};

struct AdaptResult {
    EncoderParams target_encoder;
    CriticParams critic;
    TrainTrace trace;
};

// The target encoder exactly as `adapt` initializes it (warm start copies
// the source encoder and re-initializes layer 1 when the station counts
// differ). Exposed so diagnostics can measure the pre-adaptation state.
EncoderParams init_target_encoder(const EncoderParams& source_encoder, const ArchConfig& arch,
                                  int target_stations, const AdaptConfig& cfg);

// WGAN-GP alternating optimization with RMSprop. The source encoder is
// frozen; only the target encoder (generator) and the critic are updated.
AdaptResult adapt(const std::vector<WindowedSample>& target_train,
                  const std::vector<WindowedSample>& source_train,
                  const EncoderParams& source_encoder, const AdaptConfig& cfg,
                  const ArchConfig& arch, const ProbeContext& probe = {});

}  // namespace flooddan
