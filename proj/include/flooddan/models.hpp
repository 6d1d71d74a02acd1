#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace flooddan {

// Feature map produced by the encoder: (channels, T).
using FeatureMap = Eigen::MatrixXd;

// Causal dilated 1-D convolution. Weights are stored as one (out, in) matrix
// per kernel tap; tap k reads input at offset -dilation*(K-1-k), so the last
// tap is the current time step.
struct ConvLayer {
    std::vector<Eigen::MatrixXd> w;  // K matrices, each (out, in)
    Eigen::VectorXd b;               // (out)
    int dilation = 1;

    Eigen::Index out_channels() const { return b.size(); }
    Eigen::Index in_channels() const { return w.empty() ? 0 : w[0].cols(); }
    int kernel_size() const { return static_cast<int>(w.size()); }
};

struct ArchConfig {
    int encoder_layers = 3;
    int encoder_channels = 36;
    int encoder_kernel = 2;
    double dropout = 0.2;
    int head_channels = 36;
    std::vector<int> critic_hidden = {128, 128};
    double critic_slope = 0.2;
};

// Three dilated causal TCN blocks (conv -> ReLU -> dropout -> additive skip,
// 1x1-projected where channel counts differ). Dilations 1, 2, 4; receptive
// field 8.
struct EncoderParams {
    std::vector<ConvLayer> layers;
    std::vector<Eigen::MatrixXd> skip_proj;  // per layer; 0x0 when identity skip
    double dropout = 0.2;

    Eigen::Index input_channels() const { return layers.empty() ? 0 : layers[0].in_channels(); }
    Eigen::Index output_channels() const { return layers.empty() ? 0 : layers.back().out_channels(); }
    int receptive_field() const;
};

enum class HeadMode { direct, residual };

// Prediction head: concat(features, y_history) -> conv(K=2) -> ReLU ->
// conv(K=2) -> ReLU -> conv(K=3, 1 channel); the scalar is the last time
// step, plus y_history[T-1] in residual mode.
struct HeadParams {
    std::vector<ConvLayer> layers;  // 3 layers, no skips
    HeadMode mode = HeadMode::residual;

    Eigen::Index input_channels() const { return layers.empty() ? 0 : layers[0].in_channels(); }
};

// Wasserstein critic: flattened feature map through dense layers with
// leaky-ReLU hidden activations and a linear scalar output.
struct CriticParams {
    struct Dense {
        Eigen::MatrixXd w;  // (out, in)
        Eigen::VectorXd b;
    };
    std::vector<Dense> layers;
    double leaky_slope = 0.2;

    Eigen::Index input_size() const { return layers.empty() ? 0 : layers[0].w.cols(); }
};

struct ModelBundle {
    EncoderParams encoder;
    HeadParams head;
    CriticParams critic;  // empty before stage 2
    ArchConfig arch;
    int station_count = 0;
    int window_length = 0;
};

// Uniform enumeration of every parameter tensor (biases as n-by-1 views are
// not possible with Eigen refs, so biases are visited as VectorXd&).
struct TensorVisitor {
    std::function<void(const std::string&, Eigen::MatrixXd&)> matrix;
    std::function<void(const std::string&, Eigen::VectorXd&)> vector;
};
void visit_tensors(EncoderParams& p, const std::string& prefix, const TensorVisitor& v);
void visit_tensors(HeadParams& p, const std::string& prefix, const TensorVisitor& v);
void visit_tensors(CriticParams& p, const std::string& prefix, const TensorVisitor& v);

// Flat list of every scalar parameter, used by optimizers and checksums.
std::vector<double*> parameter_view(EncoderParams& p);
std::vector<double*> parameter_view(HeadParams& p);
std::vector<double*> parameter_view(CriticParams& p);

uint64_t parameter_checksum(const EncoderParams& p);

// --- initialization ------------------------------------------------------

EncoderParams init_encoder(const ArchConfig& arch, int input_channels, std::mt19937_64& rng);
HeadParams init_head(const ArchConfig& arch, HeadMode mode, std::mt19937_64& rng);
CriticParams init_critic(const ArchConfig& arch, int input_size, std::mt19937_64& rng);

// Encoder + head (+ critic sized for flattened (channels, T) features).
ModelBundle init_params(const ArchConfig& arch, int station_count, int window_length,
                        HeadMode mode, uint64_t seed);

// --- forward / backward --------------------------------------------------

// Per-sample dropout state captured during a training-mode forward pass so
// the matching backward pass sees the same masks.
struct EncoderActivations;
struct HeadActivations;

FeatureMap encoder_forward(const EncoderParams& params, const Eigen::MatrixXd& x,
                           bool train_mode = false, std::mt19937_64* dropout_rng = nullptr,
                           EncoderActivations* saved = nullptr);

double head_forward(const HeadParams& params, const FeatureMap& features,
                    const Eigen::VectorXd& y_history, HeadActivations* saved = nullptr);

double critic_forward(const CriticParams& params, const FeatureMap& features);

struct EncoderActivations {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;       // pre-activation z per layer
    std::vector<Eigen::MatrixXd> post;      // dropout(relu(z)) per layer
    std::vector<Eigen::MatrixXd> drop_mask; // empty in eval mode
    std::vector<Eigen::MatrixXd> layer_in;  // input to each layer
};

struct HeadActivations {
    Eigen::MatrixXd input;                 // (C+1, T) concat
    std::vector<Eigen::MatrixXd> pre;
    std::vector<Eigen::MatrixXd> layer_in;
};

// Gradients share the parameter struct layout.
EncoderParams zeros_like(const EncoderParams& p);
HeadParams zeros_like(const HeadParams& p);
CriticParams zeros_like(const CriticParams& p);

// Accumulates parameter gradients; returns the input gradient.
Eigen::MatrixXd encoder_backward(const EncoderParams& params, const EncoderActivations& acts,
                                 const Eigen::MatrixXd& d_output, EncoderParams& grads);

// d_scalar is dLoss/dPrediction. Returns dLoss/dFeatures; dLoss/dy_history is
// not needed by any training path and is omitted.
Eigen::MatrixXd head_backward(const HeadParams& params, const HeadActivations& acts,
                              double d_scalar, HeadParams& grads);

// Gradient of the critic score with respect to its (flattened) input.
Eigen::VectorXd critic_input_gradient(const CriticParams& params, const Eigen::VectorXd& input);

// Accumulates d(score)/d(params) scaled by d_scalar; optionally returns the
// input gradient through d_input.
void critic_backward(const CriticParams& params, const Eigen::VectorXd& input, double d_scalar,
                     CriticParams& grads, Eigen::VectorXd* d_input = nullptr);

// Accumulates the gradient of (||grad_input D(input)|| - 1)^2 with respect to
// the critic parameters (exact for the piecewise-linear critic), scaled by
// `scale`. Returns the penalty value.
double critic_penalty_backward(const CriticParams& params, const Eigen::VectorXd& input,
                               double scale, CriticParams& grads);

double gradient_penalty_value(const CriticParams& params, const Eigen::VectorXd& input);

}  // namespace flooddan
