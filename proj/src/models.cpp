#include "flooddan/models.hpp"

#include <cmath>
#include <cstring>

#include "flooddan/errors.hpp"

namespace flooddan {

namespace {

// z[:, s] = b + sum_k w[k] * x[:, s - dilation*(K-1-k)], zero-padded left.
Eigen::MatrixXd conv_forward(const ConvLayer& layer, const Eigen::MatrixXd& x) {
    if (x.rows() != layer.in_channels())
        fail(ErrorCategory::dimension,
             "conv expects " + std::to_string(layer.in_channels()) + " input channels, got " +
                 std::to_string(x.rows()));
    const Eigen::Index T = x.cols();
    const int K = layer.kernel_size();
    Eigen::MatrixXd z = layer.b.replicate(1, T);
    for (int k = 0; k < K; ++k) {
        const Eigen::Index off = static_cast<Eigen::Index>(layer.dilation) * (K - 1 - k);
        if (off >= T) continue;
        z.rightCols(T - off).noalias() += layer.w[k] * x.leftCols(T - off);
    }
    return z;
}

// Accumulates dW/db into `grad`; adds the input gradient into d_x.
void conv_backward(const ConvLayer& layer, const Eigen::MatrixXd& x, const Eigen::MatrixXd& dz,
                   ConvLayer& grad, Eigen::MatrixXd& d_x) {
    const Eigen::Index T = x.cols();
    const int K = layer.kernel_size();
    grad.b += dz.rowwise().sum();
    for (int k = 0; k < K; ++k) {
        const Eigen::Index off = static_cast<Eigen::Index>(layer.dilation) * (K - 1 - k);
        if (off >= T) continue;
        grad.w[k].noalias() += dz.rightCols(T - off) * x.leftCols(T - off).transpose();
        d_x.leftCols(T - off).noalias() += layer.w[k].transpose() * dz.rightCols(T - off);
    }
}

ConvLayer init_conv(int out_ch, int in_ch, int kernel, int dilation, std::mt19937_64& rng) {
    ConvLayer layer;
    layer.dilation = dilation;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * kernel);
    std::uniform_real_distribution<double> u(-bound, bound);
    layer.w.resize(kernel);
    for (int k = 0; k < kernel; ++k) {
        layer.w[k].resize(out_ch, in_ch);
        for (Eigen::Index i = 0; i < out_ch; ++i)
            for (Eigen::Index j = 0; j < in_ch; ++j) layer.w[k](i, j) = u(rng);
    }
    layer.b = Eigen::VectorXd::Zero(out_ch);
    return layer;
}

Eigen::MatrixXd init_dense_matrix(int out, int in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index i = 0; i < out; ++i)
        for (Eigen::Index j = 0; j < in; ++j) w(i, j) = u(rng);
    return w;
}

inline Eigen::Map<const Eigen::VectorXd> flatten(const FeatureMap& f) {
    return {f.data(), f.size()};
}

}  // namespace

int EncoderParams::receptive_field() const {
    int rf = 1;
    for (const auto& l : layers) rf += l.dilation * (l.kernel_size() - 1);
    return rf;
}

void visit_tensors(EncoderParams& p, const std::string& prefix, const TensorVisitor& v) {
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const std::string base = prefix + ".l" + std::to_string(l + 1);
        for (size_t k = 0; k < p.layers[l].w.size(); ++k)
            v.matrix(base + ".w" + std::to_string(k), p.layers[l].w[k]);
        v.vector(base + ".b", p.layers[l].b);
        if (p.skip_proj[l].size() > 0) v.matrix(base + ".proj", p.skip_proj[l]);
    }
}

void visit_tensors(HeadParams& p, const std::string& prefix, const TensorVisitor& v) {
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const std::string base = prefix + ".l" + std::to_string(l + 1);
        for (size_t k = 0; k < p.layers[l].w.size(); ++k)
            v.matrix(base + ".w" + std::to_string(k), p.layers[l].w[k]);
        v.vector(base + ".b", p.layers[l].b);
    }
}

void visit_tensors(CriticParams& p, const std::string& prefix, const TensorVisitor& v) {
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const std::string base = prefix + ".l" + std::to_string(l + 1);
        v.matrix(base + ".w", p.layers[l].w);
        v.vector(base + ".b", p.layers[l].b);
    }
}

namespace {

template <typename Params>
std::vector<double*> view_impl(Params& p) {
    std::vector<double*> out;
    TensorVisitor v;
    v.matrix = [&](const std::string&, Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
    };
    v.vector = [&](const std::string&, Eigen::VectorXd& vec) {
        for (Eigen::Index i = 0; i < vec.size(); ++i) out.push_back(vec.data() + i);
    };
    visit_tensors(p, "p", v);
    return out;
}

}  // namespace

std::vector<double*> parameter_view(EncoderParams& p) { return view_impl(p); }
std::vector<double*> parameter_view(HeadParams& p) { return view_impl(p); }
std::vector<double*> parameter_view(CriticParams& p) { return view_impl(p); }

uint64_t parameter_checksum(const EncoderParams& p) {
    auto view = parameter_view(const_cast<EncoderParams&>(p));
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (const double* v : view) {
        uint64_t bits;
        std::memcpy(&bits, v, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    }
    return h;
}

EncoderParams init_encoder(const ArchConfig& arch, int input_channels, std::mt19937_64& rng) {
    if (input_channels < 1) fail(ErrorCategory::config, "encoder needs >= 1 input channel");
    EncoderParams p;
    p.dropout = arch.dropout;
    int in_ch = input_channels;
    for (int l = 0; l < arch.encoder_layers; ++l) {
        const int dilation = 1 << l;
        p.layers.push_back(init_conv(arch.encoder_channels, in_ch, arch.encoder_kernel, dilation, rng));
        if (in_ch != arch.encoder_channels)
            p.skip_proj.push_back(init_dense_matrix(arch.encoder_channels, in_ch, rng));
        else
            p.skip_proj.emplace_back();
        in_ch = arch.encoder_channels;
    }
    return p;
}

HeadParams init_head(const ArchConfig& arch, HeadMode mode, std::mt19937_64& rng) {
    HeadParams p;
    p.mode = mode;
    const int c = arch.head_channels;
    p.layers.push_back(init_conv(c, arch.encoder_channels + 1, 2, 1, rng));
    p.layers.push_back(init_conv(c, c, 2, 1, rng));
    p.layers.push_back(init_conv(1, c, 3, 1, rng));
    return p;
}

CriticParams init_critic(const ArchConfig& arch, int input_size, std::mt19937_64& rng) {
    CriticParams p;
    p.leaky_slope = arch.critic_slope;
    int in = input_size;
    for (int width : arch.critic_hidden) {
        p.layers.push_back({init_dense_matrix(width, in, rng), Eigen::VectorXd::Zero(width)});
        in = width;
    }
    p.layers.push_back({init_dense_matrix(1, in, rng), Eigen::VectorXd::Zero(1)});
    return p;
}

ModelBundle init_params(const ArchConfig& arch, int station_count, int window_length,
                        HeadMode mode, uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelBundle bundle;
    bundle.arch = arch;
    bundle.station_count = station_count;
    bundle.window_length = window_length;
    bundle.encoder = init_encoder(arch, station_count, rng);
    bundle.head = init_head(arch, mode, rng);
    bundle.critic = init_critic(arch, arch.encoder_channels * window_length, rng);
    return bundle;
}

EncoderParams zeros_like(const EncoderParams& p) {
    EncoderParams g = p;
    for (auto& l : g.layers) {
        for (auto& w : l.w) w.setZero();
        l.b.setZero();
    }
    for (auto& m : g.skip_proj) m.setZero();
    return g;
}

HeadParams zeros_like(const HeadParams& p) {
    HeadParams g = p;
    for (auto& l : g.layers) {
        for (auto& w : l.w) w.setZero();
        l.b.setZero();
    }
    return g;
}

CriticParams zeros_like(const CriticParams& p) {
    CriticParams g = p;
    for (auto& l : g.layers) {
        l.w.setZero();
        l.b.setZero();
    }
    return g;
}

FeatureMap encoder_forward(const EncoderParams& params, const Eigen::MatrixXd& x, bool train_mode,
                           std::mt19937_64* dropout_rng, EncoderActivations* saved) {
    if (x.rows() != params.input_channels())
        fail(ErrorCategory::dimension,
             "encoder expects " + std::to_string(params.input_channels()) + " channels, got " +
                 std::to_string(x.rows()));
    if (x.cols() < params.receptive_field())
        fail(ErrorCategory::dimension, "window shorter than the receptive field");
    if (train_mode && params.dropout > 0.0 && dropout_rng == nullptr)
        fail(ErrorCategory::config, "train-mode encoder forward needs a dropout rng");

    if (saved) {
        saved->input = x;
        saved->pre.clear();
        saved->post.clear();
        saved->drop_mask.clear();
        saved->layer_in.clear();
    }

    Eigen::MatrixXd cur = x;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const Eigen::MatrixXd in = cur;
        Eigen::MatrixXd z = conv_forward(params.layers[l], in);
        Eigen::MatrixXd a = z.cwiseMax(0.0);
        Eigen::MatrixXd mask;
        if (train_mode && params.dropout > 0.0) {
            mask.resize(a.rows(), a.cols());
            const double keep = 1.0 - params.dropout;
            for (Eigen::Index i = 0; i < mask.size(); ++i)
                mask.data()[i] = (unit(*dropout_rng) < keep) ? 1.0 / keep : 0.0;
            a = a.cwiseProduct(mask);
        }
        if (params.skip_proj[l].size() > 0)
            cur = a + params.skip_proj[l] * in;
        else
            cur = a + in;
        if (saved) {
            saved->layer_in.push_back(in);
            saved->pre.push_back(std::move(z));
            saved->post.push_back(a);
            saved->drop_mask.push_back(std::move(mask));
        }
    }
    return cur;
}

Eigen::MatrixXd encoder_backward(const EncoderParams& params, const EncoderActivations& acts,
                                 const Eigen::MatrixXd& d_output, EncoderParams& grads) {
    Eigen::MatrixXd d_out = d_output;
    for (size_t li = params.layers.size(); li-- > 0;) {
        const Eigen::MatrixXd& in = acts.layer_in[li];
        Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(in.rows(), in.cols());

        // skip path
        if (params.skip_proj[li].size() > 0) {
            grads.skip_proj[li].noalias() += d_out * in.transpose();
            d_in.noalias() += params.skip_proj[li].transpose() * d_out;
        } else {
            d_in += d_out;
        }

        // main path: conv -> relu -> dropout
        Eigen::MatrixXd da = d_out;
        if (acts.drop_mask[li].size() > 0) da = da.cwiseProduct(acts.drop_mask[li]);
        Eigen::MatrixXd dz =
            da.cwiseProduct((acts.pre[li].array() > 0.0).cast<double>().matrix());
        conv_backward(params.layers[li], in, dz, grads.layers[li], d_in);

        d_out = std::move(d_in);
    }
    return d_out;
}

double head_forward(const HeadParams& params, const FeatureMap& features,
                    const Eigen::VectorXd& y_history, HeadActivations* saved) {
    if (features.cols() != y_history.size())
        fail(ErrorCategory::dimension, "feature map and runoff history lengths differ");
    if (features.rows() + 1 != params.input_channels())
        fail(ErrorCategory::dimension,
             "head expects " + std::to_string(params.input_channels()) + " channels, got " +
                 std::to_string(features.rows() + 1));
    const Eigen::Index T = features.cols();

    Eigen::MatrixXd cur(features.rows() + 1, T);
    cur.topRows(features.rows()) = features;
    cur.row(features.rows()) = y_history.transpose();
    if (saved) {
        saved->input = cur;
        saved->pre.clear();
        saved->layer_in.clear();
    }

    for (size_t l = 0; l < params.layers.size(); ++l) {
        const Eigen::MatrixXd in = cur;
        Eigen::MatrixXd z = conv_forward(params.layers[l], in);
        cur = (l + 1 < params.layers.size()) ? z.cwiseMax(0.0) : z;
        if (saved) {
            saved->layer_in.push_back(in);
            saved->pre.push_back(std::move(z));
        }
    }

    double scalar = cur(0, T - 1);
    if (params.mode == HeadMode::residual) scalar += y_history[T - 1];
    return scalar;
}

Eigen::MatrixXd head_backward(const HeadParams& params, const HeadActivations& acts,
                              double d_scalar, HeadParams& grads) {
    const Eigen::Index T = acts.input.cols();
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(1, T);
    d_out(0, T - 1) = d_scalar;

    for (size_t li = params.layers.size(); li-- > 0;) {
        const Eigen::MatrixXd& in = acts.layer_in[li];
        Eigen::MatrixXd dz = d_out;
        if (li + 1 < params.layers.size())
            dz = dz.cwiseProduct((acts.pre[li].array() > 0.0).cast<double>().matrix());
        Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(in.rows(), in.cols());
        conv_backward(params.layers[li], in, dz, grads.layers[li], d_in);
        d_out = std::move(d_in);
    }
    // Drop the y_history channel; it is data, not a trainable path.
    return d_out.topRows(d_out.rows() - 1);
}

double critic_forward(const CriticParams& params, const FeatureMap& features) {
    Eigen::VectorXd a = flatten(features);
    if (a.size() != params.input_size())
        fail(ErrorCategory::dimension,
             "critic expects input size " + std::to_string(params.input_size()) + ", got " +
                 std::to_string(a.size()));
    const size_t L = params.layers.size();
    for (size_t l = 0; l < L; ++l) {
        Eigen::VectorXd z = params.layers[l].w * a + params.layers[l].b;
        if (l + 1 < L) {
            a = z.unaryExpr([s = params.leaky_slope](double v) { return v > 0.0 ? v : s * v; });
        } else {
            return z[0];
        }
    }
    fail(ErrorCategory::config, "critic has no layers");
}

namespace {

// Hidden pre-activations and leaky-ReLU derivative masks for one input.
struct CriticTrace {
    std::vector<Eigen::VectorXd> act;   // a_0 = input, a_1.., excluding output
    std::vector<Eigen::VectorXd> mask;  // per hidden layer
    double score = 0.0;
};

CriticTrace critic_trace(const CriticParams& params, const Eigen::VectorXd& input) {
    CriticTrace tr;
    tr.act.push_back(input);
    const size_t L = params.layers.size();
    Eigen::VectorXd a = input;
    for (size_t l = 0; l + 1 < L; ++l) {
        Eigen::VectorXd z = params.layers[l].w * a + params.layers[l].b;
        tr.mask.push_back(z.unaryExpr(
            [s = params.leaky_slope](double v) { return v > 0.0 ? 1.0 : s; }));
        a = z.cwiseProduct(tr.mask.back());
        tr.act.push_back(a);
    }
    tr.score = (params.layers[L - 1].w * a + params.layers[L - 1].b)[0];
    return tr;
}

}  // namespace

Eigen::VectorXd critic_input_gradient(const CriticParams& params, const Eigen::VectorXd& input) {
    const CriticTrace tr = critic_trace(params, input);
    const size_t L = params.layers.size();
    Eigen::VectorXd cur = params.layers[L - 1].w.transpose().col(0);  // dy/da_{L-2}
    for (size_t l = L - 1; l-- > 0;) {
        Eigen::VectorXd dz = cur.cwiseProduct(tr.mask[l]);
        cur = params.layers[l].w.transpose() * dz;
    }
    return cur;
}

void critic_backward(const CriticParams& params, const Eigen::VectorXd& input, double d_scalar,
                     CriticParams& grads, Eigen::VectorXd* d_input) {
    const CriticTrace tr = critic_trace(params, input);
    const size_t L = params.layers.size();
    Eigen::VectorXd dz = Eigen::VectorXd::Constant(1, d_scalar);
    for (size_t l = L; l-- > 0;) {
        grads.layers[l].w.noalias() += dz * tr.act[l].transpose();
        grads.layers[l].b += dz;
        Eigen::VectorXd da = params.layers[l].w.transpose() * dz;
        if (l > 0)
            dz = da.cwiseProduct(tr.mask[l - 1]);
        else if (d_input)
            *d_input = da;
    }
}

double gradient_penalty_value(const CriticParams& params, const Eigen::VectorXd& input) {
    const double norm = critic_input_gradient(params, input).norm();
    return (norm - 1.0) * (norm - 1.0);
}

double critic_penalty_backward(const CriticParams& params, const Eigen::VectorXd& input,
                               double scale, CriticParams& grads) {
    const CriticTrace tr = critic_trace(params, input);
    const size_t L = params.layers.size();

    // delta_l = d(score)/d(z_l), masks treated as locally constant.
    std::vector<Eigen::VectorXd> delta(L);
    delta[L - 1] = Eigen::VectorXd::Constant(1, 1.0);
    for (size_t l = L - 1; l-- > 0;)
        delta[l] = (params.layers[l + 1].w.transpose() * delta[l + 1]).cwiseProduct(tr.mask[l]);
    const Eigen::VectorXd g = params.layers[0].w.transpose() * delta[0];

    const double norm = g.norm();
    const double penalty = (norm - 1.0) * (norm - 1.0);
    if (norm < 1e-12) return penalty;  // kink of the norm; zero subgradient

    // q = d(penalty)/d(g); second pass propagates q forward through the
    // (piecewise-) linear map that produced g.
    const Eigen::VectorXd q = (2.0 * (norm - 1.0) / norm) * g;
    Eigen::VectorXd prev = q;
    for (size_t l = 0; l < L; ++l) {
        grads.layers[l].w.noalias() += scale * delta[l] * prev.transpose();
        if (l + 1 < L) prev = (params.layers[l].w * prev).cwiseProduct(tr.mask[l]);
    }
    return penalty;
}

}  // namespace flooddan
