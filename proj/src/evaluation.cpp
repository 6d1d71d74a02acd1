#include "flooddan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "flooddan/errors.hpp"

namespace flooddan {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
    return {{"mse", mse},     {"dc", dc},           {"dc_percent", dc * 100.0},
            {"n", n},         {"model", model},     {"dataset", dataset},
            {"seed", seed},   {"config_digest", config_digest}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.mse = j.at("mse").get<double>();
    r.dc = j.at("dc").get<double>();
    r.n = j.at("n").get<int64_t>();
    r.model = j.at("model").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.config_digest = j.at("config_digest").get<std::string>();
    return r;
}

void write_report(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write report '" + path + "'");
    out << report.to_json().dump(2) << '\n';
}

MetricsReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open report '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::parse, "report '" + path + "': " + e.what());
    }
    return MetricsReport::from_json(j);
}

double mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths) {
    if (predictions.size() != truths.size() || predictions.size() == 0)
        fail(ErrorCategory::config, "mse needs equal, non-empty vectors");
    return (predictions - truths).squaredNorm() / static_cast<double>(predictions.size());
}

double dc(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths) {
    if (predictions.size() != truths.size())
        fail(ErrorCategory::config, "dc needs equal-length vectors");
    if (truths.size() < 2) fail(ErrorCategory::config, "dc needs at least 2 samples");
    const double mean = truths.mean();
    const double total = (truths.array() - mean).matrix().squaredNorm();
    if (total == 0.0)
        fail(ErrorCategory::data, "dc undefined: all truth values are identical");
    return 1.0 - (predictions - truths).squaredNorm() / total;
}

void write_prediction_trace(const PredictionTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write prediction trace '" + path + "'");
    out << "truth,prediction\n";
    char buf[80];
    for (Eigen::Index i = 0; i < trace.truths.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", trace.truths[i], trace.predictions[i]);
        out << buf;
    }
}

namespace {

std::pair<PredictionTrace, MetricsReport> build_report(Eigen::VectorXd preds,
                                                       Eigen::VectorXd truths,
                                                       const std::string& model) {
    PredictionTrace trace;
    trace.predictions = std::move(preds);
    trace.truths = std::move(truths);
    MetricsReport report;
    report.mse = mse(trace.predictions, trace.truths);
    report.dc = dc(trace.predictions, trace.truths);
    report.n = trace.truths.size();
    report.model = model;
    return {std::move(trace), report};
}

}  // namespace

std::pair<PredictionTrace, MetricsReport> predict(const EncoderParams& encoder,
                                                  const HeadParams& head,
                                                  const Normalizer& normalizer,
                                                  const std::vector<WindowedSample>& dataset) {
    if (dataset.empty()) fail(ErrorCategory::size, "predict needs a non-empty dataset");
    Eigen::VectorXd preds(static_cast<Eigen::Index>(dataset.size()));
    Eigen::VectorXd truths(preds.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        const WindowedSample& s = dataset[i];
        if (!s.y) fail(ErrorCategory::data, "predict needs labeled samples");
        const FeatureMap features = encoder_forward(encoder, s.x);  // eval mode, no dropout
        const double pred_norm = head_forward(head, features, s.y_history);
        preds[static_cast<Eigen::Index>(i)] = normalizer.denormalize_runoff(pred_norm);
        truths[static_cast<Eigen::Index>(i)] = normalizer.denormalize_runoff(*s.y);
    }
    return build_report(std::move(preds), std::move(truths), "spliced");
}

std::pair<PredictionTrace, MetricsReport> lower_bound_baseline(
    const std::vector<WindowedSample>& dataset, const Normalizer& normalizer) {
    if (dataset.empty()) fail(ErrorCategory::size, "baseline needs a non-empty dataset");
    Eigen::VectorXd preds(static_cast<Eigen::Index>(dataset.size()));
    Eigen::VectorXd truths(preds.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        const WindowedSample& s = dataset[i];
        if (!s.y) fail(ErrorCategory::data, "baseline needs labeled samples");
        preds[static_cast<Eigen::Index>(i)] =
            normalizer.denormalize_runoff(s.y_history[s.y_history.size() - 1]);
        truths[static_cast<Eigen::Index>(i)] = normalizer.denormalize_runoff(*s.y);
    }
    return build_report(std::move(preds), std::move(truths), "lower_bound");
}

nlohmann::json FewShotResult::to_json() const {
    return {{"hours", hours},
            {"mse_per_repeat", mse_per_repeat},
            {"dc_per_repeat", dc_per_repeat},
            {"mean_mse", mean_mse},
            {"mean_dc", mean_dc}};
}

FewShotResult FewShotResult::from_json(const nlohmann::json& j) {
    FewShotResult r;
    r.hours = j.at("hours").get<int>();
    r.mse_per_repeat = j.at("mse_per_repeat").get<std::vector<double>>();
    r.dc_per_repeat = j.at("dc_per_repeat").get<std::vector<double>>();
    r.mean_mse = j.at("mean_mse").get<double>();
    r.mean_dc = j.at("mean_dc").get<double>();
    return r;
}

FewShotResult fewshot_run(const std::vector<WindowedSample>& target_train,
                          const std::vector<WindowedSample>& target_test, int hours,
                          const TrainConfig& cfg, const ArchConfig& arch,
                          const Normalizer& normalizer, int repeats) {
    if (hours < 1 || static_cast<size_t>(hours) > target_train.size())
        fail(ErrorCategory::size, "fewshot hours " + std::to_string(hours) +
                                      " exceeds available training samples (" +
                                      std::to_string(target_train.size()) + ")");
    if (repeats < 1) fail(ErrorCategory::config, "repeats must be >= 1");

    FewShotResult result;
    result.hours = hours;
    for (int rep = 0; rep < repeats; ++rep) {
        const uint64_t rep_seed = mix_seed(cfg.seed, 7000 + static_cast<uint64_t>(rep));
        std::mt19937_64 rng(rep_seed);
        std::vector<size_t> order(target_train.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        std::vector<WindowedSample> subset;
        subset.reserve(static_cast<size_t>(hours));
        for (int i = 0; i < hours; ++i) subset.push_back(target_train[order[static_cast<size_t>(i)]]);

        TrainConfig rep_cfg = cfg;
        rep_cfg.seed = rep_seed;
        const PretrainResult trained = pretrain(subset, rep_cfg, arch, HeadMode::residual);
        const auto [trace, report] = predict(trained.encoder, trained.head, normalizer, target_test);
        result.mse_per_repeat.push_back(report.mse);
        result.dc_per_repeat.push_back(report.dc);
    }
    result.mean_mse = std::accumulate(result.mse_per_repeat.begin(), result.mse_per_repeat.end(), 0.0) /
                      static_cast<double>(repeats);
    result.mean_dc = std::accumulate(result.dc_per_repeat.begin(), result.dc_per_repeat.end(), 0.0) /
                     static_cast<double>(repeats);
    return result;
}

AlignmentStats feature_alignment_stats(const std::vector<FeatureMap>& source_features,
                                       const std::vector<FeatureMap>& target_features,
                                       int histogram_bins) {
    if (source_features.empty() || target_features.empty())
        fail(ErrorCategory::size, "alignment stats need non-empty batches");
    const Eigen::Index C = source_features[0].rows();
    const Eigen::Index n = source_features[0].size();
    if (target_features[0].rows() != C || target_features[0].size() != n)
        fail(ErrorCategory::dimension, "feature batches have mismatched shapes");

    auto flatten_batch = [n](const std::vector<FeatureMap>& batch) {
        Eigen::MatrixXd m(n, static_cast<Eigen::Index>(batch.size()));
        for (size_t i = 0; i < batch.size(); ++i)
            m.col(static_cast<Eigen::Index>(i)) =
                Eigen::Map<const Eigen::VectorXd>(batch[i].data(), n);
        return m;
    };
    const Eigen::MatrixXd a = flatten_batch(source_features);
    const Eigen::MatrixXd b = flatten_batch(target_features);

    const Eigen::VectorXd mean_a = a.rowwise().mean();
    const Eigen::VectorXd mean_b = b.rowwise().mean();
    const Eigen::MatrixXd ca = a.colwise() - mean_a;
    const Eigen::MatrixXd cb = b.colwise() - mean_b;
    const Eigen::MatrixXd cov_a = (ca * ca.transpose()) / static_cast<double>(a.cols());
    const Eigen::MatrixXd cov_b = (cb * cb.transpose()) / static_cast<double>(b.cols());

    AlignmentStats stats;
    stats.mean_term = (mean_a - mean_b).squaredNorm();
    stats.cov_term = (cov_a - cov_b).squaredNorm();
    stats.distance = stats.mean_term + stats.cov_term;

    // Per-channel first/second moment gaps (channels of the (C, T) map).
    stats.channel_mean_gap.resize(C);
    stats.channel_var_gap.resize(C);
    auto channel_moments = [C](const std::vector<FeatureMap>& batch, Eigen::VectorXd& mean,
                               Eigen::VectorXd& var) {
        mean = Eigen::VectorXd::Zero(C);
        var = Eigen::VectorXd::Zero(C);
        double count = 0.0;
        for (const auto& f : batch) {
            mean += f.rowwise().sum();
            count += static_cast<double>(f.cols());
        }
        mean /= count;
        for (const auto& f : batch)
            var += (f.colwise() - mean).array().square().matrix().rowwise().sum();
        var /= count;
    };
    Eigen::VectorXd ma, va, mb, vb;
    channel_moments(source_features, ma, va);
    channel_moments(target_features, mb, vb);
    stats.channel_mean_gap = (ma - mb).cwiseAbs();
    stats.channel_var_gap = (va - vb).cwiseAbs();

    // Shared-bin histograms over all entries, for plotting.
    double lo = std::min(a.minCoeff(), b.minCoeff());
    double hi = std::max(a.maxCoeff(), b.maxCoeff());
    if (hi <= lo) hi = lo + 1.0;
    stats.histogram_edges.resize(static_cast<size_t>(histogram_bins) + 1);
    for (int i = 0; i <= histogram_bins; ++i)
        stats.histogram_edges[static_cast<size_t>(i)] =
            lo + (hi - lo) * static_cast<double>(i) / histogram_bins;
    auto fill_hist = [&](const Eigen::MatrixXd& m, std::vector<double>& h) {
        h.assign(static_cast<size_t>(histogram_bins), 0.0);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            int bin = static_cast<int>((m.data()[i] - lo) / (hi - lo) * histogram_bins);
            bin = std::clamp(bin, 0, histogram_bins - 1);
            h[static_cast<size_t>(bin)] += 1.0;
        }
    };
    fill_hist(a, stats.histogram_a);
    fill_hist(b, stats.histogram_b);
    return stats;
}

nlohmann::json EquivalenceStatement::to_json() const {
    return {{"in_range", in_range},
            {"hours_low", hours_low},
            {"hours_high", hours_high},
            {"hours_interpolated", hours_interpolated},
            {"unsupervised_dc", unsupervised_dc}};
}

EquivalenceStatement supervision_equivalence(const MetricsReport& unsupervised_report,
                                             std::vector<FewShotResult> fewshot_results) {
    if (fewshot_results.empty())
        fail(ErrorCategory::size, "supervision_equivalence needs few-shot results");
    std::sort(fewshot_results.begin(), fewshot_results.end(),
              [](const FewShotResult& x, const FewShotResult& y) { return x.hours < y.hours; });

    EquivalenceStatement st;
    st.unsupervised_dc = unsupervised_report.dc;
    const double u = unsupervised_report.dc;

    for (const auto& r : fewshot_results) {
        if (r.mean_dc == u) {
            st.in_range = true;
            st.hours_low = st.hours_high = st.hours_interpolated = r.hours;
            return st;
        }
    }
    for (size_t i = 0; i + 1 < fewshot_results.size(); ++i) {
        const double d0 = fewshot_results[i].mean_dc;
        const double d1 = fewshot_results[i + 1].mean_dc;
        if ((u > std::min(d0, d1)) && (u < std::max(d0, d1))) {
            st.in_range = true;
            st.hours_low = fewshot_results[i].hours;
            st.hours_high = fewshot_results[i + 1].hours;
            st.hours_interpolated =
                st.hours_low + (st.hours_high - st.hours_low) * (u - d0) / (d1 - d0);
            return st;
        }
    }
    st.in_range = false;
    st.hours_low = fewshot_results.front().hours;
    st.hours_high = fewshot_results.back().hours;
    st.hours_interpolated = std::nan("");
    return st;
}

}  // namespace flooddan
