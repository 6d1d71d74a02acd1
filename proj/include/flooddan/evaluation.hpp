#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "flooddan/models.hpp"
#include "flooddan/series.hpp"
#include "flooddan/training.hpp"

namespace flooddan {

struct MetricsReport {
    double mse = 0.0;  // original units (m^3/s)^2
    double dc = 0.0;   // deterministic coefficient, <= 1
    int64_t n = 0;
    std::string model;
    std::string dataset;
    uint64_t seed = 0;
    std::string config_digest;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

void write_report(const MetricsReport& report, const std::string& path);
MetricsReport read_report(const std::string& path);

// Forecast-skill metrics over denormalized values.
double mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths);
double dc(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths);

struct PredictionTrace {
    Eigen::VectorXd truths;       // original units
    Eigen::VectorXd predictions;  // original units
};

void write_prediction_trace(const PredictionTrace& trace, const std::string& path);

// Splice inference: target encoder -> source head, denormalized through the
// target runoff normalizer.
std::pair<PredictionTrace, MetricsReport> predict(const EncoderParams& encoder,
                                                  const HeadParams& head,
                                                  const Normalizer& normalizer,
                                                  const std::vector<WindowedSample>& dataset);

// Persistence: prediction = last observed runoff.
std::pair<PredictionTrace, MetricsReport> lower_bound_baseline(
    const std::vector<WindowedSample>& dataset, const Normalizer& normalizer);

struct FewShotResult {
    int hours = 0;  // supervision budget, in window samples
    std::vector<double> mse_per_repeat;
    std::vector<double> dc_per_repeat;
    double mean_mse = 0.0;
    double mean_dc = 0.0;

    nlohmann::json to_json() const;
    static FewShotResult from_json(const nlohmann::json& j);
};

// Trains the supervised model from scratch `repeats` times on uniformly
// sampled subsets of `hours` training samples and evaluates each on the
// fixed test split. Repeat seeds derive from (cfg.seed, repeat index).
FewShotResult fewshot_run(const std::vector<WindowedSample>& target_train,
                          const std::vector<WindowedSample>& target_test, int hours,
                          const TrainConfig& cfg, const ArchConfig& arch,
                          const Normalizer& normalizer, int repeats = 20);

struct AlignmentStats {
    Eigen::VectorXd channel_mean_gap;  // per encoder channel
    Eigen::VectorXd channel_var_gap;
    double mean_term = 0.0;  // squared difference of flattened batch means
    double cov_term = 0.0;   // squared Frobenius difference of covariances
    double distance = 0.0;   // mean_term + cov_term
    std::vector<double> histogram_edges;
    std::vector<double> histogram_a;  // source counts
    std::vector<double> histogram_b;  // target counts
};

// Two-moment distribution distance between feature batches: symmetric,
// non-negative, zero iff both moments match. A diagnostic, never a loss.
AlignmentStats feature_alignment_stats(const std::vector<FeatureMap>& source_features,
                                       const std::vector<FeatureMap>& target_features,
                                       int histogram_bins = 40);

struct EquivalenceStatement {
    bool in_range = false;
    double hours_low = 0.0;
    double hours_high = 0.0;
    double hours_interpolated = 0.0;  // linear interpolation of the DC curve
    double unsupervised_dc = 0.0;

    nlohmann::json to_json() const;
};

// Locates the unsupervised DC on the few-shot DC-vs-hours curve.
EquivalenceStatement supervision_equivalence(const MetricsReport& unsupervised_report,
                                             std::vector<FewShotResult> fewshot_results);

}  // namespace flooddan
