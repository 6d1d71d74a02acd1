#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flooddan {

// Aligned hourly record for one watershed: a rainfall matrix (one column per
// station, mm/h) and a single runoff vector (m^3/s).
struct HydroSeries {
    std::string name;
    Eigen::MatrixXd rainfall;           // (L, d)
    Eigen::VectorXd runoff;             // (L)
    std::vector<int64_t> timestamps;    // epoch hours, strictly increasing, step 1

    Eigen::Index length() const { return runoff.size(); }
    Eigen::Index station_count() const { return rainfall.cols(); }

    // Throws on any invariant violation (shape mismatch, non-hourly steps,
    // negative or non-finite values).
    void validate() const;
};

struct WindowConfig {
    int window_length = 24;   // T, hours
    int forecast_period = 6;  // t, hours

    void validate() const;
};

// One training example in normalized space. `y` is absent for unlabeled
// (target-domain training) windows.
struct WindowedSample {
    Eigen::MatrixXd x;          // (d, T)
    Eigen::VectorXd y_history;  // (T)
    std::optional<double> y;    // runoff at offset T + t - 1 from window start
    Eigen::Index source_index = 0;
};

// Per-channel min/max affine map to [0,1], fitted on the training split only.
// A constant channel (max == min) maps to all-zeros and inverts to the
// constant min.
class Normalizer {
public:
    Normalizer() = default;

    static Normalizer fit(const HydroSeries& series);

    HydroSeries apply(const HydroSeries& series) const;

    double normalize_runoff(double raw) const;
    double denormalize_runoff(double normalized) const;
    Eigen::VectorXd denormalize_runoff(const Eigen::VectorXd& normalized) const;

    Eigen::Index station_count() const { return rain_min_.size(); }

    const Eigen::VectorXd& rain_min() const { return rain_min_; }
    const Eigen::VectorXd& rain_max() const { return rain_max_; }
    double runoff_min() const { return runoff_min_; }
    double runoff_max() const { return runoff_max_; }

    void set_state(Eigen::VectorXd rain_min, Eigen::VectorXd rain_max,
                   double runoff_min, double runoff_max);

private:
    Eigen::VectorXd rain_min_;
    Eigen::VectorXd rain_max_;
    double runoff_min_ = 0.0;
    double runoff_max_ = 0.0;
};

// Column-name mapping for delimited input files.
struct SeriesSchema {
    std::string timestamp_column = "timestamp";
    std::vector<std::string> rainfall_columns;  // empty = every "rain*" column
    std::string runoff_column = "runoff";
};

// Loads a comma-separated file with a header row. Rows are reordered by
// timestamp before validation; gaps and duplicates are integrity errors.
HydroSeries load_series(const std::string& path, const SeriesSchema& schema);

// Canonical export format: timestamp,rain_01..rain_dd,runoff with ISO-8601
// hourly timestamps. load_series reads this back with the default schema.
void write_series(const HydroSeries& series, const std::string& path);

// Earliest floor(train_fraction * L) rows vs the remainder. Both segments
// must reach min_segment rows (callers pass T + t + 1 so every segment can
// be windowed).
std::pair<HydroSeries, HydroSeries> split_chronological(const HydroSeries& series,
                                                        double train_fraction,
                                                        Eigen::Index min_segment = 1);

// Stride-1 windowing over a normalized series. Labeled windows need
// L >= T + t and yield L - T - t + 1 samples; unlabeled need L >= T and
// yield L - T + 1.
std::vector<WindowedSample> make_windows(const HydroSeries& series,
                                         const WindowConfig& cfg, bool labeled);

int64_t parse_iso8601_hour(const std::string& text);
std::string format_iso8601_hour(int64_t epoch_hours);

}  // namespace flooddan
