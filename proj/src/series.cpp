#include "flooddan/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "flooddan/errors.hpp"

namespace flooddan {

namespace {

// Howard Hinnant's days-from-civil algorithm.
int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        auto b = field.find_first_not_of(" \t\r");
        auto e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

int64_t parse_iso8601_hour(const std::string& text) {
    int y = 0, mo = 0, da = 0, h = 0, mi = 0, se = 0;
    char sep = 0;
    int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &da, &sep, &h, &mi, &se);
    if (n < 6 || (sep != 'T' && sep != ' '))
        fail(ErrorCategory::parse, "unparsable timestamp '" + text + "'");
    if (mo < 1 || mo > 12 || da < 1 || da > 31 || h < 0 || h > 23 || mi != 0 || (n == 7 && se != 0))
        fail(ErrorCategory::parse, "timestamp '" + text + "' is not an hourly instant");
    return days_from_civil(y, mo, da) * 24 + h;
}

std::string format_iso8601_hour(int64_t epoch_hours) {
    int64_t days = epoch_hours / 24;
    int h = static_cast<int>(epoch_hours % 24);
    if (h < 0) {
        h += 24;
        days -= 1;
    }
    int y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:00:00", y, m, d, h);
    return buf;
}

void HydroSeries::validate() const {
    const Eigen::Index L = runoff.size();
    if (rainfall.rows() != L || static_cast<Eigen::Index>(timestamps.size()) != L)
        fail(ErrorCategory::integrity,
             "row counts disagree: rainfall " + std::to_string(rainfall.rows()) + ", runoff " +
                 std::to_string(L) + ", timestamps " + std::to_string(timestamps.size()));
    if (rainfall.cols() < 1) fail(ErrorCategory::schema, "series needs at least one rainfall station");
    for (Eigen::Index i = 1; i < L; ++i) {
        if (timestamps[i] != timestamps[i - 1] + 1)
            fail(ErrorCategory::integrity,
                 "non-hourly step at " + format_iso8601_hour(timestamps[i]));
    }
    for (Eigen::Index i = 0; i < L; ++i) {
        if (!std::isfinite(runoff[i]) || runoff[i] < 0.0)
            fail(ErrorCategory::data, "invalid runoff at row " + std::to_string(i));
        for (Eigen::Index j = 0; j < rainfall.cols(); ++j) {
            if (!std::isfinite(rainfall(i, j)) || rainfall(i, j) < 0.0)
                fail(ErrorCategory::data, "invalid rainfall at row " + std::to_string(i));
        }
    }
}

void WindowConfig::validate() const {
    if (window_length < 8)
        fail(ErrorCategory::config, "window_length must cover the encoder receptive field (8)");
    if (forecast_period < 1) fail(ErrorCategory::config, "forecast_period must be >= 1");
}

HydroSeries load_series(const std::string& path, const SeriesSchema& schema) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) fail(ErrorCategory::parse, "'" + path + "' is empty");
    const std::vector<std::string> header = split_csv_line(line);

    auto column_index = [&](const std::string& name) -> int {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            fail(ErrorCategory::schema, "missing column '" + name + "' in '" + path + "'");
        return static_cast<int>(it - header.begin());
    };

    std::vector<std::string> rain_names = schema.rainfall_columns;
    if (rain_names.empty()) {
        for (const auto& h : header)
            if (h.rfind("rain", 0) == 0) rain_names.push_back(h);
        if (rain_names.empty())
            fail(ErrorCategory::schema, "no rainfall columns ('rain*') found in '" + path + "'");
    }

    const int ts_col = column_index(schema.timestamp_column);
    const int runoff_col = column_index(schema.runoff_column);
    std::vector<int> rain_cols;
    for (const auto& name : rain_names) rain_cols.push_back(column_index(name));

    struct Row {
        int64_t ts;
        std::vector<double> rain;
        double runoff;
    };
    std::vector<Row> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            fail(ErrorCategory::parse, "line " + std::to_string(lineno) + ": expected " +
                                           std::to_string(header.size()) + " fields, got " +
                                           std::to_string(fields.size()));
        Row row;
        row.ts = parse_iso8601_hour(fields[ts_col]);
        auto to_double = [&](const std::string& s) {
            try {
                size_t pos = 0;
                double v = std::stod(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return v;
            } catch (const std::exception&) {
                fail(ErrorCategory::parse, "line " + std::to_string(lineno) +
                                               ": non-numeric value '" + s + "'");
            }
        };
        for (int c : rain_cols) row.rain.push_back(to_double(fields[c]));
        row.runoff = to_double(fields[runoff_col]);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(ErrorCategory::parse, "'" + path + "' has no data rows");

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.ts < b.ts; });
    for (size_t i = 1; i < rows.size(); ++i)
        if (rows[i].ts == rows[i - 1].ts)
            fail(ErrorCategory::integrity,
                 "duplicate timestamp " + format_iso8601_hour(rows[i].ts));

    HydroSeries series;
    series.name = path;
    const Eigen::Index L = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index d = static_cast<Eigen::Index>(rain_cols.size());
    series.rainfall.resize(L, d);
    series.runoff.resize(L);
    series.timestamps.resize(rows.size());
    for (Eigen::Index i = 0; i < L; ++i) {
        series.timestamps[i] = rows[i].ts;
        series.runoff[i] = rows[i].runoff;
        for (Eigen::Index j = 0; j < d; ++j) series.rainfall(i, j) = rows[i].rain[j];
    }
    series.validate();
    return series;
}

void write_series(const HydroSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCategory::io, "cannot write '" + path + "'");
    out << "timestamp";
    for (Eigen::Index j = 0; j < series.station_count(); ++j) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "rain_%02d", static_cast<int>(j + 1));
        out << ',' << buf;
    }
    out << ",runoff\n";
    char num[40];
    for (Eigen::Index i = 0; i < series.length(); ++i) {
        out << format_iso8601_hour(series.timestamps[i]);
        for (Eigen::Index j = 0; j < series.station_count(); ++j) {
            std::snprintf(num, sizeof(num), "%.17g", series.rainfall(i, j));
            out << ',' << num;
        }
        std::snprintf(num, sizeof(num), "%.17g", series.runoff[i]);
        out << ',' << num << '\n';
    }
    if (!out) fail(ErrorCategory::io, "write failed for '" + path + "'");
}

std::pair<HydroSeries, HydroSeries> split_chronological(const HydroSeries& series,
                                                        double train_fraction,
                                                        Eigen::Index min_segment) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        fail(ErrorCategory::config, "train_fraction must lie in (0,1)");
    const Eigen::Index L = series.length();
    const Eigen::Index n_train =
        static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(L)));
    const Eigen::Index n_test = L - n_train;
    if (n_train < std::max<Eigen::Index>(1, min_segment) ||
        n_test < std::max<Eigen::Index>(1, min_segment))
        fail(ErrorCategory::size, "split segment shorter than required " +
                                      std::to_string(min_segment) + " rows (train " +
                                      std::to_string(n_train) + ", test " +
                                      std::to_string(n_test) + ")");

    auto slice = [&](Eigen::Index start, Eigen::Index n, const char* suffix) {
        HydroSeries s;
        s.name = series.name + suffix;
        s.rainfall = series.rainfall.middleRows(start, n);
        s.runoff = series.runoff.segment(start, n);
        s.timestamps.assign(series.timestamps.begin() + start,
                            series.timestamps.begin() + start + n);
        return s;
    };
    return {slice(0, n_train, "/train"), slice(n_train, n_test, "/test")};
}

Normalizer Normalizer::fit(const HydroSeries& series) {
    Normalizer n;
    n.rain_min_ = series.rainfall.colwise().minCoeff();
    n.rain_max_ = series.rainfall.colwise().maxCoeff();
    n.runoff_min_ = series.runoff.minCoeff();
    n.runoff_max_ = series.runoff.maxCoeff();
    return n;
}

void Normalizer::set_state(Eigen::VectorXd rain_min, Eigen::VectorXd rain_max,
                           double runoff_min, double runoff_max) {
    if (rain_min.size() != rain_max.size())
        fail(ErrorCategory::dimension, "normalizer min/max size mismatch");
    for (Eigen::Index i = 0; i < rain_min.size(); ++i)
        if (rain_max[i] < rain_min[i])
            fail(ErrorCategory::data, "normalizer max < min for channel " + std::to_string(i));
    if (runoff_max < runoff_min) fail(ErrorCategory::data, "normalizer runoff max < min");
    rain_min_ = std::move(rain_min);
    rain_max_ = std::move(rain_max);
    runoff_min_ = runoff_min;
    runoff_max_ = runoff_max;
}

HydroSeries Normalizer::apply(const HydroSeries& series) const {
    if (series.station_count() != rain_min_.size())
        fail(ErrorCategory::dimension, "normalizer fitted for " + std::to_string(rain_min_.size()) +
                                           " stations, series has " +
                                           std::to_string(series.station_count()));
    HydroSeries out = series;
    for (Eigen::Index j = 0; j < out.rainfall.cols(); ++j) {
        const double range = rain_max_[j] - rain_min_[j];
        if (range == 0.0)
            out.rainfall.col(j).setZero();
        else
            out.rainfall.col(j) = (out.rainfall.col(j).array() - rain_min_[j]) / range;
    }
    const double rr = runoff_max_ - runoff_min_;
    if (rr == 0.0)
        out.runoff.setZero();
    else
        out.runoff = (out.runoff.array() - runoff_min_) / rr;
    return out;
}

double Normalizer::normalize_runoff(double raw) const {
    const double rr = runoff_max_ - runoff_min_;
    return rr == 0.0 ? 0.0 : (raw - runoff_min_) / rr;
}

double Normalizer::denormalize_runoff(double normalized) const {
    const double rr = runoff_max_ - runoff_min_;
    return rr == 0.0 ? runoff_min_ : runoff_min_ + normalized * rr;
}

Eigen::VectorXd Normalizer::denormalize_runoff(const Eigen::VectorXd& normalized) const {
    Eigen::VectorXd out(normalized.size());
    for (Eigen::Index i = 0; i < normalized.size(); ++i)
        out[i] = denormalize_runoff(normalized[i]);
    return out;
}

std::vector<WindowedSample> make_windows(const HydroSeries& series, const WindowConfig& cfg,
                                         bool labeled) {
    cfg.validate();
    const Eigen::Index L = series.length();
    const Eigen::Index T = cfg.window_length;
    const Eigen::Index t = cfg.forecast_period;
    const Eigen::Index min_len = labeled ? T + t : T;
    if (L < min_len)
        fail(ErrorCategory::size, "series of length " + std::to_string(L) +
                                      " shorter than required minimum " + std::to_string(min_len));

    const Eigen::Index count = labeled ? L - T - t + 1 : L - T + 1;
    std::vector<WindowedSample> samples;
    samples.reserve(static_cast<size_t>(count));
    for (Eigen::Index k = 0; k < count; ++k) {
        WindowedSample s;
        s.x = series.rainfall.middleRows(k, T).transpose();  // (d, T)
        s.y_history = series.runoff.segment(k, T);
        if (labeled) s.y = series.runoff[k + T + t - 1];
        s.source_index = k;
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace flooddan
