#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "flooddan/errors.hpp"
#include "flooddan/series.hpp"
#include "flooddan/synthetic.hpp"

using namespace flooddan;

namespace {

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

HydroSeries ramp_series(int L, int d, double slope = 1.0, double rain = 0.0) {
    HydroSeries s;
    s.name = "ramp";
    s.rainfall = Eigen::MatrixXd::Constant(L, d, rain);
    s.runoff.resize(L);
    for (int i = 0; i < L; ++i) s.runoff[i] = slope * i;
    s.timestamps.resize(L);
    for (int i = 0; i < L; ++i) s.timestamps[i] = i;
    return s;
}

}  // namespace

TEST_CASE("load_series parses a well-formed file") {
    const std::string path = temp_file("flooddan_ok.csv");
    write_file(path,
               "timestamp,rain_01,rain_02,runoff\n"
               "2001-06-01T00:00:00,0.0,1.5,10\n"
               "2001-06-01T01:00:00,2.5,0.0,12\n"
               "2001-06-01T02:00:00,0.0,0.0,11\n");
    const HydroSeries s = load_series(path, {});
    CHECK(s.length() == 3);
    CHECK(s.station_count() == 2);
    CHECK(s.rainfall(1, 0) == doctest::Approx(2.5));
    CHECK(s.runoff[2] == doctest::Approx(11.0));
}

TEST_CASE("load_series reorders rows by timestamp") {
    const std::string path = temp_file("flooddan_shuffled.csv");
    write_file(path,
               "timestamp,rain_01,runoff\n"
               "2001-06-01T02:00:00,3,13\n"
               "2001-06-01T00:00:00,1,11\n"
               "2001-06-01T01:00:00,2,12\n");
    const HydroSeries s = load_series(path, {});
    CHECK(s.runoff[0] == 11.0);
    CHECK(s.runoff[2] == 13.0);
}

TEST_CASE("load_series rejects a 2-hour gap") {
    const std::string path = temp_file("flooddan_gap.csv");
    write_file(path,
               "timestamp,rain_01,runoff\n"
               "2001-06-01T01:00:00,0,10\n"
               "2001-06-01T03:00:00,0,10\n");
    try {
        load_series(path, {});
        FAIL("expected an integrity error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::integrity);
        CHECK(std::string(e.what()).find("2001-06-01T03:00:00") != std::string::npos);
    }
}

TEST_CASE("load_series reports negative rainfall with its row index") {
    const std::string path = temp_file("flooddan_neg.csv");
    std::string content = "timestamp,rain_01,runoff\n";
    for (int i = 0; i < 8; ++i) {
        char line[80];
        std::snprintf(line, sizeof(line), "2001-06-01T%02d:00:00,%g,10\n", i,
                      i == 5 ? -0.1 : 0.0);
        content += line;
    }
    write_file(path, content);
    try {
        load_series(path, {});
        FAIL("expected a data error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::data);
        CHECK(std::string(e.what()).find("row 5") != std::string::npos);
    }
}

TEST_CASE("load_series names the missing column") {
    const std::string path = temp_file("flooddan_nocol.csv");
    write_file(path, "timestamp,rain_01,flow\n2001-06-01T00:00:00,0,1\n");
    try {
        load_series(path, {});
        FAIL("expected a schema error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::schema);
        CHECK(std::string(e.what()).find("runoff") != std::string::npos);
    }
}

TEST_CASE("load_series rejects duplicate timestamps") {
    const std::string path = temp_file("flooddan_dup.csv");
    write_file(path,
               "timestamp,rain_01,runoff\n"
               "2001-06-01T00:00:00,0,10\n"
               "2001-06-01T00:00:00,0,10\n");
    CHECK_THROWS_AS(load_series(path, {}), Error);
}

TEST_CASE("series round-trips through the canonical format") {
    SyntheticConfig cfg;
    cfg.series_length = 64;
    cfg.station_count = 3;
    cfg.seed = 9;
    const HydroSeries s = generate_synthetic(cfg);
    const std::string path = temp_file("flooddan_roundtrip.csv");
    write_series(s, path);
    const HydroSeries back = load_series(path, {});
    CHECK(back.station_count() == 3);
    CHECK((back.rainfall - s.rainfall).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((back.runoff - s.runoff).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("split_chronological floor arithmetic") {
    const auto [train, test] = split_chronological(ramp_series(10, 1), 0.7);
    CHECK(train.length() == 7);
    CHECK(test.length() == 3);
    CHECK(train.runoff[6] == 6.0);
    CHECK(test.runoff[0] == 7.0);
}

TEST_CASE("split_chronological at the Tunxi record count") {
    // floor(0.7 * 43435) = 30404
    const auto [train, test] = split_chronological(ramp_series(43435, 1), 0.7);
    CHECK(train.length() == 30404);
    CHECK(test.length() == 13031);
}

TEST_CASE("split_chronological preserves every row exactly once") {
    const HydroSeries s = ramp_series(101, 2, 0.5);
    const auto [train, test] = split_chronological(s, 0.37);
    CHECK(train.length() + test.length() == s.length());
    for (Eigen::Index i = 0; i < train.length(); ++i) CHECK(train.runoff[i] == s.runoff[i]);
    for (Eigen::Index i = 0; i < test.length(); ++i)
        CHECK(test.runoff[i] == s.runoff[train.length() + i]);
}

TEST_CASE("split_chronological size and config errors") {
    CHECK_THROWS_AS(split_chronological(ramp_series(10, 1), 1.2), Error);
    // L=30, fraction 0.9: test segment of 3 rows cannot hold a T=24, t=6 window
    try {
        split_chronological(ramp_series(30, 1), 0.9, 31);
        FAIL("expected a size error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::size);
    }
}

TEST_CASE("normalizer maps endpoints and midpoint") {
    HydroSeries s = ramp_series(3, 1);
    s.runoff << 2, 4, 6;
    s.rainfall << 2, 4, 6;
    const Normalizer n = Normalizer::fit(s);
    const HydroSeries out = n.apply(s);
    CHECK(out.runoff[0] == 0.0);
    CHECK(out.runoff[1] == 0.5);
    CHECK(out.runoff[2] == 1.0);
    CHECK(out.rainfall(1, 0) == 0.5);
}

TEST_CASE("normalizer maps a constant channel to zero and inverts to the constant") {
    HydroSeries s = ramp_series(3, 1);
    s.runoff << 5, 5, 5;
    const Normalizer n = Normalizer::fit(s);
    const HydroSeries out = n.apply(s);
    CHECK(out.runoff.cwiseAbs().maxCoeff() == 0.0);
    CHECK(n.denormalize_runoff(0.7) == 5.0);
}

TEST_CASE("normalizer extrapolates beyond the training maximum without clipping") {
    HydroSeries s = ramp_series(2, 1);
    s.runoff << 0, 10;
    const Normalizer n = Normalizer::fit(s);
    CHECK(n.normalize_runoff(12.0) == doctest::Approx(1.2));
}

TEST_CASE("normalize then invert is the identity") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 5000.0);
    SyntheticConfig cfg;
    cfg.series_length = 200;
    cfg.station_count = 4;
    cfg.seed = 3;
    const HydroSeries s = generate_synthetic(cfg);
    const Normalizer n = Normalizer::fit(s);
    for (int i = 0; i < 200; ++i) {
        const double v = u(rng);
        const double back = n.denormalize_runoff(n.normalize_runoff(v));
        CHECK(std::abs(back - v) <= 1e-9 * std::max(1.0, std::abs(v)));
    }
}

TEST_CASE("window counts match the closed form") {
    WindowConfig cfg{24, 6};
    const auto labeled = make_windows(ramp_series(40, 2), cfg, true);
    CHECK(labeled.size() == 11);  // 40 - 24 - 6 + 1

    const auto single = make_windows(ramp_series(30, 2), cfg, true);
    CHECK(single.size() == 1);
    CHECK(*single[0].y == 29.0);  // runoff[29]

    const auto unlabeled = make_windows(ramp_series(24, 2), cfg, false);
    CHECK(unlabeled.size() == 1);
    CHECK_FALSE(unlabeled[0].y.has_value());
}

TEST_CASE("window counts match brute-force enumeration") {
    for (int T : {4, 8, 24}) {
        if (T < 8) continue;  // below the encoder receptive field, rejected by config
        for (int t : {1, 6}) {
            for (int L = T + t; L <= T + t + 50; L += 7) {
                // brute force: count window starts k with k+T+t-1 < L
                int expected = 0;
                for (int k = 0;; ++k) {
                    if (k + T + t - 1 >= L) break;
                    ++expected;
                }
                WindowConfig cfg{T, t};
                const auto got = make_windows(ramp_series(L, 1), cfg, true);
                CHECK(static_cast<int>(got.size()) == expected);
            }
        }
    }
}

TEST_CASE("window contents follow the layout") {
    WindowConfig cfg{8, 2};
    HydroSeries s = ramp_series(12, 2, 1.0);
    for (int i = 0; i < 12; ++i) {
        s.rainfall(i, 0) = 10.0 + i;
        s.rainfall(i, 1) = 100.0 + i;
    }
    const auto samples = make_windows(s, cfg, true);
    REQUIRE(samples.size() == 3);
    const auto& w = samples[1];  // k = 1
    CHECK(w.source_index == 1);
    CHECK(w.x.rows() == 2);
    CHECK(w.x.cols() == 8);
    CHECK(w.x(0, 0) == 11.0);
    CHECK(w.x(1, 7) == 108.0);
    CHECK(w.y_history[0] == 1.0);
    CHECK(w.y_history[7] == 8.0);
    CHECK(*w.y == 10.0);  // runoff[1 + 8 + 2 - 1]
}

TEST_CASE("make_windows rejects short series with the minimum length") {
    WindowConfig cfg{24, 6};
    try {
        make_windows(ramp_series(20, 1), cfg, true);
        FAIL("expected size error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::size);
        CHECK(std::string(e.what()).find("30") != std::string::npos);
    }
}

TEST_CASE("synthetic: pure baseflow when no storms") {
    SyntheticConfig cfg;
    cfg.storm_rate = 0.0;
    cfg.baseflow = 10.0;
    cfg.noise_amplitude = 0.0;
    cfg.series_length = 100;
    const HydroSeries s = generate_synthetic(cfg);
    CHECK(s.rainfall.cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.runoff.array() - 10.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic: deterministic under a fixed seed") {
    SyntheticConfig cfg;
    cfg.series_length = 300;
    cfg.seed = 42;
    cfg.noise_amplitude = 2.0;
    const HydroSeries a = generate_synthetic(cfg);
    const HydroSeries b = generate_synthetic(cfg);
    CHECK((a.rainfall - b.rainfall).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.runoff - b.runoff).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic: doubling storm intensity never reduces runoff") {
    SyntheticConfig cfg;
    cfg.series_length = 500;
    cfg.seed = 7;
    cfg.noise_amplitude = 0.0;
    const HydroSeries base = generate_synthetic(cfg);
    SyntheticConfig doubled = cfg;
    doubled.storm_intensity *= 2.0;
    const HydroSeries more = generate_synthetic(doubled);
    CHECK((more.runoff - base.runoff).minCoeff() >= 0.0);
    CHECK((more.rainfall - base.rainfall).minCoeff() >= 0.0);
}

TEST_CASE("synthetic: runoff stays finite and non-negative with noise") {
    SyntheticConfig cfg;
    cfg.series_length = 800;
    cfg.seed = 5;
    cfg.noise_amplitude = 30.0;
    cfg.baseflow = 5.0;
    const HydroSeries s = generate_synthetic(cfg);
    CHECK(s.runoff.minCoeff() >= 0.0);
    CHECK(s.runoff.allFinite());
}

TEST_CASE("synthetic config validation") {
    SyntheticConfig cfg;
    cfg.series_length = 10;
    CHECK_THROWS_AS(generate_synthetic([&] {
                        SyntheticConfig c = cfg;
                        c.station_count = 0;
                        return c;
                    }()),
                    Error);
    SyntheticConfig bad;
    bad.response_time = 0.0;
    CHECK_THROWS_AS(generate_synthetic(bad), Error);
}
