#pragma once

#include <cstdint>
#include <string>

#include "flooddan/series.hpp"

namespace flooddan {

// Parameters of the synthetic watershed generator. Rainfall is a sum of
// Poisson-arriving storm pulses shared across stations with random
// per-station intensity; runoff is baseflow plus the causal convolution of
// mean areal rainfall with a normalized exponential unit hydrograph.
struct SyntheticConfig {
    std::string name = "synthetic";
    int station_count = 11;        // d
    int series_length = 6000;      // L, hours
    double storm_rate = 0.035;     // storms per hour (Poisson)
    double storm_intensity = 6.0;  // mean peak intensity, mm/h
    double storm_duration = 10.0;  // mean duration, hours
    double response_time = 8.0;    // unit-hydrograph time constant, hours
    double peak_delay = 2.0;       // hours before the hydrograph responds
    double baseflow = 20.0;        // m^3/s
    double noise_amplitude = 0.0;  // bounded uniform noise on runoff
    uint64_t seed = 1;

    void validate(int min_length) const;
};

// Deterministic for a fixed config; runoff is non-negative, finite, and
// monotone in total rainfall when noise_amplitude is zero.
HydroSeries generate_synthetic(const SyntheticConfig& cfg);

}  // namespace flooddan
