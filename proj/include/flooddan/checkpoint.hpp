#pragma once

#include <string>

#include <json.hpp>

#include "flooddan/models.hpp"
#include "flooddan/series.hpp"

namespace flooddan {

inline constexpr const char* kCheckpointVersion = "flooddan-1";

struct Checkpoint {
    ModelBundle bundle;
    HeadMode head_mode = HeadMode::residual;
    std::string stage;  // "pretrain" | "adapt" | "supervised"
    uint64_t seed = 0;
    Normalizer normalizer;  // runoff/rainfall scaling of the bundle's domain
    nlohmann::json extra;   // free-form provenance (config digest etc.)
};

// Versioned binary archive: metadata JSON + named float64 tensors. Loading
// validates every tensor name and shape against the architecture recorded in
// the metadata and refuses to reshape.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Dependency check used by pipeline stages: throws a dimension error when the
// checkpoint was built for a different station count or window length.
void require_architecture(const Checkpoint& ckpt, int station_count, int window_length);

}  // namespace flooddan
