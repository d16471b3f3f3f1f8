#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "stockpred/network.hpp"
#include "stockpred/preprocess.hpp"

namespace stockpred {

inline constexpr int kModelFormatVersion = 1;

struct Provenance {
    std::string symbol;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> config_echo;
    std::string created_utc; // caller-supplied; the only field allowed to differ between rewrites
    bool checkpoint = false;
};

// JSON document: format version, model spec, scaler, weight arrays
// (row-major, each value printed with 17 significant digits so binary64
// round-trips exactly), provenance. Keys serialize sorted, so identical
// models produce identical bytes apart from created_utc.
void save_model(const NetworkState& state, const ModelSpec& spec, const ScalerParams& scaler,
                const Provenance& provenance, const std::filesystem::path& path);

struct LoadedModel {
    NetworkState state;
    ModelSpec spec;
    ScalerParams scaler;
    Provenance provenance;
};

// Errors: IoFailure, ParseError, UnknownVersion, ShapeMismatch, CorruptNumber.
LoadedModel load_model(const std::filesystem::path& path);

} // namespace stockpred
