#pragma once

#include <map>
#include <string>

#include "s2c/tensor.hpp"

namespace s2c {

/// Wall-time attribution for one named stage of a forward pass.
struct StageTimings {
    double spatial_ms = 0;   ///< spatial-interaction sub-blocks
    double channel_ms = 0;   ///< channel-aggregation sub-blocks
    double other_ms = 0;     ///< resamplers, projections, entropy nets
};

/// Collected per-stage buckets for one model evaluation.
struct ModelProfile {
    std::map<std::string, StageTimings> stages;
    double end_to_end_ms = 0;

    double spatial_total() const {
        double t = 0;
        for (auto& [k, v] : stages) t += v.spatial_ms;
        return t;
    }
    double channel_total() const {
        double t = 0;
        for (auto& [k, v] : stages) t += v.channel_ms;
        return t;
    }
    double other_total() const {
        double t = 0;
        for (auto& [k, v] : stages) t += v.other_ms;
        return t;
    }
    double bucket_total() const { return spatial_total() + channel_total() + other_total(); }
};

/// Fully-described latency report (evaluation-module currency).
struct LatencyProfile {
    ModelProfile median;                 ///< per-bucket medians over reps
    std::vector<ModelProfile> reps;      ///< raw per-rep measurements
    std::string device = "cpu";
    i64 input_h = 0, input_w = 0;
    int repetitions = 0, warmup = 0;
};

}  // namespace s2c
