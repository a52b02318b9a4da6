#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "zoomlab/channel.hpp"
#include "zoomlab/codec.hpp"
#include "zoomlab/common.hpp"
#include "zoomlab/dynamics.hpp"

namespace zoomlab {

using json = nlohmann::json;

/// Parses the key/value + [table] experiment file format into JSON.
/// Values: strings, booleans, integers, floats, (nested) arrays.
json parse_config_text(const std::string& text);

/// Sorted-key, fixed-format serialization; equal configs hash equally.
std::string canonical_json(const json& j);
uint64_t config_hash(const json& j);

/// Config with the non-semantic run fields (output directory, worker count)
/// removed; the experiment hash is taken over this form.
json semantic_config(json j);

enum class CodecType { Zoom, FixedQuantizer, SignZoom, None };

struct ExperimentConfig {
    json raw;
    uint64_t hash = 0;

    SystemModel model;
    ChannelModel channel;

    CodecType codec_type = CodecType::None;
    ZoomParams zoom;
    double delta0 = 1.0;
    // fixed_quantizer / sign_zoom coder knobs
    int fm_levels = 4;
    double fm_delta = 1.0;
    double fm_gain = 0.0;  // 0 -> from model certificate / linear gain

    int64_t horizon = 1000;
    int replications = 1;
    uint64_t seed = 1;
    int workers = 0;  // 0 = hardware concurrency
    std::string out_dir = "out";
    std::vector<int64_t> snapshot_times;
    int64_t burn_in = 0;

    double x0_sigma = 1.0;
    Vec x0_fixed;  // empty -> gaussian draw

    std::vector<std::string> estimators;  // selection
    std::string escape_threshold = "poly";
    double escape_power = 1.0;
    double ams_box_halfwidth = 8.0;
    double drift_f = 0.0;  // 0 -> 8 * floor
    int hist_bins = 64;
};

ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::string& path);

/// Row-major numeric CSV (for explicit channel kernels).
std::vector<double> read_matrix_csv(const std::string& path, int& rows, int& cols);

}  // namespace zoomlab
