#include "zoomlab/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace zoomlab {

namespace {

std::string strip(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Drops a # comment unless it sits inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

json parse_value(const std::string& text, int line_no);

json parse_array(const std::string& text, int line_no) {
    json arr = json::array();
    std::string inner = strip(text.substr(1, text.size() - 2));
    if (inner.empty()) return arr;
    // split on top-level commas
    int depth = 0;
    bool quoted = false;
    std::string cur;
    auto flush = [&] {
        arr.push_back(parse_value(strip(cur), line_no));
        cur.clear();
    };
    for (char ch : inner) {
        if (ch == '"') quoted = !quoted;
        if (!quoted) {
            if (ch == '[') ++depth;
            if (ch == ']') --depth;
            if (ch == ',' && depth == 0) {
                flush();
                continue;
            }
        }
        cur.push_back(ch);
    }
    flush();
    return arr;
}

json parse_value(const std::string& text, int line_no) {
    if (text.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
    if (text.front() == '[') {
        if (text.back() != ']')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
        return parse_array(text, line_no);
    }
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
        return json(text.substr(1, text.size() - 2));
    }
    if (text == "true") return json(true);
    if (text == "false") return json(false);
    // integer if it parses exactly as one, float otherwise
    try {
        size_t pos = 0;
        const long long i = std::stoll(text, &pos);
        if (pos == text.size()) return json(i);
    } catch (...) {
    }
    try {
        size_t pos = 0;
        const double d = std::stod(text, &pos);
        if (pos == text.size()) return json(d);
    } catch (...) {
    }
    throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value '" + text +
                      "'");
}

json* descend(json& root, const std::string& dotted, int line_no) {
    json* node = &root;
    std::istringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = strip(part);
        if (part.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": bad table name");
        node = &(*node)[part];
        if (!node->is_object() && !node->is_null())
            throw ConfigError("config line " + std::to_string(line_no) + ": '" + part +
                              "' is both a value and a table");
        if (node->is_null()) *node = json::object();
    }
    return node;
}

double number_or(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<double>();
}

int64_t integer_or(const json& j, const char* key, int64_t fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<int64_t>();
}

std::string string_or(const json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<std::string>();
}

}  // namespace

json parse_config_text(const std::string& text) {
    json root = json::object();
    json* table = &root;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated table header");
            table = descend(root, line.substr(1, line.size() - 2), line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        (*table)[key] = parse_value(value, line_no);
    }
    return root;
}

std::string canonical_json(const json& j) {
    // nlohmann objects iterate in key order; a fixed-indent dump is canonical.
    return j.dump(2);
}

uint64_t config_hash(const json& j) { return fnv1a64(j.dump()); }

json semantic_config(json j) {
    if (j.contains("run")) {
        j["run"].erase("out");
        j["run"].erase("workers");
    }
    return j;
}

std::vector<double> read_matrix_csv(const std::string& path, int& rows, int& cols) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open matrix CSV: " + path);
    std::vector<double> values;
    std::string line;
    rows = 0;
    cols = -1;
    while (std::getline(in, line)) {
        line = strip(line);
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ss(line);
        std::string cell;
        int c = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(strip(cell)));
            } catch (...) {
                throw ProtocolError("bad number in matrix CSV " + path + ": '" + cell + "'");
            }
            ++c;
        }
        if (cols < 0) cols = c;
        if (c != cols) throw ProtocolError("ragged rows in matrix CSV: " + path);
        ++rows;
    }
    if (rows == 0) throw ProtocolError("empty matrix CSV: " + path);
    return values;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.hash = config_hash(semantic_config(j));

    // ---- model ----
    const json jm = j.contains("model") ? j.at("model") : json::object();
    const std::string model_name = string_or(jm, "name", "linear");
    const int dim = static_cast<int>(integer_or(jm, "dimension", 1));
    const double gain = number_or(jm, "gain", 2.0);
    Vec diag;
    if (jm.contains("diag")) for (const auto& v : jm.at("diag")) diag.push_back(v.get<double>());
    cfg.model = make_model(model_name, dim, gain, diag);
    if (jm.contains("noise_sigma")) {
        const auto& ns = jm.at("noise_sigma");
        if (ns.is_array()) {
            cfg.model.noise_sigma.clear();
            for (const auto& v : ns) cfg.model.noise_sigma.push_back(v.get<double>());
            if (static_cast<int>(cfg.model.noise_sigma.size()) != cfg.model.dim)
                throw ConfigError("noise_sigma array length != model dimension");
        } else {
            cfg.model.noise_sigma.assign(static_cast<size_t>(cfg.model.dim), ns.get<double>());
        }
    }
    if (jm.contains("x0")) {
        const json& jx = jm.at("x0");
        cfg.x0_sigma = number_or(jx, "sigma", 1.0);
        if (jx.contains("value")) {
            for (const auto& v : jx.at("value")) cfg.x0_fixed.push_back(v.get<double>());
            if (static_cast<int>(cfg.x0_fixed.size()) != cfg.model.dim)
                throw ConfigError("x0 value length != model dimension");
        }
    }

    // ---- codec ----
    const json jc = j.contains("codec") ? j.at("codec") : json::object();
    const std::string ct = string_or(jc, "type", "none");
    if (ct == "zoom") {
        cfg.codec_type = CodecType::Zoom;
        cfg.zoom.levels = static_cast<int>(integer_or(jc, "K", 4));
        cfg.zoom.dim = cfg.model.dim;
        cfg.zoom.grid_step = number_or(jc, "s", 1.0);
        // alpha_exp / zoomout_exp / L are the interface names; n_in / n_out /
        // floor are accepted as synonyms
        cfg.zoom.zoom_in_exp =
            static_cast<int>(integer_or(jc, "alpha_exp", integer_or(jc, "n_in", 1)));
        cfg.zoom.zoom_out_exp =
            static_cast<int>(integer_or(jc, "zoomout_exp", integer_or(jc, "n_out", 1)));
        cfg.zoom.floor_delta = number_or(jc, "L", number_or(jc, "floor", 1.0));
        if (!cfg.model.certificate)
            throw ConfigError("zoom codec requires a model with a contraction certificate");
        cfg.zoom.contraction_a = cfg.model.certificate->a;
        cfg.zoom.validate();
        cfg.delta0 = number_or(jc, "delta0", 0.0);
        if (cfg.delta0 <= 0.0) {
            // default: |h_0| <= 1 for the x0 law's 99th percentile (2.58 sigma),
            // rounded up to keep slack
            const double spread =
                cfg.x0_fixed.empty() ? 3.0 * cfg.x0_sigma : linf_norm(cfg.x0_fixed) + 1.0;
            cfg.delta0 = std::max(1.0, spread) * 2.0;
        }
    } else if (ct == "fixed_quantizer") {
        cfg.codec_type = CodecType::FixedQuantizer;
        cfg.fm_levels = static_cast<int>(integer_or(jc, "K", 4));
        cfg.fm_delta = number_or(jc, "delta", 1.0);
        cfg.fm_gain = number_or(jc, "gain", 0.0);
    } else if (ct == "sign_zoom") {
        cfg.codec_type = CodecType::SignZoom;
        cfg.fm_delta = number_or(jc, "delta0", 1.0);
        cfg.fm_gain = number_or(jc, "gain", 0.0);
    } else if (ct == "none") {
        cfg.codec_type = CodecType::None;
    } else {
        throw ConfigError("unknown codec type: " + ct);
    }

    // ---- channel ----
    const json jch = j.contains("channel") ? j.at("channel") : json::object();
    const std::string kind = string_or(jch, "kind", "noiseless");
    int64_t alphabet = integer_or(jch, "alphabet", 0);
    if (alphabet == 0) {
        switch (cfg.codec_type) {
            case CodecType::Zoom: alphabet = cfg.zoom.symbol_count(); break;
            case CodecType::FixedQuantizer: alphabet = cfg.fm_levels + 1; break;
            case CodecType::SignZoom: alphabet = 2; break;
            case CodecType::None: alphabet = 2; break;
        }
    }
    if (kind == "noiseless") {
        cfg.channel = noiseless_channel(static_cast<int>(alphabet));
    } else if (kind == "erasure") {
        cfg.channel = erasure_channel(static_cast<int>(alphabet), number_or(jch, "epsilon", 0.0));
    } else if (kind == "bsc") {
        cfg.channel = bsc_channel(number_or(jch, "p", 0.0));
    } else if (kind == "general") {
        const std::string path = string_or(jch, "kernel_csv", "");
        if (path.empty()) throw ConfigError("general channel needs kernel_csv");
        int rows = 0, cols = 0;
        auto kernel = read_matrix_csv(path, rows, cols);
        cfg.channel = general_channel(std::move(kernel), rows, cols);
    } else {
        throw ConfigError("unknown channel kind: " + kind);
    }

    // rate/alphabet compatibility, checked before any simulation
    if (cfg.codec_type == CodecType::Zoom && cfg.zoom.symbol_count() > cfg.channel.inputs)
        throw ConfigError("zoom codec needs " + std::to_string(cfg.zoom.symbol_count()) +
                          " channel symbols but the channel has " +
                          std::to_string(cfg.channel.inputs));
    if (cfg.codec_type == CodecType::FixedQuantizer && cfg.fm_levels + 1 > cfg.channel.inputs)
        throw ConfigError("fixed quantizer needs K+1 channel symbols");
    if (cfg.codec_type == CodecType::SignZoom && cfg.channel.inputs < 2)
        throw ConfigError("sign coder needs a binary channel");

    // ---- run ----
    const json jr = j.contains("run") ? j.at("run") : json::object();
    cfg.horizon = integer_or(jr, "horizon", 1000);
    if (cfg.horizon < 1) throw ConfigError("horizon must be >= 1");
    cfg.replications = static_cast<int>(integer_or(jr, "replications", 1));
    if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
    cfg.seed = static_cast<uint64_t>(integer_or(jr, "seed", 1));
    cfg.workers = static_cast<int>(integer_or(jr, "workers", 0));
    cfg.out_dir = string_or(jr, "out", "out");
    cfg.burn_in = integer_or(jr, "burn_in", 0);
    if (jr.contains("snapshots"))
        for (const auto& v : jr.at("snapshots")) cfg.snapshot_times.push_back(v.get<int64_t>());

    // ---- estimators ----
    const json je = j.contains("estimators") ? j.at("estimators") : json::object();
    if (je.contains("select"))
        for (const auto& v : je.at("select")) cfg.estimators.push_back(v.get<std::string>());
    cfg.escape_threshold = string_or(je, "escape_threshold", "poly");
    cfg.escape_power = number_or(je, "escape_power", 1.0);
    cfg.ams_box_halfwidth = number_or(je, "ams_box", 8.0);
    cfg.drift_f = number_or(je, "drift_f", 0.0);
    cfg.hist_bins = static_cast<int>(integer_or(je, "hist_bins", 64));

    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json(parse_config_text(buf.str()));
}

}  // namespace zoomlab
