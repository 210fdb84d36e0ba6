#include "menas/arch.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace menas {

namespace {

bool multiple_of_8(int v) { return v > 0 && v % 8 == 0; }

void check_conv(const ConvStage& s, int index, std::vector<Violation>& out) {
    if (s.kernel != 3 && s.kernel != 5) {
        out.push_back({index, "kernel", "kernel must be 3 or 5, got " + std::to_string(s.kernel)});
    }
    if (s.in_channels <= 0) {
        out.push_back({index, "in", "in_channels must be positive"});
    }
    if (!multiple_of_8(s.out_channels)) {
        out.push_back({index, "out", "out_channels must be a positive multiple of 8, got " +
                                         std::to_string(s.out_channels)});
    }
    if (!multiple_of_8(s.bottleneck_width)) {
        out.push_back({index, "bottleneck", "bottleneck_width must be a positive multiple of 8, got " +
                                                std::to_string(s.bottleneck_width)});
    }
    if (s.layers < 1) {
        out.push_back({index, "layers", "layers must be >= 1"});
    }
    if (s.stride < 1) {
        out.push_back({index, "stride", "stride must be >= 1"});
    }
    if (s.has_pool && s.stride % 2 != 0) {
        out.push_back({index, "has_pool", "pooled stage needs an even stride (the pool supplies a factor 2)"});
    }
}

}  // namespace

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const Violation& v : violations) {
        os << "stage C" << v.stage_index << " [" << v.field << "]: " << v.message << "\n";
    }
    return os.str();
}

ValidationReport validate(const Architecture& arch) {
    ValidationReport report;
    for (int i = 0; i < kNumConvStages; ++i) {
        check_conv(arch.conv_stages[i], i + 1, report.violations);
    }
    const TransformerStage& t = arch.transformer;
    if (t.in_channels <= 0) {
        report.violations.push_back({6, "in", "in_channels must be positive"});
    }
    if (t.out_channels <= 0) {
        report.violations.push_back({6, "out", "out_channels must be positive"});
    }
    if (!multiple_of_8(t.hidden_dim)) {
        report.violations.push_back({6, "hidden_dim", "hidden_dim must be a positive multiple of 8, got " +
                                                          std::to_string(t.hidden_dim)});
    }
    if (!multiple_of_8(t.dim_feedforward)) {
        report.violations.push_back(
            {6, "dim_feedforward",
             "dim_feedforward must be a positive multiple of 8, got " + std::to_string(t.dim_feedforward)});
    }
    if (t.layers < 1) {
        report.violations.push_back({6, "layers", "layers must be >= 1"});
    }
    for (int i = 1; i < kNumConvStages; ++i) {
        if (arch.conv_stages[i].in_channels != arch.conv_stages[i - 1].out_channels) {
            report.violations.push_back(
                {i + 1, "in",
                 "in_channels " + std::to_string(arch.conv_stages[i].in_channels) + " does not chain from C" +
                     std::to_string(i) + " out_channels " + std::to_string(arch.conv_stages[i - 1].out_channels)});
        }
    }
    if (t.in_channels != arch.conv_stages[kNumConvStages - 1].out_channels) {
        report.violations.push_back(
            {6, "in",
             "in_channels " + std::to_string(t.in_channels) + " does not chain from C5 out_channels " +
                 std::to_string(arch.conv_stages[kNumConvStages - 1].out_channels)});
    }
    return report;
}

int total_stride(const Architecture& arch) {
    int p = 1;
    for (const ConvStage& s : arch.conv_stages) p *= s.stride;
    return p;
}

std::int64_t conv_layer_flops(int kernel, int in_channels, int out_channels,
                              int out_height, int out_width) {
    return 2ll * out_height * out_width * out_channels *
           (static_cast<std::int64_t>(kernel) * kernel * in_channels);
}

FlopsCount estimate_flops(const Architecture& arch, const InputShape& shape) {
    const ValidationReport report = validate(arch);
    if (!report.ok()) {
        throw ValidationError("estimate_flops on invalid architecture:\n" + report.to_string());
    }
    const int downsample = total_stride(arch);
    if (shape.height % downsample != 0 || shape.width % downsample != 0) {
        throw ConfigError("input " + std::to_string(shape.height) + "x" + std::to_string(shape.width) +
                          " is not divisible by the total stride " + std::to_string(downsample));
    }

    FlopsCount count;
    int h = shape.height;
    int w = shape.width;
    for (int i = 0; i < kNumConvStages; ++i) {
        const ConvStage& s = arch.conv_stages[i];
        int stride = s.stride;
        if (s.has_pool) {
            h /= 2;
            w /= 2;
            stride /= 2;
        }
        std::int64_t stage = 0;
        for (int u = 0; u < s.layers; ++u) {
            const int unit_stride = (u == 0) ? stride : 1;
            const int c_in = (u == 0) ? s.in_channels : s.out_channels;
            stage += conv_layer_flops(1, c_in, s.bottleneck_width, h, w);
            const int h_out = h / unit_stride;
            const int w_out = w / unit_stride;
            stage += conv_layer_flops(s.kernel, s.bottleneck_width, s.bottleneck_width, h_out, w_out);
            stage += conv_layer_flops(1, s.bottleneck_width, s.out_channels, h_out, w_out);
            if (c_in != s.out_channels || unit_stride != 1) {
                stage += conv_layer_flops(1, c_in, s.out_channels, h_out, w_out);
            }
            h = h_out;
            w = w_out;
        }
        count.per_stage[i] = stage;
    }

    const TransformerStage& t = arch.transformer;
    const std::int64_t tokens = static_cast<std::int64_t>(h) * w;
    const std::int64_t d = t.hidden_dim;
    const std::int64_t f = t.dim_feedforward;
    std::int64_t stage = 2 * tokens * t.in_channels * d;
    stage += t.layers * 2 * tokens * (4 * d * d + 2 * tokens * d + 2 * d * f);
    stage += 2 * tokens * d * t.out_channels;
    count.per_stage[kNumStages - 1] = stage;

    for (std::int64_t v : count.per_stage) count.total += v;
    return count;
}

std::vector<ConvLayerSpec> conv_layer_expansion(const Architecture& arch) {
    std::vector<ConvLayerSpec> layers;
    for (const ConvStage& s : arch.conv_stages) {
        const int conv_stride = s.has_pool ? s.stride / 2 : s.stride;
        for (int u = 0; u < s.layers; ++u) {
            const int c_in = (u == 0) ? s.in_channels : s.out_channels;
            const int unit_stride = (u == 0) ? conv_stride : 1;
            layers.push_back({1, c_in, s.bottleneck_width, 1});
            layers.push_back({s.kernel, s.bottleneck_width, s.bottleneck_width, unit_stride});
            layers.push_back({1, s.bottleneck_width, s.out_channels, 1});
        }
    }
    return layers;
}

// ---------------------------------------------------------------------------
// Interchange format
// ---------------------------------------------------------------------------

namespace {

using Json = nlohmann::ordered_json;

int require_int(const Json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ArchParseError(path + "." + key + ": missing field");
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ArchParseError(path + "." + key + ": expected an integer");
    return v.get<int>();
}

}  // namespace

std::string to_json(const Architecture& arch) {
    Json doc;
    doc["name"] = arch.name;
    doc["stages"] = Json::array();
    for (const ConvStage& s : arch.conv_stages) {
        Json js;
        js["type"] = "conv";
        js["kernel"] = s.kernel;
        js["in"] = s.in_channels;
        js["out"] = s.out_channels;
        js["stride"] = s.stride;
        js["bottleneck"] = s.bottleneck_width;
        js["layers"] = s.layers;
        js["has_pool"] = s.has_pool;
        doc["stages"].push_back(std::move(js));
    }
    const TransformerStage& t = arch.transformer;
    Json jt;
    jt["type"] = "transformer";
    jt["in"] = t.in_channels;
    jt["out"] = t.out_channels;
    jt["hidden_dim"] = t.hidden_dim;
    jt["dim_feedforward"] = t.dim_feedforward;
    jt["layers"] = t.layers;
    doc["stages"].push_back(std::move(jt));
    return doc.dump(2) + "\n";
}

Architecture from_json(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ArchParseError(std::string("document: not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ArchParseError("document: expected a JSON object");

    Architecture arch;
    if (doc.contains("name")) {
        if (!doc["name"].is_string()) throw ArchParseError("name: expected a string");
        arch.name = doc["name"].get<std::string>();
    }
    if (!doc.contains("stages") || !doc["stages"].is_array()) {
        throw ArchParseError("stages: missing stage list");
    }
    const auto& stages = doc["stages"];
    if (stages.size() != kNumStages) {
        throw ArchParseError("stages: expected " + std::to_string(kNumStages) + " entries (C1..C6), got " +
                             std::to_string(stages.size()) +
                             (stages.size() == kNumStages - 1 ? "; stage 6 (transformer) is missing" : ""));
    }
    for (int i = 0; i < kNumStages; ++i) {
        const std::string path = "stages[" + std::to_string(i) + "]";
        const auto& js = stages[i];
        if (!js.is_object()) throw ArchParseError(path + ": expected an object");
        if (!js.contains("type") || !js["type"].is_string()) {
            throw ArchParseError(path + ".type: missing or not a string");
        }
        const std::string type = js["type"].get<std::string>();
        if (i < kNumConvStages) {
            if (type != "conv") throw ArchParseError(path + ".type: expected \"conv\" for C" +
                                                     std::to_string(i + 1) + ", got \"" + type + "\"");
            ConvStage s;
            s.kernel = require_int(js, path, "kernel");
            s.in_channels = require_int(js, path, "in");
            s.out_channels = require_int(js, path, "out");
            s.stride = require_int(js, path, "stride");
            s.bottleneck_width = require_int(js, path, "bottleneck");
            s.layers = require_int(js, path, "layers");
            if (!js.contains("has_pool")) throw ArchParseError(path + ".has_pool: missing field");
            if (!js["has_pool"].is_boolean()) throw ArchParseError(path + ".has_pool: expected a boolean");
            s.has_pool = js["has_pool"].get<bool>();
            arch.conv_stages[i] = s;
        } else {
            if (type != "transformer") {
                throw ArchParseError(path + ".type: expected \"transformer\" for C6, got \"" + type + "\"");
            }
            TransformerStage t;
            t.in_channels = require_int(js, path, "in");
            t.out_channels = require_int(js, path, "out");
            t.hidden_dim = require_int(js, path, "hidden_dim");
            t.dim_feedforward = require_int(js, path, "dim_feedforward");
            t.layers = require_int(js, path, "layers");
            arch.transformer = t;
        }
    }
    return arch;
}

void save_arch(const Architecture& arch, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << to_json(arch);
}

Architecture load_arch(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::string digest(const Architecture& arch) {
    const std::string doc = to_json(arch);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : doc) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace menas
