#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace menas {

// ---------------------------------------------------------------------------
// Error categories (mapped to CLI exit codes 1/2/3).
// ---------------------------------------------------------------------------

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed architecture document; the message names the offending field path.
struct ArchParseError : ValidationError {
    using ValidationError::ValidationError;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScoringError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Stage types
// ---------------------------------------------------------------------------

/// Residual conv stage (C1..C5). `layers` counts bottleneck units; each unit
/// expands to a 1x1 reduce, a kxk conv, and a 1x1 expand. `has_pool` marks the
/// pooled variant: a 2x2/stride-2 max-pool at stage entry that realizes a
/// factor 2 of the stage stride.
struct ConvStage {
    int kernel = 3;
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
    int bottleneck_width = 0;
    int layers = 1;
    bool has_pool = false;

    bool operator==(const ConvStage&) const = default;
};

/// Transformer encoder stage (C6): linear in-projection to hidden_dim,
/// `layers` encoder layers (self-attention + feed-forward), linear
/// out-projection to out_channels.
struct TransformerStage {
    int in_channels = 0;
    int out_channels = 0;
    int hidden_dim = 0;
    int dim_feedforward = 0;
    int layers = 1;

    bool operator==(const TransformerStage&) const = default;
};

inline constexpr int kNumConvStages = 5;
inline constexpr int kNumStages = 6;

/// The unit of search: five conv stages followed by one transformer stage.
/// Immutable by convention once built; all operations take copies or const
/// references.
struct Architecture {
    std::string name;
    std::array<ConvStage, kNumConvStages> conv_stages{};
    TransformerStage transformer{};

    bool operator==(const Architecture&) const = default;
};

struct InputShape {
    int height = 320;
    int width = 320;
    int channels = 3;

    bool operator==(const InputShape&) const = default;
};

struct FlopsCount {
    std::int64_t total = 0;
    std::array<std::int64_t, kNumStages> per_stage{};
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    int stage_index = 0;  // 1-based (C1..C6)
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

/// Checks every stage invariant and the in/out channel chaining. Violations
/// are data, not failures: always returns, never throws.
ValidationReport validate(const Architecture& arch);

/// Product of the stage strides (the total spatial downsample; pooling is
/// folded into the stride by construction).
int total_stride(const Architecture& arch);

// ---------------------------------------------------------------------------
// FLOPs
// ---------------------------------------------------------------------------

/// 2 * H_out * W_out * C_out * (k^2 * C_in) — multiply-accumulates times two.
std::int64_t conv_layer_flops(int kernel, int in_channels, int out_channels,
                              int out_height, int out_width);

/// Deterministic MAC count over the realized structure: three convs plus the
/// projection shortcut where shapes change per bottleneck unit, and
/// in-projection + encoder layers (QKV/O, attention, FFN) + out-projection
/// for the transformer stage. Pooling, residual adds, softmax and scaling
/// ops are not counted.
/// Throws ValidationError on an invalid architecture, ConfigError when the
/// shape is not divisible by the total stride.
FlopsCount estimate_flops(const Architecture& arch, const InputShape& shape);

// ---------------------------------------------------------------------------
// Per-layer expansion
// ---------------------------------------------------------------------------

/// One serial conv layer of the expanded CNN trunk (shortcut projections are
/// parallel paths and excluded). Shared by the entropy accounting and the
/// geometric-mean summaries.
struct ConvLayerSpec {
    int kernel = 1;
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
};

std::vector<ConvLayerSpec> conv_layer_expansion(const Architecture& arch);

// ---------------------------------------------------------------------------
// Interchange format
// ---------------------------------------------------------------------------

/// Canonical JSON document: {"name", "stages": [...]} where conv stages carry
/// type/kernel/in/out/stride/bottleneck/layers/has_pool and the transformer
/// stage type/in/out/hidden_dim/dim_feedforward/layers.
std::string to_json(const Architecture& arch);

/// Parses a document; throws ArchParseError naming the field path.
Architecture from_json(const std::string& text);

void save_arch(const Architecture& arch, const std::filesystem::path& path);
Architecture load_arch(const std::filesystem::path& path);

/// Stable 16-hex-digit digest of the canonical document.
std::string digest(const Architecture& arch);

}  // namespace menas
