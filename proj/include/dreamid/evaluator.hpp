#pragma once

#include "dreamid/trainer.hpp"

#include <optional>
#include <set>

namespace dreamid {

struct EvalIdentity {
    std::string identity_id;
    Image face;  // aligned, encoder input resolution
};

// One (identity, prompt) cell of the evaluation grid.
struct EvalCell {
    std::string identity_id;
    std::string prompt;  // placeholder form
    int images = 0;
    Scalar text_alignment = 0;
    Scalar face_similarity = 0;
};

struct EncodingTimeStats {
    int repeats = 0;
    Scalar median_seconds = 0;
    Scalar p95_seconds = 0;

    nn::Json to_json() const;
};

struct EvalReport {
    std::vector<EvalCell> cells;
    Scalar text_alignment = 0;   // mean over cells
    Scalar face_similarity = 0;  // mean over cells
    std::optional<EncodingTimeStats> timing;

    nn::Json to_json() const;
};

struct EvalConfig {
    int images_per_cell = 4;
    SamplerConfig sampler;
    std::uint64_t seed = 0;
    int timing_repeats = 0;  // 0: skip the timing pass

    nn::Json to_json() const;
};

// Held-out protocol: every evaluation identity must be absent from the
// training set (hard error naming offenders), then images_per_cell samples
// per (identity, prompt) with per-image seeds, scored for prompt agreement
// and identity agreement against the input face.
EvalReport run_protocol(const M2Encoder& encoder, const DiffusionBackend& backend,
                        const std::vector<EvalIdentity>& identities,
                        const std::vector<PromptTemplate>& prompts,
                        const TextImageScorer& clip_scorer,
                        const IdentityScorer& id_scorer, const EvalConfig& cfg,
                        const std::set<std::string>* train_identities = nullptr);

EncodingTimeStats measure_encoding_time(const M2Encoder& encoder, const Image& face,
                                        int repeats);

struct ComparisonRow {
    std::string method;
    Scalar text_alignment = 0;
    Scalar face_similarity = 0;
    Scalar encoding_seconds = 0;
};

std::string render_comparison_table(const std::vector<ComparisonRow>& rows);

struct AblationRow {
    std::string id_encoder;  // "face" | "generic"
    bool ms_feat = true;
    int k = 2;
    Scalar text_alignment = 0;
    Scalar face_similarity = 0;
};

// Re-evaluates encoder variants around a base configuration: backbone kind,
// multi-scale features on/off, and embedding count 1..3. The returned rows
// render as a design-choice table via render_ablation_table.
std::vector<AblationRow> run_ablation(const EncoderConfig& base, std::uint64_t encoder_seed,
                                      const DiffusionBackend& backend,
                                      const std::vector<EvalIdentity>& identities,
                                      const std::vector<PromptTemplate>& prompts,
                                      const TextImageScorer& clip_scorer,
                                      const IdentityScorer& id_scorer,
                                      const EvalConfig& cfg);

std::string render_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace dreamid
