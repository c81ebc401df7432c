#pragma once

#include "dreamid/diffusion.hpp"
#include "dreamid/facedet.hpp"
#include "dreamid/metrics.hpp"

#include <filesystem>
#include <set>
#include <vector>

namespace dreamid {

struct CelebrityList {
    std::vector<std::string> names;  // deduplicated, first-seen order
    std::string provenance;
    int duplicates_dropped = 0;
};

CelebrityList ingest_names(const std::filesystem::path& path);
CelebrityList ingest_names(std::istream& in, const std::string& provenance);

// One self-augmented training candidate: identity face, editing prompt
// (placeholder form) and edited image, plus the ranking scores.
struct Triplet {
    std::string candidate_id;
    std::string identity_id;
    std::string face_ref;    // aligned identity face, relative path
    std::string edit_prompt; // contains "S*", never the raw name
    std::string edited_ref;  // edited image, relative path
    std::uint64_t seed = 0;
    Scalar id_score = 0;
    Scalar clip_score = 0;
    bool kept = false;
};

struct ManifestEntry {
    std::string kind;  // "reconstruction" | "selfaug"
    std::string identity_id;
    std::string face;
    std::string target;
    std::string prompt;
    std::uint64_t seed = 0;
    bool has_scores = false;
    Scalar id_score = 0;
    Scalar clip_score = 0;
};

struct DatasetManifest {
    static constexpr int kSchemaVersion = 1;

    std::vector<ManifestEntry> entries;
    std::string config_hash;

    int count(const std::string& kind) const;
    std::set<std::string> identities(const std::string& kind) const;

    // Line-delimited: a versioned JSON header line, then one canonically
    // ordered JSON record per entry, sorted by (kind, identity, target).
    void write(const std::filesystem::path& path) const;
    static DatasetManifest read(const std::filesystem::path& path);
};

// Ranks candidates per edit prompt by the sum of min-max-normalized
// id_score and clip_score, keeps the top floor(keep_fraction*n) (minimum 1),
// ties broken by candidate_id. Scores must already be set.
std::vector<Triplet> score_and_filter(std::vector<Triplet> candidates,
                                      Scalar keep_fraction = 0.25);

// Builds the mixed manifest; every referenced file must exist under base_dir.
DatasetManifest write_manifest(const std::vector<Triplet>& triplets,
                               const std::vector<ManifestEntry>& recon_entries,
                               const std::string& config_hash,
                               const std::filesystem::path& base_dir,
                               const std::filesystem::path& manifest_path);

struct PipelineConfig {
    int per_name = 4;   // source faces per name
    int per_pair = 4;   // edited images per (name, template)
    Scalar keep_fraction = 0.25;
    std::uint64_t seed = 0;
    Index min_side = 0;  // <= 0: proportional default
    SamplerConfig sampler;

    nn::Json to_json() const;
};

struct PipelineStats {
    int source_generated = 0;
    int faces_accepted = 0;
    int faces_rejected = 0;
    int candidates = 0;
    int kept = 0;
    int names_skipped = 0;
};

struct SourceFace {
    std::string name;
    Image image;
    std::uint64_t seed = 0;
};

// Step 2 generation: per_name images per name from the source-face prompt
// template, seeds recorded. Per-item failures are logged and skipped.
std::vector<SourceFace> generate_source_faces(const CelebrityList& names,
                                              const ToyBackend& backend, int per_name,
                                              const PipelineConfig& cfg);

struct IdentityFace {
    std::string name;  // used only to render prompts, never persisted
    std::string id;    // anonymized identity key stored in the manifest
    Image pixels;      // aligned crop
    std::string ref;   // relative path once saved
};

// Stable anonymized identity key; raw names never reach the manifest.
std::string identity_key(const std::string& name);

// Step 3 generation: per_pair edited images per (identity, template); the
// stored prompt carries "S*" in place of the name. Scores are not yet set.
// Edited images are saved content-addressed under out_dir.
std::vector<Triplet> generate_edited_images(const std::vector<IdentityFace>& identities,
                                            const std::vector<PromptTemplate>& templates,
                                            const ToyBackend& backend, int per_pair,
                                            const PipelineConfig& cfg,
                                            const std::filesystem::path& out_dir);

// End-to-end steps 1-4: source faces per name, crop/align/filter, edited
// images per (name, edit template), scoring and the top-fraction cut.
// Writes images content-addressed under out_dir and the manifest at
// out_dir/manifest.jsonl.
DatasetManifest build_dataset(const CelebrityList& names,
                              const std::vector<PromptTemplate>& edit_templates,
                              const ToyBackend& backend,
                              const IdentityScorer& id_scorer,
                              const TextImageScorer& clip_scorer,
                              const PipelineConfig& cfg,
                              const std::vector<ManifestEntry>& recon_entries,
                              const std::filesystem::path& out_dir,
                              PipelineStats* stats = nullptr);

// "X face, looking at the camera" source-face prompt template.
PromptTemplate source_face_template();
// Prompt text used for the text-image score: "S*" replaced by "face".
std::string class_substituted_prompt(const std::string& prompt);
// Content-addressed relative path ("images/ab/<hash>.ppm") for raw bytes.
std::filesystem::path content_address(const std::string& bytes);

}  // namespace dreamid
