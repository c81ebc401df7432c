#pragma once

#include "dreamid/image.hpp"
#include "dreamid/nn/transformer.hpp"

#include <filesystem>
#include <vector>

namespace dreamid {

struct AlignedFace {
    enum class Source { real, generated };
    Image pixels;  // values in [0,1], square, backbone input resolution
    std::string identity_id;
    Source source = Source::real;
};

// Ordered CLS bundle from the backbone: one vector per extraction block plus
// the final identity vector. layer_indices uses depth+1 for the final vector,
// which is read after the last norm rather than from a block output.
struct MultiScaleFeature {
    std::vector<Vec> vectors;
    std::vector<int> layer_indices;
};

struct PseudoWords {
    std::vector<Vec> embeddings;
    int k = 0;

    Mat as_matrix() const;  // k x d_text
};

struct EncoderConfig {
    int depth = 12;
    int d_b = 64;
    int d_text = 128;
    int k = 2;
    int input_resolution = 64;
    int patch_size = 8;
    int proj_hidden = 128;  // 2 * d_b
    std::vector<int> extract_layers;  // defaults to quartile blocks
    bool multiscale = true;           // false: projector reads only v_final
    std::string backbone_kind = "face_vit";  // or "generic" (ablation)

    void finalize();  // fills defaults, validates, throws ConfigError
    int n_patches() const;
    int patch_dim() const { return 3 * patch_size * patch_size; }
    int feature_count() const { return static_cast<int>(extract_layers.size()) + 1; }
    int proj_input_dim() const { return multiscale ? feature_count() * d_b : d_b; }

    nn::Json to_json() const;
    static EncoderConfig from_json(const nn::Json& j);
};

class M2Encoder {
  public:
    M2Encoder(EncoderConfig config, std::uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    MultiScaleFeature extract_multiscale_features(const AlignedFace& face) const;
    PseudoWords project_to_embeddings(const MultiScaleFeature& feat) const;
    PseudoWords encode_identity(const AlignedFace& face) const;

    // Training path: same computation, on a caller-owned tape so gradients
    // reach the backbone and projector weights. Returns the k x d_text node.
    nn::Tape::Id encode_on_tape(nn::Tape& tape, const AlignedFace& face) const;

    static Scalar reg_loss(const PseudoWords& words);
    static std::vector<Vec> reg_loss_grad(const PseudoWords& words);

    Vec final_identity_vector(const Image& face_pixels) const;

    void save(const std::filesystem::path& path) const;
    static M2Encoder load(const std::filesystem::path& path);

    std::uint64_t checksum() const { return params_.value_checksum(); }

    // Patch rows in (channel, y, x) order; throws ShapeError on bad input.
    Mat patchify(const Image& pixels) const;

  private:
    nn::Tape::Id backbone_on_tape(nn::Tape& tape, const Mat& patches,
                                  std::vector<nn::Tape::Id>* cls_nodes) const;
    nn::Tape::Id features_on_tape(nn::Tape& tape, const Mat& patches) const;
    nn::Tape::Id project_on_tape(nn::Tape& tape, nn::Tape::Id features) const;

    EncoderConfig cfg_;
    mutable nn::ParamStore params_;
};

}  // namespace dreamid
