#pragma once

#include "dreamid/facedet.hpp"

#include <memory>
#include <vector>

namespace dreamid {

Scalar cosine_similarity(const Vec& a, const Vec& b);

// Joint text-image embedding scorer with a shared cosine contract. The toy
// default embeds images by pooled colour statistics and text by hashed token
// embeddings through fixed seeded maps.
class TextImageScorer {
  public:
    virtual ~TextImageScorer() = default;
    virtual Vec embed_image(const Image& img) const = 0;
    virtual Vec embed_text(const std::string& text) const = 0;
    virtual Scalar cosine(const Vec& a, const Vec& b) const { return cosine_similarity(a, b); }

    // mean cosine between the prompt embedding and each image embedding
    Scalar text_alignment(const std::vector<Image>& images, const std::string& prompt) const;
};

class ToyJointScorer final : public TextImageScorer {
  public:
    explicit ToyJointScorer(std::uint64_t seed = 7, int dim = 64);
    Vec embed_image(const Image& img) const override;
    Vec embed_text(const std::string& text) const override;

  private:
    int dim_;
    Mat img_map_;   // 192 x dim (8x8 pooled RGB)
    Mat word_map_;  // vocab x dim
};

// Identity scorer: both faces go through the same detect+crop path, then a
// frozen face backbone's final identity vector, then cosine.
class IdentityScorer {
  public:
    // reference backbone with a fixed seed, independent of any trained encoder
    explicit IdentityScorer(std::uint64_t seed = 11, int resolution = 64);
    explicit IdentityScorer(std::shared_ptr<const M2Encoder> backbone);

    Vec embed_face(const Image& aligned_pixels) const;
    // -1 sentinel when no face is detectable in generated; throws if the
    // input face itself has no detectable face.
    Scalar face_similarity(const Image& input_face, const Image& generated) const;

  private:
    std::shared_ptr<const M2Encoder> backbone_;
    BlobFaceDetector detector_;
    mutable Vec neutral_;  // embedding of a flat gray image, computed lazily
};

}  // namespace dreamid
