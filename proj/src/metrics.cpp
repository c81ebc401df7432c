#include "dreamid/metrics.hpp"

#include "dreamid/conditioning.hpp"

namespace dreamid {

Scalar cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ShapeError("cosine: dimension mismatch");
    const Scalar na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

Scalar TextImageScorer::text_alignment(const std::vector<Image>& images,
                                       const std::string& prompt) const {
    if (images.empty()) throw ConfigError("text_alignment: empty image set");
    const Vec t = embed_text(prompt);
    Scalar total = 0.0;
    for (const Image& img : images) total += cosine(t, embed_image(img));
    return total / static_cast<Scalar>(images.size());
}

ToyJointScorer::ToyJointScorer(std::uint64_t seed, int dim) : dim_(dim) {
    Rng rng(seed ^ 0x6a6f696e74ull);
    img_map_ = randn(192, dim_, rng, 1.0 / std::sqrt(192.0));
    word_map_ = randn(4096, dim_, rng, 1.0);
}

Vec ToyJointScorer::embed_image(const Image& img) const {
    Image small = resize_bilinear(img, 8, 8);
    Vec feat(192);
    Index at = 0;
    for (int c = 0; c < 3; ++c)
        for (Index y = 0; y < 8; ++y)
            for (Index x = 0; x < 8; ++x) feat(at++) = small.rgb[c](y, x) - 0.5;
    return img_map_.transpose() * feat;
}

Vec ToyJointScorer::embed_text(const std::string& text) const {
    Tokenizer tok;
    tok.vocab_size = static_cast<int>(word_map_.rows());
    std::vector<int> ids = tok.tokenize(text);
    Vec out = Vec::Zero(dim_);
    if (ids.empty()) return out;
    for (int id : ids) out += word_map_.row(id).transpose();
    return out / static_cast<Scalar>(ids.size());
}

IdentityScorer::IdentityScorer(std::uint64_t seed, int resolution) {
    EncoderConfig cfg;
    cfg.input_resolution = resolution;
    cfg.finalize();
    backbone_ = std::make_shared<M2Encoder>(cfg, seed ^ 0x69645f7363ull);
}

IdentityScorer::IdentityScorer(std::shared_ptr<const M2Encoder> backbone)
    : backbone_(std::move(backbone)) {}

Vec IdentityScorer::embed_face(const Image& aligned_pixels) const {
    // centered against a neutral reference; raw backbone outputs cluster so
    // tightly that cosines would saturate near 1 for any pair of images
    if (neutral_.size() == 0) {
        const Index res = backbone_->config().input_resolution;
        Image gray(res, res);
        for (Mat& c : gray.rgb) c.setConstant(0.5);
        neutral_ = backbone_->final_identity_vector(gray);
    }
    return backbone_->final_identity_vector(aligned_pixels) - neutral_;
}

Scalar IdentityScorer::face_similarity(const Image& input_face,
                                       const Image& generated) const {
    if (generated.empty()) throw ShapeError("face_similarity: undecodable image");
    const Index res = backbone_->config().input_resolution;
    CropAlignResult in = crop_align_filter(input_face, detector_, 0, res, "input",
                                           AlignedFace::Source::real);
    if (!in.accepted())
        throw ShapeError("face_similarity: no detectable face in the input image");
    CropAlignResult gen = crop_align_filter(generated, detector_, 0, res, "generated",
                                            AlignedFace::Source::generated);
    if (!gen.accepted()) return -1.0;  // worst-possible sentinel, never dropped
    return cosine_similarity(embed_face(in.face->pixels), embed_face(gen.face->pixels));
}

}  // namespace dreamid
