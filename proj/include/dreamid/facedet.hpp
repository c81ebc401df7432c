#pragma once

#include "dreamid/encoder.hpp"

#include <optional>
#include <string>

namespace dreamid {

struct FaceBox {
    Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive bounds
    Scalar cx = 0, cy = 0;                 // centroid
    Scalar angle = 0;                      // principal-axis angle, radians
    Index short_side() const { return std::min(x1 - x0 + 1, y1 - y0 + 1); }
    Index long_side() const { return std::max(x1 - x0 + 1, y1 - y0 + 1); }
};

struct Rejection {
    std::string reason;  // "no face" or "too small"
};

// Face detector interface. The toy default finds the largest bright
// connected blob, which matches the synthetic face corpus where faces are
// brighter than the background.
class FaceDetector {
  public:
    virtual ~FaceDetector() = default;
    virtual std::optional<FaceBox> detect(const Image& img) const = 0;
};

class BlobFaceDetector final : public FaceDetector {
  public:
    std::optional<FaceBox> detect(const Image& img) const override;

  private:
    Scalar min_contrast_ = 0.05;  // below this the image is considered blank
};

struct CropAlignResult {
    std::optional<AlignedFace> face;
    std::optional<Rejection> rejection;
    FaceBox box;  // valid only when a face was detected

    bool accepted() const { return face.has_value(); }
};

// Detects the largest face, rotates it upright along its principal axis,
// crops a square around the centroid and resamples to out_resolution.
// min_side <= 0 selects the proportional toy default (min image side / 4).
CropAlignResult crop_align_filter(const Image& img, const FaceDetector& detector,
                                  Index min_side, Index out_resolution,
                                  const std::string& identity_id,
                                  AlignedFace::Source source);

}  // namespace dreamid
