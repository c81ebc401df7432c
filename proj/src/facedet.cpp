#include "dreamid/facedet.hpp"

#include <cmath>
#include <vector>

namespace dreamid {

std::optional<FaceBox> BlobFaceDetector::detect(const Image& img) const {
    if (img.empty()) return std::nullopt;
    Mat lum = img.luminance();
    const Scalar lo = lum.minCoeff();
    const Scalar hi = lum.maxCoeff();
    if (hi - lo < min_contrast_) return std::nullopt;  // blank / featureless
    const Scalar thresh = 0.5 * (lo + hi);
    const Index H = lum.rows(), W = lum.cols();

    // connected components (4-neighbourhood) over the bright mask
    std::vector<int> label(static_cast<std::size_t>(H * W), -1);
    auto at = [W](Index y, Index x) { return static_cast<std::size_t>(y * W + x); };
    int n_labels = 0;
    std::vector<Index> stack;
    std::vector<long> areas;
    for (Index y = 0; y < H; ++y) {
        for (Index x = 0; x < W; ++x) {
            if (lum(y, x) <= thresh || label[at(y, x)] >= 0) continue;
            int id = n_labels++;
            areas.push_back(0);
            stack.push_back(y * W + x);
            label[at(y, x)] = id;
            while (!stack.empty()) {
                Index p = stack.back();
                stack.pop_back();
                ++areas[id];
                Index py = p / W, px = p % W;
                const Index ny[4] = {py - 1, py + 1, py, py};
                const Index nx[4] = {px, px, px - 1, px + 1};
                for (int d = 0; d < 4; ++d) {
                    if (ny[d] < 0 || ny[d] >= H || nx[d] < 0 || nx[d] >= W) continue;
                    std::size_t q = at(ny[d], nx[d]);
                    if (label[q] < 0 && lum(ny[d], nx[d]) > thresh) {
                        label[q] = id;
                        stack.push_back(ny[d] * W + nx[d]);
                    }
                }
            }
        }
    }
    if (n_labels == 0) return std::nullopt;
    int best = 0;
    for (int i = 1; i < n_labels; ++i)
        if (areas[i] > areas[best]) best = i;

    FaceBox box;
    box.x0 = W;
    box.y0 = H;
    box.x1 = 0;
    box.y1 = 0;
    Scalar m00 = 0, m10 = 0, m01 = 0;
    for (Index y = 0; y < H; ++y) {
        for (Index x = 0; x < W; ++x) {
            if (label[at(y, x)] != best) continue;
            box.x0 = std::min(box.x0, x);
            box.x1 = std::max(box.x1, x);
            box.y0 = std::min(box.y0, y);
            box.y1 = std::max(box.y1, y);
            m00 += 1;
            m10 += x;
            m01 += y;
        }
    }
    box.cx = m10 / m00;
    box.cy = m01 / m00;
    Scalar mu20 = 0, mu02 = 0, mu11 = 0;
    for (Index y = 0; y < H; ++y) {
        for (Index x = 0; x < W; ++x) {
            if (label[at(y, x)] != best) continue;
            const Scalar dx = x - box.cx, dy = y - box.cy;
            mu20 += dx * dx;
            mu02 += dy * dy;
            mu11 += dx * dy;
        }
    }
    // angle of the major axis measured from the vertical
    box.angle = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02);
    if (mu20 > mu02) box.angle += (box.angle > 0 ? -1.0 : 1.0) * M_PI / 2.0;
    return box;
}

CropAlignResult crop_align_filter(const Image& img, const FaceDetector& detector,
                                  Index min_side, Index out_resolution,
                                  const std::string& identity_id,
                                  AlignedFace::Source source) {
    CropAlignResult result;
    if (img.empty()) {
        result.rejection = Rejection{"no face"};
        return result;
    }
    if (min_side <= 0) min_side = std::min(img.height(), img.width()) / 4;
    auto box = detector.detect(img);
    if (!box) {
        result.rejection = Rejection{"no face"};
        return result;
    }
    result.box = *box;
    if (box->short_side() <= min_side) {
        result.rejection = Rejection{"too small"};
        return result;
    }

    // upright crop: rotate by -angle around the centroid, square window
    const Scalar crop = 1.3 * static_cast<Scalar>(box->long_side());
    const Scalar ca = std::cos(box->angle), sa = std::sin(box->angle);
    Image out(out_resolution, out_resolution);
    for (Index v = 0; v < out_resolution; ++v) {
        for (Index u = 0; u < out_resolution; ++u) {
            const Scalar fu = (static_cast<Scalar>(u) / (out_resolution - 1) - 0.5) * crop;
            const Scalar fv = (static_cast<Scalar>(v) / (out_resolution - 1) - 0.5) * crop;
            const Scalar sx = box->cx + ca * fu - sa * fv;
            const Scalar sy = box->cy + sa * fu + ca * fv;
            const Index x0 = static_cast<Index>(std::floor(sx));
            const Index y0 = static_cast<Index>(std::floor(sy));
            const Scalar wx = sx - x0, wy = sy - y0;
            auto cl = [](Index v, Index n) { return std::clamp<Index>(v, 0, n - 1); };
            for (int c = 0; c < 3; ++c) {
                const Mat& m = img.rgb[c];
                const Scalar top = (1 - wx) * m(cl(y0, img.height()), cl(x0, img.width())) +
                                   wx * m(cl(y0, img.height()), cl(x0 + 1, img.width()));
                const Scalar bot =
                    (1 - wx) * m(cl(y0 + 1, img.height()), cl(x0, img.width())) +
                    wx * m(cl(y0 + 1, img.height()), cl(x0 + 1, img.width()));
                out.rgb[c](v, u) = (1 - wy) * top + wy * bot;
            }
        }
    }
    AlignedFace face;
    face.pixels = std::move(out);
    face.identity_id = identity_id;
    face.source = source;
    result.face = std::move(face);
    return result;
}

}  // namespace dreamid
