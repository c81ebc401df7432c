#include "dreamid/facegen.hpp"

#include <cmath>

namespace dreamid {

Image synth_face(std::uint64_t identity_seed, Index resolution) {
    Rng rng(identity_seed);
    std::uniform_real_distribution<Scalar> uni(0.0, 1.0);

    const Scalar bg = 0.05 + 0.10 * uni(rng);
    const Scalar skin_r = 0.65 + 0.25 * uni(rng);
    const Scalar skin_g = 0.45 + 0.25 * uni(rng);
    const Scalar skin_b = 0.30 + 0.25 * uni(rng);
    const Scalar face_rx = 0.26 + 0.08 * uni(rng);  // fractions of the image
    const Scalar face_ry = 0.32 + 0.08 * uni(rng);
    const Scalar eye_dx = 0.10 + 0.05 * uni(rng);
    const Scalar eye_y = -0.08 - 0.04 * uni(rng);
    const Scalar eye_r = 0.025 + 0.015 * uni(rng);
    const Scalar mouth_w = 0.08 + 0.06 * uni(rng);
    const Scalar mouth_y = 0.14 + 0.05 * uni(rng);
    const Scalar hair = 0.15 + 0.2 * uni(rng);  // darkening band on top

    Image img(resolution, resolution);
    for (Index y = 0; y < resolution; ++y) {
        for (Index x = 0; x < resolution; ++x) {
            const Scalar fx = static_cast<Scalar>(x) / resolution - 0.5;
            const Scalar fy = static_cast<Scalar>(y) / resolution - 0.5;
            Scalar r = bg, g = bg, b = bg * 1.2;
            const Scalar e = (fx * fx) / (face_rx * face_rx) +
                             (fy * fy) / (face_ry * face_ry);
            if (e <= 1.0) {
                r = skin_r;
                g = skin_g;
                b = skin_b;
                if (fy < -face_ry * (1.0 - hair)) {  // hairline
                    r *= 0.35;
                    g *= 0.3;
                    b *= 0.3;
                }
                for (int side = -1; side <= 1; side += 2) {
                    const Scalar dx = fx - side * eye_dx;
                    const Scalar dy = fy - eye_y;
                    if (dx * dx + dy * dy <= eye_r * eye_r) {
                        r = g = b = 0.08;
                    }
                }
                if (std::abs(fy - mouth_y) < 0.018 && std::abs(fx) < mouth_w) {
                    r = 0.55;
                    g = 0.15;
                    b = 0.18;
                }
            }
            img.rgb[0](y, x) = r;
            img.rgb[1](y, x) = g;
            img.rgb[2](y, x) = b;
        }
    }
    return img;
}

}  // namespace dreamid
