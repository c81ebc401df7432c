#pragma once

#include "dreamid/image.hpp"

namespace dreamid {

// Deterministic procedural face: a bright skin-tone ellipse with eyes and a
// mouth on a dark background. Identity-specific geometry and colour come
// from the seed; stands in for an aligned-face corpus at toy scale.
Image synth_face(std::uint64_t identity_seed, Index resolution = 64);

}  // namespace dreamid
