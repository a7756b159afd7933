#pragma once

// Procedural 32x32-style faces with exact region masks, for desk-scale runs.

#include <array>
#include <cstdint>
#include <vector>

#include "diffam/random.hpp"
#include "diffam/regions.hpp"

namespace diffam {

using Color = std::array<double, 3>;

struct FaceIdentity {
    Color skin;
    Color hair;
    Color background;
    double center_x, center_y;  // normalized [0, 1] coordinates
    double radius_x, radius_y;
    double eye_dx, eye_y, eye_radius;
    double lip_y, lip_width, lip_height;
};

struct MakeupStyle {
    Color lipstick;
    Color eyeshadow;
    Color blush;
    double strength;
};

struct SyntheticFace {
    ImageBuffer image;
    RegionMasks masks;
};

FaceIdentity random_identity(Rng& rng);
MakeupStyle random_style(Rng& rng);

/// Renders one face; `makeup` may be null. `texture` adds seeded pixel noise.
SyntheticFace render_face(const FaceIdentity& id, const MakeupStyle* makeup, int size, Rng* texture = nullptr);

struct ToyFaceSet {
    std::vector<SyntheticFace> faces;
    std::vector<int> identities;
};

/// `count` faces over `identities` distinct people; every other face wears a
/// random makeup style when with_makeup is set.
ToyFaceSet make_face_set(std::uint64_t seed, int count, int identities, int size, bool with_makeup);

}  // namespace diffam
