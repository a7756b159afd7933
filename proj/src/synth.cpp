#include "diffam/synth.hpp"

#include <algorithm>
#include <cmath>

namespace diffam {

namespace {

Color random_color(Rng& rng, const Color& lo, const Color& hi)
{
    return {rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), rng.uniform(lo[2], hi[2])};
}

void blend(ImageBuffer& img, Eigen::Index p, const Color& color, double alpha)
{
    for (int c = 0; c < 3; ++c)
        img.pixels()(p, c) = (1.0 - alpha) * img.pixels()(p, c) + alpha * color[std::size_t(c)];
}

double ellipse(double x, double y, double cx, double cy, double rx, double ry)
{
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    return dx * dx + dy * dy;
}

}  // namespace

FaceIdentity random_identity(Rng& rng)
{
    FaceIdentity id;
    id.skin = random_color(rng, {0.2, -0.2, -0.45}, {0.85, 0.45, 0.25});
    id.hair = random_color(rng, {-0.95, -0.95, -0.95}, {0.2, -0.1, -0.3});
    id.background = random_color(rng, {-0.6, -0.6, -0.6}, {0.6, 0.6, 0.6});
    id.center_x = rng.uniform(0.46, 0.54);
    id.center_y = rng.uniform(0.5, 0.58);
    id.radius_x = rng.uniform(0.26, 0.34);
    id.radius_y = rng.uniform(0.33, 0.41);
    id.eye_dx = rng.uniform(0.1, 0.15);
    id.eye_y = id.center_y - rng.uniform(0.08, 0.14);
    id.eye_radius = rng.uniform(0.045, 0.065);
    id.lip_y = id.center_y + rng.uniform(0.17, 0.22);
    id.lip_width = rng.uniform(0.08, 0.13);
    id.lip_height = rng.uniform(0.035, 0.05);
    return id;
}

MakeupStyle random_style(Rng& rng)
{
    MakeupStyle s;
    s.lipstick = random_color(rng, {0.3, -0.95, -0.9}, {0.95, -0.3, 0.4});
    s.eyeshadow = random_color(rng, {-0.4, -0.8, -0.2}, {0.6, 0.2, 0.9});
    s.blush = random_color(rng, {0.6, -0.2, -0.1}, {1.0, 0.3, 0.4});
    s.strength = rng.uniform(0.6, 0.9);
    return s;
}

SyntheticFace render_face(const FaceIdentity& id, const MakeupStyle* makeup, int size, Rng* texture)
{
    ImageBuffer img(size, size);
    RegionMasks::Labels labels = RegionMasks::Labels::Zero(Eigen::Index(size) * size);
    const Color lip_base{id.skin[0] * 0.8 + 0.15, id.skin[1] * 0.6 - 0.2, id.skin[2] * 0.6 - 0.1};
    const Color pupil{-0.85, -0.85, -0.8};

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const Eigen::Index p = Eigen::Index(y) * size + x;
            const double u = (x + 0.5) / size;
            const double v = (y + 0.5) / size;
            const double shade = 0.15 * (v - 0.5);
            for (int c = 0; c < 3; ++c)
                img.pixels()(p, c) = id.background[std::size_t(c)] - shade;

            if (ellipse(u, v, id.center_x, id.center_y - 0.06, id.radius_x * 1.12, id.radius_y * 1.05) <= 1.0)
                blend(img, p, id.hair, 1.0);
            if (ellipse(u, v, id.center_x, id.center_y, id.radius_x, id.radius_y) > 1.0)
                continue;

            labels(p) = static_cast<std::uint8_t>(Region::skin);
            blend(img, p, id.skin, 1.0);
            if (makeup) {
                for (double side : {-1.0, 1.0}) {
                    const double d = ellipse(u, v, id.center_x + side * id.radius_x * 0.55, id.center_y + 0.06, 0.08,
                                             0.06);
                    if (d < 1.0)
                        blend(img, p, makeup->blush, 0.5 * makeup->strength * (1.0 - d));
                }
            }

            for (double side : {-1.0, 1.0}) {
                const double ex = id.center_x + side * id.eye_dx;
                if (ellipse(u, v, ex, id.eye_y, id.eye_radius * 1.7, id.eye_radius * 1.3) <= 1.0) {
                    labels(p) = static_cast<std::uint8_t>(Region::eyes);
                    if (makeup)
                        blend(img, p, makeup->eyeshadow, makeup->strength);
                    if (ellipse(u, v, ex, id.eye_y, id.eye_radius, id.eye_radius * 0.7) <= 1.0)
                        blend(img, p, pupil, 1.0);
                }
            }

            if (ellipse(u, v, id.center_x, id.lip_y, id.lip_width, id.lip_height) <= 1.0) {
                labels(p) = static_cast<std::uint8_t>(Region::lips);
                blend(img, p, lip_base, 1.0);
                if (makeup)
                    blend(img, p, makeup->lipstick, makeup->strength);
            }
        }
    }
    if (texture) {
        for (Eigen::Index i = 0; i < img.size(); ++i)
            img.pixels().data()[i] += 0.03 * texture->normal();
    }
    img.pixels() = img.pixels().cwiseMax(-1.0).cwiseMin(1.0);
    return {std::move(img), RegionMasks(size, size, std::move(labels))};
}

ToyFaceSet make_face_set(std::uint64_t seed, int count, int identities, int size, bool with_makeup)
{
    Rng id_rng(seed, "identities");
    Rng style_rng(seed, "styles");
    Rng texture(seed, "texture");
    std::vector<FaceIdentity> people;
    for (int i = 0; i < identities; ++i)
        people.push_back(random_identity(id_rng));
    ToyFaceSet set;
    for (int i = 0; i < count; ++i) {
        const int who = i % identities;
        FaceIdentity id = people[std::size_t(who)];
        // small pose jitter between photos of one person
        id.center_x += 0.01 * texture.normal();
        id.center_y += 0.01 * texture.normal();
        if (with_makeup && i % 2 == 1) {
            const MakeupStyle style = random_style(style_rng);
            set.faces.push_back(render_face(id, &style, size, &texture));
        } else {
            set.faces.push_back(render_face(id, nullptr, size, &texture));
        }
        set.identities.push_back(who);
    }
    return set;
}

}  // namespace diffam
