#include "doctest.h"

#include "diffam/encoders.hpp"
#include "diffam/errors.hpp"
#include "support.hpp"

using namespace testing;

TEST_SUITE("encoders")
{
    TEST_CASE("adaptive average pooling")
    {
        ImageBuffer img(4, 4);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                for (int c = 0; c < 3; ++c)
                    img(y, x, c) = y * 4 + x + 100 * c;
        const ImageBuffer p = adaptive_average_pool(img, 2, 2);
        CHECK(p(0, 0, 0) == doctest::Approx(2.5));   // mean of 0 1 4 5
        CHECK(p(1, 1, 0) == doctest::Approx(12.5));  // mean of 10 11 14 15
        CHECK(p(0, 1, 2) == doctest::Approx(204.5));
        // identity when the grid matches; replication when upsampling
        CHECK((adaptive_average_pool(img, 4, 4).pixels() - img.pixels()).abs().maxCoeff() == 0.0);
        const ImageBuffer up = adaptive_average_pool(p, 4, 4);
        CHECK(up(0, 1, 0) == doctest::Approx(2.5));
        // 3 -> 2 bins overlap on the middle row: [0, 2) and [1, 3)
        ImageBuffer col(3, 1);
        col(0, 0, 0) = 1.0;
        col(1, 0, 0) = 2.0;
        col(2, 0, 0) = 4.0;
        const ImageBuffer q = adaptive_average_pool(col, 2, 1);
        CHECK(q(0, 0, 0) == doctest::Approx(1.5));
        CHECK(q(1, 0, 0) == doctest::Approx(3.0));
    }

    TEST_CASE("toy encoders are deterministic per seed")
    {
        Rng rng(1);
        const ImageBuffer img = random_image(rng, 32, 32);
        auto& reg = EncoderRegistry::instance();
        const auto a = reg.image_encoder("toy-linear-64", 5);
        const auto b = reg.image_encoder("toy-linear-64", 5);
        const auto c = reg.image_encoder("toy-linear-64", 6);
        CHECK(a->dimension() == 64);
        CHECK(a->embed(img) == b->embed(img));
        CHECK(a->embed(img) != c->embed(img));
        const auto f1 = reg.face_embedder("toy-face-1", 5);
        const auto f2 = reg.face_embedder("toy-face-2", 5);
        CHECK(f1->name() == "toy-face-1");
        CHECK(f1->embed(img) != f2->embed(img));
        CHECK(f1->dimension() == 32);
    }

    TEST_CASE("face embedder ignores global brightness shifts")
    {
        Rng rng(2);
        const ImageBuffer img = random_image(rng, 16, 16, -0.5, 0.5);
        ImageBuffer shifted = img;
        shifted.pixels() += 0.3;
        const auto f = EncoderRegistry::instance().face_embedder("toy-face-0", 1);
        CHECK((f->embed(img) - f->embed(shifted)).norm() < 1e-10);
    }

    TEST_CASE("text encoder tokenizes case-insensitively")
    {
        const auto t = EncoderRegistry::instance().text_encoder("toy-hash-32", 3);
        CHECK(t->embed("Face with  MAKEUP") == t->embed("face with makeup"));
        CHECK(t->embed("face") != t->embed("makeup"));
        CHECK_THROWS(embed_text(*t, ""));
        CHECK_THROWS(embed_text(*t, "   "));
    }

    TEST_CASE("non-finite inputs are rejected")
    {
        ImageBuffer img = ImageBuffer::constant(8, 8, 0.0);
        img(3, 3, 1) = std::nan("");
        const auto f = EncoderRegistry::instance().face_embedder("toy-face-0", 1);
        CHECK_THROWS_AS(face_embed(*f, img), std::domain_error);
        const auto e = EncoderRegistry::instance().image_encoder("toy-linear-8", 1);
        CHECK_THROWS_AS(embed_image(*e, img), std::domain_error);
    }

    TEST_CASE("joint encoders need matching dimensions")
    {
        auto& reg = EncoderRegistry::instance();
        CHECK_THROWS(JointEncoders(reg.image_encoder("toy-linear-64", 1), reg.text_encoder("toy-hash-32", 1)));
        CHECK_NOTHROW(JointEncoders(reg.image_encoder("toy-linear-32", 1), reg.text_encoder("toy-hash-32", 1)));
    }

    TEST_CASE("registry names")
    {
        auto& reg = EncoderRegistry::instance();
        CHECK_THROWS(reg.image_encoder("resnet-50", 1));
        CHECK_THROWS(reg.image_encoder("toy-linear-0", 1));
        CHECK_THROWS(reg.image_encoder("toy-linear-x", 1));
        CHECK_THROWS(reg.face_embedder("toy-face--1", 1));
        CHECK(reg.perceptual("toy-conv", 1) != nullptr);
        CHECK(reg.perceptual("identity", 1) != nullptr);
        CHECK(reg.perceptual("zero", 1) != nullptr);
        reg.register_face_embedder("custom-", [](const std::string& name, std::uint64_t seed) {
            return std::make_shared<ToyFaceEmbedder>(name, 4, seed);
        });
        CHECK(reg.face_embedder("custom-a", 1)->dimension() == 4);
    }

    TEST_CASE("perceptual features have two layers")
    {
        Rng rng(3);
        const ImageBuffer img = random_image(rng, 8, 8);
        const auto p = EncoderRegistry::instance().perceptual("toy-conv", 2);
        const auto f = p->features(img);
        REQUIRE(f.size() == 2);
        CHECK(f[0].rows() == 64);
        CHECK(f[1].rows() == 16);
        CHECK(f[0].cols() == 8);
        CHECK(f[0].abs().maxCoeff() < 1.0);
    }
}
