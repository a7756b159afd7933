#include "doctest.h"

#include "diffam/ddim.hpp"
#include "diffam/denoiser.hpp"
#include "support.hpp"

using namespace testing;

namespace {

const NoiseSchedule& schedule()
{
    static const NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
    return s;
}

auto zero_noise = [](const auto& x, int) { return std::decay_t<decltype(x)>::constant(x.height(), x.width(), 0.0); };

}  // namespace

TEST_SUITE("ddim")
{
    TEST_CASE("zero-noise closed forms")
    {
        Rng rng(1);
        const ImageBuffer x = random_image(rng, 4, 5);
        const ImageBuffer zero = ImageBuffer::constant(4, 5, 0.0);
        const auto& s = schedule();

        const ImageBuffer xt = forward_sample(x, 60, zero, s);
        CHECK((xt.pixels() - x.pixels() * std::sqrt(s.alpha_bar(60))).abs().maxCoeff() < 1e-12);
        CHECK((predict_x0(xt, 60, zero, s).pixels() - x.pixels()).abs().maxCoeff() < 1e-12);

        // eps == 0: each step rescales by sqrt(abar_next / abar_t)
        const ImageBuffer up = ddim_step(x, 0, 60, zero_noise, s);
        CHECK((up.pixels() - x.pixels() * std::sqrt(s.alpha_bar(60))).abs().maxCoeff() < 1e-12);
        const auto ts = discretize(60, 20, s);
        const ImageBuffer latent = ddim_invert(x, zero_noise, s, ts);
        CHECK((latent.pixels() - x.pixels() * std::sqrt(s.alpha_bar(60))).abs().maxCoeff() < 1e-12);
        CHECK((ddim_sample(latent, zero_noise, s, ts).pixels() - x.pixels()).abs().maxCoeff() < 1e-12);
    }

    TEST_CASE("forward sample and x0 prediction invert each other")
    {
        Rng rng(2);
        const ImageBuffer x = random_image(rng, 3, 3);
        const ImageBuffer eps = random_image(rng, 3, 3);
        for (int t : {1, 60, 500, 1000}) {
            const ImageBuffer xt = forward_sample(x, t, eps, schedule());
            CHECK((predict_x0(xt, t, eps, schedule()).pixels() - x.pixels()).abs().maxCoeff() < 1e-9);
        }
    }

    TEST_CASE("a step to the same timestep is rejected")
    {
        const ImageBuffer x = ImageBuffer::constant(2, 2, 0.1);
        CHECK_THROWS(ddim_step(x, 5, 5, zero_noise, schedule()));
    }

    TEST_CASE("exact denoiser recovers the Gaussian noise")
    {
        // For data equal to the mean, x_t - sqrt(abar) m is pure noise and
        // the predictor returns it scaled by sqrt(1 - abar) / (abar v + 1 - abar).
        const auto& s = schedule();
        Eigen::VectorXd params(2);
        params << 0.2, std::log(0.5);
        GaussianDenoiser d(s, 2, 2, ParameterSharing::global, params);
        const ImageBuffer x = ImageBuffer::constant(2, 2, 0.2 * std::sqrt(s.alpha_bar(100)) + 0.3);
        const ImageBuffer e = d.predict_noise(x, 100);
        const double ab = s.alpha_bar(100);
        CHECK(e(0, 0, 0) == doctest::Approx(std::sqrt(1 - ab) * 0.3 / (ab * 0.5 + 1 - ab)).epsilon(1e-12));
    }

    TEST_CASE("fit recovers moments per sharing mode")
    {
        Rng rng(3);
        std::vector<ImageBuffer> data;
        for (int i = 0; i < 50; ++i)
            data.push_back(random_image(rng, 4, 4, 0.0, 0.5));
        for (auto mode : {ParameterSharing::global, ParameterSharing::per_channel, ParameterSharing::per_pixel}) {
            const GaussianDenoiser d = GaussianDenoiser::fit(data, schedule(), mode);
            CHECK(d.parameters().size() == 2 * d.group_count());
            CHECK(d.parameters().head(d.group_count()).mean() == doctest::Approx(0.25).epsilon(0.05));
            CHECK(parse_parameter_sharing(to_string(mode)) == mode);
        }
        CHECK_THROWS(parse_parameter_sharing("per-galaxy"));
    }

    TEST_CASE("variable and double evaluation agree")
    {
        Rng rng(4);
        std::vector<ImageBuffer> data;
        for (int i = 0; i < 10; ++i)
            data.push_back(random_image(rng, 3, 3));
        const GaussianDenoiser d = GaussianDenoiser::fit(data, schedule(), ParameterSharing::per_pixel);
        const ImageBuffer x = random_image(rng, 3, 3);
        ad::Tape tape;
        const auto p = tape.variables(d.parameters());
        const ImageBuffer via_tape = values(d.predict_noise(lift<Var>(x), 40, p));
        CHECK((via_tape.pixels() - d.predict_noise(x, 40).pixels()).abs().maxCoeff() < 1e-14);
    }

    TEST_CASE("round trip error shrinks with finer discretization")
    {
        Rng rng(5);
        std::vector<ImageBuffer> data;
        for (int i = 0; i < 30; ++i)
            data.push_back(random_image(rng, 6, 6, -0.5, 0.5));
        const GaussianDenoiser d = GaussianDenoiser::fit(data, schedule(), ParameterSharing::per_pixel);
        double previous = 1e9;
        for (int steps : {6, 10, 20, 60}) {
            const auto ts = discretize(60, steps, schedule());
            double err = 0.0;
            for (int i = 0; i < 5; ++i)
                err += (ddim_sample(ddim_invert(data[std::size_t(i)], d, ts), d, ts).pixels() -
                        data[std::size_t(i)].pixels()).abs().mean();
            CHECK(err < previous);
            previous = err;
        }
    }

    TEST_CASE("denoiser rejects wrong parameter counts and shapes")
    {
        CHECK_THROWS(GaussianDenoiser(schedule(), 2, 2, ParameterSharing::global, Eigen::VectorXd::Zero(3)));
        GaussianDenoiser d(schedule(), 2, 2, ParameterSharing::global, Eigen::VectorXd::Zero(2));
        CHECK_THROWS(d.set_parameters(Eigen::VectorXd::Zero(4)));
        CHECK_NOTHROW(d.predict_noise(ImageBuffer(3, 3), 10));  // global parameters broadcast
        GaussianDenoiser pixelwise(schedule(), 2, 2, ParameterSharing::per_pixel, Eigen::VectorXd::Zero(24));
        CHECK_THROWS(pixelwise.predict_noise(ImageBuffer(3, 3), 10));
        auto copy = d.clone();
        copy->set_parameters(Eigen::VectorXd::Ones(2));
        CHECK(d.parameters().isZero());
    }
}
