#include "doctest.h"

#include "diffam/ad.hpp"

using diffam::ad::Tape;
using diffam::ad::Var;

TEST_SUITE("ad")
{
    TEST_CASE("scalar derivatives")
    {
        Tape tape;
        const Var x = tape.variable(0.7);
        const Var y = tape.variable(-1.3);
        const Var f = x * y + sqrt(x) * exp(y) - log(x) / y + tanh(x * 2.0) + pow(x, 3.0) + abs(y);
        Eigen::Matrix<Var, Eigen::Dynamic, 1> wrt(2);
        wrt << x, y;
        const Eigen::VectorXd g = tape.gradient(f, wrt);

        const double xv = 0.7, yv = -1.3;
        const double t = std::tanh(2 * xv);
        const double dfdx = yv + 0.5 / std::sqrt(xv) * std::exp(yv) - 1.0 / (xv * yv) + 2 * (1 - t * t) + 3 * xv * xv;
        const double dfdy = xv + std::sqrt(xv) * std::exp(yv) + std::log(xv) / (yv * yv) - 1.0;
        CHECK(g(0) == doctest::Approx(dfdx).epsilon(1e-12));
        CHECK(g(1) == doctest::Approx(dfdy).epsilon(1e-12));
    }

    TEST_CASE("constants never touch the tape")
    {
        Tape tape;
        const Var c = Var(2.0) * Var(3.0) + 1.0;
        CHECK(c.is_constant());
        CHECK(c.value() == 7.0);
        CHECK(tape.size() == 0);
    }

    TEST_CASE("operations on variables need a live tape")
    {
        Var x;
        {
            Tape tape;
            x = tape.variable(1.0);
        }
        CHECK(Tape::active() == nullptr);
        CHECK_THROWS_AS(x * 2.0, std::logic_error);
    }

    TEST_CASE("abs has zero subgradient at the kink")
    {
        Tape tape;
        const Var x = tape.variable(0.0);
        const Var f = abs(x);
        Eigen::Matrix<Var, Eigen::Dynamic, 1> wrt(1);
        wrt << x;
        CHECK(tape.gradient(f, wrt)(0) == 0.0);
    }

    TEST_CASE("eigen expressions over variables")
    {
        Tape tape;
        Eigen::VectorXd v(3);
        v << 1.0, 2.0, 3.0;
        const auto x = tape.variables(v);
        const Var n2 = x.squaredNorm();
        const Var d = x.dot(x.cwiseProduct(x));
        const Eigen::VectorXd g = tape.gradient(n2 + d, x);
        for (int i = 0; i < 3; ++i)
            CHECK(g(i) == doctest::Approx(2 * v(i) + 3 * v(i) * v(i)));
        CHECK(diffam::ad::values(x).isApprox(v));
    }

    TEST_CASE("nested tapes restore the outer one")
    {
        Tape outer;
        {
            Tape inner;
            CHECK(Tape::active() == &inner);
        }
        CHECK(Tape::active() == &outer);
    }
}
