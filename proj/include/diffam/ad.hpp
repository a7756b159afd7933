#pragma once

// Reverse-mode automatic differentiation on a scalar tape.
//
// A Var is a value plus an index into the active Tape. Constants carry index -1
// and never touch the tape, so code templated on the scalar type runs unchanged
// for double and Var. Each non-constant operation records at most two parents
// with their local partial derivatives; Tape::gradient sweeps the record once in
// reverse.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace diffam::ad {
class Var;
}  // namespace diffam::ad

namespace Eigen {

template <>
struct NumTraits<diffam::ad::Var> : NumTraits<double> {
    using Real = diffam::ad::Var;
    using NonInteger = diffam::ad::Var;
    using Nested = diffam::ad::Var;
    using Literal = diffam::ad::Var;
    enum {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 1,
        AddCost = 2,
        MulCost = 2
    };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<diffam::ad::Var, double, BinaryOp> {
    using ReturnType = diffam::ad::Var;
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, diffam::ad::Var, BinaryOp> {
    using ReturnType = diffam::ad::Var;
};

}  // namespace Eigen

namespace diffam::ad {

class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// The innermost live tape on this thread, or nullptr.
    static Tape* active();
    static Tape& require_active();

    Var variable(double value);

    template <typename Derived>
    Eigen::Matrix<Var, Eigen::Dynamic, 1> variables(const Eigen::MatrixBase<Derived>& values);

    /// d(output)/d(wrt[i]) for every entry of wrt.
    Eigen::VectorXd gradient(const Var& output, const Eigen::Matrix<Var, Eigen::Dynamic, 1>& wrt) const;

    /// Full adjoint vector indexed by tape position.
    std::vector<double> adjoints(const Var& output) const;

    std::size_t size() const { return nodes_.size(); }

    Var record(double value, int lhs, double d_lhs, int rhs, double d_rhs);

private:
    struct Node {
        int lhs;
        int rhs;
        double d_lhs;
        double d_rhs;
    };

    std::vector<Node> nodes_;
    Tape* previous_;
};

class Var {
public:
    Var() = default;
    Var(double value) : value_(value) {}  // NOLINT: implicit constants are the point

    double value() const { return value_; }
    int index() const { return index_; }
    bool is_constant() const { return index_ < 0; }

    Var& operator+=(const Var& rhs);
    Var& operator-=(const Var& rhs);
    Var& operator*=(const Var& rhs);
    Var& operator/=(const Var& rhs);

private:
    friend class Tape;
    Var(double value, int index) : value_(value), index_(index) {}

    double value_ = 0.0;
    int index_ = -1;
};

namespace detail {

inline Var unary(const Var& x, double value, double dx)
{
    if (x.is_constant())
        return Var(value);
    return Tape::require_active().record(value, x.index(), dx, -1, 0.0);
}

inline Var binary(const Var& a, const Var& b, double value, double da, double db)
{
    if (a.is_constant() && b.is_constant())
        return Var(value);
    return Tape::require_active().record(value, a.index(), da, b.index(), db);
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) { return detail::binary(a, b, a.value() + b.value(), 1.0, 1.0); }
inline Var operator-(const Var& a, const Var& b) { return detail::binary(a, b, a.value() - b.value(), 1.0, -1.0); }
inline Var operator*(const Var& a, const Var& b)
{
    return detail::binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Var operator/(const Var& a, const Var& b)
{
    const double q = a.value() / b.value();
    return detail::binary(a, b, q, 1.0 / b.value(), -q / b.value());
}
inline Var operator-(const Var& a) { return detail::unary(a, -a.value(), -1.0); }
inline Var operator+(const Var& a) { return a; }

inline Var& Var::operator+=(const Var& rhs) { return *this = *this + rhs; }
inline Var& Var::operator-=(const Var& rhs) { return *this = *this - rhs; }
inline Var& Var::operator*=(const Var& rhs) { return *this = *this * rhs; }
inline Var& Var::operator/=(const Var& rhs) { return *this = *this / rhs; }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }
inline bool operator!=(const Var& a, const Var& b) { return a.value() != b.value(); }

inline Var sqrt(const Var& x)
{
    const double s = std::sqrt(x.value());
    return detail::unary(x, s, 0.5 / s);
}
inline Var exp(const Var& x)
{
    const double e = std::exp(x.value());
    return detail::unary(x, e, e);
}
inline Var log(const Var& x) { return detail::unary(x, std::log(x.value()), 1.0 / x.value()); }
inline Var tanh(const Var& x)
{
    const double t = std::tanh(x.value());
    return detail::unary(x, t, 1.0 - t * t);
}
// Subgradient 0 at the kink.
inline Var abs(const Var& x)
{
    const double v = x.value();
    return detail::unary(x, std::abs(v), v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
}
inline Var pow(const Var& x, double p)
{
    const double v = std::pow(x.value(), p);
    return detail::unary(x, v, p * std::pow(x.value(), p - 1.0));
}
inline Var abs2(const Var& x) { return x * x; }
inline bool isfinite(const Var& x) { return std::isfinite(x.value()); }
inline bool isnan(const Var& x) { return std::isnan(x.value()); }
inline bool isinf(const Var& x) { return std::isinf(x.value()); }

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

/// Strip the tape from any dense Eigen object.
template <typename Derived>
auto values(const Eigen::DenseBase<Derived>& x)
{
    return x.derived().unaryExpr([](const auto& v) { return value_of(v); }).eval();
}

// -- Tape ---------------------------------------------------------------------

inline thread_local Tape* active_tape = nullptr;

inline Tape::Tape() : previous_(active_tape) { active_tape = this; }
inline Tape::~Tape() { active_tape = previous_; }
inline Tape* Tape::active() { return active_tape; }

inline Tape& Tape::require_active()
{
    if (active_tape == nullptr)
        throw std::logic_error("ad: operation on a variable with no active tape");
    return *active_tape;
}

inline Var Tape::record(double value, int lhs, double d_lhs, int rhs, double d_rhs)
{
    nodes_.push_back({lhs, rhs, d_lhs, d_rhs});
    return Var(value, static_cast<int>(nodes_.size() - 1));
}

inline Var Tape::variable(double value)
{
    nodes_.push_back({-1, -1, 0.0, 0.0});
    return Var(value, static_cast<int>(nodes_.size() - 1));
}

template <typename Derived>
Eigen::Matrix<Var, Eigen::Dynamic, 1> Tape::variables(const Eigen::MatrixBase<Derived>& values)
{
    Eigen::Matrix<Var, Eigen::Dynamic, 1> out(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i)
        out(i) = variable(values.derived().coeff(i));
    return out;
}

inline std::vector<double> Tape::adjoints(const Var& output) const
{
    std::vector<double> adj(nodes_.size(), 0.0);
    if (output.is_constant())
        return adj;
    adj[static_cast<std::size_t>(output.index())] = 1.0;
    for (std::size_t i = static_cast<std::size_t>(output.index()) + 1; i-- > 0;) {
        const double a = adj[i];
        if (a == 0.0)
            continue;
        const Node& n = nodes_[i];
        if (n.lhs >= 0)
            adj[static_cast<std::size_t>(n.lhs)] += a * n.d_lhs;
        if (n.rhs >= 0)
            adj[static_cast<std::size_t>(n.rhs)] += a * n.d_rhs;
    }
    return adj;
}

inline Eigen::VectorXd Tape::gradient(const Var& output, const Eigen::Matrix<Var, Eigen::Dynamic, 1>& wrt) const
{
    const std::vector<double> adj = adjoints(output);
    Eigen::VectorXd g(wrt.size());
    for (Eigen::Index i = 0; i < wrt.size(); ++i)
        g(i) = wrt(i).is_constant() ? 0.0 : adj[static_cast<std::size_t>(wrt(i).index())];
    return g;
}

}  // namespace diffam::ad
