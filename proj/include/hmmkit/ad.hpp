#pragma once

// Tape-based reverse-mode automatic differentiation with a forward-mode
// (dual number) layer underneath for exact Hessians.
//
// A differentiable function is any callable that accepts std::span<const S>
// and returns S, for S in {double, Counted, Var<double>, Var<Dual>}. Generic
// lambdas (`[&](auto x) { ... }`) satisfy this directly. Each evaluation
// owns its tape, so concurrent evaluations never share state.

#include <Eigen/Dense>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmmkit/errors.hpp"

namespace hmmkit::ad {

// ---------------------------------------------------------------------------
// Dual numbers: value plus one directional derivative.

struct Dual {
  double v = 0.0;
  double d = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double value, double tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
};

inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
inline Dual operator/(const Dual& a, const Dual& b) {
  const double q = a.v / b.v;
  return {q, (a.d - q * b.d) / b.v};
}
inline bool is_zero(const Dual& a) { return a.v == 0.0 && a.d == 0.0; }
inline bool is_zero(double a) { return a == 0.0; }

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return {e, e * a.d};
}
inline Dual log(const Dual& a) { return {std::log(a.v), a.d / a.v}; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
inline Dual pow(const Dual& a, double c) {
  return {std::pow(a.v, c), c * std::pow(a.v, c - 1.0) * a.d};
}
inline Dual pow(const Dual& a, const Dual& b) {
  const double p = std::pow(a.v, b.v);
  return {p, p * (b.d * std::log(a.v) + b.v * a.d / a.v)};
}

// ---------------------------------------------------------------------------
// Counted: plain double arithmetic that tallies elementary operations. Used to
// measure the work of a value evaluation against a gradient evaluation.

class OpCounter {
 public:
  static std::size_t& units() {
    thread_local std::size_t count = 0;
    return count;
  }
  static void reset() { units() = 0; }
  static void add(std::size_t n = 1) { units() += n; }
};

struct Counted {
  double v = 0.0;
  constexpr Counted() = default;
  constexpr Counted(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
};

inline Counted operator+(Counted a, Counted b) { OpCounter::add(); return {a.v + b.v}; }
inline Counted operator-(Counted a, Counted b) { OpCounter::add(); return {a.v - b.v}; }
inline Counted operator-(Counted a) { OpCounter::add(); return {-a.v}; }
inline Counted operator*(Counted a, Counted b) { OpCounter::add(); return {a.v * b.v}; }
inline Counted operator/(Counted a, Counted b) { OpCounter::add(); return {a.v / b.v}; }
inline Counted& operator+=(Counted& a, Counted b) { return a = a + b; }
inline Counted exp(Counted a) { OpCounter::add(); return {std::exp(a.v)}; }
inline Counted log(Counted a) { OpCounter::add(); return {std::log(a.v)}; }
inline Counted sqrt(Counted a) { OpCounter::add(); return {std::sqrt(a.v)}; }
inline Counted pow(Counted a, double c) { OpCounter::add(); return {std::pow(a.v, c)}; }
inline Counted pow(Counted a, Counted b) { OpCounter::add(); return {std::pow(a.v, b.v)}; }

// ---------------------------------------------------------------------------
// Value extraction, used for branching (pivot choice, max shifts) in generic code.

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }
inline double value_of(const Counted& x) { return x.v; }

// ---------------------------------------------------------------------------
// Fused log-sum-exp. Plain versions are the reference the tape versions match
// bit for bit on the value part.

inline double logsumexp(std::span<const double> xs) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : xs) top = std::max(top, x);
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - top);
  return top + std::log(s);
}

inline Dual logsumexp(std::span<const Dual> xs) {
  double top = -std::numeric_limits<double>::infinity();
  for (const Dual& x : xs) top = std::max(top, x.v);
  if (!std::isfinite(top)) return {top, 0.0};
  double s = 0.0;
  double ds = 0.0;
  for (const Dual& x : xs) {
    const double w = std::exp(x.v - top);
    s += w;
    ds += w * x.d;
  }
  return {top + std::log(s), ds / s};
}

inline Counted logsumexp(std::span<const Counted> xs) {
  OpCounter::add(xs.size());
  double top = -std::numeric_limits<double>::infinity();
  for (const Counted& x : xs) top = std::max(top, x.v);
  if (!std::isfinite(top)) return {top};
  double s = 0.0;
  for (const Counted& x : xs) s += std::exp(x.v - top);
  return {top + std::log(s)};
}

// ---------------------------------------------------------------------------
// Tape and Var.

template <class S>
class Var;

/// Linearized computation graph. Node k depends on parents_[edge_begin_[k] ..
/// edge_begin_[k+1]) with local partials stored alongside.
template <class S>
class Tape {
 public:
  using Index = std::uint32_t;

  Tape() { edge_begin_.push_back(0); }

  Index push_input() { return close_node(); }

  Index push(Index p, const S& dp) {
    parents_.push_back(p);
    partials_.push_back(dp);
    return close_node();
  }

  Index push(Index p, const S& dp, Index q, const S& dq) {
    parents_.push_back(p);
    partials_.push_back(dp);
    parents_.push_back(q);
    partials_.push_back(dq);
    return close_node();
  }

  template <class It>
  Index push_many(It first, It last) {
    for (; first != last; ++first) {
      parents_.push_back(first->first);
      partials_.push_back(first->second);
    }
    return close_node();
  }

  std::size_t size() const { return edge_begin_.size() - 1; }
  std::size_t edge_count() const { return parents_.size(); }

  /// Adjoints of every node up to `output` for the seed d(output) = seed.
  /// `adjoints` is resized and overwritten; it can be reused across sweeps.
  std::size_t sweep(Index output, const S& seed, std::vector<S>& adjoints) const {
    adjoints.assign(static_cast<std::size_t>(output) + 1, S{});
    adjoints[output] = seed;
    std::size_t visited = 0;
    for (std::size_t k = output + 1; k-- > 0;) {
      const S a = adjoints[k];
      if (is_zero(a)) continue;
      const Index begin = edge_begin_[k];
      const Index end = edge_begin_[k + 1];
      for (Index e = begin; e < end; ++e) adjoints[parents_[e]] += a * partials_[e];
      visited += end - begin;
    }
    return visited;
  }

 private:
  Index close_node() {
    edge_begin_.push_back(static_cast<Index>(parents_.size()));
    return static_cast<Index>(edge_begin_.size() - 2);
  }

  std::vector<Index> edge_begin_;
  std::vector<Index> parents_;
  std::vector<S> partials_;
};

template <class S>
class Var {
 public:
  using Index = typename Tape<S>::Index;
  static constexpr Index kConstant = std::numeric_limits<Index>::max();

  Var() = default;
  Var(double c) : value_(c) {}  // NOLINT(google-explicit-constructor)
  Var(const S& value, Tape<S>* tape, Index index) : value_(value), tape_(tape), index_(index) {}

  static Var input(Tape<S>& tape, const S& value) { return Var(value, &tape, tape.push_input()); }

  const S& value() const { return value_; }
  Tape<S>* tape() const { return tape_; }
  Index index() const { return index_; }
  bool is_constant() const { return tape_ == nullptr; }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

 private:
  S value_{};
  Tape<S>* tape_ = nullptr;
  Index index_ = kConstant;
};

inline double value_of(const Var<double>& x) { return x.value(); }
inline double value_of(const Var<Dual>& x) { return x.value().v; }

namespace detail {

template <class S>
Var<S> unary(const S& value, const Var<S>& a, const S& da) {
  if (a.is_constant()) return Var<S>(value, nullptr, Var<S>::kConstant);
  return Var<S>(value, a.tape(), a.tape()->push(a.index(), da));
}

template <class S>
Var<S> binary(const S& value, const Var<S>& a, const S& da, const Var<S>& b, const S& db) {
  if (a.is_constant()) return unary(value, b, db);
  if (b.is_constant()) return unary(value, a, da);
  return Var<S>(value, a.tape(), a.tape()->push(a.index(), da, b.index(), db));
}

}  // namespace detail

template <class S>
Var<S> operator+(const Var<S>& a, const Var<S>& b) {
  return detail::binary(S(a.value() + b.value()), a, S(1.0), b, S(1.0));
}
template <class S>
Var<S> operator-(const Var<S>& a, const Var<S>& b) {
  return detail::binary(S(a.value() - b.value()), a, S(1.0), b, S(-1.0));
}
template <class S>
Var<S> operator-(const Var<S>& a) {
  return detail::unary(S(-a.value()), a, S(-1.0));
}
template <class S>
Var<S> operator*(const Var<S>& a, const Var<S>& b) {
  return detail::binary(S(a.value() * b.value()), a, b.value(), b, a.value());
}
template <class S>
Var<S> operator/(const Var<S>& a, const Var<S>& b) {
  const S q = a.value() / b.value();
  const S inv = S(1.0) / b.value();
  return detail::binary(q, a, inv, b, S(-(q * inv)));
}

#define HMMKIT_AD_MIXED_OPS(OP)                                                   \
  template <class S>                                                              \
  Var<S> operator OP(const Var<S>& a, double b) { return a OP Var<S>(b); }        \
  template <class S>                                                              \
  Var<S> operator OP(double a, const Var<S>& b) { return Var<S>(a) OP b; }
HMMKIT_AD_MIXED_OPS(+)
HMMKIT_AD_MIXED_OPS(-)
HMMKIT_AD_MIXED_OPS(*)
HMMKIT_AD_MIXED_OPS(/)
#undef HMMKIT_AD_MIXED_OPS

template <class S>
Var<S> exp(const Var<S>& a) {
  using std::exp;
  const S e = exp(a.value());
  return detail::unary(e, a, e);
}
template <class S>
Var<S> log(const Var<S>& a) {
  using std::log;
  return detail::unary(S(log(a.value())), a, S(S(1.0) / a.value()));
}
template <class S>
Var<S> sqrt(const Var<S>& a) {
  using std::sqrt;
  const S s = sqrt(a.value());
  return detail::unary(s, a, S(S(0.5) / s));
}
template <class S>
Var<S> pow(const Var<S>& a, double c) {
  using std::pow;
  return detail::unary(S(pow(a.value(), c)), a, S(S(c) * pow(a.value(), c - 1.0)));
}
template <class S>
Var<S> pow(const Var<S>& a, const Var<S>& b) {
  using std::log;
  using std::pow;
  const S p = pow(a.value(), b.value());
  return detail::binary(p, a, S(b.value() * pow(a.value(), S(b.value() - S(1.0)))), b,
                        S(p * log(a.value())));
}

/// n-ary log-sum-exp recorded as a single node whose partials are the softmax weights.
template <class S>
Var<S> logsumexp(std::span<const Var<S>> xs) {
  std::vector<S> values;
  values.reserve(xs.size());
  Tape<S>* tape = nullptr;
  for (const auto& x : xs) {
    values.push_back(x.value());
    if (!x.is_constant()) tape = x.tape();
  }
  const S r = logsumexp(std::span<const S>(values));
  if (tape == nullptr) return Var<S>(r, nullptr, Var<S>::kConstant);
  using std::exp;
  std::vector<std::pair<typename Tape<S>::Index, S>> edges;
  edges.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].is_constant()) continue;
    edges.emplace_back(xs[i].index(), exp(values[i] - r));
  }
  return Var<S>(r, tape, tape->push_many(edges.begin(), edges.end()));
}

/// Generic entry point accepting any contiguous range of scalars.
template <class S>
S logsumexp(const std::vector<S>& xs) {
  return logsumexp(std::span<const S>(xs));
}

// ---------------------------------------------------------------------------
// Differentiable function wrapper and drivers.

/// A scalar function of a fixed-dimension real vector. `Eval` must be callable
/// with std::span<const S> for every supported scalar S.
template <class Eval>
class DiffFunction {
 public:
  DiffFunction(std::size_t dim, Eval eval) : dim_(dim), eval_(std::move(eval)) {}

  std::size_t dim() const { return dim_; }

  template <class S>
  S operator()(std::span<const S> x) const {
    return eval_(x);
  }

 private:
  std::size_t dim_;
  Eval eval_;
};

template <class Eval>
DiffFunction<Eval> make_function(std::size_t dim, Eval eval) {
  return DiffFunction<Eval>(dim, std::move(eval));
}

struct WorkStats {
  std::size_t forward_units = 0;  ///< edges recorded on the tape (n-ary ops count n)
  std::size_t nodes = 0;
  std::size_t reverse_edges = 0;  ///< edges visited by the reverse sweep
};

struct GradientResult {
  double value = 0.0;
  Eigen::VectorXd gradient;
  WorkStats work;
};

struct HessianResult {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

namespace detail {

inline void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw DimensionError("input has length " + std::to_string(got) + ", function expects " +
                         std::to_string(expected));
  }
}

inline void check_value(double v) {
  if (!std::isfinite(v)) throw EvaluationError("function value is not finite");
}

inline void check_derivatives(const Eigen::VectorXd& g, const char* what) {
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw EvaluationError(std::string(what) + " does not exist at this point (component " +
                            std::to_string(i) + ")");
    }
  }
}

}  // namespace detail

template <class Eval>
double value(const DiffFunction<Eval>& f, std::span<const double> x) {
  detail::check_dim(f.dim(), x.size());
  const double v = f(x);
  detail::check_value(v);
  return v;
}

/// Number of elementary operations in one plain evaluation (log-sum-exp of n terms counts n).
template <class Eval>
std::size_t count_value_ops(const DiffFunction<Eval>& f, std::span<const double> x) {
  detail::check_dim(f.dim(), x.size());
  std::vector<Counted> cx(x.begin(), x.end());
  OpCounter::reset();
  (void)f(std::span<const Counted>(cx));
  return OpCounter::units();
}

template <class Eval>
GradientResult gradient(const DiffFunction<Eval>& f, std::span<const double> x) {
  detail::check_dim(f.dim(), x.size());
  Tape<double> tape;
  std::vector<Var<double>> vx;
  vx.reserve(x.size());
  for (double xi : x) vx.push_back(Var<double>::input(tape, xi));
  const Var<double> y = f(std::span<const Var<double>>(vx));

  GradientResult out;
  out.value = y.value();
  detail::check_value(out.value);
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size()));
  out.work.nodes = tape.size();
  out.work.forward_units = tape.edge_count();
  if (!y.is_constant()) {
    std::vector<double> adj;
    out.work.reverse_edges = tape.sweep(y.index(), 1.0, adj);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (vx[i].index() < adj.size()) out.gradient[static_cast<Eigen::Index>(i)] = adj[vx[i].index()];
    }
  }
  detail::check_derivatives(out.gradient, "gradient");
  return out;
}

/// Forward-over-reverse: column k is the reverse sweep of a tape evaluated
/// with dual inputs seeded along e_k. The result is symmetrized.
template <class Eval>
HessianResult hessian(const DiffFunction<Eval>& f, std::span<const double> x) {
  detail::check_dim(f.dim(), x.size());
  const auto n = static_cast<Eigen::Index>(x.size());
  HessianResult out;
  out.gradient = Eigen::VectorXd::Zero(n);
  out.hessian = Eigen::MatrixXd::Zero(n, n);
  std::vector<Dual> adj;
  for (Eigen::Index k = 0; k < n; ++k) {
    Tape<Dual> tape;
    std::vector<Var<Dual>> vx;
    vx.reserve(x.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      vx.push_back(Var<Dual>::input(tape, Dual(x[static_cast<std::size_t>(i)], i == k ? 1.0 : 0.0)));
    }
    const Var<Dual> y = f(std::span<const Var<Dual>>(vx));
    if (k == 0) {
      out.value = y.value().v;
      detail::check_value(out.value);
    }
    if (y.is_constant()) continue;
    tape.sweep(y.index(), Dual(1.0, 0.0), adj);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto idx = vx[static_cast<std::size_t>(i)].index();
      if (idx >= adj.size()) continue;
      if (k == 0) out.gradient[i] = adj[idx].v;
      out.hessian(i, k) = adj[idx].d;
    }
  }
  detail::check_derivatives(out.gradient, "gradient");
  for (Eigen::Index k = 0; k < n; ++k) detail::check_derivatives(out.hessian.col(k), "Hessian");
  const Eigen::MatrixXd sym = 0.5 * (out.hessian + out.hessian.transpose());
  out.hessian = sym;
  return out;
}

/// Jacobian of a vector-valued function `g(span<const S>) -> std::vector<S>`:
/// one recording, one reverse sweep per output row.
/// Jacobian of a vector-valued map: one recording, then one reverse sweep per
/// output. The sweeps only read the tape, so with `parallel` they are spread
/// over OpenMP threads (`threads` <= 0 means the OpenMP default).
template <class VecEval>
Eigen::MatrixXd jacobian(const VecEval& g, std::span<const double> x, bool parallel = false, int threads = 0) {
  Tape<double> tape;
  std::vector<Var<double>> vx;
  vx.reserve(x.size());
  for (double xi : x) vx.push_back(Var<double>::input(tape, xi));
  const std::vector<Var<double>> ys = g(std::span<const Var<double>>(vx));
  const auto rows = static_cast<Eigen::Index>(ys.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(x.size()));
  auto fill = [&](Eigen::Index r, std::vector<double>& adj) {
    const auto& y = ys[static_cast<std::size_t>(r)];
    if (y.is_constant()) return;
    tape.sweep(y.index(), 1.0, adj);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (vx[i].index() < adj.size()) jac(r, static_cast<Eigen::Index>(i)) = adj[vx[i].index()];
    }
  };
  if (parallel) {
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel num_threads(nt)
    {
      std::vector<double> adj;
#pragma omp for schedule(dynamic, 16)
      for (Eigen::Index r = 0; r < rows; ++r) fill(r, adj);
    }
  } else {
    std::vector<double> adj;
    for (Eigen::Index r = 0; r < rows; ++r) fill(r, adj);
  }
  for (Eigen::Index r = 0; r < jac.rows(); ++r) {
    detail::check_derivatives(jac.row(r).transpose(), "Jacobian");
  }
  return jac;
}

}  // namespace hmmkit::ad
