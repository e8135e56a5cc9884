#pragma once

// Core value types shared by the whole library: forward-mode dual numbers,
// phase-space points, a deterministic splittable RNG, and type-erased scalar
// fields on phase space with exact gradients.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metamorph {

// ---------------------------------------------------------------------------
// Errors

/// Evaluation left the admissible domain (non-finite value, window violation).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad configuration: invalid tolerance, degenerate interval, unknown entry.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The time-rescaling factor dropped below its floor; the derived system is
/// degenerate at this point.
struct DegenerateMetamorphosisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Root solve did not converge; message carries the last residual.
struct NoConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The time-rescaling factor changed sign inside the mapped span.
struct ReparameterizationBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Step size underflow while integrating (stiffness or unguarded singularity).
struct StiffnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dual numbers

inline constexpr int kMaxSeed = 16;      // widest gradient carried by a Dual
inline constexpr int kMaxPhaseDim = 8;   // largest N accepted by field factories
inline constexpr int kMaxParams = 12;    // largest parameter count

/// Forward-mode dual number: value plus a dense gradient with respect to a
/// seed basis fixed at seeding time.  A Dual with empty gradient acts as a
/// constant and broadcasts against any seed width.
class Dual {
 public:
  Dual() = default;
  explicit Dual(double v) : val_(v), n_(0) {}

  static Dual constant(double v) { return Dual(v); }

  static Dual seeded(double v, int index, int width) {
    if (width < 0 || width > kMaxSeed || index < 0 || index >= width)
      throw ConfigError("Dual::seeded: seed index/width out of range");
    Dual d(v);
    d.n_ = width;
    d.g_.fill(0.0);
    d.g_[static_cast<std::size_t>(index)] = 1.0;
    return d;
  }

  double value() const { return val_; }
  int grad_size() const { return n_; }
  double grad(int i) const { return i < n_ ? g_[static_cast<std::size_t>(i)] : 0.0; }

  Dual& operator+=(const Dual& o) {
    broadcast(o.n_);
    for (int i = 0; i < o.n_; ++i) g_[i] += o.g_[i];
    val_ += o.val_;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    broadcast(o.n_);
    for (int i = 0; i < o.n_; ++i) g_[i] -= o.g_[i];
    val_ -= o.val_;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    broadcast(o.n_);
    for (int i = 0; i < n_; ++i) g_[i] *= o.val_;
    for (int i = 0; i < o.n_; ++i) g_[i] += val_ * o.g_[i];
    val_ *= o.val_;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    broadcast(o.n_);
    const double inv = 1.0 / o.val_;
    for (int i = 0; i < n_; ++i) g_[i] *= inv;
    const double s = val_ * inv * inv;
    for (int i = 0; i < o.n_; ++i) g_[i] -= s * o.g_[i];
    val_ *= inv;
    return *this;
  }

  Dual& operator+=(double c) { val_ += c; return *this; }
  Dual& operator-=(double c) { val_ -= c; return *this; }
  Dual& operator*=(double c) {
    val_ *= c;
    for (int i = 0; i < n_; ++i) g_[i] *= c;
    return *this;
  }
  Dual& operator/=(double c) { return (*this) *= (1.0 / c); }

  /// Applies the chain rule: value -> f, gradient -> df * gradient.
  Dual chain(double f, double df) const {
    Dual r(f);
    r.n_ = n_;
    for (int i = 0; i < n_; ++i) r.g_[i] = df * g_[i];
    return r;
  }

 private:
  void broadcast(int m) {
    if (m == n_ || m == 0) return;
    if (n_ == 0) {
      n_ = m;
      g_.fill(0.0);
      return;
    }
    throw std::logic_error("Dual: mixed seed widths");
  }

  double val_ = 0.0;
  std::array<double, kMaxSeed> g_{};
  int n_ = 0;
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator+(Dual a, double c) { return a += c; }
inline Dual operator-(Dual a, double c) { return a -= c; }
inline Dual operator*(Dual a, double c) { return a *= c; }
inline Dual operator/(Dual a, double c) { return a /= c; }
inline Dual operator+(double c, Dual a) { return a += c; }
inline Dual operator-(double c, const Dual& a) { return a.chain(c - a.value(), -1.0); }
inline Dual operator*(double c, Dual a) { return a *= c; }
inline Dual operator/(double c, const Dual& a) {
  const double inv = 1.0 / a.value();
  return a.chain(c * inv, -c * inv * inv);
}
inline Dual operator-(const Dual& a) { return a.chain(-a.value(), -1.0); }
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.value() < b.value(); }
inline bool operator>(const Dual& a, const Dual& b) { return a.value() > b.value(); }
inline bool operator<(const Dual& a, double b) { return a.value() < b; }
inline bool operator>(const Dual& a, double b) { return a.value() > b; }
inline bool operator<=(const Dual& a, double b) { return a.value() <= b; }
inline bool operator>=(const Dual& a, double b) { return a.value() >= b; }

inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.value());
  return a.chain(s, 0.5 / s);
}
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value());
  return a.chain(e, e);
}
inline Dual log(const Dual& a) { return a.chain(std::log(a.value()), 1.0 / a.value()); }
inline Dual sin(const Dual& a) { return a.chain(std::sin(a.value()), std::cos(a.value())); }
inline Dual cos(const Dual& a) { return a.chain(std::cos(a.value()), -std::sin(a.value())); }
inline Dual tan(const Dual& a) {
  const double t = std::tan(a.value());
  return a.chain(t, 1.0 + t * t);
}
inline Dual sinh(const Dual& a) { return a.chain(std::sinh(a.value()), std::cosh(a.value())); }
inline Dual cosh(const Dual& a) { return a.chain(std::cosh(a.value()), std::sinh(a.value())); }
inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.value());
  return a.chain(t, 1.0 - t * t);
}
inline Dual pow(const Dual& a, double c) {
  return a.chain(std::pow(a.value(), c), c * std::pow(a.value(), c - 1.0));
}
inline Dual abs(const Dual& a) {
  const double s = a.value() < 0.0 ? -1.0 : (a.value() > 0.0 ? 1.0 : 0.0);
  return a.chain(std::fabs(a.value()), s);
}

/// Extracts the plain value from either scalar type; lets generic code branch
/// on magnitudes without breaking differentiation.
inline double scalar_value(double x) { return x; }
inline double scalar_value(const Dual& x) { return x.value(); }

namespace detail {
template <class S>
S sq(const S& x) { return x * x; }
}  // namespace detail

// ---------------------------------------------------------------------------
// Phase points

/// A point of 2N-dimensional phase space: generalized coordinates q and
/// conjugate momenta p, both of length N.
struct PhasePoint {
  std::vector<double> q;
  std::vector<double> p;

  PhasePoint() = default;
  PhasePoint(std::vector<double> q_, std::vector<double> p_)
      : q(std::move(q_)), p(std::move(p_)) {
    if (q.empty() || q.size() != p.size())
      throw ConfigError("PhasePoint: q and p must have equal nonzero length");
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!std::isfinite(q[i]))
        throw DomainError("PhasePoint: non-finite q[" + std::to_string(i) + "]");
      if (!std::isfinite(p[i]))
        throw DomainError("PhasePoint: non-finite p[" + std::to_string(i) + "]");
    }
  }

  int dim() const { return static_cast<int>(q.size()); }

  friend bool operator==(const PhasePoint& a, const PhasePoint& b) {
    return a.q == b.q && a.p == b.p;
  }
};

// ---------------------------------------------------------------------------
// Deterministic RNG

/// Splittable 64-bit mixing generator (splitmix64 constants).  The stream is a
/// pure function of the seed, identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw ConfigError("Rng::uniform: degenerate interval");
    return lo + (hi - lo) * uniform01();
  }

  /// Derives an independent child stream; the parent advances by one draw.
  Rng split() { return Rng(next_u64() ^ 0x5851F42D4C957F2DULL); }

 private:
  std::uint64_t state_;
};

/// One closed interval of a sampling box.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Sampling box over phase space: 2N intervals, q-block first then p-block.
using Box = std::vector<Interval>;

/// Draws n uniform points from the box.  Coordinate order per point: q, then p.
inline std::vector<PhasePoint> sample_phase_points(Rng& rng, int n, int dim, const Box& box) {
  if (n < 1) throw ConfigError("sample_phase_points: n must be >= 1");
  if (dim < 1) throw ConfigError("sample_phase_points: dimension must be >= 1");
  if (static_cast<int>(box.size()) != 2 * dim)
    throw ConfigError("sample_phase_points: box must list 2N intervals");
  for (const auto& iv : box)
    if (!(iv.lo < iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
      throw ConfigError("sample_phase_points: degenerate interval");
  std::vector<PhasePoint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    std::vector<double> q(static_cast<std::size_t>(dim)), p(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) q[i] = rng.uniform(box[i].lo, box[i].hi);
    for (int i = 0; i < dim; ++i) p[i] = rng.uniform(box[dim + i].lo, box[dim + i].hi);
    out.emplace_back(std::move(q), std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scalar fields on phase space

/// Gradient of a scalar field split into its q- and p-blocks.
struct GradQP {
  std::vector<double> dq;
  std::vector<double> dp;
};

struct FieldEval {
  double value = 0.0;
  GradQP grad;
};

namespace detail {
inline void check_finite_grad(double value, std::span<const double> gq,
                              std::span<const double> gp, const std::string& name) {
  if (!std::isfinite(value)) throw DomainError(name + ": non-finite value");
  for (std::size_t i = 0; i < gq.size(); ++i)
    if (!std::isfinite(gq[i]))
      throw DomainError(name + ": non-finite derivative dq[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < gp.size(); ++i)
    if (!std::isfinite(gp[i]))
      throw DomainError(name + ": non-finite derivative dp[" + std::to_string(i) + "]");
}
}  // namespace detail

/// Type-erased scalar field f(q, p) carrying two evaluation routes: a plain
/// value route and an exact-gradient route (dual numbers or a custom closure).
class PhaseField {
 public:
  using ValueFn = std::function<double(std::span<const double>, std::span<const double>)>;
  // returns the value, writes the gradient blocks
  using GradFn = std::function<double(std::span<const double>, std::span<const double>,
                                      std::span<double>, std::span<double>)>;

  PhaseField() = default;
  PhaseField(int dim, std::string name, ValueFn value, GradFn grad)
      : dim_(dim), name_(std::move(name)), value_(std::move(value)), grad_(std::move(grad)) {}

  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  bool valid() const { return static_cast<bool>(value_); }

  double value(std::span<const double> q, std::span<const double> p) const {
    return value_(q, p);
  }
  double value(const PhasePoint& x) const { return value_(x.q, x.p); }

  /// Value plus exact gradient; checks finiteness and names the offending
  /// component on failure.
  double eval_flat(std::span<const double> q, std::span<const double> p,
                   std::span<double> gq, std::span<double> gp) const {
    const double v = grad_(q, p, gq, gp);
    detail::check_finite_grad(v, gq, gp, name_);
    return v;
  }

  FieldEval eval(const PhasePoint& x) const {
    FieldEval e;
    e.grad.dq.resize(x.q.size());
    e.grad.dp.resize(x.p.size());
    e.value = eval_flat(x.q, x.p, e.grad.dq, e.grad.dp);
    return e;
  }

 private:
  int dim_ = 0;
  std::string name_;
  ValueFn value_;
  GradFn grad_;
};

/// Builds a PhaseField from one generic callable f(q, p) evaluable on both
/// double and Dual spans.
template <class F>
PhaseField make_phase_field(int dim, std::string name, F f) {
  if (dim < 1 || dim > kMaxPhaseDim)
    throw ConfigError("make_phase_field: dimension out of supported range");
  auto value = [f, dim](std::span<const double> q, std::span<const double> p) -> double {
    (void)dim;
    return f(q, p);
  };
  auto grad = [f, dim](std::span<const double> q, std::span<const double> p,
                       std::span<double> gq, std::span<double> gp) -> double {
    std::array<Dual, kMaxPhaseDim> dq, dp;
    const int width = 2 * dim;
    for (int i = 0; i < dim; ++i) {
      dq[i] = Dual::seeded(q[i], i, width);
      dp[i] = Dual::seeded(p[i], dim + i, width);
    }
    const Dual r = f(std::span<const Dual>(dq.data(), static_cast<std::size_t>(dim)),
                     std::span<const Dual>(dp.data(), static_cast<std::size_t>(dim)));
    for (int i = 0; i < dim; ++i) {
      if (!gq.empty()) gq[i] = r.grad(i);
      if (!gp.empty()) gp[i] = r.grad(dim + i);
    }
    return r.value();
  };
  return PhaseField(dim, std::move(name), std::move(value), std::move(grad));
}

/// Exact first derivatives of f at x via dual propagation.
inline GradQP grad_phase(const PhaseField& f, const PhasePoint& x) {
  if (x.dim() != f.dim()) throw ConfigError("grad_phase: dimension mismatch");
  return f.eval(x).grad;
}

}  // namespace metamorph
