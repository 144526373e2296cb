#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "spen/core.hpp"
#include "spen/random.hpp"

namespace spen {

// Problem constants used by the budget formulas. The Lipschitz constants and
// iterate bounds are optional: a family either declares them or they are
// filled in by estimate_constants().
struct ProblemConstants {
  std::optional<double> L_g;  // Lipschitz constant of grad f
  std::optional<double> L_J;  // Lipschitz constant of J
  double sigma = 0.0;         // oracle noise bound
  double f_low = 0.0;         // lower bound on f
  std::optional<double> kappa_g, kappa_c, kappa_f, kappa_J;

  static double require(const std::optional<double>& v, const char* name) {
    if (!v) throw ConfigError(std::string("problem constant ") + name + " is not available");
    return *v;
  }
  double Lg() const { return require(L_g, "L_g"); }
  double LJ() const { return require(L_J, "L_J"); }
  double kg() const { return require(kappa_g, "kappa_g"); }
  double kc() const { return require(kappa_c, "kappa_c"); }
  double kf() const { return require(kappa_f, "kappa_f"); }
  double kJ() const { return require(kappa_J, "kappa_J"); }

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and >= 0");
    if (!std::isfinite(f_low)) throw ConfigError("f_low must be finite");
    auto nonneg = [](const std::optional<double>& v, const char* name) {
      if (v && (!std::isfinite(*v) || *v < 0.0))
        throw ConfigError(std::string(name) + " must be finite and >= 0");
    };
    nonneg(L_g, "L_g");
    nonneg(L_J, "L_J");
    nonneg(kappa_g, "kappa_g");
    nonneg(kappa_c, "kappa_c");
    nonneg(kappa_J, "kappa_J");
    if (kappa_f && !std::isfinite(*kappa_f)) throw ConfigError("kappa_f must be finite");
  }
};

struct Box {
  Vector lower;
  Vector upper;
};

// Exact constraint map c : R^n -> R^q together with its Jacobian.
class ConstraintMap {
 public:
  using Fn = std::function<void(const Vector& x, Vector& c, Matrix& J)>;

  ConstraintMap(std::size_t n, std::size_t q, Fn fn) : n_(n), q_(q), fn_(std::move(fn)) {}

  std::size_t dimension() const noexcept { return n_; }
  std::size_t count() const noexcept { return q_; }
  void operator()(const Vector& x, Vector& c, Matrix& J) const { fn_(x, c, J); }

 private:
  std::size_t n_, q_;
  Fn fn_;
};

// Exact objective, used only as ground truth by the harness.
struct ExactObjective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

enum class OracleKind { first_order, zeroth_order };

inline const char* to_string(OracleKind k) {
  return k == OracleKind::first_order ? "first-order" : "zeroth-order";
}

// Stochastic access to f. Implementations must be pure functions of
// (x, stream): the stream plays the role of the random variable xi.
class StochasticOracle {
 public:
  virtual ~StochasticOracle() = default;

  virtual bool has_first_order() const = 0;
  virtual bool has_zeroth_order() const = 0;

  Vector gradient(const Vector& x, const RandomStream& xi) const {
    if (!has_first_order()) throw OracleKindError("oracle has no first-order (SFO) access");
    calls_.fetch_add(1, std::memory_order_relaxed);
    return gradient_impl(x, xi);
  }

  double value(const Vector& x, const RandomStream& xi) const {
    if (!has_zeroth_order()) throw OracleKindError("oracle has no zeroth-order (SZO) access");
    calls_.fetch_add(1, std::memory_order_relaxed);
    return value_impl(x, xi);
  }

  // Total invocations across all threads since construction or reset.
  std::uint64_t invocation_count() const noexcept { return calls_.load(std::memory_order_relaxed); }
  void reset_invocation_count() const noexcept { calls_.store(0, std::memory_order_relaxed); }

 protected:
  virtual Vector gradient_impl(const Vector& x, const RandomStream& xi) const = 0;
  virtual double value_impl(const Vector& x, const RandomStream& xi) const = 0;

 private:
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Additive Gaussian noise around an exact objective: covariance (sigma^2/n) I
// on gradients and variance sigma^2 on values, so E||G - grad f||^2 = sigma^2.
class GaussianNoiseOracle final : public StochasticOracle {
 public:
  GaussianNoiseOracle(ExactObjective f, std::size_t n, double sigma, bool first_order = true,
                      bool zeroth_order = true)
      : f_(std::move(f)), n_(n), sigma_(sigma), first_(first_order), zeroth_(zeroth_order) {}

  bool has_first_order() const override { return first_; }
  bool has_zeroth_order() const override { return zeroth_; }
  double sigma() const noexcept { return sigma_; }

 protected:
  Vector gradient_impl(const Vector& x, const RandomStream& xi) const override {
    Vector g = f_.gradient(x);
    if (sigma_ > 0.0) {
      auto eng = xi.engine();
      Vector z(static_cast<Eigen::Index>(n_));
      fill_standard_normal(eng, z);
      g.noalias() += (sigma_ / std::sqrt(static_cast<double>(n_))) * z;
    }
    return g;
  }

  double value_impl(const Vector& x, const RandomStream& xi) const override {
    double v = f_.value(x);
    if (sigma_ > 0.0) {
      auto eng = xi.engine();
      std::normal_distribution<double> normal(0.0, 1.0);
      v += sigma_ * normal(eng);
    }
    return v;
  }

 private:
  ExactObjective f_;
  std::size_t n_;
  double sigma_;
  bool first_, zeroth_;
};

// A constrained stochastic problem: minimize E[F(x, xi)] subject to c(x) = 0.
// Handles are immutable and can be shared across concurrent replications.
struct ConstrainedProblem {
  std::string name;
  std::size_t n = 0;
  std::size_t q = 0;
  std::shared_ptr<const ConstraintMap> constraints;
  std::shared_ptr<const StochasticOracle> oracle;
  std::shared_ptr<const ExactObjective> true_objective;  // optional
  ProblemConstants constants;
  std::optional<Box> sampling_box;
  Vector x_init;
};

struct ConstraintEval {
  Vector c;
  Matrix J;
};

inline ConstraintEval eval_constraints(const ConstrainedProblem& p, const Vector& x) {
  if (x.size() != static_cast<Eigen::Index>(p.n))
    throw ConfigError("eval_constraints: x has length " + std::to_string(x.size()) + ", expected " +
                      std::to_string(p.n));
  if (!x.allFinite()) throw DomainError("eval_constraints: x has non-finite entries");
  ConstraintEval out;
  out.c.resize(static_cast<Eigen::Index>(p.q));
  out.J.resize(static_cast<Eigen::Index>(p.q), static_cast<Eigen::Index>(p.n));
  (*p.constraints)(x, out.c, out.J);
  if (out.c.size() != static_cast<Eigen::Index>(p.q) || out.J.rows() != static_cast<Eigen::Index>(p.q) ||
      out.J.cols() != static_cast<Eigen::Index>(p.n))
    throw DomainError("eval_constraints: constraint map returned wrong shapes");
  for (Eigen::Index i = 0; i < out.c.size(); ++i)
    if (!std::isfinite(out.c(i))) throw DomainError("eval_constraints: c[" + std::to_string(i) + "] is not finite");
  for (Eigen::Index i = 0; i < out.J.rows(); ++i)
    for (Eigen::Index j = 0; j < out.J.cols(); ++j)
      if (!std::isfinite(out.J(i, j)))
        throw DomainError("eval_constraints: J(" + std::to_string(i) + "," + std::to_string(j) + ") is not finite");
  return out;
}

struct OracleSample {
  OracleKind kind = OracleKind::first_order;
  std::variant<Vector, double> payload;
  SeedPath seed_path;

  const Vector& gradient() const { return std::get<Vector>(payload); }
  double value() const { return std::get<double>(payload); }
};

// Per-run count of oracle invocations.
struct OracleLedger {
  std::uint64_t sfo_calls = 0;
  std::uint64_t szo_calls = 0;
  std::uint64_t total() const noexcept { return sfo_calls + szo_calls; }
};

inline OracleSample sample_sfo(const ConstrainedProblem& p, const Vector& x, const RandomStream& stream,
                               OracleLedger* ledger = nullptr) {
  if (!p.oracle || !p.oracle->has_first_order())
    throw OracleKindError("problem '" + p.name + "' has no first-order oracle");
  OracleSample s;
  s.kind = OracleKind::first_order;
  s.payload = p.oracle->gradient(x, stream);
  s.seed_path = stream.path();
  if (ledger) ++ledger->sfo_calls;
  if (!std::get<Vector>(s.payload).allFinite()) throw DomainError("sample_sfo: non-finite gradient sample");
  return s;
}

inline OracleSample sample_szo(const ConstrainedProblem& p, const Vector& x, const RandomStream& stream,
                               OracleLedger* ledger = nullptr) {
  if (!p.oracle || !p.oracle->has_zeroth_order())
    throw OracleKindError("problem '" + p.name + "' has no zeroth-order oracle");
  OracleSample s;
  s.kind = OracleKind::zeroth_order;
  s.payload = p.oracle->value(x, stream);
  s.seed_path = stream.path();
  if (ledger) ++ledger->szo_calls;
  if (!std::isfinite(std::get<double>(s.payload))) throw DomainError("sample_szo: non-finite value sample");
  return s;
}

// Mean of m SFO draws; draw i uses stream.child(i).
inline Vector batch_gradient(const ConstrainedProblem& p, const Vector& x, std::size_t m,
                             const RandomStream& stream, OracleLedger* ledger = nullptr) {
  if (m == 0) throw ConfigError("batch_gradient: batch size m must be >= 1");
  if (!p.oracle || !p.oracle->has_first_order())
    throw OracleKindError("problem '" + p.name + "' has no first-order oracle");
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(p.n));
  for (std::size_t i = 0; i < m; ++i) sum += p.oracle->gradient(x, stream.child(i));
  if (ledger) ledger->sfo_calls += m;
  if (m == 1) return sum;
  return sum / static_cast<double>(m);
}

namespace detail {

inline double inflate(double v) { return v + 0.5 * std::abs(v); }

inline Vector uniform_in_box(const Box& box, CounterEngine& eng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(box.lower.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = box.lower(i) + u(eng) * (box.upper(i) - box.lower(i));
  return x;
}

inline double spectral_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

}  // namespace detail

// Fills constants the problem does not declare. Lipschitz constants are
// the largest difference quotient over `trials` random pairs in the sampling
// box, inflated by 1.5; iterate bounds are the largest sampled value, inflated
// the same way. Declared values are returned unchanged.
inline ProblemConstants estimate_constants(const ConstrainedProblem& p, std::size_t trials,
                                           const RandomStream& stream) {
  ProblemConstants out = p.constants;
  const bool need_any = !out.L_g || !out.L_J || !out.kappa_g || !out.kappa_c || !out.kappa_f || !out.kappa_J;
  if (!need_any) return out;
  if (!p.sampling_box) throw ConfigError("estimate_constants: problem '" + p.name + "' declares no sampling box");
  if (!p.true_objective && !(p.oracle && p.oracle->has_first_order()))
    throw ConfigError("estimate_constants: needs an exact objective or a first-order oracle");
  const Box& box = *p.sampling_box;

  // Without the exact objective, gradients come from the SFO with common
  // random numbers at both points of a pair, and values from SZO averages.
  constexpr std::size_t kAverage = 64;
  auto grad_at = [&](const Vector& x, const RandomStream& s) -> Vector {
    if (p.true_objective) return p.true_objective->gradient(x);
    return batch_gradient(p, x, kAverage, s);
  };
  auto value_at = [&](const Vector& x, const RandomStream& s) -> std::optional<double> {
    if (p.true_objective) return p.true_objective->value(x);
    if (!p.oracle || !p.oracle->has_zeroth_order()) return std::nullopt;
    double sum = 0.0;
    for (std::size_t i = 0; i < kAverage; ++i) sum += p.oracle->value(x, s.child(i));
    return sum / static_cast<double>(kAverage);
  };

  double lg = 0.0, lj = 0.0, kg = 0.0, kc = 0.0, kJ = 0.0;
  std::optional<double> kf;
  auto eng = stream.engine();
  for (std::size_t t = 0; t < trials; ++t) {
    const Vector x = detail::uniform_in_box(box, eng);
    const Vector y = detail::uniform_in_box(box, eng);
    const double dist = (x - y).norm();
    const RandomStream common = stream.child(t);
    const Vector gx = grad_at(x, common);
    const Vector gy = grad_at(y, common);
    const auto cx = eval_constraints(p, x);
    const auto cy = eval_constraints(p, y);
    if (dist > 0.0) {
      lg = std::max(lg, (gx - gy).norm() / dist);
      lj = std::max(lj, detail::spectral_norm(cx.J - cy.J) / dist);
    }
    kg = std::max({kg, gx.norm(), gy.norm()});
    kc = std::max({kc, cx.c.norm(), cy.c.norm()});
    kJ = std::max({kJ, detail::spectral_norm(cx.J), detail::spectral_norm(cy.J)});
    if (auto vx = value_at(x, common)) kf = std::max(kf.value_or(*vx), *vx);
    if (auto vy = value_at(y, common)) kf = std::max(kf.value_or(*vy), *vy);
  }
  if (!out.L_g) out.L_g = 1.5 * lg;
  if (!out.L_J) out.L_J = 1.5 * lj;
  if (!out.kappa_g) out.kappa_g = detail::inflate(kg);
  if (!out.kappa_c) out.kappa_c = detail::inflate(kc);
  if (!out.kappa_J) out.kappa_J = detail::inflate(kJ);
  if (!out.kappa_f && kf) out.kappa_f = detail::inflate(*kf);
  return out;
}

}  // namespace spen
