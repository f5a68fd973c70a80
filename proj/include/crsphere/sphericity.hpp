#pragma once

// Sphericity criterion L^4 Phi = 0 near p, the cubic decomposition of Phi in
// theta, CR defects of its coefficients, and multi-point aggregation.
//
// Series statements are made after restricting ambient jets to the
// complexified hypersurface: an ambient jet is only defined modulo multiples
// of rho, and L0 preserves those multiples.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crsphere/error.hpp"
#include "crsphere/jet.hpp"
#include "crsphere/ode.hpp"
#include "crsphere/patch.hpp"

namespace crsphere {

/// Fewest trusted orders of L^4 Phi that certify series (not only pointwise)
/// vanishing.
inline constexpr int kCertifyTrust = 4;

inline constexpr std::array<const char*, 6> kQuantityNames{"theta", "phi", "L1phi", "L2phi", "L3phi",
                                                           "L4phi"};

struct QuantityReport {
  Complex value;                // at the base point
  double max_abs = 0.0;         // largest trusted ambient coefficient
  double max_abs_on_surface = 0.0;  // same after restriction to M
  int trust = 0;
};

struct ConditionReport {
  Point point;  // caller's coordinates
  bool swapped = false;
  double levi = 0.0;
  double rho_scale = 0.0;
  Tolerances tolerances;
  double threshold = 0.0;
  /// theta, Phi, L Phi, ..., L^4 Phi; entries beyond the available trust are empty.
  std::array<std::optional<QuantityReport>, 6> quantities;

  const std::optional<QuantityReport>& l4() const { return quantities[5]; }
  /// Highest k with L^k Phi available.
  int max_order() const {
    int k = -1;
    for (int i = 1; i < 6; ++i) {
      if (quantities[static_cast<std::size_t>(i)]) k = i - 1;
    }
    return k;
  }
};

namespace detail {

inline QuantityReport quantity(const Jet& j, const ComplexDefining& cd) {
  QuantityReport q;
  q.value = j.constant_term();
  q.trust = j.trust();
  q.max_abs = max_trusted_abs(j);
  q.max_abs_on_surface = max_trusted_abs(restrict_to_surface(cd, j));
  return q;
}

}  // namespace detail

/// Everything the trust of the patch allows, without insisting on L^4 Phi.
inline ConditionReport evaluate_conditions(const HypersurfacePatch& patch, const ComplexDefining& cd,
                                           const Tolerances& tol = {},
                                           PhiRepresentative rep = PhiRepresentative::bordered) {
  ConditionReport r;
  r.point = patch.original_point();
  r.swapped = patch.swapped;
  r.levi = patch.levi;
  r.rho_scale = patch.rho_scale;
  r.tolerances = tol;
  r.threshold = tol.threshold(patch.rho_scale);
  const TangentField01 field = regularizing_field(patch);
  r.quantities[0] = detail::quantity(theta(patch), cd);
  const int k = std::min(4, patch.rho.trust() - 2);
  if (k < 0) return r;
  Jet current = phi(patch, rep);
  r.quantities[1] = detail::quantity(current, cd);
  for (int i = 1; i <= k; ++i) {
    current = apply_field(field, current);
    r.quantities[static_cast<std::size_t>(i) + 1] = detail::quantity(current, cd);
  }
  return r;
}

/// Values, magnitudes and trust orders of theta, Phi, ..., L^4 Phi at p.
inline ConditionReport check_conditions(const HypersurfacePatch& patch, const Tolerances& tol = {},
                                        PhiRepresentative rep = PhiRepresentative::bordered) {
  if (patch.rho.trust() < 6) {
    throw TrustError(std::max(-1, patch.rho.trust() - 2),
                     "condition check needs trust >= 6, patch has " + std::to_string(patch.rho.trust()));
  }
  return evaluate_conditions(patch, complex_defining(patch), tol, rep);
}

/// L^4 Phi(p): relative invariant whose vanishing locus is the umbilical
/// locus. Not normalized against the Chern-Moser curvature.
inline Complex curvature_proxy(const HypersurfacePatch& patch,
                               PhiRepresentative rep = PhiRepresentative::bordered) {
  return iterate_L_phi(patch, 4, rep).back().constant_term();
}

/// Phi = a0 + a1 theta + a2 theta^2 + a3 theta^3 with the coefficients
/// obtained from L^j Phi by the triangular cascade.
struct CubicCoefficients {
  Jet a0, a1, a2, a3;
};

inline CubicCoefficients cubic_decompose(const HypersurfacePatch& patch,
                                         PhiRepresentative rep = PhiRepresentative::bordered) {
  if (patch.rho.trust() < 5) {
    throw TrustError(std::max(-1, patch.rho.trust() - 2),
                     "cubic decomposition needs trust >= 5, patch has " + std::to_string(patch.rho.trust()));
  }
  const auto l = iterate_L_phi(patch, 3, rep);
  const Jet th = theta(patch);
  const Jet th2 = th * th;
  Jet a3 = l[3] * Complex(1.0 / 6.0);
  Jet a2 = (l[2] - Complex(6.0) * a3 * th) * Complex(0.5);
  Jet a1 = l[1] - Complex(3.0) * a3 * th2 - Complex(2.0) * a2 * th;
  Jet a0 = l[0] - a3 * th2 * th - a2 * th2 - a1 * th;
  return {std::move(a0), std::move(a1), std::move(a2), std::move(a3)};
}

/// Holomorphic function of (z, w) that agrees with f on the slice
/// zbar = conj(p_z) of the complexified hypersurface, as an ambient jet.
/// On M it coincides with f exactly when f is a CR function.
inline Jet holomorphic_projection(const ComplexDefining& cd, const Jet& f) {
  const std::array<std::optional<Complex>, 3> slice{std::nullopt, Complex{}, std::nullopt};
  const Jet g = partial_evaluate(restrict_to_surface(cd, f), std::span<const std::optional<Complex>>(slice));
  const Jet w_of_wbar = partial_evaluate(cd.rho_c, std::span<const std::optional<Complex>>(slice));
  // Invert wbar -> w on the slice: solve w_of_wbar(z, s) = w for s(z, w).
  const JetContext solve_ctx{3, w_of_wbar.degree()};
  static constexpr int zs[] = {0, 2};
  const std::array<Jet, 1> system{embed(w_of_wbar, solve_ctx, std::span<const int>(zs)) -
                                  Jet::variable(solve_ctx, 1)};
  const std::array<int, 1> unknown{2};
  const auto s = implicit_solve(std::span<const Jet>(system), std::span<const int>(unknown));
  const std::array<Jet, 2> args{Jet::variable(s.front().context(), 0), s.front()};
  const Jet h = substitute(g, std::span<const Jet>(args));
  static constexpr int zw[] = {kZ, kW};
  return embed(h, JetContext{4, h.degree()}, std::span<const int>(zw));
}

/// Phi - sum_j pi(a_j) theta^j restricted to M, where pi is the holomorphic
/// projection. The cascade itself makes Phi - sum_j a_j theta^j vanish
/// identically, so the CR content is tested by projecting first.
inline Jet reconstruction_residual(const HypersurfacePatch& patch, const CubicCoefficients& c,
                                   PhiRepresentative rep = PhiRepresentative::bordered) {
  const ComplexDefining cd = complex_defining(patch);
  const Jet th = theta(patch);
  const Jet b0 = holomorphic_projection(cd, c.a0), b1 = holomorphic_projection(cd, c.a1);
  const Jet b2 = holomorphic_projection(cd, c.a2), b3 = holomorphic_projection(cd, c.a3);
  const Jet cubic = b0 + th * (b1 + th * (b2 + th * b3));
  return restrict_to_surface(cd, phi(patch, rep) - cubic);
}

/// Largest trusted coefficient of L0 a_j on M, j = 0..3; all zero exactly
/// when the a_j are CR functions.
inline std::array<double, 4> cr_defect(const HypersurfacePatch& patch, const CubicCoefficients& c) {
  const TangentField01 l0 = tangent_01_field(patch);
  const ComplexDefining cd = complex_defining(patch);
  std::array<double, 4> out{};
  const std::array<const Jet*, 4> coeffs{&c.a0, &c.a1, &c.a2, &c.a3};
  for (std::size_t j = 0; j < 4; ++j) {
    out[j] = max_trusted_abs(restrict_to_surface(cd, apply_field(l0, *coeffs[j])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verdict

enum class Verdict { spherical, not_spherical, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::spherical: return "spherical";
    case Verdict::not_spherical: return "not_spherical";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

struct SphericityConfig {
  int degree = 12;
  Tolerances tolerances;
  int samples = 5;
  double radius = 0.05;
  std::uint64_t seed = 0x5EED;
  PhiRepresentative representative = PhiRepresentative::bordered;
};

struct PointOutcome {
  Point point;  // caller's coordinates
  bool is_base = false;
  std::optional<ConditionReport> report;
  std::optional<ErrorKind> error;
  std::string message;

  /// L^4 Phi on M exceeds the threshold somewhere in its trusted range.
  bool witnesses_nonzero() const {
    return report && report->l4() && report->l4()->max_abs_on_surface > report->threshold;
  }
};

struct SphericityReport {
  Verdict verdict = Verdict::inconclusive;
  std::vector<PointOutcome> points;  // base point first, then samples in order
  int degree = 0;
  SphericityConfig config;
  bool finite_jet = false;
  bool sampling = false;
  std::optional<std::size_t> witness;  // index into points
  std::string reason;
};

namespace detail {

inline PointOutcome assess_point(const HypersurfacePatch& patch, const SphericityConfig& cfg, bool base) {
  PointOutcome out;
  out.point = patch.original_point();
  out.is_base = base;
  out.report = evaluate_conditions(patch, complex_defining(patch), cfg.tolerances, cfg.representative);
  return out;
}

inline void aggregate(SphericityReport& rep) {
  bool all_ok = true;
  bool all_certified = true;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const auto& pt = rep.points[i];
    if (!pt.report) {
      all_ok = false;
      continue;
    }
    if (pt.witnesses_nonzero()) {
      if (!rep.witness) rep.witness = i;
      continue;
    }
    const auto& l4 = pt.report->l4();
    if (!l4 || l4->trust < kCertifyTrust) all_certified = false;
  }
  if (rep.witness) {
    rep.verdict = Verdict::not_spherical;
    rep.reason = "L^4 Phi does not vanish on M near point " + std::to_string(*rep.witness);
  } else if (!all_ok) {
    rep.verdict = Verdict::inconclusive;
    rep.reason = "some sample points could not be evaluated";
  } else if (!all_certified) {
    rep.verdict = Verdict::inconclusive;
    rep.reason = "trust too low to certify vanishing of L^4 Phi as a series";
  } else {
    rep.verdict = Verdict::spherical;
    rep.reason = rep.sampling ? "L^4 Phi vanishes on M as a series at p and at every sample point"
                              : "L^4 Phi vanishes on M as a series at p";
  }
}

}  // namespace detail

/// Builds patches at p and at sampled points of M, checks the criterion at
/// each, and aggregates. Errors at the base point propagate; errors at
/// sampled points are recorded per point.
inline SphericityReport sphericity_verdict(const expr::ExprAst& ast, const Point& p,
                                           const SphericityConfig& cfg = {}) {
  SphericityReport rep;
  rep.degree = cfg.degree;
  rep.config = cfg;
  rep.sampling = cfg.samples > 0;
  const HypersurfacePatch base = build_patch(ast, p, cfg.degree);
  rep.points.push_back(detail::assess_point(base, cfg, true));
  if (cfg.samples > 0) {
    const auto samples = sample_points(ast, p, cfg.samples, cfg.radius, cfg.seed);
    for (const auto& q : samples) {
      try {
        rep.points.push_back(detail::assess_point(build_patch(ast, q, cfg.degree), cfg, false));
      } catch (const Error& e) {
        PointOutcome out;
        out.point = q;
        out.error = e.kind();
        out.message = e.what();
        rep.points.push_back(std::move(out));
      }
    }
  }
  detail::aggregate(rep);
  return rep;
}

/// Finite-jet mode: only the series statement at p is available.
inline SphericityReport sphericity_verdict(const Jet& rho, const Point& p, const SphericityConfig& cfg = {}) {
  SphericityReport rep;
  rep.degree = rho.degree();
  rep.config = cfg;
  rep.finite_jet = true;
  const HypersurfacePatch base = build_patch(rho, p);
  rep.points.push_back(detail::assess_point(base, cfg, true));
  detail::aggregate(rep);
  return rep;
}

}  // namespace crsphere
