#pragma once

// Segre-family pipeline: complex defining equation w = rho~(z, zbar, wbar),
// Segre graphs, the associated second-order ODE w'' = phi3(z, w, xi), and the
// fourth xi-derivative of its right-hand side.

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "crsphere/error.hpp"
#include "crsphere/jet.hpp"
#include "crsphere/patch.hpp"

namespace crsphere {

/// Offsets for the 3-variable jets of the complex defining equation.
inline constexpr int kCdZ = 0;
inline constexpr int kCdZbar = 1;
inline constexpr int kCdWbar = 2;

/// Offsets for the 3-variable jets on the 1-jet space, centered at (p, theta(p)).
inline constexpr int kOdeZ = 0;
inline constexpr int kOdeW = 1;
inline constexpr int kOdeXi = 2;

/// w - p_w = rho_c(z - p_z, zbar - conj p_z, wbar - conj p_w).
struct ComplexDefining {
  Jet rho_c;
  Point base;
};

/// Solves rho(z, zbar, w, wbar) = 0 for w.
inline ComplexDefining complex_defining(const HypersurfacePatch& patch) {
  const std::array<Jet, 1> system{patch.rho};
  const std::array<int, 1> unknown{kW};
  try {
    auto sol = implicit_solve(std::span<const Jet>(system), std::span<const int>(unknown));
    return {std::move(sol.front()), patch.point};
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::singular_jacobian) {
      throw Error(ErrorKind::singular_jacobian, "rho_w vanishes at the base point; cannot solve for w");
    }
    throw;
  }
}

/// rho(z, zbar, rho_c, wbar) as a 3-variable jet; zero up to roundoff.
inline Jet round_trip(const HypersurfacePatch& patch, const ComplexDefining& cd) {
  const JetContext ctx = cd.rho_c.context();
  const std::array<Jet, 4> args{Jet::variable(ctx, kCdZ), Jet::variable(ctx, kCdZbar), cd.rho_c,
                                Jet::variable(ctx, kCdWbar)};
  return substitute(patch.rho, std::span<const Jet>(args));
}

/// Restriction of an ambient jet in (z, zbar, w, wbar) to the complexified
/// hypersurface, expressed in (z, zbar, wbar). Only the trusted part of `f`
/// is carried over.
inline Jet restrict_to_surface(const ComplexDefining& cd, const Jet& f) {
  if (f.trust() < 0) {
    throw TrustError(-1, "cannot restrict a jet without trusted coefficients");
  }
  const int degree = f.trust();
  const Jet source = truncated(f, degree);
  const JetContext ctx{3, degree};
  const std::array<Jet, 4> args{Jet::variable(ctx, kCdZ), Jet::variable(ctx, kCdZbar),
                                truncated(cd.rho_c, degree), Jet::variable(ctx, kCdWbar)};
  return substitute(source, std::span<const Jet>(args));
}

/// Segre variety of x = (a, b) as a graph w(z) near p_z.
struct SegreGraph {
  Jet w;           // w(z) - p_w in the offset z - p_z (one variable)
  Point base;      // patch base point
  double shift{};  // distance of (conj a, conj b) from (conj p_z, conj p_w)
};

/// Largest parameter offset accepted by segre_graph.
inline constexpr double kSegreMaxShift = 0.5;

/// w(z) = rho~(z, conj a, conj b). Nonzero parameter offsets evaluate the
/// truncated series away from its center; offsets beyond kSegreMaxShift are
/// refused.
inline SegreGraph segre_graph(const ComplexDefining& cd, const Point& x,
                              double max_shift = kSegreMaxShift) {
  const Complex da = std::conj(x[0]) - std::conj(cd.base[0]);
  const Complex db = std::conj(x[1]) - std::conj(cd.base[1]);
  const double shift = std::max(std::abs(da), std::abs(db));
  if (shift > max_shift) {
    throw Error(ErrorKind::substitution_out_of_range,
                "Segre parameter too far from the base point for the truncated series");
  }
  const std::array<std::optional<Complex>, 3> values{std::nullopt, da, db};
  Jet w = partial_evaluate(cd.rho_c, std::span<const std::optional<Complex>>(values));
  return {std::move(w), cd.base, shift};
}

/// Right-hand side of w'' = Phi(z, w, w') as a jet centered at
/// (p_z, p_w, theta(p)).
struct AssociatedOde {
  Jet phi3;
  Complex base_z;
  Complex base_w;
  Complex base_xi;
};

/// Solves w = rho~(z, A, B), xi = rho~_z(z, A, B) jointly for (A, B), then
/// phi3 = rho~_zz(z, A, B). The Jacobian of that system at the base point is
/// the Levi determinant, so a singular solve means Levi degeneracy.
inline AssociatedOde associated_ode(const ComplexDefining& cd) {
  const Jet& rc = cd.rho_c;
  const Jet rc_z = derive(rc, kCdZ);
  const Jet rc_zz = derive(rc_z, kCdZ);
  const Complex xi0 = rc_z.constant_term();

  // Variables of the joint system: (z, w, xi, abar, bbar).
  const JetContext full{5, rc.degree()};
  static constexpr int placement[] = {0, 3, 4};
  Jet f1 = embed(rc, full, std::span<const int>(placement)) - Jet::variable(full, 1);
  Jet f2 = embed(rc_z, full, std::span<const int>(placement)) - Jet::variable(full, 2) - xi0;
  f2[0] = Complex{};
  const std::array<Jet, 2> system{std::move(f1), std::move(f2)};
  const std::array<int, 2> unknowns{3, 4};
  std::vector<Jet> ab;
  try {
    ab = implicit_solve(std::span<const Jet>(system), std::span<const int>(unknowns));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::singular_jacobian) {
      throw Error(ErrorKind::levi_degenerate, "Segre system is singular: Levi form vanishes at the base point");
    }
    throw;
  }
  const JetContext ctx{3, rc.degree()};
  const std::array<Jet, 3> args{Jet::variable(ctx, kOdeZ), ab[0], ab[1]};
  Jet phi3 = substitute(rc_zz, std::span<const Jet>(args));
  return {std::move(phi3), cd.base[0], cd.base[1], xi0};
}

inline AssociatedOde associated_ode(const HypersurfacePatch& patch) {
  if (patch.finite_jet()) {
    throw Error(ErrorKind::invalid_input, "the associated ODE needs a defining expression");
  }
  return associated_ode(complex_defining(patch));
}

/// Fourth xi-derivative of phi3 (the Cartan-Tresse relative invariant).
inline Jet tresse_invariant(const AssociatedOde& ode) {
  if (ode.phi3.trust() < 4) {
    throw TrustError(ode.phi3.trust(), "phi3 trust " + std::to_string(ode.phi3.trust()) +
                                           " is below the 4 needed for the xi^4 derivative");
  }
  return derive(ode.phi3, kOdeXi, 4);
}

/// True iff every trusted coefficient of phi3 with xi-exponent >= 4 is at
/// most `threshold` in magnitude, i.e. phi3 is cubic in xi.
inline bool cubic_check(const AssociatedOde& ode, double threshold) {
  if (ode.phi3.trust() < 4) {
    throw TrustError(ode.phi3.trust(), "phi3 has too little trust for the cubic test");
  }
  const int end = ode.phi3.layout().count_up_to(ode.phi3.trust());
  for (int i = 0; i < end; ++i) {
    if (ode.phi3.layout().exponents(i)[kOdeXi] >= 4 && std::abs(ode.phi3[i]) > threshold) return false;
  }
  return true;
}

/// Largest trusted |coefficient| among the non-cubic (xi^k, k >= 4) terms.
inline double non_cubic_magnitude(const AssociatedOde& ode) {
  const int end = ode.phi3.layout().count_up_to(ode.phi3.trust());
  double m = 0.0;
  for (int i = 0; i < end; ++i) {
    if (ode.phi3.layout().exponents(i)[kOdeXi] >= 4) m = std::max(m, std::abs(ode.phi3[i]));
  }
  return m;
}

/// Residual of w'' = phi3(z, w, w') along the whole Segre family, as a jet in
/// (z, zbar, wbar): the parameters (zbar, wbar) stay formal.
inline Jet segre_family_residual(const ComplexDefining& cd, const AssociatedOde& ode) {
  const Jet& rc = cd.rho_c;
  const Jet rc_z = derive(rc, kCdZ);
  const Jet rc_zz = derive(rc_z, kCdZ);
  const JetContext ctx = rc.context();
  const std::array<Jet, 3> args{Jet::variable(ctx, kCdZ), rc, rc_z - ode.base_xi};
  return rc_zz - substitute(ode.phi3, std::span<const Jet>(args));
}

struct CrossCheck {
  Complex hypersurface_value;  // L^4 Phi at p
  Complex ode_value;           // d^4 phi3 / d xi^4 at (p, theta(p))
  double residual{};           // |difference| / max(1, |values|)
};

/// The two pipelines evaluate the same relative invariant at the lift
/// (p, theta(p)) of the base point.
inline CrossCheck cross_check(const HypersurfacePatch& patch,
                              PhiRepresentative rep = PhiRepresentative::bordered) {
  const AssociatedOde ode = associated_ode(patch);
  const Complex rhs = tresse_invariant(ode).constant_term();
  const Complex lhs = iterate_L_phi(patch, 4, rep).back().constant_term();
  const double denom = std::max({1.0, std::abs(lhs), std::abs(rhs)});
  return {lhs, rhs, std::abs(lhs - rhs) / denom};
}

}  // namespace crsphere
