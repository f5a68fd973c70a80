#pragma once

// Hypersurface patches in C^2 and the quantities built from the jet of the
// defining function: theta, Phi, tangent (0,1) fields, the regularizing
// field and its iterates on Phi, the Levi form, and point sampling.
//
// Jets of rho live in the offset variables (z, zbar, w, wbar) around the
// base point, treated as independent formal variables.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crsphere/error.hpp"
#include "crsphere/expr.hpp"
#include "crsphere/jet.hpp"

namespace crsphere {

using expr::Point;

inline constexpr int kZ = 0;
inline constexpr int kZbar = 1;
inline constexpr int kW = 2;
inline constexpr int kWbar = 3;

/// Absolute plus relative vanishing threshold.
struct Tolerances {
  double abs = 1e-9;
  double rel = 1e-9;

  double threshold(double scale) const noexcept { return abs + rel * scale; }
};

/// Which ambient extension of Phi to use. Both agree on M and have equal
/// tangential derivatives there.
enum class PhiRepresentative {
  bordered,     ///< rho in the corner of the bordered determinant
  corner_zero,  ///< zero in the corner
};

struct PatchOptions {
  double on_surface_tol = 1e-9;
  double real_tol = 1e-10;  // relative to the largest coefficient of rho
};

/// Base point plus the jet of a real defining function there.
struct HypersurfacePatch {
  Point point;  // in patch coordinates (after a possible z <-> w swap)
  Jet rho;
  std::optional<expr::ExprAst> source;  // absent in finite-jet mode; patch coordinates
  double levi = 0.0;
  int orientation = 1;  // sign of the raw Levi value, so that levi >= 0
  bool swapped = false;
  double rho_scale = 0.0;  // largest trusted |coefficient| of rho

  /// Base point in the caller's coordinates.
  Point original_point() const { return swapped ? Point{point[1], point[0]} : point; }
  bool finite_jet() const noexcept { return !source.has_value(); }
};

/// (0,1) field a d/dzbar + b d/dwbar.
struct TangentField01 {
  Jet a;
  Jet b;
};

namespace detail {

inline Complex linear_coeff(const Jet& j, int var) {
  const int r = j.layout().raise(var, 0);
  return r < 0 ? Complex{} : j[r];
}

inline Complex second_coeff(const Jet& j, int v1, int v2) {
  std::vector<int> e(4, 0);
  ++e[static_cast<std::size_t>(v1)];
  ++e[static_cast<std::size_t>(v2)];
  const int r = j.layout().rank(e);
  const Complex c = r < 0 ? Complex{} : j[r];
  return v1 == v2 ? 2.0 * c : c;
}

/// Bordered Levi determinant det[[0, r_z, r_w], [r_zb, r_zzb, r_wzb], [r_wb, r_zwb, r_wwb]].
inline Complex bordered_levi_determinant(const Jet& rho) {
  const Complex rz = linear_coeff(rho, kZ), rw = linear_coeff(rho, kW);
  const Complex rzb = linear_coeff(rho, kZbar), rwb = linear_coeff(rho, kWbar);
  const Complex rzzb = second_coeff(rho, kZ, kZbar), rwzb = second_coeff(rho, kW, kZbar);
  const Complex rzwb = second_coeff(rho, kZ, kWbar), rwwb = second_coeff(rho, kW, kWbar);
  return -rz * (rzb * rwwb - rwzb * rwb) + rw * (rzb * rzwb - rzzb * rwb);
}

inline double gradient_norm2(const Jet& rho) {
  return std::norm(linear_coeff(rho, kZ)) + std::norm(linear_coeff(rho, kW));
}

inline Jet swap_zw(const Jet& j) {
  static constexpr int perm[] = {2, 3, 0, 1};
  return permute_variables(j, std::span<const int>(perm));
}

inline HypersurfacePatch finish_patch(Jet rho, Point p, std::optional<expr::ExprAst> source,
                                      const PatchOptions& opt) {
  if (rho.nvars() != 4) throw Error(ErrorKind::invalid_input, "defining jet must have 4 variables");
  if (rho.trust() < 2) {
    throw Error(ErrorKind::invalid_input, "defining jet needs trust >= 2, got " + std::to_string(rho.trust()));
  }
  const Complex value = rho.constant_term();
  if (std::abs(value) > opt.on_surface_tol) {
    std::ostringstream os;
    os.precision(6);
    os << "base point is not on the hypersurface: rho(p) = " << value.real();
    if (value.imag() != 0.0) os << (value.imag() < 0 ? "-" : "+") << std::abs(value.imag()) << "i";
    throw Error(ErrorKind::not_on_hypersurface, os.str());
  }
  rho[0] = Complex{};
  const double scale = max_trusted_abs(rho);
  if (!expr::check_real(rho, opt.real_tol * std::max(1.0, scale))) {
    throw Error(ErrorKind::non_real, "defining function is not real-valued");
  }
  const double grad = std::sqrt(gradient_norm2(rho));
  if (grad <= 1e-12 * std::max(1.0, scale)) {
    throw Error(ErrorKind::singular_gradient, "d rho vanishes at the base point");
  }
  HypersurfacePatch patch{p, rho, std::move(source)};
  if (std::abs(linear_coeff(rho, kW)) < std::abs(linear_coeff(rho, kZ))) {
    patch.rho = swap_zw(rho);
    patch.point = {p[1], p[0]};
    if (patch.source) patch.source = expr::swap_coordinates(*patch.source);
    patch.swapped = true;
  }
  patch.rho_scale = scale;
  const double raw = bordered_levi_determinant(patch.rho).real() / gradient_norm2(patch.rho);
  patch.orientation = raw < 0.0 ? -1 : 1;
  patch.levi = std::abs(raw);
  return patch;
}

}  // namespace detail

/// Expands the defining expression at p and validates the patch invariants.
/// Swaps z and w when |rho_w(p)| < |rho_z(p)|.
inline HypersurfacePatch build_patch(const expr::ExprAst& ast, const Point& p, int degree,
                                     const PatchOptions& opt = {}) {
  if (degree < 6) throw Error(ErrorKind::invalid_input, "patch degree must be at least 6");
  Jet rho = expr::expand_at(ast, p, JetContext{4, degree});
  return detail::finish_patch(std::move(rho), p, ast, opt);
}

/// Finite-jet mode: the caller supplies the jet of rho at p directly. Its
/// trust stands in for the regularity of the input.
inline HypersurfacePatch build_patch(Jet rho, const Point& p, const PatchOptions& opt = {}) {
  return detail::finish_patch(std::move(rho), p, std::nullopt, opt);
}

/// Levi determinant at p, normalized by |d rho|^2 and oriented to be >= 0;
/// strictly pseudoconvex iff positive.
inline double levi_form(const HypersurfacePatch& patch) { return patch.levi; }

/// theta = -rho_z / rho_w.
inline Jet theta(const HypersurfacePatch& patch) {
  return -(derive(patch.rho, kZ) * invert(derive(patch.rho, kW)));
}

namespace detail {

inline Jet det3(const Jet& corner, const Jet& rj, const Jet& rw, const Jet& ri, const Jet& rij,
                const Jet& riw, const Jet& rjw, const Jet& rww) {
  // | corner rj  rw  |
  // | ri     rij riw |
  // | rw     rjw rww |
  return corner * (rij * rww - riw * rjw) - rj * (ri * rww - riw * rw) + rw * (ri * rjw - rij * rw);
}

}  // namespace detail

/// 2-jet function of the Segre varieties as an ambient jet,
/// (1/rho_w^3) * det of the bordered second-derivative matrix.
inline Jet phi(const HypersurfacePatch& patch,
               PhiRepresentative rep = PhiRepresentative::bordered) {
  const Jet& rho = patch.rho;
  const Jet rz = derive(rho, kZ);
  const Jet rw = derive(rho, kW);
  const Jet rzz = derive(rz, kZ);
  const Jet rzw = derive(rz, kW);
  const Jet rww = derive(rw, kW);
  const Jet corner = rep == PhiRepresentative::bordered ? rho : Jet(rho.context()).with_trust(rho.trust());
  return detail::det3(corner, rz, rw, rz, rzz, rzw, rzw, rww) * invert(rw * rw * rw);
}

/// Matrix-valued Phi for a hypersurface in C^{n+1}. Variables are laid out as
/// (z1, z1bar, ..., zn, znbar, w, wbar). The corner-zero form is the default
/// here; the result is symmetric.
inline std::vector<std::vector<Jet>> phi_matrix(const Jet& rho, int n,
                                                PhiRepresentative rep = PhiRepresentative::corner_zero) {
  if (n < 1 || rho.nvars() != 2 * n + 2) {
    throw Error(ErrorKind::invalid_input, "phi_matrix: jet must have 2n+2 variables");
  }
  const int wv = 2 * n;
  const Jet rw = derive(rho, wv);
  const Jet rww = derive(rw, wv);
  std::vector<Jet> rz, rzw;
  for (int i = 0; i < n; ++i) {
    rz.push_back(derive(rho, 2 * i));
    rzw.push_back(derive(rz.back(), wv));
  }
  const Jet inv3 = invert(rw * rw * rw);
  const Jet corner = rep == PhiRepresentative::bordered ? rho : Jet(rho.context()).with_trust(rho.trust());
  std::vector<std::vector<Jet>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Jet rij = derive(rz[static_cast<std::size_t>(i)], 2 * j);
      out[static_cast<std::size_t>(i)].push_back(
          detail::det3(corner, rz[static_cast<std::size_t>(j)], rw, rz[static_cast<std::size_t>(i)], rij,
                       rzw[static_cast<std::size_t>(i)], rzw[static_cast<std::size_t>(j)], rww) *
          inv3);
    }
  }
  return out;
}

/// L0 = rho_wbar d/dzbar - rho_zbar d/dwbar; annihilates rho identically.
inline TangentField01 tangent_01_field(const HypersurfacePatch& patch) {
  return {derive(patch.rho, kWbar), -derive(patch.rho, kZbar)};
}

/// Derivative of f along a (0,1) field.
inline Jet apply_field(const TangentField01& field, const Jet& f) {
  return field.a * derive(f, kZbar) + field.b * derive(f, kWbar);
}

/// Normalizes a (0,1) field L to L / (L theta), so the result maps theta to 1.
inline TangentField01 regularize(const HypersurfacePatch& patch, const TangentField01& field) {
  const double grad = std::sqrt(detail::gradient_norm2(patch.rho));
  if (patch.levi <= 1e-10 * grad) {
    throw Error(ErrorKind::levi_degenerate, "Levi form vanishes at the base point (L theta = 0)");
  }
  const Jet th = theta(patch);
  const Jet l_theta = apply_field(field, th);
  const double size = std::abs(field.a.constant_term() * derive(th, kZbar).constant_term()) +
                      std::abs(field.b.constant_term() * derive(th, kWbar).constant_term());
  if (std::abs(l_theta.constant_term()) <= 1e-14 * std::max(1.0, size)) {
    throw Error(ErrorKind::invalid_input, "field vanishes at the base point and cannot be normalized");
  }
  const Jet inv = invert(l_theta);
  return {field.a * inv, field.b * inv};
}

/// Basic regularizing field built from L0.
inline TangentField01 regularizing_field(const HypersurfacePatch& patch) {
  return regularize(patch, tangent_01_field(patch));
}

/// [Phi, LPhi, ..., L^k Phi] for the regularizing field L.
inline std::vector<Jet> iterate_L_phi(const HypersurfacePatch& patch, int k = 4,
                                      PhiRepresentative rep = PhiRepresentative::bordered) {
  if (k < 0) throw Error(ErrorKind::invalid_input, "iterate_L_phi: negative order");
  const int achievable = patch.rho.trust() - 2;
  if (achievable < k) {
    throw TrustError(std::max(achievable, -1),
                     "trust " + std::to_string(patch.rho.trust()) + " supports at most " +
                         std::to_string(std::max(achievable, 0)) + " applications of the field, " +
                         std::to_string(k) + " requested");
  }
  const TangentField01 field = regularizing_field(patch);
  std::vector<Jet> out{phi(patch, rep)};
  for (int i = 0; i < k; ++i) out.push_back(apply_field(field, out.back()));
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
inline double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Points of M near p: tangential perturbation of size in [radius/2, radius]
/// followed by Newton correction along the real normal. Deterministic in `seed`.
inline std::vector<Point> sample_points(const expr::ExprAst& ast, const Point& p, int count,
                                        double radius, std::uint64_t seed = 0x5EED) {
  if (count < 0) throw Error(ErrorKind::invalid_input, "sample count must be nonnegative");
  auto gradient = [&ast](const Point& q) {
    const Jet j = expr::expand_at(ast, q, JetContext{4, 1});
    return std::array<Complex, 3>{j.constant_term(), detail::linear_coeff(j, kZ), detail::linear_coeff(j, kW)};
  };
  std::mt19937_64 gen(seed);
  std::vector<Point> out;
  const auto g0 = gradient(p);
  const Point n0{std::conj(g0[1]), std::conj(g0[2])};
  const double n0sq = std::norm(n0[0]) + std::norm(n0[1]);
  if (n0sq == 0.0) throw Error(ErrorKind::singular_gradient, "d rho vanishes at the base point");
  for (int s = 0; s < count; ++s) {
    Point v;
    for (auto& c : v) {
      const double re = 2.0 * detail::unit_uniform(gen) - 1.0;
      const double im = 2.0 * detail::unit_uniform(gen) - 1.0;
      c = Complex(re, im);
    }
    const double along = (v[0] * std::conj(n0[0]) + v[1] * std::conj(n0[1])).real() / n0sq;
    v = {v[0] - along * n0[0], v[1] - along * n0[1]};
    const double len = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
    const double target = radius * (0.5 + 0.5 * detail::unit_uniform(gen));
    const double f = len > 0.0 ? target / len : 0.0;
    Point q{p[0] + f * v[0], p[1] + f * v[1]};
    bool converged = false;
    for (int it = 0; it < 60; ++it) {
      const auto g = gradient(q);
      const double value = g[0].real();
      if (std::abs(value) <= 1e-13) {
        converged = true;
        break;
      }
      const double norm2 = std::norm(g[1]) + std::norm(g[2]);
      if (norm2 == 0.0) break;
      const double t = -value / (2.0 * norm2);
      q = {q[0] + t * std::conj(g[1]), q[1] + t * std::conj(g[2])};
    }
    if (!converged || std::abs(expr::evaluate_at(ast, q).real()) > 1e-12) {
      throw Error(ErrorKind::newton_failure,
                  "Newton projection onto the hypersurface failed for sample " + std::to_string(s));
    }
    out.push_back(q);
  }
  return out;
}

/// Sampling around a patch; unavailable in finite-jet mode. Points are
/// returned in patch coordinates.
inline std::vector<Point> sample_points(const HypersurfacePatch& patch, int count, double radius,
                                        std::uint64_t seed = 0x5EED) {
  if (!patch.source) {
    throw Error(ErrorKind::sampling_unavailable, "point sampling needs a defining expression");
  }
  return sample_points(*patch.source, patch.point, count, radius, seed);
}

}  // namespace crsphere
