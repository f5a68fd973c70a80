#include <gtest/gtest.h>

#include "corpus.hpp"
#include "crsphere/ode.hpp"
#include "crsphere/patch.hpp"
#include "oracles.hpp"

using namespace crsphere;

namespace {

HypersurfacePatch patch_of(const std::string& rho, const Point& p, int degree = 12) {
  return build_patch(expr::parse(rho), p, degree);
}

Complex lin(const Jet& j, int var) { return j.coeff(MultiIndex(std::vector<int>{var == 0, var == 1, var == 2, var == 3})); }

double trusted(const Jet& j) { return max_trusted_abs(j); }

/// Magnitude scale of [Phi, ..., L^4 Phi], for roundoff bounds.
double chain_scale(const std::vector<Jet>& l) {
  double m = 1.0;
  for (const auto& j : l) m = std::max(m, trusted(j));
  return m;
}

/// Phi at q from finite differences of the expression, with independent
/// values (z, zbar, w, wbar).
Complex phi_by_differences(const expr::ExprAst& ast, const oracles::Values& x) {
  auto f = [&ast](const oracles::Values& v) { return expr::evaluate(ast, v); };
  auto d = [&](oracles::Index idx) { return oracles::central_difference(f, x, idx, 1e-2); };
  const Complex r = f(x), rz = d({1, 0, 0, 0}), rw = d({0, 0, 1, 0});
  const Complex rzz = d({2, 0, 0, 0}), rzw = d({1, 0, 1, 0}), rww = d({0, 0, 2, 0});
  const Complex det = r * (rzz * rww - rzw * rzw) - rz * (rz * rww - rzw * rw) + rw * (rz * rzw - rzz * rw);
  return det / (rw * rw * rw);
}

}  // namespace

TEST(BuildPatch, HeisenbergGradient) {
  const auto patch = patch_of(corpus::kHeisenberg, {0.0, 0.0});
  EXPECT_EQ(lin(patch.rho, kW), Complex(0.0, -0.5));
  EXPECT_EQ(lin(patch.rho, kZ), Complex(0.0));
  EXPECT_FALSE(patch.swapped);
  EXPECT_FALSE(patch.finite_jet());
}

TEST(BuildPatch, SphereGradient) {
  const auto patch = patch_of(corpus::kSphere, {0.0, 1.0});
  EXPECT_EQ(lin(patch.rho, kW), Complex(1.0));
  EXPECT_EQ(lin(patch.rho, kZ), Complex(0.0));
}

TEST(BuildPatch, NotOnHypersurface) {
  try {
    (void)patch_of(corpus::kHeisenberg, {0.0, Complex(0.0, 1.0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_on_hypersurface);
  }
  EXPECT_NO_THROW((void)patch_of(corpus::kHeisenberg, {0.0, 1.0}));
}

TEST(BuildPatch, Rejections) {
  auto kind = [](const std::string& rho, const Point& p, int degree = 12) {
    try {
      (void)patch_of(rho, p, degree);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::invalid_input;
  };
  EXPECT_EQ(kind("Im(w) - z", {0.0, 0.0}), ErrorKind::non_real);
  EXPECT_EQ(kind("abs2(z) + abs2(w)", {0.0, 0.0}), ErrorKind::singular_gradient);
  EXPECT_THROW((void)patch_of(corpus::kHeisenberg, {0.0, 0.0}, 5), Error);
}

TEST(BuildPatch, SwapsWhenRhoWVanishes) {
  const auto patch = patch_of(corpus::kSphere, {1.0, 0.0});
  EXPECT_TRUE(patch.swapped);
  EXPECT_EQ(patch.original_point()[0], Complex(1.0));
  EXPECT_GT(std::abs(lin(patch.rho, kW)), 0.5);
}

TEST(BuildPatch, FiniteJetMode) {
  const Jet rho = expr::expand_at(expr::parse(corpus::kHeisenberg), {0.0, 0.0}, JetContext{4, 8});
  const auto patch = build_patch(rho, {0.0, 0.0});
  EXPECT_TRUE(patch.finite_jet());
  EXPECT_NEAR(patch.levi, 1.0, 1e-15);
}

TEST(Theta, Heisenberg) {
  const Jet th = theta(patch_of(corpus::kHeisenberg, {0.0, 0.0}));
  for (int i = 0; i < th.size(); ++i) {
    const bool zbar = th.index_at(i) == MultiIndex{0, 1, 0, 0};
    EXPECT_EQ(th[i], zbar ? Complex(0.0, 2.0) : Complex(0.0)) << i;
  }
}

TEST(Theta, Sphere) {
  const auto patch = patch_of(corpus::kSphere, {0.0, 1.0});
  const Jet th = theta(patch);
  const JetContext ctx = patch.rho.context();
  const Jet want = -(Jet::variable(ctx, kZbar) * invert(Jet::constant(ctx, 1.0) + Jet::variable(ctx, kWbar)));
  EXPECT_LT(max_abs(th - want), 1e-15);
  EXPECT_EQ(th.constant_term(), Complex(0.0));
}

TEST(Theta, VanishesWhereRhoZVanishes) {
  for (const auto& s : corpus::spherical()) {
    const auto patch = patch_of(s.rho, s.point);
    if (std::abs(lin(patch.rho, kZ)) == 0.0) {
      EXPECT_EQ(theta(patch).constant_term(), Complex(0.0)) << s.name;
    }
  }
}

TEST(Phi, VanishesOnModels) {
  for (const char* rho : {"Im(w) - abs2(z)", "z*zbar + w*wbar - 1"}) {
    const Point p = std::string(rho)[0] == 'I' ? Point{0.0, 0.0} : Point{0.0, 1.0};
    const auto patch = patch_of(rho, p);
    for (auto rep : {PhiRepresentative::bordered, PhiRepresentative::corner_zero}) {
      EXPECT_EQ(trusted(phi(patch, rep)), 0.0) << rho;
    }
  }
}

TEST(Phi, MatchesFiniteDifferenceOracle) {
  const std::string rho = "Im(w) - abs2(z) - z^2*zbar^2";
  const auto ast = expr::parse(rho);
  const auto patch = patch_of(rho, {0.0, 0.0});
  const Jet ph = phi(patch);
  EXPECT_GT(trusted(ph), 1e-3);
  const std::array<std::array<Complex, 2>, 4> offsets{{{0.0, 0.0}, {Complex(0.05, 0.02), 0.0},
                                                      {Complex(-0.03, 0.04), Complex(0.02, 0.01)},
                                                      {Complex(0.04, -0.01), Complex(0.0, 0.03)}}};
  for (const auto& o : offsets) {
    const std::array<Complex, 4> d{o[0], std::conj(o[0]), o[1], std::conj(o[1])};
    const Complex got = evaluate(ph, std::span<const Complex>(d));
    const Complex want = phi_by_differences(ast, {o[0], std::conj(o[0]), o[1], std::conj(o[1])});
    EXPECT_LT(std::abs(got - want), 1e-7 * std::max(1.0, std::abs(want)));
  }
}

TEST(Phi, RepresentativesAgreeOnSurface) {
  for (const auto& s : corpus::all()) {
    const auto patch = patch_of(s.rho, s.point);
    const auto cd = complex_defining(patch);
    const auto a = iterate_L_phi(patch, 4, PhiRepresentative::bordered);
    const auto b = iterate_L_phi(patch, 4, PhiRepresentative::corner_zero);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double scale = 1.0 + trusted(a[k]);
      EXPECT_LT(std::abs(a[k].constant_term() - b[k].constant_term()), 1e-10 * scale) << s.name << " k=" << k;
      EXPECT_LT(trusted(restrict_to_surface(cd, a[k] - b[k])), 1e-9 * scale) << s.name << " k=" << k;
    }
  }
}

TEST(PhiMatrix, OneDimensionalCaseMatchesPhi) {
  const auto patch = patch_of("Im(w) - abs2(z) - 0.3*Re(z^3*zbar^2) + Re(z*w*wbar)/7", {0.0, 0.0});
  for (auto rep : {PhiRepresentative::bordered, PhiRepresentative::corner_zero}) {
    const auto m = phi_matrix(patch.rho, 1, rep);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_LT(max_abs(m[0][0] - phi(patch, rep)), 1e-13);
  }
}

TEST(PhiMatrix, Symmetric) {
  // Im w - |z1|^2 - |z2|^2 + cross terms, in (z1, z1bar, z2, z2bar, w, wbar).
  const JetContext ctx{6, 6};
  auto v = [&](int i) { return Jet::variable(ctx, i); };
  const Complex half_i(0.0, 0.5);
  const Jet rho = (v(5) - v(4)) * half_i - v(0) * v(1) - v(2) * v(3) +
                  Complex(0.2) * (v(0) * v(0) * v(3) + v(1) * v(1) * v(2)) +
                  Complex(0.1) * (v(0) * v(3) * v(4) + v(1) * v(2) * v(5));
  const auto m = phi_matrix(rho, 2);
  EXPECT_LT(max_abs(m[0][1] - m[1][0]), 1e-14);
  EXPECT_GT(max_abs(m[0][1]), 1e-3);
  EXPECT_THROW((void)phi_matrix(rho, 1), Error);
}

TEST(TangentField, Heisenberg) {
  const auto patch = patch_of(corpus::kHeisenberg, {0.0, 0.0});
  const auto f = tangent_01_field(patch);
  EXPECT_LT(max_abs(f.a - Jet::constant(patch.rho.context(), Complex(0.0, 0.5))), 1e-15);
  EXPECT_LT(max_abs(f.b - Jet::variable(patch.rho.context(), kZ)), 1e-15);
  const Jet l0t = apply_field(f, theta(patch));
  EXPECT_LT(std::abs(l0t.constant_term() + 1.0), 1e-15);
}

TEST(TangentField, Sphere) {
  const auto patch = patch_of(corpus::kSphere, {0.0, 1.0});
  const auto f = tangent_01_field(patch);
  const JetContext ctx = patch.rho.context();
  EXPECT_LT(max_abs(f.a - (Jet::constant(ctx, 1.0) + Jet::variable(ctx, kW))), 1e-15);
  EXPECT_LT(max_abs(f.b + Jet::variable(ctx, kZ)), 1e-15);
}

TEST(TangentField, AnnihilatesRho) {
  for (const auto& s : corpus::all()) {
    const auto patch = patch_of(s.rho, s.point);
    EXPECT_LT(trusted(apply_field(tangent_01_field(patch), patch.rho)), 1e-13) << s.name;
    const Jet c = Jet::constant(patch.rho.context(), 3.0);
    EXPECT_EQ(max_abs(apply_field(regularizing_field(patch), c)), 0.0);
  }
}

TEST(RegularizingField, NormalizesTheta) {
  for (const auto& s : corpus::all()) {
    const auto patch = patch_of(s.rho, s.point);
    const Jet one = Jet::constant(patch.rho.context(), 1.0);
    const Jet lt = apply_field(regularizing_field(patch), theta(patch));
    EXPECT_LT(trusted(lt - one), 1e-10) << s.name;
  }
}

TEST(RegularizingField, HeisenbergIsMinusL0) {
  const auto patch = patch_of(corpus::kHeisenberg, {0.0, 0.0});
  const auto l = regularizing_field(patch);
  const auto l0 = tangent_01_field(patch);
  EXPECT_LT(max_abs(l.a + l0.a), 1e-15);
  EXPECT_LT(max_abs(l.b + l0.b), 1e-15);
}

TEST(RegularizingField, DegenerateThrows) {
  const auto patch = patch_of("Im(w) - abs2(z)^2", {0.0, 0.0});
  EXPECT_EQ(levi_form(patch), 0.0);
  for (int attempt = 0; attempt < 3; ++attempt) {
    try {
      (void)regularizing_field(patch);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::levi_degenerate);
    }
  }
}

TEST(RegularizingField, IndependentOfFieldChoice) {
  for (const auto& s : corpus::all()) {
    const auto patch = patch_of(s.rho, s.point);
    const auto l0 = tangent_01_field(patch);
    const JetContext ctx = patch.rho.context();
    const Jet g = Jet::constant(ctx, Complex(2.0, -1.0)) + Jet::variable(ctx, kZ) - Complex(0.5) * Jet::variable(ctx, kWbar);
    const auto a = regularize(patch, l0);
    const auto b = regularize(patch, {g * l0.a, g * l0.b});
    const Jet ph = phi(patch);
    EXPECT_LT(trusted(apply_field(a, ph) - apply_field(b, ph)), 1e-10 * (1.0 + trusted(apply_field(a, ph))))
        << s.name;
  }
}

TEST(IterateLPhi, VanishOnModels) {
  for (const auto& p : {patch_of(corpus::kHeisenberg, {0.0, 0.0}), patch_of(corpus::kSphere, {0.0, 1.0})}) {
    const auto l = iterate_L_phi(p);
    ASSERT_EQ(l.size(), 5u);
    for (const auto& j : l) EXPECT_EQ(trusted(j), 0.0);
  }
}

TEST(IterateLPhi, TrustAccounting) {
  const auto patch = patch_of(corpus::kOrd6, {0.0, 0.0});
  const auto l = iterate_L_phi(patch);
  for (std::size_t k = 0; k < l.size(); ++k) EXPECT_EQ(l[k].trust(), 10 - static_cast<int>(k));
  const Jet low = expr::expand_at(expr::parse(corpus::kOrd6), {0.0, 0.0}, JetContext{4, 12}).with_trust(5);
  try {
    (void)iterate_L_phi(build_patch(low, {0.0, 0.0}), 4);
    FAIL();
  } catch (const TrustError& e) {
    EXPECT_EQ(e.max_achievable(), 3);
  }
}

TEST(IterateLPhi, Ord6NonzeroAtOrigin) {
  const auto l = iterate_L_phi(patch_of("Im(w) - abs2(z) - (z^4*zbar^2 + z^2*zbar^4)", {0.0, 0.0}));
  EXPECT_GT(std::abs(l[4].constant_term()), 1e-3);
}

TEST(IterateLPhi, ScalingInvariance) {
  for (const auto& s : corpus::all()) {
    const auto a = patch_of(s.rho, s.point);
    const std::string scaled = "-2.5*(" + s.rho + ")";
    const auto b = patch_of(scaled, s.point);
    const auto la = iterate_L_phi(a), lb = iterate_L_phi(b);
    for (std::size_t k = 0; k < la.size(); ++k) {
      EXPECT_LT(trusted(la[k] - lb[k]), 1e-12 * chain_scale(la)) << s.name << " k=" << k;
    }
    EXPECT_NEAR(2.5 * a.levi, b.levi, 1e-12 * b.levi) << s.name;
  }
}

TEST(IterateLPhi, MultiplierInvarianceOnSurface) {
  for (const auto& s : corpus::all()) {
    const auto a = patch_of(s.rho, s.point);
    const auto b = patch_of("(" + s.rho + ")*(3 + Re(z) + abs2(w - z))", s.point);
    const auto cda = complex_defining(a), cdb = complex_defining(b);
    EXPECT_LT(trusted(truncated(cda.rho_c, 10) - truncated(cdb.rho_c, 10)), 1e-12 * (1.0 + trusted(cda.rho_c)))
        << s.name;
    const auto la = iterate_L_phi(a), lb = iterate_L_phi(b);
    for (std::size_t k = 0; k < la.size(); ++k) {
      const Jet ra = restrict_to_surface(cda, la[k]), rb = restrict_to_surface(cda, lb[k]);
      EXPECT_LT(trusted(ra - rb), 1e-11 * std::max(chain_scale(la), chain_scale(lb))) << s.name << " k=" << k;
    }
  }
}

TEST(Levi, Values) {
  EXPECT_NEAR(levi_form(patch_of(corpus::kHeisenberg, {0.0, 0.0})), 1.0, 1e-15);
  EXPECT_EQ(levi_form(patch_of("Im(w) - abs2(z)^2", {0.0, 0.0})), 0.0);
  EXPECT_GT(levi_form(patch_of(corpus::kSphere, {0.0, 1.0})), 0.5);
  EXPECT_GT(levi_form(patch_of(corpus::kSphere, {1.0, 0.0})), 0.5);
  for (const auto& s : corpus::all()) EXPECT_GT(levi_form(patch_of(s.rho, s.point)), 0.1) << s.name;
}

TEST(Sampling, HeisenbergGraph) {
  const auto ast = expr::parse(corpus::kHeisenberg);
  const auto pts = sample_points(ast, {0.0, 0.0}, 3, 0.1);
  ASSERT_EQ(pts.size(), 3u);
  for (const auto& q : pts) {
    EXPECT_NEAR(q[1].imag(), std::norm(q[0]), 1e-12);
    EXPECT_LE(std::abs(q[0]), 0.1 + 1e-12);
  }
  EXPECT_EQ(sample_points(ast, {0.0, 0.0}, 3, 0.1), pts);
  EXPECT_NE(sample_points(ast, {0.0, 0.0}, 3, 0.1, 1), pts);
}

TEST(Sampling, SphereConstraint) {
  const auto pts = sample_points(expr::parse(corpus::kSphere), {0.0, 1.0}, 8, 0.05);
  for (const auto& q : pts) EXPECT_NEAR(std::norm(q[0]) + std::norm(q[1]), 1.0, 1e-12);
}

TEST(Sampling, FiniteJetUnavailable) {
  const Jet rho = expr::expand_at(expr::parse(corpus::kHeisenberg), {0.0, 0.0}, JetContext{4, 8});
  try {
    (void)sample_points(build_patch(rho, {0.0, 0.0}), 3, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::sampling_unavailable);
  }
}
