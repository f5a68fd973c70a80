#pragma once

// Command-line front end. `run` is the whole program minus process exit, so
// tests can drive it with string streams.
//
// Exit codes: check returns 0 spherical, 1 not_spherical, 2 inconclusive;
// other subcommands return 0 on success. Errors: 3 usage or input,
// 4 expression parse, 5 geometric or numerical failure.

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crsphere/error.hpp"
#include "crsphere/expr.hpp"
#include "crsphere/json_io.hpp"
#include "crsphere/ode.hpp"
#include "crsphere/patch.hpp"
#include "crsphere/sphericity.hpp"

namespace crsphere::cli {

inline constexpr int kExitUsage = 3;
inline constexpr int kExitParse = 4;
inline constexpr int kExitGeometry = 5;

enum class Output { text, json };

struct RunConfig {
  std::string command;
  std::string rho;
  std::string jet_file;
  Point point{};
  int degree = 12;
  double tol_abs = 1e-9;
  double tol_rel = 1e-9;
  int samples = 5;
  double radius = 0.05;
  std::uint64_t seed = 0x5EED;
  Output output = Output::text;

  bool finite_jet() const { return !jet_file.empty(); }
  Tolerances tolerances() const { return {tol_abs, tol_rel}; }
};

namespace detail {

inline double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw Error(ErrorKind::invalid_input, "bad number '" + std::string(s) + "' in " + what);
  }
  return v;
}

/// "re,im" or a bare real.
inline Complex parse_complex(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) return {parse_double(s, "--point"), 0.0};
  const std::string_view sv(s);
  return {parse_double(sv.substr(0, comma), "--point"), parse_double(sv.substr(comma + 1), "--point")};
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << (x == 0.0 ? 0.0 : x);
  return os.str();
}

inline std::string fmt(Complex c) { return "[" + fmt(c.real()) + ", " + fmt(c.imag()) + "]"; }

inline std::string fmt(const Point& p) { return "z=" + fmt(p[0]) + " w=" + fmt(p[1]); }

inline void dump(std::ostream& out, const json_io::json& j) { out << j.dump(2) << '\n'; }

inline HypersurfacePatch load_patch(const RunConfig& cfg) {
  if (cfg.finite_jet()) {
    std::ifstream in(cfg.jet_file);
    if (!in) throw Error(ErrorKind::invalid_input, "cannot open jet file '" + cfg.jet_file + "'");
    json_io::json doc;
    try {
      doc = json_io::json::parse(in);
    } catch (const json_io::json::exception& e) {
      throw Error(ErrorKind::invalid_input, std::string("jet file is not valid JSON: ") + e.what());
    }
    return build_patch(json_io::jet_from_json(doc, cfg.degree), cfg.point);
  }
  return build_patch(expr::parse(cfg.rho), cfg.point, cfg.degree);
}

inline void require_expression(const RunConfig& cfg) {
  if (cfg.finite_jet()) {
    throw Error(ErrorKind::invalid_input, "'" + cfg.command + "' needs --rho; finite jets carry no Segre family");
  }
}

inline int cmd_check(const RunConfig& cfg, std::ostream& out) {
  SphericityConfig sc;
  sc.degree = cfg.degree;
  sc.tolerances = cfg.tolerances();
  sc.samples = cfg.samples;
  sc.radius = cfg.radius;
  sc.seed = cfg.seed;
  SphericityReport rep;
  if (cfg.finite_jet()) {
    const HypersurfacePatch patch = load_patch(cfg);
    rep = sphericity_verdict(patch.rho, cfg.point, sc);
  } else {
    rep = sphericity_verdict(expr::parse(cfg.rho), cfg.point, sc);
  }
  if (cfg.output == Output::json) {
    dump(out, json_io::report_json(rep));
  } else {
    out << "verdict: " << to_string(rep.verdict) << '\n';
    out << "reason: " << rep.reason << '\n';
    out << "degree: " << rep.degree << "  tol_abs: " << fmt(sc.tolerances.abs)
        << "  tol_rel: " << fmt(sc.tolerances.rel);
    if (!rep.finite_jet) out << "  samples: " << sc.samples << "  radius: " << fmt(sc.radius) << "  seed: " << sc.seed;
    out << '\n';
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
      const auto& pt = rep.points[i];
      out << "point " << i << (pt.is_base ? " (base)" : "") << ' ' << fmt(pt.point);
      if (!pt.report) {
        out << "  error[" << to_string(pt.error.value_or(ErrorKind::invalid_input)) << "]: " << pt.message << '\n';
        continue;
      }
      const auto& r = *pt.report;
      out << "  levi=" << fmt(r.levi) << "  threshold=" << fmt(r.threshold) << (r.swapped ? "  swapped" : "") << '\n';
      for (std::size_t k = 0; k < kQuantityNames.size(); ++k) {
        const auto& q = r.quantities[k];
        out << "  " << std::left << std::setw(6) << kQuantityNames[k];
        if (!q) {
          out << " unavailable\n";
          continue;
        }
        out << " value=" << fmt(q->value) << "  max=" << fmt(q->max_abs) << "  on_M=" << fmt(q->max_abs_on_surface)
            << "  trust=" << q->trust << '\n';
      }
    }
  }
  switch (rep.verdict) {
    case Verdict::spherical: return 0;
    case Verdict::not_spherical: return 1;
    case Verdict::inconclusive: return 2;
  }
  return 2;
}

inline int cmd_ode(const RunConfig& cfg, std::ostream& out) {
  require_expression(cfg);
  const HypersurfacePatch patch = load_patch(cfg);
  const AssociatedOde ode = associated_ode(patch);
  const Jet t = tresse_invariant(ode);
  const double threshold = cfg.tolerances().threshold(patch.rho_scale);
  const bool cubic = cubic_check(ode, threshold);
  const double tnorm = max_trusted_abs(t);
  const double noncubic = non_cubic_magnitude(ode);
  if (cfg.output == Output::json) {
    auto j = json_io::ode_json(ode);
    j["command"] = "ode";
    j["point"] = json_io::point_json(cfg.point);
    j["degree"] = cfg.degree;
    j["tresse"] = {{"value", json_io::complex_json(t.constant_term())}, {"max_abs", tnorm}, {"trust", t.trust()}};
    j["non_cubic_max"] = noncubic;
    j["threshold"] = threshold;
    j["cubic"] = cubic;
    dump(out, j);
    return 0;
  }
  out << "ode w'' = phi3(z, w, xi) at z=" << fmt(ode.base_z) << " w=" << fmt(ode.base_w)
      << " xi=" << fmt(ode.base_xi) << '\n';
  out << "phi3 trust: " << ode.phi3.trust() << '\n';
  out << "phi3 coefficients [i j k] of (z-z0)^i (w-w0)^j (xi-xi0)^k:\n";
  const auto rows = json_io::coefficient_rows(ode.phi3);
  if (rows.empty()) out << "  all zero\n";
  for (const auto& r : rows) {
    out << "  " << r[0].get<int>() << ' ' << r[1].get<int>() << ' ' << r[2].get<int>() << "  "
        << fmt(Complex(r[3].get<double>(), r[4].get<double>())) << '\n';
  }
  out << "tresse: value=" << fmt(t.constant_term()) << "  norm=" << fmt(tnorm) << "  trust=" << t.trust() << '\n';
  out << "non_cubic_max: " << fmt(noncubic) << "  threshold: " << fmt(threshold) << '\n';
  out << "cubic: " << (cubic ? "true" : "false") << '\n';
  return 0;
}

inline int cmd_decompose(const RunConfig& cfg, std::ostream& out) {
  const HypersurfacePatch patch = load_patch(cfg);
  const CubicCoefficients c = cubic_decompose(patch);
  const auto defects = cr_defect(patch, c);
  const double threshold = cfg.tolerances().threshold(patch.rho_scale);
  bool cr = true;
  for (double d : defects) cr = cr && d <= threshold;
  const std::array<const Jet*, 4> a{&c.a0, &c.a1, &c.a2, &c.a3};
  if (cfg.output == Output::json) {
    json_io::json coeffs = json_io::json::object();
    json_io::json defs = json_io::json::object();
    for (std::size_t j = 0; j < 4; ++j) {
      const std::string name = "a" + std::to_string(j);
      coeffs[name] = json_io::complex_json(a[j]->constant_term());
      defs[name] = defects[j];
    }
    dump(out, {{"command", "decompose"},
               {"point", json_io::point_json(cfg.point)},
               {"degree", cfg.degree},
               {"coefficients", coeffs},
               {"defects", defs},
               {"threshold", threshold},
               {"cr", cr}});
    return 0;
  }
  out << "decomposition Phi = a0 + a1 theta + a2 theta^2 + a3 theta^3 at " << fmt(cfg.point) << '\n';
  for (std::size_t j = 0; j < 4; ++j) {
    out << "a" << j << ": " << fmt(a[j]->constant_term()) << "  cr_defect=" << fmt(defects[j]) << '\n';
  }
  out << "threshold: " << fmt(threshold) << '\n';
  out << "cr: " << (cr ? "true" : "false") << '\n';
  return 0;
}

inline int cmd_crosscheck(const RunConfig& cfg, std::ostream& out) {
  require_expression(cfg);
  const HypersurfacePatch patch = load_patch(cfg);
  const CrossCheck cc = cross_check(patch);
  if (cfg.output == Output::json) {
    dump(out, {{"command", "crosscheck"},
               {"point", json_io::point_json(cfg.point)},
               {"degree", cfg.degree},
               {"hypersurface_value", json_io::complex_json(cc.hypersurface_value)},
               {"ode_value", json_io::complex_json(cc.ode_value)},
               {"residual", cc.residual}});
    return 0;
  }
  out << "L^4 Phi(p):           " << fmt(cc.hypersurface_value) << '\n';
  out << "d^4 phi3/dxi^4 (lift): " << fmt(cc.ode_value) << '\n';
  out << "residual: " << fmt(cc.residual) << '\n';
  return 0;
}

inline int cmd_levi(const RunConfig& cfg, std::ostream& out) {
  const HypersurfacePatch patch = load_patch(cfg);
  const double grad = std::sqrt(crsphere::detail::gradient_norm2(patch.rho));
  const bool strict = patch.levi > 1e-10 * grad;
  if (cfg.output == Output::json) {
    dump(out, {{"command", "levi"},
               {"point", json_io::point_json(cfg.point)},
               {"degree", cfg.degree},
               {"levi", patch.levi},
               {"orientation", patch.orientation},
               {"swapped", patch.swapped},
               {"strictly_pseudoconvex", strict}});
    return 0;
  }
  out << "levi: " << fmt(patch.levi) << '\n';
  out << "orientation: " << (patch.orientation > 0 ? "+1" : "-1") << '\n';
  out << "strictly_pseudoconvex: " << (strict ? "true" : "false") << '\n';
  return 0;
}

inline int dispatch(const RunConfig& cfg, std::ostream& out) {
  if (cfg.command == "check") return cmd_check(cfg, out);
  if (cfg.command == "ode") return cmd_ode(cfg, out);
  if (cfg.command == "decompose") return cmd_decompose(cfg, out);
  if (cfg.command == "crosscheck") return cmd_crosscheck(cfg, out);
  return cmd_levi(cfg, out);
}

}  // namespace detail

/// Parses arguments (without the program name) and runs one subcommand.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sphericity of real hypersurfaces in C^2 from a defining function", "crsphere"};
  app.require_subcommand(1, 1);
  RunConfig cfg;
  std::vector<std::string> point;
  std::string seed;
  bool json = false;
  for (const char* name : {"check", "ode", "decompose", "crosscheck", "levi"}) {
    static const std::map<std::string, std::string> help{
        {"check", "decide sphericity near the point"},
        {"ode", "associated second-order ODE and its Tresse invariant"},
        {"decompose", "cubic decomposition of Phi in theta and CR defects"},
        {"crosscheck", "compare the hypersurface and ODE pipelines at the point"},
        {"levi", "Levi form at the point"}};
    auto* sub = app.add_subcommand(name, help.at(name));
    auto* rho = sub->add_option("--rho", cfg.rho, "defining function in the expression grammar");
    auto* file = sub->add_option("--jet-file", cfg.jet_file, "finite jet as JSON rows [a,b,c,d,re,im]");
    rho->excludes(file);
    sub->add_option("--point", point, "base point as 're,im re,im'")->expected(2);
    sub->add_option("--degree", cfg.degree, "truncation degree D")->capture_default_str();
    sub->add_option("--tol-abs", cfg.tol_abs, "absolute tolerance")->capture_default_str();
    sub->add_option("--tol-rel", cfg.tol_rel, "relative tolerance")->capture_default_str();
    sub->add_option("--samples", cfg.samples, "sample points on M besides p")->capture_default_str();
    sub->add_option("--radius", cfg.radius, "sampling radius")->capture_default_str();
    sub->add_option("--seed", seed, "sampling seed (decimal or 0x hex)");
    sub->add_flag("--json", json, "machine-readable output");
    sub->callback([&cfg, sub] { cfg.command = sub->get_name(); });
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error[usage]: " << e.what() << '\n';
    return kExitUsage;
  }
  cfg.output = json ? Output::json : Output::text;
  try {
    if (cfg.rho.empty() && cfg.jet_file.empty()) {
      throw Error(ErrorKind::invalid_input, "one of --rho or --jet-file is required");
    }
    if (!point.empty()) cfg.point = {detail::parse_complex(point[0]), detail::parse_complex(point[1])};
    if (!seed.empty()) {
      std::size_t used = 0;
      try {
        cfg.seed = std::stoull(seed, &used, 0);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != seed.size()) throw Error(ErrorKind::invalid_input, "bad --seed '" + seed + "'");
    }
    if (cfg.degree < 6) throw Error(ErrorKind::invalid_input, "--degree must be at least 6");
    if (cfg.degree > kMaxJetDegree) {
      throw Error(ErrorKind::degree_overflow, "--degree must be at most " + std::to_string(kMaxJetDegree));
    }
    if (cfg.samples < 0) throw Error(ErrorKind::invalid_input, "--samples must be nonnegative");
    if (!(cfg.radius > 0.0)) throw Error(ErrorKind::invalid_input, "--radius must be positive");
    if (!(cfg.tol_abs >= 0.0) || !(cfg.tol_rel >= 0.0)) {
      throw Error(ErrorKind::invalid_input, "tolerances must be nonnegative");
    }
    return detail::dispatch(cfg, out);
  } catch (const ParseError& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return kExitParse;
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return e.kind() == ErrorKind::invalid_input || e.kind() == ErrorKind::degree_overflow ? kExitUsage
                                                                                          : kExitGeometry;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args), out, err);
}

}  // namespace crsphere::cli
