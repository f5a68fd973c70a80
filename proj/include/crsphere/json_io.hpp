#pragma once

// JSON encodings: finite-jet input rows, coefficient rows, and reports.
// Complex numbers are [re, im] arrays.

#include "json.hpp"

#include <array>
#include <string>

#include "crsphere/error.hpp"
#include "crsphere/jet.hpp"
#include "crsphere/ode.hpp"
#include "crsphere/patch.hpp"
#include "crsphere/sphericity.hpp"

namespace crsphere::json_io {

using nlohmann::json;

inline json complex_json(Complex c) { return json::array({c.real(), c.imag()}); }

inline json point_json(const Point& p) { return json::array({complex_json(p[0]), complex_json(p[1])}); }

/// Reads finite-jet rows [a, b, c, d, re, im]: the coefficient of
/// z^a zbar^b w^c wbar^d at the base point. Either a bare array of rows
/// (trust = degree) or {"trust": k, "rows": [...]}. Repeated monomials add up.
inline Jet jet_from_json(const json& doc, int degree) {
  const json* rows = &doc;
  int trust = degree;
  if (doc.is_object()) {
    if (!doc.contains("rows")) throw Error(ErrorKind::invalid_input, "jet file object needs a \"rows\" array");
    rows = &doc.at("rows");
    if (doc.contains("trust")) trust = doc.at("trust").get<int>();
  }
  if (!rows->is_array()) throw Error(ErrorKind::invalid_input, "jet rows must be a JSON array");
  if (trust < 0) throw Error(ErrorKind::invalid_input, "jet trust must be nonnegative");
  Jet j(JetContext{4, degree});
  std::size_t n = 0;
  for (const auto& row : *rows) {
    if (!row.is_array() || row.size() != 6) {
      throw Error(ErrorKind::invalid_input, "jet row " + std::to_string(n) + " must have 6 entries [a,b,c,d,re,im]");
    }
    std::vector<int> e(4);
    for (std::size_t k = 0; k < 4; ++k) {
      if (!row[k].is_number_integer() || row[k].get<int>() < 0) {
        throw Error(ErrorKind::invalid_input, "jet row " + std::to_string(n) + ": exponents must be nonnegative integers");
      }
      e[k] = row[k].get<int>();
    }
    if (!row[4].is_number() || !row[5].is_number()) {
      throw Error(ErrorKind::invalid_input, "jet row " + std::to_string(n) + ": coefficient must be numeric");
    }
    const MultiIndex idx(e);
    if (idx.total() > degree) {
      throw Error(ErrorKind::degree_overflow, "jet row " + std::to_string(n) + " has degree " +
                                                  std::to_string(idx.total()) + " above " + std::to_string(degree));
    }
    j.set_coeff(idx, j.coeff(idx) + Complex(row[4].get<double>(), row[5].get<double>()));
    ++n;
  }
  j.set_trust(trust);
  return j;
}

/// Nonzero coefficients of degree <= trust as rows [e_0, ..., e_{n-1}, re, im].
inline json coefficient_rows(const Jet& j) {
  json rows = json::array();
  const int end = j.layout().count_up_to(j.trust());
  for (int i = 0; i < end; ++i) {
    if (j[i] == Complex{}) continue;
    json row = json::array();
    const auto* e = j.layout().exponents(i);
    for (int v = 0; v < j.nvars(); ++v) row.push_back(static_cast<int>(e[v]));
    row.push_back(j[i].real());
    row.push_back(j[i].imag());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json ode_json(const AssociatedOde& ode) {
  return {{"base", {{"z", complex_json(ode.base_z)}, {"w", complex_json(ode.base_w)}, {"xi", complex_json(ode.base_xi)}}},
          {"trust", ode.phi3.trust()},
          {"coefficients", coefficient_rows(ode.phi3)}};
}

inline json quantity_json(const std::optional<QuantityReport>& q) {
  if (!q) return nullptr;
  return {{"value", complex_json(q->value)},
          {"max_abs", q->max_abs},
          {"max_abs_on_surface", q->max_abs_on_surface},
          {"trust", q->trust}};
}

inline const char* to_string(PhiRepresentative r) {
  return r == PhiRepresentative::bordered ? "bordered" : "corner_zero";
}

inline json report_json(const SphericityReport& rep) {
  json points = json::array();
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const auto& pt = rep.points[i];
    json o{{"index", i}, {"base", pt.is_base}, {"point", point_json(pt.point)}};
    if (pt.report) {
      const auto& r = *pt.report;
      o["status"] = "ok";
      o["levi"] = r.levi;
      o["swapped"] = r.swapped;
      o["rho_scale"] = r.rho_scale;
      o["threshold"] = r.threshold;
      json q = json::object();
      for (std::size_t k = 0; k < kQuantityNames.size(); ++k) q[kQuantityNames[k]] = quantity_json(r.quantities[k]);
      o["quantities"] = std::move(q);
      o["l4_vanishes"] = !pt.witnesses_nonzero();
    } else {
      o["status"] = "error";
      o["error"] = {{"kind", std::string(crsphere::to_string(pt.error.value_or(ErrorKind::invalid_input)))},
                    {"message", pt.message}};
    }
    points.push_back(std::move(o));
  }
  return {{"command", "check"},
          {"verdict", crsphere::to_string(rep.verdict)},
          {"reason", rep.reason},
          {"degree", rep.degree},
          {"finite_jet", rep.finite_jet},
          {"config",
           {{"tol_abs", rep.config.tolerances.abs},
            {"tol_rel", rep.config.tolerances.rel},
            {"samples", rep.finite_jet ? 0 : rep.config.samples},
            {"radius", rep.config.radius},
            {"seed", rep.config.seed},
            {"representative", to_string(rep.config.representative)}}},
          {"witness", rep.witness ? json(*rep.witness) : json(nullptr)},
          {"points", std::move(points)}};
}

}  // namespace crsphere::json_io
