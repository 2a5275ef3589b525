#pragma once

// JSON views of solver and diagnostic results. NaN and infinities serialize as null.

#include <json.hpp>

#include "mfe/continuation.hpp"
#include "mfe/diagnostics.hpp"
#include "mfe/variational.hpp"

namespace mfe {

using Json = nlohmann::ordered_json;

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(Point p) { return Json::array({num(p.x), num(p.y)}); }

inline Json to_json(const Params& p) { return {{"lambda", num(p.lambda)}, {"sigma", num(p.sigma)}, {"gamma", num(p.gamma)}}; }

inline Json to_json(const Thresholds& t) {
  Json c = Json::array();
  for (double v : t.candidates) c.push_back(num(v));
  return {{"gamma", num(t.gamma)},
          {"sigma", num(t.sigma)},
          {"sigma_gamma", num(t.sigma_gamma)},
          {"lambda_bar", num(t.lambda_bar)},
          {"lambda_bar_P_scaled", num(t.lambda_bar_P_scaled)},
          {"lambda_bar_P_candidates", c},
          {"admissible", t.admissible},
          {"window", Json::array({num(t.window[0]), num(t.window[1])})}};
}

inline Json to_json(const Peak& p) {
  return {{"location", to_json(p.location)}, {"height", num(p.height)},
          {"negative", p.negative},          {"radius_used", num(p.radius)},
          {"local_mass_1", num(p.mass_1)},   {"local_mass_gamma", num(p.mass_gamma)},
          {"plateau_variation", num(p.plateau_variation)}, {"plateau_ok", p.plateau_ok}};
}

inline Json to_json(const PeakSet& s) {
  Json a = Json::array();
  for (const auto& p : s) a.push_back(to_json(p));
  return a;
}

inline Json to_json(const QuantizationReport& q) {
  Json peaks = Json::array();
  for (const auto& p : q.peaks)
    peaks.push_back({{"location", to_json(p.location)},
                     {"mass_1", num(p.mass_1)},
                     {"mass_gamma", num(p.mass_gamma)},
                     {"mass_1_deviation", num(p.mass_1_deviation)},
                     {"gamma_share", num(p.gamma_share)},
                     {"identity_residual", num(p.identity_residual)},
                     {"identity_relative", num(p.identity_relative)}});
  return {{"verdict", to_string(q.verdict)},
          {"lambda", num(q.lambda)},
          {"u_max", num(q.u_max)},
          {"nearest_k", q.nearest_k},
          {"lambda_distance", num(q.lambda_distance)},
          {"total_local_mass_1", num(q.total_local_mass_1)},
          {"tolerance", num(q.tolerance)},
          {"peaks", peaks},
          {"message", q.message}};
}

inline Json to_json(const NewtonReport& r) {
  return {{"converged", r.converged},
          {"iterations", r.iterations},
          {"final_residual_norm", num(r.final_residual_norm)},
          {"residual_scale", num(r.residual_scale)},
          {"tolerance", num(r.tolerance)},
          {"damping_history", r.damping_history},
          {"message", r.message}};
}

inline Json to_json(const BranchMonitor& m) {
  return {{"min_peak_boundary_distance", num(m.min_boundary_distance)},
          {"u_minus_first", num(m.u_minus_first)},
          {"u_minus_max", num(m.u_minus_max)},
          {"u_minus_growth", num(m.u_minus_growth)},
          {"u_minus_bounded", m.u_minus_bounded},
          {"u_max_final", num(m.u_max_final)},
          {"lambda_max", num(m.lambda_max)},
          {"assumption_bound", num(m.assumption_bound)},
          {"assumption_holds", m.assumption_holds},
          {"all_points_verified", m.all_verified},
          {"u_max_monotone", m.u_max_monotone},
          {"max_mass_total_error", num(m.max_mass_total_error)},
          {"findings", m.findings}};
}

inline Json to_json(const Membership& m) {
  auto rect = [](const Rect& r) { return Json::array({num(r.x0), num(r.y0), num(r.x1), num(r.y1)}); };
  Json j = {{"member", m.member}, {"note", m.note}};
  if (m.member) {
    j["first"] = rect(m.first);
    j["second"] = rect(m.second);
    j["mass_first"] = num(m.mass_first);
    j["mass_second"] = num(m.mass_second);
    j["gap"] = num(m.gap);
  }
  return j;
}

}  // namespace mfe
