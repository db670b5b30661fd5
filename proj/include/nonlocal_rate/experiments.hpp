#pragma once

// Batch experiments behind the command-line runner. Each experiment produces
// a table (report.csv), a JSON document (report.json) and a plot (plot.svg).

#include <fftw3.h>

#include <boost/version.hpp>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nonlocal_rate/config.hpp"
#include "nonlocal_rate/convergence.hpp"
#include "nonlocal_rate/energy1d.hpp"
#include "nonlocal_rate/energynd.hpp"
#include "nonlocal_rate/fields.hpp"
#include "nonlocal_rate/integrands.hpp"
#include "nonlocal_rate/kernels.hpp"
#include "nonlocal_rate/oracles.hpp"
#include "nonlocal_rate/report.hpp"

namespace nonlocal_rate {

inline constexpr const char* library_version = "1.0.0";

/// Exit statuses of the runner.
enum ExitStatus : int { exit_ok = 0, exit_audit_failure = 1, exit_invalid = 2, exit_numerical_failure = 3 };

/// One audited inequality lhs <= rhs (+ tolerance).
struct AuditItem {
  std::string check;
  double h = NAN;     ///< NaN for h-independent checks
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;

  double margin() const { return rhs - lhs; }
  bool pass() const { return lhs <= rhs + tolerance; }
};

struct RateRow {
  double h;
  double value_h;
  double value_0;
  double abs_error;
  double fitted_order;  ///< over the last four rows up to this one
};

/// Rows sorted by descending h, plus a metadata document.
struct RateStudyReport {
  std::vector<RateRow> rows;
  nlohmann::json metadata = nlohmann::json::object();
};

struct RunResult {
  std::string experiment;
  Table table;
  nlohmann::json document = nlohmann::json::object();
  std::vector<AuditItem> audit;
  std::optional<RateStudyReport> rate_study;
  Plot plot;
  int exit_code = exit_ok;
  std::string message;  ///< first failed check, when any
};

namespace detail {

template <int D>
Vec<D> field_center(const FieldSpec& f) {
  Vec<D> c;
  for (int i = 0; i < D; ++i) c[i] = f.center.empty() ? 0.5 : f.center[i];
  return c;
}

template <int D>
ScalarField<D> make_field(const FieldSpec& f) {
  const Vec<D> c = field_center<D>(f);
  if (!(f.radius > 0.0)) throw ConfigError("field.radius must be positive");
  if (f.name == "smooth_bump") return fields::smooth_bump<D>(c, f.radius, f.amplitude);
  if (f.name == "poly_bump") {
    if (f.power < 1) throw ConfigError("field.power must be at least 1");
    return fields::poly_bump<D>(c, f.radius, f.amplitude, f.power);
  }
  if (f.name == "hat") return fields::hat<D>(c, f.radius, f.amplitude);
  if (f.name == "zero") return fields::zero<D>(fields::cube<D>(c, f.radius));
  if (f.name == "random_bumps") {
    if (!(f.domain_hi > f.domain_lo)) throw ConfigError("field.domain_hi must exceed field.domain_lo");
    Box<D> dom;
    for (int i = 0; i < D; ++i) dom.lo[i] = f.domain_lo, dom.hi[i] = f.domain_hi;
    return fields::random_bumps<D>(f.seed, dom);
  }
  if (f.name == "sin_bump") {
    if constexpr (D == 1) {
      return fields::sin_bump(c[0] - f.radius, c[0] + f.radius, f.amplitude);
    } else {
      throw ConfigError("sin_bump is one-dimensional");
    }
  }
  if (f.name == "csv") {
    try {
      return load_grid_csv<D>(f.path, f.derivative_order);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("unknown field '" + f.name +
                    "' (expected smooth_bump, poly_bump, sin_bump, hat, random_bumps, zero or csv)");
}

template <int D>
Kernel<D> make_kernel(const KernelSpec& k, int grid) {
  Kernel<D> K = [&] {
    try {
      return builtin_kernel<D>(k.name, k.param);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();
  if (k.odd_perturbation != 0.0) K = odd_perturbation<D>(K, k.odd_perturbation);
  const KernelValidation v = validate_kernel<D>(K, grid);
  if (!v.ok()) throw ConfigError("kernel validation failed: " + v.failures.front());
  return K;
}

inline ConvexIntegrand make_integrand(const std::string& name) {
  try {
    return builtin_integrand(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline nlohmann::json echo_config(const ExperimentConfig& c) {
  const auto& q = c.quadrature;
  nlohmann::json j;
  j["experiment"] = c.experiment;
  j["field"] = {{"name", c.field.name},         {"dim", c.field.dim},       {"center", c.field.center},
                {"radius", c.field.radius},     {"amplitude", c.field.amplitude}, {"power", c.field.power},
                {"seed", c.field.seed},         {"domain_lo", c.field.domain_lo}, {"domain_hi", c.field.domain_hi},
                {"path", c.field.path},         {"derivative_order", c.field.derivative_order}};
  j["integrand"] = c.integrand;
  j["kernel"] = {{"name", c.kernel.name}, {"param", c.kernel.param}, {"odd_perturbation", c.kernel.odd_perturbation}};
  j["h"] = c.h_list;
  j["method"] = c.method;
  j["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
  j["quadrature"] = {{"gauss_order", q.gauss_order},
                     {"inner_order", q.inner_order},
                     {"theta_order", q.theta_order},
                     {"tol", q.tol},
                     {"max_refinements", q.max_refinements},
                     {"nd_x_panels", q.nd_x_panels},
                     {"nd_x_order", q.nd_x_order},
                     {"nd_max_refinements", q.nd_max_refinements},
                     {"nd_tol", q.nd_tol},
                     {"radial_order", q.radial_order},
                     {"radial_panels", q.radial_panels},
                     {"radial_graded", q.radial_graded},
                     {"angular", q.angular},
                     {"slice_dx", q.slice_dx},
                     {"slice_panels", q.slice_panels},
                     {"slice_order", q.slice_order},
                     {"kernel_tol", q.kernel_tol},
                     {"kernel_grid", q.kernel_grid},
                     {"mc_samples", q.mc_samples},
                     {"mc_strata", q.mc_strata}};
  return j;
}

inline nlohmann::json versions() {
  return {{"nonlocal_rate", library_version},
          {"boost", BOOST_LIB_VERSION},
          {"fftw", std::string(fftw_version)},
          {"compiler", __VERSION__}};
}

inline nlohmann::json report_json(const QuadratureReport& r) {
  return {{"x_nodes", r.x_nodes},       {"z_nodes", r.z_nodes},         {"sphere_rule", r.sphere_rule},
          {"refinements", r.refinements}, {"est_error", r.est_error},   {"slice_lines", r.slice_lines},
          {"mc_seed", r.mc_seed},       {"mc_samples", r.mc_samples},   {"mc_std_error", r.mc_std_error}};
}

inline RateStudyReport rate_rows(const std::vector<double>& hs, const std::vector<double>& vh, double v0) {
  RateStudyReport rep;
  std::vector<double> errs;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    errs.push_back(std::abs(vh[i] - v0));
    const double order = fitted_order(std::span(hs).first(i + 1), std::span<const double>(errs));
    rep.rows.push_back({hs[i], vh[i], v0, errs.back(), order});
  }
  return rep;
}

inline void fill_rate_table(RunResult& out, const RateStudyReport& rep, bool with_scaled) {
  out.table.columns = {"h", "value_h", "value_0", "abs_error", "fitted_order"};
  if (with_scaled) out.table.columns.push_back("h_times_value");
  for (const auto& r : rep.rows) {
    std::vector<Cell> row{r.h, r.value_h, r.value_0, r.abs_error, r.fitted_order};
    if (with_scaled) row.push_back(r.h * r.value_h);
    out.table.add(std::move(row));
  }
  Series s{"|value_h - value_0|", {}, {}};
  for (const auto& r : rep.rows) {
    s.x.push_back(r.h);
    s.y.push_back(r.abs_error);
  }
  out.plot = {"Rate functional error", "h", "|E_h - E_0|", true, true, {s}};
}

inline void audit_table(RunResult& out) {
  out.table.columns = {"check", "h", "lhs", "rhs", "margin", "tolerance", "pass"};
  for (const auto& a : out.audit)
    out.table.add({a.check, a.h, a.lhs, a.rhs, a.margin(), a.tolerance, std::string(a.pass() ? "true" : "false")});
}

// -- experiments --------------------------------------------------------------

inline RunResult run_rate1d(const ExperimentConfig& c) {
  RunResult out;
  const Field1D u = make_field<1>(c.field);
  const ConvexIntegrand fi = make_integrand(c.integrand);
  const auto& q = c.quadrature;
  const double e0 = energy_E_0(u, fi, q).value;
  std::vector<double> vals;
  for (double h : c.h_list) {
    vals.push_back(energy_E_h(u, fi, h, q).value);
    out.audit.push_back({"E_h >= 0", h, 0.0, vals.back(), 1e-8});
  }
  RateStudyReport rep = rate_rows(c.h_list, vals, e0);
  const double h0 = c.h_list.front();
  if (fi.name == "quadratic") {
    const oracles::OracleReport o("spectral E_h", oracles::spectral_E_h_quadratic(u, fi, h0), vals.front(),
                                  {{"samples", 1 << 18}, {"padding", 8}, {"h", h0}});
    rep.metadata["oracle"] = o.to_json();
  } else {
    const oracles::OracleReport o("trapezoid E_h", oracles::bruteforce_E_h(u, fi, h0, 400000), vals.front(),
                                  {{"points", 400000}, {"h", h0}});
    rep.metadata["oracle"] = o.to_json();
  }
  fill_rate_table(out, rep, false);
  out.rate_study = rep;
  return out;
}

template <int D>
RunResult run_ratend(const ExperimentConfig& c) {
  RunResult out;
  const ScalarField<D> u = make_field<D>(c.field);
  const ConvexIntegrand fi = make_integrand(c.integrand);
  const Kernel<D> K = make_kernel<D>(c.kernel, c.quadrature.kernel_grid);
  const auto& q = c.quadrature;
  const auto lim = limit_functional<D>(u, fi, K, q);
  std::vector<double> vals;
  nlohmann::json reps = nlohmann::json::array();
  for (double h : c.h_list) {
    const auto r = rate_functional<D>(u, fi, K, h, q);
    vals.push_back(r.value);
    reps.push_back(report_json(r.report));
    out.audit.push_back({"rate >= 0", h, 0.0, r.value, 1e-6});
  }
  RateStudyReport rep = rate_rows(c.h_list, vals, lim.value);
  rep.metadata["quadrature_reports"] = reps;
  rep.metadata["limit_report"] = report_json(lim.report);
  if (c.method == "monte_carlo") {
    QuadratureScheme mq = q;
    mq.seed = *c.seed;
    const double h0 = c.h_list.front();
    const auto mc = energy_F_h<D>(u, fi, K, h0, mq);
    mq.mc_samples = 0;
    const auto direct = energy_F_h<D>(u, fi, K, h0, mq);
    oracles::OracleReport o("Monte Carlo F_h", mc.value, direct.value,
                            {{"samples", mc.report.mc_samples}, {"seed", mc.report.mc_seed}, {"h", h0}});
    auto j = o.to_json();
    j["mc_std_error"] = mc.report.mc_std_error;
    rep.metadata["oracle"] = j;
  }
  fill_rate_table(out, rep, true);
  Series s2{"h * value_h", {}, {}};
  for (const auto& r : rep.rows) {
    s2.x.push_back(r.h);
    s2.y.push_back(r.h * r.value_h);
  }
  out.plot.series.push_back(s2);
  out.rate_study = rep;
  return out;
}

template <int D>
RunResult run_slice_check(const ExperimentConfig& c) {
  RunResult out;
  const ScalarField<D> u = make_field<D>(c.field);
  const ConvexIntegrand fi = make_integrand(c.integrand);
  const Kernel<D> K = make_kernel<D>(c.kernel, c.quadrature.kernel_grid);
  out.table.columns = {"h", "direct", "sliced", "rel_discrepancy"};
  Series sd{"direct", {}, {}}, ss{"sliced", {}, {}};
  for (double h : c.h_list) {
    const double d = rate_functional<D>(u, fi, K, h, c.quadrature).value;
    const double s = rate_functional_sliced<D>(u, fi, K, h, c.quadrature).value;
    const double rel = std::abs(d - s) / std::max(1.0, std::abs(d));
    out.table.add({h, d, s, rel});
    out.audit.push_back({"|direct - sliced| / max(1, direct) <= 1e-3", h, rel, 1e-3, 0.0});
    sd.x.push_back(h), sd.y.push_back(d);
    ss.x.push_back(h), ss.y.push_back(s);
  }
  out.plot = {"Direct vs sliced rate functional", "h", "E_h", true, false, {sd, ss}};
  return out;
}

inline double positivity_radius(int d, double r1) { return d >= 2 ? sigma_d(d) * r1 : r1; }

/// K~ against the closed-form bound on the positivity grid: returns
/// (min K~, min (K~ - bound) / max(1, bound), points).
template <int D>
std::tuple<double, double, std::size_t> effective_kernel_grid_check(const Kernel<D>& K, const EffectiveKernel<D>& Kt,
                                                                     int grid) {
  const KernelValidation v = validate_kernel<D>(K, grid);
  const double r1 = K.annulus().r1;
  const auto pts = annulus_samples<D>(0.0, positivity_radius(D, r1), grid);
  double kmin = std::numeric_limits<double>::infinity(), gap = kmin;
  for (const auto& z : pts) {
    const double kt = Kt(z);
    const double lb = effective_kernel_lower_bound<D>(K, v.positivity, z);
    kmin = std::min(kmin, kt);
    gap = std::min(gap, (kt - lb) / std::max(1.0, lb));
  }
  return {kmin, gap, pts.size()};
}

template <int D>
RunResult run_kernel_report(const ExperimentConfig& c) {
  RunResult out;
  const Kernel<D> K = make_kernel<D>(c.kernel, c.quadrature.kernel_grid);
  const EffectiveKernel<D> Kt(K, c.quadrature.kernel_tol);
  const KernelValidation v = validate_kernel<D>(K, c.quadrature.kernel_grid);
  const auto [kmin, gap, npts] = effective_kernel_grid_check<D>(K, Kt, c.quadrature.kernel_grid);
  const double mass_rel = std::abs(Kt.mass() - K.mass()) / K.mass();
  const double sm_rel = std::abs(Kt.second_moment() - K.second_moment() / 6.0) / (K.second_moment() / 6.0);
  out.audit.push_back({"|mass(Kt) - mass(K)| / mass(K) <= 1e-8", NAN, mass_rel, 1e-8, 0.0});
  out.audit.push_back({"|m2(Kt) - m2(K)/6| / (m2(K)/6) <= 1e-6", NAN, sm_rel, 1e-6, 0.0});
  out.audit.push_back({"min Kt on positivity ball > 0", NAN, 0.0, kmin, 0.0});
  // Equality for indicator kernels with r0 = 0, hence the relative tolerance.
  out.audit.push_back({"Kt >= closed-form bound (relative gap)", NAN, 0.0, gap, 1e-10});

  nlohmann::json kj;
  kj["name"] = K.name();
  kj["d"] = D;
  kj["sigma_d"] = D >= 2 ? nlohmann::json(sigma_d(D)) : nlohmann::json(nullptr);
  kj["support_radius"] = K.support_radius();
  kj["mass"] = K.mass();
  kj["second_moment"] = K.second_moment();
  kj["mass_defect"] = K.mass_defect();
  kj["annulus"] = {{"r0", K.annulus().r0}, {"r1", K.annulus().r1}};
  kj["positivity_constant"] = v.positivity;
  kj["effective"] = {{"mass", Kt.mass()},
                     {"second_moment", Kt.second_moment()},
                     {"second_moment_ratio", Kt.second_moment() / K.second_moment()},
                     {"min_on_positivity_ball", kmin},
                     {"positivity_radius", positivity_radius(D, K.annulus().r1)},
                     {"grid_points", npts},
                     {"min_gap_to_closed_form_bound", gap}};
  out.document["kernel"] = kj;

  out.table.columns = {"rho", "K", "Kt", "Kt_lower_bound"};
  Vec<D> e{};
  e[0] = 1.0;
  Series sk{"K", {}, {}}, st{"Kt", {}, {}}, sb{"closed-form bound", {}, {}};
  const double R = K.support_radius();
  const int n = 100;
  for (int i = 1; i <= n; ++i) {
    const double rho = R * i / n;
    const double k = K.along(rho, e), kt = Kt.along(rho, e);
    const double lb = rho <= K.annulus().r1 ? effective_kernel_lower_bound(D, v.positivity, K.annulus().r0,
                                                                           K.annulus().r1, rho)
                                            : NAN;
    out.table.add({rho, k, kt, lb});
    sk.x.push_back(rho), sk.y.push_back(k);
    st.x.push_back(rho), st.y.push_back(kt);
    sb.x.push_back(rho), sb.y.push_back(lb);
  }
  out.plot = {"Kernel profiles (" + K.name() + ", d = " + std::to_string(D) + ")", "|z|", "value", false, true,
              {sk, st, sb}};
  return out;
}

template <int D>
RunResult run_h2_probe(const ExperimentConfig& c) {
  RunResult out;
  const ScalarField<D> u = make_field<D>(c.field);
  const ConvexIntegrand fi = make_integrand(c.integrand);
  const Kernel<D> K = make_kernel<D>(c.kernel, c.quadrature.kernel_grid);
  const auto rows = h2_criterion_probe<D>(u, fi, K, c.h_list, c.quadrature);
  out.table.columns = {"h", "value_h", "upper_bound"};
  Series sv{"E_h", {}, {}}, sb{"upper bound", {}, {}};
  for (const auto& r : rows) {
    out.table.add({r.h, r.value, r.upper_bound ? *r.upper_bound : NAN});
    if (r.upper_bound) {
      out.audit.push_back({"rate <= (c/2) m2(K) |Hess u|^2", r.h, r.value, *r.upper_bound, 1e-6});
      sb.x.push_back(r.h), sb.y.push_back(*r.upper_bound);
    }
    sv.x.push_back(r.h), sv.y.push_back(r.value);
  }
  out.document["has_upper_bound"] = !rows.empty() && rows.front().upper_bound.has_value();
  out.plot = {"H2 criterion probe", "h", "E_h", true, true, {sv}};
  if (!sb.x.empty()) out.plot.series.push_back(sb);
  return out;
}

}  // namespace detail

/// Every implemented inequality for the configured field / integrand / kernel.
/// One-dimensional checks run on u itself when d = 1 and on the slice through
/// the support center along x_0 otherwise.
template <int D>
std::vector<AuditItem> audit_bounds(const ScalarField<D>& u, const ConvexIntegrand& fi, const Kernel<D>& K,
                                    const std::vector<double>& h_list, const QuadratureScheme& q) {
  std::vector<AuditItem> items;
  Field1D line = [&] {
    if constexpr (D == 1) {
      return u;
    } else {
      Vec<D> e{}, xi = u.support().center();
      e[0] = 1.0;
      xi[0] = 0.0;
      return LineSlice<D>(u, e, xi).field();
    }
  }();
  // The J_h form is an equality for quadratic f, so the 1-D checks run well
  // below the 1e-8 audit tolerance.
  QuadratureScheme q1 = q;
  q1.tol = std::min(q.tol, 1e-12);
  for (double h : h_list) {
    const double eh = energy_E_h(line, fi, h, q1).value;
    items.push_back({"E_h >= 0", h, 0.0, eh, 1e-8});
    items.push_back({"E_h >= J_h form", h, lower_bound_Jh(line, fi.gamma, h, q1), eh, 1e-8});
    for (const auto& phi : bundled_test_functions(line, fi, h, q1.inner_order))
      items.push_back({"E_h >= dual form (" + phi.name + ")", h, dual_lower_bound(line, fi, h, phi, q1), eh, 1e-8});
    if (fi.f2_upper) items.push_back({"E_h <= (c/2)|u'|^2", h, eh, upper_bound_check(line, fi, q), 1e-8});
  }
  const EffectiveKernel<D> Kt(K, q.kernel_tol);
  const auto [kmin, gap, npts] = detail::effective_kernel_grid_check<D>(K, Kt, q.kernel_grid);
  items.push_back({"min Kt on positivity ball > 0", NAN, 0.0, kmin, 0.0});
  items.push_back({"Kt >= closed-form bound (relative gap)", NAN, 0.0, gap, 1e-10});
  const bool hess = u.derivative_order() >= 2;
  std::optional<double> h2;
  if (fi.f2_upper && hess) h2 = h2_upper_bound<D>(u, fi, K, q);
  for (double h : h_list) {
    const double r = rate_functional<D>(u, fi, K, h, q).value;
    items.push_back({"rate >= 0", h, 0.0, r, 1e-6});
    items.push_back({"rate >= Kt form", h, lower_bound_form<D>(u, fi.gamma, Kt, h, q), r, 1e-6});
    if (h2) items.push_back({"rate <= (c/2) m2(K) |Hess u|^2", h, r, *h2, 1e-6});
  }
  return items;
}

namespace detail {

template <int D>
RunResult run_bounds_audit(const ExperimentConfig& c) {
  RunResult out;
  const ScalarField<D> u = make_field<D>(c.field);
  const ConvexIntegrand fi = make_integrand(c.integrand);
  const Kernel<D> K = make_kernel<D>(c.kernel, c.quadrature.kernel_grid);
  out.audit = audit_bounds<D>(u, fi, K, c.h_list, c.quadrature);
  audit_table(out);
  Series s{"margin", {}, {}};
  for (std::size_t i = 0; i < out.audit.size(); ++i) {
    s.x.push_back(static_cast<double>(i + 1));
    s.y.push_back(out.audit[i].margin());
  }
  out.plot = {"Audited inequalities", "check index", "margin (rhs - lhs)", false, false, {s}};
  return out;
}

template <int D>
RunResult dispatch(const ExperimentConfig& c) {
  if (c.experiment == "rate1d") {
    if constexpr (D == 1) return run_rate1d(c);
  }
  if (c.experiment == "ratend") return run_ratend<D>(c);
  if (c.experiment == "slice-check") {
    if constexpr (D >= 2) return run_slice_check<D>(c);
  }
  if (c.experiment == "kernel-report") return run_kernel_report<D>(c);
  if (c.experiment == "h2-probe") return run_h2_probe<D>(c);
  if (c.experiment == "bounds-audit") return run_bounds_audit<D>(c);
  throw ConfigError("experiment '" + c.experiment + "' is not available for d = " + std::to_string(D));
}

}  // namespace detail

/// Runs the configured experiment and writes report.csv, report.json and
/// plot.svg into c.output_dir. Invalid input surfaces as ConfigError.
inline RunResult run(const ExperimentConfig& c) {
  validate_config(c);
  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + c.output_dir.string() + ": " + ec.message());
  {
    const auto probe = c.output_dir / ".write-test";
    std::ofstream t(probe);
    if (!t) throw ConfigError("output directory " + c.output_dir.string() + " is not writable");
    t.close();
    std::filesystem::remove(probe, ec);
  }
  RunResult out;
  try {
    switch (c.field.dim) {
      case 1: out = detail::dispatch<1>(c); break;
      case 2: out = detail::dispatch<2>(c); break;
      default: out = detail::dispatch<3>(c); break;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  out.experiment = c.experiment;
  for (const auto& a : out.audit)
    if (!a.pass()) {
      out.exit_code = exit_audit_failure;
      out.message = "audit failed: " + a.check + (std::isnan(a.h) ? "" : " at h = " + format_number(a.h)) +
                    " (lhs " + format_number(a.lhs) + ", rhs " + format_number(a.rhs) + ")";
      break;
    }

  nlohmann::json doc = out.document;
  doc["experiment"] = c.experiment;
  doc["config"] = detail::echo_config(c);
  doc["versions"] = detail::versions();
  doc["rows"] = out.table.to_json();
  if (out.rate_study) {
    doc["metadata"] = out.rate_study->metadata;
    doc["fitted_order"] =
        out.rate_study->rows.empty() ? nlohmann::json(nullptr)
                                     : (std::isfinite(out.rate_study->rows.back().fitted_order)
                                            ? nlohmann::json(out.rate_study->rows.back().fitted_order)
                                            : nlohmann::json(nullptr));
  }
  nlohmann::json audit = nlohmann::json::array();
  for (const auto& a : out.audit)
    audit.push_back({{"check", a.check},
                     {"h", std::isnan(a.h) ? nlohmann::json(nullptr) : nlohmann::json(a.h)},
                     {"lhs", a.lhs},
                     {"rhs", a.rhs},
                     {"margin", a.margin()},
                     {"tolerance", a.tolerance},
                     {"pass", a.pass()}});
  doc["audit"] = audit;
  doc["passed"] = out.exit_code == exit_ok;
  out.document = doc;

  write_text(c.output_dir / "report.csv", out.table.to_csv());
  write_text(c.output_dir / "report.json", out.document.dump(2) + "\n");
  write_text(c.output_dir / "plot.svg", render_svg(out.plot));
  return out;
}

}  // namespace nonlocal_rate
