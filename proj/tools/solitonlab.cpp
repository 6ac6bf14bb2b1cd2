// solitonlab command-line front end.
// Exit codes: 0 success, 1 domain/numerical error, 2 usage error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "solitonlab/dynamics.hpp"
#include "solitonlab/fgr.hpp"
#include "solitonlab/internal_mode.hpp"
#include "solitonlab/jost.hpp"
#include "solitonlab/linearization.hpp"
#include "solitonlab/profile.hpp"

#ifndef SOLITONLAB_VERSION
#define SOLITONLAB_VERSION "dev"
#endif

using json = nlohmann::ordered_json;
using namespace solitonlab;

namespace {

struct Common {
  double p = 2.9;
  double omega = 1.0;
  double half_width = 40.0;
  int n = 4096;
  std::string out;
};

json grid_json(double hw, int n, const std::string& kind) {
  return {{"half_width", hw}, {"n", n}, {"kind", kind}};
}

json meta(const std::string& command, json config, json tolerances) {
  return {{"program", "solitonlab"},
          {"version", SOLITONLAB_VERSION},
          {"command", command},
          {"config", std::move(config)},
          {"tolerances", std::move(tolerances)}};
}

// CSV sink: a file when a path is given, stdout otherwise. The first line is
// the metadata block as a '#' comment.
class CsvSink {
 public:
  explicit CsvSink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot open " + path);
    }
  }
  std::ostream& os() { return file_.is_open() ? file_ : std::cout; }
  void header(const json& m, const std::string& columns) { os() << "# " << m.dump() << "\n" << columns << "\n"; }

 private:
  std::ofstream file_;
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

int thread_count() {
  if (const char* e = std::getenv("SOLITONLAB_THREADS")) {
    const int t = std::atoi(e);
    if (t > 0) return t;
  }
  return 1;
}

// --- profile ---------------------------------------------------------------

int run_profile(const Common& c) {
  const Params prm(c.p, c.omega);
  const Grid g = make_grid(c.half_width, c.n);
  const Field2 phi = soliton(prm, g);
  const MassEnergy me = mass_energy(prm, phi);
  json m = meta("profile", {{"p", c.p}, {"omega", c.omega}, {"grid", grid_json(c.half_width, c.n, "collocation")}},
                {{"derivative", "4th-order finite differences"}});
  m["mass"] = me.mass;
  m["energy"] = me.energy;
  // stationary residual -phi'' + omega phi - phi^p on the interior
  const auto d2 = derivative(g, std::span<const cplx>(phi.v1), 2);
  double res = 0.0;
  for (std::size_t i = 8; i + 8 < g.size(); ++i) {
    const double v = phi.v1[i].real();
    res = std::max(res, std::abs(-d2[i].real() + c.omega * v - std::pow(v, c.p)));
  }
  m["stationary_residual"] = res;
  CsvSink sink(c.out);
  sink.header(m, "x,phi,d_omega_phi");
  for (std::size_t i = 0; i < g.size(); ++i)
    sink.os() << num(g.x(i)) << "," << num(phi.v1[i].real()) << "," << num(soliton_domega(prm, g.x(i))) << "\n";
  return 0;
}

// --- spectrum --------------------------------------------------------------

int run_spectrum(const Common& c, bool with_xi) {
  const Params prm(c.p, c.omega);
  json r;
  std::optional<double> lb, le;
  try {
    const auto m = find_lambda(prm, ModeMethod::birman_schwinger);
    lb = m.lambda;
    r["birman_schwinger"] = {{"lambda", m.lambda}, {"alpha", m.alpha}, {"iterations", m.iterations}};
  } catch (const NumericalError& e) {
    r["birman_schwinger"] = {{"error", e.what()}};
  }
  try {
    const auto m = find_lambda(prm, ModeMethod::evans);
    le = m.lambda;
    r["evans"] = {{"lambda", m.lambda}, {"alpha", m.alpha}};
  } catch (const NumericalError& e) {
    r["evans"] = {{"error", e.what()}};
  }
  if (lb && le) r["difference"] = std::abs(*lb - *le);
  if (!lb && !le) throw NumericalError(NumericalError::Kind::out_of_range, "no eigenvalue route covers this p");
  const double lam = lb ? *lb : *le;
  r["two_lambda_gt_omega"] = 2.0 * lam > c.omega;
  if (with_xi && c.p != 3.0) {
    const auto m = xi_build(find_lambda(prm, lb ? ModeMethod::birman_schwinger : ModeMethod::evans),
                            make_grid(c.half_width, c.n), XiNormalization::symplectic);
    r["xi"] = {{"normalization", "symplectic"}, {"eigen_residual", m.eigen_residual},
               {"reality_residual", m.reality_residual}};
  }
  json out = meta("spectrum", {{"p", c.p}, {"omega", c.omega}, {"grid", grid_json(c.half_width, c.n, "collocation")}},
                  {{"bs_fixed_point", 1e-12}, {"evans_bisection", 1e-14}, {"eps_gap", default_gap_margin}});
  out["result"] = r;
  std::cout << out.dump(2) << "\n";
  return 0;
}

// --- fgr -------------------------------------------------------------------

int run_fgr(const Common& c) {
  const auto r = gamma_at(c.p, make_grid(c.half_width, c.n));
  const double g1 = gamma_linear_closed_form();
  json out = meta("fgr", {{"p", c.p}, {"grid", grid_json(c.half_width, c.n, "collocation")}},
                  {{"jost_ode", 1e-12}});
  out["result"] = {{"lambda", r.lambda},
                   {"gamma", r.gamma},
                   {"gamma_g_route", r.gamma_g_route},
                   {"gamma_linear", g1 * (c.p - 3.0)},
                   {"ratio_to_linear", c.p != 3.0 ? r.gamma / (g1 * (c.p - 3.0)) : 0.0},
                   {"symplectic_factor", r.symplectic_factor},
                   {"radiation_residual", r.radiation_residual},
                   {"eigen_residual", r.eigen_residual},
                   {"normalization", "darboux xi, unit tail amplitude g"}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

// --- resolvent -------------------------------------------------------------

int run_resolvent(const Common& c, const std::vector<double>& energies, double range, double step) {
  const Params prm(c.p, c.omega);
  json rows = json::array();
  double lo = INFINITY, hi = 0.0;
  for (double E : energies) {
    const Resolvent R(prm, E);
    double mx = 0.0, ax = 0.0, ay = 0.0;
    const int m = static_cast<int>(std::lround(2.0 * range / step));
    for (int i = 0; i <= m; ++i)
      for (int j = 0; j <= m; ++j) {
        const double x = -range + i * step, y = -range + j * step;
        const double w = R.sample(x, y).weight_ratio;
        if (w > mx) { mx = w; ax = x; ay = y; }
      }
    lo = std::min(lo, mx);
    hi = std::max(hi, mx);
    rows.push_back({{"E", E}, {"max_weight_ratio", mx}, {"argmax", {ax, ay}}, {"off_diagonal_dropped", R.off_diagonal()}});
  }
  json out = meta("resolvent",
                  {{"p", c.p}, {"omega", c.omega}, {"E", energies}, {"range", range}, {"step", step}},
                  {{"jost_ode", 1e-12}, {"det_floor", 1e-8}});
  out["result"] = {{"rows", rows}, {"spread", hi / lo}, {"stable_within_factor_3", hi <= 3.0 * lo}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

// --- scan ------------------------------------------------------------------

struct ScanRow {
  double p = 0.0;
  double lambda = NAN, gamma = NAN, wronskian = NAN, detD0 = NAN;
  double eigen_residual = NAN, radiation_residual = NAN;
  std::string error;
};

ScanRow scan_row(double p) {
  ScanRow r;
  r.p = p;
  const Params prm(p);
  try {
    if (std::abs(p - 3.0) <= 0.3 + 1e-12) {
      const auto g = gamma_at(p);
      r.lambda = g.lambda;
      r.gamma = g.gamma;
      r.eigen_residual = g.eigen_residual;
      r.radiation_residual = g.radiation_residual;
    } else {
      r.lambda = find_lambda(prm, ModeMethod::evans).lambda;
      r.error = "gamma needs |p-3| <= 0.3 (darboux normalization)";
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  try {
    r.wronskian = std::abs(resonance_wronskian(prm));
    r.detD0 = std::abs(wronskian_D(prm, 0.0).detD);
  } catch (const std::exception& e) {
    r.error += (r.error.empty() ? "" : "; ") + std::string(e.what());
  }
  return r;
}

int run_scan(double pmin, double pmax, int steps, bool exclude_cubic, const std::string& outpath) {
  if (!(pmin > 2.0 && pmax < 4.9 && pmin <= pmax)) throw std::invalid_argument("p-range must lie in (2, 4.9)");
  if (steps < 1) throw std::invalid_argument("steps must be at least 1");
  std::vector<double> ps;
  for (int i = 0; i <= steps; ++i) {
    const double p = pmin + (pmax - pmin) * i / steps;
    if (exclude_cubic && std::abs(p - 3.0) < 1e-12) continue;
    ps.push_back(p);
  }
  std::vector<ScanRow> rows(ps.size());
  const double g1 = gamma_linear_closed_form();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < ps.size();) rows[i] = scan_row(ps[i]);
  };
  const int nt = std::min<int>(thread_count(), static_cast<int>(ps.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const double ref = std::abs(wronskian_D(Params(3.0), 1.0).detD);
  json m = meta("scan", {{"p_min", pmin}, {"p_max", pmax}, {"steps", steps}, {"exclude_cubic", exclude_cubic}},
                {{"gamma_nonzero", "|gamma| >= 0.5 * gamma_1 * |p-3|"},
                 {"wronskian_iii", "|W[f3(.,0), g3(.,0)]| >= 1e-2"},
                 {"detD0_reference", ref}});
  CsvSink sink(outpath);
  sink.header(m,
              "p,lambda,two_lambda_gt_1,gamma,gamma_nonzero,wronskian_iii,detD0,lambda_margin,gamma_margin,"
              "eigen_residual,radiation_residual,error");
  for (const auto& r : rows) {
    const double lm = 2.0 * r.lambda - 1.0;
    const double gm = std::abs(r.gamma) - 0.5 * g1 * std::abs(r.p - 3.0);
    const bool gnz = !std::isnan(r.gamma) && gm >= 0.0 && std::abs(r.gamma) > 1e-4;
    sink.os() << num(r.p) << "," << num(r.lambda) << "," << (lm > 0.0 ? "true" : "false") << "," << num(r.gamma) << ","
              << (gnz ? "true" : "false") << "," << num(r.wronskian) << "," << num(r.detD0 / ref) << "," << num(lm)
              << "," << num(gm) << "," << num(r.eigen_residual) << "," << num(r.radiation_residual) << ",\""
              << r.error << "\"\n";
  }
  return 0;
}

// --- evolve ----------------------------------------------------------------

int run_evolve(SimConfig cfg, const std::string& outpath, const std::string& summary_path) {
  cfg.validate();
  json config = {{"p", cfg.params.p},
                 {"omega0", cfg.params.omega},
                 {"grid", grid_json(cfg.half_width, cfg.n, "periodic")},
                 {"dt", cfg.dt},
                 {"T", cfg.T_final},
                 {"stride", cfg.stride},
                 {"A", cfg.A},
                 {"B", cfg.B},
                 {"kappa", cfg.kappa_value()},
                 {"a", cfg.a},
                 {"delta", cfg.delta},
                 {"direction", to_string(cfg.direction)},
                 {"seed", cfg.seed}};
  json tol = {{"newton_abs", 1e-10}, {"newton_max_iter", 50}, {"blow_up", "sup norm doubling"}};
  CsvSink sink(outpath);
  sink.header(meta("evolve", config, tol), trajectory_csv_header());
  const auto res = run_stability_experiment(cfg, [&](const Diagnostics& d) {
    auto& o = sink.os();
    o << num(d.t) << "," << num(d.theta) << "," << num(d.omega) << "," << num(d.z.real()) << "," << num(d.z.imag())
      << "," << num(d.abs_z2) << "," << num(d.mass) << "," << num(d.energy) << "," << num(d.eta_sigmaA) << ","
      << num(d.eta_tilde) << "," << num(d.virial_I) << "," << num(d.J_FGR) << "," << num(d.eta_h1_weighted) << "\n";
  });
  const auto& s = res.summary;
  json summary = meta("evolve", config, tol);
  summary["summary"] = {{"lambda", s.lambda},
                        {"k_rad", s.k_rad},
                        {"max_eta_h1", s.max_eta_h1},
                        {"C_sqrt_delta", s.C_sqrt_delta},
                        {"z2_first_window", s.z2_first_window},
                        {"z2_last_window", s.z2_last_window},
                        {"envelope_ratio", s.envelope_ratio},
                        {"envelope_decay_20pct", s.envelope_ratio <= 0.8},
                        {"omega_initial", s.omega_initial},
                        {"omega_final_window", s.omega_final_window},
                        {"omega_tv_first_half", s.omega_tv_first_half},
                        {"omega_tv_second_half", s.omega_tv_second_half},
                        {"omega_tv_ratio", s.omega_tv_ratio},
                        {"omega_settled", s.omega_tv_ratio <= 0.1},
                        {"max_mass_drift", s.max_mass_drift},
                        {"max_energy_drift", s.max_energy_drift},
                        {"max_orthogonality", s.max_orthogonality},
                        {"max_newton_residual", s.max_newton_residual},
                        {"max_newton_iterations", s.max_newton_iterations},
                        {"max_reconstruction", s.max_reconstruction},
                        {"fgr_correlation", s.fgr_correlation},
                        {"wrap_time_estimate", s.wrap_time},
                        {"wrap_time_exceeded", cfg.T_final > s.wrap_time}};
  if (summary_path.empty()) {
    std::cerr << summary.dump(2) << "\n";
  } else {
    std::ofstream f(summary_path);
    if (!f) throw std::runtime_error("cannot open " + summary_path);
    f << summary.dump(2) << "\n";
  }
  return 0;
}

// --- moments ---------------------------------------------------------------

int run_moments(bool check, double tol) {
  json tables = json::object();
  for (int f = 0; f < 10; ++f) {
    const auto fam = static_cast<MomentFamily>(f);
    const auto t = moment_table(fam, MomentMethod::quadrature);
    json row = json::object();
    for (const auto& [k, v] : t.values) row[std::to_string(k)] = v;
    tables[to_string(fam)] = row;
  }
  json ids = json::array();
  double worst = 0.0;
  for (int k : {1, 3, 5, 7})
    for (const auto& id : moment_identities(k)) {
      ids.push_back({{"k", k}, {"name", id.name}, {"residual", id.residual}});
      worst = std::max(worst, std::abs(id.residual));
    }
  json out = meta("moments", {{"check", check}}, {{"identity_tolerance", tol}});
  out["result"] = {{"moments", tables},
                   {"p1_minus_closed_form",
                    moment(MomentFamily::p, 1, MomentMethod::quadrature) -
                        std::numbers::pi / std::cosh(0.5 * std::numbers::pi)},
                   {"gamma_1", gamma_linear_coefficient()},
                   {"identities", ids},
                   {"worst_residual", worst},
                   {"all_within_tolerance", worst <= tol}};
  std::cout << out.dump(2) << "\n";
  return check && worst > tol ? 1 : 0;
}

// --- selftest --------------------------------------------------------------

int run_selftest() {
  json checks = json::array();
  bool ok = true;
  auto add = [&](const std::string& name, double value, double tol) {
    const bool pass = std::abs(value) <= tol;
    ok &= pass;
    checks.push_back({{"name", name}, {"value", value}, {"tolerance", tol}, {"pass", pass}});
  };
  add("gamma(3,1)", gamma_at(3.0, make_grid(30.0, 2048)).gamma, 1e-4);
  add("p_1 - pi/cosh(pi/2)",
      moment(MomentFamily::p, 1, MomentMethod::quadrature) - std::numbers::pi / std::cosh(0.5 * std::numbers::pi),
      1e-8);
  double worst = 0.0;
  for (int k : {1, 3})
    for (const auto& id : moment_identities(k)) worst = std::max(worst, std::abs(id.residual));
  add("moment identities k=1,3", worst, 1e-6);
  add("lambda evans - bs at p=2.8",
      find_lambda(Params(2.8), ModeMethod::evans).lambda - find_lambda(Params(2.8), ModeMethod::birman_schwinger).lambda,
      1e-4);
  const Grid g = make_grid(20.0, 1024);
  const Field2 v = Field2::sample(
      g, [](double x) { return cplx{std::exp(-x * x), 0.0}; },
      [](double x) { return cplx{0.0, x * std::exp(-x * x)}; });
  add("U-conjugation p=2.9", conjugation_check(Params(2.9), g, v), 1e-5);
  json out = meta("selftest", json::object(), json::object());
  out["result"] = {{"checks", checks}, {"pass", ok}};
  std::cout << out.dump(2) << "\n";
  return ok ? 0 : 1;
}

// Flags from a JSON config file, inserted ahead of the command line so that
// explicit flags win.
std::vector<std::string> config_args(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CLI::FileError::Missing(path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw CLI::ConversionError("config", e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("config", "config must be a JSON object");
  std::vector<std::string> args;
  for (const auto& [k, v] : j.items()) {
    if (v.is_boolean()) {
      if (v.get<bool>()) args.push_back("--" + k);
    } else if (v.is_array()) {
      args.push_back("--" + k);
      for (const auto& e : v) args.push_back(e.is_string() ? e.get<std::string>() : e.dump());
    } else {
      args.push_back("--" + k);
      args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solitonlab: soliton spectra, Fermi golden rule constant and modulated NLS runs"};
  app.set_version_flag("--version", std::string(SOLITONLAB_VERSION));
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common c;
  auto add_common = [&](CLI::App* s, bool grid) {
    s->add_option("--p", c.p, "nonlinearity exponent")->check(CLI::Range(1.0, 5.0))->capture_default_str();
    s->add_option("--omega", c.omega, "frequency")->check(CLI::PositiveNumber)->capture_default_str();
    if (grid) {
      s->add_option("--half-width", c.half_width, "grid half width")->check(CLI::PositiveNumber)->capture_default_str();
      s->add_option("--n", c.n, "grid points")->check(CLI::Range(16, 1 << 22))->capture_default_str();
    }
  };

  auto* profile = app.add_subcommand("profile", "ground state samples (CSV)");
  add_common(profile, true);
  profile->add_option("--out", c.out, "CSV path (stdout if omitted)");

  bool with_xi = false;
  auto* spectrum = app.add_subcommand("spectrum", "internal eigenvalue by Birman-Schwinger and Evans");
  add_common(spectrum, true);
  spectrum->add_flag("--xi", with_xi, "also build the eigenfunction and report residuals");

  auto* fgr = app.add_subcommand("fgr", "Fermi golden rule constant gamma(p, 1)");
  add_common(fgr, true);

  std::vector<double> energies{1.01, 1.1, 1.5, 2.0, 5.0};
  double range = 20.0, step = 1.0;
  auto* resolvent = app.add_subcommand("resolvent", "weighted resolvent kernel bound scan");
  add_common(resolvent, false);
  resolvent->add_option("--E", energies, "energies (|E| >= omega)")->capture_default_str();
  resolvent->add_option("--range", range, "scan square [-range, range]^2")->check(CLI::PositiveNumber);
  resolvent->add_option("--step", step, "scan spacing")->check(CLI::PositiveNumber);

  double pmin = 2.85, pmax = 3.15;
  int steps = 12;
  bool keep_cubic = false;
  std::string scan_out;
  auto* scan = app.add_subcommand("scan", "check 2 lambda > 1, gamma != 0, W[f3, g3] != 0 over a p-range (CSV)");
  scan->add_option("--p-min", pmin)->capture_default_str();
  scan->add_option("--p-max", pmax)->capture_default_str();
  scan->add_option("--steps", steps, "number of intervals")->capture_default_str();
  scan->add_flag("--keep-cubic", keep_cubic, "keep p = 3 if it falls on the lattice");
  scan->add_option("--out", scan_out, "CSV path (stdout if omitted)");

  SimConfig sim;
  double sim_p = 2.9, sim_omega = 1.0;
  std::string direction = "internal_mode", traj_out, summary_out;
  auto* evolve_cmd = app.add_subcommand("evolve", "modulated split-step run with diagnostics (CSV + JSON summary)");
  evolve_cmd->add_option("--p", sim_p)->check(CLI::Range(1.0, 5.0))->capture_default_str();
  evolve_cmd->add_option("--omega", sim_omega)->check(CLI::PositiveNumber)->capture_default_str();
  evolve_cmd->add_option("--half-width", sim.half_width)->check(CLI::PositiveNumber)->capture_default_str();
  evolve_cmd->add_option("--n", sim.n)->check(CLI::Range(16, 1 << 22))->capture_default_str();
  evolve_cmd->add_option("--dt", sim.dt)->check(CLI::PositiveNumber)->capture_default_str();
  evolve_cmd->add_option("--T", sim.T_final)->check(CLI::PositiveNumber)->capture_default_str();
  evolve_cmd->add_option("--stride", sim.stride, "steps between outputs")->capture_default_str();
  evolve_cmd->add_option("--A", sim.A)->capture_default_str();
  evolve_cmd->add_option("--B", sim.B)->capture_default_str();
  evolve_cmd->add_option("--kappa", sim.kappa, "0 selects the default")->capture_default_str();
  evolve_cmd->add_option("--a", sim.a, "weight exponent in exp(-a<x>)")->capture_default_str();
  evolve_cmd->add_option("--delta", sim.delta)->capture_default_str();
  evolve_cmd->add_option("--direction", direction)
      ->check(CLI::IsMember({"internal_mode", "random_even"}))
      ->capture_default_str();
  evolve_cmd->add_option("--seed", sim.seed)->capture_default_str();
  evolve_cmd->add_option("--out", traj_out, "trajectory CSV (stdout if omitted)");
  evolve_cmd->add_option("--summary", summary_out, "summary JSON (stderr if omitted)");

  bool check = false;
  double mtol = 1e-6;
  auto* moments = app.add_subcommand("moments", "sech-power moments and integration-by-parts identities");
  moments->add_flag("--check", check, "exit 1 unless every identity residual is within tolerance");
  moments->add_option("--tol", mtol)->capture_default_str();

  auto* selftest = app.add_subcommand("selftest", "quick internal consistency checks");

  // --config file.json is expanded into flags before parsing
  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  try {
    std::vector<std::string> fwd(args.rbegin(), args.rend());
    for (std::size_t i = 0; i < fwd.size(); ++i) {
      if (fwd[i] == "--config") {
        if (i + 1 >= fwd.size()) throw CLI::ArgumentMismatch("--config", 1, 0);
        auto extra = config_args(fwd[i + 1]);
        fwd.erase(fwd.begin() + static_cast<long>(i), fwd.begin() + static_cast<long>(i) + 2);
        // after the subcommand name so the options bind to it
        const std::size_t at = fwd.empty() ? 0 : 1;
        fwd.insert(fwd.begin() + static_cast<long>(std::min(at, fwd.size())), extra.begin(), extra.end());
        break;
      }
    }
    args.assign(fwd.rbegin(), fwd.rend());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*profile) return run_profile(c);
    if (*spectrum) return run_spectrum(c, with_xi);
    if (*fgr) return run_fgr(c);
    if (*resolvent) return run_resolvent(c, energies, range, step);
    if (*scan) return run_scan(pmin, pmax, steps, !keep_cubic, scan_out);
    if (*evolve_cmd) {
      sim.params = Params(sim_p, sim_omega);
      sim.direction = perturbation_direction_from_string(direction);
      return run_evolve(sim, traj_out, summary_out);
    }
    if (*moments) return run_moments(check, mtol);
    if (*selftest) return run_selftest();
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
