// critdual command line: one run per process, report.json plus CSV artifacts.
#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <random>

#include "critdual/asymptotics.hpp"
#include "critdual/config.hpp"
#include "critdual/dualsolve.hpp"
#include "critdual/errors.hpp"
#include "critdual/groundstate.hpp"
#include "critdual/symmetry.hpp"
#include "critdual/verify.hpp"

using namespace critdual;
using json = nlohmann::ordered_json;

namespace {

constexpr int kReportVersion = 1;

enum Exit { kPass = 0, kInvariant = 2, kConvergence = 3, kConfig = 4 };

class Clock {
 public:
  Clock() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

struct Run {
  RunConfig cfg;
  std::filesystem::path dir;
  json results = json::object();
  json invariants = json::array();
  json timings = json::object();
  json artifacts = json::array();
  bool converged = true;

  void check(const std::string& name, bool pass, double value, double limit) {
    invariants.push_back({{"name", name}, {"pass", pass}, {"value", value}, {"limit", limit}});
  }
  void check(const std::string& name, bool pass) { invariants.push_back({{"name", name}, {"pass", pass}}); }
  std::string artifact(const std::string& file) {
    artifacts.push_back(file);
    return (dir / file).string();
  }
  bool all_pass() const {
    for (const auto& i : invariants)
      if (!i["pass"].get<bool>()) return false;
    return true;
  }
};

json pack_json(const ExponentPack& k) {
  return {{"p", k.p},         {"q", k.q},         {"N", k.N},         {"alpha", k.alpha}, {"beta", k.beta},
          {"gamma1", k.gamma1}, {"gamma2", k.gamma2}, {"gamma", k.gamma}, {"sp", k.sp},       {"sq", k.sq},
          {"coverage", admissibility(k).label()}};
}

json fit_json(const SweepRecord& r) {
  return {{"quantity", r.quantity},       {"eps", r.eps},
          {"values", r.values},           {"slope", r.slope},
          {"slope_ci", r.slope_ci},       {"amplitude", r.amplitude},
          {"predicted_slope", r.predicted.slope}, {"predicted_log_power", r.predicted.log_power},
          {"prediction_source", r.predicted.source}, {"fit_rms", r.fit_rms},
          {"flagged", r.flagged},         {"pass", r.pass},
          {"note", r.note}};
}

std::vector<double> eps_grid(const RunConfig& c, double hi, double lo) {
  if (c.eps_hi > 0) return geometric_grid(c.eps_hi, c.eps_lo, c.eps_n);
  return geometric_grid(hi, lo, c.eps_n);
}

// ---- subcommands -----------------------------------------------------------

void cmd_bubble(Run& run) {
  const auto pk = resolve_pack(run.cfg);
  Clock t;
  auto P = shoot(pk);
  run.timings["shoot_s"] = t.seconds();
  run.results["pack"] = pack_json(pk);
  run.results["shoot_d"] = P.shoot_d;
  run.results["S"] = P.S;
  run.results["a"] = P.a;
  run.results["b"] = P.b;
  run.results["regime"] = to_string(P.regime);
  run.results["int_U"] = P.int_U;
  run.results["int_V"] = P.int_V;
  run.results["r_trust"] = P.r_trust;
  run.results["r_max"] = P.r_max;
  run.results["tail_U"] = describe_tail(P.tail_U);
  run.results["tail_V"] = describe_tail(P.tail_V);
  bool positive = true;
  for (size_t i = 1; i < P.r.size(); ++i)
    positive = positive && P.U[i] > 0 && P.V[i] > 0 && P.U[i] <= P.U[i - 1] && P.V[i] <= P.V[i - 1];
  run.check("V(0) = 1", P.V[0] == 1.0, P.V[0], 1);
  run.check("U, V positive and decreasing", positive);
  const double crit = std::abs(P.int_U / P.int_V - 1);
  run.check("int U^{p+1} = int V^{q+1}", crit <= 1e-6, crit, 1e-6);
  if (pk.p == pk.q) {
    const double S0 = sobolev_constant_closed_form(pk.N);
    run.results["S_closed_form"] = S0;
    run.check("S at p = q matches the closed form", std::abs(P.S / S0 - 1) <= 1e-3, std::abs(P.S / S0 - 1), 1e-3);
  }
  write_profile_csv(run.artifact("profile.csv"), P);
}

void dual_results(Run& run, const DualReport& rep) {
  run.results["mesh"] = rep.mesh_desc;
  run.results["D"] = rep.D;
  if (rep.threshold > 0) {
    run.results["threshold"] = rep.threshold;
    run.results["D_over_threshold"] = rep.D / rep.threshold;
  }
  run.results["energy"] = rep.energy;
  run.results["energy_predicted"] = rep.c_pred;
  run.results["residual_u"] = rep.residual_u;
  run.results["residual_v"] = rep.residual_v;
  run.results["compat_u"] = rep.compat_u;
  run.results["compat_v"] = rep.compat_v;
  run.results["el_residual"] = rep.el_residual;
  run.results["el_residual_q"] = rep.el_residual_q;
  run.results["constraint_value"] = rep.constraint_value;
  run.results["converged"] = rep.converged;
  json rs = json::array();
  for (const auto& r : rep.restarts)
    rs.push_back({{"init", r.init}, {"D", r.D}, {"iterations", r.iterations}, {"converged", r.converged},
                  {"monotone", r.monotone}});
  run.results["restarts"] = rs;
  run.results["best"] = rep.best;
  run.results["near_best"] = rep.near_best;
}

void cmd_solve(Run& run) {
  const auto pk = resolve_pack(run.cfg);
  auto mesh = Mesh::build(mesh_params(run.cfg));
  auto o = dual_options(run.cfg);
  Clock t;
  if (mesh->ball()) {
    o.S = shoot(pk).S;
    run.timings["shoot_s"] = t.seconds();
  }
  Clock ts;
  auto rep = maximize_D(mesh, pk, o);
  run.timings["solve_s"] = ts.seconds();
  run.results["pack"] = pack_json(pk);
  dual_results(run, rep);
  const double e_rel = std::abs(rep.energy - rep.c_pred) / std::abs(rep.energy);
  run.check("converged", rep.converged);
  run.check("energy = (2/N) D^{-N/2}", e_rel <= 1e-6, e_rel, 1e-6);
  run.check("residual u", rep.residual_u <= 1e-5, rep.residual_u, 1e-5);
  run.check("residual v", rep.residual_v <= 1e-5, rep.residual_v, 1e-5);
  run.check("int |u|^{p-1}u = 0", std::abs(rep.compat_u) <= 1e-8, rep.compat_u, 1e-8);
  run.check("int |v|^{q-1}v = 0", std::abs(rep.compat_v) <= 1e-8, rep.compat_v, 1e-8);
  if (rep.threshold > 0) run.check("D above the compactness threshold", rep.D > rep.threshold, rep.D, rep.threshold);
  run.converged = rep.converged;
  write_trace_csv(run.artifact("trace.csv"), rep);
  write_field_csv(run.artifact("fields.csv"), *mesh, {{"f", &rep.f}, {"g", &rep.g}, {"u", &rep.u}, {"v", &rep.v}});
}

RadialProfile random_profile(int N, double r0, double R, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> np(3, 40);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.2, 1.0);
  const int n = np(rng);
  std::vector<double> vol(n), val(n);
  for (int k = 0; k < n; ++k) {
    vol[k] = ud(rng);
    val[k] = nd(rng);
  }
  const double total = ball_volume(N) * (std::pow(R, N) - std::pow(r0, N));
  double s = 0, mean = 0;
  for (double v : vol) s += v;
  for (int k = 0; k < n; ++k) {
    vol[k] *= total / s;
    mean += vol[k] * val[k];
  }
  for (double& v : val) v -= mean / total;
  auto P = RadialProfile::from_volumes(N, r0, vol, val);
  P.R = R;
  P.edges.back() = R;
  return P;
}

void write_step_csv(const std::string& path, const RadialProfile& P) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os.precision(17);
  os << "r_lo,r_hi,value\n";
  for (size_t k = 0; k < P.values.size(); ++k) os << P.edges[k] << ',' << P.edges[k + 1] << ',' << P.values[k] << '\n';
}

void cmd_symmetry(Run& run) {
  const auto& c = run.cfg;
  if (c.r0 <= 0) throw ConfigError("symmetry runs on an annulus: r0 > 0");
  std::mt19937_64 rng(c.seed);
  double norm_err = 0, pair_excess = 0, idem = 0;
  Clock t;
  for (int k = 0; k < c.pairs; ++k) {
    auto f = random_profile(c.N, c.r0, c.R, rng), g = random_profile(c.N, c.r0, c.R, rng);
    auto fs = star_transform(f), gs = star_transform(g);
    for (double s : {1.0, 1.5, 2.0, 4.0}) norm_err = std::max(norm_err, std::abs(fs.norm(s) / f.norm(s) - 1));
    const double after = radial_pairing(fs, gs);
    pair_excess = std::max(pair_excess, (radial_pairing(f, g) - after) / (std::abs(after) + 1e-3 * f.norm(2) * g.norm(2)));
    idem = std::max(idem, max_difference(star_transform(fs), fs) / f.norm(1));
  }
  run.timings["star_s"] = t.seconds();
  run.results["star"] = {{"pairs", c.pairs}, {"norm_rel_error", norm_err}, {"pairing_excess", pair_excess},
                         {"idempotence", idem}};
  run.check("star preserves L^s norms", norm_err <= 1e-8, norm_err, 1e-8);
  run.check("star raises int f K g", pair_excess <= 1e-8, pair_excess, 1e-8);
  run.check("star is idempotent", idem <= 1e-10, idem, 1e-10);
  if (!c.gap) return;

  const auto pk = resolve_pack(c);
  GapOptions g;
  g.N = c.N;
  g.r0 = c.r0;
  g.R = c.R;
  g.nr = c.nr;
  g.ntheta = c.ntheta;
  g.allow_coarse = c.allow_coarse;
  g.estimate_noise = c.noise;
  g.dual = dual_options(c);
  Clock tg;
  auto sg = symmetry_gap(pk, g);
  run.timings["gap_s"] = tg.seconds();
  auto fs = fs_check(*sg.axi.mesh, sg.axi.u, sg.axi.v);
  run.results["pack"] = pack_json(pk);
  run.results["D"] = sg.D;
  run.results["D_rad"] = sg.D_rad;
  run.results["gap"] = sg.gap;
  run.results["noise"] = sg.noise;
  run.results["axisym_mesh"] = sg.axi.mesh_desc;
  run.results["radial_mesh"] = sg.rad.mesh_desc;
  run.results["fs_check"] = {{"pass", fs.pass},
                             {"orientation", fs.orientation},
                             {"violation", fs.violation},
                             {"violation_u", fs.violation_u},
                             {"violation_v", fs.violation_v},
                             {"radial_spread", fs.radial_spread}};
  run.check("D >= D_rad", sg.D >= sg.D_rad, sg.D - sg.D_rad, 0);
  if (c.noise) run.check("gap exceeds 3x refinement noise", sg.gap > 3 * sg.noise, sg.gap, 3 * sg.noise);
  run.check("axisymmetric optimum is foliated Schwarz symmetric", fs.pass, fs.violation, 1e-4);
  run.check("axisymmetric optimum is not radial", fs.radial_spread > 1e-3, fs.radial_spread, 1e-3);
  run.converged = sg.axi.converged && sg.rad.converged;
  auto Pf = RadialProfile::from_mesh(*sg.rad.mesh, sg.rad.f);
  write_step_csv(run.artifact("radial_f.csv"), Pf);
  write_step_csv(run.artifact("radial_f_star.csv"), star_transform(Pf));
  write_field_csv(run.artifact("axisym_fields.csv"), *sg.axi.mesh, {{"u", &sg.axi.u}, {"v", &sg.axi.v}});
}

void cmd_sweep(Run& run) {
  const auto& c = run.cfg;
  const auto pk = resolve_pack(c);
  Clock t;
  const auto P = shoot(pk);
  run.timings["shoot_s"] = t.seconds();
  run.results["pack"] = pack_json(pk);
  Clock ts;
  if (c.quantity == "ratio") {
    auto mesh = Mesh::build(mesh_params(c));
    const double lo = 1.25 * min_resolved_eps(*mesh, P);
    auto rs = test_function_sweep(mesh, P, eps_grid(c, 10 * lo, lo));
    run.results["mesh"] = mesh->describe();
    run.results["ratio"] = {{"eps", rs.eps},   {"ratio", rs.ratio}, {"threshold", rs.threshold},
                            {"c1", rs.c1},     {"c1_ci", rs.c1_ci}, {"c2", rs.c2},
                            {"c2_ci", rs.c2_ci}, {"fit_rms", rs.fit_rms}, {"model_monotone", rs.model_monotone}};
    run.check("ratio above 2^{2/N}/S at every eps", rs.all_above);
    run.check("linear coefficient positive with CI excluding 0", rs.c1 - rs.c1_ci > 0, rs.c1, rs.c1_ci);
    std::ofstream os(run.artifact("sweep.csv"));
    os.precision(17);
    os << "eps,value,model\n";
    for (size_t k = 0; k < rs.eps.size(); ++k) {
      const double e = rs.eps[k];
      os << e << ',' << rs.ratio[k] << ',' << rs.threshold + rs.c1 * e + rs.c2 * e * e << '\n';
    }
  } else if (c.quantity == "boundary" || c.quantity == "normal") {
    auto bt = boundary_term_sweep(P, eps_grid(c, 1e-4, 1e-8), c.R);
    const auto& rec = c.quantity == "boundary" ? bt.term : bt.normal;
    run.results["sweep"] = fit_json(rec);
    run.results["eps0"] = bt.eps0;
    run.check("boundary term negative on the grid", bt.eps0 > 0);
    if (rec.has_prediction) run.check("slope matches the rate table", rec.pass, rec.slope, rec.predicted.slope);
    write_sweep_csv(run.artifact("sweep.csv"), rec);
  } else {
    auto rec = norm_rate_sweep(P, sweep_quantity_from_string(c.quantity), eps_grid(c, 1e-4, 1e-8));
    run.results["sweep"] = fit_json(rec);
    run.check("slope matches the rate table", rec.pass, rec.slope, rec.predicted.slope);
    run.check("fit residual within the model", !rec.flagged, rec.fit_rms, 0.05);
    write_sweep_csv(run.artifact("sweep.csv"), rec);
  }
  run.timings["sweep_s"] = ts.seconds();
}

void cmd_cherrier(Run& run) {
  const auto& c = run.cfg;
  const auto pk = resolve_pack(c);
  const auto P = shoot(pk);
  auto mesh = Mesh::build(mesh_params(c));
  const auto fam = cherrier_family_from_string(c.family);
  std::vector<double> eps;
  if (fam == CherrierFamily::Boundary) eps = eps_grid(c, 0.02, 0.002);
  if (fam == CherrierFamily::Interior) eps = eps_grid(c, 0.05, 0.005);
  if (fam == CherrierFamily::Random)
    for (int k = 1; k <= c.eps_n; ++k) eps.push_back(k);
  Clock t;
  auto rec = cherrier_probe(mesh, P, fam, eps);
  run.timings["probe_s"] = t.seconds();
  run.results["pack"] = pack_json(pk);
  run.results["mesh"] = mesh->describe();
  run.results["family"] = to_string(rec.family);
  run.results["eta"] = rec.eta;
  run.results["eta_star"] = rec.eta_star;
  run.results["eps"] = rec.eps;
  run.results["lead"] = rec.lead;
  run.results["lower"] = rec.lower;
  run.results["c_lo"] = rec.c_lo;
  run.results["shifted"] = rec.shifted;
  run.results["leading"] = rec.leading;
  run.results["target"] = rec.target;
  run.results["rel_error"] = rec.rel_error;
  run.results["skipped"] = rec.skipped;
  run.results["label"] = rec.label;
  if (!rec.skipped && rec.target > 0)
    run.check("leading constant approaches the sharp value", rec.pass, rec.rel_error, 0.03);
  std::ofstream os(run.artifact("cherrier.csv"));
  os.precision(17);
  os << "eps,lead,lower\n";
  for (size_t k = 0; k < rec.lead.size(); ++k) os << rec.eps[k] << ',' << rec.lead[k] << ',' << rec.lower[k] << '\n';
}

void cmd_verify(Run& run) {
  VerifyOptions o;
  o.quick = run.cfg.quick;
  o.jobs = run.cfg.jobs;
  o.seed = run.cfg.seed;
  json list = json::array();
  for (int id = 1; id <= criterion_count(); ++id) {
    if (o.quick && !criterion_is_quick(id)) continue;
    auto r = run_criterion(id, o);
    std::cout << format_line(r) << std::endl;
    json m = json::object();
    for (const auto& [k, v] : r.metrics) m[k] = v;
    list.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"budget_s", r.budget}, {"detail", r.detail},
                    {"metrics", m}});
    run.timings["criterion_" + std::to_string(id) + "_s"] = r.seconds;
    run.check(std::to_string(id) + " " + r.name, r.pass);
  }
  run.results["criteria"] = list;
}

void write_report(const Run& run, const Clock& total, const std::string& error) {
  json cfg = json::object();
  for (const auto& [k, v] : to_pairs(run.cfg)) cfg[k] = v;
  json rep = json::object();
  rep["version"] = kReportVersion;
  rep["build"] = CRITDUAL_BUILD_ID;
  rep["subcommand"] = run.cfg.subcommand;
  rep["config"] = cfg;
  rep["results"] = run.results;
  rep["invariants"] = run.invariants;
  rep["all_pass"] = error.empty() && run.all_pass();
  if (!error.empty()) rep["error"] = error;
  rep["artifacts"] = run.artifacts;
  json tm = run.timings;
  tm["total_s"] = total.seconds();
  rep["timings"] = tm;
  std::ofstream os(run.dir / "report.json");
  os << rep.dump(2) << '\n';
  std::ofstream(run.dir / "config.txt") << to_text(run.cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual variational solver for critical Lane-Emden Neumann systems"};
  app.require_subcommand(0, 1);  // a config file may name it instead
  std::string config_path;
  app.add_option("--config", config_path, "key=value config file; flags override it");

  // one string slot per config key, applied after the file
  std::map<std::string, std::string> given;
  std::map<std::string, CLI::Option*> opts;
  for (const auto& key : config_keys()) {
    if (key == "subcommand" || key == "quick") continue;
    std::string names = "--" + key;
    std::string dashed = key;
    for (char& ch : dashed)
      if (ch == '_') ch = '-';
    if (dashed != key) names += ",--" + dashed;
    opts[key] = app.add_option(names, given[key], "config key " + key);
  }
  opts["jobs"]->description("cap on parallel restarts");

  const char* subs[][2] = {{"bubble", "ground-state bubble and S"},
                           {"solve", "maximize the dual quotient on a mesh"},
                           {"symmetry", "star transform checks and the symmetry gap"},
                           {"sweep", "eps-asymptotics of the bubble family"},
                           {"probe-cherrier", "Cherrier-type inequality probe"},
                           {"verify", "acceptance suite"}};
  for (auto& s : subs) app.add_subcommand(s[0], s[1])->fallthrough();
  bool quick = false;
  app.get_subcommand("verify")->add_flag("--quick", quick, "only the fast criteria");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }

  Run run;
  Clock total;
  try {
    if (!config_path.empty()) run.cfg = read_config_file(config_path);
    if (const char* env = std::getenv("CRITDUAL_OUT")) run.cfg.out = env;
    for (const auto& [key, opt] : opts)
      if (opt->count() > 0) set_value(run.cfg, key, given[key]);
    if (!app.get_subcommands().empty()) run.cfg.subcommand = app.get_subcommands().front()->get_name();
    else if (config_path.empty()) throw ConfigError("a subcommand is required");
    bool known = false;
    for (auto& s : subs) known = known || run.cfg.subcommand == s[0];
    if (!known) throw ConfigError("unknown subcommand '" + run.cfg.subcommand + "'");
    if (quick) run.cfg.quick = true;
    if (run.cfg.jobs < 1) throw ConfigError("jobs must be at least 1");
    run.dir = run.cfg.out;
    std::filesystem::create_directories(run.dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }

  int rc = kPass;
  std::string error;
  try {
    const auto& s = run.cfg.subcommand;
    if (s == "bubble") cmd_bubble(run);
    else if (s == "solve") cmd_solve(run);
    else if (s == "symmetry") cmd_symmetry(run);
    else if (s == "sweep") cmd_sweep(run);
    else if (s == "probe-cherrier") cmd_cherrier(run);
    else cmd_verify(run);
    if (!run.converged) rc = kConvergence;
    else if (!run.all_pass()) rc = kInvariant;
  } catch (const ConfigError& e) {
    error = std::string("config: ") + e.what();
    rc = kConfig;
  } catch (const ConvergenceError& e) {
    error = std::string("convergence: ") + e.what();
    rc = kConvergence;
  } catch (const ResolutionError& e) {
    error = std::string("resolution: ") + e.what();
    rc = kConfig;
  } catch (const Error& e) {
    error = e.what();
    rc = kInvariant;
  }
  write_report(run, total, error);
  if (!error.empty()) std::cerr << error << '\n';
  for (const auto& i : run.invariants)
    std::cout << (i["pass"].get<bool>() ? "pass  " : "FAIL  ") << i["name"].get<std::string>() << '\n';
  std::cout << "report: " << (run.dir / "report.json").string() << '\n';
  return rc;
}
