#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "oracle.hpp"
#include "rng.hpp"

namespace difftv {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  in >> j;

  RunConfig c;
  c.target_path = j.at("target").get<std::string>();
  // target paths are resolved relative to the config file
  const fs::path base = fs::path(path).parent_path();
  if (!fs::path(c.target_path).is_absolute()) {
    c.target_path = (base / c.target_path).string();
  }
  const auto& js = j.at("schedule");
  c.T_list = js.at("T_list").get<std::vector<int>>();
  c.c0 = js.at("c0").get<double>();
  c.c1 = js.at("c1").get<double>();
  if (c.T_list.empty()) throw std::invalid_argument("config: T_list is empty");
  for (std::size_t i = 1; i < c.T_list.size(); ++i) {
    if (c.T_list[i] <= c.T_list[i - 1]) {
      throw std::invalid_argument("config: T_list must be strictly increasing");
    }
  }
  for (const auto& name : j.at("samplers").get<std::vector<std::string>>()) {
    c.samplers.push_back(sampler_from_name(name));
  }
  if (j.contains("density")) {
    const auto& jd = j.at("density");
    c.grid.lo = jd.value("lo", c.grid.lo);
    c.grid.hi = jd.value("hi", c.grid.hi);
    c.grid.n_points = jd.value("n_points", c.grid.n_points);
    c.grid.leak_tol = jd.value("leak_tol", c.grid.leak_tol);
  }
  if (j.contains("oracle")) {
    c.oracle_n = j.at("oracle").value("n", c.oracle_n);
    c.seed = j.at("oracle").value("seed", c.seed);
  }
  c.seed = j.value("seed", c.seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  return c;
}

bool ValidationReport::all_pass() const {
  for (const auto& item : items) {
    if (!item.pass) return false;
  }
  return true;
}

namespace {

// Random typical (t, x) pairs drawn from the forward process itself.
std::vector<std::pair<int, Eigen::VectorXd>> typical_points(const MixtureTarget& target,
                                                            const Schedule& sched, int count,
                                                            std::uint64_t seed) {
  std::vector<std::pair<int, Eigen::VectorXd>> pts;
  CounterRng rng(seed, StreamTag::Oracle, 0xABCD);
  for (int i = 0; i < count; ++i) {
    const int t = 1 + static_cast<int>(rng.uniform(2 * i) * sched.T());
    const int tc = std::min(std::max(t, 1), sched.T());
    const Eigen::MatrixXd x = sample_forward(target, sched, tc, 1, seed + 977 * i + 13);
    pts.emplace_back(tc, x.row(0).transpose());
  }
  return pts;
}

}  // namespace

ValidationReport run_validate(const RunConfig& config) {
  ValidationReport rep;
  MixtureTarget target = MixtureTarget::from_json_file(config.target_path);

  // --- schedule construction + the four learning-rate properties
  std::vector<Schedule> schedules;
  for (int T : config.T_list) {
    ValidationItem item;
    item.name = "schedule_properties_T" + std::to_string(T);
    try {
      Schedule s = Schedule::build({T, config.c0, config.c1});
      const auto pr = s.verify_properties();
      item.pass = pr.all_pass();
      std::ostringstream os;
      os << "margins a=" << pr.a.margin << " b=" << pr.b.margin << " c=" << pr.c.margin
         << " d=" << pr.d.margin;
      item.detail = os.str();
      schedules.push_back(std::move(s));
    } catch (const std::exception& e) {
      item.pass = false;
      item.detail = e.what();
    }
    rep.items.push_back(std::move(item));
  }
  if (schedules.empty()) return rep;
  const Schedule& sched = schedules.back();  // largest valid T

  // --- oracle agreement: closed-form conditionals vs Monte Carlo at 4 SE
  {
    ValidationItem item;
    item.name = "oracle_agreement";
    double worst_z = 0.0;
    std::string worst;
    const auto pts = typical_points(target, sched, 20, config.seed);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const auto& [t, x] = pts[p];
      const MomentBundle m = moments(target, sched, t, x);
      struct Case {
        OracleFunctional fn;
        Eigen::MatrixXd closed;
        const char* name;
      };
      std::vector<Case> cases = {
          {OracleFunctional::G, m.g, "g"},
          {OracleFunctional::NoiseCov, m.noise_cov, "noise_cov"},
          {OracleFunctional::WCorr, m.w_corr, "w_corr"},
      };
      for (const auto& c : cases) {
        const OracleEstimate est = mc_conditional(target, sched, t, x, c.fn, config.oracle_n,
                                                  config.seed + 31 * p);
        for (int i = 0; i < est.value.rows(); ++i) {
          for (int jc = 0; jc < est.value.cols(); ++jc) {
            const double se = std::max(est.std_error(i, jc), 1e-14);
            const double z = std::abs(est.value(i, jc) - c.closed(i, jc)) / se;
            if (z > worst_z) {
              worst_z = z;
              worst = std::string(c.name) + " at point " + std::to_string(p);
            }
          }
        }
      }
    }
    item.pass = worst_z <= 4.0;
    item.detail = "max |z| = " + fmt(worst_z) + (worst.empty() ? "" : " (" + worst + ")");
    rep.items.push_back(std::move(item));
  }

  // --- analytic Jacobian vs central differences
  {
    ValidationItem item;
    item.name = "jacobian_fd";
    double worst = 0.0;
    const auto pts = typical_points(target, sched, 50, config.seed ^ 0x5151);
    for (const auto& [t, x] : pts) {
      const MomentBundle m = moments(target, sched, t, x);
      const Eigen::MatrixXd fd = score_jacobian_fd(target, sched, t, x);
      const double scale = std::max(1.0, m.jac.cwiseAbs().maxCoeff());
      worst = std::max(worst, (fd - m.jac).cwiseAbs().maxCoeff() / scale);
    }
    item.pass = worst <= 1e-6;
    item.detail = "max relative error = " + fmt(worst);
    rep.items.push_back(std::move(item));
  }

  // --- accelerated DDPM: score/v_t form vs Jacobian kernel form
  {
    ValidationItem item;
    item.name = "ddpm_accel_form_equivalence";
    double worst = 0.0;
    const auto pts = typical_points(target, sched, 100, config.seed ^ 0x77);
    CounterRng zr(config.seed, StreamTag::Oracle, 0xFEED);
    int ctr = 0;
    for (const auto& [t, x] : pts) {
      Eigen::VectorXd z(target.dim());
      for (int i = 0; i < target.dim(); ++i) z[i] = zr.normal(ctr++);
      const MomentBundle m = moments(target, sched, t, x);
      const StepContext ctx = make_step_context(sched, m);
      const Eigen::VectorXd a = ddpm_accel_step(x, z, ctx);
      const Eigen::VectorXd b = ddpm_accel_step_kernel(x, z, ctx);
      worst = std::max(worst, (a - b).lpNorm<Eigen::Infinity>() /
                                  std::max(1.0, a.lpNorm<Eigen::Infinity>()));
    }
    item.pass = worst <= 1e-12;
    item.detail = "max relative gap = " + fmt(worst);
    rep.items.push_back(std::move(item));
  }

  // --- write the JSON report
  ordered_json jr;
  jr["target"] = config.target_path;
  jr["schedule"] = {{"c0", config.c0}, {"c1", config.c1}, {"T_list", config.T_list}};
  jr["checks"] = ordered_json::array();
  for (const auto& item : rep.items) {
    jr["checks"].push_back({{"name", item.name}, {"pass", item.pass}, {"detail", item.detail}});
  }
  jr["all_pass"] = rep.all_pass();
  write_text(fs::path(config.output_dir) / "validation_report.json", jr.dump(2) + "\n");
  return rep;
}

ConvergenceReport run_sweep(const RunConfig& config) {
  MixtureTarget target = MixtureTarget::from_json_file(config.target_path);
  if (target.dim() != 1) {
    throw std::invalid_argument("sweep: the grid engine requires a d = 1 target");
  }
  const Mixture1D mix = Mixture1D::from(target);

  ConvergenceReport report;
  for (int T : config.T_list) {
    const Schedule sched = Schedule::build({T, config.c0, config.c1});
    {
      std::ostringstream os;
      sched.write_csv(os);
      write_text(fs::path(config.output_dir) / ("schedule_T" + std::to_string(T) + ".csv"),
                 os.str());
    }
    const DensityGrid q1 = analytic_grid(mix, sched.alpha_bar(1), config.grid);
    for (SamplerKind kind : config.samplers) {
      const DensityGrid p1 = sampler_is_stochastic(kind)
                                 ? propagate_stochastic(mix, sched, kind, config.grid)
                                 : pushforward_deterministic(mix, sched, kind, config.grid);
      const TvResult tv = tv_distance(p1, q1);
      const KlResult kl = kl_divergence(q1, p1);
      ConvergenceRow row;
      row.T = T;
      row.kind = sampler_name(kind);
      row.tv = tv.raw;
      row.tv_corrected = tv.corrected;
      row.kl = kl.value;
      row.grid_points = config.grid.n_points;
      row.leaked_mass = p1.leaked_mass_bound;
      report.rows.push_back(std::move(row));
    }
  }

  for (SamplerKind kind : config.samplers) {
    ConvergenceReport::SamplerFit sf;
    sf.kind = sampler_name(kind);
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : report.rows) {
      if (row.kind == sf.kind && row.tv_corrected > 0.0) {
        pts.emplace_back(static_cast<double>(row.T), row.tv_corrected);
      }
    }
    if (pts.size() >= 3) {
      sf.fit = fit_rate(pts);
      sf.fitted = true;
    }
    report.slopes.push_back(std::move(sf));
  }
  pinsker_check(report);
  write_report_files(report, config);
  return report;
}

void write_report_files(const ConvergenceReport& report, const RunConfig& config) {
  const fs::path dir(config.output_dir);

  std::ostringstream csv;
  csv << "T,kind,tv,tv_corrected,kl,grid_points,leaked_mass\n";
  for (const auto& r : report.rows) {
    csv << r.T << ',' << r.kind << ',' << fmt(r.tv) << ',' << fmt(r.tv_corrected) << ','
        << fmt(r.kl) << ',' << r.grid_points << ',' << fmt(r.leaked_mass) << '\n';
  }
  write_text(dir / "report.csv", csv.str());

  ordered_json jr;
  jr["target"] = config.target_path;
  jr["schedule"] = {{"c0", config.c0}, {"c1", config.c1}, {"T_list", config.T_list}};
  jr["grid"] = {{"lo", config.grid.lo},
                {"hi", config.grid.hi},
                {"n_points", config.grid.n_points},
                {"leak_tol", config.grid.leak_tol}};
  jr["rows"] = ordered_json::array();
  for (const auto& r : report.rows) {
    jr["rows"].push_back({{"T", r.T},
                          {"kind", r.kind},
                          {"tv", r.tv},
                          {"tv_corrected", r.tv_corrected},
                          {"kl", r.kl},
                          {"grid_points", r.grid_points},
                          {"leaked_mass", r.leaked_mass}});
  }
  jr["slopes"] = ordered_json::array();
  for (const auto& s : report.slopes) {
    ordered_json js = {{"kind", s.kind}, {"fitted", s.fitted}};
    if (s.fitted) {
      js["slope"] = s.fit.slope;
      js["intercept"] = s.fit.intercept;
      js["residual_rms"] = s.fit.residual_rms;
      js["excluded_smallest_T"] = s.fit.excluded_smallest;
    }
    jr["slopes"].push_back(js);
  }
  jr["pinsker_all_ok"] = report.pinsker_all_ok;
  write_text(dir / "report.json", jr.dump(2) + "\n");

  // per-sampler log-log plot data
  for (const auto& s : report.slopes) {
    std::ostringstream os;
    os << "T,tv_corrected,log_T,log_tv\n";
    for (const auto& r : report.rows) {
      if (r.kind != s.kind || !(r.tv_corrected > 0.0)) continue;
      os << r.T << ',' << fmt(r.tv_corrected) << ',' << fmt(std::log(r.T)) << ','
         << fmt(std::log(r.tv_corrected)) << '\n';
    }
    write_text(dir / ("plot_" + s.kind + ".csv"), os.str());
  }
}

namespace {

// Minimal log-log polyline SVG; no plotting dependencies.
std::string render_svg(const ConvergenceReport& report) {
  const int W = 640, H = 480, ML = 70, MR = 20, MT = 20, MB = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& r : report.rows) {
    if (!(r.tv_corrected > 0.0)) continue;
    xmin = std::min(xmin, std::log10(static_cast<double>(r.T)));
    xmax = std::max(xmax, std::log10(static_cast<double>(r.T)));
    ymin = std::min(ymin, std::log10(r.tv_corrected));
    ymax = std::max(ymax, std::log10(r.tv_corrected));
  }
  if (!(xmax > xmin)) return "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n";
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  auto X = [&](double lx) { return ML + (lx - xmin) / (xmax - xmin) * (W - ML - MR); };
  auto Y = [&](double ly) { return H - MB - (ly - ymin) / (ymax - ymin) * (H - MT - MB); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\""
     << H - MB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
     << "\" stroke=\"black\"/>\n";
  // y ticks at integer powers of ten
  for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
    const double y = Y(e);
    os << "<line x1=\"" << ML - 4 << "\" y1=\"" << y << "\" x2=\"" << ML << "\" y2=\"" << y
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ML - 8 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-size=\"12\">1e" << e << "</text>\n";
  }
  // x ticks at the measured T values
  std::vector<int> ts;
  for (const auto& r : report.rows) {
    if (std::find(ts.begin(), ts.end(), r.T) == ts.end()) ts.push_back(r.T);
  }
  std::sort(ts.begin(), ts.end());
  for (int T : ts) {
    const double x = X(std::log10(static_cast<double>(T)));
    os << "<line x1=\"" << x << "\" y1=\"" << H - MB << "\" x2=\"" << x << "\" y2=\""
       << H - MB + 4 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << H - MB + 18
       << "\" text-anchor=\"middle\" font-size=\"12\">" << T << "</text>\n";
  }
  os << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 12
     << "\" text-anchor=\"middle\" font-size=\"13\">steps T (log scale)</text>\n";
  os << "<text x=\"16\" y=\"" << (MT + H - MB) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (MT + H - MB) / 2 << ")\">TV(q1, p1) (log scale)</text>\n";

  int ci = 0;
  for (const auto& s : report.slopes) {
    std::ostringstream pts;
    for (const auto& r : report.rows) {
      if (r.kind != s.kind || !(r.tv_corrected > 0.0)) continue;
      pts << X(std::log10(static_cast<double>(r.T))) << ',' << Y(std::log10(r.tv_corrected))
          << ' ';
    }
    const char* color = colors[ci % 4];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
       << pts.str() << "\"/>\n";
    os << "<text x=\"" << W - MR - 6 << "\" y=\"" << MT + 16 * (ci + 1)
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">" << s.kind
       << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

int run_report(const std::string& results_dir, std::string* rendered_table) {
  const fs::path dir(results_dir);
  const fs::path jpath = dir / "report.json";
  if (!fs::exists(jpath)) {
    throw std::runtime_error("report: missing " + jpath.string() +
                             " (expected report.json and report.csv from a sweep)");
  }
  std::ifstream in(jpath);
  nlohmann::json j;
  in >> j;

  ConvergenceReport rep;
  for (const auto& jr : j.at("rows")) {
    ConvergenceRow r;
    r.T = jr.at("T").get<int>();
    r.kind = jr.at("kind").get<std::string>();
    r.tv = jr.at("tv").get<double>();
    r.tv_corrected = jr.at("tv_corrected").get<double>();
    r.kl = jr.at("kl").get<double>();
    r.grid_points = jr.at("grid_points").get<int>();
    r.leaked_mass = jr.at("leaked_mass").get<double>();
    rep.rows.push_back(std::move(r));
  }
  for (const auto& js : j.at("slopes")) {
    ConvergenceReport::SamplerFit sf;
    sf.kind = js.at("kind").get<std::string>();
    sf.fitted = js.at("fitted").get<bool>();
    if (sf.fitted) {
      sf.fit.slope = js.at("slope").get<double>();
      sf.fit.intercept = js.at("intercept").get<double>();
      sf.fit.residual_rms = js.at("residual_rms").get<double>();
      sf.fit.excluded_smallest = js.at("excluded_smallest_T").get<bool>();
    }
    rep.slopes.push_back(std::move(sf));
  }
  rep.pinsker_all_ok = j.at("pinsker_all_ok").get<bool>();

  std::ostringstream os;
  os << "sampler       slope      residual_rms  excluded_T_min\n";
  auto slope_of = [&](const std::string& kind) -> const ConvergenceReport::SamplerFit* {
    for (const auto& s : rep.slopes) {
      if (s.kind == kind) return &s;
    }
    return nullptr;
  };
  for (const auto& s : rep.slopes) {
    char line[128];
    if (s.fitted) {
      std::snprintf(line, sizeof(line), "%-12s %9.4f  %12.4g  %s\n", s.kind.c_str(), s.fit.slope,
                    s.fit.residual_rms, s.fit.excluded_smallest ? "yes" : "no");
    } else {
      std::snprintf(line, sizeof(line), "%-12s %9s  %12s  %s\n", s.kind.c_str(), "-", "-",
                    "(fewer than 3 points; fit skipped)");
    }
    os << line;
  }
  const auto* op = slope_of("ODE_PLAIN");
  const auto* oa = slope_of("ODE_ACCEL");
  const auto* dp = slope_of("DDPM_PLAIN");
  const auto* da = slope_of("DDPM_ACCEL");
  if (op && oa && op->fitted && oa->fitted) {
    os << "ODE accel - plain slope gap:  " << fmt(oa->fit.slope - op->fit.slope) << '\n';
  }
  if (dp && da && dp->fitted && da->fitted) {
    os << "DDPM accel - plain slope gap: " << fmt(da->fit.slope - dp->fit.slope) << '\n';
  }
  os << "pinsker_all_ok: " << (rep.pinsker_all_ok ? "true" : "false") << '\n';

  write_text(dir / "tv_rates.svg", render_svg(rep));
  if (rendered_table) {
    *rendered_table = os.str();
  } else {
    std::fputs(os.str().c_str(), stdout);
  }
  return 0;
}

void dump_samples(const MixtureTarget& target, const Schedule& sched, const SamplerSpec& spec,
                  int n, const std::string& csv_path, const std::string& meta_path,
                  const std::string& target_name) {
  const ReverseRun run = run_reverse(target, sched, spec, n);
  std::ostringstream csv;
  for (int i = 0; i < run.endpoints.rows(); ++i) {
    for (int j = 0; j < run.endpoints.cols(); ++j) {
      if (j) csv << ',';
      csv << fmt(run.endpoints(i, j));
    }
    csv << '\n';
  }
  write_text(csv_path, csv.str());

  ordered_json meta;
  meta["target"] = target_name;
  meta["schedule"] = {{"T", sched.T()}, {"c0", sched.params().c0}, {"c1", sched.params().c1}};
  meta["sampler"] = sampler_name(spec.kind);
  meta["seed"] = spec.base_seed;
  meta["n"] = n;
  meta["failures"] = run.failures;
  write_text(meta_path, meta.dump(2) + "\n");
}

}  // namespace difftv
