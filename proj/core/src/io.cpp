#include "expsol/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace expsol {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: parse error: " + std::string(e.what()));
  }
  return j;
}

template <typename T>
T require(const json& j, const std::string& block, const std::string& field) {
  if (!j.contains(field))
    throw std::invalid_argument("config: missing field " + block + "." + field);
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: field " + block + "." + field +
                                " has the wrong type");
  }
}

template <typename T>
void maybe(const json& j, const std::string& block, const std::string& field,
           T& out) {
  if (!j.contains(field)) return;
  try {
    out = j.at(field).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: field " + block + "." + field +
                                " has the wrong type");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::filesystem::path resolve_out_dir(const RunSetup& setup,
                                      const std::string& out_override) {
  if (!out_override.empty()) return out_override;
  if (!setup.out_dir.empty()) return setup.out_dir;
  if (const char* env = std::getenv("EXPSOL_OUT_ROOT")) return env;
  return "runs";
}

json summary_payload(const TrajectoryRecord& record,
                     const AsymptoticReport& report) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["classification"] = to_string(record.classification);
  j["sigma"] = report.sigma;
  j["sigma_uncertainty"] = report.sigma_uncertainty;
  j["sigma_divergent"] = report.divergent;
  j["refined"] = report.refined;
  j["scal_limit"] = report.scal_limit;
  j["cone_scal_coeff"] = report.cone_scal_coeff;
  j["C"] = record.params.C;
  j["fbar"] = record.params.fbar;
  j["seed_t0"] = record.seed.t0;
  j["terminal_event"] = record.run.event_name;
  j["flags"] = record.flags;
  return j;
}

}  // namespace

RunSetup load_run_setup(const std::filesystem::path& config_path) {
  const json j = load_json(config_path);
  RunSetup setup;
  if (!j.contains("problem"))
    throw std::invalid_argument("config: missing field problem");
  const json& p = j.at("problem");
  setup.spec.d = require<std::vector<int>>(p, "problem", "d");
  setup.spec.mu = require<std::vector<double>>(p, "problem", "mu");
  setup.spec.eps = 1.0;
  maybe(p, "problem", "eps", setup.spec.eps);
  setup.spec.validate();

  const bool has_seed = j.contains("seed");
  const bool has_target = j.contains("target");
  if (has_seed == has_target)
    throw std::invalid_argument(
        "config: exactly one of seed / target must be present");
  if (has_seed) {
    const json& s = j.at("seed");
    SeedParams params;
    params.fbar = require<std::vector<double>>(s, "seed", "fbar");
    params.C = require<double>(s, "seed", "C");
    params.validate(setup.spec);
    setup.seed = params;
  } else {
    const json& t = j.at("target");
    ConeSpec cone;
    cone.sigma = require<std::vector<double>>(t, "target", "sigma");
    if (cone.sigma.size() != static_cast<std::size_t>(setup.spec.r()))
      throw std::invalid_argument(
          "config: target.sigma must have one entry per factor");
    setup.target = cone;
    setup.run = shooting_run_config();
  }

  if (j.contains("integrator")) {
    const json& g = j.at("integrator");
    maybe(g, "integrator", "rel_tol", setup.run.rel_tol);
    maybe(g, "integrator", "abs_tol", setup.run.abs_tol);
    maybe(g, "integrator", "l_floor", setup.run.l_floor);
    maybe(g, "integrator", "s_max", setup.run.s_max);
    maybe(g, "integrator", "s_switch", setup.run.s_switch);
    maybe(g, "integrator", "fixed_h", setup.run.fixed_h);
    maybe(g, "integrator", "t0", setup.run.t0);
    std::string engine = "hybrid";
    maybe(g, "integrator", "engine", engine);
    if (engine == "hybrid") {
      setup.run.engine = RunConfig::Engine::Hybrid;
    } else if (engine == "adaptive54") {
      setup.run.engine = RunConfig::Engine::Adaptive54;
    } else if (engine == "fixed4") {
      setup.run.engine = RunConfig::Engine::FixedStepClassic4;
    } else {
      throw std::invalid_argument(
          "config: integrator.engine must be hybrid, adaptive54, or fixed4");
    }
    if (!(setup.run.rel_tol > 0.0 && setup.run.abs_tol > 0.0))
      throw std::invalid_argument(
          "config: integrator.rel_tol and integrator.abs_tol must be positive");
    if (!(setup.run.l_floor > 0.0))
      throw std::invalid_argument("config: integrator.l_floor must be positive");
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    maybe(o, "output", "dir", setup.out_dir);
    maybe(o, "output", "sample_stride", setup.sample_stride);
    if (setup.sample_stride < 1)
      throw std::invalid_argument("config: output.sample_stride must be >= 1");
    setup.run.sample_stride = setup.sample_stride;
  }
  maybe(j, "", "shoot_tol", setup.shoot_tol);
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    setup.sweep_grid = require<std::vector<double>>(s, "sweep", "C_values");
    for (double c : setup.sweep_grid)
      if (!(c < 0.0))
        throw std::invalid_argument("config: sweep.C_values must all be negative");
  }
  return setup;
}

std::string sha256_bytes(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return sha256_bytes(bytes.data(), bytes.size());
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryRecord& record) {
  const SLayout ix = record.layout();
  const int r = record.spec.r();
  std::ostringstream out;
  out << "s,t,L";
  for (int i = 1; i <= r; ++i) out << ",X" << i;
  for (int i = 1; i <= r; ++i) out << ",Y" << i;
  out << ",u,S1,S2,Rcal,Z,conservation_residual\n";
  for (std::size_t k = 0; k < record.n_samples(); ++k) {
    const auto y = record.state(k);
    const Diagnostics& dg = record.diag[k];
    out << fmt17(record.run.samples_s[k]) << ',' << fmt17(y[ix.t()]) << ','
        << fmt17(y[ix.L()]);
    for (int i = 0; i < r; ++i) out << ',' << fmt17(y[ix.X(i)]);
    for (int i = 0; i < r; ++i) out << ',' << fmt17(y[ix.Y(i)]);
    out << ',' << fmt17(y[ix.u()]) << ',' << fmt17(dg.s1) << ','
        << fmt17(dg.s2) << ',' << fmt17(dg.rcal) << ','
        << fmt17(dg.z.value_or(std::nan(""))) << ','
        << fmt17(dg.conservation_residual) << '\n';
  }
  write_text(path, out.str());
}

void write_summary_json(const std::filesystem::path& path,
                        const TrajectoryRecord& record,
                        const AsymptoticReport& report) {
  write_text(path, summary_payload(record, report).dump(2) + "\n");
}

void write_bracket_csv(const std::filesystem::path& path,
                       const std::vector<BracketPoint>& bracket) {
  std::ostringstream out;
  out << "C,sigma1,uncertainty\n";
  for (const BracketPoint& pt : bracket)
    out << fmt17(pt.C) << ',' << fmt17(pt.sigma1) << ','
        << fmt17(pt.uncertainty) << '\n';
  write_text(path, out.str());
}

void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepRow>& rows, int r) {
  std::ostringstream out;
  out << "C";
  for (int i = 1; i <= r; ++i) out << ",sigma" << i;
  out << ",scal_limit,cone_scal_coeff,flags\n";
  for (const SweepRow& row : rows) {
    out << fmt17(row.C);
    for (int i = 0; i < r; ++i)
      out << ','
          << (static_cast<std::size_t>(i) < row.sigma.size()
                  ? fmt17(row.sigma[i])
                  : std::string("nan"));
    out << ',' << fmt17(row.scal_limit) << ',' << fmt17(row.cone_scal_coeff)
        << ',';
    std::string flags;
    if (!row.error.empty()) flags = "error:" + row.error;
    for (const std::string& f : row.flags) {
      if (!flags.empty()) flags += ';';
      flags += f;
    }
    for (char& c : flags)
      if (c == ',' || c == '\n') c = ' ';
    out << flags << '\n';
  }
  write_text(path, out.str());
}

void write_subsystem_csv(const std::filesystem::path& path,
                         const SubTrajectory& trajectory) {
  std::ostringstream out;
  out << "s,X,Y,X_over_Y2,Rcal_sub\n";
  for (std::size_t k = 0; k < trajectory.run.n_samples(); ++k) {
    const auto y = trajectory.run.sample(k);
    out << fmt17(trajectory.run.samples_s[k]) << ',' << fmt17(y[0]) << ','
        << fmt17(y[1]) << ',' << fmt17(y[0] / (y[1] * y[1])) << ','
        << fmt17(rcal_sub(trajectory.d, y[0], y[1])) << '\n';
  }
  write_text(path, out.str());
}

std::string now_iso8601() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest_json(const std::filesystem::path& path,
                         const std::filesystem::path& config_echo,
                         const std::vector<std::filesystem::path>& outputs,
                         const std::string& status,
                         const std::string& started_iso8601,
                         const std::string& finished_iso8601) {
  json j;
  j["artifact_version"] = kArtifactVersion;
  j["schema_version"] = kSchemaVersion;
  j["status"] = status;
  j["started"] = started_iso8601;
  j["finished"] = finished_iso8601;
  if (!config_echo.empty()) {
    std::ifstream in(config_echo);
    if (in) {
      json cfg;
      try {
        in >> cfg;
        j["config"] = cfg;
      } catch (const json::exception&) {
        j["config"] = nullptr;
      }
    }
  }
  json files = json::array();
  for (const auto& p : outputs) {
    json f;
    f["name"] = p.filename().string();
    f["sha256"] = sha256_file(p);
    files.push_back(f);
  }
  j["files"] = files;
  write_text(path, j.dump(2) + "\n");
}

int cmd_integrate(const RunSetup& setup, const std::filesystem::path& config,
                  const std::string& out_override) {
  if (!setup.seed) {
    std::cerr << "integrate: config must contain a seed block\n";
    return 1;
  }
  const std::string started = now_iso8601();
  const std::filesystem::path dir = resolve_out_dir(setup, out_override);
  std::filesystem::create_directories(dir);
  const TrajectoryRecord rec = run_trajectory(setup.spec, *setup.seed, setup.run);
  const AsymptoticReport rep = extract_sigma(rec);
  write_trajectory_csv(dir / "trajectory.csv", rec);
  write_summary_json(dir / "summary.json", rec, rep);
  const int code = rec.accepted() ? 0 : 2;
  write_manifest_json(dir / "manifest.json", config,
                      {dir / "trajectory.csv", dir / "summary.json"},
                      code == 0 ? "ok" : "flagged", started, now_iso8601());
  std::cout << "wrote " << dir.string() << "\n";
  return code;
}

int cmd_shoot(const RunSetup& setup, const std::filesystem::path& config,
              const std::string& out_override) {
  if (!setup.target) {
    std::cerr << "shoot: config must contain a target block\n";
    return 1;
  }
  const std::string started = now_iso8601();
  const std::filesystem::path dir = resolve_out_dir(setup, out_override);
  std::filesystem::create_directories(dir);
  const ShootResult res =
      realize_cone(setup.spec, *setup.target, setup.shoot_tol, setup.run);
  write_bracket_csv(dir / "bracket.csv", res.bracket);
  std::vector<std::filesystem::path> outputs = {dir / "bracket.csv"};
  int code = res.status == ShootStatus::Converged ? 0 : 3;
  if (res.status != ShootStatus::BracketFailure) {
    const TrajectoryRecord rec =
        run_trajectory(setup.spec, res.params, setup.run);
    const AsymptoticReport rep = extract_sigma(rec);
    write_trajectory_csv(dir / "trajectory.csv", rec);
    write_summary_json(dir / "summary.json", rec, rep);
    outputs.push_back(dir / "trajectory.csv");
    outputs.push_back(dir / "summary.json");
  }
  write_manifest_json(dir / "manifest.json", config, outputs,
                      code == 0 ? "ok" : "shoot-failure", started,
                      now_iso8601());
  if (code != 0) std::cerr << "shoot: " << res.message << "\n";
  std::cout << "wrote " << dir.string() << "\n";
  return code;
}

int cmd_sweep(const RunSetup& setup, const std::filesystem::path& config,
              const std::string& out_override, int workers) {
  if (!setup.seed) {
    std::cerr << "sweep: config must contain a seed block\n";
    return 1;
  }
  if (setup.sweep_grid.empty()) {
    std::cerr << "sweep: config must contain sweep.C_values\n";
    return 1;
  }
  const std::string started = now_iso8601();
  const std::filesystem::path dir = resolve_out_dir(setup, out_override);
  std::filesystem::create_directories(dir);
  const std::vector<SweepRow> rows = sweep(setup.spec, setup.seed->fbar,
                                           setup.sweep_grid, workers, setup.run);
  write_sweep_csv(dir / "sweep.csv", rows, setup.spec.r());
  write_manifest_json(dir / "manifest.json", config, {dir / "sweep.csv"}, "ok",
                      started, now_iso8601());
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_subsystem(int d, double offset, const std::string& out_override) {
  const std::string started = now_iso8601();
  std::filesystem::path dir;
  if (!out_override.empty()) {
    dir = out_override;
  } else if (const char* env = std::getenv("EXPSOL_OUT_ROOT")) {
    dir = env;
  } else {
    dir = "runs";
  }
  std::filesystem::create_directories(dir);
  const SubTrajectory traj = unstable_trajectory(d, offset);
  write_subsystem_csv(dir / "subsystem.csv", traj);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["d"] = d;
  j["offset"] = offset;
  j["ratio_at_stop"] = traj.ratio_at_stop;
  j["refined_ratio_at_stop"] = traj.refined_ratio_at_stop;
  j["best_ratio_err"] = traj.ratio_err;
  j["best_refined_ratio_err"] = traj.refined_ratio_err;
  j["rcal_positive_late"] = traj.rcal_positive_late;
  write_text(dir / "summary.json", j.dump(2) + "\n");
  write_manifest_json(dir / "manifest.json", {},
                      {dir / "subsystem.csv", dir / "summary.json"}, "ok",
                      started, now_iso8601());
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_verify(const RunSetup& setup) {
  if (!setup.seed) {
    std::cerr << "verify: config must contain a seed block\n";
    return 1;
  }
  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, const std::string& note) {
    std::cout << (ok ? "PASS  " : "FAIL  ") << name;
    if (!note.empty()) std::cout << "  (" << note << ")";
    std::cout << "\n";
    if (!ok) all_ok = false;
  };

  {
    // Derivative identities at pseudo-random states near the flow's range.
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> uni(0.05, 1.0);
    const SLayout ix(setup.spec.r());
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> y(ix.size());
      for (double& v : y) v = uni(rng);
      double nrm = 0.0;
      for (double v : y) nrm = std::max(nrm, std::abs(v));
      const auto resid = derivative_identities_check(setup.spec, y);
      for (double rr : resid)
        worst = std::max(worst, std::abs(rr) / (1.0 + nrm * nrm * nrm * nrm));
    }
    report("derivative-identities", worst <= 1e-12,
           "worst residual " + fmt17(worst));
  }

  const TrajectoryRecord rec =
      run_trajectory(setup.spec, *setup.seed, setup.run);
  report("conservation", rec.max_residual_over_l2 <=
                             1e-6 * (1.0 + std::abs(setup.seed->C)),
         "max residual/L^2 " + fmt17(rec.max_residual_over_l2));

  {
    // The inequality margins shrink like L^4 and fall below integration
    // noise near deep floors, so this check runs with its own floor.
    RunConfig ineq_run = setup.run;
    ineq_run.l_floor = std::max(ineq_run.l_floor, 1e-2);
    const TrajectoryRecord ineq_rec =
        run_trajectory(setup.spec, *setup.seed, ineq_run);
    const InequalityReport ineq = preserved_inequalities_monitor(ineq_rec);
    report("preserved-inequalities", ineq.all_hold(), "");
  }

  if (rec.classification == SeedRegime::Regular) {
    const ExpanderReport exp = expander_asymptotics_check(rec);
    report("expander-asymptotics", exp.pass(1e-3),
           "Lt error " + fmt17(exp.elt_err));
    const AsymptoticReport rep = extract_sigma(rec);
    bool sane = !rep.low_confidence;
    for (double s : rep.sigma) sane = sane && s > 0.0 && std::isfinite(s);
    report("asymptotic-extraction", sane, "");
  }
  return all_ok ? 0 : 2;
}

}  // namespace expsol
