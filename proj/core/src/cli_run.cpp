#include "ftstab/cli_run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftstab/cli_outputs.hpp"
#include "ftstab/criteria.hpp"
#include "ftstab/errors.hpp"
#include "ftstab/lmi.hpp"
#include "ftstab/lyapunov.hpp"
#include "ftstab/mcsim.hpp"
#include "ftstab/selftest.hpp"
#include "ftstab/stm.hpp"

namespace ftstab {

namespace {

int log_verbosity() {
  const char* v = std::getenv("FTSTAB_LOG");
  if (v == nullptr) return 0;
  const std::string s(v);
  if (s == "debug" || s == "2") return 2;
  if (s == "info" || s == "1") return 1;
  return 0;
}

void log_line(int level, const std::string& msg) {
  if (log_verbosity() >= level) std::clog << "[ftstab] " << msg << "\n";
}

const char* kind_name(Error::Kind k) {
  switch (k) {
    case Error::Kind::shape: return "shape";
    case Error::Kind::size_limit: return "size_limit";
    case Error::Kind::definiteness: return "definiteness";
    case Error::Kind::contract: return "contract";
    case Error::Kind::validation: return "validation";
    case Error::Kind::io: return "io";
    case Error::Kind::internal: return "internal";
  }
  return "internal";
}

std::vector<double> mat_vec(const Mat& m, std::span<const double> v) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

// Worst deterministic initial state on the eps1 ellipsoid: maximizes the
// analytic E(x_k' R_k x_k) over k. Deterministic starts live in the [x; 0]
// half of the augmented coordinates, so the search restricts each scaled
// Gram to its top-left block.
std::vector<double> worst_initial_state(const PlantParams& plant, const GainPackage& gp,
                                        const FtSpec& spec, const UncRealization& real) {
  const std::size_t n = plant.n();
  const std::vector<StepFactors> factors = scaled_factor_sequence(plant, gp, real, spec);
  double best = -1.0;
  std::vector<double> dir(n, 0.0);
  dir[0] = 1.0;
  for (std::size_t k = 0; k <= spec.T; ++k) {
    const Gram g = gram_adjoint_backward(factors, 0, k);
    const Mat tl = g.value.mat().block(0, 0, n, n);
    const EigResult eg = sym_eig(SymMat(0.5 * (tl + tl.transpose())));
    if (eg.values.front() > best) {
      best = eg.values.front();
      for (std::size_t i = 0; i < n; ++i) dir[i] = eg.vectors(i, 0);
    }
  }
  const SqrtPair sp = psd_sqrt_pair(spec.R[0]);
  std::vector<double> x0 = mat_vec(sp.inv_root.mat(), dir);
  const double scale = std::sqrt(spec.eps1);
  for (double& v : x0) v *= scale;
  return x0;
}

void append_verdict_rows(std::ostringstream& csv, const std::string& name, const Verdict& v) {
  for (const StepReport& s : v.per_step) {
    const bool row_pass = s.margin >= -kCriterionTol * (1.0 + std::abs(s.bound));
    csv << name << "," << s.k << "," << csv_real(s.value) << "," << csv_real(s.bound) << ","
        << csv_real(s.margin) << "," << (row_pass ? 1 : 0) << "\n";
  }
}

std::string trajectories_csv(const TrajectoryBatch& batch, std::size_t max_runs) {
  std::ostringstream csv;
  csv << "run,k";
  for (std::size_t j = 0; j < batch.n; ++j) csv << ",x_" << (j + 1);
  csv << "\n";
  const std::size_t count = std::min(batch.runs(), max_runs);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t k = 0; k <= batch.T; ++k) {
      csv << r << "," << k;
      for (std::size_t j = 0; j < batch.n; ++j) csv << "," << csv_real(batch.states[r](k, j));
      csv << "\n";
    }
  }
  return csv.str();
}

std::string moments_csv(const MomentEstimate& est, std::span<const double> exact) {
  std::ostringstream csv;
  csv << "k,E_xRx,stderr,exact\n";
  for (std::size_t k = 0; k < est.value.size(); ++k) {
    csv << k << "," << csv_real(est.value[k]) << "," << csv_real(est.std_error[k]) << ","
        << csv_real(exact[k]) << "\n";
  }
  return csv.str();
}

std::string paths_chart(const std::string& title, const TrajectoryBatch& batch,
                        std::size_t max_runs) {
  std::vector<Series> series;
  const std::size_t count = std::min(batch.runs(), max_runs);
  for (std::size_t r = 0; r < count; ++r) {
    Series s;
    for (std::size_t k = 0; k <= batch.T; ++k) {
      s.x.push_back(static_cast<double>(k));
      s.y.push_back(batch.states[r](k, 0));
    }
    series.push_back(std::move(s));
  }
  return svg_line_chart(title, series);
}

std::string moments_chart(const std::string& title, const MomentEstimate& est,
                          std::span<const double> exact, double eps2) {
  std::vector<Series> series(3);
  series[0].label = "empirical";
  series[1].label = "exact";
  series[2].label = "bound";
  for (std::size_t k = 0; k < est.value.size(); ++k) {
    const double kk = static_cast<double>(k);
    series[0].x.push_back(kk);
    series[0].y.push_back(est.value[k]);
    series[1].x.push_back(kk);
    series[1].y.push_back(exact[k]);
    series[2].x.push_back(kk);
    series[2].y.push_back(eps2);
  }
  return svg_line_chart(title, series);
}

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> gamma_grid_for(const Config& cfg, const CliOptions& opts) {
  if (opts.gamma) return {*opts.gamma};
  if (!cfg.lmi.gamma_grid.empty()) return cfg.lmi.gamma_grid;
  return default_gamma_grid(cfg.lmi.gamma);
}

SolveParams solve_params_for(const Config& cfg, const CliOptions& opts) {
  SolveParams sp;
  sp.max_iters = cfg.lmi.max_iters;
  sp.tol = cfg.lmi.tol;
  sp.seed = opts.seed.value_or(cfg.mc.seed);
  if (log_verbosity() >= 2) {
    sp.progress = [](std::size_t it, double best, double target) {
      std::clog << "[ftstab] solver iter " << it << " best margin " << best << " target "
                << target << "\n";
    };
  }
  return sp;
}

std::vector<double> initial_state_for(const Config& cfg, const UncRealization& nominal) {
  if (cfg.mc.x0) return *cfg.mc.x0;
  return worst_initial_state(cfg.plant, cfg.controller, cfg.spec, nominal);
}

int cmd_analyze(const Config& cfg, const CliOptions& opts, std::ostream& out) {
  const auto reals = realizations_from(cfg.uncertainty, cfg.controller.q(), cfg.controller.p(),
                                       cfg.spec.T);
  const std::size_t depth_cap = opts.depth_cap.value_or(3);
  std::ostringstream csv;
  csv << "criterion,k,value,bound,margin,pass\n";
  bool all_pass = true;
  for (const NamedRealization& nr : reals) {
    log_line(1, "analyzing realization " + nr.tag);
    const Verdict exact = exact_ft_verdict(cfg.plant, cfg.controller, cfg.spec, nr.real);
    all_pass = all_pass && exact.pass;
    append_verdict_rows(csv, "exact[" + nr.tag + "]", exact);

    const std::pair<GramVariant, const char*> variants[] = {{GramVariant::b, "gram-b"},
                                                            {GramVariant::c, "gram-c"},
                                                            {GramVariant::d, "gram-d"},
                                                            {GramVariant::e, "gram-e"}};
    for (const auto& [variant, name] : variants) {
      const Verdict v = criterion_gram(variant, cfg.plant, cfg.controller, cfg.spec, nr.real);
      append_verdict_rows(csv, std::string(name) + "[" + nr.tag + "]", v);
      if (v.pass != exact.pass) {
        out << "warning: " << name << " disagrees with the exact verdict on " << nr.tag << "\n";
      }
    }
    const Verdict f = criterion_f(cfg.plant, cfg.controller, cfg.spec, nr.real, depth_cap);
    append_verdict_rows(csv, "difference-form[" + nr.tag + "]", f);

    for (const GapEntry& g : spectral_gap_report(cfg.plant, cfg.controller, cfg.spec, nr.real)) {
      csv << "spectral-gap[" << nr.tag << "]," << g.k << "," << csv_real(g.pbar_eig) << ","
          << csv_real(g.gram_eig) << "," << csv_real(g.gram_eig - g.pbar_eig) << ",1\n";
    }

    out << (exact.pass ? "PASS" : "FAIL") << "  " << nr.tag << "  worst step "
        << exact.worst_step << "  margin " << csv_real(exact.worst_margin())
        << (exact.boundary ? "  (boundary)" : "") << "\n";
  }
  OutputSet files;
  files.add("verdicts.csv", csv.str());
  files.write_to(opts.out_dir);
  out << "verdict: " << (all_pass ? "PASS" : "FAIL") << " over " << reals.size()
      << " realization(s)\n";
  return all_pass ? kExitPass : kExitFail;
}

int cmd_simulate(const Config& cfg, const CliOptions& opts, std::ostream& out) {
  if (cfg.uncertainty.kind == UncKind::grid) {
    throw_validation(
        "simulate needs a single realization: configure uncertainty.constant_F or "
        "uncertainty.sequence");
  }
  const auto reals = realizations_from(cfg.uncertainty, cfg.controller.q(), cfg.controller.p(),
                                       cfg.spec.T);
  const UncRealization& real = reals.front().real;
  const std::size_t runs = opts.runs.value_or(cfg.mc.runs);
  const std::uint64_t seed = opts.seed.value_or(cfg.mc.seed);
  const std::vector<double> x0 = initial_state_for(cfg, real);

  const TrajectoryBatch batch = simulate_paths(cfg.plant, cfg.controller, real, cfg.spec, x0,
                                               runs, RngSpec{seed, 0}, cfg.mc.noise);
  const MomentEstimate est = empirical_weighted_moment(batch, cfg.spec.R);
  const std::vector<double> exact =
      exact_second_moment(cfg.plant, cfg.controller, real, cfg.spec, x0);

  OutputSet files;
  files.add("trajectories.csv", trajectories_csv(batch, batch.runs()));
  files.add("moments.csv", moments_csv(est, exact));
  files.write_to(opts.out_dir);

  double emp_max = 0.0, exact_max = 0.0;
  for (std::size_t k = 0; k <= cfg.spec.T; ++k) {
    emp_max = std::max(emp_max, est.value[k]);
    exact_max = std::max(exact_max, exact[k]);
  }
  out << "simulated " << runs << " run(s), " << batch.truncated_runs() << " truncated\n";
  out << "max E(x'Rx): empirical " << csv_real(emp_max) << ", exact " << csv_real(exact_max)
      << ", bound " << csv_real(cfg.spec.eps2) << "\n";
  return kExitPass;
}

int cmd_verify_gains(const Config& cfg, const CliOptions& opts, std::ostream& out) {
  const auto reals = realizations_from(cfg.uncertainty, cfg.controller.q(), cfg.controller.p(),
                                       cfg.spec.T);
  std::ostringstream csv;
  csv << "criterion,k,value,bound,margin,pass\n";
  bool all_pass = true;
  for (const NamedRealization& nr : reals) {
    const Verdict exact = exact_ft_verdict(cfg.plant, cfg.controller, cfg.spec, nr.real);
    all_pass = all_pass && exact.pass;
    append_verdict_rows(csv, "exact[" + nr.tag + "]", exact);
    out << (exact.pass ? "PASS" : "FAIL") << "  " << nr.tag << "  worst step "
        << exact.worst_step << "  margin " << csv_real(exact.worst_margin()) << "\n";
  }

  std::ostringstream rep;
  bool found = false;
  const std::uint64_t seed = opts.seed.value_or(cfg.mc.seed);
  const std::pair<FalsifyStrategy, const char*> plans[] = {
      {FalsifyStrategy::constant_grid, "constant_grid"},
      {FalsifyStrategy::random_sequences, "random_sequences"},
      {FalsifyStrategy::coordinate_ascent, "coordinate_ascent"}};
  for (const auto& [strategy, name] : plans) {
    FalsifyParams fp;
    fp.strategy = strategy;
    fp.budget = strategy == FalsifyStrategy::constant_grid ? 200 : 500;
    fp.seed = seed;
    const FalsifyReport report = falsify_uncertainty(cfg.plant, cfg.controller, cfg.spec, fp);
    rep << name << ": " << report.summary << "\n";
    out << name << ": " << report.summary << "\n";
    if (report.counterexample) {
      found = true;
      const Counterexample& ce = *report.counterexample;
      rep << "counterexample realization (one F per step):\n";
      for (std::size_t k = 0; k < ce.real.steps(); ++k) {
        rep << "k=" << k << ":";
        for (std::size_t i = 0; i < ce.real.F[k].rows(); ++i) {
          rep << (i ? "; " : " ");
          for (std::size_t j = 0; j < ce.real.F[k].cols(); ++j) {
            rep << (j ? " " : "") << csv_real(ce.real.F[k](i, j));
          }
        }
        rep << "\n";
      }
      rep << "violating step " << ce.verdict.worst_step << ", margin "
          << csv_real(ce.verdict.worst_margin()) << "\n";
      break;
    }
  }

  OutputSet files;
  files.add("verdicts.csv", csv.str());
  files.add("falsification.txt", rep.str());
  files.write_to(opts.out_dir);
  const bool ok = all_pass && !found;
  out << "verdict: " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitPass : kExitFail;
}

int cmd_export_sdpa(const Config& cfg, const CliOptions& opts, std::ostream& out) {
  double gamma = 0.0;
  if (opts.gamma) {
    gamma = *opts.gamma;
  } else if (cfg.lmi.gamma) {
    gamma = *cfg.lmi.gamma;
  } else {
    throw_validation("export-sdpa requires a gamma (--gamma flag or lmi.gamma in the config)");
  }
  const LmiProblem pb = assemble_synthesis_lmi(cfg.plant, cfg.spec, cfg.controller.channel(), gamma);
  OutputSet files;
  files.add("problem.dat-s", export_sdpa(pb));
  files.write_to(opts.out_dir);
  out << "wrote problem.dat-s: " << pb.layout.num_vars() << " variables, " << pb.blocks.size()
      << " blocks, gamma " << csv_real(gamma) << "\n";
  return kExitPass;
}

int cmd_synthesize(const Config& cfg, const CliOptions& opts, std::ostream& out) {
  const std::vector<double> grid = gamma_grid_for(cfg, opts);
  const SolveParams sp = solve_params_for(cfg, opts);
  const SynthesisResult res =
      synthesize_gains(cfg.plant, cfg.spec, cfg.controller.channel(), grid, sp);

  std::ostringstream csv;
  csv << "gamma,status,margin\n";
  for (const GammaAttempt& a : res.attempts) {
    csv << csv_real(a.gamma) << ","
        << (a.status == SolveStatus::feasible ? "feasible" : "undecided") << ","
        << csv_real(a.margin) << "\n";
  }
  OutputSet files;
  files.add("synthesis.csv", csv.str());

  bool sound = true;
  if (res.best) {
    nlohmann::json j;
    j["gamma"] = res.best_gamma;
    j["margin"] = res.best->margin;
    j["K1"] = mat_to_json(res.best->K1);
    j["K2"] = mat_to_json(res.best->K2);
    nlohmann::json pseq = nlohmann::json::array();
    for (const SymMat& p : res.best->P_seq) pseq.push_back(mat_to_json(p.mat()));
    j["P"] = std::move(pseq);
    if (res.exact) {
      j["exact_verdict"] = {{"pass", res.exact->pass},
                            {"worst_step", res.exact->worst_step},
                            {"worst_margin", res.exact->worst_margin()}};
      sound = sound && res.exact->pass;
    }
    if (res.falsification) {
      j["falsification"] = {{"evaluations", res.falsification->evaluations},
                            {"found_counterexample", res.falsification->counterexample.has_value()},
                            {"summary", res.falsification->summary}};
      sound = sound && !res.falsification->counterexample;
    }
    files.add("candidate.json", j.dump(2) + "\n");
  }
  files.write_to(opts.out_dir);

  out << res.detail << "\n";
  if (res.exact) {
    out << "exact verdict on the synthesized gains: " << (res.exact->pass ? "PASS" : "FAIL")
        << "\n";
  }
  if (res.falsification) out << "falsification: " << res.falsification->summary << "\n";
  if (!res.certified) return kExitUndecided;
  return sound ? kExitPass : kExitFail;
}

int cmd_reproduce(const Config& cfg, const CliOptions& opts, std::ostream& out) {
  const std::size_t n = cfg.plant.n();
  const std::size_t m = cfg.plant.m();
  const std::uint64_t seed = opts.seed.value_or(cfg.mc.seed);
  const std::size_t runs = opts.runs.value_or(cfg.mc.runs);
  const std::size_t fig_paths = std::min<std::size_t>(runs, 20);
  OutputSet files;

  const UncRealization nominal =
      UncRealization::zero(cfg.controller.q(), cfg.controller.p(), cfg.spec.T);
  const std::vector<double> x0 = initial_state_for(cfg, nominal);

  // Sample paths of the uncontrolled system (gains and channel switched off).
  const GainPackage open_loop(Mat(m, n), Mat(m, n),
                              UncChannel{Mat(m, 1), Mat(1, n), Mat(1, n), 0.0});
  const UncRealization open_nominal = UncRealization::zero(1, 1, cfg.spec.T);
  const TrajectoryBatch open_batch = simulate_paths(cfg.plant, open_loop, open_nominal, cfg.spec,
                                                    x0, fig_paths, RngSpec{seed, 0},
                                                    cfg.mc.noise);
  files.add("fig1_open_loop_paths.csv", trajectories_csv(open_batch, fig_paths));
  files.add("fig1_open_loop_paths.svg",
            paths_chart("open-loop sample paths (first coordinate)", open_batch, fig_paths));
  out << "fig1: " << fig_paths << " open-loop paths, " << open_batch.truncated_runs()
      << " truncated\n";

  // Certificate traces from the synthesis problem, first feasible gamma.
  log_line(1, "solving the synthesis problem for fig2");
  const std::vector<double> grid = gamma_grid_for(cfg, opts);
  const SolveParams sp = solve_params_for(cfg, opts);
  std::optional<Candidate> cert;
  double cert_gamma = 0.0;
  for (const double gamma : grid) {
    const LmiProblem pb = assemble_synthesis_lmi(cfg.plant, cfg.spec, cfg.controller.channel(), gamma);
    const SolveResult r = solve_feasibility(pb, sp);
    if (r.status == SolveStatus::feasible) {
      cert = r.candidate;
      cert_gamma = gamma;
      break;
    }
  }
  {
    std::ostringstream csv;
    csv << "k,trace,eig_min,eig_max\n";
    std::vector<Series> series(1);
    series[0].label = "trace P_k";
    if (cert) {
      for (std::size_t k = 0; k < cert->P_seq.size(); ++k) {
        const Mat& p = cert->P_seq[k].mat();
        double tr = 0.0;
        for (std::size_t i = 0; i < p.rows(); ++i) tr += p(i, i);
        const EigResult eg = sym_eig(cert->P_seq[k]);
        csv << k << "," << csv_real(tr) << "," << csv_real(eg.values.back()) << ","
            << csv_real(eg.values.front()) << "\n";
        series[0].x.push_back(static_cast<double>(k));
        series[0].y.push_back(tr);
      }
    }
    files.add("fig2_feasible_traces.csv", csv.str());
    files.add("fig2_feasible_traces.svg",
              svg_line_chart("certificate traces along the horizon", series));
  }
  if (cert) {
    out << "fig2: certificate at gamma " << csv_real(cert_gamma) << ", margin "
        << csv_real(cert->margin) << "\n";
  } else {
    out << "fig2: no certificate found on the gamma grid (traces empty)\n";
  }

  // Closed-loop paths and the moment evolution under the configured gains.
  const TrajectoryBatch closed_batch = simulate_paths(cfg.plant, cfg.controller, nominal,
                                                      cfg.spec, x0, fig_paths, RngSpec{seed, 0},
                                                      cfg.mc.noise);
  files.add("fig3_closed_loop_paths.csv", trajectories_csv(closed_batch, fig_paths));
  files.add("fig3_closed_loop_paths.svg",
            paths_chart("closed-loop sample paths (first coordinate)", closed_batch, fig_paths));
  out << "fig3: " << fig_paths << " closed-loop paths, " << closed_batch.truncated_runs()
      << " truncated\n";

  log_line(1, "running the moment comparison for fig4");
  const McCheckReport mc = compare_mc_exact(cfg.plant, cfg.controller, nominal, cfg.spec, x0,
                                            runs, RngSpec{seed, fig_paths});
  files.add("fig4_moment_evolution.csv", moments_csv(mc.empirical, mc.exact));
  files.add("fig4_moment_evolution.svg",
            moments_chart("weighted second moment along the horizon", mc.empirical, mc.exact,
                          cfg.spec.eps2));
  out << "fig4: " << runs << " runs, max |z| " << csv_real(mc.max_abs_z) << " ("
      << (mc.pass ? "PASS" : "FAIL") << ")\n";

  bool closed_pass = true;
  for (const NamedRealization& nr :
       realizations_from(cfg.uncertainty, cfg.controller.q(), cfg.controller.p(), cfg.spec.T)) {
    const Verdict v = exact_ft_verdict(cfg.plant, cfg.controller, cfg.spec, nr.real);
    if (!v.pass) {
      closed_pass = false;
      out << "exact verdict FAIL at realization " << nr.tag << "\n";
    }
  }

  files.write_to(opts.out_dir);
  out << "verdict: closed loop " << (closed_pass ? "PASS" : "FAIL") << ", monte carlo "
      << (mc.pass ? "PASS" : "FAIL") << ", certificate "
      << (cert ? "found" : "not found") << "\n";
  if (!closed_pass || !mc.pass) return kExitFail;
  if (!cert) return kExitUndecided;
  return kExitPass;
}

}  // namespace

int execute(const std::string& command, const Config& cfg, const CliOptions& opts,
            std::ostream& out) {
  if (command == "analyze") return cmd_analyze(cfg, opts, out);
  if (command == "synthesize") return cmd_synthesize(cfg, opts, out);
  if (command == "simulate") return cmd_simulate(cfg, opts, out);
  if (command == "verify-gains") return cmd_verify_gains(cfg, opts, out);
  if (command == "export-sdpa") return cmd_export_sdpa(cfg, opts, out);
  if (command == "reproduce-example") return cmd_reproduce(cfg, opts, out);
  if (command == "selftest") return run_selftest(out) ? kExitPass : kExitFail;
  throw_validation("unknown command '" + command +
                   "' (expected analyze, synthesize, simulate, verify-gains, export-sdpa, "
                   "reproduce-example, selftest)");
}

int run_cli(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    if (opts.command == "selftest") {
      return run_selftest(out) ? kExitPass : kExitFail;
    }
    if (opts.config_path.empty()) {
      throw_validation("command '" + opts.command + "' requires --config <path>");
    }
    const Config cfg = load_config_file(opts.config_path);
    return execute(opts.command, cfg, opts, out);
  } catch (const Error& e) {
    nlohmann::json rec;
    rec["error"] = {{"kind", kind_name(e.kind())}, {"message", e.what()}};
    err << rec.dump() << "\n";
    return (e.kind() == Error::Kind::contract || e.kind() == Error::Kind::internal)
               ? kExitInternal
               : kExitInput;
  } catch (const std::exception& e) {
    nlohmann::json rec;
    rec["error"] = {{"kind", "internal"}, {"message", e.what()}};
    err << rec.dump() << "\n";
    return kExitInternal;
  }
}

}  // namespace ftstab
