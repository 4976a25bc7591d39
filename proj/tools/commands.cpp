#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wadc/checkpoint.hpp"
#include "wadc/seed.hpp"

namespace wadc::cli {

namespace {

std::string gen_label(const char* prefix, std::size_t i) { return std::string(prefix) + std::to_string(i + 1); }

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

Mlp require_actor(const RunOptions& opts, const Experiment& exp) {
  if (!opts.checkpoint) throw ConfigError("this command needs --checkpoint");
  Mlp actor = load_actor(Checkpoint::load(*opts.checkpoint));
  if (actor.input_size() != exp.model->observation_size() ||
      actor.output_size() != exp.model->p * exp.model->observation_size())
    throw ConfigError("checkpoint actor does not fit the configured model");
  return actor;
}

csv::Writer trace_table(const std::vector<SubstepRecord>& trace, std::size_t ng) {
  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < ng; ++i) header.push_back(gen_label("theta_", i));
  for (std::size_t i = 0; i < ng; ++i) header.push_back(gen_label("omega_", i));
  header.push_back("scs_on");
  csv::Writer w(header);
  for (const auto& r : trace) {
    std::vector<double> row{r.t};
    row.insert(row.end(), r.theta.data(), r.theta.data() + r.theta.size());
    row.insert(row.end(), r.omega.data(), r.omega.data() + r.omega.size());
    row.push_back(r.scs_on ? 1.0 : 0.0);
    w.add_row(row);
  }
  return w;
}

csv::Writer step_table(const std::vector<StepLog>& steps) {
  csv::Writer w({"t", "r", "P", "scs_on", "max_re_est", "unstable"});
  for (const auto& s : steps)
    w.add_row(std::vector<double>{s.t, s.reward, s.energy, s.scs_on ? 1.0 : 0.0, s.max_real, s.unstable ? 1.0 : 0.0});
  return w;
}

std::string delay_tag(double delay) {
  return std::to_string(static_cast<long long>(std::llround(delay * 1000.0))) + "ms";
}

}  // namespace

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  std::vector<double> out(values.size(), 0.0);
  if (range > 0.0)
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

std::vector<EpisodeStart> evaluation_starts(std::uint64_t seed, std::size_t episodes) {
  std::vector<EpisodeStart> starts;
  for (std::size_t i = 0; i < episodes; ++i) starts.push_back({derive_seed(seed, SeedStream::evaluate, i), std::nullopt});
  return starts;
}

EvaluationSetup cell_setup(const Experiment& exp, bool wide_area, bool nonlinear, double delay) {
  EvaluationSetup s{exp.model, exp.env, exp.controls, std::nullopt};
  s.env.episode_steps = exp.evaluation.episode_steps;
  s.env.noise_std = exp.evaluation.noise_std;
  s.env.eigen_source = exp.evaluation.eigen_source;
  s.controls.wide_area = wide_area;
  s.controls.delay = delay;
  if (nonlinear) s.scenario = nonlinear_scenario(exp);
  return s;
}

AnalyzeReport cmd_analyze(const Experiment& exp, std::ostream& log) {
  const auto& model = *exp.model;
  AnalyzeReport rep;
  rep.modes = participation_factors(model.A);

  std::vector<std::string> header{"re", "im", "f", "zeta"};
  for (std::size_t i = 0; i < model.n_g; ++i) header.push_back(gen_label("participation_", i));
  csv::Writer modes(header);
  for (const auto& m : rep.modes) {
    std::vector<double> row{m.eigenvalue.real(), m.eigenvalue.imag(), m.metrics.natural_frequency,
                            m.metrics.damping_ratio};
    const Vec gp = generator_participation(m, model.n_g);
    row.insert(row.end(), gp.data(), gp.data() + gp.size());
    modes.add_row(row);
    if (m.eigenvalue.imag() > 1e-9) ++rep.oscillatory_pairs;
  }
  ensure_dir(exp.output_dir);
  modes.save(exp.output_dir / "modes.csv");
  log << "modes: " << rep.modes.size() << " (" << rep.oscillatory_pairs << " oscillatory pairs)\n";

  if (rep.oscillatory_pairs == 0) {
    log << "no oscillatory mode; nothing to select\n";
    return rep;
  }
  rep.target = find_interarea_mode(rep.modes);
  const auto& t = rep.modes[rep.target];
  rep.selected = select_controlled_generators(rep.modes, rep.target, std::max<std::size_t>(1, model.p), model.n_g);
  log << "target mode: " << csv::format(t.eigenvalue.real()) << " + " << csv::format(t.eigenvalue.imag())
      << "j, " << csv::format(t.eigenvalue.imag() / (2.0 * std::numbers::pi)) << " Hz, damping ratio "
      << csv::format(t.metrics.damping_ratio) << "\n";
  log << "selected generators:";
  for (auto g : rep.selected) log << ' ' << g + 1;
  log << "\n";
  return rep;
}

std::vector<EpisodeLog> cmd_train(const Experiment& exp, const RunOptions& opts, std::ostream& log) {
  TrainingSession session(exp.model, exp.env, exp.controls, exp.training, exp.seed);
  if (opts.checkpoint) {
    session.restore(Checkpoint::load(*opts.checkpoint));
    log << "resuming after episode " << session.episodes_done() << "\n";
  }
  ensure_dir(exp.output_dir);
  const auto ckpt_path = exp.output_dir / "checkpoint.json";
  const auto log_path = exp.output_dir / "training_log.csv";

  std::vector<EpisodeLog> history;
  try {
    while (!session.finished()) {
      history.push_back(session.run_episode());
      const auto done = session.episodes_done();
      if (exp.training.checkpoint_every > 0 && done % exp.training.checkpoint_every == 0) {
        // periodic snapshots keep their own file so a later failure cannot clobber them
        session.checkpoint().save(exp.output_dir / ("checkpoint_" + std::to_string(done) + ".json"));
        log << "episode " << done << ": return " << csv::format(history.back().total_return) << "\n";
      }
    }
  } catch (const DivergenceError&) {
    training_log_table(history).save(log_path);
    throw;
  }
  training_log_table(history).save(log_path);
  session.checkpoint().save(ckpt_path);
  log << "trained " << history.size() << " episodes; checkpoint " << ckpt_path.string() << "\n";
  return history;
}

CalibrationReport cmd_calibrate(const Experiment& exp, const RunOptions& opts, std::ostream& log) {
  const Policy policy = actor_policy(require_actor(opts, exp));
  const auto& cal = exp.calibration;
  std::vector<EpisodeStart> starts;
  for (std::size_t k = 0; k < cal.trials; ++k)
    starts.push_back({derive_seed(exp.seed, SeedStream::calibrate, k),
                      2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(cal.trials)});

  const std::size_t grid = cal.thresholds.size();
  std::vector<double> raw(grid * cal.trials);
  parallel_for(grid * cal.trials, opts.threads, [&](std::size_t job) {
    const std::size_t g = job / cal.trials;
    const std::size_t k = job % cal.trials;
    EvaluationSetup s = cell_setup(exp, true, false, exp.controls.delay);
    s.env.episode_steps = cal.episode_steps;
    s.controls.scs.threshold = cal.thresholds[g];
    raw[job] = run_episode(s, policy, starts[k]).summary.energy;
  });

  const auto norm = minmax_normalize(raw);
  std::vector<std::string> header{"threshold"};
  for (std::size_t k = 0; k < cal.trials; ++k) header.push_back("trial_" + std::to_string(k + 1));
  header.push_back("mean_global_minmax");
  csv::Writer w(header);

  // Rows sorted by threshold; ties in the mean go to the smaller threshold.
  std::vector<std::size_t> order(grid);
  for (std::size_t g = 0; g < grid; ++g) order[g] = g;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return cal.thresholds[a] < cal.thresholds[b]; });

  CalibrationReport rep;
  rep.mean_normalized.assign(grid, 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g : order) {
    std::vector<double> row{cal.thresholds[g]};
    double mean = 0.0;
    for (std::size_t k = 0; k < cal.trials; ++k) {
      row.push_back(norm[g * cal.trials + k]);
      mean += norm[g * cal.trials + k];
    }
    mean = cal.trials ? mean / static_cast<double>(cal.trials) : 0.0;
    row.push_back(mean);
    w.add_row(row);
    rep.mean_normalized[g] = mean;
    if (mean < best) {
      best = mean;
      rep.best_threshold = cal.thresholds[g];
    }
  }
  ensure_dir(exp.output_dir);
  w.save(exp.output_dir / "calibration.csv");
  log << "calibrated threshold: " << csv::format(rep.best_threshold) << "\n";
  return rep;
}

std::vector<EvaluationCell> cmd_evaluate(const Experiment& exp, const RunOptions& opts, std::ostream& log) {
  const Policy drl = actor_policy(require_actor(opts, exp));
  const Policy none = zero_policy(exp.model->p * exp.model->observation_size());
  const auto starts = evaluation_starts(exp.seed, exp.evaluation.episodes);

  std::vector<EvaluationCell> cells;
  for (const char* controller : {"pss_only", "drl_scs"})
    for (const char* environment : {"linear", "nonlinear"}) {
      if (std::string(environment) == "nonlinear" && !exp.evaluation.nonlinear) continue;
      for (double delay : exp.evaluation.delays) cells.push_back({controller, environment, delay, {}});
    }

  const std::size_t per = starts.size();
  std::vector<EpisodeRecord> records(cells.size() * per);
  parallel_for(records.size(), opts.threads, [&](std::size_t job) {
    const auto& cell = cells[job / per];
    const bool wide = cell.controller == "drl_scs";
    const auto setup = cell_setup(exp, wide, cell.environment == "nonlinear", cell.delay);
    // Only the first episode of a cell keeps its trajectory.
    records[job] = run_episode(setup, wide ? drl : none, starts[job % per], job % per == 0);
  });

  ensure_dir(exp.output_dir);
  csv::Writer summary({"controller", "environment", "delay", "pbar", "settling_time", "peak_omega"});
  csv::Writer episodes({"controller", "environment", "delay", "episode", "return", "pbar", "settling_time",
                        "peak_omega", "unstable"});
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& cell = cells[c];
    double pbar = 0.0, settle = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      const auto& s = records[c * per + k].summary;
      cell.episodes.push_back(s);
      pbar += s.energy;
      settle += s.settling_time;
      peak += s.peak_omega;
      episodes.add_row(std::vector<std::string>{cell.controller, cell.environment, csv::format(cell.delay),
                                                std::to_string(k), csv::format(s.total_return), csv::format(s.energy),
                                                csv::format(s.settling_time), csv::format(s.peak_omega),
                                                s.unstable ? "1" : "0"});
    }
    const double n = per ? static_cast<double>(per) : 1.0;
    summary.add_row(std::vector<std::string>{cell.controller, cell.environment, csv::format(cell.delay),
                                             csv::format(pbar / n), csv::format(per ? settle / n : 0.0),
                                             csv::format(peak / n)});
    if (per)
      trace_table(records[c * per].trace, exp.model->n_g)
          .save(exp.output_dir / ("trajectory_" + cell.controller + "_" + cell.environment + "_" +
                                  delay_tag(cell.delay) + ".csv"));
    log << cell.controller << " " << cell.environment << " delay " << csv::format(cell.delay) << ": mean P "
        << csv::format(pbar / n) << "\n";
  }
  summary.save(exp.output_dir / "summary.csv");
  episodes.save(exp.output_dir / "episodes.csv");
  return cells;
}

void cmd_simulate(const Experiment& exp, const RunOptions& opts, std::ostream& log) {
  const auto& sim = exp.simulation;
  EvaluationSetup setup{exp.model, exp.env, exp.controls, std::nullopt};
  setup.env.episode_steps = sim.steps;
  setup.controls.wide_area = sim.wide_area;
  setup.controls.delay = sim.delay;
  if (sim.nonlinear) setup.scenario = nonlinear_scenario(exp);

  Policy policy;
  if (sim.gain) {
    const Vec action = flatten_gain(*sim.gain, exp.env.k_max);
    if (action.cwiseAbs().maxCoeff() > 1.0) throw ConfigError("simulate.gain exceeds the k_max bound");
    policy = [action](const Vec&) { return action; };
  } else if (opts.checkpoint) {
    policy = actor_policy(require_actor(opts, exp));
  } else {
    policy = zero_policy(exp.model->p * exp.model->observation_size());
  }
  const auto rec = run_episode(setup, policy, {derive_seed(exp.seed, SeedStream::simulate, 0), std::nullopt}, true);
  ensure_dir(exp.output_dir);
  trace_table(rec.trace, exp.model->n_g).save(exp.output_dir / "trajectory.csv");
  step_table(rec.steps).save(exp.output_dir / "steps.csv");
  log << "simulated " << rec.summary.steps << " decisions (" << rec.trace.size() << " samples), P "
      << csv::format(rec.summary.energy) << (rec.summary.unstable ? ", unstable" : "") << "\n";
}

}  // namespace wadc::cli
