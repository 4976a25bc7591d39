// wadc: grid modal analysis, DDPG training and evaluation from the shell.

#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

enum Exit { ok = 0, config_error = 1, divergence = 2, io_error = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wide-area damping control toolkit"};
  app.require_subcommand(1);

  std::string config;
  std::string checkpoint;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  for (const char* name : {"analyze", "train", "calibrate", "evaluate", "simulate"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment file (JSON)")->required();  // a missing file is an I/O error, reported below
    sub->add_option("--checkpoint", checkpoint, "trained checkpoint (resume point for train)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }
  app.get_subcommand("analyze")->description("modes, participation factors and generator selection");
  app.get_subcommand("train")->description("train the DDPG controller");
  app.get_subcommand("calibrate")->description("sweep the switching threshold");
  app.get_subcommand("evaluate")->description("controller x environment x delay comparison");
  app.get_subcommand("simulate")->description("raw trajectory for a fixed gain or policy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    auto exp = wadc::cli::load_experiment(config);
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) exp.seed = seed;
    if (sub->count("--out")) exp.output_dir = out;
    wadc::cli::RunOptions opts;
    if (!checkpoint.empty()) opts.checkpoint = checkpoint;
    opts.threads = threads;

    const std::string name = sub->get_name();
    if (name == "analyze") wadc::cli::cmd_analyze(exp, std::cout);
    else if (name == "train") wadc::cli::cmd_train(exp, opts, std::cout);
    else if (name == "calibrate") wadc::cli::cmd_calibrate(exp, opts, std::cout);
    else if (name == "evaluate") wadc::cli::cmd_evaluate(exp, opts, std::cout);
    else wadc::cli::cmd_simulate(exp, opts, std::cout);
  } catch (const wadc::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return divergence;
  } catch (const wadc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io_error;
  } catch (const wadc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  }
  return ok;
}
