#include "qstab/commands.hpp"
#include "qstab/errors.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>

namespace {

std::map<std::string, std::string> parse_params(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw qstab::ScenarioError("--param '" + item + "' must be KEY=VAL");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability analysis of parallel queues with coupled service rates"};
  app.require_subcommand(1);

  qstab::CommonOptions opts;
  std::vector<std::string> params;
  std::string lambda;
  std::string grid;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  std::size_t replicas = 0;
  std::vector<CLI::Option*> seed_opts;
  std::vector<CLI::Option*> horizon_opts;
  CLI::Option* replicas_opt = nullptr;

  auto add_scenario = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--scenario", opts.scenario, "builtin:NAME or a JSON scenario file");
    if (required) opt->required();
    cmd->add_option("--param", params, "KEY=VAL parameter of a built-in scenario");
    cmd->add_option("--tol", opts.tolerances, "KEY=VAL tolerance override");
    seed_opts.push_back(cmd->add_option("--seed", seed, "64-bit seed"));
    cmd->add_option("--out", opts.out, "output file");
  };

  auto* analyze = app.add_subcommand("analyze", "classify one arrival-rate point");
  add_scenario(analyze, true);
  analyze->add_option("--lambda", lambda, "comma-separated arrival rates");

  auto* sweep = app.add_subcommand("sweep", "classify every point of a rate grid");
  add_scenario(sweep, true);
  sweep->add_option("--grid", grid, "MIN:MAX:STEP[,MIN:MAX:STEP]");
  sweep->add_option("--lambda", lambda, "rates fixing the coordinates outside the grid");
  sweep->add_option("--svg", opts.svg, "region map output");
  sweep->add_option("--threads", opts.threads, "worker threads");

  auto* simulate = app.add_subcommand("simulate", "empirical stability probe");
  add_scenario(simulate, true);
  simulate->add_option("--lambda", lambda, "comma-separated arrival rates");
  horizon_opts.push_back(simulate->add_option(
      "--horizon", horizon, "longest simulated time (early window ends at a quarter)"));
  replicas_opt = simulate->add_option("--replicas", replicas, "independent replicas");
  simulate->add_option("--threads", opts.threads, "worker threads");

  auto* couple = app.add_subcommand("couple-check", "ordering check of coupled pairs");
  add_scenario(couple, false);
  couple->add_option("--corpus", opts.corpus, "random, mm1, three_queues or inverted");
  couple->add_option("--pairs", opts.pairs, "number of coupled pairs");
  horizon_opts.push_back(couple->add_option("--horizon", horizon, "events per pair"));
  couple->add_option("--lambda", lambda, "arrival rates for the three_queues corpus");

  auto* three = app.add_subcommand("three-queues", "three-queue conditions and stage reports");
  add_scenario(three, false);
  three->add_option("--lambda", lambda, "lambda_1,lambda_2,lambda_3");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return qstab::exit_code::kUsage;
  }

  try {
    opts.params = parse_params(params);
    if (!lambda.empty()) opts.lambda = lambda;
    if (!grid.empty()) opts.grid = grid;
    for (auto* o : seed_opts)
      if (o->count()) opts.seed = seed;
    for (auto* o : horizon_opts)
      if (o->count()) opts.horizon = horizon;
    if (replicas_opt->count()) opts.replicas = replicas;
    std::function<int(const qstab::CommonOptions&, std::ostream&)> run;
    if (*analyze) run = qstab::cmd_analyze;
    else if (*sweep) run = qstab::cmd_sweep;
    else if (*simulate) run = qstab::cmd_simulate;
    else if (*couple) run = qstab::cmd_couple_check;
    else run = qstab::cmd_three_queues;
    return run(opts, std::cout);
  } catch (const qstab::ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qstab::exit_code::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qstab::exit_code::kInternal;
  }
}
