// vmfflow: table building, self-checks, training, sampling and PC sweeps.
// Exit codes: 0 success, 1 internal error or failed check, 2 invalid
// configuration.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "vmfflow/error.hpp"
#include "vmfflow/exec.hpp"

using namespace vmfflow;
using namespace vmfflow::cli;

namespace {

void add_source_flags(CLI::App* sub, std::string& ckpt, bool& oracle, std::string& task, std::string& path,
                      double& kappa_max, double& sigma_max, bool& use_ema, int& count, double& clue_fraction,
                      std::uint64_t& seed, std::string& tables, std::string& out) {
  sub->add_option("--ckpt", ckpt, "Checkpoint written by train");
  sub->add_flag("--oracle", oracle, "Use the exact Bayes posterior (synthetic task)");
  sub->add_option("--task", task, "synthetic | mini-sudoku")->capture_default_str();
  sub->add_option("--path", path, "vmf | geodesic | vp | ve (oracle only)")->capture_default_str();
  sub->add_option("--kappa-max", kappa_max, "vMF concentration at t = 1 (oracle only)")->capture_default_str();
  sub->add_option("--sigma-max", sigma_max, "VE noise scale at t = 0 (oracle only)")->capture_default_str();
  sub->add_flag("--ema", use_ema, "Sample from the EMA copy of the checkpoint");
  sub->add_option("--count", count, "Sequences per configuration")->capture_default_str();
  sub->add_option("--clue-fraction", clue_fraction, "Mini-Sudoku clue fraction")->capture_default_str();
  sub->add_option("--seed", seed)->capture_default_str();
  sub->add_option("--tables", tables, "Table directory (default $VMFFLOW_TABLE_DIR or ./tables)");
  sub->add_option("--out", out, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vMF flow matching on products of spheres"};
  app.set_config("--config", "", "TOML/INI file; command-line flags take precedence");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)");

  TablesOpts tables_o;
  auto* tables = app.add_subcommand("tables", "Build and write the psi and radial CDF tables");
  tables->add_option("--d", tables_o.d, "Ambient dimension")->capture_default_str();
  tables->add_option("--kappa-max", tables_o.kappa_max)->capture_default_str();
  tables->add_option("--n-mu", tables_o.n_mu)->capture_default_str();
  tables->add_option("--n-kappa", tables_o.n_kappa)->capture_default_str();
  tables->add_option("--out", tables_o.out, "Directory (default $VMFFLOW_TABLE_DIR or ./tables)");

  SelfcheckOpts check_o;
  auto* check = app.add_subcommand("selfcheck", "Run the numerical diagnostics");
  check->add_option("--suite", check_o.suite)
      ->check(CLI::IsMember({"all", "psi", "transport", "scores", "signal", "tv"}))
      ->capture_default_str();
  check->add_option("--seed", check_o.seed)->capture_default_str();
  check->add_option("--tables", check_o.tables, "Table directory");
  check->add_option("--out", check_o.out, "Report directory (selfcheck.jsonl + manifest)");
  check->add_flag("--flip-psi-sign", check_o.flip_psi_sign, "Negate psi before checking")->group("");

  TrainOpts train_o;
  auto* train = app.add_subcommand("train", "Train the posterior model");
  train->add_option("--task", train_o.task, "synthetic | mini-sudoku")->capture_default_str();
  train->add_option("--path", train_o.path, "vmf | geodesic | vp | ve")->capture_default_str();
  train->add_option("--kappa-max", train_o.kappa_max)->capture_default_str();
  train->add_option("--sigma-max", train_o.sigma_max)->capture_default_str();
  train->add_option("--d", train_o.d, "Embedding dimension")->capture_default_str();
  train->add_flag("--time-conditioned", train_o.time_conditioned, "Feed t to the backbone");
  train->add_option("--steps", train_o.steps)->capture_default_str();
  train->add_option("--batch-size", train_o.batch_size)->capture_default_str();
  train->add_option("--lr", train_o.lr)->capture_default_str();
  train->add_option("--momentum", train_o.momentum)->capture_default_str();
  train->add_option("--ema-decay", train_o.ema_decay, "Negative disables the EMA copy")->capture_default_str();
  train->add_option("--hidden", train_o.hidden)->capture_default_str();
  train->add_option("--warp-bins", train_o.warp_bins)->capture_default_str();
  train->add_option("--warp-step", train_o.warp_step)->capture_default_str();
  train->add_flag("--fixed-embeddings", train_o.fixed_embeddings, "Basis-vector embeddings, not trained");
  train->add_option("--clue-fraction", train_o.clue_fraction)->capture_default_str();
  train->add_option("--log-every", train_o.log_every)->capture_default_str();
  train->add_option("--seed", train_o.seed)->capture_default_str();
  train->add_option("--tables", train_o.tables, "Table directory");
  train->add_option("--out", train_o.out, "Output directory")->capture_default_str();

  SampleOpts sample_o;
  auto* sample = app.add_subcommand("sample", "Generate sequences and score them");
  add_source_flags(sample, sample_o.ckpt, sample_o.oracle, sample_o.task, sample_o.path, sample_o.kappa_max,
                   sample_o.sigma_max, sample_o.use_ema, sample_o.count, sample_o.clue_fraction, sample_o.seed,
                   sample_o.tables, sample_o.out);
  sample->add_option("--n", sample_o.n, "Predictor steps")->capture_default_str();
  sample->add_option("--k", sample_o.k, "Corrector steps per predictor step")->capture_default_str();
  sample->add_option("--epsilon", sample_o.epsilon, "Langevin step size")->capture_default_str();
  sample->add_flag("--warp-aware", sample_o.warp_aware, "Predictor times from the learned warp");
  sample->add_flag("--damping", sample_o.damping, "Scale epsilon by (1 - u)^2");
  sample->add_option("--sigma", sample_o.sigma, "SDE diffusion (> 0 selects the SDE sampler)")->capture_default_str();

  SweepOpts sweep_o;
  std::string grid_spec;
  auto* sweep = app.add_subcommand("sweep", "Predictor-corrector sweep at fixed NFE");
  add_source_flags(sweep, sweep_o.ckpt, sweep_o.oracle, sweep_o.task, sweep_o.path, sweep_o.kappa_max,
                   sweep_o.sigma_max, sweep_o.use_ema, sweep_o.count, sweep_o.clue_fraction, sweep_o.seed,
                   sweep_o.tables, sweep_o.out);
  sweep->add_option("--grid-spec", grid_spec, "JSON file with pairs, epsilons, flags, saturation");
  sweep->add_option("--pairs", sweep_o.pairs, "n x k pairs, e.g. 64x1")->capture_default_str();
  sweep->add_option("--epsilons", sweep_o.epsilons)->capture_default_str();
  sweep->add_option("--flags", sweep_o.flags, "Subset of -, w, d, wd")->capture_default_str();
  sweep->add_flag("--saturation", sweep_o.saturation, "Add epsilon = 2");

  std::string replay_path, replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a command from its manifest");
  replay_cmd->add_option("manifest", replay_path)->required();
  replay_cmd->add_option("--out", replay_out, "Redirect outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (threads > 0) set_num_threads(threads);
    if (*replay_cmd) return replay(replay_path, replay_out);
    if (*tables) return dispatch("tables", tables_o, args);
    if (*check) return dispatch("selfcheck", check_o, args);
    if (*train) return dispatch("train", train_o, args);
    if (*sample) return dispatch("sample", sample_o, args);
    if (!grid_spec.empty()) {
      std::ifstream f(grid_spec);
      if (!f) throw InvalidConfig("cannot open grid spec " + grid_spec);
      nlohmann::json g;
      f >> g;
      sweep_o.pairs = g.value("pairs", sweep_o.pairs);
      sweep_o.epsilons = g.value("epsilons", sweep_o.epsilons);
      sweep_o.flags = g.value("flags", sweep_o.flags);
      sweep_o.saturation = g.value("saturation", sweep_o.saturation);
    }
    return dispatch("sweep", sweep_o, args);
  } catch (const InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ScoreUnavailable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ProgressUnavailable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad JSON: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
