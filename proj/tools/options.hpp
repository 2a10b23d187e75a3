#pragma once

// Per-command options. Each struct round-trips through JSON so a manifest
// can replay the exact resolved configuration.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace vmfflow::cli {

struct TablesOpts {
  int d = 3;
  double kappa_max = 50.0;
  int n_mu = 512;
  int n_kappa = 512;
  std::string out;  // directory; empty means the default table dir
};

struct SelfcheckOpts {
  std::string suite = "all";
  std::uint64_t seed = 1;
  std::string tables;
  std::string out;  // optional report directory
  bool flip_psi_sign = false;
};

struct TrainOpts {
  std::string task = "synthetic";
  std::string path = "vmf";
  double kappa_max = 50.0;
  double sigma_max = 10.0;
  int d = 3;
  bool time_conditioned = false;
  int steps = 20000;
  int batch_size = 256;
  double lr = 1e-2;
  double momentum = 0.9;
  double ema_decay = -1.0;  // negative disables the EMA copy
  int hidden = 64;
  int warp_bins = 100;
  double warp_step = 1e-2;
  bool fixed_embeddings = false;
  double clue_fraction = 0.5;
  int log_every = 100;
  std::uint64_t seed = 0;
  std::string tables;
  std::string out = "run";
};

struct SampleOpts {
  std::string ckpt;
  bool oracle = false;
  std::string task = "synthetic";
  std::string path = "vmf";  // oracle only; checkpoints carry their path
  double kappa_max = 50.0;
  double sigma_max = 10.0;
  bool use_ema = false;
  int n = 128;
  int k = 0;
  double epsilon = 1e-3;
  bool warp_aware = false;
  bool damping = false;
  double sigma = 0.0;
  int count = 1000;
  double clue_fraction = 0.5;
  std::uint64_t seed = 0;
  std::string tables;
  std::string out = "samples";
};

struct SweepOpts {
  std::string ckpt;
  bool oracle = false;
  std::string task = "synthetic";
  std::string path = "vmf";
  double kappa_max = 50.0;
  double sigma_max = 10.0;
  bool use_ema = false;
  std::vector<std::string> pairs{"64x1", "32x3", "16x7"};
  std::vector<double> epsilons{1e-3, 1e-2, 1e-1, 1.0};
  bool saturation = false;  // adds epsilon = 2
  std::vector<std::string> flags{"-", "w", "d", "wd"};
  int count = 1000;
  double clue_fraction = 0.5;
  std::uint64_t seed = 0;
  std::string tables;
  std::string out = "sweep";
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TablesOpts, d, kappa_max, n_mu, n_kappa, out)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SelfcheckOpts, suite, seed, tables, out, flip_psi_sign)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainOpts, task, path, kappa_max, sigma_max, d,
                                                time_conditioned, steps, batch_size, lr, momentum,
                                                ema_decay, hidden, warp_bins, warp_step,
                                                fixed_embeddings, clue_fraction, log_every, seed,
                                                tables, out)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SampleOpts, ckpt, oracle, task, path, kappa_max,
                                                sigma_max, use_ema, n, k, epsilon, warp_aware,
                                                damping, sigma, count, clue_fraction, seed, tables,
                                                out)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepOpts, ckpt, oracle, task, path, kappa_max,
                                                sigma_max, use_ema, pairs, epsilons, saturation,
                                                flags, count, clue_fraction, seed, tables, out)

}  // namespace vmfflow::cli
