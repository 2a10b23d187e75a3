#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "vmfflow/checkpoint.hpp"
#include "vmfflow/error.hpp"
#include "vmfflow/stats.hpp"
#include "vmfflow/sudoku.hpp"
#include "vmfflow/training.hpp"
#include "vmfflow/verification.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace vmfflow::cli {

namespace {

// Stream indices for the board set and the random-fill baseline, kept away
// from the per-sequence sampler streams.
constexpr std::uint64_t kBoardStream = 0xB0A4D5ULL << 32;
constexpr std::uint64_t kBaselineStream = 0xBA5E11ULL << 32;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path table_dir(const std::string& flag) { return flag.empty() ? default_table_dir() : fs::path(flag); }

std::ofstream open_file(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string() + " for writing");
  return f;
}

// Unit basis vectors scaled to the path's norm convention. Needs d >= n.
EmbeddingTable basis_embeddings(int n, int d, const PathKind& kind) {
  if (d < n) throw InvalidConfig("fixed embeddings need d >= vocabulary size");
  EmbeddingTable emb{Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d), 0.0),
                     std::vector<double>(static_cast<std::size_t>(n), 0.0), convention_for(kind)};
  const double scale = emb.convention == NormConvention::SqrtD ? std::sqrt(static_cast<double>(d)) : 1.0;
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) emb.vectors(k, k) = scale;
  return emb;
}

struct TaskShape {
  int vocab;
  int length;
};

TaskShape task_shape(const std::string& task) {
  if (task == "synthetic") return {3, 2};
  if (task == "mini-sudoku") return {kSudokuVocab, kSudokuCells};
  throw InvalidConfig("unknown task '" + task + "' (synthetic|mini-sudoku)");
}

std::optional<VmfTables> tables_for(const PathKind& kind, int d, const std::string& dir, RunRecord& rec) {
  if (kind.tag != PathTag::VMF) return std::nullopt;
  KernelConfig cfg;
  cfg.d = d;
  cfg.kappa_max = kind.kappa_max;
  const auto base = table_dir(dir);
  if (fs::exists(psi_table_path(base, cfg))) {
    rec.inputs.push_back(psi_table_path(base, cfg).string());
    rec.inputs.push_back(cdf_table_path(base, cfg).string());
  }
  return load_or_build_tables(cfg, base);
}

// ---- sampling setup shared by sample and sweep ------------------------------

struct SamplingSetup {
  std::optional<Model> model;
  std::optional<OracleSource> oracle;
  std::optional<VmfTables> tables;
  std::optional<WarpSchedule> warp;
  std::optional<ModelSource> model_source;
  PathKind kind;
  EmbeddingTable emb;
  std::string task;
  OracleSpec spec = tiny_task_spec();
  MiniSudokuTask boards;
  std::vector<ClueMask> clues;

  const PosteriorSource& source() const {
    return oracle ? static_cast<const PosteriorSource&>(*oracle) : *model_source;
  }
  SamplerContext context() const {
    return {kind, &emb, tables ? &*tables : nullptr, &source(), warp ? &*warp : nullptr, emb.dim()};
  }
};

struct SourceFlags {
  std::string ckpt;
  bool oracle;
  std::string task;
  std::string path;
  double kappa_max;
  double sigma_max;
  bool use_ema;
  int count;
  double clue_fraction;
  std::uint64_t seed;
  std::string tables;
};

std::unique_ptr<SamplingSetup> make_setup(const SourceFlags& f, RunRecord& rec) {
  auto s = std::make_unique<SamplingSetup>();
  s->task = f.task;
  const auto shape = task_shape(f.task);
  if (f.oracle == !f.ckpt.empty()) throw InvalidConfig("give exactly one of --ckpt or --oracle");
  if (f.oracle) {
    if (f.task != "synthetic") throw InvalidConfig("the exact oracle is only available for the synthetic task");
    s->kind = PathKind::parse(f.path, f.kappa_max, f.sigma_max);
    s->emb = basis_embeddings(shape.vocab, 3, s->kind);
    s->oracle.emplace(s->spec, s->kind, s->emb);
  } else {
    rec.inputs.push_back(f.ckpt);
    auto ck = load_checkpoint(f.ckpt);
    if (f.use_ema && !ck.ema) throw InvalidConfig("checkpoint has no EMA copy");
    s->model.emplace(f.use_ema ? *ck.ema : ck.model);
    if (s->model->vocab() != shape.vocab || s->model->length() != shape.length) {
      throw InvalidConfig("checkpoint shape does not match task '" + f.task + "'");
    }
    s->kind = s->model->kind;
    s->emb = s->model->emb;
    s->warp.emplace(ck.warp);
    s->model_source.emplace(*s->model);
  }
  s->tables = tables_for(s->kind, s->emb.dim(), f.tables, rec);
  if (f.task == "mini-sudoku") {
    Rng rng = Rng::stream(f.seed, kBoardStream);
    s->boards = mini_sudoku(f.count, f.clue_fraction, rng);
    for (std::size_t i = 0; i < s->boards.size(); ++i) s->clues.push_back(s->boards.clue_mask(i));
  }
  return s;
}

struct SampleMetrics {
  std::string metric;  // "tv" or "validity"
  double value = 0.0;
  double baseline = std::nan("");
  double mean_entropy = 0.0;
  int nfe = 0;
  long posterior_calls = 0;
};

SampleMetrics run_config(const SamplingSetup& s, const SamplerConfig& cfg, int count,
                         std::vector<SampleResult>* keep) {
  auto ctx = s.context();
  CountingSource counter(s.source());
  ctx.source = &counter;
  auto res = sample_batch(ctx, cfg, count, s.clues);
  SampleMetrics m;
  m.nfe = res.empty() ? 0 : res.front().nfe_used;
  m.posterior_calls = counter.calls();
  for (const auto& r : res) m.mean_entropy += r.terminal_entropy / static_cast<double>(res.size());
  if (s.task == "synthetic") {
    m.metric = "tv";
    m.value = total_variation(decoded_counts(s.spec, res), s.spec.pmf());
  } else {
    m.metric = "validity";
    std::vector<std::vector<int>> boards;
    for (const auto& r : res) boards.push_back(r.tokens);
    m.value = validity_rate(boards);
  }
  if (keep) *keep = std::move(res);
  return m;
}

SamplerConfig parse_flags(const std::string& flags, SamplerConfig cfg) {
  if (flags != "-" && flags != "w" && flags != "d" && flags != "wd") {
    throw InvalidConfig("unknown flag set '" + flags + "' (one of -, w, d, wd)");
  }
  cfg.warp_aware = flags.find('w') != std::string::npos;
  cfg.damping = flags.find('d') != std::string::npos;
  return cfg;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

std::string manifest_name(const std::string& command) { return command + ".manifest.json"; }

// ---- tables -------------------------------------------------------------------

int run_tables(const TablesOpts& o, RunRecord& rec) {
  KernelConfig cfg;
  cfg.d = o.d;
  cfg.kappa_max = o.kappa_max;
  cfg.n_mu = o.n_mu;
  cfg.n_kappa = o.n_kappa;
  cfg.validate();
  const auto dir = table_dir(o.out);
  const auto tables = build_tables(cfg);
  save_table(tables.psi, psi_table_path(dir, cfg));
  save_table(tables.cdf, cdf_table_path(dir, cfg));
  rec.outputs.push_back(psi_table_path(dir, cfg).string());
  rec.outputs.push_back(cdf_table_path(dir, cfg).string());

  std::cout << "wrote " << psi_table_path(dir, cfg).string() << "\n"
            << "wrote " << cdf_table_path(dir, cfg).string() << "\n";
  auto& res = rec.summary["ode_residual"] = ordered_json::object();
  for (double frac : {0.01, 0.1, 1.0}) {
    const double kappa = frac * cfg.kappa_max;
    const double r = psi_ode_residual(tables.psi, kappa);
    res["kappa_" + num(kappa)] = r;
    std::printf("psi ODE residual at kappa=%g: %.3e\n", kappa, r);
  }
  return 0;
}

// ---- selfcheck ----------------------------------------------------------------

int run_selfcheck(const SelfcheckOpts& o, RunRecord& rec) {
  static const std::vector<std::string> suites{"psi", "transport", "scores", "signal", "tv"};
  const bool all = o.suite == "all";
  if (!all && std::find(suites.begin(), suites.end(), o.suite) == suites.end()) {
    throw InvalidConfig("unknown suite '" + o.suite + "'");
  }
  auto want = [&](const char* s) { return all || o.suite == s; };
  const KernelConfig base;
  const std::vector<int> ds{3, 8, 12};
  const std::vector<double> kappas{0.5, 5.0, 50.0};

  std::vector<DiagnosticReport> reports;
  std::optional<VmfTables> d3;
  auto tables_d3 = [&]() -> const VmfTables& {
    if (!d3) d3 = tables_for(PathKind::vmf(base.kappa_max), 3, o.tables, rec);
    return *d3;
  };
  if (want("psi")) {
    reports.push_back(check_psi_ode(ds, kappas, base, 1e-3, o.flip_psi_sign));
    reports.push_back(check_psi_closed_forms(ds, base, o.flip_psi_sign));
    reports.push_back(check_bessel_ratio());
  }
  if (want("transport")) {
    KernelConfig c20 = base;
    c20.kappa_max = 20.0;
    const auto t20 = build_tables(c20);
    reports.push_back(check_vmf_sampling(base, 100000, o.seed));
    reports.push_back(check_flux_transport(t20, 20.0, 100000, 1000, o.seed + 1));
    reports.push_back(check_sphere_continuity(t20, 20.0, 100000, 2000, o.seed + 2));
  }
  if (want("scores")) reports.push_back(check_scores(tables_d3(), o.seed + 3));
  if (want("signal")) reports.push_back(check_signal_curves(base, 20000, o.seed + 4));
  if (want("tv")) {
    const auto cases = default_tv_cases(o.seed + 5);
    reports.push_back(check_sampler_tv(tables_d3(), cases, 20000, o.seed + 5));
  }

  bool ok = true;
  const fs::path out(o.out);
  std::ofstream report;
  if (!o.out.empty()) {
    report = open_file(out / "selfcheck.jsonl");
    rec.outputs.push_back((out / "selfcheck.jsonl").string());
  }
  for (const auto& r : reports) {
    ok = ok && r.passed();
    std::cout << r.to_json() << "\n";
    if (report) report << r.to_json() << "\n";
    rec.summary[r.name] = r.passed();
  }
  std::cout << (ok ? "selfcheck passed" : "selfcheck FAILED") << "\n";
  return ok ? 0 : 1;
}

// ---- train --------------------------------------------------------------------

int run_train(const TrainOpts& o, RunRecord& rec) {
  const auto kind = PathKind::parse(o.path, o.kappa_max, o.sigma_max);
  const auto shape = task_shape(o.task);
  TrainConfig tc;
  tc.steps = o.steps;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.lr;
  tc.momentum = o.momentum;
  if (o.ema_decay >= 0.0) tc.ema_decay = o.ema_decay;
  tc.time_conditioned = o.time_conditioned;
  tc.hidden = o.hidden;
  tc.warp_bins = o.warp_bins;
  tc.warp_step = o.warp_step;
  tc.train_embeddings = !o.fixed_embeddings;
  tc.seed = o.seed;
  tc.validate();
  if (o.log_every < 1) throw InvalidConfig("log_every must be >= 1");

  const auto tables = tables_for(kind, o.d, o.tables, rec);
  Rng init_rng(o.seed);
  Model model = Model::init(kind, shape.vocab, shape.length, o.d, o.hidden, o.time_conditioned, init_rng);
  if (o.fixed_embeddings) model.emb = basis_embeddings(shape.vocab, o.d, kind);
  const OracleSpec spec = tiny_task_spec();
  DataSource data = o.task == "synthetic" ? synthetic_source(spec) : sudoku_source(o.clue_fraction);

  Trainer trainer(tc, std::move(model), tables ? &*tables : nullptr, std::move(data));
  const fs::path out(o.out);
  auto loss_csv = open_file(out / "loss.csv");
  loss_csv << "# manifest: " << manifest_name("train") << "\n" << "step,loss,warp_loss\n";
  rec.outputs.push_back((out / "loss.csv").string());

  double window = 0.0;
  int in_window = 0;
  trainer.run(o.steps, [&](const StepMetrics& m) {
    window += m.loss;
    ++in_window;
    if (m.step % o.log_every == 0 || m.step == o.steps) {
      loss_csv << m.step << "," << num(m.loss) << "," << num(m.warp_loss) << "\n";
      std::fprintf(stderr, "step %d loss %.4f\n", m.step, window / in_window);
      window = 0.0;
      in_window = 0;
    }
  });

  Checkpoint ck{trainer.model(), trainer.ema() ? std::optional<Model>(*trainer.ema()) : std::nullopt,
                trainer.flow_warp(), trainer.steps_done()};
  save_checkpoint(ck, out / "model.ckpt");
  rec.outputs.push_back((out / "model.ckpt").string());

  const auto warp = trainer.flow_warp();
  ordered_json wj{{"manifest", manifest_name("train")},
                  {"n_bins", warp.n_bins()},
                  {"beta", warp.beta()},
                  {"logits_in", warp.logits_in()},
                  {"logits_out", warp.logits_out()},
                  {"input_edges", warp.input_edges()},
                  {"output_edges", warp.output_edges()}};
  open_file(out / "warp.json") << wj.dump(2) << "\n";
  rec.outputs.push_back((out / "warp.json").string());

  if (o.task == "synthetic") {
    const ModelSource src(trainer.model());
    const auto emb = trainer.model().emb;
    const auto grid = midpoint_grid(20);
    const auto cmp = compare_to_oracle(src, spec, kind, emb, tables ? &*tables : nullptr, grid, 200, o.seed + 1);
    rec.summary["heldout_model_ce"] = cmp.model_ce;
    rec.summary["heldout_oracle_ce"] = cmp.oracle_ce;
    rec.summary["heldout_kl"] = cmp.kl;
    std::printf("held-out CE %.5f (oracle %.5f), mean KL %.5f\n", cmp.model_ce, cmp.oracle_ce, cmp.kl);
  }
  open_file(out / "summary.json") << rec.summary.dump(2) << "\n";
  rec.outputs.push_back((out / "summary.json").string());
  return 0;
}

// ---- sample -------------------------------------------------------------------

int run_sample(const SampleOpts& o, RunRecord& rec) {
  if (o.count < 1) throw InvalidConfig("count must be >= 1");
  SamplerConfig cfg;
  cfg.n_predictor = o.n;
  cfg.k_corrector = o.k;
  cfg.epsilon = o.epsilon;
  cfg.warp_aware = o.warp_aware;
  cfg.damping = o.damping;
  cfg.sigma = o.sigma;
  cfg.seed = o.seed;
  const auto setup = make_setup({o.ckpt, o.oracle, o.task, o.path, o.kappa_max, o.sigma_max, o.use_ema,
                                 o.count, o.clue_fraction, o.seed, o.tables},
                                rec);
  cfg.validate(setup->kind);

  std::vector<SampleResult> res;
  auto m = run_config(*setup, cfg, o.count, &res);
  if (o.task == "mini-sudoku") {
    Rng rng = Rng::stream(o.seed, kBaselineStream);
    m.baseline = random_fill_validity(setup->boards, rng);
  }

  const fs::path out(o.out);
  auto jsonl = open_file(out / "samples.jsonl");
  for (std::size_t i = 0; i < res.size(); ++i) {
    ordered_json j{{"index", i},
                   {"tokens", res[i].tokens},
                   {"nfe", res[i].nfe_used},
                   {"terminal_entropy", res[i].terminal_entropy},
                   {"manifest", manifest_name("sample")}};
    jsonl << j.dump() << "\n";
  }
  rec.outputs.push_back((out / "samples.jsonl").string());

  auto csv = open_file(out / "metrics.csv");
  csv << "# manifest: " << manifest_name("sample") << "\n"
      << "path,flags,n,k,epsilon,sigma,nfe,posterior_calls,count,metric,value,baseline,mean_terminal_entropy\n"
      << setup->kind.name() << "," << cfg.flags() << "," << cfg.n_predictor << "," << cfg.k_corrector << ","
      << num(cfg.epsilon) << "," << num(cfg.sigma) << "," << m.nfe << "," << m.posterior_calls << ","
      << o.count << "," << m.metric << "," << num(m.value) << ","
      << (std::isnan(m.baseline) ? std::string() : num(m.baseline)) << "," << num(m.mean_entropy) << "\n";
  rec.outputs.push_back((out / "metrics.csv").string());

  std::printf("%s flags=%s n=%d k=%d nfe=%d %s=%.5f", setup->kind.name().c_str(), cfg.flags().c_str(),
              cfg.n_predictor, cfg.k_corrector, m.nfe, m.metric.c_str(), m.value);
  if (!std::isnan(m.baseline)) std::printf(" random_fill=%.5f", m.baseline);
  std::printf("\n");
  rec.summary[m.metric] = m.value;
  rec.summary["nfe"] = m.nfe;
  return 0;
}

// ---- sweep --------------------------------------------------------------------

int run_sweep(const SweepOpts& o, RunRecord& rec) {
  if (o.count < 1) throw InvalidConfig("count must be >= 1");
  std::vector<std::pair<int, int>> pairs;
  for (const auto& p : o.pairs) {
    int n = 0, k = 0;
    char tail = 0;
    if (std::sscanf(p.c_str(), "%dx%d%c", &n, &k, &tail) != 2) throw InvalidConfig("bad pair '" + p + "' (want NxK)");
    pairs.emplace_back(n, k);
  }
  auto eps = o.epsilons;
  if (o.saturation) eps.push_back(2.0);
  SamplerConfig probe;
  probe.seed = o.seed;

  const auto setup = make_setup({o.ckpt, o.oracle, o.task, o.path, o.kappa_max, o.sigma_max, o.use_ema,
                                 o.count, o.clue_fraction, o.seed, o.tables},
                                rec);
  // Validate every cell before running any of them.
  std::vector<SamplerConfig> cells;
  for (const auto& [n, k] : pairs) {
    for (double e : eps) {
      for (const auto& f : o.flags) {
        SamplerConfig c = parse_flags(f, probe);
        c.n_predictor = n;
        c.k_corrector = k;
        c.epsilon = e;
        c.validate(setup->kind);
        if (c.damping) (void)progress(setup->kind, 0.5);
        cells.push_back(c);
      }
    }
  }

  const fs::path out(o.out);
  auto csv = open_file(out / "sweep.csv");
  csv << "# manifest: " << manifest_name("sweep") << "\n"
      << "n,k,nfe,epsilon,flags,count,metric,value,mean_terminal_entropy\n";
  rec.outputs.push_back((out / "sweep.csv").string());

  struct Best {
    double value;
    double eps;
    std::string flags;
  };
  std::vector<std::optional<Best>> best(pairs.size());
  std::string metric;
  std::size_t cell = 0;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    for (std::size_t ei = 0; ei < eps.size(); ++ei) {
      for (std::size_t fi = 0; fi < o.flags.size(); ++fi, ++cell) {
        const auto& c = cells[cell];
        const auto m = run_config(*setup, c, o.count, nullptr);
        metric = m.metric;
        csv << c.n_predictor << "," << c.k_corrector << "," << c.nfe() << "," << num(c.epsilon) << ","
            << c.flags() << "," << o.count << "," << m.metric << "," << num(m.value) << "," << num(m.mean_entropy)
            << "\n";
        const bool better = !best[pi] || (m.metric == "tv" ? m.value < best[pi]->value : m.value > best[pi]->value);
        if (better) best[pi] = Best{m.value, c.epsilon, c.flags()};
        std::fprintf(stderr, "cell %zu/%zu n=%d k=%d eps=%g flags=%s %s=%.4f\n", cell + 1, cells.size(),
                     c.n_predictor, c.k_corrector, c.epsilon, c.flags().c_str(), m.metric.c_str(), m.value);
      }
    }
  }

  auto summary = open_file(out / "sweep_summary.csv");
  summary << "# manifest: " << manifest_name("sweep") << "\n" << "n,k,nfe,best_epsilon,best_flags," << metric << "\n";
  std::printf("| (n, k) | NFE | best eps | flags | %s |\n|---|---|---|---|---|\n", metric.c_str());
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto& [n, k] = pairs[pi];
    const auto& b = *best[pi];
    summary << n << "," << k << "," << n * (1 + k) << "," << num(b.eps) << "," << b.flags << "," << num(b.value) << "\n";
    std::printf("| (%d, %d) | %d | %g | %s | %.4f |\n", n, k, n * (1 + k), b.eps, b.flags.c_str(), b.value);
  }
  rec.outputs.push_back((out / "sweep_summary.csv").string());
  rec.summary["cells"] = cells.size();
  return 0;
}

// ---- manifests ----------------------------------------------------------------

namespace {

template <class Opts>
Opts from_json_config(const json& config) {
  Opts o = config.get<Opts>();
  return o;
}

fs::path output_dir(const std::string& command, const json& config) {
  if (command == "tables") return table_dir(config.value("out", std::string()));
  return config.value("out", std::string());
}

}  // namespace

int dispatch(const std::string& command, const json& config, const std::vector<std::string>& argv,
             const std::string& replay_of) {
  RunRecord rec;
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = iso_now();
  json resolved;
  int code = 0;
  if (command == "tables") {
    const auto o = from_json_config<TablesOpts>(config);
    resolved = o;
    code = run_tables(o, rec);
  } else if (command == "selfcheck") {
    const auto o = from_json_config<SelfcheckOpts>(config);
    resolved = o;
    code = run_selfcheck(o, rec);
  } else if (command == "train") {
    const auto o = from_json_config<TrainOpts>(config);
    resolved = o;
    code = run_train(o, rec);
  } else if (command == "sample") {
    const auto o = from_json_config<SampleOpts>(config);
    resolved = o;
    code = run_sample(o, rec);
  } else if (command == "sweep") {
    const auto o = from_json_config<SweepOpts>(config);
    resolved = o;
    code = run_sweep(o, rec);
  } else {
    throw InvalidConfig("unknown command '" + command + "'");
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const fs::path dir = output_dir(command, resolved);
  if (dir.empty()) return code;
  std::string name = manifest_name(command);
  if (command == "tables") {
    const auto o = resolved.get<TablesOpts>();
    KernelConfig cfg;
    cfg.d = o.d;
    cfg.kappa_max = o.kappa_max;
    cfg.n_mu = o.n_mu;
    cfg.n_kappa = o.n_kappa;
    name = psi_table_path("", cfg).stem().string().substr(4) + "." + manifest_name(command);
  }
  ordered_json m;
  m["tool"] = "vmfflow";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["argv"] = argv;
  m["config"] = resolved;
  m["seed"] = resolved.contains("seed") ? resolved["seed"] : json();
  m["inputs"] = rec.inputs;
  m["outputs"] = rec.outputs;
  m["summary"] = rec.summary;
  m["exit_code"] = code;
  m["started_at"] = started_at;
  m["wall_clock_seconds"] = seconds;
  if (!replay_of.empty()) m["replay_of"] = replay_of;
  open_file(dir / name) << m.dump(2) << "\n";
  return code;
}

int replay(const fs::path& manifest, const std::string& out) {
  std::ifstream f(manifest);
  if (!f) throw Error("cannot open manifest " + manifest.string());
  json m;
  try {
    f >> m;
  } catch (const json::exception& e) {
    throw FormatError("manifest " + manifest.string() + ": " + e.what());
  }
  if (!m.contains("command") || !m.contains("config")) throw FormatError("manifest lacks command or config");
  json config = m["config"];
  if (!out.empty()) config["out"] = out;
  std::vector<std::string> argv{"replay", manifest.string()};
  if (!out.empty()) {
    argv.push_back("--out");
    argv.push_back(out);
  }
  return dispatch(m["command"].get<std::string>(), config, argv, manifest.string());
}

}  // namespace vmfflow::cli
