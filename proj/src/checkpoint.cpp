#include "vmfflow/checkpoint.hpp"

#include "binary_io.hpp"

namespace vmfflow {

namespace {

constexpr int kSchemaVersion = 1;

void write_model(std::ostream& os, const Model& m) {
  for (const auto& b : m.blocks()) detail::write_f64_le(os, b);
}

void read_model(const std::string& body, std::size_t& offset, Model& m, const std::string& what) {
  for (auto b : m.blocks()) {
    const std::size_t bytes = b.size() * sizeof(double);
    if (offset + bytes > body.size()) throw FormatError(what + ": truncated parameter blob");
    const auto v = detail::decode_f64_le(body.data() + offset, b.size());
    std::copy(v.begin(), v.end(), b.begin());
    offset += bytes;
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto& m = ckpt.model;
  nlohmann::ordered_json h;
  h["schema_version"] = kSchemaVersion;
  h["kind"] = "model";
  h["N"] = m.vocab();
  h["L"] = m.length();
  h["d"] = m.dim();
  h["path"] = m.kind.name();
  h["kappa_max"] = m.kind.kappa_max;
  h["sigma_max"] = m.kind.sigma_max;
  h["time_conditioned"] = m.net.time_conditioned;
  h["hidden"] = m.net.hidden;
  h["norm_convention"] = to_string(m.emb.convention);
  h["steps"] = ckpt.steps;
  h["ema"] = ckpt.ema.has_value();
  h["blocks"] = {"embeddings", "biases", "w1", "b1", "w2", "b2"};
  h["warp"] = {{"n_bins", ckpt.warp.n_bins()},
               {"beta", ckpt.warp.beta()},
               {"logits_in", ckpt.warp.logits_in()},
               {"logits_out", ckpt.warp.logits_out()}};
  auto os = detail::open_out(path);
  os << h.dump() << '\n';
  write_model(os, m);
  if (ckpt.ema) write_model(os, *ckpt.ema);
  if (!os) throw FormatError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto raw = detail::read_raw(path);
  const auto what = path.string();
  const auto h = detail::parse_header(raw.header, what);
  try {
    if (h.at("schema_version").get<int>() != kSchemaVersion || h.at("kind").get<std::string>() != "model") {
      throw FormatError(what + ": not a model checkpoint");
    }
    const auto kind = PathKind::parse(h.at("path").get<std::string>(), h.at("kappa_max").get<double>(),
                                      h.at("sigma_max").get<double>());
    const int n = h.at("N").get<int>(), l = h.at("L").get<int>(), d = h.at("d").get<int>();
    const int hidden = h.at("hidden").get<int>();
    const bool tc = h.at("time_conditioned").get<bool>();
    Model m{kind,
            EmbeddingTable{Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d)),
                           std::vector<double>(static_cast<std::size_t>(n)),
                           parse_convention(h.at("norm_convention").get<std::string>())},
            TinyBackbone::zeros(l, d, hidden, tc)};
    const auto& w = h.at("warp");
    Checkpoint ckpt{m, std::nullopt,
                    WarpSchedule(w.at("logits_in").get<std::vector<double>>(),
                                 w.at("logits_out").get<std::vector<double>>(), w.at("beta").get<double>()),
                    h.at("steps").get<int>()};
    std::size_t offset = 0;
    read_model(raw.body, offset, ckpt.model, what);
    if (h.at("ema").get<bool>()) {
      ckpt.ema = m;
      read_model(raw.body, offset, *ckpt.ema, what);
    }
    if (offset != raw.body.size()) throw FormatError(what + ": trailing bytes after parameters");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

}  // namespace vmfflow
