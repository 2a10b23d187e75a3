#include <cstdlib>
#include <sstream>

#include "binary_io.hpp"
#include "vmfflow/vmf_kernel.hpp"

namespace vmfflow {

namespace {

constexpr int kSchemaVersion = 1;

nlohmann::ordered_json table_header(const KernelConfig& c, const char* kind) {
  nlohmann::ordered_json h;
  h["schema_version"] = kSchemaVersion;
  h["kind"] = kind;
  h["d"] = c.d;
  h["kappa_max"] = c.kappa_max;
  h["n_mu"] = c.n_mu;
  h["n_kappa"] = c.n_kappa;
  return h;
}

KernelConfig config_from_header(const nlohmann::ordered_json& h, const std::string& kind,
                                const std::string& what) {
  try {
    if (h.at("schema_version").get<int>() != kSchemaVersion) {
      throw FormatError(what + ": unsupported schema_version");
    }
    if (h.at("kind").get<std::string>() != kind) {
      throw FormatError(what + ": expected kind \"" + kind + "\"");
    }
    KernelConfig c;
    c.d = h.at("d").get<int>();
    c.kappa_max = h.at("kappa_max").get<double>();
    c.n_mu = h.at("n_mu").get<int>();
    c.n_kappa = h.at("n_kappa").get<int>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": " + e.what());
  } catch (const InvalidConfig& e) {
    throw FormatError(what + ": " + e.what());
  }
}

std::vector<double> take_blobs(const std::string& body, std::size_t count,
                               const std::string& what) {
  if (body.size() != count * sizeof(double)) {
    throw FormatError(what + ": payload is " + std::to_string(body.size()) + " bytes, expected " +
                      std::to_string(count * sizeof(double)));
  }
  return detail::decode_f64_le(body.data(), count);
}

std::string table_stem(const KernelConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "d" << c.d << "_k" << c.kappa_max << "_" << c.n_mu << "x" << c.n_kappa;
  return os.str();
}

}  // namespace

void save_table(const PsiTable& table, const std::filesystem::path& path) {
  auto os = detail::open_out(path);
  os << table_header(table.config, "psi").dump() << '\n';
  detail::write_f64_le(os, table.values);
  detail::write_f64_le(os, table.bessel_ratio_col);
  if (!os) throw FormatError("write failed: " + path.string());
}

void save_table(const RadialCdfTable& table, const std::filesystem::path& path) {
  auto os = detail::open_out(path);
  os << table_header(table.config, "cdf").dump() << '\n';
  detail::write_f64_le(os, table.log_density);
  detail::write_f64_le(os, table.cdf);
  if (!os) throw FormatError("write failed: " + path.string());
}

PsiTable load_psi_table(const std::filesystem::path& path) {
  const auto raw = detail::read_raw(path);
  const auto what = path.string();
  PsiTable t;
  t.config = config_from_header(detail::parse_header(raw.header, what), "psi", what);
  const std::size_t grid = static_cast<std::size_t>(t.config.n_mu) * t.config.n_kappa;
  auto all = take_blobs(raw.body, grid + t.config.n_kappa, what);
  t.values.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(grid));
  t.bessel_ratio_col.assign(all.begin() + static_cast<std::ptrdiff_t>(grid), all.end());
  return t;
}

RadialCdfTable load_cdf_table(const std::filesystem::path& path) {
  const auto raw = detail::read_raw(path);
  const auto what = path.string();
  RadialCdfTable t;
  t.config = config_from_header(detail::parse_header(raw.header, what), "cdf", what);
  const std::size_t grid = static_cast<std::size_t>(t.config.n_mu) * t.config.n_kappa;
  auto all = take_blobs(raw.body, 2 * grid, what);
  t.log_density.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(grid));
  t.cdf.assign(all.begin() + static_cast<std::ptrdiff_t>(grid), all.end());
  return t;
}

std::filesystem::path psi_table_path(const std::filesystem::path& dir, const KernelConfig& c) {
  return dir / ("psi_" + table_stem(c) + ".tbl");
}

std::filesystem::path cdf_table_path(const std::filesystem::path& dir, const KernelConfig& c) {
  return dir / ("cdf_" + table_stem(c) + ".tbl");
}

VmfTables load_or_build_tables(const KernelConfig& config, const std::filesystem::path& dir) {
  const auto psi_path = psi_table_path(dir, config);
  const auto cdf_path = cdf_table_path(dir, config);
  if (!dir.empty() && std::filesystem::exists(psi_path) && std::filesystem::exists(cdf_path)) {
    VmfTables t{load_psi_table(psi_path), load_cdf_table(cdf_path)};
    // File headers carry only the grid; keep the caller's build parameters.
    t.psi.config = config;
    t.cdf.config = config;
    return t;
  }
  return build_tables(config);
}

std::filesystem::path default_table_dir() {
  if (const char* env = std::getenv("VMFFLOW_TABLE_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "tables";
}

}  // namespace vmfflow
