#pragma once

// Little-endian float64 blobs and single-line JSON headers, shared by the
// table and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmfflow/error.hpp"

namespace vmfflow::detail {

inline void write_f64_le(std::ostream& os, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
      os.write(bytes, 8);
    }
  }
}

inline std::vector<double> decode_f64_le(const char* data, std::size_t count) {
  std::vector<double> out(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), data, count * sizeof(double));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[8 * i + b])) << (8 * b);
      }
      out[i] = std::bit_cast<double>(bits);
    }
  }
  return out;
}

/// Whole file split into its first line (header) and the remaining bytes.
struct RawFile {
  std::string header;
  std::string body;
};

inline RawFile read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto nl = all.find('\n');
  if (nl == std::string::npos) throw FormatError(path.string() + ": missing header line");
  return {all.substr(0, nl), all.substr(nl + 1)};
}

inline nlohmann::ordered_json parse_header(const std::string& line, const std::string& what) {
  try {
    return nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": bad header: " + e.what());
  }
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  return os;
}

}  // namespace vmfflow::detail
