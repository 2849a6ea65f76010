#pragma once

// Self-describing binary container, CSV writers and content digests.
//
// Container layout (little endian):
//   8 bytes  magic "SIDCONT\0"
//   uint32   format version
//   uint64   header length L
//   L bytes  JSON header: kind, grid metadata, array names and lengths
//   doubles  arrays in header order; complex values interleaved (re, im)

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "sid/classical.hpp"
#include "sid/common.hpp"
#include "sid/spectral.hpp"
#include "sid/wigner.hpp"

namespace sid::io {

using Json = nlohmann::ordered_json;

inline constexpr char kMagic[8] = {'S', 'I', 'D', 'C', 'O', 'N', 'T', '\0'};
inline constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Container {
  Json header;                                // "kind" plus metadata
  std::vector<std::pair<std::string, std::vector<double>>> arrays;

  const std::vector<double>& array(const std::string& name) const {
    for (const auto& [n, a] : arrays)
      if (n == name) return a;
    throw FormatError("container has no array '" + name + "'");
  }
};

inline std::string serialize(const Container& c) {
  Json header = c.header;
  header["arrays"] = Json::array();
  for (const auto& [name, data] : c.arrays) header["arrays"].push_back({{"name", name}, {"length", data.size()}});
  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  const std::uint32_t version = kVersion;
  const std::uint64_t length = text.size();
  put(&version, sizeof version);
  put(&length, sizeof length);
  out += text;
  for (const auto& [name, data] : c.arrays) put(data.data(), data.size() * sizeof(double));
  return out;
}

inline Container deserialize(const std::string& bytes) {
  std::size_t pos = 0;
  auto take = [&](void* p, std::size_t n) {
    if (pos + n > bytes.size()) throw FormatError("container is truncated");
    std::memcpy(p, bytes.data() + pos, n);
    pos += n;
  };
  char magic[8];
  take(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError("not a container file (bad magic)");
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  take(&version, sizeof version);
  if (version != kVersion) throw FormatError("unsupported container version " + std::to_string(version));
  take(&length, sizeof length);
  if (pos + length > bytes.size()) throw FormatError("container header is truncated");
  Container c;
  try {
    c.header = Json::parse(bytes.substr(pos, length));
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("container header: ") + e.what());
  }
  pos += length;
  for (const auto& a : c.header.at("arrays")) {
    std::vector<double> data(a.at("length").get<std::size_t>());
    take(data.data(), data.size() * sizeof(double));
    c.arrays.emplace_back(a.at("name").get<std::string>(), std::move(data));
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after the last array");
  c.header.erase("arrays");
  return c;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

// --- conversions -----------------------------------------------------------

inline std::vector<double> interleave(const std::vector<Complex>& v) {
  std::vector<double> out(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[2 * i] = v[i].real();
    out[2 * i + 1] = v[i].imag();
  }
  return out;
}

inline std::vector<Complex> deinterleave(const std::vector<double>& v) {
  if (v.size() % 2) throw FormatError("complex array has odd length");
  std::vector<Complex> out(v.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

inline Json grid_json(const spectral::EnergyGrid& g) {
  return {{"omega_min", g.omega_min}, {"omega_max", g.omega_max}, {"n_points", g.n_points}};
}

inline Json grid_json(const wigner::PhaseGrid& g) {
  return {{"q_min", g.q_min}, {"q_max", g.q_max}, {"n_q", g.n_q},
          {"p_min", g.p_min}, {"p_max", g.p_max}, {"n_p", g.n_p}};
}

inline Container to_container(const spectral::VanHoveState& s) {
  Container c;
  c.header = {{"kind", "van_hove_state"}, {"energy_grid", grid_json(s.kernel.grid)},
              {"n_channels", s.kernel.n_channels}, {"hbar", s.hbar}};
  c.arrays.emplace_back("singular", interleave(s.kernel.singular));
  c.arrays.emplace_back("regular", interleave(s.kernel.regular));
  return c;
}

inline spectral::SpectralKernel kernel_from(const Container& c) {
  const auto& g = c.header.at("energy_grid");
  spectral::SpectralKernel k;
  k.grid = spectral::EnergyGrid::make(g.at("omega_min").get<double>(), g.at("omega_max").get<double>(),
                                      g.at("n_points").get<std::size_t>());
  k.n_channels = c.header.at("n_channels").get<std::size_t>();
  k.singular = deinterleave(c.array("singular"));
  k.regular = deinterleave(c.array("regular"));
  k.check_shape();
  return k;
}

inline spectral::VanHoveState state_from(const Container& c) {
  const auto kind = c.header.at("kind").get<std::string>();
  if (kind != "van_hove_state" && kind != "spectral_kernel")
    throw FormatError("expected a spectral kernel container, found '" + kind + "'");
  return {kernel_from(c), c.header.value("hbar", 1.0)};
}

inline Container to_container(const spectral::SpectralKernel& k) {
  auto c = to_container(spectral::VanHoveState{k, 1.0});
  c.header["kind"] = "spectral_kernel";
  c.header.erase("hbar");
  return c;
}

inline Container to_container(const wigner::PhaseSpaceField& f) {
  Container c;
  c.header = {{"kind", "phase_space_field"},
              {"phase_grid", grid_json(f.grid)},
              {"hbar", f.hbar},
              {"scheme", wigner::to_string(f.scheme)},
              {"symbol", wigner::to_string(f.kind)},
              {"star_order", f.star_order}};
  c.arrays.emplace_back("values", interleave(f.values));
  return c;
}

inline wigner::PhaseSpaceField field_from(const Container& c) {
  if (c.header.at("kind") != "phase_space_field") throw FormatError("expected a phase_space_field container");
  const auto& g = c.header.at("phase_grid");
  wigner::PhaseSpaceField f;
  f.grid = wigner::PhaseGrid::make(g.at("q_min").get<double>(), g.at("q_max").get<double>(), g.at("n_q").get<std::size_t>(),
                                   g.at("p_min").get<double>(), g.at("p_max").get<double>(), g.at("n_p").get<std::size_t>());
  f.hbar = c.header.at("hbar").get<double>();
  f.scheme = c.header.at("scheme") == "fd4" ? wigner::DiffScheme::FiniteDifference4 : wigner::DiffScheme::Spectral;
  f.kind = c.header.at("symbol") == "state" ? wigner::SymbolKind::State : wigner::SymbolKind::Operator;
  f.star_order = c.header.at("star_order").get<int>();
  f.values = deinterleave(c.array("values"));
  f.check();
  return f;
}

inline Container to_container(const spectral::PointerBasisResult& b, const spectral::EnergyGrid& g) {
  Container c;
  c.header = {{"kind", "pointer_basis"},
              {"energy_grid", grid_json(g)},
              {"n_channels", b.n_channels},
              {"max_reconstruction_error", b.max_reconstruction_error},
              {"max_unitarity_error", b.max_unitarity_error}};
  c.arrays.emplace_back("unitary", interleave(b.unitary));
  c.arrays.emplace_back("eigenvalues", b.eigenvalues);
  return c;
}

// --- CSV ---------------------------------------------------------------------

/// Shortest text that round-trips the double.
inline std::string number(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << number(values[i]);
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline std::string decay_csv(const spectral::DecayCurve& c) {
  CsvWriter w({"t", "total", "regular_re", "regular_im"});
  for (const auto& r : c.rows) w.row({r.t, r.total, r.regular.real(), r.regular.imag()});
  return w.str();
}

inline std::string field_csv(const wigner::PhaseSpaceField& f) {
  CsvWriter w({"q", "p", "re", "im"});
  for (std::size_t k = 0; k < f.grid.n_q; ++k)
    for (std::size_t j = 0; j < f.grid.n_p; ++j) w.row({f.grid.q(k), f.grid.p(j), f.at(k, j).real(), f.at(k, j).imag()});
  return w.str();
}

/// Header "t,q,p,H,P1.." (q1..qN, p1..pN for several degrees of freedom).
inline std::string trajectory_csv(const classical::Trajectory& tr) {
  const std::size_t dim = tr.states.empty() ? 2 : tr.states.front().size();
  std::vector<std::string> header{"t"};
  if (dim == 2) {
    header.insert(header.end(), {"q", "p"});
  } else {
    for (std::size_t i = 0; i < dim / 2; ++i) header.push_back("q" + std::to_string(i + 1));
    for (std::size_t i = 0; i < dim / 2; ++i) header.push_back("p" + std::to_string(i + 1));
  }
  header.push_back("H");
  for (std::size_t c = 0; c < tr.conserved.size(); ++c) header.push_back("P" + std::to_string(c + 1));
  CsvWriter w(header);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    std::vector<double> row{tr.times[i]};
    row.insert(row.end(), tr.states[i].begin(), tr.states[i].end());
    row.push_back(tr.energy[i]);
    for (const auto& col : tr.conserved) row.push_back(col[i]);
    w.row(row);
  }
  return w.str();
}

// --- digests -------------------------------------------------------------------

inline std::string sha256(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace sid::io
