#pragma once

// File formats: binary sample batches and trajectories, CSV tables written
// with 17 significant digits, tabulated schedules, and config.json.

#include "interp_lab/core.hpp"
#include "interp_lab/diagnostics.hpp"
#include "interp_lab/dynamics.hpp"
#include "interp_lab/schedule.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace ilab::io {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw Error("cannot open '" + path.string() + "' for reading");
  return f;
}

/// Minimal CSV writer; numbers use fmt().
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : f_(open_out(path)) {
    row_strings(header);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) f_ << (i ? "," : "") << cells[i];
    f_ << '\n';
  }

  void row(const std::vector<double>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) f_ << (i ? "," : "") << fmt(cells[i]);
    f_ << '\n';
  }

 private:
  std::ofstream f_;
};

// ---------------------------------------------------------------------------
// Sample batches

inline constexpr char kBatchMagic[8] = {'I', 'L', 'B', 'A', 'T', 'C', 'H', '1'};
inline constexpr char kTrajMagic[8] = {'I', 'L', 'T', 'R', 'A', 'J', '0', '1'};

namespace detail {
template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("truncated binary file");
  return v;
}
}  // namespace detail

/// Layout (little-endian host order): magic "ILBATCH1", u64 n, u64 d, f64 t,
/// u64 seed, then n*d f64 values row-major.
inline void write_batch(const std::filesystem::path& path, const SampleBatch& b) {
  auto f = open_out(path, true);
  f.write(kBatchMagic, 8);
  detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(b.size()));
  detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(b.dim()));
  detail::put<double>(f, b.t);
  detail::put<std::uint64_t>(f, b.seed);
  f.write(reinterpret_cast<const char*>(b.states.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(b.states.size())));
}

inline SampleBatch read_batch(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kBatchMagic, 8) != 0) throw Error("'" + path.string() + "' is not a sample batch");
  const auto n = detail::get<std::uint64_t>(f);
  const auto d = detail::get<std::uint64_t>(f);
  const auto t = detail::get<double>(f);
  const auto seed = detail::get<std::uint64_t>(f);
  SampleBatch b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), t, seed);
  f.read(reinterpret_cast<char*>(b.states.data()),
         static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(b.states.size())));
  if (!f) throw Error("truncated sample batch '" + path.string() + "'");
  return b;
}

/// Header "x0,...,x{d-1}" then one row per sample; only for d <= 4.
inline void write_batch_csv(const std::filesystem::path& path, const SampleBatch& b) {
  if (b.dim() > 4) throw ShapeError("write_batch_csv: CSV export is limited to d <= 4");
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < b.dim(); ++j) header.push_back("x" + std::to_string(j));
  CsvWriter w(path, header);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const auto r = b.row(i);
    w.row({r.begin(), r.end()});
  }
}

/// Magic "ILTRAJ01", u64 n, u64 d, u64 frames; each frame: i64 step, f64 t,
/// n*d f64 values row-major.
inline void write_trajectory(const std::filesystem::path& path, const Trajectory& tr) {
  auto f = open_out(path, true);
  f.write(kTrajMagic, 8);
  const auto n = tr.frames.empty() ? 0 : tr.frames.front().rows();
  const auto d = tr.frames.empty() ? 0 : tr.frames.front().cols();
  detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(n));
  detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(d));
  detail::put<std::uint64_t>(f, tr.frames.size());
  for (std::size_t k = 0; k < tr.frames.size(); ++k) {
    detail::put<std::int64_t>(f, tr.step[k]);
    detail::put<double>(f, tr.t[k]);
    f.write(reinterpret_cast<const char*>(tr.frames[k].data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(tr.frames[k].size())));
  }
}

inline Trajectory read_trajectory(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kTrajMagic, 8) != 0) throw Error("'" + path.string() + "' is not a trajectory");
  const auto n = static_cast<Eigen::Index>(detail::get<std::uint64_t>(f));
  const auto d = static_cast<Eigen::Index>(detail::get<std::uint64_t>(f));
  const auto frames = detail::get<std::uint64_t>(f);
  Trajectory tr;
  for (std::uint64_t k = 0; k < frames; ++k) {
    tr.step.push_back(static_cast<int>(detail::get<std::int64_t>(f)));
    tr.t.push_back(detail::get<double>(f));
    RowMatrix m(n, d);
    f.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!f) throw Error("truncated trajectory '" + path.string() + "'");
    tr.frames.push_back(std::move(m));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Schedules, spectra, reports

/// Two columns with header "t,beta".
inline void write_schedule_csv(const std::filesystem::path& path, const TabulatedSchedule& s) {
  CsvWriter w(path, {"t", "beta"});
  for (std::size_t i = 0; i < s.t_grid().size(); ++i) w.row({s.t_grid()[i], s.beta_grid()[i]});
}

inline TabulatedSchedule read_schedule_csv(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || line != "t,beta") throw ParameterError("schedule CSV must start with header 't,beta'");
  std::vector<double> t, beta;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument(line);
      t.push_back(std::stod(line.substr(0, comma)));
      beta.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw ParameterError("schedule CSV line " + std::to_string(lineno) + " is malformed");
    }
  }
  return TabulatedSchedule(std::move(t), std::move(beta));
}

/// Header "k,energy".
inline void write_spectrum_csv(const std::filesystem::path& path, const SpectrumReport& s) {
  CsvWriter w(path, {"k", "energy"});
  for (std::size_t i = 0; i < s.k.size(); ++i) w.row_strings({std::to_string(s.k[i]), fmt(s.energy[i])});
}

/// Key-value block with header "key,value".
inline void write_lip_report(const std::filesystem::path& path, const LipReport& r) {
  CsvWriter w(path, {"key", "value"});
  w.row_strings({"a2_estimate", fmt(r.a2)});
  w.row_strings({"std_error", fmt(r.std_error)});
  w.row_strings({"t_grid_size", std::to_string(r.t_grid_size)});
  w.row_strings({"mc_per_t", std::to_string(r.mc_per_t)});
  w.row_strings({"sup_lipschitz", fmt(r.sup_lipschitz)});
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

}  // namespace ilab::io
