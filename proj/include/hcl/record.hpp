#pragma once

// Uniformly sampled quadrature time series and their binary dump format.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "hcl/fft.hpp"

namespace hcl {

enum class Quadrature : std::uint8_t { q = 0, p = 1 };
enum class Stage : std::uint8_t { input = 0, output = 1, filtered = 2 };

struct RecordLabel {
  Quadrature quadrature = Quadrature::q;
  int port = 1;
  Stage stage = Stage::input;

  std::string name() const {
    std::string s = quadrature == Quadrature::q ? "q" : "p";
    s += std::to_string(port);
    if (stage == Stage::output) s += "_out";
    if (stage == Stage::filtered) s += "_filt";
    return s;
  }

  friend bool operator==(const RecordLabel&, const RecordLabel&) = default;
};

/// Finite samples, power-of-two length >= 2, immutable once built.
class QuadratureRecord {
 public:
  QuadratureRecord(std::vector<double> samples, double fs, RecordLabel label = {})
      : samples_(std::move(samples)), fs_(fs), label_(label) {
    if (!(fs_ > 0.0) || !std::isfinite(fs_))
      throw std::invalid_argument("QuadratureRecord: sample rate must be positive");
    if (samples_.size() < 2 || !is_power_of_two(samples_.size()))
      throw std::invalid_argument("QuadratureRecord: length must be a power of two >= 2");
    if (!std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); }))
      throw std::invalid_argument("QuadratureRecord: non-finite sample");
    if (label_.port != 1 && label_.port != 2)
      throw std::invalid_argument("QuadratureRecord: port must be 1 or 2");
  }

  std::span<const double> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double sample_rate() const { return fs_; }
  double duration() const { return static_cast<double>(samples_.size()) / fs_; }
  const RecordLabel& label() const { return label_; }
  double operator[](std::size_t i) const { return samples_[i]; }

  std::vector<double> release() && { return std::move(samples_); }

 private:
  std::vector<double> samples_;
  double fs_;
  RecordLabel label_;
};

inline double mean(std::span<const double> x) {
  long double s = 0.0L;
  for (double v : x) s += v;
  return static_cast<double>(s / static_cast<long double>(x.size()));
}

inline double variance(std::span<const double> x) {
  const double m = mean(x);
  long double s = 0.0L;
  for (double v : x) s += (v - m) * (v - m);
  return static_cast<double>(s / static_cast<long double>(x.size()));
}

// ---------------------------------------------------------------------------
// Binary dump: 32-byte little-endian header followed by float64 samples.
//   bytes  0..7   magic "HCLQREC\0"
//   bytes  8..11  uint32 format version
//   bytes 12..15  uint32 label code: quadrature | port << 8 | stage << 16
//   bytes 16..23  float64 sample rate (Hz)
//   bytes 24..31  uint64 sample count

inline constexpr std::array<char, 8> kRecordMagic = {'H', 'C', 'L', 'Q', 'R', 'E', 'C', '\0'};
inline constexpr std::uint32_t kRecordFormatVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw std::runtime_error("record: truncated stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline void write_record(std::ostream& os, const QuadratureRecord& rec) {
  os.write(kRecordMagic.data(), kRecordMagic.size());
  detail::put_le<std::uint32_t>(os, kRecordFormatVersion);
  const auto& l = rec.label();
  const std::uint32_t code = static_cast<std::uint32_t>(l.quadrature) |
                             (static_cast<std::uint32_t>(l.port) << 8) |
                             (static_cast<std::uint32_t>(l.stage) << 16);
  detail::put_le<std::uint32_t>(os, code);
  detail::put_le<double>(os, rec.sample_rate());
  detail::put_le<std::uint64_t>(os, rec.size());
  for (double v : rec.samples()) detail::put_le<double>(os, v);
  if (!os) throw std::runtime_error("write_record: stream failure");
}

inline QuadratureRecord read_record(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kRecordMagic)
    throw std::runtime_error("read_record: bad magic");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kRecordFormatVersion) throw std::runtime_error("read_record: unsupported version");
  const auto code = detail::get_le<std::uint32_t>(is);
  const auto fs = detail::get_le<double>(is);
  const auto n = detail::get_le<std::uint64_t>(is);
  RecordLabel label{static_cast<Quadrature>(code & 0xffu), static_cast<int>((code >> 8) & 0xffu),
                    static_cast<Stage>((code >> 16) & 0xffu)};
  std::vector<double> samples(n);
  for (auto& v : samples) v = detail::get_le<double>(is);
  return QuadratureRecord(std::move(samples), fs, label);
}

inline void write_record(const std::string& path, const QuadratureRecord& rec) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_record: cannot open " + path);
  write_record(os, rec);
}

inline QuadratureRecord read_record(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_record: cannot open " + path);
  return read_record(is);
}

}  // namespace hcl
