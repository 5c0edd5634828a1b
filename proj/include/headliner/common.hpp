#pragma once

// Shared plumbing: error type, deterministic RNG with named substreams,
// string/file helpers, little-endian binary IO.

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace headliner {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string strfmt(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list copy;
  va_copy(copy, args);
  int n = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
  if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  va_end(args);
  return out;
}

template <typename... Args>
[[noreturn]] inline void fail(const char* fmt, Args... args) {
  throw Error(strfmt(fmt, args...));
}

// ---------------------------------------------------------------------------
// RNG: xoshiro256** seeded via splitmix64. Self-contained so that streams are
// identical across standard library implementations. Substreams are derived
// from the parent seed and a name, so pipeline stages draw from independent,
// reproducible streams.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_origin_(seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = detail::splitmix64(x);
  }

  Rng substream(const std::string& name) const {
    return Rng(seed_origin_ ^ detail::fnv1a64(name));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // [0, n)
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) fail("uniform_index: empty range");
    // rejection sampling keeps the distribution exactly uniform
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  // inclusive range
  long long uniform_int(long long lo, long long hi) {
    if (hi < lo) fail("uniform_int: hi < lo");
    return lo + static_cast<long long>(
                    uniform_index(static_cast<std::size_t>(hi - lo + 1)));
  }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal(double mu = 0.0, double sigma = 1.0) {
    // Box-Muller, one value per call for reproducibility
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * r * std::cos(6.283185307179586 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // categorical draw from a (not necessarily normalized) weight vector
  std::size_t sample_weights(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) fail("sample_weights: non-positive total weight");
    double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return w.size() - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  std::uint64_t seed_origin_;
};

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------

inline std::string join(const std::vector<std::string>& tokens, const std::string& sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

inline std::string lowercase(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// split on '\n'; a trailing newline does not produce an empty final line
inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open file: %s", path.c_str());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write file: %s", path.c_str());
  out << content;
}

inline bool file_exists(const std::string& path) {
  std::ifstream in(path);
  return in.good();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open file: %s", path.c_str());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Little-endian binary IO. Writes raw bytes in LE order regardless of host.
// ---------------------------------------------------------------------------

namespace le {

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_i64(std::string& buf, std::int64_t v) { put_u64(buf, static_cast<std::uint64_t>(v)); }

inline void put_f64(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(buf, bits);
}

inline void put_str(std::string& buf, const std::string& s) {
  put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf += s;
}

class Reader {
 public:
  Reader(std::string data, std::string what)
      : data_(std::move(data)), what_(std::move(what)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void expect_magic(const std::string& magic) {
    need(magic.size());
    if (data_.compare(pos_, magic.size(), magic) != 0)
      fail("%s: bad magic (expected %s)", what_.c_str(), magic.c_str());
    pos_ += magic.size();
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) fail("%s: truncated data", what_.c_str());
  }
  std::string data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace le

}  // namespace headliner
