#include "psamp/io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace psamp {

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  }
  void magic(const char m[4]) { out_.write(m, 4); }
  void u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
  void u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
  void f64(double v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
  void block(const Matrix& m) {
    out_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
  }
  void bytes(const void* p, size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void close() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open " + path);
  }
  void expect_magic(const char m[4], const char* what) {
    char got[4];
    read(got, 4);
    if (std::memcmp(got, m, 4) != 0)
      throw std::runtime_error(std::string("bad magic, not a ") + what + " file: " + path_);
  }
  void expect_version() {
    if (u32() != kVersion) throw std::runtime_error("unsupported version in " + path_);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, 8);
    return v;
  }
  void block(Matrix& m) { read(m.data(), static_cast<size_t>(m.size()) * 8); }
  void read(void* p, size_t n) {
    in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw std::runtime_error("truncated file: " + path_);
  }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace

void save_noise_grid(const std::string& path, const NoiseGrid& eps) {
  Writer w(path);
  w.magic("PSNG");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(eps.rows()));
  w.u32(static_cast<std::uint32_t>(eps.cols()));
  w.block(eps);
  w.close();
}

NoiseGrid load_noise_grid(const std::string& path) {
  Reader r(path);
  r.expect_magic("PSNG", "noise grid");
  r.expect_version();
  const Index d = r.u32();
  const Index K = r.u32();
  NoiseGrid eps(d, K);
  r.block(eps);
  return eps;
}

void save_arm(const std::string& path, const ArmModel& model) {
  Writer w(path);
  w.magic("PSAM");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.cfg.d));
  w.u32(static_cast<std::uint32_t>(model.cfg.K));
  w.u32(static_cast<std::uint32_t>(model.cfg.H));
  w.u32(static_cast<std::uint32_t>(model.cfg.E));
  w.u32(static_cast<std::uint32_t>(model.cfg.L));
  for (const Matrix* p : model.param_list()) w.block(*p);
  w.close();
}

ArmModel load_arm(const std::string& path) {
  Reader r(path);
  r.expect_magic("PSAM", "model checkpoint");
  r.expect_version();
  ArmConfig cfg;
  cfg.d = r.u32();
  cfg.K = r.u32();
  cfg.H = r.u32();
  cfg.E = r.u32();
  cfg.L = r.u32();
  Rng dummy(0);
  ArmModel model = make_arm(cfg, dummy);
  for (Matrix* p : model.param_list()) r.block(*p);
  return model;
}

namespace {
constexpr std::uint32_t kFlagLastToken = 1u << 0;
constexpr std::uint32_t kFlagNoise = 1u << 1;
}  // namespace

void save_forecaster(const std::string& path, const Forecaster& f) {
  Writer w(path);
  w.magic("PSFC");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(f.cfg.T));
  std::uint32_t flags = 0;
  if (f.cfg.condition_on_last_token) flags |= kFlagLastToken;
  if (f.cfg.condition_on_noise) flags |= kFlagNoise;
  w.u32(flags);
  w.u32(static_cast<std::uint32_t>(f.cfg.H));
  w.u32(static_cast<std::uint32_t>(f.cfg.K));
  for (Index t = 0; t < f.cfg.T; ++t) {
    w.block(f.w[static_cast<size_t>(t)]);
    w.block(f.b[static_cast<size_t>(t)]);
  }
  w.close();
}

Forecaster load_forecaster(const std::string& path) {
  Reader r(path);
  r.expect_magic("PSFC", "forecaster checkpoint");
  r.expect_version();
  ForecasterConfig cfg;
  cfg.T = r.u32();
  const std::uint32_t flags = r.u32();
  cfg.condition_on_last_token = flags & kFlagLastToken;
  cfg.condition_on_noise = flags & kFlagNoise;
  cfg.H = r.u32();
  cfg.K = r.u32();
  Forecaster f = make_forecaster(cfg);
  for (Index t = 0; t < cfg.T; ++t) {
    r.block(f.w[static_cast<size_t>(t)]);
    r.block(f.b[static_cast<size_t>(t)]);
  }
  return f;
}

void save_run_record(const std::string& path, const RunRecord& rec) {
  Writer w(path);
  w.magic("PSRN");
  w.u32(kVersion);
  w.u64(rec.seed);
  w.u32(rec.strategy);
  w.u32(rec.flags);
  w.u32(rec.d);
  w.u32(rec.K);
  w.u64(rec.arm_calls);
  w.bytes(rec.tokens.data(), rec.tokens.size() * sizeof(std::int32_t));
  w.close();
}

RunRecord load_run_record(const std::string& path) {
  Reader r(path);
  r.expect_magic("PSRN", "run record");
  r.expect_version();
  RunRecord rec;
  rec.seed = r.u64();
  rec.strategy = r.u32();
  rec.flags = r.u32();
  rec.d = r.u32();
  rec.K = r.u32();
  rec.arm_calls = r.u64();
  rec.tokens.resize(rec.d);
  r.read(rec.tokens.data(), rec.tokens.size() * sizeof(std::int32_t));
  return rec;
}

void save_dataset_cache(const std::string& path, const Dataset& ds) {
  if (ds.K > 256) throw std::invalid_argument("dataset cache requires K <= 256");
  Writer w(path);
  w.magic("PSDS");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(ds.d));
  w.u32(static_cast<std::uint32_t>(ds.K));
  w.u32(static_cast<std::uint32_t>(ds.items.size()));
  std::vector<std::uint8_t> row(static_cast<size_t>(ds.d));
  for (const TokenBuffer& b : ds.items) {
    for (Index i = 0; i < ds.d; ++i) row[static_cast<size_t>(i)] = static_cast<std::uint8_t>(b[i]);
    w.bytes(row.data(), row.size());
  }
  w.close();
}

Dataset load_dataset_cache(const std::string& path) {
  Reader r(path);
  r.expect_magic("PSDS", "dataset cache");
  r.expect_version();
  Dataset ds;
  ds.name = "cache";
  ds.d = r.u32();
  ds.K = r.u32();
  const std::uint32_t n = r.u32();
  std::vector<std::uint8_t> row(static_cast<size_t>(ds.d));
  for (std::uint32_t s = 0; s < n; ++s) {
    r.read(row.data(), row.size());
    TokenBuffer b(ds.d, ds.K);
    for (Index i = 0; i < ds.d; ++i) b.set(i, row[static_cast<size_t>(i)]);
    b.advance_frontier(ds.d);
    ds.items.push_back(std::move(b));
  }
  return ds;
}

void write_pgm(const std::string& path, Index width, Index height,
               const std::vector<std::uint8_t>& bytes) {
  if (static_cast<Index>(bytes.size()) != width * height)
    throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace psamp
