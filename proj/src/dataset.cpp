#include "psamp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace psamp {

namespace {

std::uint32_t read_u32_be(std::ifstream& in, std::uint64_t& offset, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4)
    throw std::runtime_error("short read at byte " + std::to_string(offset + static_cast<std::uint64_t>(in.gcount())) + " in " + path);
  offset += 4;
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

IdxImages load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t offset = 0;
  const std::uint32_t magic = read_u32_be(in, offset, path);
  if (magic != 0x00000803u)
    throw std::runtime_error("not an IDX file (expected image magic 2051, got " +
                             std::to_string(magic) + "): " + path);
  IdxImages img;
  img.count = static_cast<Index>(read_u32_be(in, offset, path));
  img.rows = static_cast<Index>(read_u32_be(in, offset, path));
  img.cols = static_cast<Index>(read_u32_be(in, offset, path));
  const std::uint64_t n = static_cast<std::uint64_t>(img.count) * img.rows * img.cols;
  img.pixels.resize(n);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n)
    throw std::runtime_error("short read at byte " +
                             std::to_string(offset + static_cast<std::uint64_t>(in.gcount())) +
                             " in " + path);
  return img;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t offset = 0;
  const std::uint32_t magic = read_u32_be(in, offset, path);
  if (magic != 0x00000801u)
    throw std::runtime_error("not an IDX file (expected label magic 2049, got " +
                             std::to_string(magic) + "): " + path);
  const std::uint64_t n = read_u32_be(in, offset, path);
  std::vector<std::uint8_t> labels(n);
  in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n)
    throw std::runtime_error("short read at byte " +
                             std::to_string(offset + static_cast<std::uint64_t>(in.gcount())) +
                             " in " + path);
  return labels;
}

void save_idx_images(const std::string& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_u32_be(out, 0x00000803u);
  write_u32_be(out, static_cast<std::uint32_t>(images.count));
  write_u32_be(out, static_cast<std::uint32_t>(images.rows));
  write_u32_be(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

IdxImages downsample2x(const IdxImages& images) {
  IdxImages out;
  out.count = images.count;
  out.rows = images.rows / 2;
  out.cols = images.cols / 2;
  out.pixels.resize(static_cast<size_t>(out.count) * out.rows * out.cols);
  for (Index n = 0; n < images.count; ++n) {
    const std::uint8_t* src = images.pixels.data() + n * images.rows * images.cols;
    std::uint8_t* dst = out.pixels.data() + n * out.rows * out.cols;
    for (Index r = 0; r < out.rows; ++r)
      for (Index c = 0; c < out.cols; ++c) {
        const int sum = src[(2 * r) * images.cols + 2 * c] + src[(2 * r) * images.cols + 2 * c + 1] +
                        src[(2 * r + 1) * images.cols + 2 * c] +
                        src[(2 * r + 1) * images.cols + 2 * c + 1];
        dst[r * out.cols + c] = static_cast<std::uint8_t>(sum / 4);
      }
  }
  return out;
}

Dataset quantize(const IdxImages& images, int bits) {
  if (bits < 1 || bits > 8) throw std::invalid_argument("quantize: bits must be in 1..8");
  Dataset ds;
  ds.name = "idx-" + std::to_string(bits) + "bit";
  ds.d = images.rows * images.cols;
  ds.K = Index(1) << bits;
  const int shift = 8 - bits;
  for (Index n = 0; n < images.count; ++n) {
    TokenBuffer b(ds.d, ds.K);
    const std::uint8_t* src = images.pixels.data() + n * ds.d;
    for (Index i = 0; i < ds.d; ++i) b.set(i, static_cast<std::int32_t>(src[i] >> shift));
    b.advance_frontier(ds.d);
    ds.items.push_back(std::move(b));
  }
  return ds;
}

Dataset synth_parity(Index n, Index d, Rng& rng) {
  if (d < 2) throw std::invalid_argument("synth_parity: d must be >= 2");
  Dataset ds;
  ds.name = "parity";
  ds.d = d;
  ds.K = 2;
  for (Index s = 0; s < n; ++s) {
    TokenBuffer b(d, 2);
    std::int32_t prev = rng.uniform_open() < 0.5 ? 0 : 1;
    b.set(0, prev);
    for (Index i = 1; i < d; ++i) {
      std::int32_t next = 1 - prev;
      if (rng.uniform_open() < 0.05) next = prev;  // occasional repeat
      b.set(i, next);
      prev = next;
    }
    b.advance_frontier(d);
    ds.items.push_back(std::move(b));
  }
  return ds;
}

Dataset synth_bars(Index n, Index side, Rng& rng) {
  if (side < 2) throw std::invalid_argument("synth_bars: side must be >= 2");
  Dataset ds;
  ds.name = "bars";
  ds.d = side * side;
  ds.K = 2;
  for (Index s = 0; s < n; ++s) {
    std::vector<bool> row_on(static_cast<size_t>(side)), col_on(static_cast<size_t>(side));
    for (Index r = 0; r < side; ++r) row_on[static_cast<size_t>(r)] = rng.uniform_open() < 0.2;
    for (Index c = 0; c < side; ++c) col_on[static_cast<size_t>(c)] = rng.uniform_open() < 0.2;
    TokenBuffer b(ds.d, 2);
    for (Index r = 0; r < side; ++r)
      for (Index c = 0; c < side; ++c)
        b.set(r * side + c, (row_on[static_cast<size_t>(r)] || col_on[static_cast<size_t>(c)]) ? 1 : 0);
    b.advance_frontier(ds.d);
    ds.items.push_back(std::move(b));
  }
  return ds;
}

SplitResult split_dataset(const Dataset& ds, double f_train, double f_val, double f_test,
                          Rng& rng) {
  if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: fractions must sum to 1");
  if (ds.items.empty()) throw std::invalid_argument("split_dataset: empty dataset");

  std::vector<size_t> order(ds.items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Fisher-Yates with the seeded stream.
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  const auto n = static_cast<double>(ds.items.size());
  const size_t n_train = static_cast<size_t>(std::floor(f_train * n + 0.5));
  const size_t n_val = static_cast<size_t>(std::floor(f_val * n + 0.5));
  size_t n_test = ds.items.size() - std::min(ds.items.size(), n_train + n_val);
  if ((f_train > 0 && n_train == 0) || (f_val > 0 && n_val == 0) || (f_test > 0 && n_test == 0))
    throw std::invalid_argument("split_dataset: a requested split is empty");

  SplitResult out;
  for (Dataset* part : {&out.train, &out.val, &out.test}) {
    part->name = ds.name;
    part->d = ds.d;
    part->K = ds.K;
  }
  size_t idx = 0;
  for (size_t i = 0; i < n_train && idx < order.size(); ++i) out.train.items.push_back(ds.items[order[idx++]]);
  for (size_t i = 0; i < n_val && idx < order.size(); ++i) out.val.items.push_back(ds.items[order[idx++]]);
  while (idx < order.size()) out.test.items.push_back(ds.items[order[idx++]]);
  return out;
}

}  // namespace psamp
