#pragma once

#include "psamp/rng.hpp"
#include "psamp/token_buffer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace psamp {

struct Dataset {
  std::string name;
  Index d = 0;
  Index K = 0;
  std::vector<TokenBuffer> items;
};

struct IdxImages {
  Index count = 0;
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
};

/// IDX unsigned-byte image file (big-endian magic 0x00000803 and dims).
IdxImages load_idx_images(const std::string& path);
/// IDX label file (magic 0x00000801).
std::vector<std::uint8_t> load_idx_labels(const std::string& path);
void save_idx_images(const std::string& path, const IdxImages& images);

/// 2x2 mean pooling (floor), halving both sides.
IdxImages downsample2x(const IdxImages& images);

/// token = floor(pixel / 2^(8-bits)); bits=1 thresholds at 128. Flattening
/// is row-major raster order.
Dataset quantize(const IdxImages& images, int bits);

/// Binary sequences that alternate (x_i = 1 - x_{i-1}) except with
/// probability 0.05 the value repeats; x_0 is uniform. True process bpd is
/// (1 + (d-1) H(0.05)) / d.
Dataset synth_parity(Index n, Index d, Rng& rng);

/// side x side binary images, each full row and column lit independently
/// with probability 0.2, flattened row-major.
Dataset synth_bars(Index n, Index side, Rng& rng);

struct SplitResult {
  Dataset train, val, test;
};

/// Seeded shuffle then contiguous split. A fraction of zero yields an
/// intentionally empty part; a positive fraction that rounds to zero items
/// is an error.
SplitResult split_dataset(const Dataset& ds, double f_train, double f_val, double f_test,
                          Rng& rng);

}  // namespace psamp
