#pragma once

#include "psamp/arm.hpp"
#include "psamp/dataset.hpp"
#include "psamp/forecast.hpp"
#include "psamp/gumbel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace psamp {

// Binary run artifacts. All multi-byte fields are little-endian; reals are
// 64-bit IEEE doubles. Magics: PSNG noise grid, PSAM model checkpoint,
// PSFC forecaster checkpoint, PSRN run record, PSDS dataset cache.

void save_noise_grid(const std::string& path, const NoiseGrid& eps);
NoiseGrid load_noise_grid(const std::string& path);

/// Parameter block order: embed, pos, sos, per layer (w_prev, w_curr,
/// bias), w_out, b_out.
void save_arm(const std::string& path, const ArmModel& model);
ArmModel load_arm(const std::string& path);

void save_forecaster(const std::string& path, const Forecaster& f);
Forecaster load_forecaster(const std::string& path);

struct RunRecord {
  std::uint64_t seed = 0;
  std::uint32_t strategy = 0;  // StrategyKind value; 0xffffffff = ancestral baseline
  std::uint32_t flags = 0;     // bit0 use_reparam_noise, bit1 share_representation
  std::uint32_t d = 0;
  std::uint32_t K = 0;
  std::uint64_t arm_calls = 0;
  std::vector<std::int32_t> tokens;
};

void save_run_record(const std::string& path, const RunRecord& rec);
RunRecord load_run_record(const std::string& path);

/// K <= 256 enforced; tokens stored as bytes.
void save_dataset_cache(const std::string& path, const Dataset& ds);
Dataset load_dataset_cache(const std::string& path);

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, Index width, Index height,
               const std::vector<std::uint8_t>& bytes);

}  // namespace psamp
