#pragma once

#include "psamp/dataset.hpp"
#include "psamp/sampler.hpp"
#include "psamp/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace psamp {

/// Declarative experiment description, loaded from a single JSON document
/// with --key=value overrides (dotted paths).
struct RunConfig {
  struct DatasetSpec {
    std::string kind = "parity";  // parity | bars | idx | cache
    Index n = 2048;               // synthetic item count
    Index d = 16;                 // parity length
    Index side = 8;               // bars side
    std::string path;             // idx images / cache path
    int bits = 1;
    bool downsample = true;       // 2x pooling for idx images
    std::uint64_t seed = 1234;
  } dataset;

  struct ModelSpec {
    Index H = 32;
    Index E = 8;
    Index L = 3;
    std::uint64_t seed = 7;
  } model;

  struct ForecasterSpec {
    std::string mode = "none";  // none | joint | posthoc
    Index T = 1;
    bool condition_on_last_token = false;
    bool condition_on_noise = false;
    std::int64_t steps = 2000;  // posthoc head training steps
    double lr = 1e-2;
    bool train_ablation_variant = false;  // also fit the no-sharing variant
  } forecaster;

  struct TrainingSpec {
    std::int64_t steps = 5000;
    Index batch_size = 32;
    double lr = 1e-3;
    double lr_decay = 1.0;
    double weight_decay = 1e-6;
    std::int64_t eval_every = 250;
    double joint_weight = 0.01;
    double split_train = 0.8, split_val = 0.1, split_test = 0.1;
    std::uint64_t seed = 99;
  } training;

  struct BenchSpec {
    std::vector<std::string> strategies{"baseline", "zeros", "predict-last", "fpi"};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<Index> batch_sizes{1};
  } bench;

  struct MapsSpec {
    std::string strategy = "fpi";
    std::uint64_t seed = 0;
    Index height = 0;  // 0 = infer square
    Index width = 0;
    Index channels = 1;
    Index samples = 1;
  } maps;

  struct VerifySpec {
    Index cases = 1008;
    std::uint64_t seed = 2024;
  } verify;

  std::string output_dir = "out";
};

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);
RunConfig config_from_json_text(const std::string& text, const std::vector<std::string>& overrides);

struct BenchRow {
  std::string dataset;
  std::string strategy;
  Index batch_size = 1;
  std::uint64_t seed = 0;
  std::int64_t arm_calls = 0;
  double call_percentage = 0.0;
  double wall_time_s = 0.0;
  bool breakeven = false;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // Bessel-corrected
};
Aggregate aggregate_of(const std::vector<double>& xs);

// Exit codes: 0 success, 1 verification failure, 2 usage/config error.
int run_train(const RunConfig& cfg);
int run_bench(const RunConfig& cfg);
int run_maps(const RunConfig& cfg);
int run_ablate(const RunConfig& cfg);
int run_verify(const RunConfig& cfg);

/// Randomized exactness sweep shared by `verify` and the test suites:
/// every predictive strategy must reproduce the ancestral tokens bit for
/// bit under shared noise. Returns the number of failing cases and writes
/// a description of the first failure, if any, to `first_failure`.
Index exactness_sweep(Index cases, std::uint64_t seed, std::string* first_failure);

}  // namespace psamp
