#include "psamp/bench.hpp"

#include "psamp/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace psamp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override must be key=value: " + ov);
    std::string key = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    std::string ptr = "/";
    for (char c : key) ptr += (c == '.') ? '/' : c;
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;  // bare strings are fine unquoted
    }
    doc[json::json_pointer(ptr)] = parsed;
  }
}

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    get_to_if(d, "kind", c.dataset.kind);
    get_to_if(d, "n", c.dataset.n);
    get_to_if(d, "d", c.dataset.d);
    get_to_if(d, "side", c.dataset.side);
    get_to_if(d, "path", c.dataset.path);
    get_to_if(d, "bits", c.dataset.bits);
    get_to_if(d, "downsample", c.dataset.downsample);
    get_to_if(d, "seed", c.dataset.seed);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    get_to_if(m, "H", c.model.H);
    get_to_if(m, "E", c.model.E);
    get_to_if(m, "L", c.model.L);
    get_to_if(m, "seed", c.model.seed);
  }
  if (j.contains("forecaster")) {
    const auto& f = j.at("forecaster");
    get_to_if(f, "mode", c.forecaster.mode);
    get_to_if(f, "T", c.forecaster.T);
    get_to_if(f, "condition_on_last_token", c.forecaster.condition_on_last_token);
    get_to_if(f, "condition_on_noise", c.forecaster.condition_on_noise);
    get_to_if(f, "steps", c.forecaster.steps);
    get_to_if(f, "lr", c.forecaster.lr);
    get_to_if(f, "train_ablation_variant", c.forecaster.train_ablation_variant);
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    get_to_if(t, "steps", c.training.steps);
    get_to_if(t, "batch_size", c.training.batch_size);
    get_to_if(t, "lr", c.training.lr);
    get_to_if(t, "lr_decay", c.training.lr_decay);
    get_to_if(t, "weight_decay", c.training.weight_decay);
    get_to_if(t, "eval_every", c.training.eval_every);
    get_to_if(t, "joint_weight", c.training.joint_weight);
    get_to_if(t, "split_train", c.training.split_train);
    get_to_if(t, "split_val", c.training.split_val);
    get_to_if(t, "split_test", c.training.split_test);
    get_to_if(t, "seed", c.training.seed);
  }
  if (j.contains("bench")) {
    const auto& b = j.at("bench");
    get_to_if(b, "strategies", c.bench.strategies);
    get_to_if(b, "seeds", c.bench.seeds);
    get_to_if(b, "batch_sizes", c.bench.batch_sizes);
  }
  if (j.contains("maps")) {
    const auto& m = j.at("maps");
    get_to_if(m, "strategy", c.maps.strategy);
    get_to_if(m, "seed", c.maps.seed);
    get_to_if(m, "height", c.maps.height);
    get_to_if(m, "width", c.maps.width);
    get_to_if(m, "channels", c.maps.channels);
    get_to_if(m, "samples", c.maps.samples);
  }
  if (j.contains("verify")) {
    const auto& v = j.at("verify");
    get_to_if(v, "cases", c.verify.cases);
    get_to_if(v, "seed", c.verify.seed);
  }
  get_to_if(j, "output_dir", c.output_dir);
  if (c.bench.seeds.empty()) throw std::invalid_argument("config: bench.seeds must be nonempty");
  for (const auto& s : c.bench.strategies)
    if (s != "baseline") (void)strategy_from_string(s);
  return c;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Dataset build_dataset(const RunConfig& cfg) {
  const auto& ds = cfg.dataset;
  Rng rng(ds.seed);
  if (ds.kind == "parity") return synth_parity(ds.n, ds.d, rng);
  if (ds.kind == "bars") return synth_bars(ds.n, ds.side, rng);
  if (ds.kind == "idx") {
    if (ds.path.empty()) throw std::invalid_argument("config: dataset.path required for kind=idx");
    IdxImages img = load_idx_images(ds.path);
    if (ds.downsample) img = downsample2x(img);
    return quantize(img, ds.bits);
  }
  if (ds.kind == "cache") {
    if (ds.path.empty()) throw std::invalid_argument("config: dataset.path required for kind=cache");
    return load_dataset_cache(ds.path);
  }
  throw std::invalid_argument("config: unknown dataset.kind " + ds.kind);
}

std::string model_path(const RunConfig& cfg) { return cfg.output_dir + "/model.psam"; }
std::string forecaster_path(const RunConfig& cfg) { return cfg.output_dir + "/forecaster.psfc"; }
std::string forecaster_noshare_path(const RunConfig& cfg) {
  return cfg.output_dir + "/forecaster_noshare.psfc";
}

std::vector<NoiseGrid> noise_batch(std::uint64_t seed, Index batch, Index d, Index K) {
  Rng rng = Rng(seed).split("noise");
  std::vector<NoiseGrid> out;
  out.reserve(static_cast<size_t>(batch));
  for (Index b = 0; b < batch; ++b) out.push_back(sample_gumbel_grid(rng, d, K));
  return out;
}

struct LoadedRun {
  ArmModel model;
  std::optional<Forecaster> forecaster;
  std::optional<Forecaster> forecaster_noshare;
};

LoadedRun load_run(const RunConfig& cfg, bool need_forecaster) {
  if (!fs::exists(model_path(cfg)))
    throw std::invalid_argument("missing checkpoint " + model_path(cfg) + "; run train first");
  LoadedRun lr{load_arm(model_path(cfg)), std::nullopt, std::nullopt};
  if (fs::exists(forecaster_path(cfg))) lr.forecaster = load_forecaster(forecaster_path(cfg));
  if (fs::exists(forecaster_noshare_path(cfg)))
    lr.forecaster_noshare = load_forecaster(forecaster_noshare_path(cfg));
  if (need_forecaster && !lr.forecaster)
    throw std::invalid_argument("missing checkpoint " + forecaster_path(cfg) + "; run train first");
  return lr;
}

void print_table1_context() {
  std::cout << "context (reference implementation, binary MNIST, batch 1; different model scale,"
               " not comparable):\n"
               "  baseline 100.0%  forecast-zeros 14.5%  predict-last 7.8%  fixed-point 3.3%\n";
}

void print_table3_context() {
  std::cout << "context (reference implementation, CIFAR10; different model scale, not"
               " comparable):\n"
               "  fixed-point 25.9% vs 97.2% without reparametrization;"
               " learned 50.9% vs 67.1% without representation sharing\n";
}

}  // namespace

RunConfig config_from_json_text(const std::string& text, const std::vector<std::string>& overrides) {
  json doc = text.empty() ? json::object() : json::parse(text);
  apply_overrides(doc, overrides);
  return parse_config(doc);
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return config_from_json_text(text, overrides);
}

Aggregate aggregate_of(const std::vector<double>& xs) {
  return Aggregate{mean_of(xs), bessel_std(xs)};
}

int run_train(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  Dataset full = build_dataset(cfg);
  Rng split_rng = Rng(cfg.training.seed).split("split");
  SplitResult split = split_dataset(full, cfg.training.split_train, cfg.training.split_val,
                                    cfg.training.split_test, split_rng);

  ArmConfig acfg{full.d, full.K, cfg.model.H, cfg.model.E, cfg.model.L};
  Rng init_rng = Rng(cfg.model.seed).split("init");
  ArmModel model = make_arm(acfg, init_rng);

  std::optional<Forecaster> fc;
  if (cfg.forecaster.mode != "none") {
    ForecasterConfig fcfg;
    fcfg.T = cfg.forecaster.T;
    fcfg.H = acfg.H;
    fcfg.K = acfg.K;
    fcfg.condition_on_last_token = cfg.forecaster.condition_on_last_token;
    fcfg.condition_on_noise = cfg.forecaster.condition_on_noise;
    fc = make_forecaster(fcfg);
  }

  TrainConfig tc;
  tc.steps = cfg.training.steps;
  tc.batch_size = cfg.training.batch_size;
  tc.lr = cfg.training.lr;
  tc.lr_decay = cfg.training.lr_decay;
  tc.weight_decay = cfg.training.weight_decay;
  tc.eval_every = cfg.training.eval_every;
  tc.forecast_weight = cfg.training.joint_weight;
  if (fc && cfg.forecaster.mode == "joint") tc.forecaster = &*fc;

  Rng train_rng = Rng(cfg.training.seed).split("train");
  TrainCurve curve = train_arm(model, split.train.items, split.val.items, tc, train_rng);

  ForecastCurve fcurve;
  if (fc && cfg.forecaster.mode == "posthoc") {
    ForecastTrainConfig fcc;
    fcc.steps = cfg.forecaster.steps;
    fcc.lr = cfg.forecaster.lr;
    Rng frng = Rng(cfg.training.seed).split("train-forecaster");
    fcurve = train_forecaster(model, *fc, split.train.items, fcc, frng);
  }

  save_arm(model_path(cfg), model);
  if (fc) save_forecaster(forecaster_path(cfg), *fc);

  if (cfg.forecaster.train_ablation_variant) {
    ForecasterConfig ncfg;
    ncfg.T = cfg.forecaster.T;
    ncfg.H = acfg.H;
    ncfg.K = acfg.K;
    ncfg.condition_on_last_token = true;
    ncfg.condition_on_noise = true;
    Forecaster noshare = make_forecaster(ncfg);
    ForecastTrainConfig fcc;
    fcc.steps = cfg.forecaster.steps;
    fcc.lr = cfg.forecaster.lr;
    fcc.share_representation = false;
    Rng frng = Rng(cfg.training.seed).split("train-forecaster-noshare");
    train_forecaster(model, noshare, split.train.items, fcc, frng);
    save_forecaster(forecaster_noshare_path(cfg), noshare);
  }

  std::ofstream csv(cfg.output_dir + "/curve.csv");
  csv << "step,train_bpd,val_bpd,forecast_loss\n";
  for (const TrainPoint& p : curve)
    csv << p.step << "," << fmt(p.train_bpd) << "," << fmt(p.val_bpd) << ","
        << fmt(p.forecast_loss) << "\n";
  for (const ForecastTrainPoint& p : fcurve)
    csv << p.step << ",,," << fmt(p.loss) << "\n";

  std::cout << "trained " << full.name << " d=" << full.d << " K=" << full.K << " for "
            << cfg.training.steps << " steps; final val bpd " << curve.back().val_bpd << "\n"
            << "checkpoints in " << cfg.output_dir << "\n";
  return 0;
}

namespace {

// Replays every sample ancestrally and insists on identical tokens.
bool verify_against_ancestral(const ArmModel& model, const std::vector<NoiseGrid>& eps,
                              const std::vector<TokenBuffer>& outs, const std::string& strategy,
                              std::uint64_t seed) {
  for (size_t b = 0; b < eps.size(); ++b) {
    auto [ref, rep] = ancestral_sample(model, eps[b]);
    for (Index i = 0; i < ref.d; ++i) {
      if (ref[i] != outs[b][i]) {
        std::cerr << "exactness violation: strategy=" << strategy << " seed=" << seed
                  << " sample=" << b << " position=" << i << " got " << outs[b][i] << " want "
                  << ref[i] << "\n";
        return false;
      }
    }
  }
  return true;
}

ForecastStrategy make_strategy(const std::string& name, const LoadedRun& lr) {
  ForecastStrategy s;
  if (name == "learned") {
    s.kind = StrategyKind::Learned;
    s.forecaster = &*lr.forecaster;
  } else {
    s.kind = strategy_from_string(name);
  }
  return s;
}

}  // namespace

int run_bench(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  const bool wants_learned =
      std::find(cfg.bench.strategies.begin(), cfg.bench.strategies.end(), "learned") !=
      cfg.bench.strategies.end();
  LoadedRun lr = load_run(cfg, wants_learned);
  const Index d = lr.model.cfg.d;
  const Index K = lr.model.cfg.K;

  std::vector<BenchRow> rows;
  for (const std::string& name : cfg.bench.strategies) {
    for (Index batch : cfg.bench.batch_sizes) {
      for (std::uint64_t seed : cfg.bench.seeds) {
        std::vector<NoiseGrid> eps = noise_batch(seed, batch, d, K);
        BenchRow row;
        row.dataset = cfg.dataset.kind;
        row.strategy = name;
        row.batch_size = batch;
        row.seed = seed;
        if (name == "baseline") {
          double wall = 0.0;
          std::vector<TokenBuffer> outs;
          for (const NoiseGrid& e : eps) {
            auto [buf, rep] = ancestral_sample(lr.model, e);
            wall += rep.wall_time_s;
            outs.push_back(std::move(buf));
          }
          row.arm_calls = d;  // lockstep iterations of the ancestral loop
          row.call_percentage = 100.0;
          row.wall_time_s = wall;
          row.breakeven = false;
          if (batch == 1) {
            RunRecord rec{seed, 0xffffffffu, 0, static_cast<std::uint32_t>(d),
                          static_cast<std::uint32_t>(K), static_cast<std::uint64_t>(d),
                          outs[0].tokens};
            save_run_record(cfg.output_dir + "/run_" + name + "_s" + std::to_string(seed) + ".psrn",
                            rec);
          }
        } else {
          ForecastStrategy strat = make_strategy(name, lr);
          auto [outs, rep] = batch_sample(lr.model, strat, eps);
          if (!verify_against_ancestral(lr.model, eps, outs, name, seed)) return 1;
          row.arm_calls = rep.arm_calls;
          row.call_percentage = rep.call_percentage;
          row.wall_time_s = rep.wall_time_s;
          row.breakeven = rep.breakeven_satisfied;
          if (batch == 1) {
            std::uint32_t flags = (strat.use_reparam_noise ? 1u : 0u) |
                                  (strat.share_representation ? 2u : 0u);
            RunRecord rec{seed, static_cast<std::uint32_t>(strat.kind), flags,
                          static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(K),
                          static_cast<std::uint64_t>(rep.arm_calls), outs[0].tokens};
            save_run_record(cfg.output_dir + "/run_" + name + "_s" + std::to_string(seed) + ".psrn",
                            rec);
          }
        }
        rows.push_back(row);
      }
    }
  }

  std::ofstream csv(cfg.output_dir + "/bench.csv");
  csv << "dataset,strategy,batch_size,seed,arm_calls,call_percentage,wall_time_s,breakeven\n";
  for (const BenchRow& r : rows)
    csv << r.dataset << "," << r.strategy << "," << r.batch_size << "," << r.seed << ","
        << r.arm_calls << "," << fmt(r.call_percentage) << "," << fmt(r.wall_time_s) << ","
        << (r.breakeven ? 1 : 0) << "\n";
  for (const std::string& name : cfg.bench.strategies) {
    for (Index batch : cfg.bench.batch_sizes) {
      std::vector<double> calls, pct, wall;
      for (const BenchRow& r : rows)
        if (r.strategy == name && r.batch_size == batch) {
          calls.push_back(static_cast<double>(r.arm_calls));
          pct.push_back(r.call_percentage);
          wall.push_back(r.wall_time_s);
        }
      const Aggregate ac = aggregate_of(calls), ap = aggregate_of(pct), aw = aggregate_of(wall);
      csv << cfg.dataset.kind << "," << name << "," << batch << ",mean," << fmt(ac.mean) << ","
          << fmt(ap.mean) << "," << fmt(aw.mean) << ",\n";
      csv << cfg.dataset.kind << "," << name << "," << batch << ",stddev," << fmt(ac.stddev) << ","
          << fmt(ap.stddev) << "," << fmt(aw.stddev) << ",\n";
      std::printf("%-14s batch %3lld  calls %7.2f%% +- %5.2f  time %.4fs +- %.4fs\n", name.c_str(),
                  static_cast<long long>(batch), ap.mean, ap.stddev, aw.mean, aw.stddev);
    }
  }
  print_table1_context();
  std::cout << "wrote " << cfg.output_dir << "/bench.csv\n";
  return 0;
}

int run_maps(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  LoadedRun lr = load_run(cfg, cfg.maps.strategy == "learned");
  const Index d = lr.model.cfg.d;
  const Index K = lr.model.cfg.K;
  const Index channels = cfg.maps.channels;

  Index h = cfg.maps.height, w = cfg.maps.width;
  if (h == 0 || w == 0) {
    const Index spatial = d / channels;
    const auto side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(spatial))));
    if (side * side != spatial)
      throw std::invalid_argument("maps: d is not square; pass maps.height and maps.width");
    h = w = side;
  }
  if (h * w * channels != d) throw std::invalid_argument("maps: height*width*channels != d");

  Rng rng = Rng(cfg.maps.seed).split("noise");
  for (Index s = 0; s < cfg.maps.samples; ++s) {
    NoiseGrid eps = sample_gumbel_grid(rng, d, K);
    TokenBuffer tokens(d, K);
    SampleReport rep;
    if (cfg.maps.strategy == "baseline") {
      std::tie(tokens, rep) = ancestral_sample(lr.model, eps);
    } else {
      ForecastStrategy strat = make_strategy(cfg.maps.strategy, lr);
      std::tie(tokens, rep) = predictive_sample(lr.model, strat, eps);
      auto [ref, ref_rep] = ancestral_sample(lr.model, eps);
      if (!same_tokens(ref, tokens)) throw std::runtime_error("maps: exactness violation");
    }

    const Index spatial = h * w;
    std::vector<std::uint8_t> img(static_cast<size_t>(spatial));
    std::vector<std::uint8_t> mistakes(static_cast<size_t>(spatial));
    std::vector<std::uint8_t> convergence(static_cast<size_t>(spatial));

    std::vector<double> mist(static_cast<size_t>(spatial), 0.0), conv(static_cast<size_t>(spatial), 0.0),
        tok(static_cast<size_t>(spatial), 0.0);
    for (Index p = 0; p < spatial; ++p) {
      for (Index c = 0; c < channels; ++c) {
        const Index i = p * channels + c;
        tok[static_cast<size_t>(p)] += tokens[i];
        mist[static_cast<size_t>(p)] += static_cast<double>(rep.mistakes[static_cast<size_t>(i)]);
        conv[static_cast<size_t>(p)] += rep.convergence[static_cast<size_t>(i)];
      }
      tok[static_cast<size_t>(p)] /= static_cast<double>(channels);
      conv[static_cast<size_t>(p)] /= static_cast<double>(channels);
    }
    const double max_mist = *std::max_element(mist.begin(), mist.end());
    const double max_conv = *std::max_element(conv.begin(), conv.end());
    for (Index p = 0; p < spatial; ++p) {
      img[static_cast<size_t>(p)] = static_cast<std::uint8_t>(
          std::lround(tok[static_cast<size_t>(p)] * 255.0 / static_cast<double>(K - 1)));
      mistakes[static_cast<size_t>(p)] =
          max_mist > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * mist[static_cast<size_t>(p)] / max_mist))
                       : 0;
      convergence[static_cast<size_t>(p)] =
          max_conv > 1.0
              ? static_cast<std::uint8_t>(std::lround(
                    255.0 * std::log(conv[static_cast<size_t>(p)]) / std::log(max_conv)))
              : 0;
    }
    const std::string stem = cfg.output_dir + "/" + cfg.maps.strategy + "_s" + std::to_string(s);
    write_pgm(stem + "_sample.pgm", w, h, img);
    write_pgm(stem + "_mistakes.pgm", w, h, mistakes);
    write_pgm(stem + "_convergence.pgm", w, h, convergence);
    std::cout << "wrote " << stem << "_{sample,mistakes,convergence}.pgm  (calls "
              << rep.arm_calls << "/" << d << ")\n";
  }
  return 0;
}

int run_ablate(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  LoadedRun lr = load_run(cfg, true);
  if (!lr.forecaster_noshare)
    throw std::invalid_argument("missing " + forecaster_noshare_path(cfg) +
                                "; train with forecaster.train_ablation_variant=true");
  const Index d = lr.model.cfg.d;
  const Index K = lr.model.cfg.K;

  struct Condition {
    std::string name;
    ForecastStrategy strategy;
  };
  std::vector<Condition> conditions;
  {
    ForecastStrategy fpi;
    fpi.kind = StrategyKind::Fpi;
    conditions.push_back({"fpi", fpi});
    ForecastStrategy fpi_nr = fpi;
    fpi_nr.use_reparam_noise = false;
    conditions.push_back({"fpi-no-reparam", fpi_nr});
    ForecastStrategy learned;
    learned.kind = StrategyKind::Learned;
    learned.forecaster = &*lr.forecaster;
    conditions.push_back({"learned", learned});
    ForecastStrategy noshare;
    noshare.kind = StrategyKind::Learned;
    noshare.forecaster = &*lr.forecaster_noshare;
    noshare.share_representation = false;
    conditions.push_back({"learned-no-share", noshare});
  }

  std::ofstream csv(cfg.output_dir + "/ablate.csv");
  csv << "condition,seed,arm_calls,call_percentage\n";
  std::vector<std::string> summary;
  for (const Condition& cond : conditions) {
    std::vector<double> pct;
    for (std::uint64_t seed : cfg.bench.seeds) {
      std::vector<NoiseGrid> eps = noise_batch(seed, 1, d, K);
      auto [outs, rep] = batch_sample(lr.model, cond.strategy, eps);
      if (!verify_against_ancestral(lr.model, eps, outs, cond.name, seed)) return 1;
      csv << cond.name << "," << seed << "," << rep.arm_calls << "," << fmt(rep.call_percentage)
          << "\n";
      pct.push_back(rep.call_percentage);
    }
    const Aggregate a = aggregate_of(pct);
    csv << cond.name << ",mean," << fmt(a.mean) << ",\n";
    csv << cond.name << ",stddev," << fmt(a.stddev) << ",\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s calls %7.2f%% +- %5.2f", cond.name.c_str(), a.mean,
                  a.stddev);
    summary.emplace_back(line);
  }
  for (const std::string& s : summary) std::cout << s << "\n";
  print_table3_context();
  std::cout << "wrote " << cfg.output_dir << "/ablate.csv\n";
  return 0;
}

Index exactness_sweep(Index cases, std::uint64_t seed, std::string* first_failure) {
  const Index ds[] = {8, 32, 64};
  const Index Ks[] = {2, 4, 16};
  const StrategyKind kinds[] = {StrategyKind::Zeros, StrategyKind::PredictLast, StrategyKind::Fpi,
                                StrategyKind::Learned};
  Rng rng(seed);
  Index failures = 0;
  for (Index c = 0; c < cases; ++c) {
    const Index d = ds[c % 3];
    const Index K = Ks[(c / 3) % 3];
    const StrategyKind kind = kinds[(c / 9) % 4];
    Rng case_rng = rng.split("case/" + std::to_string(c));
    ArmConfig acfg{d, K, 16, 4, 2};
    ArmModel model = make_arm_random(acfg, case_rng);
    ForecasterConfig fcfg;
    fcfg.T = 3;
    fcfg.H = acfg.H;
    fcfg.K = K;
    Forecaster fc = make_forecaster_random(fcfg, case_rng);
    NoiseGrid eps = sample_gumbel_grid(case_rng, d, K);

    ForecastStrategy strat;
    strat.kind = kind;
    if (kind == StrategyKind::Learned) strat.forecaster = &fc;
    // Half of the noise-ablation space too: forecasts may be wrong more
    // often, outputs must stay identical.
    strat.use_reparam_noise = (c % 2) == 0;

    auto [ref, ref_rep] = ancestral_sample(model, eps);
    auto [got, rep] = predictive_sample(model, strat, eps);
    bool ok = same_tokens(ref, got) && rep.arm_calls <= d && rep.arm_calls >= 1;
    if (ok) {
      std::int64_t mist = 0;
      for (auto m : rep.mistakes) mist += m;
      ok = mist == rep.arm_calls - 1;
    }
    if (!ok) {
      ++failures;
      if (first_failure && first_failure->empty()) {
        Index pos = -1;
        for (Index i = 0; i < d; ++i)
          if (ref[i] != got[i]) {
            pos = i;
            break;
          }
        *first_failure = "case " + std::to_string(c) + " strategy " + to_string(kind) + " d=" +
                         std::to_string(d) + " K=" + std::to_string(K) + " position " +
                         std::to_string(pos);
      }
    }
  }
  return failures;
}

int run_verify(const RunConfig& cfg) {
  std::string failure;
  const Index failures = exactness_sweep(cfg.verify.cases, cfg.verify.seed, &failure);
  if (failures > 0) {
    std::cerr << "exactness sweep: " << failures << " of " << cfg.verify.cases
              << " cases failed; first: " << failure << "\n";
    return 1;
  }
  std::cout << "exactness sweep: " << cfg.verify.cases
            << " cases, all outputs bit-identical to ancestral sampling\n";
  return 0;
}

}  // namespace psamp
