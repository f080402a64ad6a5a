// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "ddpm/checkpoint.hpp"
#include "ddpm/dataset.hpp"
#include "ddpm/errors.hpp"
#include "ddpm/metrics.hpp"
#include "ddpm/orders.hpp"
#include "ddpm/parallel.hpp"
#include "ddpm/rng.hpp"
#include "ddpm/sampler.hpp"
#include "ddpm/trainer.hpp"

namespace ddpm::cli {

namespace fs = std::filesystem;

namespace {

// Sub-seed indices fanned out from the single --seed.
constexpr std::uint64_t kDataSeedIndex = 1;
constexpr std::uint64_t kInitSeedIndex = 2;
constexpr std::uint64_t kTrainSeedIndex = 3;
constexpr std::uint64_t kSampleSeedIndex = 4;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DomainError(what + ": cannot parse '" + s + "' as a number");
  }
}

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& item : split(s, ',')) {
    const double v = parse_double(item, what);
    if (!(v >= 1.0) || v != std::floor(v)) throw DomainError(what + ": '" + item + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw DomainError(what + " is empty");
  return out;
}

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Options shared by several commands

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t jobs = 1;
};

struct ScheduleOpts {
  std::size_t steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct DataOpts {
  std::string data;
  std::size_t synthetic = 0;
  std::size_t size = kDefaultPhantomSize;
  double dose = 0.25;
  std::optional<std::uint64_t> data_seed;
};

struct ModelOpts {
  std::string checkpoint;
  std::string oracle;  // "mu,s0"
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value file; flags override it");
  app->add_option("--seed", c.seed, "root seed for every random stream");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

void add_schedule(CLI::App* app, ScheduleOpts& s) {
  app->add_option("--steps", s.steps, "diffusion steps T")->check(CLI::PositiveNumber);
  app->add_option("--beta-start", s.beta_start, "beta_1 of the linear schedule");
  app->add_option("--beta-end", s.beta_end, "beta_T of the linear schedule");
}

void add_data(CLI::App* app, DataOpts& d) {
  app->add_option("--data", d.data, "directory of pair_<k>_{ldct,ndct}.imgt files");
  app->add_option("--synthetic", d.synthetic, "generate this many phantom pairs instead");
  app->add_option("--size", d.size, "phantom side length")->check(CLI::Range(16, 4096));
  app->add_option("--dose", d.dose, "low-dose factor in (0, 1]");
  app->add_option("--data-seed", d.data_seed, "phantom seed (default: derived from --seed)");
}

void add_model(CLI::App* app, ModelOpts& m) {
  app->add_option("--checkpoint", m.checkpoint, "trained model file");
  app->add_option("--oracle-gaussian", m.oracle, "analytic predictor 'mu,s0' instead of a checkpoint");
}

PairedDataset load_data(const DataOpts& d, const Common& c, bool required) {
  if (!d.data.empty() && d.synthetic > 0) throw DomainError("give either --data or --synthetic, not both");
  if (!d.data.empty()) return load_paired_dir(d.data);
  if (d.synthetic > 0) {
    return make_synthetic_dataset(d.synthetic, d.size, d.dose,
                                  d.data_seed.value_or(split_seed(c.seed, kDataSeedIndex)));
  }
  if (required) throw DomainError("no dataset: pass --data DIR or --synthetic N");
  return {};
}

/// Owns the schedule and the predictor bound to it.
class Model {
 public:
  Model(const ModelOpts& m, const ScheduleOpts& s) {
    if (!m.checkpoint.empty() && !m.oracle.empty()) {
      throw DomainError("give either --checkpoint or --oracle-gaussian, not both");
    }
    if (!m.checkpoint.empty()) {
      const Checkpoint ck = load_checkpoint(m.checkpoint);
      schedule_ = std::make_unique<VarianceSchedule>(VarianceSchedule::from_descriptor(ck.schedule));
      mode_ = ck.metadata.mode;
      conv_ = std::make_unique<ConvDenoiser>(ck.denoiser());
      return;
    }
    if (m.oracle.empty()) throw DomainError("no predictor: pass --checkpoint PATH or --oracle-gaussian mu,s0");
    const auto parts = split(m.oracle, ',');
    if (parts.size() != 2) throw DomainError("--oracle-gaussian expects 'mu,s0'");
    GaussianOracleParams p{ImageTensor::scalar(parse_double(parts[0], "oracle mu")),
                           parse_double(parts[1], "oracle s0")};
    schedule_ = std::make_unique<VarianceSchedule>(
        VarianceSchedule::from_descriptor({s.steps, s.beta_start, s.beta_end}));
    oracle_ = std::make_unique<GaussianOracle>(std::move(p), *schedule_);
  }

  const VarianceSchedule& schedule() const { return *schedule_; }
  const NoisePredictor& predictor() const {
    return conv_ ? static_cast<const NoisePredictor&>(*conv_) : *oracle_;
  }
  bool is_oracle() const { return oracle_ != nullptr; }
  TrainMode mode() const { return mode_; }

 private:
  std::unique_ptr<VarianceSchedule> schedule_;
  std::unique_ptr<ConvDenoiser> conv_;
  std::unique_ptr<GaussianOracle> oracle_;
  TrainMode mode_ = TrainMode::kDdpm;
};

// ---------------------------------------------------------------------------
// Sampler dispatch

struct SamplerChoice {
  std::string kind = "dpm";  // ancestral | rk4 | dpm | direct
  std::size_t nfe = 50;
  std::size_t rk4_steps = 100;
  TimeGrid grid = TimeGrid::kUniformTime;

  std::size_t expected_nfe(std::size_t T) const {
    if (kind == "ancestral") return T;
    if (kind == "rk4") return 4 * rk4_steps;
    if (kind == "direct") return 1;
    return nfe;
  }
};

/// "ddpm", "ancestral", "dpm-<nfe>", "rk4-<steps>", "direct".
SamplerChoice parse_method(const std::string& name) {
  SamplerChoice c;
  if (name == "ddpm" || name == "ancestral") {
    c.kind = "ancestral";
  } else if (name == "direct") {
    c.kind = "direct";
  } else if (name.rfind("dpm-", 0) == 0) {
    c.kind = "dpm";
    c.nfe = parse_size_list(name.substr(4), "method " + name).front();
  } else if (name.rfind("rk4-", 0) == 0) {
    c.kind = "rk4";
    c.rk4_steps = parse_size_list(name.substr(4), "method " + name).front();
  } else {
    throw DomainError("unknown method '" + name + "'");
  }
  return c;
}

SampleResult run_sampler(const SamplerChoice& choice, const Shape& shape, const ImageTensor* cond,
                         const NoisePredictor& net, const VarianceSchedule& schedule,
                         std::uint64_t seed) {
  if (choice.kind == "ancestral") return ancestral_sample(shape, cond, net, schedule, seed);
  if (choice.kind == "rk4") {
    return rk4_sample(shape, cond, net, schedule, choice.rk4_steps, seed, choice.grid);
  }
  if (choice.kind == "direct") {
    if (cond == nullptr) throw DomainError("direct sampling needs a condition image");
    const auto start = std::chrono::steady_clock::now();
    SampleResult r;
    r.image = net.predict(*cond, cond, Timestep{0.0, 0.0, std::nullopt});
    r.trace.nfe = 1;
    r.trace.steps.push_back({0.0, 1});
    r.trace.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }
  return dpm_sample(shape, cond, net, schedule, plan_nfe(choice.nfe, 1.0, kSamplerMinTime, schedule),
                    seed);
}

std::uint64_t image_seed(std::uint64_t seed, std::size_t k) {
  return split_seed(split_seed(seed, kSampleSeedIndex), k);
}

// ---------------------------------------------------------------------------
// Effective-config echo

void write_effective_config(const CLI::App& sub, std::ostream& os) {
  os << "# ddpm " << sub.get_name() << " effective configuration\n";
  for (const CLI::Option* opt : sub.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help" || names.front() == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      value = res.empty() ? std::string() : res.back();
    } else {
      value = opt->get_default_str();
    }
    if (value.empty()) continue;
    os << names.front() << " = " << value << '\n';
  }
}

void persist_config(const CLI::App& sub, const fs::path& out_dir, std::ostream& out) {
  std::ostringstream text;
  write_effective_config(sub, text);
  out << text.str();
  std::ofstream f(out_dir / "config.ini", std::ios::trunc);
  if (!f) throw DataError("cannot write " + (out_dir / "config.ini").string());
  f << text.str();
}

fs::path prepare_out(const Common& c) {
  const fs::path p(c.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory " + c.out + ": " + ec.message());
  return p;
}

std::ofstream open_csv(const fs::path& p) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw DataError("cannot write " + p.string());
  return f;
}

// ---------------------------------------------------------------------------
// Commands

struct TrainOpts {
  Common common;
  ScheduleOpts schedule;
  DataOpts data;
  std::size_t iters = 1000;
  double lr = 1e-4;
  std::size_t batch = 4;
  std::string mode = "ddpm";
};

int cmd_train(const TrainOpts& o, const CLI::App& sub, std::ostream& out) {
  const PairedDataset data = load_data(o.data, o.common, true);
  const VarianceSchedule schedule =
      VarianceSchedule::from_descriptor({o.schedule.steps, o.schedule.beta_start, o.schedule.beta_end});
  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.batch_size = o.batch;
  cfg.max_iterations = o.iters;
  cfg.seed = split_seed(o.common.seed, kTrainSeedIndex);
  cfg.mode = parse_train_mode(o.mode);
  cfg.jobs = o.common.jobs;
  cfg.validate();

  const fs::path dir = prepare_out(o.common);
  persist_config(sub, dir, out);

  const std::size_t every = std::max<std::size_t>(1, o.iters / 10);
  const auto result = train(data, ConvDenoiser::initialized({}, split_seed(o.common.seed, kInitSeedIndex)),
                            cfg, schedule, [&](const TrainRecord& r) {
                              if ((r.iteration + 1) % every == 0) {
                                out << "iteration " << r.iteration + 1 << " loss " << format_real(r.loss) << '\n';
                              }
                            });
  save_checkpoint(result.checkpoint, dir / "model.ckpt");
  write_loss_csv(result.history, (dir / "loss.csv").string());
  out << "wrote " << (dir / "model.ckpt").string() << " and " << (dir / "loss.csv").string() << '\n';
  return kOk;
}

struct SampleOpts {
  Common common;
  ScheduleOpts schedule;
  DataOpts data;
  ModelOpts model;
  std::string sampler = "dpm";
  std::size_t nfe = 50;
  std::size_t rk4_steps = 100;
  std::string grid = "time";
  std::size_t count = 1;
  double peak = 1.0;
};

int cmd_sample(const SampleOpts& o, const CLI::App& sub, std::ostream& out) {
  const Model model(o.model, o.schedule);
  const PairedDataset data = load_data(o.data, o.common, !model.is_oracle());
  SamplerChoice choice;
  choice.kind = o.sampler;
  choice.nfe = o.nfe;
  choice.rk4_steps = o.rk4_steps;
  choice.grid = o.grid == "lambda" ? TimeGrid::kUniformLambda : TimeGrid::kUniformTime;
  if (choice.kind == "direct" && data.empty()) throw DomainError("direct sampling needs --data or --synthetic");

  const std::size_t n = data.empty() ? o.count : data.size();
  const Shape shape = data.empty() ? Shape{1, o.data.size, o.data.size} : data.pairs[0].ldct.shape();

  const fs::path dir = prepare_out(o.common);
  persist_config(sub, dir, out);

  std::vector<SampleResult> results(n);
  parallel_for(n, o.common.jobs, [&](std::size_t k) {
    const ImageTensor* cond = data.empty() ? nullptr : &data.pairs[k].ldct;
    results[k] = run_sampler(choice, shape, cond, model.predictor(), model.schedule(),
                             image_seed(o.common.seed, k));
  });

  const double wl = data.empty() ? 0.0 : data.metadata.window_low;
  const double wh = data.empty() ? 1.0 : data.metadata.window_high;
  auto samples = open_csv(dir / "samples.csv");
  auto trace = open_csv(dir / "trace.csv");
  samples << "image,nfe,seconds,psnr,ssim\n";
  trace << "image,step,t,calls\n";
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = results[k];
    const std::string stem = "sample_" + std::to_string(k);
    save_tensor(r.image, dir / (stem + ".imgt"));
    export_display_png(r.image, wl, wh, dir / (stem + ".pgm"));
    samples << k << ',' << r.trace.nfe << ',' << format_real(r.trace.seconds) << ',';
    if (!data.empty()) {
      samples << format_real(psnr(data.pairs[k].ndct, r.image, o.peak)) << ','
              << format_real(ssim(data.pairs[k].ndct, r.image, o.peak));
    } else {
      samples << ',';
    }
    samples << '\n';
    for (std::size_t i = 0; i < r.trace.steps.size(); ++i) {
      trace << k << ',' << i << ',' << format_real(r.trace.steps[i].t) << ',' << r.trace.steps[i].calls << '\n';
    }
    out << stem << " nfe " << r.trace.nfe << '\n';
  }
  return kOk;
}

struct EvalOpts {
  Common common;
  std::string reference;
  std::string test;
  double peak = 1.0;
};

std::vector<std::string> tensor_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".imgt") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

int cmd_eval(const EvalOpts& o, const CLI::App& sub, std::ostream& out) {
  const auto ref_names = tensor_names(o.reference);
  const auto test_names = tensor_names(o.test);
  if (ref_names.empty()) throw DataError("no .imgt files in " + o.reference);
  if (ref_names != test_names) {
    throw DataError("reference and test directories hold different file sets");
  }
  std::vector<ImageTensor> refs, tests;
  for (const auto& name : ref_names) {
    refs.push_back(load_tensor(fs::path(o.reference) / name));
    tests.push_back(load_tensor(fs::path(o.test) / name));
  }
  const fs::path dir = prepare_out(o.common);
  persist_config(sub, dir, out);
  const MetricReport rep = evaluate("eval", refs, tests, o.peak, ref_names);
  std::ostringstream csv;
  csv << "name,psnr,ssim\n";
  for (std::size_t i = 0; i < ref_names.size(); ++i) {
    csv << ref_names[i] << ',' << format_real(rep.psnr[i]) << ',' << format_real(rep.ssim[i]) << '\n';
  }
  csv << "mean," << format_real(rep.mean_psnr) << ',' << format_real(rep.mean_ssim) << '\n';
  open_csv(dir / "metrics.csv") << csv.str();
  out << csv.str();
  return kOk;
}

struct BenchOpts {
  Common common;
  ScheduleOpts schedule;
  DataOpts data;
  ModelOpts model;
  std::string methods = "ddpm,dpm-50,dpm-15";
  std::size_t reps = 3;
  double peak = 1.0;
};

int cmd_bench(const BenchOpts& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  if (o.reps < 3) {
    err << "bench: refusing to time with " << o.reps << " repetition(s); use --reps 3 or more\n";
    return kUsage;
  }
  std::vector<std::pair<std::string, SamplerChoice>> methods;
  bool want_ldct = false;
  for (const auto& name : split(o.methods, ',')) {
    if (name == "ldct") {
      want_ldct = true;
    } else {
      methods.emplace_back(name, parse_method(name));
    }
  }
  const Model model(o.model, o.schedule);
  DataOpts dopts = o.data;
  if (dopts.data.empty() && dopts.synthetic == 0) dopts.synthetic = 4;
  const PairedDataset data = load_data(dopts, o.common, true);

  const fs::path dir = prepare_out(o.common);
  persist_config(sub, dir, out);

  std::vector<ImageTensor> refs;
  for (const auto& p : data.pairs) refs.push_back(p.ndct);

  std::ostringstream csv;
  csv << "method,psnr,ssim,seconds_per_image,nfe\n";
  if (want_ldct) {
    std::vector<ImageTensor> noisy;
    for (const auto& p : data.pairs) noisy.push_back(p.ldct);
    const auto rep = evaluate("ldct", refs, noisy, o.peak);
    csv << "ldct," << format_real(rep.mean_psnr) << ',' << format_real(rep.mean_ssim) << ",0,0\n";
  }
  for (const auto& [name, choice] : methods) {
    std::vector<SampleResult> results(data.size());
    parallel_for(data.size(), o.common.jobs, [&](std::size_t k) {
      results[k] = run_sampler(choice, data.pairs[k].ldct.shape(), &data.pairs[k].ldct, model.predictor(),
                               model.schedule(), image_seed(o.common.seed, k));
    });
    std::vector<ImageTensor> outs;
    for (auto& r : results) outs.push_back(std::move(r.image));
    const auto rep = evaluate(name, refs, outs, o.peak);
    const auto& first = data.pairs[0].ldct;
    const BenchResult timing = bench([&] {
      return run_sampler(choice, first.shape(), &first, model.predictor(), model.schedule(),
                         image_seed(o.common.seed, 0)).trace;
    }, o.reps);
    csv << name << ',' << format_real(rep.mean_psnr) << ',' << format_real(rep.mean_ssim) << ','
        << format_real(timing.mean_seconds) << ',' << timing.nfe << '\n';
  }
  open_csv(dir / "bench.csv") << csv.str();
  out << csv.str();
  return kOk;
}

struct OrdersOpts {
  Common common;
  ScheduleOpts schedule;
  double mu0 = 0.3;
  double s0 = 0.7;
  std::string ladder = "8,16,32,64,128,256";
};

int cmd_orders(const OrdersOpts& o, const CLI::App& sub, std::ostream& out) {
  const VarianceSchedule schedule =
      VarianceSchedule::from_descriptor({o.schedule.steps, o.schedule.beta_start, o.schedule.beta_end});
  const auto ladder = parse_size_list(o.ladder, "--ladder");
  const fs::path dir = prepare_out(o.common);
  persist_config(sub, dir, out);
  const auto studies = convergence_orders(o.mu0, o.s0, ladder, schedule);

  std::ostringstream slopes;
  slopes << "solver,order,r_squared\n";
  auto errors = open_csv(dir / "orders_errors.csv");
  errors << "solver,steps,error\n";
  for (const auto& s : studies) {
    slopes << "dpm-solver-" << s.solver_order << ',' << format_real(s.order) << ','
           << format_real(s.r_squared) << '\n';
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
      errors << "dpm-solver-" << s.solver_order << ',' << s.steps[i] << ',' << format_real(s.errors[i]) << '\n';
    }
  }
  open_csv(dir / "orders.csv") << slopes.str();
  out << slopes.str();
  return kOk;
}

/// Finds the --config value, if any, without a full parse.
std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw DataError(path + ":" + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional diffusion denoiser with fast ODE samplers", "ddpm"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  TrainOpts train_o;
  auto* train_cmd = app.add_subcommand("train", "train the noise predictor");
  add_common(train_cmd, train_o.common);
  add_schedule(train_cmd, train_o.schedule);
  add_data(train_cmd, train_o.data);
  train_cmd->add_option("--iters", train_o.iters, "optimizer steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", train_o.batch, "images per step")->check(CLI::PositiveNumber);
  train_cmd->add_option("--mode", train_o.mode, "ddpm or baseline")->check(CLI::IsMember({"ddpm", "baseline"}));

  SampleOpts sample_o;
  auto* sample_cmd = app.add_subcommand("sample", "denoise or generate images");
  add_common(sample_cmd, sample_o.common);
  add_schedule(sample_cmd, sample_o.schedule);
  add_data(sample_cmd, sample_o.data);
  add_model(sample_cmd, sample_o.model);
  sample_cmd->add_option("--sampler", sample_o.sampler, "ancestral, rk4, dpm or direct")
      ->check(CLI::IsMember({"ancestral", "rk4", "dpm", "direct"}));
  sample_cmd->add_option("--nfe", sample_o.nfe, "DPM-Solver evaluation budget")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--rk4-steps", sample_o.rk4_steps, "RK4 step count")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--rk4-grid", sample_o.grid, "RK4 grid: time or lambda")
      ->check(CLI::IsMember({"time", "lambda"}));
  sample_cmd->add_option("--count", sample_o.count, "images to draw without a dataset")
      ->check(CLI::PositiveNumber);
  sample_cmd->add_option("--peak", sample_o.peak, "PSNR/SSIM peak value")->check(CLI::PositiveNumber);

  EvalOpts eval_o;
  auto* eval_cmd = app.add_subcommand("eval", "score test tensors against references");
  add_common(eval_cmd, eval_o.common);
  eval_cmd->add_option("--reference", eval_o.reference, "reference .imgt directory")->required();
  eval_cmd->add_option("--test", eval_o.test, "test .imgt directory")->required();
  eval_cmd->add_option("--peak", eval_o.peak, "PSNR/SSIM peak value")->check(CLI::PositiveNumber);

  BenchOpts bench_o;
  auto* bench_cmd = app.add_subcommand("bench", "quality and timing table per sampler");
  add_common(bench_cmd, bench_o.common);
  add_schedule(bench_cmd, bench_o.schedule);
  add_data(bench_cmd, bench_o.data);
  add_model(bench_cmd, bench_o.model);
  bench_cmd->add_option("--methods", bench_o.methods, "comma list of ldct, ddpm, dpm-<nfe>, rk4-<steps>, direct");
  bench_cmd->add_option("--reps", bench_o.reps, "timed repetitions (at least 3)");
  bench_cmd->add_option("--peak", bench_o.peak, "PSNR/SSIM peak value")->check(CLI::PositiveNumber);

  OrdersOpts orders_o;
  auto* orders_cmd = app.add_subcommand("orders", "empirical DPM-Solver convergence orders");
  add_common(orders_cmd, orders_o.common);
  add_schedule(orders_cmd, orders_o.schedule);
  orders_cmd->add_option("--mu0", orders_o.mu0, "Gaussian data mean");
  orders_cmd->add_option("--s0", orders_o.s0, "Gaussian data std")->check(CLI::PositiveNumber);
  orders_cmd->add_option("--ladder", orders_o.ladder, "comma list of step counts");

  try {
    std::vector<std::string> args = args_in;
    if (const auto cfg = find_config(args); cfg && !args.empty()) {
      std::vector<std::string> injected;
      for (const auto& [k, v] : read_config_file(*cfg)) injected.push_back("--" + k + "=" + v);
      args.insert(args.begin() + 1, injected.begin(), injected.end());
    }
    std::vector<std::string> argv_store{"ddpm"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsage;
    }

    if (*train_cmd) return cmd_train(train_o, *train_cmd, out);
    if (*sample_cmd) return cmd_sample(sample_o, *sample_cmd, out);
    if (*eval_cmd) return cmd_eval(eval_o, *eval_cmd, out);
    if (*bench_cmd) return cmd_bench(bench_o, *bench_cmd, out, err);
    if (*orders_cmd) return cmd_orders(orders_o, *orders_cmd, out);
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace ddpm::cli
