#include "carbcal/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

#include "carbcal/calcurve.hpp"
#include "carbcal/calibrate.hpp"
#include "carbcal/dpmm.hpp"
#include "carbcal/error.hpp"
#include "carbcal/predictive.hpp"
#include "carbcal/samples_io.hpp"
#include "carbcal/simstudy.hpp"
#include "text_util.hpp"

namespace carbcal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string curve;
  std::string out;
  bool force = false;
};

fs::path resolve_curve_path(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("CARBCAL_CURVE"); env && *env) return env;
#ifdef CARBCAL_DEFAULT_CURVE
  if (fs::exists(CARBCAL_DEFAULT_CURVE)) return CARBCAL_DEFAULT_CURVE;
#endif
  throw UsageError("no calibration curve: pass --curve or set CARBCAL_CURVE");
}

std::string default_dir_name(std::string_view sub, std::uint64_t seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream name;
  name << sub << '_' << std::put_time(&tm, "%Y%m%d-%H%M%S") << '_' << std::hex << std::setw(6)
       << std::setfill('0') << (std::hash<std::uint64_t>{}(seed) & 0xffffff);
  return name.str();
}

fs::path prepare_output(const CommonOptions& common, std::string_view sub, std::uint64_t seed) {
  const fs::path dir = common.out.empty() ? fs::path(default_dir_name(sub, seed)) : fs::path(common.out);
  if (fs::exists(dir) && !fs::is_empty(dir) && !common.force)
    throw UsageError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  body(out);
  if (!out) throw DataError("failed writing " + path.string());
}

void write_manifest(const fs::path& dir, std::string_view sub, const json& inputs,
                    const json& config, std::optional<std::uint64_t> seed) {
  json m{{"tool", "carbcal"},
         {"version", CARBCAL_VERSION},
         {"subcommand", std::string(sub)},
         {"inputs", inputs},
         {"config", config},
         {"seed", seed ? json(*seed) : json(nullptr)},
         {"output_dir", dir.string()}};
  write_text(dir / "manifest.json", [&](std::ostream& o) { o << m.dump(2) << '\n'; });
}

// File-system friendly label; duplicate ids get a numeric suffix.
std::vector<std::string> file_labels(std::span<const Determination> dets) {
  std::vector<std::string> out;
  std::map<std::string, int> seen;
  for (const auto& d : dets) {
    std::string label;
    for (char c : d.id) label += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    if (label.empty()) label = "det";
    const int k = seen[label]++;
    out.push_back(k == 0 ? label : label + "_" + std::to_string(k + 1));
  }
  return out;
}

std::optional<std::pair<double, double>> parse_range(const std::vector<double>& range) {
  if (range.empty()) return std::nullopt;
  if (range.size() != 2 || !(range[1] > range[0]))
    throw UsageError("--range takes two increasing values: LO HI");
  return std::pair{range[0], range[1]};
}

Hyperparameters resolve_hyper(std::span<const Determination> dets, const CalibrationCurve& curve,
                              const std::vector<std::string>& overrides, MadMode mad_mode) {
  json patch = json::object();
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--hyper expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const double value = parse_double(kv.substr(eq + 1), "--hyper " + key);
    if (key == "slice_max_steps" || key == "n_init_clusters") {
      if (value != std::floor(value)) throw UsageError("--hyper " + key + " must be an integer");
      patch[key] = static_cast<int>(value);
    } else {
      patch[key] = value;
    }
  }

  Hyperparameters base;
  try {
    base = default_hyperparameters(dets, curve, DefaultsOptions{5.0, mad_mode});
  } catch (const DataError&) {
    // Defaults are undefined for one determination or identical MAP ages;
    // a user who supplies the data-dependent keys can still run.
    for (const char* key : {"lambda", "nu2", "xi", "psi"})
      if (!patch.contains(key)) throw;
  }
  try {
    auto h = hyper_from_json(patch, base);
    validate(h);
    return h;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

MadMode parse_mad_mode(const std::string& s) {
  if (s == "median") return MadMode::median;
  if (s == "maximum") return MadMode::maximum;
  throw UsageError("--mad-mode must be median or maximum");
}

// ---------------------------------------------------------------- calibrate

struct CalibrateOptions {
  CommonOptions common;
  std::string dets;
  double resolution = 0.0;
  std::vector<double> range;
  std::vector<double> levels{0.683, 0.954};
};

int cmd_calibrate(const CalibrateOptions& o, std::ostream& out) {
  const auto dets = load_determinations(o.dets);
  const auto curve_path = resolve_curve_path(o.common.curve);
  const auto curve = load_curve(curve_path);
  const auto range = parse_range(o.range);
  const double span = range ? range->second - range->first : curve.max_age() - curve.min_age();
  const double res = o.resolution > 0.0 ? o.resolution : default_resolution(span);
  for (double level : o.levels)
    if (!(level > 0.0 && level < 1.0)) throw UsageError("--levels must lie in (0, 1)");

  const auto dir = prepare_output(o.common, "calibrate", 0);
  write_manifest(dir, "calibrate", {{"dets", o.dets}, {"curve", curve_path.string()}},
                 {{"resolution", res}, {"range", o.range}, {"levels", o.levels}}, std::nullopt);

  const auto labels = file_labels(dets);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto grid = calibrate_independent(dets[i], curve, res, range);
    write_text(dir / ("posterior_" + labels[i] + ".csv"),
               [&](std::ostream& f) { write_density_grid(f, grid); });
    for (double level : o.levels) {
      const auto hpd = hpd_intervals(grid, level);
      write_text(dir / ("hpd_" + labels[i] + "_" + format_number(level) + ".csv"),
                 [&](std::ostream& f) { write_hpd(f, hpd); });
    }
  }
  out << "calibrated " << dets.size() << " determination(s) into " << dir.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------- spd

struct SpdOptions {
  CommonOptions common;
  std::string dets;
  double resolution = 0.0;
  std::vector<double> range;
};

int cmd_spd(const SpdOptions& o, std::ostream& out) {
  const auto dets = load_determinations(o.dets);
  const auto curve_path = resolve_curve_path(o.common.curve);
  const auto curve = load_curve(curve_path);
  const auto range = parse_range(o.range);
  const double span = range ? range->second - range->first : curve.max_age() - curve.min_age();
  const double res = o.resolution > 0.0 ? o.resolution : default_resolution(span);

  const auto dir = prepare_output(o.common, "spd", 0);
  write_manifest(dir, "spd", {{"dets", o.dets}, {"curve", curve_path.string()}},
                 {{"resolution", res}, {"range", o.range}}, std::nullopt);
  const auto grid = spd(dets, curve, res, range);
  write_text(dir / "spd.csv", [&](std::ostream& f) { write_density_grid(f, grid); });
  out << "SPD of " << dets.size() << " determination(s) written to " << (dir / "spd.csv").string()
      << '\n';
  return kOk;
}

// --------------------------------------------------------------------- dpmm

struct DpmmOptions {
  CommonOptions common;
  std::string dets;
  std::string sampler = "polya";
  int iters = 50000;
  std::optional<int> burn;
  int thin = 5;
  std::uint64_t seed = 1;
  std::vector<std::string> hyper;
  std::string mad_mode = "median";
  int chains = 1;
  double grid_resolution = 0.0;
  bool full_grid = false;
};

void write_calendar_summaries(const fs::path& dir, const std::string& suffix,
                              std::span<const Determination> dets,
                              const PosteriorSamples& samples) {
  std::ofstream summary(dir / ("calendar_ages" + suffix + ".csv"), std::ios::binary);
  std::ofstream hpd(dir / ("calendar_age_hpd" + suffix + ".csv"), std::ios::binary);
  summary << "id,mean,median,sd\n";
  hpd << "id,level,lo,hi,mass\n";
  std::vector<double> draws(samples.states.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t s = 0; s < draws.size(); ++s) draws[s] = samples.states[s].theta[i];
    double mean = 0.0;
    for (double d : draws) mean += d;
    mean /= static_cast<double>(draws.size());
    double var = 0.0;
    for (double d : draws) var += (d - mean) * (d - mean);
    const double sd = draws.size() > 1 ? std::sqrt(var / static_cast<double>(draws.size() - 1)) : 0.0;
    summary << dets[i].id << ',' << format_number(mean) << ',' << format_number(median(draws)) << ','
            << format_number(sd) << '\n';
    // Freedman-Diaconis bin width in whole years; 1-yr bins leave a few
    // thousand draws too sparse and the intervals fragment.
    const double iqr = quantile(draws, 0.75) - quantile(draws, 0.25);
    const double width =
        std::max(1.0, std::ceil(2.0 * iqr / std::cbrt(static_cast<double>(draws.size()))));
    const auto grid = draws_to_grid(draws, width);
    for (double level : {0.683, 0.954}) {
      for (const auto& iv : hpd_intervals(grid, level))
        hpd << dets[i].id << ',' << format_number(level) << ',' << format_number(iv.lo) << ','
            << format_number(iv.hi) << ',' << format_number(iv.mass) << '\n';
    }
  }
}

int cmd_dpmm(const DpmmOptions& o, std::ostream& out, std::ostream& err) {
  const auto dets = load_determinations(o.dets);
  const auto curve_path = resolve_curve_path(o.common.curve);
  const auto curve = load_curve(curve_path);

  ChainConfig cfg;
  try {
    cfg.sampler = parse_sampler(o.sampler);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.n_iter = o.iters;
  cfg.n_burn = o.burn.value_or(o.iters / 2);
  cfg.thin = o.thin;
  cfg.seed = o.seed;
  cfg.hyper = resolve_hyper(dets, curve, o.hyper, parse_mad_mode(o.mad_mode));
  try {
    validate(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.chains < 1) throw UsageError("--chains must be >= 1");
  if (stored_count(cfg) < 100)
    err << "warning: only " << stored_count(cfg)
        << " stored samples; predictive intervals will be unstable\n";

  DensityGrid grid;
  if (o.full_grid) {
    grid.resolution = default_resolution(curve.max_age() - curve.min_age());
    grid.theta = uniform_grid(curve.min_age(), curve.max_age(), grid.resolution);
  } else {
    grid = default_predictive_grid(dets, curve);
  }
  if (o.grid_resolution > 0.0) {
    grid.resolution = o.grid_resolution;
    grid.theta = uniform_grid(grid.theta.front(), grid.theta.back(), grid.resolution);
  }

  const auto dir = prepare_output(o.common, "dpmm", o.seed);
  json chain_configs = json::array();
  for (int c = 0; c < o.chains; ++c) {
    auto chain_cfg = cfg;
    chain_cfg.seed = cfg.seed + static_cast<std::uint64_t>(c);
    chain_configs.push_back(to_json(chain_cfg));
  }
  write_manifest(dir, "dpmm", {{"dets", o.dets}, {"curve", curve_path.string()}},
                 {{"chains", chain_configs},
                  {"mad_mode", o.mad_mode},
                  {"grid", {{"lo", grid.theta.front()}, {"hi", grid.theta.back()},
                            {"resolution", grid.resolution}}}},
                 o.seed);

  std::vector<std::string> ids;
  for (const auto& d : dets) ids.push_back(d.id);

  for (int c = 0; c < o.chains; ++c) {
    auto chain_cfg = cfg;
    chain_cfg.seed = cfg.seed + static_cast<std::uint64_t>(c);
    const std::string suffix = o.chains > 1 ? "_chain" + std::to_string(c + 1) : "";
    const auto samples = run_chain(dets, curve, chain_cfg);
    write_samples(dir / ("samples" + suffix), samples, ids);
    const auto pred = predictive_density(samples.states, cfg.hyper, grid.theta, grid.resolution);
    write_text(dir / ("predictive" + suffix + ".csv"),
               [&](std::ostream& f) { write_predictive(f, pred); });
    write_text(dir / ("cluster_counts" + suffix + ".csv"), [&](std::ostream& f) {
      write_cluster_histogram(f, cluster_count_posterior(samples.states));
    });
    write_calendar_summaries(dir, suffix, dets, samples);
    out << "chain " << c + 1 << ": " << samples.states.size() << " stored samples, alpha acceptance "
        << format_number(samples.alpha_acceptance) << '\n';
  }
  out << "outputs in " << dir.string() << '\n';
  return kOk;
}

// ----------------------------------------------------------------- simulate

struct SimulateOptions {
  CommonOptions common;
  std::vector<std::string> families{"single_normal"};
  std::vector<std::size_t> n_values{50};
  int runs = 10;
  int iters = 10000;
  int burn = 5000;
  int thin = 5;
  std::vector<std::string> samplers{"polya", "walker"};
  std::uint64_t seed = 1;
  int jobs = 1;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  StudyConfig cfg;
  try {
    cfg.families.clear();
    for (const auto& f : o.families) cfg.families.push_back(parse_family(f));
    cfg.samplers.clear();
    for (const auto& s : o.samplers) cfg.samplers.push_back(parse_sampler(s));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.n_values = o.n_values;
  cfg.n_runs = o.runs;
  cfg.n_iter = o.iters;
  cfg.n_burn = o.burn;
  cfg.thin = o.thin;
  cfg.seed = o.seed;
  cfg.jobs = o.jobs;
  if (cfg.n_runs < 1 || cfg.jobs < 1) throw UsageError("--runs and --jobs must be >= 1");
  for (auto n : cfg.n_values)
    if (n < 2) throw UsageError("--n must be >= 2");
  try {
    validate(ChainConfig{cfg.n_iter, cfg.n_burn, cfg.thin, SamplerKind::polya, 0, {}});
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto curve_path = resolve_curve_path(o.common.curve);
  const auto curve = load_curve(curve_path);
  const auto dir = prepare_output(o.common, "simulate", o.seed);
  write_manifest(dir, "simulate", {{"curve", curve_path.string()}},
                 {{"families", o.families},
                  {"n", o.n_values},
                  {"runs", o.runs},
                  {"iters", o.iters},
                  {"burn", o.burn},
                  {"thin", o.thin},
                  {"samplers", o.samplers}},
                 o.seed);

  const auto results = run_study(cfg, curve);
  write_text(dir / "study_table.csv", [&](std::ostream& f) { write_study_table(f, results); });
  write_text(dir / "study_runs.json",
             [&](std::ostream& f) { f << to_json(results).dump(2) << '\n'; });
  write_study_table(out, results);
  return kOk;
}

void add_common(CLI::App* sub, CommonOptions& common) {
  sub->add_option("--curve", common.curve,
                  "Calibration curve file (default: $CARBCAL_CURVE, then bundled IntCal20)");
  sub->add_option("--out", common.out, "Output directory (default: <cmd>_<timestamp>_<hash>)");
  sub->add_flag("--force", common.force, "Allow writing into a non-empty output directory");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian nonparametric calibration and summarisation of radiocarbon determinations",
               "carbcal"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CARBCAL_VERSION);

  CalibrateOptions cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Independent grid calibration with HPD intervals");
  add_common(cal_cmd, cal.common);
  cal_cmd->add_option("--dets", cal.dets, "Determinations CSV (id,c14_age,c14_sig)")->required();
  cal_cmd->add_option("--resolution", cal.resolution, "Grid spacing in cal yr");
  cal_cmd->add_option("--range", cal.range, "Restrict the grid to LO HI cal BP")->expected(2);
  cal_cmd->add_option("--levels", cal.levels, "HPD probability levels")->delimiter(',');

  SpdOptions sp;
  auto* spd_cmd = app.add_subcommand("spd", "Summed probability distribution");
  add_common(spd_cmd, sp.common);
  spd_cmd->add_option("--dets", sp.dets, "Determinations CSV (id,c14_age,c14_sig)")->required();
  spd_cmd->add_option("--resolution", sp.resolution, "Grid spacing in cal yr");
  spd_cmd->add_option("--range", sp.range, "Restrict the grid to LO HI cal BP")->expected(2);

  DpmmOptions dp;
  auto* dp_cmd = app.add_subcommand("dpmm", "Joint DPMM calibration and predictive density");
  add_common(dp_cmd, dp.common);
  dp_cmd->add_option("--dets", dp.dets, "Determinations CSV (id,c14_age,c14_sig)")->required();
  dp_cmd->add_option("--sampler", dp.sampler, "polya or walker");
  dp_cmd->add_option("--iters", dp.iters, "Total iterations");
  dp_cmd->add_option("--burn", dp.burn, "Burn-in iterations (default: half of --iters)");
  dp_cmd->add_option("--thin", dp.thin, "Keep every k-th iteration");
  dp_cmd->add_option("--seed", dp.seed, "RNG seed");
  dp_cmd->add_option("--hyper", dp.hyper, "Hyperparameter override key=value (repeatable)");
  dp_cmd->add_option("--mad-mode", dp.mad_mode, "Spread statistic for defaults: median or maximum");
  dp_cmd->add_option("--chains", dp.chains, "Independent chains (seeds seed, seed+1, ...)");
  dp_cmd->add_option("--grid-resolution", dp.grid_resolution, "Predictive grid spacing in cal yr");
  dp_cmd->add_flag("--full-grid", dp.full_grid, "Evaluate the predictive over the whole curve");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulation study against independent calibration");
  add_common(sim_cmd, sim.common);
  sim_cmd->add_option("--family", sim.families, "single_normal, three_normal or uniform");
  sim_cmd->add_option("--n", sim.n_values, "Determinations per run");
  sim_cmd->add_option("--runs", sim.runs, "Runs per (family, n)");
  sim_cmd->add_option("--iters", sim.iters, "Chain iterations");
  sim_cmd->add_option("--burn", sim.burn, "Burn-in iterations");
  sim_cmd->add_option("--thin", sim.thin, "Thinning");
  sim_cmd->add_option("--samplers", sim.samplers, "DPMM samplers to compare")->delimiter(',');
  sim_cmd->add_option("--seed", sim.seed, "Master seed");
  sim_cmd->add_option("--jobs", sim.jobs, "Parallel runs");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*cal_cmd) return cmd_calibrate(cal, out);
    if (*spd_cmd) return cmd_spd(sp, out);
    if (*dp_cmd) return cmd_dpmm(dp, out, err);
    if (*sim_cmd) return cmd_simulate(sim, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::out_of_range& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kUsage;
}

}  // namespace carbcal::cli
