#include "carbcal/samples_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "carbcal/error.hpp"
#include "text_util.hpp"

namespace carbcal {

using nlohmann::json;

json to_json(const Hyperparameters& h) {
  return json{{"lambda", h.lambda},
              {"nu1", h.nu1},
              {"nu2", h.nu2},
              {"xi", h.xi},
              {"psi", h.psi},
              {"eta1", h.eta1},
              {"eta2", h.eta2},
              {"slice_width", h.slice_width},
              {"slice_max_steps", h.slice_max_steps},
              {"alpha_prop_sd", h.alpha_prop_sd},
              {"n_init_clusters", h.n_init_clusters}};
}

Hyperparameters hyper_from_json(const json& j, Hyperparameters h) {
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number())
      throw std::invalid_argument("hyperparameter " + key + " must be numeric");
    if (key == "lambda") h.lambda = value.get<double>();
    else if (key == "nu1") h.nu1 = value.get<double>();
    else if (key == "nu2") h.nu2 = value.get<double>();
    else if (key == "xi") h.xi = value.get<double>();
    else if (key == "psi") h.psi = value.get<double>();
    else if (key == "eta1") h.eta1 = value.get<double>();
    else if (key == "eta2") h.eta2 = value.get<double>();
    else if (key == "slice_width") h.slice_width = value.get<double>();
    else if (key == "slice_max_steps") h.slice_max_steps = value.get<int>();
    else if (key == "alpha_prop_sd") h.alpha_prop_sd = value.get<double>();
    else if (key == "n_init_clusters") h.n_init_clusters = value.get<int>();
    else throw std::invalid_argument("unknown hyperparameter '" + key + "'");
  }
  return h;
}

json to_json(const ChainConfig& cfg) {
  return json{{"n_iter", cfg.n_iter},
              {"n_burn", cfg.n_burn},
              {"thin", cfg.thin},
              {"sampler", std::string(to_string(cfg.sampler))},
              {"seed", cfg.seed},
              {"hyper", to_json(cfg.hyper)}};
}

ChainConfig chain_config_from_json(const json& j) {
  ChainConfig cfg;
  cfg.n_iter = j.at("n_iter").get<int>();
  cfg.n_burn = j.at("n_burn").get<int>();
  cfg.thin = j.at("thin").get<int>();
  cfg.sampler = parse_sampler(j.at("sampler").get<std::string>());
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.hyper = hyper_from_json(j.at("hyper"));
  return cfg;
}

json to_json(const StoredState& s) {
  json j{{"iteration", s.iteration},
         {"labels", s.labels},
         {"phi", s.phi},
         {"tau", s.tau},
         {"counts", s.counts},
         {"alpha", s.alpha},
         {"mu_phi", s.mu_phi}};
  if (!s.weights.empty()) {
    j["weights"] = s.weights;
    j["remainder"] = s.remainder;
  }
  return j;
}

StoredState stored_state_from_json(const json& j) {
  StoredState s;
  s.iteration = j.at("iteration").get<int>();
  s.labels = j.at("labels").get<std::vector<std::size_t>>();
  s.phi = j.at("phi").get<std::vector<double>>();
  s.tau = j.at("tau").get<std::vector<double>>();
  s.counts = j.at("counts").get<std::vector<std::size_t>>();
  s.alpha = j.at("alpha").get<double>();
  s.mu_phi = j.at("mu_phi").get<double>();
  if (j.contains("weights")) {
    s.weights = j.at("weights").get<std::vector<double>>();
    s.remainder = j.at("remainder").get<double>();
  }
  return s;
}

void write_samples(const std::filesystem::path& dir, const PosteriorSamples& samples,
                   std::span<const std::string> ids) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    out << to_json(samples.config).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "theta.csv");
    out << "iteration";
    for (const auto& id : ids) out << ',' << id;
    out << '\n';
    for (const auto& s : samples.states) {
      check_invariant(s.theta.size() == ids.size(), "stored theta length differs from ids");
      out << s.iteration;
      for (double t : s.theta) out << ',' << format_number(t);
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "clusters.jsonl");
    for (const auto& s : samples.states) out << to_json(s).dump() << '\n';
  }
}

LoadedSamples read_samples(const std::filesystem::path& dir) {
  LoadedSamples out;
  {
    std::ifstream in(dir / "config.json");
    if (!in) throw DataError("missing " + (dir / "config.json").string());
    out.samples.config = chain_config_from_json(json::parse(in));
  }
  {
    std::ifstream in(dir / "clusters.jsonl");
    if (!in) throw DataError("missing " + (dir / "clusters.jsonl").string());
    std::string line;
    while (std::getline(in, line))
      if (!trim(line).empty()) out.samples.states.push_back(stored_state_from_json(json::parse(line)));
  }
  std::ifstream in(dir / "theta.csv");
  if (!in) throw DataError("missing " + (dir / "theta.csv").string());
  std::string line;
  std::getline(in, line);
  auto header = split_csv(line);
  for (std::size_t k = 1; k < header.size(); ++k) out.ids.emplace_back(header[k]);
  std::size_t row = 0;
  const std::string where = (dir / "theta.csv").string();
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (row >= out.samples.states.size() || fields.size() != header.size())
      throw DataError(where + ": rows do not match clusters.jsonl");
    auto& s = out.samples.states[row++];
    for (std::size_t k = 1; k < fields.size(); ++k) s.theta.push_back(parse_double(fields[k], where));
  }
  if (row != out.samples.states.size()) throw DataError(where + ": rows do not match clusters.jsonl");
  return out;
}

}  // namespace carbcal
