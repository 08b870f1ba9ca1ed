// Command-line entry point: one subcommand per module.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pacdnn/bounds.hpp"
#include "pacdnn/errors.hpp"
#include "pacdnn/gibbs.hpp"
#include "pacdnn/harness.hpp"
#include "pacdnn/io.hpp"
#include "pacdnn/markov.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pacdnn;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config file")->required();
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("-o,--out", c.out, "output path (file or directory)");
}

// A config that cannot be read is a configuration error, not a runtime one.
json read_config(const std::string& path) {
  try {
    return io::read_json_file(path);
  } catch (const Error& e) {
    if (e.code() == Errc::io_error) throw Error(Errc::config_error, e.what());
    throw;
  }
}

json load(const Common& c) {
  json j = read_config(c.config);
  if (c.seed) j["seed"] = *c.seed;
  if (!c.out.empty()) j["output_dir"] = c.out;
  return j;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    io::write_text_file(out, text);
  }
}

int cmd_gap(const Common& c) {
  const json j = read_config(c.config);
  const auto chain = harness::ChainSpec::from_json(j.value("chain", json::object()));
  const auto k_max = j.value("k_max", std::size_t{10});
  const markov::TransitionKernel kernel = chain.build();
  const markov::StationaryDist pi = markov::stationary_distribution(kernel);
  json r;
  r["chain"] = chain.id();
  r["stationary"] = std::vector<double>(pi.weights().data(), pi.weights().data() + pi.size());
  r["spectral_gap"] = markov::spectral_gap(kernel.probs(), pi);
  r["pseudo_spectral_gap"] = markov::pseudo_spectral_gap(kernel, pi, k_max);
  r["k_max"] = k_max;
  try {
    r["mixing_time"] = markov::mixing_time(kernel, pi, j.value("epsilon", 0.25));
  } catch (const Error& e) {
    if (e.code() != Errc::not_mixed_within_cap) throw;
    r["mixing_time"] = nullptr;
  }
  emit(c.out, r.dump(2) + "\n");
  return 0;
}

int cmd_simulate(const Common& c) {
  const json j = read_config(c.config);
  const auto chain = harness::ChainSpec::from_json(j.value("chain", json::object()));
  const markov::TransitionKernel kernel = chain.build();
  const markov::StationaryDist pi = markov::stationary_distribution(kernel);
  const auto n = j.value("n", std::size_t{1000});
  const std::uint64_t seed = c.seed.value_or(j.value("seed", std::uint64_t{0}));
  std::ostringstream text;
  io::write_trajectory(text, markov::simulate(kernel, pi, n, seed));
  emit(c.out, text.str());
  return 0;
}

int cmd_sample(const Common& c) {
  json j = read_config(c.config);
  if (c.seed) j["seed"] = *c.seed;
  const auto cfg = harness::ExperimentConfig::from_json(j);
  const auto n = j.value("n", cfg.n_grid.empty() ? std::size_t{500} : cfg.n_grid.front());
  const harness::PipelineRun run = harness::run_pipeline(cfg, n, std::nullopt, cfg.seed);
  std::ostringstream draws;
  io::write_draws_jsonl(draws, run.draws);
  emit(c.out, draws.str());
  std::cerr << "gamma=" << run.gamma << " lambda=" << run.lambda << " draws=" << run.draws.networks.size()
            << " acceptance(add,remove,perturb)=" << run.draws.acceptance.add << ','
            << run.draws.acceptance.remove << ',' << run.draws.acceptance.perturb
            << " excess_risk=" << run.excess_risk << '\n';
  return 0;
}

int cmd_bounds(const Common& c) {
  const json j = read_config(c.config);
  const std::uint64_t seed = c.seed.value_or(j.value("seed", std::uint64_t{0}));
  const auto reports = harness::run_bound_checks(j, seed);
  std::cout << harness::format_report_table(reports);
  if (!c.out.empty()) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(harness::report_to_json(r));
    io::write_text_file(c.out, arr.dump(2) + "\n");
  }
  return 0;
}

int report_sweep(const harness::ExperimentConfig& cfg, const harness::SweepResult& result) {
  if (!cfg.output_dir.empty()) {
    harness::emit_report(result, {}, cfg.output_dir, harness::theory_exponent(cfg));
  } else {
    std::cout << harness::sweep_csv(result);
  }
  return 0;
}

int cmd_sweep(const Common& c) {
  const auto cfg = harness::ExperimentConfig::from_json(load(c));
  return report_sweep(cfg, harness::run_rate_sweep(cfg));
}

int cmd_effsample(const Common& c) {
  const auto cfg = harness::ExperimentConfig::from_json(load(c));
  if (cfg.pairs.empty()) throw Error(Errc::config_error, "effsample needs 'pairs': [[n, p], ...]");
  return report_sweep(cfg, harness::run_effective_sample_experiment(cfg, cfg.pairs));
}

int cmd_slope(const Common& c) {
  fs::path csv = c.config;
  if (csv.extension() == ".json") {
    const json j = read_config(csv.string());
    if (!j.contains("csv")) throw Error(Errc::config_error, "slope config needs 'csv'");
    csv = fs::path(j.at("csv").get<std::string>());
    if (csv.is_relative()) csv = fs::path(c.config).parent_path() / csv;
  }
  std::ifstream in(csv);
  if (!in) throw Error(Errc::io_error, "cannot open " + csv.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const harness::SlopeFit fit = harness::fit_rate_slope(harness::parse_sweep_csv(buf.str()));
  json r = {{"slope", fit.slope}, {"stderr", fit.stderr_slope}, {"intercept", fit.intercept},
            {"points", fit.points}};
  emit(c.out, r.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAC-Bayes deep networks on Markov-dependent data"};
  app.require_subcommand(1);
  Common common;
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Common&);
  };
  const Sub subs[] = {
      {"gap", "stationary law, spectral and pseudo-spectral gaps, mixing time", cmd_gap},
      {"simulate", "simulate a stationary trajectory", cmd_simulate},
      {"sample", "sample the Gibbs posterior on generated data", cmd_sample},
      {"bounds", "evaluate bound right-hand sides and Monte Carlo checks", cmd_bounds},
      {"sweep", "run a rate sweep", cmd_sweep},
      {"effsample", "run an effective-sample-size experiment", cmd_effsample},
      {"slope", "fit the log-log rate slope of a sweep CSV", cmd_slope},
  };
  int (*chosen)(const Common&) = nullptr;
  for (const Sub& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, common);
    cmd->callback([&chosen, fn = s.fn] { chosen = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return chosen(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::config_error ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
