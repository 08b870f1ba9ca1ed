#pragma once

// File formats: kernels, trajectories and networks as JSON, datasets as CSV,
// posterior draws as JSON lines.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "pacdnn/gibbs.hpp"
#include "pacdnn/markov.hpp"
#include "pacdnn/model.hpp"
#include "pacdnn/network.hpp"

namespace pacdnn::io {

using nlohmann::json;

json kernel_to_json(const markov::TransitionKernel& kernel);
markov::TransitionKernel kernel_from_json(const json& j);

/// "# seed=<u64>" followed by one state index per line.
void write_trajectory(std::ostream& out, const markov::Trajectory& traj);
markov::Trajectory read_trajectory(std::istream& in);

/// Header x_0,...,x_{d-1},y then one row per observation.
void write_dataset_csv(std::ostream& out, const model::Dataset& data);
model::Dataset read_dataset_csv(std::istream& in);

/// {arch, active_indices, values, B, F}; values only for active indices.
json network_to_json(const network::SparseNetwork& net);
network::SparseNetwork network_from_json(const json& j);

/// One network per line with its log_score.
void write_draws_jsonl(std::ostream& out, const gibbs::PosteriorDraws& draws);

json target_to_json(const model::TargetSpec& target);
model::TargetSpec target_from_json(const json& j);

/// Reads a whole JSON document; throws Errc::io_error or Errc::config_error.
json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace pacdnn::io
