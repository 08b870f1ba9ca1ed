#include "pacdnn/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "pacdnn/errors.hpp"

namespace pacdnn::io {
namespace {

template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(Errc::config_error, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, std::string("field '") + key + "': " + e.what());
  }
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw Error(Errc::config_error, "expected a nonempty matrix");
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw Error(Errc::config_error, "ragged matrix");
    }
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(std::string_view field) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(Errc::io_error, "malformed number '" + std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(Errc::io_error, "cannot format number");
  return std::string(buf, ptr);
}

json kernel_to_json(const markov::TransitionKernel& kernel) {
  return {{"states", kernel.states()}, {"probs", matrix_to_json(kernel.probs())}};
}

markov::TransitionKernel kernel_from_json(const json& j) {
  const auto states = get<std::size_t>(j, "states");
  if (!j.contains("probs")) throw Error(Errc::config_error, "missing field 'probs'");
  Eigen::MatrixXd probs = matrix_from_json(j.at("probs"));
  if (static_cast<std::size_t>(probs.rows()) != states) {
    throw Error(Errc::invalid_kernel, "'states' disagrees with the matrix size");
  }
  return markov::TransitionKernel(std::move(probs));
}

void write_trajectory(std::ostream& out, const markov::Trajectory& traj) {
  out << "# seed=" << traj.seed << '\n';
  for (std::size_t s : traj.states) out << s << '\n';
  if (!out) throw Error(Errc::io_error, "failed writing trajectory");
}

markov::Trajectory read_trajectory(std::istream& in) {
  markov::Trajectory traj;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# seed=", 0) != 0) {
    throw Error(Errc::io_error, "trajectory must start with '# seed=<u64>'");
  }
  {
    const std::string_view v = std::string_view(line).substr(7);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), traj.seed);
    if (ec != std::errc()) throw Error(Errc::io_error, "malformed trajectory seed");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t s = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), s);
    if (ec != std::errc()) throw Error(Errc::io_error, "malformed state '" + line + "'");
    traj.states.push_back(s);
  }
  return traj;
}

void write_dataset_csv(std::ostream& out, const model::Dataset& data) {
  for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) out << "x_" << j << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) out << format_double(data.inputs(i, j)) << ',';
    out << format_double(data.outputs(i)) << '\n';
  }
  if (!out) throw Error(Errc::io_error, "failed writing dataset");
}

model::Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::io_error, "empty dataset file");
  const auto header = split(line, ',');
  if (header.size() < 2 || header.back().substr(0, 1) != "y") {
    throw Error(Errc::io_error, "dataset header must be x_0,...,y");
  }
  const std::size_t d = header.size() - 1;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line, ',');
    if (fields.size() != d + 1) throw Error(Errc::io_error, "dataset row has the wrong width");
    for (auto f : fields) values.push_back(parse_double(f));
    ++rows;
  }
  model::Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  data.outputs.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * (d + 1) + j];
    }
    data.outputs(static_cast<Eigen::Index>(i)) = values[i * (d + 1) + d];
  }
  return data;
}

json network_to_json(const network::SparseNetwork& net) {
  return {{"arch", net.architecture().widths()},
          {"active_indices", net.active()},
          {"values", net.active_values()},
          {"B", net.weight_bound()},
          {"F", net.output_bound()}};
}

network::SparseNetwork network_from_json(const json& j) {
  const auto widths = get<std::vector<std::size_t>>(j, "arch");
  const auto active = get<std::vector<std::size_t>>(j, "active_indices");
  const auto values = get<std::vector<double>>(j, "values");
  if (active.size() != values.size()) {
    throw Error(Errc::config_error, "active_indices and values differ in length");
  }
  return network::SparseNetwork(network::Architecture(widths), active, values, get<double>(j, "B"),
                                get<double>(j, "F"));
}

void write_draws_jsonl(std::ostream& out, const gibbs::PosteriorDraws& draws) {
  for (std::size_t i = 0; i < draws.networks.size(); ++i) {
    json line = network_to_json(draws.networks[i]);
    line["log_score"] = draws.log_scores[i];
    out << line.dump() << '\n';
  }
  if (!out) throw Error(Errc::io_error, "failed writing draws");
}

json target_to_json(const model::TargetSpec& target) {
  json j;
  switch (target.kind) {
    case model::TargetKind::holder_sample:
      j = {{"kind", "holder_sample"}, {"beta", target.beta}, {"scale", target.scale}};
      break;
    case model::TargetKind::composition:
      j = {{"kind", "composition"}, {"dims", target.dims}, {"t", target.t},
           {"betas", target.betas}, {"scale", target.scale}};
      break;
    case model::TargetKind::logistic_link:
      j = {{"kind", "logistic_link"}, {"eta", target.eta}};
      break;
  }
  j["points"] = matrix_to_json(target.points);
  return j;
}

model::TargetSpec target_from_json(const json& j) {
  const auto kind = get<std::string>(j, "kind");
  Eigen::MatrixXd points;
  if (j.contains("points")) {
    points = matrix_from_json(j.at("points"));
  } else {
    const auto states = get<std::size_t>(j, "states");
    const std::size_t dim = j.value("input_dim", std::size_t{1});
    points = model::grid_embedding(states, dim);
  }
  const double scale = j.value("scale", 1.0);
  model::TargetSpec t;
  if (kind == "holder_sample") {
    t = model::TargetSpec::holder(get<double>(j, "beta"), std::move(points), scale);
  } else if (kind == "composition") {
    t = model::TargetSpec::composition(get<std::vector<std::size_t>>(j, "dims"),
                                       get<std::vector<std::size_t>>(j, "t"),
                                       get<std::vector<double>>(j, "betas"), std::move(points), scale);
  } else if (kind == "logistic_link") {
    t = model::TargetSpec::logistic(get<std::vector<double>>(j, "eta"), std::move(points));
  } else {
    throw Error(Errc::config_error, "unknown target kind '" + kind + "'");
  }
  return t;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::config_error, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw Error(Errc::io_error, "failed writing " + path.string());
}

}  // namespace pacdnn::io
