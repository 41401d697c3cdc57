#include "a2pr/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace a2pr {

namespace {

constexpr char kMagic[8] = {'A', '2', 'P', 'R', 'D', 'S', '0', '1'};
constexpr uint32_t kVersion = 1;

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

struct TransitionRow {
  Vec s, a, s_next;
  double r;
  uint8_t done;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

}  // namespace

std::vector<RecipeEntry> parse_recipe(const std::string& text, const MazeConfig& env,
                                      double expert_noise) {
  std::vector<RecipeEntry> recipe;
  for (const std::string& part : split(text, ',')) {
    const auto fields = split(part, ':');
    if (fields.size() != 3)
      throw std::invalid_argument("recipe entry '" + part +
                                  "' is not controller:target:fraction");
    RecipeEntry entry;
    if (fields[0] == "expert") {
      entry.controller = ControllerKind::kExpert;
      entry.noise_scale = expert_noise;
      if (fields[1].size() < 2 || fields[1][0] != 'g')
        throw std::invalid_argument("expert target must be g<index>, got '" + fields[1] + "'");
      entry.target_goal = std::stoi(fields[1].substr(1));
      if (entry.target_goal < 0 || entry.target_goal >= static_cast<int>(env.goals.size()))
        throw std::invalid_argument("goal index out of range in '" + part + "'");
    } else if (fields[0] == "random") {
      entry.controller = ControllerKind::kRandom;
    } else {
      throw std::invalid_argument("unknown controller '" + fields[0] +
                                  "' (expected expert or random)");
    }
    entry.fraction = std::stod(fields[2]);
    recipe.push_back(entry);
  }
  return recipe;
}

OfflineDataset generate_maze_dataset(const MazeConfig& env_config,
                                     const std::vector<RecipeEntry>& recipe,
                                     int64_t total, Rng& rng) {
  if (total <= 0) throw std::invalid_argument("generate_maze_dataset: total must be positive");
  if (recipe.empty()) throw std::invalid_argument("generate_maze_dataset: empty recipe");
  double frac_sum = 0.0;
  for (const auto& e : recipe) {
    if (e.fraction < 0.0) throw std::invalid_argument("generate_maze_dataset: negative fraction");
    if (e.controller == ControllerKind::kExpert &&
        (e.target_goal < 0 || e.target_goal >= static_cast<int>(env_config.goals.size())))
      throw std::invalid_argument("generate_maze_dataset: goal index out of range");
    frac_sum += e.fraction;
  }
  if (std::abs(frac_sum - 1.0) > 1e-9)
    throw std::invalid_argument("generate_maze_dataset: fractions sum to " +
                                std::to_string(frac_sum) + ", expected 1");

  // Split the budget by cumulative-fraction rounding so the entry budgets
  // add up to exactly `total`.
  std::vector<int64_t> budgets;
  double cum = 0.0;
  int64_t prev = 0;
  for (const auto& e : recipe) {
    cum += e.fraction;
    const int64_t upto = std::llround(cum * static_cast<double>(total));
    budgets.push_back(upto - prev);
    prev = upto;
  }

  std::vector<TransitionRow> rows;
  rows.reserve(static_cast<std::size_t>(total));
  for (std::size_t k = 0; k < recipe.size(); ++k) {
    const auto& entry = recipe[k];
    int64_t remaining = budgets[k];
    while (remaining > 0) {
      MazeState state = reset(env_config, rng);
      bool done = false;
      while (!done && remaining > 0) {
        const MazeAction action =
            entry.controller == ControllerKind::kRandom
                ? random_controller(rng)
                : expert_controller(env_config, state, entry.target_goal,
                                    entry.noise_scale, rng);
        const StepResult result = step(env_config, state, action);
        TransitionRow row;
        row.s = observe(state);
        row.a = Vec(kMazeActionDim);
        row.a << action.fx, action.fy;
        row.r = result.reward;
        row.s_next = observe(result.next);
        row.done = result.done ? 1 : 0;
        rows.push_back(std::move(row));
        state = result.next;
        done = result.done;
        --remaining;
      }
    }
  }

  OfflineDataset d;
  d.n = static_cast<int64_t>(rows.size());
  d.state_dim = kMazeStateDim;
  d.action_dim = kMazeActionDim;
  d.states = Mat(d.n, d.state_dim);
  d.actions = Mat(d.n, d.action_dim);
  d.rewards = Vec(d.n);
  d.next_states = Mat(d.n, d.state_dim);
  d.dones.resize(static_cast<std::size_t>(d.n));
  for (int64_t i = 0; i < d.n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (int j = 0; j < d.state_dim; ++j) {
      d.states(i, j) = quantize(row.s(j));
      d.next_states(i, j) = quantize(row.s_next(j));
    }
    for (int j = 0; j < d.action_dim; ++j) d.actions(i, j) = quantize(row.a(j));
    d.rewards(i) = quantize(row.r);
    d.dones[static_cast<std::size_t>(i)] = row.done;
  }
  return d;
}

namespace {

void write_f32_array(std::ofstream& out, const double* data, std::size_t count) {
  std::vector<float> buf(count);
  for (std::size_t i = 0; i < count; ++i) buf[i] = static_cast<float>(data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
}

void read_f32_array(std::ifstream& in, double* data, std::size_t count) {
  std::vector<float> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw std::runtime_error("dataset: truncated file");
  for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<double>(buf[i]);
}

}  // namespace

void save(const OfflineDataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t header[4] = {kVersion, static_cast<uint32_t>(d.n),
                              static_cast<uint32_t>(d.state_dim),
                              static_cast<uint32_t>(d.action_dim)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  const std::size_t n = static_cast<std::size_t>(d.n);
  write_f32_array(out, d.states.data(), n * static_cast<std::size_t>(d.state_dim));
  write_f32_array(out, d.actions.data(), n * static_cast<std::size_t>(d.action_dim));
  write_f32_array(out, d.rewards.data(), n);
  write_f32_array(out, d.next_states.data(), n * static_cast<std::size_t>(d.state_dim));
  out.write(reinterpret_cast<const char*>(d.dones.data()), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("dataset: write failed for " + path);
}

OfflineDataset load(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  const std::streamoff file_size = in.tellg();
  in.seekg(0);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("dataset: bad magic in " + path);
  uint32_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw std::runtime_error("dataset: truncated file " + path);
  if (header[0] != kVersion)
    throw std::runtime_error("dataset: version mismatch in " + path + " (got " +
                             std::to_string(header[0]) + ", want " + std::to_string(kVersion) + ")");

  OfflineDataset d;
  d.n = header[1];
  d.state_dim = static_cast<int>(header[2]);
  d.action_dim = static_cast<int>(header[3]);
  if (d.n < 1 || d.state_dim < 1 || d.action_dim < 1)
    throw std::runtime_error("dataset: length inconsistency in header of " + path);

  const std::size_t n = static_cast<std::size_t>(d.n);
  const std::streamoff expected =
      static_cast<std::streamoff>(sizeof(kMagic) + sizeof(header)) +
      static_cast<std::streamoff>(sizeof(float) * n *
                                  (2 * static_cast<std::size_t>(d.state_dim) +
                                   static_cast<std::size_t>(d.action_dim) + 1)) +
      static_cast<std::streamoff>(n);
  if (file_size < expected) throw std::runtime_error("dataset: truncated file " + path);
  if (file_size > expected)
    throw std::runtime_error("dataset: length inconsistency in " + path +
                             " (payload larger than header promises)");

  d.states = Mat(d.n, d.state_dim);
  d.actions = Mat(d.n, d.action_dim);
  d.rewards = Vec(d.n);
  d.next_states = Mat(d.n, d.state_dim);
  d.dones.resize(n);
  read_f32_array(in, d.states.data(), n * static_cast<std::size_t>(d.state_dim));
  read_f32_array(in, d.actions.data(), n * static_cast<std::size_t>(d.action_dim));
  read_f32_array(in, d.rewards.data(), n);
  read_f32_array(in, d.next_states.data(), n * static_cast<std::size_t>(d.state_dim));
  in.read(reinterpret_cast<char*>(d.dones.data()), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("dataset: truncated file " + path);
  for (uint8_t b : d.dones)
    if (b > 1) throw std::runtime_error("dataset: length inconsistency in " + path +
                                        " (done byte out of range)");
  return d;
}

NormStats compute_norm_stats(const OfflineDataset& d) {
  if (d.n < 1) throw std::invalid_argument("compute_norm_stats: empty dataset");
  NormStats stats;
  stats.mean = Vec::Zero(d.state_dim);
  stats.std = Vec::Zero(d.state_dim);
  const double count = 2.0 * static_cast<double>(d.n);
  for (int j = 0; j < d.state_dim; ++j) {
    const double sum = d.states.col(j).sum() + d.next_states.col(j).sum();
    const double mean = sum / count;
    const double sq = (d.states.col(j).array() - mean).square().sum() +
                      (d.next_states.col(j).array() - mean).square().sum();
    stats.mean(j) = mean;
    stats.std(j) = std::max(std::sqrt(sq / count), 1e-3);
  }
  return stats;
}

Vec normalize_state(const NormStats& stats, const Vec& s) {
  return ((s - stats.mean).array() / stats.std.array()).matrix();
}

Mat normalize_states(const NormStats& stats, const Mat& s) {
  return ((s.rowwise() - stats.mean.transpose()).array().rowwise() /
          stats.std.transpose().array())
      .matrix();
}

Vec denormalize_state(const NormStats& stats, const Vec& s_norm) {
  return (s_norm.array() * stats.std.array()).matrix() + stats.mean;
}

Batch sample_batch(const OfflineDataset& d, BatchSampler& sampler) {
  if (d.n < 1) throw std::invalid_argument("sample_batch: empty dataset");
  const int b = sampler.batch_size;
  Batch batch;
  batch.states = Mat(b, d.state_dim);
  batch.actions = Mat(b, d.action_dim);
  batch.rewards = Vec(b);
  batch.next_states = Mat(b, d.state_dim);
  batch.dones = Vec(b);
  batch.indices.resize(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const int64_t idx = static_cast<int64_t>(sampler.rng.below(static_cast<uint64_t>(d.n)));
    batch.indices[static_cast<std::size_t>(i)] = idx;
    batch.states.row(i) = d.states.row(idx);
    batch.actions.row(i) = d.actions.row(idx);
    batch.rewards(i) = d.rewards(idx);
    batch.next_states.row(i) = d.next_states.row(idx);
    batch.dones(i) = static_cast<double>(d.dones[static_cast<std::size_t>(idx)]);
  }
  return batch;
}

void save_norm_stats(const std::string& path, const NormStats& stats) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("norm stats: cannot write " + path);
  const uint32_t dim = static_cast<uint32_t>(stats.mean.size());
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(stats.mean.data()),
            static_cast<std::streamsize>(sizeof(double) * dim));
  out.write(reinterpret_cast<const char*>(stats.std.data()),
            static_cast<std::streamsize>(sizeof(double) * dim));
  if (!out) throw std::runtime_error("norm stats: write failed for " + path);
}

NormStats load_norm_stats(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("norm stats: cannot open " + path);
  uint32_t dim = 0;
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  if (!in || dim == 0) throw std::runtime_error("norm stats: bad header in " + path);
  NormStats stats;
  stats.mean = Vec(dim);
  stats.std = Vec(dim);
  in.read(reinterpret_cast<char*>(stats.mean.data()),
          static_cast<std::streamsize>(sizeof(double) * dim));
  in.read(reinterpret_cast<char*>(stats.std.data()),
          static_cast<std::streamsize>(sizeof(double) * dim));
  if (!in) throw std::runtime_error("norm stats: truncated file " + path);
  return stats;
}

}  // namespace a2pr
