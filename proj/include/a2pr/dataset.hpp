#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "a2pr/matrix.hpp"
#include "a2pr/maze.hpp"
#include "a2pr/rng.hpp"

namespace a2pr {

// Transition store. Values are quantized to 32-bit floats on construction so
// an in-memory dataset and its file round-trip compare bitwise equal.
struct OfflineDataset {
  int64_t n = 0;
  int state_dim = 0;
  int action_dim = 0;
  Mat states;       // n x state_dim
  Mat actions;      // n x action_dim
  Vec rewards;      // n
  Mat next_states;  // n x state_dim
  std::vector<uint8_t> dones;  // n, 0/1
};

struct NormStats {
  Vec mean;
  Vec std;  // floored at 1e-3 per dimension
};

struct BatchSampler {
  Rng rng;
  int batch_size = 256;
};

struct Batch {
  Mat states;
  Mat actions;
  Vec rewards;
  Mat next_states;
  Vec dones;  // 0.0 / 1.0
  std::vector<int64_t> indices;
};

enum class ControllerKind { kExpert, kRandom };

struct RecipeEntry {
  ControllerKind controller = ControllerKind::kExpert;
  int target_goal = 0;   // ignored for the random controller
  double fraction = 0.0;
  double noise_scale = 0.0;  // expert action noise
};

// Parses "controller:target:fraction" lists such as
// "expert:g0:0.05,expert:g1:0.45,expert:g2:0.50" or "random:_:0.99";
// expert entries take expert_noise as their action noise.
std::vector<RecipeEntry> parse_recipe(const std::string& text, const MazeConfig& env,
                                      double expert_noise);

// Rolls complete episodes per recipe entry until that entry's share of
// `total` transitions is filled (the last episode may be cut), then
// concatenates everything in recipe order.
OfflineDataset generate_maze_dataset(const MazeConfig& env_config,
                                     const std::vector<RecipeEntry>& recipe,
                                     int64_t total, Rng& rng);

// Binary layout (little-endian): magic "A2PRDS01", u32 version=1, u32 n,
// u32 state_dim, u32 action_dim, then f32 arrays states, actions, rewards,
// next_states, then n done bytes.
void save(const OfflineDataset& dataset, const std::string& path);
OfflineDataset load(const std::string& path);

// Mean and population std over states and next_states jointly, std floored
// at 1e-3 so no feature divides by ~0.
NormStats compute_norm_stats(const OfflineDataset& dataset);

Vec normalize_state(const NormStats& stats, const Vec& s);
Mat normalize_states(const NormStats& stats, const Mat& s);
Vec denormalize_state(const NormStats& stats, const Vec& s_norm);

// batch_size uniform draws with replacement.
Batch sample_batch(const OfflineDataset& dataset, BatchSampler& sampler);

void save_norm_stats(const std::string& path, const NormStats& stats);
NormStats load_norm_stats(const std::string& path);

}  // namespace a2pr
