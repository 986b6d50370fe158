#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vesonet/cost.hpp"
#include "vesonet/error.hpp"
#include "vesonet/rng.hpp"
#include "vesonet/road_net.hpp"

namespace vesonet {

struct Deliverability {
  SegmentId segment = 0;
  std::int64_t tick = 0;
  int value = 0;
};

/// CD = consumers - providers on the segment at the snapshot tick.
Deliverability content_deliverability(SegmentId segment, const SegmentOccupancy& occupancy);

enum class RewardMode { increase, decrease };

/// increase: new - old (maximizing reward maximizes deliverability);
/// decrease: old - new.
double reward(double old_cd, double new_cd, RewardMode mode = RewardMode::increase);

/// Tabular Q-learning backup: q + beta (r + gamma max_next - q).
double q_backup(double q_old, double r, double max_next_q, double beta, double gamma);

struct DeadEndError : Error {
  using Error::Error;
};

inline constexpr double kPaddingSentinel = -1.0;

/// Fixed-width observation: one normalized deliverability slot per outgoing segment
/// (padding slots hold -1), then remaining detour budget and distance to destination.
struct RLState {
  std::vector<double> features;
  std::vector<bool> feasible;  // one flag per action slot

  std::size_t actions() const { return feasible.size(); }
  bool any_feasible() const;
};

/// `exit_cd.size()` <= max_actions. CD values are divided by cd_scale and clamped to [-1, 1].
RLState make_state(std::span<const double> exit_cd, const std::vector<bool>& feasible, double budget_fraction,
                   double distance_fraction, std::size_t max_actions, double cd_scale);

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  std::vector<bool> next_feasible;  // empty: every action counts for the target max
  bool terminal = false;
};

/// Fully connected network with rectifier hidden layers and a linear output layer.
class QNetwork {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> bias;     // out (empty when the network has no bias terms)
  };

  QNetwork() = default;
  QNetwork(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs, bool bias, Rng& rng);

  std::size_t inputs() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t outputs() const { return layers_.empty() ? 0 : layers_.back().out; }
  bool has_bias() const { return bias_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::vector<double> forward(std::span<const double> x) const;
  /// Adds d(sum_k dout_k * out_k)/d(theta) for input `x` into `grad` (flat layout).
  void backward(std::span<const double> x, std::span<const double> dout, std::span<double> grad) const;

  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> flat);

  /// CSV dump of layer shapes and parameters; values round-trip exactly.
  void save(std::ostream& out) const;
  static QNetwork load(std::istream& in);

 private:
  std::vector<Layer> layers_;
  bool bias_ = true;
};

/// Greedy or uniformly random over feasible actions. Ties resolve to the lowest index.
int select_action(const QNetwork& net, const RLState& state, double epsilon, Rng& rng);

/// Mean over the batch of (y - Q(s, a; online))^2 with y = r + gamma max_a' Q(s', a'; target),
/// or y = r for terminal transitions.
double td_loss(const QNetwork& online, const QNetwork& target, std::span<const Transition> batch, double gamma);

/// Gradient of td_loss with respect to the online parameters (targets held fixed).
std::vector<double> td_loss_gradient(const QNetwork& online, const QNetwork& target,
                                     std::span<const Transition> batch, double gamma);

struct DQNConfig {
  double gamma = 0.95;
  double learning_rate = 1e-3;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t epsilon_decay_steps = 5000;
  std::size_t buffer_capacity = 10000;
  std::size_t batch_size = 32;
  std::int64_t target_sync_period = 500;
  std::vector<std::size_t> hidden{64, 64};
  bool bias = true;
  std::size_t max_actions = 4;
  double cd_scale = 10.0;
  RewardMode reward_mode = RewardMode::increase;
  std::uint64_t rng_seed = 1;
  /// One shared network for all providers; false gives each provider its own agent.
  bool shared_policy = true;
};

/// Every violated constraint, empty when valid.
std::vector<std::string> validate(const DQNConfig& config);

/// Linear decay from start to end over decay_steps, constant afterwards.
class EpsilonSchedule {
 public:
  EpsilonSchedule(double start, double end, std::int64_t decay_steps);
  double at(std::int64_t step) const;

 private:
  double start_;
  double end_;
  std::int64_t decay_;
};

/// Bounded FIFO of transitions; the oldest entry is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }
  /// Uniform sampling with replacement.
  std::vector<Transition> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct TrainingCurvePoint {
  std::int64_t step = 0;
  double loss = 0.0;
  double epsilon = 0.0;
  double mean_reward = 0.0;
};

void write_training_curve_csv(std::ostream& out, std::span<const TrainingCurvePoint> curve);

class DQNAgent {
 public:
  explicit DQNAgent(const DQNConfig& config);

  const DQNConfig& config() const { return config_; }
  std::size_t state_size() const { return config_.max_actions + 2; }
  const QNetwork& online() const { return online_; }
  QNetwork& online() { return online_; }
  const QNetwork& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  double epsilon() const { return schedule_.at(decisions_); }
  /// Epsilon-greedy action; advances the exploration schedule.
  int act(const RLState& state);
  int greedy(const RLState& state) const;
  void remember(Transition t);
  /// One SGD step on a sampled batch; nullopt (and no parameter change) while the buffer
  /// holds fewer transitions than the batch size.
  std::optional<double> train_step();
  void sync_target() { target_ = online_; }

  std::int64_t train_steps() const { return train_steps_; }
  std::int64_t decisions() const { return decisions_; }
  const std::vector<TrainingCurvePoint>& curve() const { return curve_; }
  const CostCounter& cost() const { return cost_; }

  void save(std::ostream& out) const { online_.save(out); }
  void load(std::istream& in);

 private:
  DQNConfig config_;
  Rng rng_;
  QNetwork online_;
  QNetwork target_;
  ReplayBuffer buffer_;
  EpsilonSchedule schedule_;
  std::int64_t train_steps_ = 0;
  std::int64_t decisions_ = 0;
  double reward_sum_ = 0.0;
  std::int64_t reward_count_ = 0;
  std::vector<TrainingCurvePoint> curve_;
  mutable CostCounter cost_;
};

}  // namespace vesonet
