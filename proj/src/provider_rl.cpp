#include "vesonet/provider_rl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace vesonet {

Deliverability content_deliverability(SegmentId segment, const SegmentOccupancy& occupancy) {
  return {segment, occupancy.as_of_tick, occupancy.consumers - occupancy.providers};
}

double reward(double old_cd, double new_cd, RewardMode mode) {
  return mode == RewardMode::increase ? new_cd - old_cd : old_cd - new_cd;
}

double q_backup(double q_old, double r, double max_next_q, double beta, double gamma) {
  return q_old + beta * (r + gamma * max_next_q - q_old);
}

bool RLState::any_feasible() const {
  return std::find(feasible.begin(), feasible.end(), true) != feasible.end();
}

RLState make_state(std::span<const double> exit_cd, const std::vector<bool>& feasible, double budget_fraction,
                   double distance_fraction, std::size_t max_actions, double cd_scale) {
  if (exit_cd.size() > max_actions) throw ConfigError("more exits than action slots");
  if (feasible.size() != exit_cd.size()) throw ConfigError("feasibility mask does not match the exits");
  if (!(cd_scale > 0.0)) throw ConfigError("cd_scale must be positive");
  RLState s;
  s.features.assign(max_actions + 2, kPaddingSentinel);
  s.feasible.assign(max_actions, false);
  for (std::size_t i = 0; i < exit_cd.size(); ++i) {
    s.features[i] = std::clamp(exit_cd[i] / cd_scale, -1.0, 1.0);
    s.feasible[i] = feasible[i];
  }
  s.features[max_actions] = std::clamp(budget_fraction, 0.0, 1.0);
  s.features[max_actions + 1] = std::clamp(distance_fraction, 0.0, 1.0);
  return s;
}

// ---------------------------------------------------------------------------

QNetwork::QNetwork(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs, bool bias,
                   Rng& rng)
    : bias_(bias) {
  if (inputs == 0 || outputs == 0) throw ConfigError("network needs at least one input and one output");
  std::size_t prev = inputs;
  auto add = [&](std::size_t out) {
    if (out == 0) throw ConfigError("empty hidden layer");
    Layer l;
    l.in = prev;
    l.out = out;
    const double bound = std::sqrt(6.0 / static_cast<double>(prev));
    l.weights.resize(out * prev);
    for (double& w : l.weights) w = rng.uniform(-bound, bound);
    if (bias_) l.bias.assign(out, 0.0);
    layers_.push_back(std::move(l));
    prev = out;
  };
  for (std::size_t h : hidden) add(h);
  add(outputs);
}

namespace {

void affine(const QNetwork::Layer& l, std::span<const double> x, std::vector<double>& y) {
  y.assign(l.out, 0.0);
  for (std::size_t o = 0; o < l.out; ++o) {
    const double* w = &l.weights[o * l.in];
    double acc = l.bias.empty() ? 0.0 : l.bias[o];
    for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
}

}  // namespace

std::vector<double> QNetwork::forward(std::span<const double> x) const {
  if (x.size() != inputs()) throw ConfigError("input width does not match the network");
  std::vector<double> cur(x.begin(), x.end()), next;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    affine(layers_[k], cur, next);
    if (k + 1 < layers_.size())
      for (double& v : next) v = std::max(v, 0.0);
    cur.swap(next);
  }
  return cur;
}

void QNetwork::backward(std::span<const double> x, std::span<const double> dout, std::span<double> grad) const {
  if (x.size() != inputs()) throw ConfigError("input width does not match the network");
  if (dout.size() != outputs()) throw ConfigError("output gradient width does not match the network");
  if (grad.size() != parameter_count()) throw ConfigError("gradient buffer has the wrong size");

  // Forward pass keeping each layer's input.
  std::vector<std::vector<double>> acts;
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    std::vector<double> y;
    affine(layers_[k], acts.back(), y);
    if (k + 1 < layers_.size())
      for (double& v : y) v = std::max(v, 0.0);
    acts.push_back(std::move(y));
  }

  std::vector<std::size_t> offset(layers_.size());
  std::size_t pos = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    offset[k] = pos;
    pos += layers_[k].weights.size() + layers_[k].bias.size();
  }

  std::vector<double> delta(dout.begin(), dout.end());
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& l = layers_[k];
    const std::vector<double>& in = acts[k];
    double* gw = &grad[offset[k]];
    double* gb = gw + l.weights.size();
    for (std::size_t o = 0; o < l.out; ++o) {
      if (delta[o] == 0.0) continue;
      for (std::size_t i = 0; i < l.in; ++i) gw[o * l.in + i] += delta[o] * in[i];
      if (!l.bias.empty()) gb[o] += delta[o];
    }
    if (k == 0) break;
    std::vector<double> prev(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      if (delta[o] == 0.0) continue;
      for (std::size_t i = 0; i < l.in; ++i) prev[i] += l.weights[o * l.in + i] * delta[o];
    }
    // Rectifier derivative, taken as 0 at the kink.
    for (std::size_t i = 0; i < l.in; ++i)
      if (!(in[i] > 0.0)) prev[i] = 0.0;
    delta.swap(prev);
  }
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<double> QNetwork::flat_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Layer& l : layers_) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void QNetwork::set_flat_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ConfigError("parameter vector has the wrong size");
  std::size_t pos = 0;
  for (Layer& l : layers_) {
    std::copy_n(flat.begin() + pos, l.weights.size(), l.weights.begin());
    pos += l.weights.size();
    std::copy_n(flat.begin() + pos, l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
}

namespace {

void write_row(std::ostream& out, const char* tag, const std::vector<double>& values) {
  out << tag;
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out << buf;
  }
  out << '\n';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

double to_double(const std::string& s, std::size_t line, std::size_t col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("expected a number, got `" + s + "`", line, col);
}

std::size_t to_size(const std::string& s, std::size_t line, std::size_t col) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used == s.size()) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw ParseError("expected a count, got `" + s + "`", line, col);
}

}  // namespace

void QNetwork::save(std::ostream& out) const {
  out << "qnet," << layers_.size() << ',' << (bias_ ? 1 : 0) << '\n';
  for (const Layer& l : layers_) {
    out << "layer," << l.in << ',' << l.out << '\n';
    write_row(out, "w", l.weights);
    if (bias_) write_row(out, "b", l.bias);
  }
}

QNetwork QNetwork::load(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&](const char* tag) {
    if (!std::getline(in, line)) throw ParseError(std::string("unexpected end of checkpoint, wanted ") + tag, line_no + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto f = split_csv(line);
    if (f.empty() || f[0] != tag) throw ParseError(std::string("expected a `") + tag + "` row", line_no, 1);
    return f;
  };
  auto head = next("qnet");
  if (head.size() != 3) throw ParseError("malformed header", line_no);
  const std::size_t count = to_size(head[1], line_no, 2);
  QNetwork net;
  net.bias_ = to_size(head[2], line_no, 3) != 0;
  for (std::size_t k = 0; k < count; ++k) {
    auto shape = next("layer");
    if (shape.size() != 3) throw ParseError("malformed layer row", line_no);
    Layer l;
    l.in = to_size(shape[1], line_no, 2);
    l.out = to_size(shape[2], line_no, 3);
    if (k > 0 && net.layers_.back().out != l.in) throw ParseError("layer widths do not chain", line_no);
    auto w = next("w");
    if (w.size() != l.in * l.out + 1) throw ParseError("weight row has the wrong width", line_no);
    for (std::size_t i = 1; i < w.size(); ++i) l.weights.push_back(to_double(w[i], line_no, i + 1));
    if (net.bias_) {
      auto b = next("b");
      if (b.size() != l.out + 1) throw ParseError("bias row has the wrong width", line_no);
      for (std::size_t i = 1; i < b.size(); ++i) l.bias.push_back(to_double(b[i], line_no, i + 1));
    }
    net.layers_.push_back(std::move(l));
  }
  if (net.layers_.empty()) throw ParseError("checkpoint has no layers", line_no);
  return net;
}

// ---------------------------------------------------------------------------

int select_action(const QNetwork& net, const RLState& state, double epsilon, Rng& rng) {
  if (state.feasible.size() != net.outputs()) throw ConfigError("action mask does not match the network");
  std::vector<int> options;
  for (std::size_t i = 0; i < state.feasible.size(); ++i)
    if (state.feasible[i]) options.push_back(static_cast<int>(i));
  if (options.empty()) throw DeadEndError("no feasible action");
  if (rng.uniform() < epsilon) return options[rng.below(options.size())];
  const std::vector<double> q = net.forward(state.features);
  int best = options.front();
  for (int a : options)
    if (q[a] > q[best]) best = a;
  return best;
}

namespace {

double target_value(const QNetwork& target, const Transition& t, double gamma) {
  if (t.terminal) return t.reward;
  const std::vector<double> q = target.forward(t.next_state);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q.size(); ++a)
    if (t.next_feasible.empty() || t.next_feasible[a]) best = std::max(best, q[a]);
  if (!std::isfinite(best)) return t.reward;  // no feasible follow-up: treated as terminal
  return t.reward + gamma * best;
}

void check_action(const QNetwork& online, const Transition& t) {
  if (t.action < 0 || static_cast<std::size_t>(t.action) >= online.outputs())
    throw ConfigError("transition action out of range");
}

}  // namespace

double td_loss(const QNetwork& online, const QNetwork& target, std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw ConfigError("empty batch");
  double sum = 0.0;
  for (const Transition& t : batch) {
    check_action(online, t);
    const double y = target_value(target, t, gamma);
    const double q = online.forward(t.state)[t.action];
    sum += (y - q) * (y - q);
  }
  return sum / static_cast<double>(batch.size());
}

std::vector<double> td_loss_gradient(const QNetwork& online, const QNetwork& target,
                                     std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw ConfigError("empty batch");
  std::vector<double> grad(online.parameter_count(), 0.0);
  std::vector<double> dout(online.outputs());
  const double n = static_cast<double>(batch.size());
  for (const Transition& t : batch) {
    check_action(online, t);
    const double y = target_value(target, t, gamma);
    const double q = online.forward(t.state)[t.action];
    std::fill(dout.begin(), dout.end(), 0.0);
    dout[t.action] = -2.0 * (y - q) / n;
    online.backward(t.state, dout, grad);
  }
  return grad;
}

// ---------------------------------------------------------------------------

std::vector<std::string> validate(const DQNConfig& c) {
  std::vector<std::string> errors;
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) errors.push_back("gamma must lie in [0, 1)");
  if (!(c.learning_rate > 0.0)) errors.push_back("learning_rate must be positive");
  if (!(c.epsilon_start >= 0.0 && c.epsilon_start <= 1.0)) errors.push_back("epsilon_start must lie in [0, 1]");
  if (!(c.epsilon_end >= 0.0 && c.epsilon_end <= 1.0)) errors.push_back("epsilon_end must lie in [0, 1]");
  if (c.epsilon_end > c.epsilon_start) errors.push_back("epsilon_end must not exceed epsilon_start");
  if (c.epsilon_decay_steps <= 0) errors.push_back("epsilon_decay_steps must be positive");
  if (c.batch_size == 0) errors.push_back("batch_size must be positive");
  if (c.buffer_capacity < c.batch_size) errors.push_back("buffer_capacity must be at least batch_size");
  if (c.target_sync_period <= 0) errors.push_back("target_sync_period must be positive");
  if (c.max_actions == 0) errors.push_back("max_actions must be positive");
  if (!(c.cd_scale > 0.0)) errors.push_back("cd_scale must be positive");
  for (std::size_t h : c.hidden)
    if (h == 0) errors.push_back("hidden layer widths must be positive");
  return errors;
}

EpsilonSchedule::EpsilonSchedule(double start, double end, std::int64_t decay_steps)
    : start_(start), end_(end), decay_(decay_steps) {
  if (decay_steps <= 0) throw ConfigError("epsilon decay must span at least one step");
}

double EpsilonSchedule::at(std::int64_t step) const {
  if (step <= 0) return start_;
  if (step >= decay_) return end_;
  return start_ + (end_ - start_) * static_cast<double>(step) / static_cast<double>(decay_);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw ConfigError("sampling from an empty replay buffer");
  std::vector<Transition> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(items_[rng.below(items_.size())]);
  return out;
}

void write_training_curve_csv(std::ostream& out, std::span<const TrainingCurvePoint> curve) {
  out << "step,loss,epsilon,mean_reward\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%lld,%.10g,%.6g,%.10g\n", static_cast<long long>(p.step), p.loss, p.epsilon,
                  p.mean_reward);
    out << buf;
  }
}

// ---------------------------------------------------------------------------

namespace {

const DQNConfig& checked(const DQNConfig& c) {
  const auto errors = validate(c);
  if (!errors.empty()) throw ConfigError("invalid agent config: " + errors.front());
  return c;
}

}  // namespace

DQNAgent::DQNAgent(const DQNConfig& config)
    : config_(checked(config)),
      rng_(config.rng_seed, 0x51),
      buffer_(config.buffer_capacity),
      schedule_(config.epsilon_start, config.epsilon_end, config.epsilon_decay_steps) {
  Rng init(config.rng_seed, 0x1a);
  online_ = QNetwork(state_size(), config.hidden, config.max_actions, config.bias, init);
  target_ = online_;
}

int DQNAgent::act(const RLState& state) {
  const double eps = epsilon();
  ++decisions_;
  ++cost_.nn_forward;
  return select_action(online_, state, eps, rng_);
}

int DQNAgent::greedy(const RLState& state) const {
  ++cost_.nn_forward;
  Rng unused(0);
  return select_action(online_, state, 0.0, unused);
}

void DQNAgent::remember(Transition t) {
  if (t.state.size() != state_size() || (!t.terminal && t.next_state.size() != state_size()))
    throw ConfigError("transition width does not match the agent");
  reward_sum_ += t.reward;
  ++reward_count_;
  buffer_.push(std::move(t));
}

std::optional<double> DQNAgent::train_step() {
  if (buffer_.size() < config_.batch_size) return std::nullopt;
  const auto batch = buffer_.sample(config_.batch_size, rng_);
  const double loss = td_loss(online_, target_, batch, config_.gamma);
  const auto grad = td_loss_gradient(online_, target_, batch, config_.gamma);
  cost_.nn_forward += 2 * batch.size();
  cost_.nn_backward += batch.size();
  auto theta = online_.flat_parameters();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= config_.learning_rate * grad[i];
  online_.set_flat_parameters(theta);
  ++train_steps_;
  if (train_steps_ % config_.target_sync_period == 0) sync_target();
  curve_.push_back({train_steps_, loss, epsilon(), reward_count_ ? reward_sum_ / reward_count_ : 0.0});
  reward_sum_ = 0.0;
  reward_count_ = 0;
  return loss;
}

void DQNAgent::load(std::istream& in) {
  QNetwork net = QNetwork::load(in);
  if (net.inputs() != state_size() || net.outputs() != config_.max_actions)
    throw ConfigError("checkpoint shape does not match the agent");
  online_ = std::move(net);
  target_ = online_;
}

}  // namespace vesonet
