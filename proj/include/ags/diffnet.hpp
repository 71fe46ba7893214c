#pragma once

// Dense feed-forward networks with hand-written reverse mode, plus the loss
// and optimizer pieces the policies are trained with.
//
// Parameters live in one flat vector. Layer l occupies a contiguous block:
// W_l (out x in, row-major) followed by b_l (out). Batches are row-major
// matrices with one sample per row.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ags/core.hpp"
#include "ags/errors.hpp"

namespace ags::diffnet {

using Vector = Eigen::VectorXd;

enum class Activation { Identity, Relu, Sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw InvalidArgument("unknown activation '" + s + "'");
}

struct Layer {
  std::size_t width = 0;
  Activation activation = Activation::Identity;
  friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetworkSpec {
  std::size_t input = 0;
  std::vector<Layer> layers;

  std::size_t output() const { return layers.empty() ? input : layers.back().width; }

  std::size_t parameter_count() const {
    std::size_t n = 0, in = input;
    for (const auto& l : layers) {
      n += l.width * in + l.width;
      in = l.width;
    }
    return n;
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Cached per-layer inputs and outputs of one forward pass.
class Tape {
 public:
  std::vector<RowMatrix> inputs;
  std::vector<RowMatrix> outputs;
  bool consumed() const { return consumed_; }
  void consume() {
    if (consumed_) throw ContractViolation("tape already used by a backward pass");
    consumed_ = true;
  }

 private:
  bool consumed_ = false;
};

struct Gradients {
  Vector params;
  RowMatrix input;
};

namespace detail {

using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;

inline void activate(RowMatrix& z, Activation a) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Sigmoid: z = (1.0 / (1.0 + (-z.array()).exp())).matrix(); break;
  }
}

// Turns dL/dy into dL/dz for the given activation, using y = act(z).
inline void activation_backward(RowMatrix& grad, const RowMatrix& y, Activation a) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu: grad = (y.array() > 0.0).select(grad.array(), 0.0).matrix(); break;
    case Activation::Sigmoid: grad = (grad.array() * y.array() * (1.0 - y.array())).matrix(); break;
  }
}

inline Gradients backward_impl(const NetworkSpec& spec, std::span<const double> params, const Tape& tape,
                               const RowMatrix& upstream) {
  Gradients g;
  g.params = Vector::Zero(static_cast<Eigen::Index>(spec.parameter_count()));
  RowMatrix delta = upstream;
  // Offsets of each layer block.
  std::vector<std::size_t> offset(spec.layers.size());
  std::size_t off = 0, in = spec.input;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    offset[l] = off;
    off += spec.layers[l].width * in + spec.layers[l].width;
    in = spec.layers[l].width;
  }
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& layer = spec.layers[li];
    const RowMatrix& x = tape.inputs[li];
    const auto out = static_cast<Eigen::Index>(layer.width);
    const auto fan_in = x.cols();
    activation_backward(delta, tape.outputs[li], layer.activation);
    MatMap dw(g.params.data() + offset[li], out, fan_in);
    dw.noalias() = delta.transpose() * x;
    Eigen::Map<Vector> db(g.params.data() + offset[li] + out * fan_in, out);
    db = delta.colwise().sum().transpose();
    ConstMatMap w(params.data() + offset[li], out, fan_in);
    RowMatrix prev = delta * w;
    delta = std::move(prev);
  }
  g.input = std::move(delta);
  return g;
}

}  // namespace detail

inline void check_params(const NetworkSpec& spec, std::span<const double> params) {
  if (params.size() != spec.parameter_count())
    throw InvalidArgument("parameter vector has " + std::to_string(params.size()) + " entries, spec needs " +
                          std::to_string(spec.parameter_count()));
}

// Forward pass over a batch; rows are samples.
inline RowMatrix forward(const NetworkSpec& spec, std::span<const double> params, const RowMatrix& input,
                         Tape* tape = nullptr) {
  check_params(spec, params);
  if (static_cast<std::size_t>(input.cols()) != spec.input)
    throw InvalidArgument("input width " + std::to_string(input.cols()) + " does not match spec width " +
                          std::to_string(spec.input));
  if (tape) {
    tape->inputs.clear();
    tape->outputs.clear();
  }
  RowMatrix x = input;
  std::size_t off = 0;
  for (const auto& layer : spec.layers) {
    const auto out = static_cast<Eigen::Index>(layer.width);
    const auto fan_in = x.cols();
    detail::ConstMatMap w(params.data() + off, out, fan_in);
    Eigen::Map<const Vector> b(params.data() + off + out * fan_in, out);
    RowMatrix z = x * w.transpose();
    z.rowwise() += b.transpose();
    detail::activate(z, layer.activation);
    if (tape) tape->inputs.push_back(std::move(x));
    x = std::move(z);
    if (tape) tape->outputs.push_back(x);
    off += static_cast<std::size_t>(out * fan_in + out);
  }
  return x;
}

inline Vector forward(const NetworkSpec& spec, std::span<const double> params, std::span<const double> input,
                      Tape* tape = nullptr) {
  RowMatrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = input[i];
  RowMatrix y = forward(spec, params, x, tape);
  return y.row(0).transpose();
}

// Reverse pass: gradient of sum(output .* upstream) w.r.t. parameters and input.
// Consumes the tape.
inline Gradients backward(const NetworkSpec& spec, std::span<const double> params, Tape& tape,
                          const RowMatrix& upstream) {
  tape.consume();
  check_params(spec, params);
  if (tape.outputs.size() != spec.layers.size()) throw InvalidArgument("tape does not belong to this network");
  if (!spec.layers.empty() && (upstream.rows() != tape.outputs.back().rows() ||
                               upstream.cols() != tape.outputs.back().cols()))
    throw InvalidArgument("upstream gradient shape mismatch");
  return detail::backward_impl(spec, params, tape, upstream);
}

// Several reverse passes over one tape, one per upstream gradient. Consumes the tape.
inline std::vector<Gradients> backward_multi(const NetworkSpec& spec, std::span<const double> params, Tape& tape,
                                             std::span<const RowMatrix> upstreams) {
  tape.consume();
  check_params(spec, params);
  std::vector<Gradients> out;
  out.reserve(upstreams.size());
  for (const auto& u : upstreams) {
    if (u.rows() != tape.outputs.back().rows() || u.cols() != tape.outputs.back().cols())
      throw InvalidArgument("upstream gradient shape mismatch");
    out.push_back(detail::backward_impl(spec, params, tape, u));
  }
  return out;
}

// Glorot-uniform weights, zero biases.
template <class Rng>
Vector init_params(const NetworkSpec& spec, Rng& rng) {
  Vector p = Vector::Zero(static_cast<Eigen::Index>(spec.parameter_count()));
  std::size_t off = 0, in = spec.input;
  for (const auto& l : spec.layers) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + l.width));
    std::uniform_real_distribution<double> u(-a, a);
    for (std::size_t k = 0; k < l.width * in; ++k) p[static_cast<Eigen::Index>(off + k)] = u(rng);
    off += l.width * in + l.width;
    in = l.width;
  }
  return p;
}

inline NetworkSpec mlp(std::size_t input, std::vector<std::size_t> hidden, std::size_t output, Activation out_act) {
  NetworkSpec s{input, {}};
  for (auto h : hidden) s.layers.push_back({h, Activation::Relu});
  s.layers.push_back({output, out_act});
  return s;
}

// ---------------------------------------------------------------------------
// Distributions and losses

// Softmax restricted to the mask. Off-mask entries are exactly zero.
inline std::vector<double> masked_softmax(std::span<const double> logits, const std::vector<bool>& mask) {
  if (mask.size() != logits.size()) throw InvalidArgument("mask and logits differ in length");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) mx = std::max(mx, logits[i]);
  if (mx == -std::numeric_limits<double>::infinity()) throw EmptySupport("masked softmax over an empty support");
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) z += (p[i] = std::exp(logits[i] - mx));
  for (auto& v : p) v /= z;
  return p;
}

// d log pi(action) / d logits for a masked softmax.
inline std::vector<double> log_softmax_grad(const std::vector<double>& probs, std::size_t action) {
  std::vector<double> g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = (i == action ? 1.0 : 0.0) - probs[i];
  return g;
}

// d H(pi) / d logits, H = -sum pi log pi over the support.
inline std::vector<double> entropy_grad(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  std::vector<double> g(probs.size(), 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) g[i] = -probs[i] * (std::log(probs[i]) + h);
  return g;
}

template <class Rng>
std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  std::size_t last = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (r < acc) return i;
  }
  if (last == probs.size()) throw EmptySupport("sampling from an empty distribution");
  return last;
}

// Lowest index wins ties; only positive-probability entries are eligible.
inline std::size_t argmax(const std::vector<double>& probs) {
  std::size_t best = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0 && (best == probs.size() || probs[i] > probs[best])) best = i;
  if (best == probs.size()) throw EmptySupport("argmax over an empty distribution");
  return best;
}

inline constexpr double kProbEps = 1e-7;

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d p
};

// Mean binary cross-entropy over masked-in entries with p clamped to [eps, 1-eps].
inline BceResult bce(std::span<const double> p, std::span<const double> y, const std::vector<bool>& mask) {
  if (p.size() != y.size() || p.size() != mask.size()) throw InvalidArgument("bce: length mismatch");
  BceResult r;
  r.grad.assign(p.size(), 0.0);
  std::size_t n = 0;
  for (bool m : mask) n += m ? 1 : 0;
  if (n == 0) return r;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!mask[i]) continue;
    const double pc = std::clamp(p[i], kProbEps, 1.0 - kProbEps);
    r.loss -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
    // Inside the clamp the derivative is (p-y)/(p(1-p)); the clamp itself has zero slope.
    if (p[i] > kProbEps && p[i] < 1.0 - kProbEps) r.grad[i] = (pc - y[i]) / (pc * (1.0 - pc)) * inv;
  }
  r.loss *= inv;
  return r;
}

// ---------------------------------------------------------------------------
// REINFORCE

inline std::vector<double> reward_to_go(std::span<const double> rewards, double gamma = 1.0) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

// Loss gradient  -sum_t (G_t - baseline) * grad log pi(a_t).
inline Vector reinforce_gradient(std::span<const Vector> log_prob_grads, std::span<const double> returns,
                                 double baseline) {
  if (log_prob_grads.size() != returns.size()) throw InvalidArgument("reinforce: length mismatch");
  if (log_prob_grads.empty()) return Vector();
  Vector g = Vector::Zero(log_prob_grads.front().size());
  for (std::size_t t = 0; t < returns.size(); ++t) {
    if (log_prob_grads[t].size() != g.size()) throw InvalidArgument("reinforce: gradient size mismatch");
    g.noalias() -= (returns[t] - baseline) * log_prob_grads[t];
  }
  return g;
}

enum class ReturnMode {
  RewardToGo,   // G_t = sum_{s>=t} r_s with a per-step batch-mean baseline
  TotalReturn,  // G_t = R for every step, no baseline
};

// Streaming REINFORCE over a batch of episodes without holding per-step
// gradients: sum_t G_t g_t is built from prefix sums, and the per-step
// baseline term from per-step gradient sums across the batch.
class ReinforceAccumulator {
 public:
  ReinforceAccumulator(std::size_t dim, ReturnMode mode) : dim_(dim), mode_(mode) {}

  void begin_episode() {
    prefix_ = Vector::Zero(static_cast<Eigen::Index>(dim_));
    weighted_ = Vector::Zero(static_cast<Eigen::Index>(dim_));
    rewards_.clear();
  }

  // Gradient of log pi for the action at the current step, then its reward.
  void add_step(const Vector& log_prob_grad, double reward) {
    const std::size_t t = rewards_.size();
    prefix_ += log_prob_grad;
    weighted_.noalias() += reward * prefix_;
    if (step_sum_.size() <= t) {
      step_sum_.push_back(Vector::Zero(static_cast<Eigen::Index>(dim_)));
      return_sum_.push_back(0.0);
      count_.push_back(0);
    }
    step_sum_[t] += log_prob_grad;
    rewards_.push_back(reward);
  }

  void end_episode() {
    const auto g = reward_to_go(rewards_);
    const double total = g.empty() ? 0.0 : g.front();
    if (mode_ == ReturnMode::TotalReturn) {
      batch_weighted_ += total * prefix_;
    } else {
      batch_weighted_ += weighted_;
      for (std::size_t t = 0; t < g.size(); ++t) {
        return_sum_[t] += g[t];
        ++count_[t];
      }
    }
    ++episodes_;
  }

  std::size_t episodes() const { return episodes_; }

  // Mean loss gradient over the episodes added since the last reset.
  Vector gradient() const {
    Vector out = -batch_weighted_;
    if (mode_ == ReturnMode::RewardToGo) {
      for (std::size_t t = 0; t < step_sum_.size(); ++t) {
        if (count_[t] == 0) continue;
        const double baseline = return_sum_[t] / static_cast<double>(count_[t]);
        out.noalias() += baseline * step_sum_[t];
      }
    }
    if (episodes_ > 0) out /= static_cast<double>(episodes_);
    return out;
  }

  void reset() {
    batch_weighted_ = Vector::Zero(static_cast<Eigen::Index>(dim_));
    step_sum_.clear();
    return_sum_.clear();
    count_.clear();
    episodes_ = 0;
  }

  // Merges another accumulator's batch totals (used after parallel rollouts).
  void merge(const ReinforceAccumulator& o) {
    batch_weighted_ += o.batch_weighted_;
    for (std::size_t t = 0; t < o.step_sum_.size(); ++t) {
      if (step_sum_.size() <= t) {
        step_sum_.push_back(Vector::Zero(static_cast<Eigen::Index>(dim_)));
        return_sum_.push_back(0.0);
        count_.push_back(0);
      }
      step_sum_[t] += o.step_sum_[t];
      return_sum_[t] += o.return_sum_[t];
      count_[t] += o.count_[t];
    }
    episodes_ += o.episodes_;
  }

 private:
  std::size_t dim_;
  ReturnMode mode_;
  Vector prefix_;
  Vector weighted_;
  std::vector<double> rewards_;
  Vector batch_weighted_ = Vector::Zero(static_cast<Eigen::Index>(dim_));
  std::vector<Vector> step_sum_;
  std::vector<double> return_sum_;
  std::vector<std::size_t> count_;
  std::size_t episodes_ = 0;
};

// ---------------------------------------------------------------------------
// Optimizers

struct StepDecay {
  double base_lr = 1e-4;
  std::size_t interval = 20;  // episodes
  double factor = 0.5;

  double at(std::size_t episodes) const {
    if (interval == 0) return base_lr;
    return base_lr * std::pow(factor, static_cast<double>(episodes / interval));
  }
};

struct AdamState {
  Vector m;
  Vector v;
  std::size_t step = 0;
  std::size_t episodes = 0;  // drives the decay schedule
  StepDecay schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t dim, StepDecay sched)
      : m(Vector::Zero(static_cast<Eigen::Index>(dim))),
        v(Vector::Zero(static_cast<Eigen::Index>(dim))),
        schedule(sched) {}

  double lr() const { return schedule.at(episodes); }
};

inline void check_finite(const Vector& g) {
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (!std::isfinite(g[i])) throw NumericalError("non-finite gradient entry", static_cast<std::size_t>(i));
}

inline void adam_step(Vector& params, const Vector& grad, AdamState& st) {
  if (grad.size() != params.size() || st.m.size() != params.size())
    throw InvalidArgument("adam: shape mismatch");
  check_finite(grad);
  ++st.step;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const double lr = st.lr();
  params.array() -= lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.eps);
}

inline void sgd_step(Vector& params, const Vector& grad, double lr) {
  if (grad.size() != params.size()) throw InvalidArgument("sgd: shape mismatch");
  check_finite(grad);
  params.noalias() -= lr * grad;
}

}  // namespace ags::diffnet
