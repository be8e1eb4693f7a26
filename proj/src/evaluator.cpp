#include "kka/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kka {

namespace {

// Forward pass keeping activations for backprop. activations[0] is the
// input, activations[l] the output of layer l (tanh applied on hidden
// layers, linear on the last).
std::vector<Vec> forward_all(const ConfusionEvaluator& ev, const Vec& x) {
  std::vector<Vec> activations;
  activations.reserve(ev.layers.size() + 1);
  activations.push_back(x);
  for (std::size_t l = 0; l < ev.layers.size(); ++l) {
    Vec z = matvec(ev.layers[l], activations.back());
    if (l + 1 < ev.layers.size()) {
      for (double& v : z) v = std::tanh(v);
    }
    activations.push_back(std::move(z));
  }
  return activations;
}

void require_center(const ConfusionEvaluator& ev, const char* op) {
  if (!ev.center.has_value()) {
    throw std::logic_error(std::string(op) + ": hypersphere center not set");
  }
}

// Accumulates d(loss_sample)/dW into grads, given d(loss)/d(embedding).
void backprop_into(const ConfusionEvaluator& ev,
                   const std::vector<Vec>& activations, Vec grad_out,
                   std::vector<Mat>& grads) {
  for (std::size_t l = ev.layers.size(); l-- > 0;) {
    const Vec& input = activations[l];
    Mat& g = grads[l];
    for (std::size_t r = 0; r < ev.layers[l].rows(); ++r) {
      for (std::size_t c = 0; c < ev.layers[l].cols(); ++c) {
        g(r, c) += grad_out[r] * input[c];
      }
    }
    if (l == 0) break;
    Vec grad_in = matvec_transposed(ev.layers[l], grad_out);
    // Through the tanh of the previous layer's output.
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
      grad_in[i] *= 1.0 - activations[l][i] * activations[l][i];
    }
    grad_out = std::move(grad_in);
  }
}

double sample_loss_and_grad(const ConfusionEvaluator& ev, const LabeledVec& s,
                            std::vector<Mat>* grads) {
  const std::vector<Vec> acts = forward_all(ev, s.x);
  const Vec diff = sub(acts.back(), *ev.center);
  const double d2 = dot(diff, diff);

  double loss;
  double coeff;  // d(loss)/d(d2)
  if (s.label >= 0) {
    loss = d2;
    coeff = 1.0;
  } else {
    const double denom = d2 + ev.eps_inv;
    loss = 1.0 / denom;
    coeff = -1.0 / (denom * denom);
  }
  if (grads != nullptr) {
    Vec grad_out(diff.size());
    for (std::size_t i = 0; i < diff.size(); ++i) {
      grad_out[i] = coeff * 2.0 * diff[i];
    }
    backprop_into(ev, acts, std::move(grad_out), *grads);
  }
  return loss;
}

std::vector<Mat> zero_grads(const ConfusionEvaluator& ev) {
  std::vector<Mat> grads;
  grads.reserve(ev.layers.size());
  for (const Mat& w : ev.layers) grads.emplace_back(w.rows(), w.cols());
  return grads;
}

double regularizer(const ConfusionEvaluator& ev) {
  double acc = 0.0;
  for (const Mat& w : ev.layers) acc += frobenius_norm_squared(w);
  return 0.5 * ev.weight_decay * acc;
}

}  // namespace

Vec ConfusionEvaluator::embed(const Vec& x) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("embed: dimension mismatch (input " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(input_dim()) + ")");
  }
  Vec a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    a = matvec(layers[l], a);
    if (l + 1 < layers.size()) {
      for (double& v : a) v = std::tanh(v);
    }
  }
  return a;
}

ConfusionEvaluator init_evaluator(std::size_t d,
                                  const std::vector<std::size_t>& widths,
                                  std::uint64_t seed, double weight_decay,
                                  double eps_inv) {
  if (widths.empty()) {
    throw std::invalid_argument("init_evaluator: widths must be non-empty");
  }
  if (d == 0) throw std::invalid_argument("init_evaluator: d must be >= 1");
  for (std::size_t w : widths) {
    if (w == 0) {
      throw std::invalid_argument("init_evaluator: zero-width layer");
    }
  }
  if (!(weight_decay > 0.0)) {
    throw std::invalid_argument("init_evaluator: weight_decay must be > 0");
  }

  ConfusionEvaluator ev;
  ev.weight_decay = weight_decay;
  ev.eps_inv = eps_inv;
  Rng rng(seed);
  std::size_t fan_in = d;
  for (std::size_t w : widths) {
    Mat layer(w, fan_in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : layer.data()) v = (rng.uniform() * 2.0 - 1.0) * bound;
    ev.layers.push_back(std::move(layer));
    fan_in = w;
  }
  return ev;
}

void set_center(ConfusionEvaluator& ev, const std::vector<Vec>& normals) {
  if (ev.center.has_value()) {
    throw std::logic_error("set_center: center is already set");
  }
  if (normals.empty()) {
    throw std::invalid_argument("set_center: need at least one normal");
  }
  Vec c(ev.output_dim(), 0.0);
  for (const Vec& x : normals) {
    const Vec e = ev.embed(x);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += e[i];
  }
  for (double& v : c) v /= static_cast<double>(normals.size());
  // Snap coordinates away from zero so a constant (all-zero-weight) map
  // cannot reach the center.
  for (double& v : c) {
    if (std::abs(v) < 0.1) v = (v < 0.0) ? -0.1 : 0.1;
  }
  ev.center = std::move(c);
}

double sad_loss(const ConfusionEvaluator& ev,
                const std::vector<LabeledVec>& samples) {
  require_center(ev, "sad_loss");
  double data = 0.0;
  for (const LabeledVec& s : samples) {
    data += sample_loss_and_grad(ev, s, nullptr);
  }
  if (!samples.empty()) data /= static_cast<double>(samples.size());
  return data + regularizer(ev);
}

std::vector<Mat> sad_loss_gradient(const ConfusionEvaluator& ev,
                                   const std::vector<LabeledVec>& samples) {
  require_center(ev, "sad_loss_gradient");
  std::vector<Mat> grads = zero_grads(ev);
  for (const LabeledVec& s : samples) {
    sample_loss_and_grad(ev, s, &grads);
  }
  const double inv_n =
      samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
  for (std::size_t l = 0; l < grads.size(); ++l) {
    for (std::size_t i = 0; i < grads[l].data().size(); ++i) {
      grads[l].data()[i] = grads[l].data()[i] * inv_n +
                           ev.weight_decay * ev.layers[l].data()[i];
    }
  }
  return grads;
}

TrainResult train_evaluator(const ConfusionEvaluator& ev,
                            const std::vector<Vec>& normals,
                            const std::vector<Vec>& anomalies,
                            std::size_t epochs, double lr, std::uint64_t seed,
                            std::size_t batch_size,
                            const EpochObserver& on_epoch) {
  require_center(ev, "train_evaluator");
  if (normals.empty()) {
    throw std::invalid_argument("train_evaluator: normals must be non-empty");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("train_evaluator: batch_size must be >= 1");
  }

  std::vector<LabeledVec> data;
  data.reserve(normals.size() + anomalies.size());
  for (const Vec& x : normals) data.push_back({x, +1});
  for (const Vec& x : anomalies) data.push_back({x, -1});

  TrainResult result;
  result.evaluator = ev;
  ConfusionEvaluator& model = result.evaluator;
  const double initial_loss = sad_loss(model, data);

  // Adam state.
  std::vector<Mat> m = zero_grads(model);
  std::vector<Mat> v = zero_grads(model);
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::size_t step = 0;

  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<Mat> grads = zero_grads(model);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch_loss += sample_loss_and_grad(model, data[order[i]], &grads);
      }
      const double inv_b = 1.0 / static_cast<double>(end - start);
      batch_loss = batch_loss * inv_b + regularizer(model);
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error(
            "train_evaluator: non-finite loss at epoch " +
            std::to_string(epoch) + ", batch offset " + std::to_string(start));
      }

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& w = model.layers[l].data();
        auto& g = grads[l].data();
        auto& ml = m[l].data();
        auto& vl = v[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double grad = g[i] * inv_b + model.weight_decay * w[i];
          ml[i] = beta1 * ml[i] + (1.0 - beta1) * grad;
          vl[i] = beta2 * vl[i] + (1.0 - beta2) * grad * grad;
          w[i] -= lr * (ml[i] / bc1) / (std::sqrt(vl[i] / bc2) + adam_eps);
        }
      }
    }
    const double epoch_loss = sad_loss(model, data);
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("train_evaluator: non-finite loss after epoch " +
                               std::to_string(epoch));
    }
    result.loss_curve.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss, model);
  }

  if (!result.loss_curve.empty() && result.loss_curve.back() > initial_loss) {
    result.loss_increased = true;
    log_warn("train_evaluator: final loss " +
             std::to_string(result.loss_curve.back()) +
             " exceeds initial loss " + std::to_string(initial_loss));
  }
  return result;
}

double evaluator_distance(const ConfusionEvaluator& ev, const Vec& x) {
  require_center(ev, "evaluator_distance");
  const Vec e = ev.embed(x);
  return std::sqrt(squared_distance(e, *ev.center));
}

HardnessPartition partition_hardness(const ConfusionEvaluator& ev,
                                     const std::vector<Sample>& anomalies,
                                     const std::vector<Sample>& normals,
                                     double quantile) {
  require_center(ev, "partition_hardness");
  if (normals.empty()) {
    throw std::invalid_argument("partition_hardness: normals must be non-empty");
  }
  if (!(quantile > 0.0) || quantile > 1.0) {
    throw std::invalid_argument("partition_hardness: quantile must be in (0,1]");
  }

  Vec normal_d;
  normal_d.reserve(normals.size());
  for (const Sample& s : normals) {
    normal_d.push_back(evaluator_distance(ev, s.features));
  }
  std::sort(normal_d.begin(), normal_d.end());
  const std::size_t n = normal_d.size();
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(n)));
  idx = std::min(std::max<std::size_t>(idx, 1), n) - 1;

  HardnessPartition part;
  part.threshold = normal_d[idx];
  part.distances.reserve(anomalies.size());
  for (const Sample& s : anomalies) {
    const double d = evaluator_distance(ev, s.features);
    part.distances.push_back(d);
    Sample tagged = s;
    if (d < part.threshold) {
      tagged.hardness = Hardness::hard;
      part.hard.push_back(std::move(tagged));
    } else {
      tagged.hardness = Hardness::easy;
      part.easy.push_back(std::move(tagged));
    }
  }
  return part;
}

}  // namespace kka
