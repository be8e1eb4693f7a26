#include "kka/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kka {

namespace {

double logsumexp(const double* logits, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, logits[i]);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(logits[i] - mx);
  return mx + std::log(acc);
}

// softmax(logits / temperature) into probs
void softmax_at_temperature(const double* logits, std::size_t n,
                            double temperature, double* probs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, logits[i] / temperature);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = std::exp(logits[i] / temperature - mx);
    acc += probs[i];
  }
  for (std::size_t i = 0; i < n; ++i) probs[i] /= acc;
}

int draw_categorical(const double* probs, std::size_t n, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(n - 1);
}

void check_token(const GeneratorPolicy& policy, int t, const char* op) {
  if (t < 0 || static_cast<std::size_t>(t) >= policy.vocab_size) {
    throw std::invalid_argument(std::string(op) + ": token " +
                                std::to_string(t) +
                                " outside vocabulary of size " +
                                std::to_string(policy.vocab_size));
  }
}

double log_softmax_entry(const double* logits, std::size_t n, int idx) {
  return logits[idx] - logsumexp(logits, n);
}

const double* transition_row(const GeneratorPolicy& policy, int prev) {
  return policy.transition_logits.data().data() +
         static_cast<std::size_t>(prev) * policy.vocab_size;
}

void check_pair_inputs(const GeneratorPolicy& policy_new,
                       const GeneratorPolicy& policy_ref,
                       const std::vector<PreferencePair>& pairs) {
  if (policy_new.vocab_size != policy_ref.vocab_size) {
    throw std::invalid_argument(
        "dpo: vocabulary mismatch (" + std::to_string(policy_new.vocab_size) +
        " vs " + std::to_string(policy_ref.vocab_size) + ")");
  }
  if (pairs.empty()) {
    throw std::invalid_argument("dpo: pairs must be non-empty");
  }
  for (const PreferencePair& p : pairs) {
    if (p.prompt.tokens.empty()) {
      throw std::invalid_argument("dpo: pair with empty prompt");
    }
    if (p.preferred.tokens.empty() || p.rejected.tokens.empty()) {
      throw std::invalid_argument("dpo: pair with empty completion");
    }
    check_token(policy_new, p.prompt.tokens.back(), "dpo");
    for (int t : p.preferred.tokens) check_token(policy_new, t, "dpo");
    for (int t : p.rejected.tokens) check_token(policy_new, t, "dpo");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow
double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// Adds coeff * d(log p(seq | context))/d(transition_logits) into grad.
void accumulate_conditional_grad(const GeneratorPolicy& policy,
                                 int context_token, const TokenSequence& seq,
                                 double coeff, Mat& grad) {
  const std::size_t v = policy.vocab_size;
  Vec probs(v);
  int prev = context_token;
  for (int t : seq.tokens) {
    const double* row = transition_row(policy, prev);
    softmax_at_temperature(row, v, 1.0, probs.data());
    for (std::size_t j = 0; j < v; ++j) {
      grad(static_cast<std::size_t>(prev), j) -= coeff * probs[j];
    }
    grad(static_cast<std::size_t>(prev), static_cast<std::size_t>(t)) += coeff;
    prev = t;
  }
}

}  // namespace

GeneratorPolicy make_uniform_policy(std::size_t vocab_size,
                                    std::size_t seq_len, double temperature) {
  if (vocab_size == 0 || seq_len == 0) {
    throw std::invalid_argument("make_uniform_policy: V and L must be >= 1");
  }
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("make_uniform_policy: temperature must be > 0");
  }
  GeneratorPolicy p;
  p.vocab_size = vocab_size;
  p.seq_len = seq_len;
  p.start_logits.assign(vocab_size, 0.0);
  p.transition_logits = Mat(vocab_size, vocab_size, 0.0);
  p.temperature = temperature;
  return p;
}

namespace {

// context < 0 draws the first token from the start distribution.
TokenSequence sample_one(const GeneratorPolicy& policy, int context, Rng& rng,
                         Vec& probs) {
  const std::size_t v = policy.vocab_size;
  TokenSequence seq;
  seq.tokens.reserve(policy.seq_len);
  int tok;
  if (context < 0) {
    softmax_at_temperature(policy.start_logits.data(), v, policy.temperature,
                           probs.data());
    tok = draw_categorical(probs.data(), v, rng);
  } else {
    softmax_at_temperature(transition_row(policy, context), v,
                           policy.temperature, probs.data());
    tok = draw_categorical(probs.data(), v, rng);
  }
  seq.tokens.push_back(tok);
  for (std::size_t pos = 1; pos < policy.seq_len; ++pos) {
    softmax_at_temperature(transition_row(policy, tok), v, policy.temperature,
                           probs.data());
    tok = draw_categorical(probs.data(), v, rng);
    seq.tokens.push_back(tok);
  }
  return seq;
}

}  // namespace

std::vector<TokenSequence> sample_sequence(const GeneratorPolicy& policy,
                                           std::uint64_t rng_seed,
                                           std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("sample_sequence: n must be >= 1");
  }
  Rng rng(rng_seed);
  Vec probs(policy.vocab_size);
  std::vector<TokenSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(sample_one(policy, -1, rng, probs));
  }
  return out;
}

std::vector<TokenSequence> sample_sequence_given(
    const GeneratorPolicy& policy, const std::vector<int>& context_tokens,
    std::uint64_t rng_seed, std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("sample_sequence_given: n must be >= 1");
  }
  if (context_tokens.empty()) {
    throw std::invalid_argument("sample_sequence_given: no context tokens");
  }
  for (int t : context_tokens) check_token(policy, t, "sample_sequence_given");
  Rng rng(rng_seed);
  Vec probs(policy.vocab_size);
  std::vector<TokenSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(
        sample_one(policy, context_tokens[i % context_tokens.size()], rng, probs));
  }
  return out;
}

double log_prob(const GeneratorPolicy& policy, const TokenSequence& seq) {
  if (seq.tokens.empty()) {
    throw std::invalid_argument("log_prob: empty sequence");
  }
  for (int t : seq.tokens) check_token(policy, t, "log_prob");
  const std::size_t v = policy.vocab_size;
  double lp =
      log_softmax_entry(policy.start_logits.data(), v, seq.tokens.front());
  for (std::size_t i = 1; i < seq.tokens.size(); ++i) {
    lp += log_softmax_entry(transition_row(policy, seq.tokens[i - 1]), v,
                            seq.tokens[i]);
  }
  return lp;
}

double log_prob_given(const GeneratorPolicy& policy, int context_token,
                      const TokenSequence& seq) {
  if (seq.tokens.empty()) {
    throw std::invalid_argument("log_prob_given: empty sequence");
  }
  check_token(policy, context_token, "log_prob_given");
  for (int t : seq.tokens) check_token(policy, t, "log_prob_given");
  const std::size_t v = policy.vocab_size;
  double lp = 0.0;
  int prev = context_token;
  for (int t : seq.tokens) {
    lp += log_softmax_entry(transition_row(policy, prev), v, t);
    prev = t;
  }
  return lp;
}

double dpo_loss(const GeneratorPolicy& policy_new,
                const GeneratorPolicy& policy_ref,
                const std::vector<PreferencePair>& pairs, double beta) {
  check_pair_inputs(policy_new, policy_ref, pairs);
  double acc = 0.0;
  for (const PreferencePair& p : pairs) {
    const int ctx = p.prompt.tokens.back();
    const double delta_pref = log_prob_given(policy_new, ctx, p.preferred) -
                              log_prob_given(policy_ref, ctx, p.preferred);
    const double delta_rej = log_prob_given(policy_new, ctx, p.rejected) -
                             log_prob_given(policy_ref, ctx, p.rejected);
    acc += -log_sigmoid(beta * (delta_pref - delta_rej));
  }
  return acc / static_cast<double>(pairs.size());
}

PolicyGrad dpo_loss_gradient(const GeneratorPolicy& policy_new,
                             const GeneratorPolicy& policy_ref,
                             const std::vector<PreferencePair>& pairs,
                             double beta) {
  check_pair_inputs(policy_new, policy_ref, pairs);
  PolicyGrad grad;
  grad.d_start.assign(policy_new.vocab_size, 0.0);
  grad.d_transition = Mat(policy_new.vocab_size, policy_new.vocab_size, 0.0);

  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const PreferencePair& p : pairs) {
    const int ctx = p.prompt.tokens.back();
    const double delta_pref = log_prob_given(policy_new, ctx, p.preferred) -
                              log_prob_given(policy_ref, ctx, p.preferred);
    const double delta_rej = log_prob_given(policy_new, ctx, p.rejected) -
                             log_prob_given(policy_ref, ctx, p.rejected);
    const double margin = beta * (delta_pref - delta_rej);
    // d/dm of -log sigmoid(m) is -sigmoid(-m)
    const double outer = -sigmoid(-margin) * inv_n;
    accumulate_conditional_grad(policy_new, ctx, p.preferred, outer * beta,
                                grad.d_transition);
    accumulate_conditional_grad(policy_new, ctx, p.rejected, -outer * beta,
                                grad.d_transition);
  }
  return grad;
}

GeneratorPolicy dpo_finetune_from(const GeneratorPolicy& policy_ref,
                                  const GeneratorPolicy& init,
                                  const std::vector<PreferencePair>& pairs,
                                  double beta, std::size_t steps, double lr) {
  check_pair_inputs(init, policy_ref, pairs);
  GeneratorPolicy current = init;
  GeneratorPolicy best = init;
  double best_loss = dpo_loss(current, policy_ref, pairs, beta);

  for (std::size_t step = 0; step < steps; ++step) {
    const PolicyGrad grad = dpo_loss_gradient(current, policy_ref, pairs, beta);
    for (std::size_t i = 0; i < current.start_logits.size(); ++i) {
      current.start_logits[i] -= lr * grad.d_start[i];
    }
    auto& w = current.transition_logits.data();
    const auto& g = grad.d_transition.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];

    const double loss = dpo_loss(current, policy_ref, pairs, beta);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("dpo_finetune: non-finite loss at step " +
                               std::to_string(step));
    }
    if (loss < best_loss) {
      best_loss = loss;
      best = current;
    }
  }
  return best;
}

GeneratorPolicy dpo_finetune(const GeneratorPolicy& policy_ref,
                             const std::vector<PreferencePair>& pairs,
                             double beta, std::size_t steps, double lr) {
  return dpo_finetune_from(policy_ref, policy_ref, pairs, beta, steps, lr);
}

GenerationResult generate_with_hard_constraint(
    const GeneratorPolicy& policy, const Renderer& renderer,
    const ConfusionEvaluator& evaluator, const std::vector<Sample>& normals,
    std::size_t n, long prev_hard_count, std::size_t max_retries,
    std::uint64_t seed, double quantile, std::uint64_t id_start,
    const std::vector<int>& context_tokens) {
  if (n == 0) {
    throw std::invalid_argument("generate_with_hard_constraint: n must be >= 1");
  }
  if (max_retries == 0) {
    throw std::invalid_argument(
        "generate_with_hard_constraint: max_retries must be >= 1");
  }

  GenerationResult best;
  long best_hard = -1;
  for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
    const std::uint64_t batch_seed = derive_seed(seed, "batch", attempt);
    const std::vector<TokenSequence> seqs =
        context_tokens.empty()
            ? sample_sequence(policy, derive_seed(batch_seed, "tokens"), n)
            : sample_sequence_given(policy, context_tokens,
                                    derive_seed(batch_seed, "tokens"), n);

    std::vector<Sample> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      Sample s;
      s.label = Label::generated_anomaly;
      s.description = seqs[i];
      try {
        s.features =
            renderer.render_tokens(seqs[i], derive_seed(batch_seed, "render", i));
      } catch (const std::exception& e) {
        throw std::runtime_error("generation batch " + std::to_string(attempt) +
                                 ": renderer failed: " + e.what());
      }
      batch.push_back(std::move(s));
    }

    const HardnessPartition part =
        partition_hardness(evaluator, batch, normals, quantile);
    std::vector<Sample> tagged;
    tagged.reserve(n);
    // Preserve generation order; hardness comes from the partition.
    {
      std::size_t hi = 0, ei = 0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (part.distances[i] < part.threshold) {
          tagged.push_back(part.hard[hi++]);
        } else {
          tagged.push_back(part.easy[ei++]);
        }
      }
    }
    const long hard = static_cast<long>(part.hard.size());

    if (hard > best_hard) {
      best_hard = hard;
      best.samples = std::move(tagged);
      best.hard_count = static_cast<std::size_t>(hard);
    }
    best.attempts = attempt + 1;
    if (hard > prev_hard_count) {
      best.constraint_met = true;
      break;
    }
  }
  if (!best.constraint_met) {
    log_warn("generate_with_hard_constraint: constraint unmet after " +
             std::to_string(best.attempts) + " batches (best hard count " +
             std::to_string(best_hard) + ", previous " +
             std::to_string(prev_hard_count) + ")");
  }
  for (std::size_t i = 0; i < best.samples.size(); ++i) {
    best.samples[i].id = id_start + i;
  }
  return best;
}

}  // namespace kka
