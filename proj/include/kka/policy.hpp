#pragma once

#include <cstdint>
#include <vector>

#include "kka/evaluator.hpp"
#include "kka/linalg.hpp"
#include "kka/renderer.hpp"
#include "kka/types.hpp"

namespace kka {

// Autoregressive token generator with first-order Markov conditioning and
// exact sequence log-probabilities. start_logits drive the first token,
// transition_logits[prev] the rest. Temperature applies to sampling only;
// log_prob is the model distribution at temperature 1.
struct GeneratorPolicy {
  std::size_t vocab_size = 0;  // V
  std::size_t seq_len = 0;     // L
  Vec start_logits;            // V
  Mat transition_logits;       // V x V, row = previous token
  double temperature = 1.0;

  bool operator==(const GeneratorPolicy&) const = default;
};

GeneratorPolicy make_uniform_policy(std::size_t vocab_size,
                                    std::size_t seq_len,
                                    double temperature = 1.0);

// Ancestral sampling of n sequences of length seq_len.
std::vector<TokenSequence> sample_sequence(const GeneratorPolicy& policy,
                                           std::uint64_t rng_seed,
                                           std::size_t n);

// Prompt-conditioned sampling: the Markov context starts at context_tokens
// (cycled across the batch) instead of the start distribution, matching the
// conditional form the preference updates train.
std::vector<TokenSequence> sample_sequence_given(
    const GeneratorPolicy& policy, const std::vector<int>& context_tokens,
    std::uint64_t rng_seed, std::size_t n);

// Exact log-probability of a full sequence (start + transitions).
double log_prob(const GeneratorPolicy& policy, const TokenSequence& seq);

// Log-probability of seq conditioned on a prompt whose final token seeds the
// Markov context; start_logits are not involved.
double log_prob_given(const GeneratorPolicy& policy, int context_token,
                      const TokenSequence& seq);

struct PreferencePair {
  TokenSequence prompt;
  TokenSequence preferred;  // hard
  TokenSequence rejected;   // easy
};

// -E[ log sigmoid( beta*(logratio(preferred) - logratio(rejected)) ) ]
// with logratio(y) = log p_new(y|prompt) - log p_ref(y|prompt).
// Equals log 2 when the policies coincide.
double dpo_loss(const GeneratorPolicy& policy_new,
                const GeneratorPolicy& policy_ref,
                const std::vector<PreferencePair>& pairs, double beta);

struct PolicyGrad {
  Vec d_start;
  Mat d_transition;
};

PolicyGrad dpo_loss_gradient(const GeneratorPolicy& policy_new,
                             const GeneratorPolicy& policy_ref,
                             const std::vector<PreferencePair>& pairs,
                             double beta);

// Gradient descent on dpo_loss starting from `init`; returns the iterate
// with the lowest training loss. The reference policy is never modified.
GeneratorPolicy dpo_finetune_from(const GeneratorPolicy& policy_ref,
                                  const GeneratorPolicy& init,
                                  const std::vector<PreferencePair>& pairs,
                                  double beta = 0.1, std::size_t steps = 500,
                                  double lr = 1e-2);

GeneratorPolicy dpo_finetune(const GeneratorPolicy& policy_ref,
                             const std::vector<PreferencePair>& pairs,
                             double beta = 0.1, std::size_t steps = 500,
                             double lr = 1e-2);

struct GenerationResult {
  std::vector<Sample> samples;
  bool constraint_met = false;
  std::size_t attempts = 0;  // batches sampled
  std::size_t hard_count = 0;
};

// Samples batches of n sequences (conditioned on context_tokens when
// non-empty), renders them and counts hard anomalies until a batch beats
// prev_hard_count, giving up after max_retries batches and returning the
// best batch seen. Returned samples are labeled generated anomalies with
// ids id_start.. and hardness from the partition.
GenerationResult generate_with_hard_constraint(
    const GeneratorPolicy& policy, const Renderer& renderer,
    const ConfusionEvaluator& evaluator, const std::vector<Sample>& normals,
    std::size_t n, long prev_hard_count, std::size_t max_retries,
    std::uint64_t seed, double quantile, std::uint64_t id_start,
    const std::vector<int>& context_tokens = {});

}  // namespace kka
