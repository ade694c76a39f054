#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "odl/events.hpp"
#include "odl/hashing.hpp"

namespace odl {

// Factorized logistic scorer: bias + <context_weights, context> + <e_u, e_i>,
// where e_u / e_i are hashed embedding lookups (sum of two table rows in
// double-hash mode). Learned with single-example constant-rate SGD.

struct ModelConfig {
  std::uint32_t embedding_dim = 16;
  float learning_rate = 0.05f;
  float l2_reg = 0.0f;
  std::uint32_t context_dim = 0;
  HashConfig user_hash;
  HashConfig item_hash;
  float init_scale = 0.05f;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct EmbeddingTable {
  std::uint64_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;  // row-major, rows * dim entries

  std::span<float> row(std::uint64_t r) {
    return {values.data() + r * dim, dim};
  }
  std::span<const float> row(std::uint64_t r) const {
    return {values.data() + r * dim, dim};
  }
};

struct Prediction {
  double score = 0.0;        // pre-sigmoid logit
  double probability = 0.5;  // sigmoid(score), in (0,1)
};

// All learnable parameters plus the counters that must survive a session
// boundary. This is exactly what the checkpoint module serializes.
struct ModelState {
  ModelConfig config;
  float bias = 0.0f;
  std::vector<float> context_weights;       // length context_dim
  std::vector<EmbeddingTable> user_tables;  // 1 table, or 2 in double mode
  std::vector<EmbeddingTable> item_tables;
  std::uint64_t step_count = 0;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Log loss with the probability clamped to [1e-7, 1-1e-7]. The clamp lives
// only here; gradients use the raw probability.
double log_loss(double probability, int label);

// Zeroed bias/context weights, embeddings i.i.d. uniform on
// [-init_scale, +init_scale] from a generator seeded by config.seed.
// Identical config produces a bit-identical state.
ModelState init_model(const ModelConfig& config);

// Pure scoring; the state is never modified.
Prediction predict(const ModelState& state, std::string_view user_id,
                   std::string_view item_id, std::span<const float> context);

// Gradient of the per-example L2-regularized log loss, computed in double
// precision. sgd_step applies exactly these values; tests check them against
// central finite differences. In double mode the two rows of a side receive
// the same loss term but their own regularization term.
struct ExampleGradients {
  double probability = 0.5;
  double loss = 0.0;
  double bias = 0.0;
  std::vector<double> context;                 // length context_dim
  HashedIndex user_index;
  HashedIndex item_index;
  std::vector<std::vector<double>> user_rows;  // one vector per user table
  std::vector<std::vector<double>> item_rows;
};

ExampleGradients example_gradients(const ModelState& state, std::string_view user_id,
                                   std::string_view item_id,
                                   std::span<const float> context, int label);

// One SGD step on a single event; parameters are updated in 32-bit floats.
// Returns the example's log loss (from the pre-update prediction). Throws
// DataError on a non-binary label or context-length mismatch and NumericError
// if any updated parameter becomes non-finite.
double sgd_step(ModelState& state, const Event& event);

// True iff every parameter (bit pattern), counter and config field matches.
bool states_bitwise_equal(const ModelState& a, const ModelState& b);

}  // namespace odl
