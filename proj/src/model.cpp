#include "odl/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "odl/errors.hpp"
#include "odl/rng.hpp"

namespace odl {

namespace {

constexpr double kProbClamp = 1e-7;

// Rows of one side participating in a lookup: one in single mode, two in
// double mode (always from distinct tables).
struct Lookup {
  HashedIndex index;
  std::span<float> rows[2];
  std::size_t count = 0;
};

Lookup lookup_rows(std::vector<EmbeddingTable>& tables, const HashConfig& config,
                   std::string_view id) {
  Lookup lookup;
  lookup.index = hash_id(config, id);
  lookup.rows[0] = tables[0].row(lookup.index.primary_row);
  lookup.count = 1;
  if (lookup.index.secondary_row) {
    lookup.rows[1] = tables[1].row(*lookup.index.secondary_row);
    lookup.count = 2;
  }
  return lookup;
}

// Element-wise sum of the participating rows, accumulated in double.
void combined_embedding(const std::vector<EmbeddingTable>& tables, const HashConfig& config,
                        std::string_view id, std::vector<double>& out) {
  const HashedIndex index = hash_id(config, id);
  const std::span<const float> primary = tables[0].row(index.primary_row);
  out.assign(primary.begin(), primary.end());
  if (index.secondary_row) {
    const std::span<const float> secondary = tables[1].row(*index.secondary_row);
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] += static_cast<double>(secondary[j]);
    }
  }
}

double score_of(const ModelState& state, const std::vector<double>& user_embedding,
                const std::vector<double>& item_embedding, std::span<const float> context) {
  double score = static_cast<double>(state.bias);
  for (std::size_t j = 0; j < user_embedding.size(); ++j) {
    score += user_embedding[j] * item_embedding[j];
  }
  for (std::size_t j = 0; j < context.size(); ++j) {
    score += static_cast<double>(state.context_weights[j]) * static_cast<double>(context[j]);
  }
  return score;
}

void check_context(const ModelState& state, std::span<const float> context) {
  if (context.size() != state.config.context_dim) {
    throw DataError("predict: context length " + std::to_string(context.size()) +
                    " does not match context_dim " + std::to_string(state.config.context_dim));
  }
}

std::vector<EmbeddingTable> make_tables(const HashConfig& hash, std::uint32_t dim,
                                        SplitMix64& rng, float init_scale) {
  std::vector<EmbeddingTable> tables(hash.table_count());
  for (EmbeddingTable& table : tables) {
    table.rows = hash.buckets;
    table.dim = dim;
    table.values.resize(table.rows * dim);
    for (float& value : table.values) {
      value = static_cast<float>(rng.next_uniform(-static_cast<double>(init_scale),
                                                  static_cast<double>(init_scale)));
    }
  }
  return tables;
}

bool tables_bitwise_equal(const std::vector<EmbeddingTable>& a,
                          const std::vector<EmbeddingTable>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].rows != b[t].rows || a[t].dim != b[t].dim) return false;
    if (a[t].values.size() != b[t].values.size()) return false;
    if (!a[t].values.empty() &&
        std::memcmp(a[t].values.data(), b[t].values.data(),
                    a[t].values.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

bool hash_configs_equal(const HashConfig& a, const HashConfig& b) {
  return a.buckets == b.buckets && a.mode == b.mode && a.seed_a == b.seed_a &&
         a.seed_b == b.seed_b;
}

}  // namespace

void ModelConfig::validate() const {
  if (embedding_dim < 1) throw ConfigError("model config: embedding_dim must be >= 1");
  if (!(learning_rate > 0.0f)) throw ConfigError("model config: learning_rate must be > 0");
  if (!(l2_reg >= 0.0f)) throw ConfigError("model config: l2_reg must be >= 0");
  if (!(init_scale >= 0.0f)) throw ConfigError("model config: init_scale must be >= 0");
  user_hash.validate();
  item_hash.validate();
}

double log_loss(double probability, int label) {
  const double p = std::clamp(probability, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

ModelState init_model(const ModelConfig& config) {
  config.validate();
  ModelState state;
  state.config = config;
  state.bias = 0.0f;
  state.context_weights.assign(config.context_dim, 0.0f);
  SplitMix64 rng(config.seed);
  state.user_tables = make_tables(config.user_hash, config.embedding_dim, rng, config.init_scale);
  state.item_tables = make_tables(config.item_hash, config.embedding_dim, rng, config.init_scale);
  state.step_count = 0;
  return state;
}

Prediction predict(const ModelState& state, std::string_view user_id,
                   std::string_view item_id, std::span<const float> context) {
  check_context(state, context);
  std::vector<double> user_embedding;
  std::vector<double> item_embedding;
  combined_embedding(state.user_tables, state.config.user_hash, user_id, user_embedding);
  combined_embedding(state.item_tables, state.config.item_hash, item_id, item_embedding);
  Prediction prediction;
  prediction.score = score_of(state, user_embedding, item_embedding, context);
  prediction.probability = sigmoid(prediction.score);
  return prediction;
}

ExampleGradients example_gradients(const ModelState& state, std::string_view user_id,
                                   std::string_view item_id,
                                   std::span<const float> context, int label) {
  if (label != 0 && label != 1) {
    throw DataError("gradients: label must be 0 or 1, got " + std::to_string(label));
  }
  check_context(state, context);

  std::vector<double> user_embedding;
  std::vector<double> item_embedding;
  combined_embedding(state.user_tables, state.config.user_hash, user_id, user_embedding);
  combined_embedding(state.item_tables, state.config.item_hash, item_id, item_embedding);

  const double score = score_of(state, user_embedding, item_embedding, context);
  const double p = sigmoid(score);
  const double g = p - static_cast<double>(label);
  const double lambda = static_cast<double>(state.config.l2_reg);
  const std::uint32_t dim = state.config.embedding_dim;

  ExampleGradients grads;
  grads.probability = p;
  grads.loss = log_loss(p, label);
  grads.bias = g;
  grads.context.resize(context.size());
  for (std::size_t j = 0; j < context.size(); ++j) {
    grads.context[j] = g * static_cast<double>(context[j]) +
                       lambda * static_cast<double>(state.context_weights[j]);
  }

  grads.user_index = hash_id(state.config.user_hash, user_id);
  grads.item_index = hash_id(state.config.item_hash, item_id);

  // Loss term is shared by both rows of a side (gradient w.r.t. a summed row
  // equals the gradient w.r.t. the sum); the L2 term is per-row.
  const auto side_gradients = [&](const std::vector<EmbeddingTable>& tables,
                                  const HashedIndex& index,
                                  const std::vector<double>& other_embedding) {
    std::vector<std::vector<double>> rows;
    const auto row_gradient = [&](std::span<const float> row) {
      std::vector<double> grad(dim);
      for (std::uint32_t j = 0; j < dim; ++j) {
        grad[j] = g * other_embedding[j] + lambda * static_cast<double>(row[j]);
      }
      return grad;
    };
    rows.push_back(row_gradient(tables[0].row(index.primary_row)));
    if (index.secondary_row) {
      rows.push_back(row_gradient(tables[1].row(*index.secondary_row)));
    }
    return rows;
  };
  grads.user_rows = side_gradients(state.user_tables, grads.user_index, item_embedding);
  grads.item_rows = side_gradients(state.item_tables, grads.item_index, user_embedding);
  return grads;
}

double sgd_step(ModelState& state, const Event& event) {
  if (event.label != 0 && event.label != 1) {
    throw DataError("sgd_step: label must be 0 or 1, got " + std::to_string(event.label));
  }
  check_context(state, event.context);

  std::vector<double> user_embedding;
  std::vector<double> item_embedding;
  combined_embedding(state.user_tables, state.config.user_hash, event.user_id, user_embedding);
  combined_embedding(state.item_tables, state.config.item_hash, event.item_id, item_embedding);

  const double score = score_of(state, user_embedding, item_embedding, event.context);
  const double p = sigmoid(score);
  const double loss = log_loss(p, event.label);
  const double g = p - static_cast<double>(event.label);
  const double eta = static_cast<double>(state.config.learning_rate);
  const double lambda = static_cast<double>(state.config.l2_reg);

  bool finite = true;
  const auto apply = [&](float& parameter, double gradient) {
    parameter = static_cast<float>(static_cast<double>(parameter) - eta * gradient);
    finite = finite && std::isfinite(parameter);
  };

  apply(state.bias, g);
  for (std::size_t j = 0; j < event.context.size(); ++j) {
    apply(state.context_weights[j],
          g * static_cast<double>(event.context[j]) +
              lambda * static_cast<double>(state.context_weights[j]));
  }

  Lookup user = lookup_rows(state.user_tables, state.config.user_hash, event.user_id);
  Lookup item = lookup_rows(state.item_tables, state.config.item_hash, event.item_id);
  const std::uint32_t dim = state.config.embedding_dim;
  for (std::size_t t = 0; t < user.count; ++t) {
    std::span<float> row = user.rows[t];
    for (std::uint32_t j = 0; j < dim; ++j) {
      apply(row[j], g * item_embedding[j] + lambda * static_cast<double>(row[j]));
    }
  }
  for (std::size_t t = 0; t < item.count; ++t) {
    std::span<float> row = item.rows[t];
    for (std::uint32_t j = 0; j < dim; ++j) {
      apply(row[j], g * user_embedding[j] + lambda * static_cast<double>(row[j]));
    }
  }

  if (!finite) {
    throw NumericError("sgd_step: parameter became non-finite at step " +
                       std::to_string(state.step_count + 1));
  }
  ++state.step_count;
  return loss;
}

bool states_bitwise_equal(const ModelState& a, const ModelState& b) {
  const auto f32_bits_equal = [](float x, float y) {
    std::uint32_t xb, yb;
    std::memcpy(&xb, &x, sizeof xb);
    std::memcpy(&yb, &y, sizeof yb);
    return xb == yb;
  };
  if (a.config.embedding_dim != b.config.embedding_dim ||
      a.config.context_dim != b.config.context_dim ||
      !f32_bits_equal(a.config.learning_rate, b.config.learning_rate) ||
      !f32_bits_equal(a.config.l2_reg, b.config.l2_reg) ||
      !f32_bits_equal(a.config.init_scale, b.config.init_scale) ||
      a.config.seed != b.config.seed ||
      !hash_configs_equal(a.config.user_hash, b.config.user_hash) ||
      !hash_configs_equal(a.config.item_hash, b.config.item_hash)) {
    return false;
  }
  if (a.step_count != b.step_count) return false;
  if (!f32_bits_equal(a.bias, b.bias)) return false;
  if (a.context_weights.size() != b.context_weights.size()) return false;
  if (!a.context_weights.empty() &&
      std::memcmp(a.context_weights.data(), b.context_weights.data(),
                  a.context_weights.size() * sizeof(float)) != 0) {
    return false;
  }
  return tables_bitwise_equal(a.user_tables, b.user_tables) &&
         tables_bitwise_equal(a.item_tables, b.item_tables);
}

}  // namespace odl
