#include "inet/distill.hpp"

#include "inet/evalharness.hpp"

namespace inet {

DistillResult distill_on_points(const LambdaNet& lambda, TreeFamily family, Matrix x,
                                const DistillConfig& config, std::uint64_t seed) {
  if (x.rows() < 2) throw DataError("distill: need at least 2 query points");
  if (x.cols() != lambda.n()) throw DataError("distill: query width does not match the network input");
  const Vector probs = predict_lambda(lambda, x);
  DistillResult result;
  if (family == TreeFamily::standard_dt) {
    result.tree = cart_fit(x, round_half_up(probs), config.cart);
  } else {
    SDTTrainConfig sdt = config.sdt;
    sdt.univariate = family == TreeFamily::univariate_sdt;
    result.tree = sdt_fit(x, probs, sdt, seed);
  }
  result.fidelity_on_query = fidelity(evaluate(result.tree, x), probs);
  result.queries = std::move(x);
  return result;
}

DistillResult distill(const LambdaNet& lambda, TreeFamily family, QueryStrategy strategy,
                      const DistillConfig& config, std::uint64_t seed) {
  if (config.query_count < 2) throw ConfigError("distill.query_count: must be at least 2");
  Rng rng(seed);
  QueryPoints queries = sample_query_points(strategy, config.query_count, lambda.n(), config.p, rng);
  return distill_on_points(lambda, family, std::move(queries.points), config, rng());
}

nlohmann::json to_json(const CartConfig& c) {
  return {{"max_depth", c.max_depth},
          {"criterion", c.criterion},
          {"min_samples_split", c.min_samples_split},
          {"min_samples_leaf", c.min_samples_leaf}};
}

nlohmann::json to_json(const SDTTrainConfig& c) {
  return {{"depth", c.depth},
          {"learning_rate", c.learning_rate},
          {"criterion", c.criterion},
          {"lambda_reg", c.lambda_reg},
          {"beta", c.beta},
          {"weight_decay", c.weight_decay},
          {"max_path", c.max_path},
          {"univariate", c.univariate},
          {"beta2", c.beta2},
          {"epochs", c.epochs},
          {"patience", c.patience},
          {"batch_size", c.batch_size},
          {"valid_fraction", c.valid_fraction},
          {"round_targets", c.round_targets}};
}

nlohmann::json to_json(const DistillConfig& c) {
  return {{"query_count", c.query_count}, {"p", c.p}, {"cart", to_json(c.cart)}, {"sdt", to_json(c.sdt)}};
}

CartConfig cart_config_from_json(const nlohmann::json& doc) {
  CartConfig c;
  c.max_depth = doc.value("max_depth", c.max_depth);
  c.criterion = doc.value("criterion", c.criterion);
  c.min_samples_split = doc.value("min_samples_split", c.min_samples_split);
  c.min_samples_leaf = doc.value("min_samples_leaf", c.min_samples_leaf);
  c.validate();
  return c;
}

SDTTrainConfig sdt_config_from_json(const nlohmann::json& doc) {
  SDTTrainConfig c;
  c.depth = doc.value("depth", c.depth);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.criterion = doc.value("criterion", c.criterion);
  c.lambda_reg = doc.value("lambda_reg", c.lambda_reg);
  c.beta = doc.value("beta", c.beta);
  c.weight_decay = doc.value("weight_decay", c.weight_decay);
  c.max_path = doc.value("max_path", c.max_path);
  c.univariate = doc.value("univariate", c.univariate);
  c.beta2 = doc.value("beta2", c.beta2);
  c.epochs = doc.value("epochs", c.epochs);
  c.patience = doc.value("patience", c.patience);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.valid_fraction = doc.value("valid_fraction", c.valid_fraction);
  c.round_targets = doc.value("round_targets", c.round_targets);
  c.validate();
  return c;
}

DistillConfig distill_config_from_json(const nlohmann::json& doc) {
  DistillConfig c;
  c.query_count = doc.value("query_count", c.query_count);
  c.p = doc.value("p", c.p);
  if (!(c.p > kParamFloor)) throw ConfigError("distill.p: must exceed 0.05");
  if (doc.contains("cart")) c.cart = cart_config_from_json(doc.at("cart"));
  if (doc.contains("sdt")) c.sdt = sdt_config_from_json(doc.at("sdt"));
  return c;
}

}  // namespace inet
