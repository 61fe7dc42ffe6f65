#include "inet/lambdanet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inet/csv.hpp"
#include "inet/parallel.hpp"

namespace inet {

namespace {

// index of the shared-initialization draw inside the lambda_train stream
constexpr std::uint64_t kSharedInitIndex = ~std::uint64_t{0};

Matrix gather_rows(const Matrix& data, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.row(rows[i]);
  return out;
}

Vector gather(const Vector& data, std::span<const Eigen::Index> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = data[rows[i]];
  return out;
}

double accuracy(const Vector& probs, const Vector& labels) {
  if (probs.size() == 0) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    hits += ((probs[i] >= 0.5 ? 1.0 : 0.0) == labels[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

nlohmann::json indices_json(const std::vector<Eigen::Index>& v) { return v; }

}  // namespace

nlohmann::json to_json(const LambdaConfig& c) {
  return {{"hidden", c.hidden},         {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},         {"batch_size", c.batch_size},
          {"patience", c.patience},     {"valid_fraction", c.valid_fraction},
          {"test_fraction", c.test_fraction}, {"shared_init", c.shared_init}};
}

LambdaConfig lambda_config_from_json(const nlohmann::json& doc) {
  LambdaConfig c;
  c.hidden = doc.value("hidden", c.hidden);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.epochs = doc.value("epochs", c.epochs);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.patience = doc.value("patience", c.patience);
  c.valid_fraction = doc.value("valid_fraction", c.valid_fraction);
  c.test_fraction = doc.value("test_fraction", c.test_fraction);
  c.shared_init = doc.value("shared_init", c.shared_init);
  return c;
}

RowSplit split_rows(Eigen::Index rows, double valid_fraction, double test_fraction,
                    std::uint64_t seed) {
  if (valid_fraction < 0.0 || test_fraction < 0.0 || valid_fraction + test_fraction >= 1.0) {
    throw ConfigError("split fractions must be non-negative and sum below 1");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows)));
  const auto n_valid =
      static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(rows)));
  if (n_test + n_valid >= order.size()) throw ConfigError("split leaves no training rows");
  RowSplit split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                     order.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid), order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.valid.begin(), split.valid.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::size_t lambda_theta_size(Eigen::Index n, Eigen::Index hidden) {
  return static_cast<std::size_t>(hidden * n + hidden + hidden + 1);
}

DenseNet lambda_architecture(Eigen::Index n, Eigen::Index hidden, std::uint64_t seed) {
  const LayerSpec specs[] = {{hidden, Activation::relu, 0.0}, {1, Activation::sigmoid, 0.0}};
  return DenseNet::initialized(n, specs, seed);
}

LambdaNet train_lambda_net(const Matrix& features, const Vector& labels, const RowSplit& split,
                           const LambdaConfig& config, std::uint64_t seed,
                           std::string dataset_ref, std::optional<std::uint64_t> init_seed) {
  if (features.rows() != labels.size()) throw DataError("train_lambda_net: label count mismatch");
  if (split.train.empty()) throw DataError("train_lambda_net: no training rows");
  if (config.batch_size < 1 || config.epochs < 1 || !(config.learning_rate > 0.0)) {
    throw ConfigError("train_lambda_net: invalid training configuration");
  }
  const Eigen::Index n = features.cols();
  Rng rng(seed);
  LambdaNet out;
  out.seed = seed;
  out.dataset_ref = std::move(dataset_ref);
  out.split = split;
  const std::uint64_t drawn = rng();
  out.net = lambda_architecture(n, config.hidden, init_seed.value_or(drawn));

  const Matrix train_x = gather_rows(features, split.train);
  const Vector train_y = gather(labels, split.train);
  const bool has_valid = !split.valid.empty();
  const Matrix valid_x = has_valid ? gather_rows(features, split.valid) : train_x;
  const Vector valid_y = has_valid ? gather(labels, split.valid) : train_y;

  AdamState adam(AdamConfig{config.learning_rate});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double best_loss = std::numeric_limits<double>::infinity();
  Vector best_theta = out.net.flatten();
  int since_best = 0;
  ForwardCache cache;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const Eigen::Index> rows(order.data() + start, stop - start);
      const Matrix bx = gather_rows(train_x, rows);
      const Vector by = gather(train_y, rows);
      const Matrix probs = out.net.forward(bx, cache, nullptr);
      Vector grad;
      const double loss = bce_loss(probs.col(0), by, &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("train_lambda_net: non-finite loss at epoch " + std::to_string(epoch));
      }
      adam_step(adam, out.net, out.net.backward(cache, grad));
    }
    const double valid_loss = bce_loss(out.net.forward(valid_x).col(0), valid_y);
    if (valid_loss < best_loss) {
      best_loss = valid_loss;
      best_theta = out.net.flatten();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  out.net.assign_flat(best_theta);
  out.theta = std::move(best_theta);
  out.train_accuracy = accuracy(out.net.forward(train_x).col(0), train_y);
  if (split.test.empty()) {
    out.test_accuracy = out.train_accuracy;
  } else {
    const Matrix test_x = gather_rows(features, split.test);
    out.test_accuracy = accuracy(out.net.forward(test_x).col(0), gather(labels, split.test));
  }
  return out;
}

LambdaNet train_lambda_net(const SyntheticDataset& ds, const LambdaConfig& config,
                           std::uint64_t seed, std::string dataset_ref,
                           std::optional<std::uint64_t> init_seed) {
  const RowSplit split =
      split_rows(ds.m(), config.valid_fraction, config.test_fraction, mix64(seed ^ 0x5eed));
  return train_lambda_net(ds.features, ds.label_vector(), split, config, seed,
                          std::move(dataset_ref), init_seed);
}

Vector flatten_params(const DenseNet& net) { return net.flatten(); }

DenseNet unflatten_params(const Vector& theta, Eigen::Index n, Eigen::Index hidden) {
  if (theta.size() != static_cast<Eigen::Index>(lambda_theta_size(n, hidden))) {
    throw DataError("unflatten_params: theta has length " + std::to_string(theta.size()) +
                    ", expected " + std::to_string(lambda_theta_size(n, hidden)));
  }
  DenseNet net = lambda_architecture(n, hidden, 0);
  net.assign_flat(theta);
  return net;
}

double predict_lambda(const LambdaNet& lambda, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != lambda.n()) {
    throw DataError("predict_lambda: input has " + std::to_string(x.size()) +
                    " features, network expects " + std::to_string(lambda.n()));
  }
  Matrix row(1, lambda.n());
  for (Eigen::Index i = 0; i < lambda.n(); ++i) row(0, i) = x[static_cast<std::size_t>(i)];
  return lambda.net.forward(row)(0, 0);
}

Vector predict_lambda(const LambdaNet& lambda, const Matrix& x) {
  if (x.cols() != lambda.n()) {
    throw DataError("predict_lambda: input has " + std::to_string(x.cols()) +
                    " features, network expects " + std::to_string(lambda.n()));
  }
  return lambda.net.forward(x).col(0);
}

Vector round_half_up(const Vector& probs) {
  return probs.unaryExpr([](double p) { return p >= 0.5 ? 1.0 : 0.0; });
}

nlohmann::json lambda_to_json(const LambdaNet& lambda) {
  return {{"format_version", kModelFormatVersion},
          {"model", densenet_to_json(lambda.net)},
          {"dataset_ref", lambda.dataset_ref},
          {"seed", lambda.seed},
          {"train_accuracy", lambda.train_accuracy},
          {"test_accuracy", lambda.test_accuracy},
          {"split",
           {{"train", indices_json(lambda.split.train)},
            {"valid", indices_json(lambda.split.valid)},
            {"test", indices_json(lambda.split.test)}}}};
}

LambdaNet lambda_from_json(const nlohmann::json& doc) {
  LambdaNet lambda;
  lambda.net = densenet_from_json(doc.at("model"));
  const auto& layers = lambda.net.layers();
  if (layers.size() != 2 || layers[1].weight.cols() != 1) {
    throw ConfigError("lambda model must have one hidden layer and a single output");
  }
  lambda.theta = lambda.net.flatten();
  lambda.dataset_ref = doc.value("dataset_ref", "");
  lambda.seed = doc.value("seed", std::uint64_t{0});
  lambda.train_accuracy = doc.value("train_accuracy", 0.0);
  lambda.test_accuracy = doc.value("test_accuracy", 0.0);
  if (doc.contains("split")) {
    const auto& s = doc.at("split");
    lambda.split.train = s.at("train").get<std::vector<Eigen::Index>>();
    lambda.split.valid = s.at("valid").get<std::vector<Eigen::Index>>();
    lambda.split.test = s.at("test").get<std::vector<Eigen::Index>>();
  }
  return lambda;
}

void save_lambda(const LambdaNet& lambda, const std::filesystem::path& path) {
  write_text_file(path, lambda_to_json(lambda).dump() + "\n");
}

LambdaNet load_lambda(const std::filesystem::path& path) {
  return lambda_from_json(nlohmann::json::parse(read_text_file(path)));
}

std::string_view to_string(CorpusSplit split) {
  switch (split) {
    case CorpusSplit::train:
      return "train";
    case CorpusSplit::valid:
      return "valid";
    case CorpusSplit::test:
      return "test";
  }
  return "unknown";
}

CorpusSplit corpus_split_from_string(std::string_view name) {
  if (name == "train") return CorpusSplit::train;
  if (name == "valid") return CorpusSplit::valid;
  if (name == "test") return CorpusSplit::test;
  throw ConfigError("unknown corpus split '" + std::string(name) + "'");
}

std::vector<const CorpusEntry*> LambdaCorpus::split(CorpusSplit which) const {
  std::vector<const CorpusEntry*> out;
  for (const CorpusEntry& e : entries) {
    if (e.split == which) out.push_back(&e);
  }
  return out;
}

LambdaCorpus build_corpus(const CorpusSpec& spec) {
  const std::size_t total = spec.count_train + spec.count_valid + spec.count_test;
  if (spec.count_train < 1 || spec.count_valid < 1) {
    throw ConfigError("build_corpus: train and valid counts must be at least 1");
  }
  LambdaCorpus corpus;
  corpus.spec = spec;
  corpus.entries.resize(total);
  parallel_for(total, thread_count_from_env(), [&](std::size_t i) {
    CorpusEntry& entry = corpus.entries[i];
    entry.split = i < spec.count_train                      ? CorpusSplit::train
                  : i < spec.count_train + spec.count_valid ? CorpusSplit::valid
                                                            : CorpusSplit::test;
    char id[32];
    std::snprintf(id, sizeof id, "lambda_%06zu", i);
    entry.id = id;
    const std::uint64_t entry_seed = derive_seed(spec.master_seed, streams::dataset, i);
    int rejections = 0;
    for (std::uint64_t attempt = 0;; ++attempt) {
      SyntheticDataset ds = generate_dataset(spec.n, spec.m, spec.p, derive_seed(entry_seed, 0, attempt));
      if (!is_linearly_separable(ds, spec.separability)) {
        entry.dataset = std::move(ds);
        break;
      }
      if (++rejections >= spec.max_consecutive_rejections) {
        throw DataError("build_corpus: " + std::to_string(rejections) +
                        " consecutive linearly separable datasets for entry " + entry.id);
      }
    }
    std::optional<std::uint64_t> init;
    if (spec.lambda.shared_init) init = derive_seed(spec.master_seed, streams::lambda_train, kSharedInitIndex);
    entry.lambda = train_lambda_net(entry.dataset, spec.lambda,
                                    derive_seed(spec.master_seed, streams::lambda_train, i), entry.id, init);
  });
  return corpus;
}

void save_corpus(const LambdaCorpus& corpus, const std::filesystem::path& dir) {
  nlohmann::json entries = nlohmann::json::array();
  for (const CorpusEntry& e : corpus.entries) {
    const std::string model = "models/" + e.id + ".json";
    const std::string csv = "datasets/" + e.id + ".csv";
    const std::string prov = "datasets/" + e.id + ".json";
    save_lambda(e.lambda, dir / model);
    save_dataset(e.dataset, dir / csv, dir / prov);
    entries.push_back({{"id", e.id},
                       {"split", to_string(e.split)},
                       {"model", model},
                       {"dataset", csv},
                       {"provenance", prov}});
  }
  const CorpusSpec& s = corpus.spec;
  const nlohmann::json manifest = {
      {"format_version", 1},
      {"master_seed", s.master_seed},
      {"n", s.n},
      {"m", s.m},
      {"p", s.p},
      {"count_train", s.count_train},
      {"count_valid", s.count_valid},
      {"count_test", s.count_test},
      {"lambda", to_json(s.lambda)},
      {"entries", entries},
  };
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

LambdaCorpus load_corpus(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  LambdaCorpus corpus;
  CorpusSpec& s = corpus.spec;
  s.master_seed = manifest.at("master_seed").get<std::uint64_t>();
  s.n = manifest.at("n").get<Eigen::Index>();
  s.m = manifest.at("m").get<Eigen::Index>();
  s.p = manifest.at("p").get<double>();
  s.count_train = manifest.value("count_train", std::size_t{0});
  s.count_valid = manifest.value("count_valid", std::size_t{0});
  s.count_test = manifest.value("count_test", std::size_t{0});
  s.lambda = lambda_config_from_json(manifest.value("lambda", nlohmann::json::object()));
  for (const auto& e : manifest.at("entries")) {
    CorpusEntry entry;
    entry.id = e.at("id").get<std::string>();
    entry.split = corpus_split_from_string(e.at("split").get<std::string>());
    entry.lambda = load_lambda(dir / e.at("model").get<std::string>());
    entry.dataset = load_dataset(dir / e.at("dataset").get<std::string>(),
                                 dir / e.at("provenance").get<std::string>());
    if (entry.lambda.n() != s.n || entry.dataset.n() != s.n) {
      throw DataError("corpus entry " + entry.id + " does not match the corpus feature count");
    }
    corpus.entries.push_back(std::move(entry));
  }
  return corpus;
}

}  // namespace inet
