#include "cgcre/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cgcre/errors.hpp"
#include "cgcre/log.hpp"

namespace cgcre {

using nlohmann::json;

void validate_config(const TrainConfig& config) {
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(config.optimizer.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) throw ConfigError("alpha must be in [0,1]");
  if (!(config.model.theta >= 0.0 && config.model.theta <= 1.0)) {
    throw ConfigError("theta must be in [0,1]");
  }
  if (!(config.model.dropout_ratio >= 0.0 && config.model.dropout_ratio < 1.0)) {
    throw ConfigError("dropout ratio must be in [0,1)");
  }
  if (!(config.dev_fraction >= 0.0 && config.dev_fraction < 1.0)) {
    throw ConfigError("dev_fraction must be in [0,1)");
  }
  if (config.model.embed_dim < 1 || config.model.lstm_hidden < 1 || config.model.gcn_hidden < 1 ||
      config.model.cls_hidden < 1 || config.model.gcn_layers < 1) {
    throw ConfigError("model dimensions must be positive");
  }
}

void AdamOptimizer::ensure_state(const ParameterStore& params) {
  if (!m_.empty()) return;
  for (const auto& [name, t] : params.items()) {
    m_.emplace_back(t.data().size(), 0.0);
    v_.emplace_back(t.data().size(), 0.0);
  }
}

void AdamOptimizer::step(ParameterStore& params) {
  ensure_state(params);
  if (m_.size() != params.count()) {
    throw ConfigError("optimizer state does not match parameter count");
  }
  // Global norm clip across all parameters first.
  double sq = 0.0;
  for (const auto& [name, t] : params.items()) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (std::isnan(g)) throw NumericError("NaN gradient in parameter '" + name + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double clip_scale =
      (settings_.clip_norm > 0.0 && norm > settings_.clip_norm) ? settings_.clip_norm / norm : 1.0;

  ++step_count_;
  const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(step_count_));
  std::size_t slot = 0;
  for (const auto& [name, t] : params.items()) {
    std::vector<double>& m = m_[slot];
    std::vector<double>& v = v_[slot];
    ++slot;
    if (!t.has_grad()) continue;
    Tensor tensor = t;
    std::vector<double>& data = tensor.data();
    const std::vector<double>& grad = tensor.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i] * clip_scale;
      m[i] = settings_.beta1 * m[i] + (1.0 - settings_.beta1) * g;
      v[i] = settings_.beta2 * v[i] + (1.0 - settings_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      data[i] -= settings_.lr * m_hat / (std::sqrt(v_hat) + settings_.epsilon);
    }
  }
}

Tensor joint_loss(const std::vector<const Tweet*>& batch, const CgCreModel& model, long long rt_min,
                  long long rt_max, double alpha, bool training, Rng& dropout_rng,
                  Tensor* concern_component, Tensor* relation_component) {
  if (batch.empty()) throw ConfigError("joint_loss on an empty batch");
  Tensor concern_total = Tensor::scalar(0.0);
  Tensor relation_total = Tensor::scalar(0.0);
  for (const Tweet* tweet : batch) {
    const double rt_norm = normalize_retweets(tweet->retweet_count, rt_min, rt_max);
    TweetLosses losses = model.training_losses(*tweet, rt_norm, training, dropout_rng);
    if (!std::isfinite(losses.concern_nll.value()) || !std::isfinite(losses.relation_ce.value())) {
      throw NumericError("non-finite loss on tweet '" + tweet->id + "'");
    }
    concern_total = add(concern_total, losses.concern_nll);
    relation_total = add(relation_total, losses.relation_ce);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  Tensor concern_mean = scale(concern_total, inv);
  Tensor relation_mean = scale(relation_total, inv);
  if (concern_component != nullptr) *concern_component = concern_mean;
  if (relation_component != nullptr) *relation_component = relation_mean;
  return add(concern_mean, scale(relation_mean, alpha));
}

Trainer::Trainer(CgCreModel& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      optimizer_(config.optimizer),
      shuffle_rng_(Rng::derive(config.seed, rng_stream::kShuffle)),
      dropout_rng_(Rng::derive(config.seed, rng_stream::kDropout)) {
  validate_config(config);
}

void Trainer::restore(int next_epoch, std::uint64_t shuffle_state, std::uint64_t dropout_state,
                      long long adam_step) {
  next_epoch_ = next_epoch;
  shuffle_rng_.set_state(shuffle_state);
  dropout_rng_.set_state(dropout_state);
  optimizer_.set_step_count(adam_step);
}

TrainResult Trainer::train(const Corpus& corpus, const EpochCallback& on_epoch) {
  TrainResult result;
  if (corpus.tweets.empty() || config_.epochs <= next_epoch_) return result;

  std::vector<int> train_indices;
  std::vector<int> dev_indices;
  {
    std::vector<int> all(corpus.tweets.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    if (config_.dev_fraction > 0.0) {
      Rng split_rng(Rng::derive(config_.seed, rng_stream::kShuffle) ^ 0x5eedULL);
      shuffle(all, split_rng);
      const int dev_count = static_cast<int>(config_.dev_fraction * all.size());
      dev_indices.assign(all.end() - dev_count, all.end());
      all.resize(all.size() - dev_count);
    }
    train_indices = std::move(all);
  }
  if (train_indices.empty()) return result;

  double initial_loss = -1.0;  // first batch loss, before any update
  int divergent_epochs = 0;

  for (int epoch = next_epoch_; epoch < config_.epochs; ++epoch) {
    // Each epoch permutes the pristine index list, so the ordering depends
    // only on the RNG state and checkpoint resumption reproduces it.
    std::vector<int> order = train_indices;
    shuffle(order, shuffle_rng_);
    double epoch_total = 0, epoch_concern = 0, epoch_relation = 0;
    int batch_count = 0;
    for (std::size_t offset = 0; offset < order.size();
         offset += static_cast<std::size_t>(config_.batch_size)) {
      std::vector<const Tweet*> batch;
      for (std::size_t i = offset; i < std::min(order.size(), offset + config_.batch_size); ++i) {
        batch.push_back(&corpus.tweets[order[i]]);
      }
      model_.params().zero_grads();
      GradTape tape;
      Tensor concern, relation;
      Tensor loss = joint_loss(batch, model_, corpus.rt_min, corpus.rt_max, config_.alpha,
                               /*training=*/true, dropout_rng_, &concern, &relation);
      tape.backward(loss);
      optimizer_.step(model_.params());

      BatchLossRow row;
      row.epoch = epoch;
      row.batch = batch_count++;
      row.total = loss.value();
      row.concern = concern.value();
      row.relation = relation.value();
      result.batch_log.push_back(row);
      if (initial_loss < 0.0) initial_loss = row.total;
      epoch_total += row.total;
      epoch_concern += row.concern;
      epoch_relation += row.relation;
    }
    EpochLoss el;
    el.epoch = epoch;
    el.total = epoch_total / batch_count;
    el.concern = epoch_concern / batch_count;
    el.relation = epoch_relation / batch_count;
    result.epoch_log.push_back(el);
    next_epoch_ = epoch + 1;
    log_debug("epoch " + std::to_string(epoch) + " loss " + std::to_string(el.total));

    if (!dev_indices.empty()) {
      std::vector<const Tweet*> dev_batch;
      for (int i : dev_indices) dev_batch.push_back(&corpus.tweets[i]);
      Rng dev_rng(0);
      Tensor dev_loss = joint_loss(dev_batch, model_, corpus.rt_min, corpus.rt_max, config_.alpha,
                                   /*training=*/false, dev_rng, nullptr, nullptr);
      log_info("epoch " + std::to_string(epoch) + " dev loss " + std::to_string(dev_loss.value()));
    }

    if (el.total > 10.0 * initial_loss) {
      if (++divergent_epochs >= 3) {
        throw NumericError("training diverged: epoch loss " + std::to_string(el.total) +
                           " exceeds 10x initial " + std::to_string(initial_loss) +
                           " for 3 consecutive epochs");
      }
    } else {
      divergent_epochs = 0;
    }
    if (on_epoch && !on_epoch(el)) break;
  }
  return result;
}

// ---- checkpoint ----

namespace {

constexpr char kMagic[8] = {'C', 'G', 'C', 'R', 'E', 'C', 'K', '1'};
constexpr std::uint32_t kFormatVersion = 1;

json config_to_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["dev_fraction"] = c.dev_fraction;
  j["embeddings_path"] = c.embeddings_path;
  j["embed_dim"] = c.model.embed_dim;
  j["lstm_hidden"] = c.model.lstm_hidden;
  j["gcn_hidden"] = c.model.gcn_hidden;
  j["gcn_layers"] = c.model.gcn_layers;
  j["cls_hidden"] = c.model.cls_hidden;
  j["dropout"] = c.model.dropout_ratio;
  j["theta"] = c.model.theta;
  j["candidate_activation"] =
      c.model.candidate_activation == CandidateActivation::sigmoid ? "sigmoid" : "tanh";
  j["use_cg"] = c.model.use_cg;
  j["use_shared_state"] = c.model.use_shared_state;
  j["gcn_self_loops"] = c.model.gcn_self_loops;
  j["lr"] = c.optimizer.lr;
  j["beta1"] = c.optimizer.beta1;
  j["beta2"] = c.optimizer.beta2;
  j["adam_epsilon"] = c.optimizer.epsilon;
  j["clip_norm"] = c.optimizer.clip_norm;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.dev_fraction = j.at("dev_fraction").get<double>();
  c.embeddings_path = j.at("embeddings_path").get<std::string>();
  c.model.embed_dim = j.at("embed_dim").get<int>();
  c.model.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.model.gcn_hidden = j.at("gcn_hidden").get<int>();
  c.model.gcn_layers = j.at("gcn_layers").get<int>();
  c.model.cls_hidden = j.at("cls_hidden").get<int>();
  c.model.dropout_ratio = j.at("dropout").get<double>();
  c.model.theta = j.at("theta").get<double>();
  c.model.candidate_activation =
      candidate_activation_from_string(j.at("candidate_activation").get<std::string>());
  c.model.use_cg = j.at("use_cg").get<bool>();
  c.model.use_shared_state = j.at("use_shared_state").get<bool>();
  c.model.gcn_self_loops = j.at("gcn_self_loops").get<bool>();
  c.optimizer.lr = j.at("lr").get<double>();
  c.optimizer.beta1 = j.at("beta1").get<double>();
  c.optimizer.beta2 = j.at("beta2").get<double>();
  c.optimizer.epsilon = j.at("adam_epsilon").get<double>();
  c.optimizer.clip_norm = j.at("clip_norm").get<double>();
  return c;
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(const std::string& buf, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[offset + i])) << (8 * i);
  }
  return v;
}

void append_doubles(std::string& out, const std::vector<double>& values) {
  for (double d : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    append_u64(out, bits);
  }
}

std::vector<double> read_doubles(const std::string& buf, std::size_t offset, std::size_t count) {
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = read_u64(buf, offset + 8 * i);
    std::memcpy(&values[i], &bits, sizeof(double));
  }
  return values;
}

}  // namespace

void save_checkpoint(const std::string& path, const CgCreModel& model, const TrainConfig& config,
                     long long rt_min, long long rt_max, const AdamOptimizer& optimizer,
                     const TrainerState& state) {
  json header;
  header["config"] = config_to_json(config);
  header["rt_min"] = rt_min;
  header["rt_max"] = rt_max;
  header["epoch"] = state.next_epoch;
  header["shuffle_rng"] = state.shuffle_state;
  header["dropout_rng"] = state.dropout_state;
  header["adam_step"] = state.adam_step;
  header["word_vocab"] =
      model.word_embedding().trainable() ? model.word_embedding().vocab().names()
                                         : std::vector<std::string>{};
  header["pos_vocab"] = model.cg_vocabs().pos.names();
  header["dep_vocab"] = model.cg_vocabs().dep.names();

  // Tensor directory: parameters first, then Adam moments in the same order.
  json directory = json::array();
  std::string payload;
  auto add_entry = [&](const std::string& name, const std::vector<int>& shape,
                       const std::vector<double>& values) {
    json e;
    e["name"] = name;
    e["shape"] = shape;
    e["offset"] = payload.size();
    e["bytes"] = values.size() * 8;
    directory.push_back(e);
    append_doubles(payload, values);
  };
  for (const auto& [name, t] : model.params().items()) add_entry(name, t.shape(), t.data());
  const auto& m = optimizer.first_moments();
  const auto& v = optimizer.second_moments();
  for (std::size_t i = 0; i < model.params().count(); ++i) {
    const auto& [name, t] = model.params().items()[i];
    const std::vector<double> zeros(t.data().size(), 0.0);
    add_entry("adam.m." + name, t.shape(), i < m.size() ? m[i] : zeros);
    add_entry("adam.v." + name, t.shape(), i < v.size() ? v[i] : zeros);
  }
  header["tensors"] = directory;

  const std::string header_str = header.dump();
  std::string blob;
  blob.append(kMagic, sizeof(kMagic));
  std::uint64_t version = kFormatVersion;
  append_u64(blob, version);
  append_u64(blob, header_str.size());
  blob += header_str;
  append_u64(blob, payload.size());
  blob += payload;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < sizeof(kMagic) + 16 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError("checkpoint '" + path + "' has a bad or truncated header");
  }
  std::size_t cursor = sizeof(kMagic);
  const std::uint64_t version = read_u64(blob, cursor);
  cursor += 8;
  if (version != kFormatVersion) {
    throw IntegrityError("checkpoint format version " + std::to_string(version) +
                         " is incompatible with supported version " +
                         std::to_string(kFormatVersion));
  }
  const std::uint64_t header_len = read_u64(blob, cursor);
  cursor += 8;
  if (cursor + header_len + 8 > blob.size()) {
    throw IntegrityError("checkpoint '" + path + "' truncated inside the header");
  }
  json header;
  try {
    header = json::parse(blob.substr(cursor, header_len));
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  cursor += header_len;
  const std::uint64_t payload_len = read_u64(blob, cursor);
  cursor += 8;
  if (cursor + payload_len != blob.size()) {
    throw IntegrityError("checkpoint payload length check failed");
  }

  LoadedCheckpoint loaded;
  try {
    loaded.config = config_from_json(header.at("config"));
    loaded.rt_min = header.at("rt_min").get<long long>();
    loaded.rt_max = header.at("rt_max").get<long long>();
    loaded.state.next_epoch = header.at("epoch").get<int>();
    loaded.state.shuffle_state = header.at("shuffle_rng").get<std::uint64_t>();
    loaded.state.dropout_state = header.at("dropout_rng").get<std::uint64_t>();
    loaded.state.adam_step = header.at("adam_step").get<long long>();

    CgVocabs cg_vocabs;
    cg_vocabs.pos = LabelVocab(header.at("pos_vocab").get<std::vector<std::string>>());
    cg_vocabs.dep = LabelVocab(header.at("dep_vocab").get<std::vector<std::string>>());
    auto word_names = header.at("word_vocab").get<std::vector<std::string>>();
    if (!word_names.empty()) {
      loaded.model = std::make_unique<CgCreModel>(loaded.config.model, LabelVocab(word_names),
                                                  cg_vocabs, loaded.config.seed);
    } else {
      WordEmbedding emb = WordEmbedding::from_file(loaded.config.embeddings_path,
                                                   loaded.config.model.embed_dim);
      loaded.model = std::make_unique<CgCreModel>(loaded.config.model, std::move(emb), cg_vocabs,
                                                  loaded.config.seed);
    }

    // Restore tensors by name; every parameter must be present with the
    // recorded shape.
    const json& directory = header.at("tensors");
    auto read_tensor = [&](const std::string& name, const std::vector<int>& want_shape) {
      for (const json& e : directory) {
        if (e.at("name").get<std::string>() != name) continue;
        const auto shape = e.at("shape").get<std::vector<int>>();
        if (shape != want_shape) {
          throw IntegrityError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                               ", expected " + shape_str(want_shape));
        }
        const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
        const std::uint64_t bytes = e.at("bytes").get<std::uint64_t>();
        if (offset + bytes > payload_len || bytes % 8 != 0) {
          throw IntegrityError("checkpoint tensor '" + name + "' fails its length check");
        }
        return read_doubles(blob, cursor + offset, bytes / 8);
      }
      throw IntegrityError("checkpoint is missing tensor '" + name + "'");
    };
    for (const auto& [name, t] : loaded.model->params().items()) {
      Tensor tensor = t;
      tensor.data() = read_tensor(name, tensor.shape());
      loaded.adam_m.push_back(read_tensor("adam.m." + name, tensor.shape()));
      loaded.adam_v.push_back(read_tensor("adam.v." + name, tensor.shape()));
    }
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint header is missing fields: ") + e.what());
  }
  return loaded;
}

}  // namespace cgcre
