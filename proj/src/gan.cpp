#include "mia/gan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mia/binary_io.hpp"

namespace mia {

namespace {

constexpr std::string_view kCheckpointMagic = "GANC";

void check_shape(const ComposerGan& gan, const Pianoroll& roll) {
  if (roll.shape() != gan.arch.shape) throw FormatError("pianoroll shape does not match model");
}

}  // namespace

std::vector<std::size_t> GanArchitecture::discriminator_dims() const {
  std::vector<std::size_t> dims{shape.cells()};
  dims.insert(dims.end(), discriminator_hidden.begin(), discriminator_hidden.end());
  dims.push_back(1);
  return dims;
}

nlohmann::json GanArchitecture::to_json() const {
  return {{"latent_dim", latent_dim},
          {"shape", mia::to_json(shape)},
          {"trunk", {{"dims", trunk_dims()}, {"hidden", "relu"}, {"output", "relu"}}},
          {"heads", {{"count", shape.tracks}, {"dims", head_dims()}, {"output", "linear"}}},
          {"discriminator", {{"dims", discriminator_dims()}, {"hidden", "relu"}, {"output", "linear"}}}};
}

GanArchitecture GanArchitecture::from_json(const nlohmann::json& j) {
  try {
    GanArchitecture a;
    a.shape = shape_from_json(j.at("shape"));
    a.latent_dim = j.at("latent_dim").get<std::size_t>();
    auto trunk = j.at("trunk").at("dims").get<std::vector<std::size_t>>();
    if (trunk.size() != 2 || trunk[0] != a.latent_dim) throw FormatError("architecture mismatch");
    a.trunk_hidden = trunk[1];
    auto disc = j.at("discriminator").at("dims").get<std::vector<std::size_t>>();
    if (disc.size() < 2 || disc.front() != a.shape.cells() || disc.back() != 1)
      throw FormatError("architecture mismatch");
    a.discriminator_hidden.assign(disc.begin() + 1, disc.end() - 1);
    if (a.to_json() != j) throw FormatError("architecture mismatch");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad architecture descriptor: ") + e.what());
  }
}

ComposerGan ComposerGan::zeros(const GanArchitecture& arch) {
  arch.shape.validate();
  if (arch.latent_dim == 0 || arch.trunk_hidden == 0) throw ConfigError("layer sizes must be >= 1");
  for (auto h : arch.discriminator_hidden)
    if (h == 0) throw ConfigError("layer sizes must be >= 1");
  ComposerGan gan;
  gan.arch = arch;
  gan.trunk = nn::make_mlp(arch.trunk_dims(), nn::Activation::relu, nn::Activation::relu);
  for (std::uint32_t t = 0; t < arch.shape.tracks; ++t)
    gan.heads.push_back(nn::make_mlp(arch.head_dims(), nn::Activation::linear, nn::Activation::linear));
  gan.discriminator =
      nn::make_mlp(arch.discriminator_dims(), nn::Activation::relu, nn::Activation::linear);
  return gan;
}

ComposerGan ComposerGan::create(const GanArchitecture& arch, std::uint64_t init_seed) {
  ComposerGan gan = zeros(arch);
  Rng rng(init_seed);
  nn::glorot_init(gan.trunk, rng);
  for (auto& h : gan.heads) nn::glorot_init(h, rng);
  nn::glorot_init(gan.discriminator, rng);
  return gan;
}

void ComposerGan::validate() const {
  trunk.validate();
  discriminator.validate();
  if (heads.size() != arch.shape.tracks) throw ConfigError("head count must equal track count");
  for (const auto& h : heads) {
    h.validate();
    if (h.in_dim() != trunk.out_dim() || h.out_dim() != arch.shape.cells_per_track())
      throw ConfigError("generator head dimensions do not match shape");
  }
  if (trunk.in_dim() != arch.latent_dim) throw ConfigError("trunk input must equal latent_dim");
  if (discriminator.in_dim() != arch.shape.cells() || discriminator.out_dim() != 1)
    throw ConfigError("discriminator dimensions do not match shape");
}

std::vector<double> generator_logits(const ComposerGan& gan, std::span<const double> z) {
  if (z.size() != gan.arch.latent_dim) throw ConfigError("latent dimension mismatch");
  const auto feature = nn::predict(gan.trunk, z);
  std::vector<double> logits;
  logits.reserve(gan.arch.shape.cells());
  for (const auto& head : gan.heads) {
    auto part = nn::predict(head, feature);
    logits.insert(logits.end(), part.begin(), part.end());
  }
  return logits;
}

Pianoroll g_sample(const ComposerGan& gan, std::span<const double> z) {
  const auto logits = generator_logits(gan, z);
  std::vector<std::uint8_t> cells(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) cells[i] = logits[i] > 0.0 ? 1 : 0;
  return Pianoroll(gan.arch.shape, std::move(cells));
}

std::vector<double> sample_latent(std::size_t latent_dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(latent_dim);
  for (auto& v : z) v = normal(rng);
  return z;
}

double d_score(const ComposerGan& gan, const Pianoroll& roll) {
  check_shape(gan, roll);
  const auto x = flatten(roll);
  return nn::predict(gan.discriminator, x)[0];
}

// --- training -----------------------------------------------------------------

void TrainConfig::validate() const {
  if (iterations == 0 || batch_size == 0 || latent_dim == 0 || checkpoint_every == 0 ||
      d_steps_per_g_step == 0 || trunk_hidden == 0)
    throw ConfigError("training counts must be >= 1");
  if (checkpoint_every > iterations)
    throw ConfigError("checkpoint_every exceeds iterations; no checkpoint would be written");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"iterations", iterations},
          {"batch_size", batch_size},
          {"latent_dim", latent_dim},
          {"lr", lr},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"d_steps_per_g_step", d_steps_per_g_step},
          {"trunk_hidden", trunk_hidden},
          {"discriminator_hidden", discriminator_hidden}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.d_steps_per_g_step = j.value("d_steps_per_g_step", c.d_steps_per_g_step);
  c.trunk_hidden = j.value("trunk_hidden", c.trunk_hidden);
  c.discriminator_hidden = j.value("discriminator_hidden", c.discriminator_hidden);
  return c;
}

std::vector<std::size_t> checkpoint_schedule(std::size_t iterations, std::size_t every) {
  std::vector<std::size_t> out;
  if (every == 0) return out;
  for (std::size_t k = every; k <= iterations; k += every) out.push_back(k);
  return out;
}

namespace {

struct Trainer {
  const Dataset& data;
  const TrainConfig& cfg;
  ComposerGan gan;
  Rng rng;
  nn::AdamState adam_trunk, adam_disc;
  std::vector<nn::AdamState> adam_heads;

  Trainer(const Dataset& d, const TrainConfig& c, const GanArchitecture& arch)
      : data(d), cfg(c), gan(ComposerGan::create(arch, derive_seed(c.seed, 0))),
        rng(derive_seed(c.seed, 1)) {
    adam_trunk = nn::AdamState::for_model(gan.trunk, cfg.lr);
    adam_disc = nn::AdamState::for_model(gan.discriminator, cfg.lr);
    for (const auto& h : gan.heads) adam_heads.push_back(nn::AdamState::for_model(h, cfg.lr));
  }

  struct GenPass {
    nn::ForwardCache trunk;
    std::vector<nn::ForwardCache> heads;
    std::vector<double> probs;  // sigmoid of head logits, flattened-roll order
  };

  GenPass generate(std::span<const double> z) const {
    GenPass p;
    auto t = nn::forward(gan.trunk, z);
    p.probs.reserve(gan.arch.shape.cells());
    for (const auto& head : gan.heads) {
      auto h = nn::forward(head, t.y);
      for (double logit : h.y) p.probs.push_back(nn::sigmoid(logit));
      p.heads.push_back(std::move(h.cache));
    }
    p.trunk = std::move(t.cache);
    return p;
  }

  std::vector<std::size_t> draw_batch() {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: first batch_size entries form a draw without replacement.
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      std::size_t j = i + uniform_index(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(cfg.batch_size);
    return idx;
  }

  double discriminator_step() {
    auto grads = nn::MlpGrads::zeros_like(gan.discriminator);
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    double loss = 0.0;
    for (std::size_t i : draw_batch()) {
      const auto x = flatten(data.rolls[i]);
      auto f = nn::forward(gan.discriminator, x);
      auto bce = nn::bce_logits_loss(f.y[0], 1);
      loss += bce.loss;
      const double dy = bce.dlogit * inv_b;
      nn::backward_accumulate(gan.discriminator, f.cache, std::span<const double>(&dy, 1), grads);
    }
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto z = sample_latent(gan.arch.latent_dim, rng);
      const auto fake = generate(z);
      auto f = nn::forward(gan.discriminator, fake.probs);
      auto bce = nn::bce_logits_loss(f.y[0], 0);
      loss += bce.loss;
      const double dy = bce.dlogit * inv_b;
      nn::backward_accumulate(gan.discriminator, f.cache, std::span<const double>(&dy, 1), grads);
    }
    loss *= inv_b;
    if (!std::isfinite(loss)) throw DivergenceError("divergence: non-finite discriminator loss");
    nn::adam_step(gan.discriminator, grads, adam_disc);
    return loss;
  }

  double generator_step() {
    auto g_trunk = nn::MlpGrads::zeros_like(gan.trunk);
    std::vector<nn::MlpGrads> g_heads;
    for (const auto& h : gan.heads) g_heads.push_back(nn::MlpGrads::zeros_like(h));
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    const std::size_t per_track = gan.arch.shape.cells_per_track();
    double loss = 0.0;

    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto z = sample_latent(gan.arch.latent_dim, rng);
      const auto fake = generate(z);
      auto f = nn::forward(gan.discriminator, fake.probs);
      auto bce = nn::bce_logits_loss(f.y[0], 1);
      loss += bce.loss;
      const double dy = bce.dlogit * inv_b;
      auto dprobs = nn::backward_input(gan.discriminator, f.cache, std::span<const double>(&dy, 1));

      std::vector<double> dfeature(gan.trunk.out_dim(), 0.0);
      for (std::size_t t = 0; t < gan.heads.size(); ++t) {
        std::vector<double> dlogits(per_track);
        for (std::size_t k = 0; k < per_track; ++k) {
          const double s = fake.probs[t * per_track + k];
          dlogits[k] = dprobs[t * per_track + k] * s * (1.0 - s);
        }
        auto dh = nn::backward_accumulate(gan.heads[t], fake.heads[t], dlogits, g_heads[t]);
        for (std::size_t k = 0; k < dh.size(); ++k) dfeature[k] += dh[k];
      }
      nn::backward_accumulate(gan.trunk, fake.trunk, dfeature, g_trunk);
    }
    loss *= inv_b;
    if (!std::isfinite(loss)) throw DivergenceError("divergence: non-finite generator loss");
    nn::adam_step(gan.trunk, g_trunk, adam_trunk);
    for (std::size_t t = 0; t < gan.heads.size(); ++t) nn::adam_step(gan.heads[t], g_heads[t], adam_heads[t]);
    return loss;
  }
};

}  // namespace

namespace {

// Checkpoints store f32, so a parameter past its range is as lost as a NaN.
bool fits_checkpoint(const ComposerGan& gan) {
  constexpr double kMax = std::numeric_limits<float>::max();
  auto ok = [&](const nn::Mlp& m) {
    for (const auto& l : m.layers) {
      for (double v : l.weights)
        if (!(std::abs(v) <= kMax)) return false;
      for (double v : l.bias)
        if (!(std::abs(v) <= kMax)) return false;
    }
    return true;
  };
  if (!ok(gan.trunk) || !ok(gan.discriminator)) return false;
  for (const auto& h : gan.heads)
    if (!ok(h)) return false;
  return true;
}

}  // namespace

std::vector<Checkpoint> train(const Dataset& train_set, const TrainConfig& config,
                              const CheckpointSink& sink,
                              const std::function<void(const TrainStats&)>& on_stats) {
  config.validate();
  train_set.validate();
  if (train_set.size() < config.batch_size) throw ConfigError("training set smaller than batch_size");

  GanArchitecture arch;
  arch.shape = train_set.shape;
  arch.latent_dim = config.latent_dim;
  arch.trunk_hidden = config.trunk_hidden;
  arch.discriminator_hidden = config.discriminator_hidden;
  Trainer trainer(train_set, config, arch);

  std::vector<Checkpoint> out;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    TrainStats stats{it, 0.0, 0.0};
    try {
      for (std::size_t d = 0; d < config.d_steps_per_g_step; ++d) stats.d_loss = trainer.discriminator_step();
      stats.g_loss = trainer.generator_step();
      if (!fits_checkpoint(trainer.gan)) throw DivergenceError("divergence: parameters overflow checkpoint precision");
    } catch (const DivergenceError& e) {
      std::optional<Checkpoint> last;
      if (!out.empty()) last = out.back();
      throw TrainingDivergence(std::string(e.what()) + " at iteration " + std::to_string(it),
                               std::move(last));
    }
    if (on_stats) on_stats(stats);
    if (it % config.checkpoint_every == 0) {
      out.push_back(make_checkpoint(trainer.gan, it));
      if (sink) sink(out.back());
    }
  }
  return out;
}

// --- checkpoints ---------------------------------------------------------------

namespace {

void push_mlp(std::vector<Tensor>& out, const nn::Mlp& mlp) {
  for (const auto& l : mlp.layers) {
    out.push_back({{static_cast<std::uint32_t>(l.out), static_cast<std::uint32_t>(l.in)},
                   std::vector<float>(l.weights.begin(), l.weights.end())});
    out.push_back({{static_cast<std::uint32_t>(l.out)}, std::vector<float>(l.bias.begin(), l.bias.end())});
  }
}

void pull_mlp(nn::Mlp& mlp, const std::vector<Tensor>& tensors, std::size_t& pos) {
  for (auto& l : mlp.layers) {
    if (pos + 2 > tensors.size()) throw FormatError("architecture mismatch");
    const Tensor& w = tensors[pos++];
    const Tensor& b = tensors[pos++];
    const std::vector<std::uint32_t> wd{static_cast<std::uint32_t>(l.out), static_cast<std::uint32_t>(l.in)};
    const std::vector<std::uint32_t> bd{static_cast<std::uint32_t>(l.out)};
    if (w.dims != wd || b.dims != bd) throw FormatError("architecture mismatch");
    l.weights.assign(w.data.begin(), w.data.end());
    l.bias.assign(b.data.begin(), b.data.end());
  }
}

}  // namespace

Checkpoint make_checkpoint(const ComposerGan& gan, std::uint64_t iteration) {
  Checkpoint c;
  c.iteration = iteration;
  c.arch = gan.arch;
  push_mlp(c.tensors, gan.trunk);
  for (const auto& h : gan.heads) push_mlp(c.tensors, h);
  push_mlp(c.tensors, gan.discriminator);
  return c;
}

void load_into(ComposerGan& gan, const Checkpoint& ckpt) {
  if (!(gan.arch == ckpt.arch)) throw FormatError("architecture mismatch");
  std::size_t pos = 0;
  pull_mlp(gan.trunk, ckpt.tensors, pos);
  for (auto& h : gan.heads) pull_mlp(h, ckpt.tensors, pos);
  pull_mlp(gan.discriminator, ckpt.tensors, pos);
  if (pos != ckpt.tensors.size()) throw FormatError("architecture mismatch");
}

ComposerGan gan_from_checkpoint(const Checkpoint& ckpt) {
  ComposerGan gan = ComposerGan::zeros(ckpt.arch);
  load_into(gan, ckpt);
  return gan;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.put_tag(kCheckpointMagic);
  w.put_u32(kCheckpointFormatVersion);
  w.put_u64(ckpt.iteration);
  const std::string desc = ckpt.arch.to_json().dump();
  w.put_u32(static_cast<std::uint32_t>(desc.size()));
  w.put_tag(desc);
  w.put_u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.put_u32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.put_u32(d);
    for (float v : t.data) w.put_f32(v);
  }
  return w.bytes();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "truncated checkpoint");
  if (r.take_string(4) != kCheckpointMagic) throw FormatError("bad magic");
  if (r.u32() != kCheckpointFormatVersion) throw FormatError("unsupported version");
  Checkpoint c;
  c.iteration = r.u64();
  const std::uint32_t len = r.u32();
  const std::string desc = r.take_string(len);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(desc);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad architecture descriptor: ") + e.what());
  }
  c.arch = GanArchitecture::from_json(j);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("tensor rank out of range");
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.u32());
      n *= t.dims.back();
    }
    if (n > r.remaining() / 4) throw FormatError("truncated checkpoint");
    t.data.resize(n);
    for (auto& v : t.data) v = r.f32();
    c.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint");
  // Tensor layout must agree with the descriptor.
  gan_from_checkpoint(c);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace mia
