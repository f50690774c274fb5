#include "temba/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace temba {

void TrainConfig::validate() const {
  if (tau_t <= 0.0 || tau_u <= 0.0 || tau_pair <= 0.0)
    throw TrainError("temperatures must be > 0");
  if (lambda_t < 0.0 || lambda_u < 0.0 || lambda_pair < 0.0)
    throw TrainError("loss weights must be >= 0");
  if (batch_size < 2) throw TrainError("batch size must be >= 2");
  if (learning_rate < 0.0) throw TrainError("learning rate must be >= 0");
}

TrainItem to_train_item(const AugmentedPair& pair) {
  return {pair.utterance.tokens, split_on_spaces(pair.rendered_template)};
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw TrainError("degenerate representation");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double info_nce(const std::vector<std::vector<double>>& anchors,
                const std::vector<std::vector<double>>& others, double tau) {
  const std::size_t n = anchors.size();
  if (n != others.size()) throw TrainError("batch size mismatch");
  if (n < 2) throw TrainError("contrastive batch needs N >= 2");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(n);
    double max_logit = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      logits[j] = cosine_sim(anchors[i], others[j]) / tau;
      max_logit = std::max(max_logit, logits[j]);
    }
    double sumexp = 0.0;
    for (double l : logits) sumexp += std::exp(l - max_logit);
    loss += -(logits[i] - max_logit) + std::log(sumexp);
  }
  return loss / static_cast<double>(n);
}

double template_loss(const std::vector<std::vector<double>>& t,
                     const std::vector<std::vector<double>>& t_plus,
                     double tau_t) {
  return info_nce(t, t_plus, tau_t);
}

double utterance_loss(const std::vector<std::vector<double>>& u,
                      const std::vector<std::vector<double>>& u_plus,
                      double tau_u) {
  return info_nce(u, u_plus, tau_u);
}

double pairwise_loss(const std::vector<std::vector<double>>& t,
                     const std::vector<std::vector<double>>& u,
                     double tau_pair) {
  return info_nce(t, u, tau_pair);
}

double train_loss(const LossBreakdown& parts, const TrainConfig& config) {
  return config.lambda_t * parts.l_t + config.lambda_u * parts.l_u +
         config.lambda_pair * parts.l_pair;
}

std::vector<ItemSeeds> derive_batch_seeds(std::uint64_t base, std::size_t epoch,
                                          std::size_t batch_index,
                                          std::size_t batch_size) {
  std::vector<ItemSeeds> seeds(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i)
    for (std::size_t role = 0; role < 4; ++role)
      seeds[i][role] = seed_hash(base, epoch, batch_index, i, role);
  return seeds;
}

namespace {

// Cached forward state of one encoder pass, enough for exact backprop.
struct PassCache {
  std::vector<std::size_t> rows;   // token embedding rows
  std::vector<double> mask;        // tokens x dim, 0 or 1/keep (1 if no dropout)
  std::vector<double> pooled;      // post-mean, pre-pooler
  std::vector<double> rep;         // pooler output
  std::vector<double> aligned;     // alignment output (templates, when enabled)
  bool has_align = false;
};

PassCache forward_pass(const EncoderParams& params,
                       const std::vector<std::string>& tokens,
                       std::uint64_t seed, bool align) {
  if (tokens.empty()) throw TrainError("empty input in batch");
  const std::size_t d = params.dim;
  PassCache c;
  c.rows.reserve(tokens.size());
  for (const auto& tok : tokens) c.rows.push_back(params.vocab.lookup(tok));

  c.mask.assign(tokens.size() * d, 1.0);
  if (params.dropout_rate > 0.0) {
    Rng rng(seed);
    const double scale = 1.0 / (1.0 - params.dropout_rate);
    for (auto& m : c.mask)
      m = rng.uniform() < params.dropout_rate ? 0.0 : scale;
  }

  c.pooled.assign(d, 0.0);
  for (std::size_t k = 0; k < c.rows.size(); ++k) {
    const double* e = params.embed.data() + c.rows[k] * d;
    const double* m = c.mask.data() + k * d;
    for (std::size_t j = 0; j < d; ++j) c.pooled[j] += e[j] * m[j];
  }
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  for (auto& x : c.pooled) x *= inv_n;

  c.rep.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = params.b_pool[i];
    const double* row = params.w_pool.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * c.pooled[j];
    c.rep[i] = std::tanh(acc);
  }

  if (align) {
    c.has_align = true;
    c.aligned.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      double acc = params.b_align[i];
      const double* row = params.w_align.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) acc += row[j] * c.rep[j];
      c.aligned[i] = std::tanh(acc);
    }
  }
  return c;
}

const std::vector<double>& output_of(const PassCache& c) {
  return c.has_align ? c.aligned : c.rep;
}

// Adds the gradient of info_nce(anchors, others, tau), scaled by weight,
// into per-vector output gradients.
void accumulate_info_nce_grad(const std::vector<const std::vector<double>*>& anchors,
                              const std::vector<const std::vector<double>*>& others,
                              double tau, double weight,
                              std::vector<std::vector<double>>& grad_anchors,
                              std::vector<std::vector<double>>& grad_others) {
  const std::size_t n = anchors.size();
  const std::size_t d = anchors[0]->size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = *anchors[i];
    double na = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
    std::vector<double> sims(n), logits(n);
    double max_logit = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      sims[j] = cosine_sim(a, *others[j]);
      logits[j] = sims[j] / tau;
      max_logit = std::max(max_logit, logits[j]);
    }
    double sumexp = 0.0;
    for (double l : logits) sumexp += std::exp(l - max_logit);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& b = *others[j];
      double p = std::exp(logits[j] - max_logit) / sumexp;
      double dl_ds =
          weight * (p - (i == j ? 1.0 : 0.0)) / (tau * static_cast<double>(n));
      if (dl_ds == 0.0) continue;
      double nb = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
      double inv_ab = 1.0 / (na * nb);
      double s = sims[j];
      for (std::size_t kdim = 0; kdim < d; ++kdim) {
        grad_anchors[i][kdim] += dl_ds * (b[kdim] * inv_ab - s * a[kdim] / (na * na));
        grad_others[j][kdim] += dl_ds * (a[kdim] * inv_ab - s * b[kdim] / (nb * nb));
      }
    }
  }
}

// Backprop one pass's output gradient into parameter gradients.
void backward_pass(const EncoderParams& params, const PassCache& c,
                   const std::vector<double>& grad_out, Gradients& g) {
  const std::size_t d = params.dim;
  std::vector<double> grad_rep(d);

  if (c.has_align) {
    std::vector<double> grad_pre(d);
    for (std::size_t i = 0; i < d; ++i)
      grad_pre[i] = grad_out[i] * (1.0 - c.aligned[i] * c.aligned[i]);
    for (std::size_t i = 0; i < d; ++i) {
      double* wrow = g.w_align.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) wrow[j] += grad_pre[i] * c.rep[j];
      g.b_align[i] += grad_pre[i];
    }
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        acc += params.w_align[i * d + j] * grad_pre[i];
      grad_rep[j] = acc;
    }
  } else {
    grad_rep = grad_out;
  }

  std::vector<double> grad_pre(d);
  for (std::size_t i = 0; i < d; ++i)
    grad_pre[i] = grad_rep[i] * (1.0 - c.rep[i] * c.rep[i]);
  for (std::size_t i = 0; i < d; ++i) {
    double* wrow = g.w_pool.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) wrow[j] += grad_pre[i] * c.pooled[j];
    g.b_pool[i] += grad_pre[i];
  }
  std::vector<double> grad_pooled(d);
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      acc += params.w_pool[i * d + j] * grad_pre[i];
    grad_pooled[j] = acc;
  }

  const double inv_n = 1.0 / static_cast<double>(c.rows.size());
  for (std::size_t k = 0; k < c.rows.size(); ++k) {
    double* erow = g.embed.data() + c.rows[k] * d;
    const double* m = c.mask.data() + k * d;
    for (std::size_t j = 0; j < d; ++j)
      erow[j] += grad_pooled[j] * inv_n * m[j];
  }
}

struct BatchForward {
  std::vector<PassCache> t, t_plus, u, u_plus;  // one per item
  LossBreakdown losses;
};

BatchForward forward_batch(const EncoderParams& params,
                           const std::vector<TrainItem>& batch,
                           const std::vector<ItemSeeds>& seeds,
                           const TrainConfig& config) {
  if (batch.size() != seeds.size()) throw TrainError("seed count mismatch");
  if (batch.size() < 2) throw TrainError("contrastive batch needs N >= 2");
  BatchForward f;
  bool align = config.alignment_enabled;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    f.t.push_back(forward_pass(params, batch[i].template_tokens, seeds[i][0], align));
    f.t_plus.push_back(
        forward_pass(params, batch[i].template_tokens, seeds[i][1], align));
    f.u.push_back(forward_pass(params, batch[i].utterance_tokens, seeds[i][2], false));
    f.u_plus.push_back(
        forward_pass(params, batch[i].utterance_tokens, seeds[i][3], false));
  }
  std::vector<std::vector<double>> T, Tp, U, Up;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    T.push_back(output_of(f.t[i]));
    Tp.push_back(output_of(f.t_plus[i]));
    U.push_back(f.u[i].rep);
    Up.push_back(f.u_plus[i].rep);
  }
  f.losses.l_t = template_loss(T, Tp, config.tau_t);
  f.losses.l_u = utterance_loss(U, Up, config.tau_u);
  f.losses.l_pair = pairwise_loss(T, U, config.tau_pair);
  f.losses.total = train_loss(f.losses, config);
  return f;
}

}  // namespace

LossBreakdown batch_loss(const EncoderParams& params,
                         const std::vector<TrainItem>& batch,
                         const std::vector<ItemSeeds>& seeds,
                         const TrainConfig& config) {
  return forward_batch(params, batch, seeds, config).losses;
}

std::pair<Gradients, LossBreakdown> grad_train_loss(
    const EncoderParams& params, const std::vector<TrainItem>& batch,
    const std::vector<ItemSeeds>& seeds, const TrainConfig& config) {
  BatchForward f = forward_batch(params, batch, seeds, config);
  const std::size_t n = batch.size();
  const std::size_t d = params.dim;

  std::vector<std::vector<double>> gT(n, std::vector<double>(d, 0.0));
  auto gTp = gT, gU = gT, gUp = gT;

  std::vector<const std::vector<double>*> T(n), Tp(n), U(n), Up(n);
  for (std::size_t i = 0; i < n; ++i) {
    T[i] = &output_of(f.t[i]);
    Tp[i] = &output_of(f.t_plus[i]);
    U[i] = &f.u[i].rep;
    Up[i] = &f.u_plus[i].rep;
  }
  if (config.lambda_t > 0.0)
    accumulate_info_nce_grad(T, Tp, config.tau_t, config.lambda_t, gT, gTp);
  if (config.lambda_u > 0.0)
    accumulate_info_nce_grad(U, Up, config.tau_u, config.lambda_u, gU, gUp);
  if (config.lambda_pair > 0.0)
    accumulate_info_nce_grad(T, U, config.tau_pair, config.lambda_pair, gT, gU);

  Gradients g;
  g.embed.assign(params.embed.size(), 0.0);
  g.w_pool.assign(params.w_pool.size(), 0.0);
  g.b_pool.assign(params.b_pool.size(), 0.0);
  g.w_align.assign(params.w_align.size(), 0.0);
  g.b_align.assign(params.b_align.size(), 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    backward_pass(params, f.t[i], gT[i], g);
    backward_pass(params, f.t_plus[i], gTp[i], g);
    backward_pass(params, f.u[i], gU[i], g);
    backward_pass(params, f.u_plus[i], gUp[i], g);
  }
  return {std::move(g), f.losses};
}

double TrainResult::epoch_mean_loss(std::size_t epoch) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : trace)
    if (s.epoch == epoch) {
      sum += s.l_train;
      ++count;
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

TrainResult train(EncoderParams params, const std::vector<TrainItem>& items,
                  const TrainConfig& config) {
  config.validate();
  if (items.size() < config.batch_size)
    throw TrainError("fewer training pairs than batch size");

  TrainResult result;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates under a per-epoch derived seed; std::shuffle is
    // implementation-defined and would break cross-platform determinism.
    Rng rng(seed_hash(config.shuffle_seed, epoch, 0, 0, 0));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = rng.next() % i;
      std::swap(order[i - 1], order[j]);
    }
    const std::size_t num_batches = items.size() / config.batch_size;
    for (std::size_t b = 0; b < num_batches; ++b) {
      std::vector<TrainItem> batch;
      batch.reserve(config.batch_size);
      for (std::size_t i = 0; i < config.batch_size; ++i)
        batch.push_back(items[order[b * config.batch_size + i]]);
      auto seeds = derive_batch_seeds(config.dropout_seed_base, epoch, b,
                                      config.batch_size);
      auto [grads, losses] = grad_train_loss(params, batch, seeds, config);

      const double lr = config.learning_rate;
      for (std::size_t i = 0; i < params.embed.size(); ++i)
        params.embed[i] -= lr * grads.embed[i];
      for (std::size_t i = 0; i < params.w_pool.size(); ++i)
        params.w_pool[i] -= lr * grads.w_pool[i];
      for (std::size_t i = 0; i < params.b_pool.size(); ++i)
        params.b_pool[i] -= lr * grads.b_pool[i];
      for (std::size_t i = 0; i < params.w_align.size(); ++i)
        params.w_align[i] -= lr * grads.w_align[i];
      for (std::size_t i = 0; i < params.b_align.size(); ++i)
        params.b_align[i] -= lr * grads.b_align[i];

      result.trace.push_back(
          {epoch, b, losses.l_t, losses.l_u, losses.l_pair, losses.total});
    }
  }
  result.params = std::move(params);
  return result;
}

void save_trace(const std::vector<StepTrace>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TrainError("cannot open for writing: " + path);
  char buf[256];
  for (const auto& s : trace) {
    std::snprintf(buf, sizeof(buf),
                  "{\"epoch\":%zu,\"step\":%zu,\"L_t\":%.17g,\"L_u\":%.17g,"
                  "\"L_pair\":%.17g,\"L_train\":%.17g}\n",
                  s.epoch, s.step, s.l_t, s.l_u, s.l_pair, s.l_train);
    out << buf;
  }
}

}  // namespace temba
