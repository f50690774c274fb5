#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "temba/train.hpp"

using namespace temba;
using temba::testing::TempDir;
using temba::testing::smart_home_corpus;

namespace {

// Brute-force softmax oracle, coded independently of info_nce.
double oracle_cos(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na) / std::sqrt(nb);
}

double oracle_loss(const std::vector<std::vector<double>>& anchors,
                   const std::vector<std::vector<double>>& others, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    double num = std::exp(oracle_cos(anchors[i], others[i]) / tau);
    double den = 0.0;
    for (std::size_t j = 0; j < others.size(); ++j)
      den += std::exp(oracle_cos(anchors[i], others[j]) / tau);
    total += -std::log(num / den);
  }
  return total / static_cast<double>(anchors.size());
}

std::vector<std::vector<double>> random_vectors(std::size_t n, std::size_t d,
                                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (auto& v : out)
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return out;
}

EncoderParams small_params(std::size_t dim, double dropout, std::uint64_t seed) {
  Vocab v = Vocab::build(
      {{"turn", "on", "lamp", "fan", "tv", "in", "lounge", "study"}},
      {"DEVICE", "ROOM"});
  return init_params(v, dim, dropout, seed);
}

std::vector<TrainItem> fixture_items() {
  auto result = augment_corpus(smart_home_corpus(), AugmentStrategy{});
  std::vector<TrainItem> items;
  for (const auto& p : result.pairs) items.push_back(to_train_item(p));
  return items;
}

// Central finite differences over every parameter entry.
double max_grad_rel_error(EncoderParams params,
                          const std::vector<TrainItem>& batch,
                          const std::vector<ItemSeeds>& seeds,
                          const TrainConfig& config) {
  auto [grads, losses] = grad_train_loss(params, batch, seeds, config);
  const double h = 1e-6;  // truncation at 1e-5 can exceed the threshold on steep instances
  double worst = 0.0;
  auto check_block = [&](std::vector<double>& p, const std::vector<double>& g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      double saved = p[i];
      p[i] = saved + h;
      double up = train_loss(batch_loss(params, batch, seeds, config), config);
      p[i] = saved - h;
      double down = train_loss(batch_loss(params, batch, seeds, config), config);
      p[i] = saved;
      double fd = (up - down) / (2.0 * h);
      // floor guards entries whose true gradient is ~0, where central
      // differences are pure roundoff noise
      double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-5});
      worst = std::max(worst, std::abs(fd - g[i]) / denom);
    }
  };
  check_block(params.embed, grads.embed);
  check_block(params.w_pool, grads.w_pool);
  check_block(params.b_pool, grads.b_pool);
  check_block(params.w_align, grads.w_align);
  check_block(params.b_align, grads.b_align);
  return worst;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  std::vector<double> v = {0.3, -0.7, 1.1};
  std::vector<double> neg = {-0.3, 0.7, -1.1};
  CHECK(cosine_sim(v, v) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cosine_sim(v, neg) == doctest::Approx(-1.0).epsilon(1e-14));
  std::vector<double> a = {1.0, 0.0}, b = {1.0, 1.0};
  CHECK(cosine_sim(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  std::vector<double> zero = {0.0, 0.0};
  CHECK_THROWS_WITH_AS(cosine_sim(a, zero), doctest::Contains("degenerate"),
                       TrainError);
}

TEST_CASE("identical vectors give exactly log N") {
  for (std::size_t n : {2, 3, 5}) {
    std::vector<std::vector<double>> same(n, {0.4, -0.2, 0.9});
    CHECK(template_loss(same, same, 0.05) ==
          doctest::Approx(std::log(double(n))).epsilon(1e-12));
    CHECK(utterance_loss(same, same, 1.0) ==
          doctest::Approx(std::log(double(n))).epsilon(1e-12));
    CHECK(pairwise_loss(same, same, 0.3) ==
          doctest::Approx(std::log(double(n))).epsilon(1e-12));
  }
}

TEST_CASE("N=2 hand-set vectors match the oracle to 1e-10") {
  std::vector<std::vector<double>> a = {{1.0, 0.0}, {std::cos(1.0), std::sin(1.0)}};
  std::vector<std::vector<double>> b = {{std::cos(0.3), std::sin(0.3)},
                                        {std::cos(2.0), std::sin(2.0)}};
  CHECK(std::abs(template_loss(a, b, 0.07) - oracle_loss(a, b, 0.07)) < 1e-10);
  CHECK(std::abs(utterance_loss(a, b, 0.5) - oracle_loss(a, b, 0.5)) < 1e-10);
  CHECK(std::abs(pairwise_loss(a, b, 0.05) - oracle_loss(a, b, 0.05)) < 1e-10);
}

TEST_CASE("large temperature limit approaches log N") {
  auto a = random_vectors(4, 6, 11);
  auto b = random_vectors(4, 6, 12);
  CHECK(std::abs(template_loss(a, b, 1e6) - std::log(4.0)) < 1e-4);
}

TEST_CASE("anchor role is asymmetric") {
  std::vector<std::vector<double>> a = {{1.0, 0.0}, {0.6, 0.8}};
  std::vector<std::vector<double>> b = {{0.0, 1.0}, {0.9, -0.1}};
  double fwd = utterance_loss(a, b, 0.2);
  double rev = utterance_loss(b, a, 0.2);
  CHECK(std::abs(fwd - oracle_loss(a, b, 0.2)) < 1e-10);
  CHECK(std::abs(rev - oracle_loss(b, a, 0.2)) < 1e-10);
  CHECK(fwd != rev);
}

TEST_CASE("pairwise closed form on orthogonal identical sets") {
  const double tau = 0.1;
  const std::size_t n = 3;
  std::vector<std::vector<double>> basis(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) basis[i][i] = 1.0;
  double expected =
      -std::log(std::exp(1.0 / tau) /
                (std::exp(1.0 / tau) + double(n - 1) * std::exp(0.0)));
  CHECK(pairwise_loss(basis, basis, tau) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("N=3 random batch matches oracle") {
  auto t = random_vectors(3, 5, 21);
  auto u = random_vectors(3, 5, 22);
  CHECK(std::abs(pairwise_loss(t, u, 0.05) - oracle_loss(t, u, 0.05)) < 1e-10);
}

TEST_CASE("oracle equivalence over randomized batches") {
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 2 + rng.next() % 4;
    std::size_t d = 2 + rng.next() % 7;
    auto a = random_vectors(n, d, rng.next());
    auto b = random_vectors(n, d, rng.next());
    double tau = 0.05 + 0.5 * rng.uniform();
    CHECK(std::abs(info_nce(a, b, tau) - oracle_loss(a, b, tau)) < 1e-10);
  }
}

TEST_CASE("losses are invariant to positive scaling of inputs") {
  auto a = random_vectors(4, 6, 31);
  auto b = random_vectors(4, 6, 32);
  double base = info_nce(a, b, 0.1);
  for (auto& v : a)
    for (auto& x : v) x *= 7.5;
  for (auto& v : b)
    for (auto& x : v) x *= 0.003;
  CHECK(info_nce(a, b, 0.1) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("loss respects its cosine-range lower bound") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t n = 2 + rng.next() % 4;
    auto a = random_vectors(n, 4, rng.next());
    auto b = random_vectors(n, 4, rng.next());
    double tau = 0.05 + rng.uniform();
    double bound = -std::log(
        std::exp(1.0 / tau) /
        (std::exp(1.0 / tau) + double(n - 1) * std::exp(-1.0 / tau)));
    CHECK(info_nce(a, b, tau) >= bound - 1e-12);
  }
}

TEST_CASE("train_loss combines components with the lambda weights") {
  TrainConfig config;
  config.lambda_t = 1.0;
  config.lambda_u = 1.0;
  config.lambda_pair = 0.5;
  CHECK(train_loss({2.0, 3.0, 4.0, 0.0}, config) == doctest::Approx(7.0));

  config.lambda_u = 0.0;
  config.lambda_pair = 0.0;
  CHECK(train_loss({2.0, 3.0, 4.0, 0.0}, config) == doctest::Approx(2.0));

  config.lambda_t = 0.0;
  config.lambda_u = 1.0;
  CHECK(train_loss({2.0, 3.0, 4.0, 0.0}, config) == doctest::Approx(3.0));
}

TEST_CASE("config validation rejects bad values") {
  TrainConfig c;
  c.tau_t = 0.0;
  CHECK_THROWS_AS(c.validate(), TrainError);
  c = TrainConfig{};
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), TrainError);
  c = TrainConfig{};
  c.lambda_pair = -0.1;
  CHECK_THROWS_AS(c.validate(), TrainError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("all-zero lambdas give zero gradients") {
  EncoderParams params = small_params(4, 0.1, 5);
  auto items = fixture_items();
  std::vector<TrainItem> batch(items.begin(), items.begin() + 2);
  auto seeds = derive_batch_seeds(7, 0, 0, 2);
  TrainConfig config;
  config.lambda_t = config.lambda_u = config.lambda_pair = 0.0;
  auto [grads, losses] = grad_train_loss(params, batch, seeds, config);
  for (double g : grads.embed) CHECK(g == 0.0);
  for (double g : grads.w_pool) CHECK(g == 0.0);
  for (double g : grads.w_align) CHECK(g == 0.0);
}

TEST_CASE("gradient of an unused embedding row is exactly zero") {
  EncoderParams params = small_params(4, 0.0, 5);
  auto items = fixture_items();
  std::vector<TrainItem> batch = {{{"turn", "on"}, {"turn", "{DEVICE}"}},
                                  {{"lamp", "in"}, {"lamp", "{ROOM}"}}};
  auto seeds = derive_batch_seeds(7, 0, 0, 2);
  TrainConfig config;
  auto [grads, losses] = grad_train_loss(params, batch, seeds, config);
  std::size_t unused = params.vocab.lookup("lounge");
  for (std::size_t j = 0; j < params.dim; ++j)
    CHECK(grads.embed[unused * params.dim + j] == 0.0);
  std::size_t used = params.vocab.lookup("turn");
  double sum = 0.0;
  for (std::size_t j = 0; j < params.dim; ++j)
    sum += std::abs(grads.embed[used * params.dim + j]);
  CHECK(sum > 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  auto items = fixture_items();
  TrainConfig config;
  config.batch_size = 2;
  // moderate temperatures keep the central-difference truncation term
  // (~h^2 / tau^3) well under the 1e-4 threshold
  config.tau_t = config.tau_u = config.tau_pair = 0.2;

  SUBCASE("no dropout, no alignment") {
    EncoderParams params = small_params(4, 0.0, 5);
    std::vector<TrainItem> batch(items.begin(), items.begin() + 2);
    auto seeds = derive_batch_seeds(7, 0, 0, 2);
    CHECK(max_grad_rel_error(params, batch, seeds, config) < 1e-4);
  }
  SUBCASE("dropout masks held fixed") {
    EncoderParams params = small_params(4, 0.2, 6);
    std::vector<TrainItem> batch(items.begin() + 1, items.begin() + 3);
    auto seeds = derive_batch_seeds(8, 1, 2, 2);
    CHECK(max_grad_rel_error(params, batch, seeds, config) < 1e-4);
  }
  SUBCASE("alignment MLP enabled") {
    EncoderParams params = small_params(4, 0.1, 7);
    TrainConfig aligned = config;
    aligned.alignment_enabled = true;
    std::vector<TrainItem> batch(items.begin() + 2, items.begin() + 4);
    auto seeds = derive_batch_seeds(9, 0, 1, 2);
    CHECK(max_grad_rel_error(params, batch, seeds, aligned) < 1e-4);
  }
}

TEST_CASE("learning_rate=0 leaves parameters unchanged with a flat trace") {
  // dropout off and a single full-size batch per epoch so every step sees
  // the same loss surface; the shuffle only permutes within the batch,
  // which the mean loss is invariant to
  EncoderParams params = small_params(4, 0.0, 5);
  auto items = fixture_items();
  TrainConfig config;
  config.batch_size = items.size();
  config.epochs = 3;
  config.learning_rate = 0.0;
  auto before = params.embed;
  TrainResult result = train(params, items, config);
  CHECK(result.params.embed == before);
  REQUIRE(result.trace.size() == 3);
  for (const auto& s : result.trace)
    CHECK(s.l_train == doctest::Approx(result.trace[0].l_train).epsilon(1e-12));
}

TEST_CASE("a single step applies params minus lr times gradient") {
  EncoderParams params = small_params(2, 0.0, 5);
  auto items = fixture_items();
  TrainConfig config;
  config.batch_size = items.size() >= 2 ? 2 : items.size();
  config.epochs = 1;
  config.learning_rate = 0.1;

  TrainResult result = train(params, items, config);

  // replay the single first batch by hand
  Rng rng(seed_hash(config.shuffle_seed, 0, 0, 0, 0));
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = rng.next() % i;
    std::swap(order[i - 1], order[j]);
  }
  EncoderParams manual = params;
  std::size_t steps = items.size() / config.batch_size;
  for (std::size_t b = 0; b < steps; ++b) {
    std::vector<TrainItem> batch;
    for (std::size_t i = 0; i < config.batch_size; ++i)
      batch.push_back(items[order[b * config.batch_size + i]]);
    auto seeds = derive_batch_seeds(config.dropout_seed_base, 0, b,
                                    config.batch_size);
    auto [grads, losses] = grad_train_loss(manual, batch, seeds, config);
    for (std::size_t i = 0; i < manual.embed.size(); ++i)
      manual.embed[i] -= config.learning_rate * grads.embed[i];
    for (std::size_t i = 0; i < manual.w_pool.size(); ++i)
      manual.w_pool[i] -= config.learning_rate * grads.w_pool[i];
    for (std::size_t i = 0; i < manual.b_pool.size(); ++i)
      manual.b_pool[i] -= config.learning_rate * grads.b_pool[i];
    for (std::size_t i = 0; i < manual.w_align.size(); ++i)
      manual.w_align[i] -= config.learning_rate * grads.w_align[i];
    for (std::size_t i = 0; i < manual.b_align.size(); ++i)
      manual.b_align[i] -= config.learning_rate * grads.b_align[i];
  }
  CHECK(result.params.embed == manual.embed);
  CHECK(result.params.w_pool == manual.w_pool);
}

TEST_CASE("training needs at least one full batch") {
  EncoderParams params = small_params(4, 0.1, 5);
  auto items = fixture_items();
  TrainConfig config;
  config.batch_size = items.size() + 1;
  CHECK_THROWS_AS(train(params, items, config), TrainError);
}

TEST_CASE("identical seeds give bit-identical checkpoints") {
  TempDir dir;
  auto items = fixture_items();
  TrainConfig config;
  config.batch_size = 4;
  config.epochs = 3;
  for (int run = 0; run < 2; ++run) {
    EncoderParams params = small_params(8, 0.1, 5);
    TrainResult result = train(params, items, config);
    save_checkpoint(result.params, dir.file("ckpt" + std::to_string(run)));
  }
  CHECK(temba::testing::read_file(dir.file("ckpt0")) ==
        temba::testing::read_file(dir.file("ckpt1")));
}

TEST_CASE("trace records every step with the configured shape") {
  TempDir dir;
  auto items = fixture_items();
  TrainConfig config;
  config.batch_size = 4;
  config.epochs = 2;
  EncoderParams params = small_params(4, 0.1, 5);
  TrainResult result = train(params, items, config);
  std::size_t per_epoch = items.size() / config.batch_size;
  CHECK(result.trace.size() == per_epoch * config.epochs);
  save_trace(result.trace, dir.file("trace.jsonl"));
  std::string contents = temba::testing::read_file(dir.file("trace.jsonl"));
  CHECK(std::count(contents.begin(), contents.end(), '\n') ==
        static_cast<long>(result.trace.size()));
}
