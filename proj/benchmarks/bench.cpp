#include <benchmark/benchmark.h>

#include "temba/augment.hpp"
#include "temba/train.hpp"

namespace {

using namespace temba;

Corpus make_corpus(std::size_t utterances) {
  Corpus c;
  const char* devices[] = {"lamp", "fan", "television", "heater"};
  const char* rooms[] = {"lounge", "study", "bedroom", "kitchen"};
  for (std::size_t i = 0; i < utterances; ++i) {
    Utterance u;
    u.id = "u" + std::to_string(i);
    u.tokens = {"turn", "on", devices[i % 4], "in", rooms[(i / 4) % 4]};
    u.slots = {{2, 3, "DEVICE"}, {4, 5, "ROOM"}};
    u.intent = "turn_on";
    c.utterances.push_back(std::move(u));
  }
  c.intent_set.insert("turn_on");
  return c;
}

void BM_AugmentCorpus(benchmark::State& state) {
  Corpus c = make_corpus(static_cast<std::size_t>(state.range(0)));
  AugmentStrategy strategy;
  for (auto _ : state) {
    auto result = augment_corpus(c, strategy);
    benchmark::DoNotOptimize(result.pairs.size());
  }
}
BENCHMARK(BM_AugmentCorpus)->Arg(16)->Arg(256);

void BM_GradTrainLoss(benchmark::State& state) {
  Corpus c = make_corpus(64);
  auto aug = augment_corpus(c, AugmentStrategy{});
  std::vector<std::vector<std::string>> texts;
  for (const auto& p : aug.pairs) {
    texts.push_back(p.utterance.tokens);
    texts.push_back(split_on_spaces(p.rendered_template));
  }
  Vocab vocab = Vocab::build(texts, {"DEVICE", "ROOM"});
  EncoderParams params =
      init_params(vocab, static_cast<std::size_t>(state.range(0)), 0.1, 7);
  TrainConfig config;
  config.batch_size = 16;
  std::vector<TrainItem> batch;
  for (std::size_t i = 0; i < config.batch_size; ++i)
    batch.push_back(to_train_item(aug.pairs[i % aug.pairs.size()]));
  auto seeds = derive_batch_seeds(config.dropout_seed_base, 0, 0, batch.size());
  for (auto _ : state) {
    auto [grads, losses] = grad_train_loss(params, batch, seeds, config);
    benchmark::DoNotOptimize(losses.total);
  }
}
BENCHMARK(BM_GradTrainLoss)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
