#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "temba/augment.hpp"
#include "temba/encoder.hpp"

namespace temba {

class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainConfig {
  double tau_t = 0.05;
  double tau_u = 0.05;
  double tau_pair = 0.05;
  double lambda_t = 1.0;
  double lambda_u = 1.0;
  double lambda_pair = 0.5;
  std::size_t batch_size = 16;
  std::size_t epochs = 2;
  double learning_rate = 0.05;
  std::uint64_t shuffle_seed = 1;
  std::uint64_t dropout_seed_base = 2;
  bool alignment_enabled = false;

  void validate() const;  // throws TrainError on bad temperatures or N < 2
};

/// One training example: utterance tokens and rendered template tokens.
struct TrainItem {
  std::vector<std::string> utterance_tokens;
  std::vector<std::string> template_tokens;
};

TrainItem to_train_item(const AugmentedPair& pair);

double cosine_sim(std::span<const double> a, std::span<const double> b);

/// Mean over i of -log( exp(sim(a_i,b_i)/tau) / sum_j exp(sim(a_i,b_j)/tau) ).
/// Shared core of the three contrastive losses.
double info_nce(const std::vector<std::vector<double>>& anchors,
                const std::vector<std::vector<double>>& others, double tau);

double template_loss(const std::vector<std::vector<double>>& t,
                     const std::vector<std::vector<double>>& t_plus, double tau_t);
double utterance_loss(const std::vector<std::vector<double>>& u,
                      const std::vector<std::vector<double>>& u_plus, double tau_u);
double pairwise_loss(const std::vector<std::vector<double>>& t,
                     const std::vector<std::vector<double>>& u, double tau_pair);

struct LossBreakdown {
  double l_t = 0.0;
  double l_u = 0.0;
  double l_pair = 0.0;
  double total = 0.0;
};

double train_loss(const LossBreakdown& parts, const TrainConfig& config);

/// Same shapes as the trainable fields of EncoderParams.
struct Gradients {
  std::vector<double> embed, w_pool, b_pool, w_align, b_align;
};

/// Dropout seeds for the four encoder passes of one item, in role order
/// t, t+, u, u+.
using ItemSeeds = std::array<std::uint64_t, 4>;

std::vector<ItemSeeds> derive_batch_seeds(std::uint64_t base, std::size_t epoch,
                                          std::size_t batch_index,
                                          std::size_t batch_size);

LossBreakdown batch_loss(const EncoderParams& params,
                         const std::vector<TrainItem>& batch,
                         const std::vector<ItemSeeds>& seeds,
                         const TrainConfig& config);

/// Exact analytic gradients of train_loss with the batch's dropout masks
/// held fixed.
std::pair<Gradients, LossBreakdown> grad_train_loss(
    const EncoderParams& params, const std::vector<TrainItem>& batch,
    const std::vector<ItemSeeds>& seeds, const TrainConfig& config);

struct StepTrace {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double l_t = 0.0, l_u = 0.0, l_pair = 0.0, l_train = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<StepTrace> trace;

  double epoch_mean_loss(std::size_t epoch) const;
};

/// Plain SGD over full batches; trailing partial batch dropped; fully
/// deterministic under the config's seeds.
TrainResult train(EncoderParams params, const std::vector<TrainItem>& items,
                  const TrainConfig& config);

void save_trace(const std::vector<StepTrace>& trace, const std::string& path);

}  // namespace temba
