#pragma once

#include <string>
#include <vector>

#include "temba/infer.hpp"

namespace temba {

class AnalyzeError : public std::runtime_error {
 public:
  explicit AnalyzeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SpaceReport {
  double uniformity = 0.0;  // <= 0
  double alignment = 0.0;   // >= 0
  double lambda_comp = 0.0;
  double accuracy = 0.0;
  std::string model_tag;
  std::string dataset_tag;
};

/// log mean over distinct pairs (i<j) of exp(-2 ||x-y||^2), vectors
/// L2-normalized first.
double uniformity(const std::vector<std::vector<double>>& vectors);

/// Mean squared distance over unordered same-label pairs, vectors
/// L2-normalized first.
double alignment_metric(const std::vector<std::vector<double>>& vectors,
                        const std::vector<std::string>& labels);

/// For each lambda: compresses every original (non-synthetic) evaluation
/// utterance with its own extracted template, measures uniformity and
/// alignment on those representations, and reports kNN accuracy against
/// the training store at the same lambda.
std::vector<SpaceReport> compression_sweep(
    const EncoderParams& params, const std::vector<AugmentedPair>& train_pairs,
    const std::vector<Template>& templates, const Corpus& eval_corpus,
    const std::vector<double>& lambdas, std::size_t k, bool include_templates,
    bool alignment_enabled, RenderMode render_mode);

/// Tab-delimited table {id, intent, source, v1..vd}; 17 significant digits.
void export_embeddings(const EmbeddingStore& store, const std::string& path);
EmbeddingStore import_embeddings(const std::string& path);

/// Tab-delimited {lambda, uniformity, alignment, accuracy}.
void save_sweep(const std::vector<SpaceReport>& reports, const std::string& path);

}  // namespace temba
