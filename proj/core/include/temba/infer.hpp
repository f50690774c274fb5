#pragma once

#include <map>
#include <string>
#include <vector>

#include "temba/augment.hpp"
#include "temba/encoder.hpp"

namespace temba {

class InferError : public std::runtime_error {
 public:
  explicit InferError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StoreEntry {
  std::vector<double> vector;
  std::string intent;
  Source source = Source::utterance;
  std::string id;
};

struct EmbeddingStore {
  std::size_t dim = 0;
  std::vector<StoreEntry> entries;
};

/// repr = lambda * t' + (1 - lambda) * u, elementwise.
Representation semantic_compress(const Representation& t_prime,
                                 const Representation& u, double lambda_comp);

/// Encodes every training utterance (no dropout), compressing with its
/// paired aligned template when lambda > 0. With include_templates, also
/// inserts one raw (aligned) template representation per template.
EmbeddingStore build_store(const EncoderParams& params,
                           const std::vector<AugmentedPair>& pairs,
                           const std::vector<Template>& templates,
                           bool include_templates, double lambda_comp,
                           bool alignment_enabled);

/// k=1 returns the most similar entry's intent; k>1 takes the majority
/// among the top k, majority ties broken by the higher-ranked member.
std::string knn_classify(const EmbeddingStore& store, const Representation& query,
                         std::size_t k);

struct EvalReport {
  std::string dataset;
  double lambda_comp = 0.0;
  std::size_t k = 1;
  bool include_templates = true;
  double accuracy = 0.0;
  std::map<std::string, std::pair<std::size_t, std::size_t>>
      per_intent;  // intent -> (correct, total)
};

EvalReport evaluate(const EncoderParams& params,
                    const std::vector<AugmentedPair>& train_pairs,
                    const std::vector<Template>& templates,
                    const Corpus& test_corpus, double lambda_comp, std::size_t k,
                    bool include_templates, bool alignment_enabled);

/// Argmax of validation accuracy over the candidates; ties go to the
/// smaller lambda.
double select_lambda(const EncoderParams& params,
                     const std::vector<AugmentedPair>& train_pairs,
                     const std::vector<Template>& templates,
                     const Corpus& validation_corpus,
                     const std::vector<double>& candidates, std::size_t k,
                     bool include_templates, bool alignment_enabled);

// Store file: "temba-store v1" header with dim and count, then one line
// per entry; vectors at 17 significant digits.
void save_store(const EmbeddingStore& store, const std::string& path);
EmbeddingStore load_store(const std::string& path);

void save_report(const EvalReport& report, const std::string& path);

}  // namespace temba
