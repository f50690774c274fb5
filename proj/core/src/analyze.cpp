#include "temba/analyze.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace temba {

namespace {

std::vector<double> normalized(const std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw AnalyzeError("zero-norm vector");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
  return out;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

}  // namespace

double uniformity(const std::vector<std::vector<double>>& vectors) {
  if (vectors.size() < 2)
    throw AnalyzeError("uniformity needs at least 2 vectors");
  std::vector<std::vector<double>> unit;
  unit.reserve(vectors.size());
  for (const auto& v : vectors) unit.push_back(normalized(v));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < unit.size(); ++i)
    for (std::size_t j = i + 1; j < unit.size(); ++j) {
      sum += std::exp(-2.0 * sq_dist(unit[i], unit[j]));
      ++pairs;
    }
  return std::log(sum / static_cast<double>(pairs));
}

double alignment_metric(const std::vector<std::vector<double>>& vectors,
                        const std::vector<std::string>& labels) {
  if (vectors.size() != labels.size())
    throw AnalyzeError("label count mismatch");
  std::vector<std::vector<double>> unit;
  unit.reserve(vectors.size());
  for (const auto& v : vectors) unit.push_back(normalized(v));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < unit.size(); ++i)
    for (std::size_t j = i + 1; j < unit.size(); ++j)
      if (labels[i] == labels[j]) {
        sum += sq_dist(unit[i], unit[j]);
        ++pairs;
      }
  if (pairs == 0) throw AnalyzeError("no same-intent pair");
  return sum / static_cast<double>(pairs);
}

std::vector<SpaceReport> compression_sweep(
    const EncoderParams& params, const std::vector<AugmentedPair>& train_pairs,
    const std::vector<Template>& templates, const Corpus& eval_corpus,
    const std::vector<double>& lambdas, std::size_t k, bool include_templates,
    bool alignment_enabled, RenderMode render_mode) {
  // Metric population: original utterances only, each compressed with the
  // template extracted from its own slot annotations.
  std::vector<Representation> utt_reps, tmpl_reps;
  std::vector<std::string> labels;
  for (const auto& u : eval_corpus.utterances) {
    if (u.origin != Origin::original) continue;
    utt_reps.push_back(encode(params, u.tokens, Source::utterance));
    Template t = extract_template(u);
    Representation tr =
        encode(params, split_on_spaces(render_template_text(t, render_mode)),
               Source::template_);
    tmpl_reps.push_back(align_template(params, tr, alignment_enabled));
    labels.push_back(u.intent);
  }

  std::vector<SpaceReport> reports;
  for (double lam : lambdas) {
    if (lam < 0.0 || lam > 1.0) throw AnalyzeError("lambda out of [0, 1]");
    std::vector<std::vector<double>> compressed;
    compressed.reserve(utt_reps.size());
    for (std::size_t i = 0; i < utt_reps.size(); ++i)
      compressed.push_back(
          semantic_compress(tmpl_reps[i], utt_reps[i], lam).v);

    SpaceReport r;
    r.lambda_comp = lam;
    r.dataset_tag = eval_corpus.name;
    r.uniformity = uniformity(compressed);
    r.alignment = alignment_metric(compressed, labels);
    r.accuracy = evaluate(params, train_pairs, templates, eval_corpus, lam, k,
                          include_templates, alignment_enabled)
                     .accuracy;
    reports.push_back(std::move(r));
  }
  return reports;
}

void export_embeddings(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw AnalyzeError("cannot open for writing: " + path);
  out << "id\tintent\tsource";
  for (std::size_t i = 0; i < store.dim; ++i) out << "\tv" << i + 1;
  out << '\n';
  char buf[64];
  for (const auto& e : store.entries) {
    out << e.id << '\t' << e.intent << '\t'
        << (e.source == Source::utterance ? "utterance" : "template");
    for (double x : e.vector) {
      std::snprintf(buf, sizeof(buf), "\t%.17g", x);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw AnalyzeError("write failed: " + path);
}

EmbeddingStore import_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AnalyzeError("cannot open embeddings file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw AnalyzeError("empty embeddings file");
  std::size_t dim = 0;
  {
    std::istringstream hs(header);
    std::string col;
    std::size_t cols = 0;
    while (std::getline(hs, col, '\t')) ++cols;
    if (cols < 3) throw AnalyzeError("malformed embeddings header");
    dim = cols - 3;
  }
  EmbeddingStore store;
  store.dim = dim;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    StoreEntry e;
    std::string source;
    std::getline(ls, e.id, '\t');
    std::getline(ls, e.intent, '\t');
    std::getline(ls, source, '\t');
    e.source = source == "template" ? Source::template_ : Source::utterance;
    e.vector.resize(dim);
    std::string cell;
    for (auto& x : e.vector) {
      if (!std::getline(ls, cell, '\t'))
        throw AnalyzeError("embeddings row truncated");
      x = std::strtod(cell.c_str(), nullptr);
    }
    store.entries.push_back(std::move(e));
  }
  return store;
}

void save_sweep(const std::vector<SpaceReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw AnalyzeError("cannot open for writing: " + path);
  out << "lambda\tuniformity\talignment\taccuracy\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%.17g\t%.17g\t%.17g\t%.17g\n",
                  r.lambda_comp, r.uniformity, r.alignment, r.accuracy);
    out << buf;
  }
}

}  // namespace temba
