#include "temba/infer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "temba/train.hpp"

namespace temba {

Representation semantic_compress(const Representation& t_prime,
                                 const Representation& u, double lambda_comp) {
  if (lambda_comp < 0.0 || lambda_comp > 1.0)
    throw InferError("lambda_comp must be in [0, 1]");
  if (t_prime.v.size() != u.v.size())
    throw InferError("dimension mismatch in semantic_compress");
  if (lambda_comp == 0.0) return u;
  if (lambda_comp == 1.0) return t_prime;
  Representation out;
  out.source = Source::utterance;
  out.v.resize(u.v.size());
  for (std::size_t i = 0; i < u.v.size(); ++i)
    out.v[i] = lambda_comp * t_prime.v[i] + (1.0 - lambda_comp) * u.v[i];
  return out;
}

EmbeddingStore build_store(const EncoderParams& params,
                           const std::vector<AugmentedPair>& pairs,
                           const std::vector<Template>& templates,
                           bool include_templates, double lambda_comp,
                           bool alignment_enabled) {
  EmbeddingStore store;
  store.dim = params.dim;

  // Aligned template representations, one per template actually referenced.
  std::map<std::size_t, Representation> template_reps;
  auto template_rep = [&](std::size_t tid,
                          const std::string& rendered) -> const Representation& {
    auto it = template_reps.find(tid);
    if (it == template_reps.end()) {
      Representation t =
          encode(params, split_on_spaces(rendered), Source::template_);
      it = template_reps
               .emplace(tid, align_template(params, t, alignment_enabled))
               .first;
    }
    return it->second;
  };

  for (const auto& p : pairs) {
    Representation u = encode(params, p.utterance.tokens, Source::utterance);
    if (lambda_comp > 0.0)
      u = semantic_compress(template_rep(p.template_id, p.rendered_template), u,
                            lambda_comp);
    store.entries.push_back(
        {std::move(u.v), p.utterance.intent, Source::utterance, p.utterance.id});
  }
  if (include_templates) {
    // lambda=0 skips compression, so make sure every referenced template
    // still gets a representation before inserting them
    for (const auto& p : pairs) template_rep(p.template_id, p.rendered_template);
    for (const auto& [tid, rep] : template_reps)
      store.entries.push_back({rep.v, templates.at(tid).intent,
                               Source::template_,
                               "template-" + std::to_string(tid)});
  }
  return store;
}

std::string knn_classify(const EmbeddingStore& store, const Representation& query,
                         std::size_t k) {
  if (store.entries.empty()) throw InferError("empty store");
  if (k < 1 || k > store.entries.size())
    throw InferError("k out of range for store size");

  std::vector<std::pair<double, std::size_t>> ranked;  // (sim, entry index)
  ranked.reserve(store.entries.size());
  for (std::size_t i = 0; i < store.entries.size(); ++i)
    ranked.emplace_back(cosine_sim(query.v, store.entries[i].vector), i);
  // ties keep entry order
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  if (k == 1) return store.entries[ranked[0].second].intent;

  std::map<std::string, std::size_t> votes;
  for (std::size_t i = 0; i < k; ++i)
    ++votes[store.entries[ranked[i].second].intent];
  std::size_t best = 0;
  for (const auto& [intent, n] : votes) best = std::max(best, n);
  // first (highest-ranked) member holding a majority-count intent wins
  for (std::size_t i = 0; i < k; ++i) {
    const auto& intent = store.entries[ranked[i].second].intent;
    if (votes[intent] == best) return intent;
  }
  return store.entries[ranked[0].second].intent;
}

EvalReport evaluate(const EncoderParams& params,
                    const std::vector<AugmentedPair>& train_pairs,
                    const std::vector<Template>& templates,
                    const Corpus& test_corpus, double lambda_comp, std::size_t k,
                    bool include_templates, bool alignment_enabled) {
  if (test_corpus.utterances.empty()) throw InferError("empty test set");
  EmbeddingStore store = build_store(params, train_pairs, templates,
                                     include_templates, lambda_comp,
                                     alignment_enabled);
  EvalReport report;
  report.dataset = test_corpus.name;
  report.lambda_comp = lambda_comp;
  report.k = k;
  report.include_templates = include_templates;

  std::size_t correct = 0;
  for (const auto& u : test_corpus.utterances) {
    Representation q = encode(params, u.tokens, Source::utterance);
    std::string predicted = knn_classify(store, q, k);
    auto& [c, t] = report.per_intent[u.intent];
    ++t;
    if (predicted == u.intent) {
      ++c;
      ++correct;
    }
  }
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(test_corpus.utterances.size());
  return report;
}

double select_lambda(const EncoderParams& params,
                     const std::vector<AugmentedPair>& train_pairs,
                     const std::vector<Template>& templates,
                     const Corpus& validation_corpus,
                     const std::vector<double>& candidates, std::size_t k,
                     bool include_templates, bool alignment_enabled) {
  if (candidates.empty()) throw InferError("no lambda candidates");
  double best_lambda = candidates.front();
  double best_acc = -1.0;
  for (double lam : candidates) {
    double acc = evaluate(params, train_pairs, templates, validation_corpus, lam,
                          k, include_templates, alignment_enabled)
                     .accuracy;
    if (acc > best_acc || (acc == best_acc && lam < best_lambda)) {
      best_acc = acc;
      best_lambda = lam;
    }
  }
  return best_lambda;
}

void save_store(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InferError("cannot open for writing: " + path);
  out << "temba-store v1\n";
  out << "dim " << store.dim << " count " << store.entries.size() << '\n';
  char buf[64];
  for (const auto& e : store.entries) {
    out << e.id << ' ' << e.intent << ' '
        << (e.source == Source::utterance ? "utterance" : "template");
    for (double x : e.vector) {
      std::snprintf(buf, sizeof(buf), " %.17g", x);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw InferError("write failed: " + path);
}

EmbeddingStore load_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InferError("cannot open store: " + path);
  std::string magic, version, key;
  in >> magic >> version;
  if (magic != "temba-store" || version != "v1")
    throw InferError("not a recognized store file: " + path);
  EmbeddingStore store;
  std::size_t count = 0;
  in >> key >> store.dim;
  if (key != "dim") throw InferError("store parse error");
  in >> key >> count;
  if (key != "count") throw InferError("store parse error");
  for (std::size_t i = 0; i < count; ++i) {
    StoreEntry e;
    std::string source;
    in >> e.id >> e.intent >> source;
    e.source = source == "template" ? Source::template_ : Source::utterance;
    e.vector.resize(store.dim);
    for (auto& x : e.vector)
      if (!(in >> x)) throw InferError("store truncated: " + path);
    store.entries.push_back(std::move(e));
  }
  return store;
}

void save_report(const EvalReport& report, const std::string& path) {
  nlohmann::json rec;
  rec["dataset"] = report.dataset;
  rec["lambda"] = report.lambda_comp;
  rec["k"] = report.k;
  rec["include_templates"] = report.include_templates;
  rec["accuracy"] = report.accuracy;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [intent, ct] : report.per_intent) {
    per[intent] = {{"correct", ct.first}, {"total", ct.second}};
  }
  rec["per_intent"] = per;
  std::ofstream out(path);
  if (!out) throw InferError("cannot open for writing: " + path);
  out << rec.dump(2) << '\n';
}

}  // namespace temba
