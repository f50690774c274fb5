#include "temba/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace temba {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

}  // namespace

std::size_t EntityBook::value_count() const {
  std::size_t n = 0;
  for (const auto& [cat, values] : entries) n += values.size();
  return n;
}

std::vector<std::string> Template::categories() const {
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (t.is_slot) out.push_back(t.text);
  return out;
}

std::size_t Template::placeholder_count() const {
  std::size_t n = 0;
  for (const auto& t : tokens) n += t.is_slot ? 1 : 0;
  return n;
}

EntityBook build_entity_book(const Corpus& corpus) {
  std::map<std::string, std::map<std::string, std::pair<std::vector<std::string>, std::size_t>>>
      counts;  // category -> joined value -> (tokens, freq)
  for (const auto& u : corpus.utterances) {
    for (const auto& s : u.slots) {
      std::vector<std::string> value(u.tokens.begin() + s.start,
                                     u.tokens.begin() + s.end);
      auto& slot = counts[s.category][join(value)];
      slot.first = value;
      ++slot.second;
    }
  }
  EntityBook book;
  for (auto& [cat, values] : counts) {
    std::vector<EntityValue> list;
    for (auto& [key, v] : values) list.push_back({v.first, v.second});
    std::sort(list.begin(), list.end(),
              [](const EntityValue& a, const EntityValue& b) {
                if (a.frequency != b.frequency) return a.frequency > b.frequency;
                return a.tokens < b.tokens;
              });
    book.entries[cat] = std::move(list);
  }
  return book;
}

Template extract_template(const Utterance& u) {
  auto spans = u.slots;
  std::sort(spans.begin(), spans.end(),
            [](const SlotSpan& a, const SlotSpan& b) { return a.start < b.start; });
  Template t;
  t.intent = u.intent;
  t.source_ids = {u.id};
  std::size_t pos = 0;
  for (const auto& s : spans) {
    for (; pos < s.start; ++pos) t.tokens.push_back({false, u.tokens[pos]});
    t.tokens.push_back({true, s.category});
    pos = s.end;
  }
  for (; pos < u.tokens.size(); ++pos) t.tokens.push_back({false, u.tokens[pos]});
  return t;
}

std::vector<Template> dedup_templates(const std::vector<Template>& templates) {
  auto key_of = [](const Template& t) {
    std::string key = t.intent;
    for (const auto& tok : t.tokens) {
      key += tok.is_slot ? "\x01" : "\x02";
      key += tok.text;
    }
    return key;
  };
  std::vector<Template> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& t : templates) {
    auto [it, inserted] = index.emplace(key_of(t), out.size());
    if (inserted) {
      out.push_back(t);
    } else {
      auto& ids = out[it->second].source_ids;
      for (const auto& id : t.source_ids)
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  }
  return out;
}

std::vector<std::vector<std::string>> top_k_values(const EntityBook& book,
                                                   const std::string& category,
                                                   std::size_t k) {
  std::vector<std::vector<std::string>> out;
  auto it = book.entries.find(category);
  if (it == book.entries.end()) return out;
  for (std::size_t i = 0; i < it->second.size() && i < k; ++i)
    out.push_back(it->second[i].tokens);
  return out;
}

std::string render_template_text(const Template& tmpl, RenderMode mode) {
  std::string out;
  bool first = true;
  for (const auto& tok : tmpl.tokens) {
    if (!first) out += ' ';
    first = false;
    if (tok.is_slot)
      out += mode == RenderMode::category_tokens ? "{" + tok.text + "}" : "{SLOT}";
    else
      out += tok.text;
  }
  return out;
}

std::vector<AugmentedPair> permute(const Template& tmpl, std::size_t template_id,
                                   const std::vector<Utterance>& originals,
                                   const EntityBook& book,
                                   const AugmentStrategy& strategy) {
  std::string rendered = render_template_text(tmpl, strategy.render_mode);
  std::vector<AugmentedPair> out;
  for (const auto& u : originals)
    out.push_back({u, template_id, rendered});

  std::vector<std::string> cats = tmpl.categories();
  if (cats.empty()) return out;

  std::vector<std::vector<std::vector<std::string>>> choices;
  for (const auto& cat : cats) {
    auto values = top_k_values(book, cat, strategy.top_k);
    if (values.empty()) {
      std::cerr << "warning: category '" << cat
                << "' absent from entity book; template skipped\n";
      return out;
    }
    choices.push_back(std::move(values));
  }

  std::unordered_set<std::string> original_texts;
  for (const auto& u : originals) original_texts.insert(u.text());

  std::vector<std::size_t> idx(cats.size(), 0);
  std::size_t emitted = 0, serial = 0;
  while (true) {
    Utterance u;
    u.intent = tmpl.intent;
    u.origin = Origin::synthetic;
    std::size_t slot_pos = 0;
    for (const auto& tok : tmpl.tokens) {
      if (!tok.is_slot) {
        u.tokens.push_back(tok.text);
      } else {
        const auto& value = choices[slot_pos][idx[slot_pos]];
        u.slots.push_back({u.tokens.size(), u.tokens.size() + value.size(), tok.text});
        u.tokens.insert(u.tokens.end(), value.begin(), value.end());
        ++slot_pos;
      }
    }
    if (!original_texts.count(u.text())) {
      if (emitted >= strategy.max_permutations_per_template) break;
      u.id = "t" + std::to_string(template_id) + "-syn-" + std::to_string(serial);
      out.push_back({std::move(u), template_id, rendered});
      ++emitted;
    }
    ++serial;
    // advance the mixed-radix counter
    std::size_t pos = idx.size();
    while (pos > 0) {
      --pos;
      if (++idx[pos] < choices[pos].size()) break;
      idx[pos] = 0;
      if (pos == 0) return out;
    }
  }
  return out;
}

std::vector<SlotSpan> detect_slots_gazetteer(
    const std::vector<std::string>& tokens, const EntityBook& book) {
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(lower(t));

  std::vector<SlotSpan> spans;
  std::size_t pos = 0;
  while (pos < tokens.size()) {
    std::size_t best_len = 0;
    std::string best_cat;
    for (const auto& [cat, values] : book.entries) {
      for (const auto& v : values) {
        if (v.tokens.size() <= best_len) continue;
        if (pos + v.tokens.size() > tokens.size()) continue;
        bool match = true;
        for (std::size_t i = 0; i < v.tokens.size() && match; ++i)
          match = lowered[pos + i] == lower(v.tokens[i]);
        if (match) {
          best_len = v.tokens.size();
          best_cat = cat;
        }
      }
    }
    if (best_len > 0) {
      spans.push_back({pos, pos + best_len, best_cat});
      pos += best_len;
    } else {
      ++pos;
    }
  }
  return spans;
}

AugmentStats augmentation_stats(const Corpus& originals,
                                const std::vector<Template>& templates,
                                const std::vector<AugmentedPair>& pairs,
                                const EntityBook& book) {
  AugmentStats st;
  st.entity_categories = book.category_count();
  st.entity_values = book.value_count();
  st.templates = templates.size();
  st.original_utterances = originals.utterances.size();
  st.total_utterances = pairs.size();
  for (const auto& p : pairs)
    if (p.utterance.origin == Origin::synthetic) ++st.synthetic_utterances;
  if (st.templates > 0) {
    st.ut_defined = true;
    st.ut_ratio = static_cast<double>(st.total_utterances) /
                  static_cast<double>(st.templates);
    st.ut_multiplier = static_cast<std::size_t>(std::llround(st.ut_ratio));
  }
  return st;
}

AugmentResult augment_corpus(const Corpus& corpus, const AugmentStrategy& strategy) {
  AugmentResult result;
  result.book = build_entity_book(corpus);

  std::vector<Template> raw;
  raw.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) raw.push_back(extract_template(u));
  result.templates = dedup_templates(raw);

  std::unordered_map<std::string, const Utterance*> by_id;
  for (const auto& u : corpus.utterances) by_id[u.id] = &u;

  for (std::size_t ti = 0; ti < result.templates.size(); ++ti) {
    const auto& tmpl = result.templates[ti];
    std::vector<Utterance> originals;
    for (const auto& id : tmpl.source_ids) originals.push_back(*by_id.at(id));
    auto pairs = permute(tmpl, ti, originals, result.book, strategy);
    result.pairs.insert(result.pairs.end(), pairs.begin(), pairs.end());
  }
  return result;
}

void save_entity_book(const EntityBook& book, const std::string& path) {
  json obj = json::object();
  for (const auto& [cat, values] : book.entries) {
    json list = json::array();
    for (const auto& v : values)
      list.push_back(json::array({join(v.tokens), v.frequency}));
    obj[cat] = list;
  }
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot open for writing: " + path);
  out << obj.dump(2) << '\n';
}

EntityBook load_entity_book(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open entity book: " + path);
  json obj = json::parse(in);
  EntityBook book;
  for (auto& [cat, list] : obj.items()) {
    std::vector<EntityValue> values;
    for (const auto& pair : list) {
      std::istringstream ss(pair[0].get<std::string>());
      EntityValue v;
      std::string tok;
      while (ss >> tok) v.tokens.push_back(tok);
      v.frequency = pair[1].get<std::size_t>();
      values.push_back(std::move(v));
    }
    book.entries[cat] = std::move(values);
  }
  return book;
}

void save_templates(const std::vector<Template>& templates, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot open for writing: " + path);
  for (const auto& t : templates) {
    json rec;
    json toks = json::array();
    for (const auto& tok : t.tokens) {
      if (tok.is_slot)
        toks.push_back(json{{"slot", tok.text}});
      else
        toks.push_back(tok.text);
    }
    rec["tokens"] = toks;
    rec["intent"] = t.intent;
    rec["source_ids"] = t.source_ids;
    out << rec.dump() << '\n';
  }
}

std::vector<Template> load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open templates file: " + path);
  std::vector<Template> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      Template t;
      for (const auto& tok : rec.at("tokens")) {
        if (tok.is_object())
          t.tokens.push_back({true, tok.at("slot").get<std::string>()});
        else
          t.tokens.push_back({false, tok.get<std::string>()});
      }
      t.intent = rec.at("intent").get<std::string>();
      t.source_ids = rec.at("source_ids").get<std::vector<std::string>>();
      if (t.source_ids.empty())
        throw CorpusError("template without source ids");
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw CorpusError(path + ":" + std::to_string(lineno) +
                        ": malformed template: " + e.what());
    }
  }
  return out;
}

void save_augmented(const std::vector<AugmentedPair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot open for writing: " + path);
  for (const auto& p : pairs) {
    const auto& u = p.utterance;
    json rec;
    rec["id"] = u.id;
    rec["tokens"] = u.tokens;
    json slots = json::array();
    for (const auto& s : u.slots)
      slots.push_back(json::array({s.start, s.end, s.category}));
    rec["slots"] = slots;
    rec["intent"] = u.intent;
    rec["origin"] = u.origin == Origin::original ? "original" : "synthetic";
    rec["template_id"] = p.template_id;
    out << rec.dump() << '\n';
  }
}

std::vector<AugmentedPair> load_augmented(const std::string& path,
                                          const std::vector<Template>& templates,
                                          RenderMode mode) {
  Corpus c = load_corpus(path, Split::train);
  // re-read template_id column
  std::ifstream in(path);
  std::vector<AugmentedPair> out;
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    std::size_t tid = rec.at("template_id").get<std::size_t>();
    if (tid >= templates.size())
      throw CorpusError(path + ": template_id " + std::to_string(tid) +
                        " out of range");
    out.push_back({c.utterances.at(i), tid,
                   render_template_text(templates[tid], mode)});
    ++i;
  }
  return out;
}

}  // namespace temba
