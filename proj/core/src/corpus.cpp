#include "temba/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace temba {

using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation" || s == "valid" || s == "dev") return Split::validation;
  if (s == "test") return Split::test;
  throw CorpusError("unknown split name: " + s);
}

std::string Utterance::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& raw) {
  auto is_punct = [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  };
  std::vector<std::string> out;
  std::istringstream in(raw);
  std::string word;
  while (in >> word) {
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    std::size_t lo = 0, hi = word.size();
    while (lo < hi && is_punct(word[lo])) ++lo;
    while (hi > lo && is_punct(word[hi - 1])) --hi;
    for (std::size_t i = 0; i < lo; ++i) out.push_back(std::string(1, word[i]));
    if (hi > lo) out.push_back(word.substr(lo, hi - lo));
    for (std::size_t i = hi; i < word.size(); ++i)
      out.push_back(std::string(1, word[i]));
  }
  return out;
}

void validate_utterance(const Utterance& u) {
  if (u.tokens.empty())
    throw CorpusError("utterance '" + u.id + "': tokens empty");
  if (u.id.empty()) throw CorpusError("utterance with empty id");
  auto spans = u.slots;
  std::sort(spans.begin(), spans.end(),
            [](const SlotSpan& a, const SlotSpan& b) { return a.start < b.start; });
  std::size_t prev_end = 0;
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > u.tokens.size())
      throw CorpusError("utterance '" + u.id + "': span out of bounds");
    if (s.start < prev_end)
      throw CorpusError("utterance '" + u.id + "': overlapping spans");
    if (s.category.empty())
      throw CorpusError("utterance '" + u.id + "': empty slot category");
    prev_end = s.end;
  }
}

std::vector<SlotSpan> bio_to_spans(const std::vector<std::string>& tags) {
  std::vector<SlotSpan> spans;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t == "O") continue;
    if (t.size() < 3 || t[1] != '-')
      throw CorpusError("malformed BIO tag: " + t);
    std::string cat = t.substr(2);
    if (t[0] == 'B') {
      spans.push_back({i, i + 1, cat});
    } else if (t[0] == 'I') {
      if (spans.empty() || spans.back().end != i || spans.back().category != cat)
        throw CorpusError("dangling I- tag at position " + std::to_string(i));
      spans.back().end = i + 1;
    } else {
      throw CorpusError("malformed BIO tag: " + t);
    }
  }
  return spans;
}

namespace {

Utterance parse_record(const json& rec) {
  Utterance u;
  u.id = rec.at("id").get<std::string>();
  u.tokens = rec.at("tokens").get<std::vector<std::string>>();
  u.intent = rec.at("intent").get<std::string>();
  if (rec.contains("origin")) {
    std::string o = rec["origin"].get<std::string>();
    if (o == "original") u.origin = Origin::original;
    else if (o == "synthetic") u.origin = Origin::synthetic;
    else throw CorpusError("unknown origin: " + o);
  }
  if (rec.contains("bio")) {
    u.slots = bio_to_spans(rec["bio"].get<std::vector<std::string>>());
  } else if (rec.contains("slots")) {
    for (const auto& s : rec["slots"]) {
      if (!s.is_array() || s.size() != 3)
        throw CorpusError("slot must be a [start,end,category] triple");
      u.slots.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>(),
                         s[2].get<std::string>()});
    }
  }
  return u;
}

}  // namespace

Corpus load_corpus(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path);
  Corpus corpus;
  corpus.name = path;
  corpus.split = split;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Utterance u;
    try {
      u = parse_record(json::parse(line));
      validate_utterance(u);
    } catch (const json::exception& e) {
      throw CorpusError(path + ":" + std::to_string(lineno) +
                        ": malformed record: " + e.what());
    } catch (const CorpusError& e) {
      throw CorpusError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen_ids.insert(u.id).second)
      throw CorpusError(path + ":" + std::to_string(lineno) +
                        ": duplicate id '" + u.id + "'");
    corpus.intent_set.insert(u.intent);
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot open for writing: " + path);
  for (const auto& u : corpus.utterances) {
    json rec;
    rec["id"] = u.id;
    rec["tokens"] = u.tokens;
    json slots = json::array();
    for (const auto& s : u.slots)
      slots.push_back(json::array({s.start, s.end, s.category}));
    rec["slots"] = slots;
    rec["intent"] = u.intent;
    rec["origin"] = u.origin == Origin::original ? "original" : "synthetic";
    out << rec.dump() << '\n';
  }
  if (!out) throw CorpusError("write failed: " + path);
}

}  // namespace temba
