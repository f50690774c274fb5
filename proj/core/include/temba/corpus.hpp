#pragma once

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace temba {

/// Error raised on malformed or invalid corpus data. `where` carries a
/// location hint (file:line) when the failure comes from a file.
class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Split { train, validation, test };
enum class Origin { original, synthetic };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// Half-open token range [start, end) tagged with an entity category.
struct SlotSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string category;

  bool operator==(const SlotSpan&) const = default;
};

struct Utterance {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<SlotSpan> slots;  // pairwise non-overlapping, in bounds
  std::string intent;
  Origin origin = Origin::original;

  bool operator==(const Utterance&) const = default;

  /// Tokens joined with single spaces.
  std::string text() const;
};

struct Corpus {
  std::string name;
  Split split = Split::train;
  std::vector<Utterance> utterances;
  std::set<std::string> intent_set;
};

/// Lowercase, detach leading/trailing punctuation into separate tokens,
/// split on whitespace. Used for raw (un-annotated) text inputs.
std::vector<std::string> tokenize(const std::string& raw);

/// Throws CorpusError if any Utterance invariant is violated.
void validate_utterance(const Utterance& u);

/// Reads a line-delimited corpus file. Each line is a JSON object with
/// fields id, tokens, slots (span triples) or bio (tag strings), intent,
/// and optional origin. Errors carry the offending line number.
Corpus load_corpus(const std::string& path, Split split);

void save_corpus(const Corpus& corpus, const std::string& path);

/// Converts a BIO tag sequence to spans. Tags are "O", "B-CAT", "I-CAT".
/// An "I-" tag without a matching open span is an error.
std::vector<SlotSpan> bio_to_spans(const std::vector<std::string>& tags);

}  // namespace temba
