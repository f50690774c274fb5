#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "temba/corpus.hpp"

namespace temba {

/// One entity value as a token sequence, with its training-set frequency.
struct EntityValue {
  std::vector<std::string> tokens;
  std::size_t frequency = 0;

  bool operator==(const EntityValue&) const = default;
};

/// Per-category entity catalog. Values are unique within a category and
/// sorted by descending frequency, ties broken lexicographically.
struct EntityBook {
  std::map<std::string, std::vector<EntityValue>> entries;

  std::size_t category_count() const { return entries.size(); }
  std::size_t value_count() const;
};

/// A template token: either a literal or a category placeholder.
struct TemplateToken {
  bool is_slot = false;
  std::string text;  // literal token, or category name when is_slot

  bool operator==(const TemplateToken&) const = default;
};

struct Template {
  std::vector<TemplateToken> tokens;
  std::vector<std::string> source_ids;
  std::string intent;

  std::vector<std::string> categories() const;
  std::size_t placeholder_count() const;
};

enum class RenderMode { category_tokens, single_slot_token };

struct AugmentStrategy {
  std::size_t top_k = 5;
  RenderMode render_mode = RenderMode::category_tokens;
  std::size_t max_permutations_per_template =
      std::numeric_limits<std::size_t>::max();
};

/// A synthetic or original utterance bound to the template it instantiates.
struct AugmentedPair {
  Utterance utterance;
  std::size_t template_id = 0;
  std::string rendered_template;
};

struct AugmentStats {
  std::size_t entity_categories = 0;
  std::size_t entity_values = 0;
  std::size_t templates = 0;
  std::size_t original_utterances = 0;
  std::size_t total_utterances = 0;
  std::size_t synthetic_utterances = 0;
  double ut_ratio = 0.0;       // total / templates
  bool ut_defined = false;     // false when templates == 0
  std::size_t ut_multiplier = 0;  // ut_ratio rounded to integer
};

EntityBook build_entity_book(const Corpus& corpus);

Template extract_template(const Utterance& u);

/// Merges templates equal in (tokens, intent); source_ids are unioned in
/// order. Output order is first occurrence.
std::vector<Template> dedup_templates(const std::vector<Template>& templates);

std::vector<std::vector<std::string>> top_k_values(const EntityBook& book,
                                                   const std::string& category,
                                                   std::size_t k);

/// Cartesian product of top-k value lists over the template's placeholders.
/// Originals come first (origin=original); synthetic products that coincide
/// with an original of the same template are not emitted again. A template
/// whose category is missing from the book yields only its originals.
std::vector<AugmentedPair> permute(const Template& tmpl, std::size_t template_id,
                                   const std::vector<Utterance>& originals,
                                   const EntityBook& book,
                                   const AugmentStrategy& strategy);

std::string render_template_text(const Template& tmpl, RenderMode mode);

/// Greedy left-to-right longest-match of entity values in the book.
/// Case-insensitive; matched spans never overlap.
std::vector<SlotSpan> detect_slots_gazetteer(
    const std::vector<std::string>& tokens, const EntityBook& book);

AugmentStats augmentation_stats(const Corpus& originals,
                                const std::vector<Template>& templates,
                                const std::vector<AugmentedPair>& pairs,
                                const EntityBook& book);

/// Full pipeline over one corpus: entity book, merged templates, and all
/// augmented pairs in template order.
struct AugmentResult {
  EntityBook book;
  std::vector<Template> templates;
  std::vector<AugmentedPair> pairs;
};
AugmentResult augment_corpus(const Corpus& corpus, const AugmentStrategy& strategy);

// File formats (External Interfaces).
void save_entity_book(const EntityBook& book, const std::string& path);
EntityBook load_entity_book(const std::string& path);
void save_templates(const std::vector<Template>& templates, const std::string& path);
std::vector<Template> load_templates(const std::string& path);
void save_augmented(const std::vector<AugmentedPair>& pairs, const std::string& path);
/// Loads an augmented corpus (corpus format + template_id) and re-renders
/// template text from the given templates under `mode`.
std::vector<AugmentedPair> load_augmented(const std::string& path,
                                          const std::vector<Template>& templates,
                                          RenderMode mode);

}  // namespace temba
