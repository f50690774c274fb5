#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "temba/corpus.hpp"

namespace temba {

class EncoderError : public std::runtime_error {
 public:
  explicit EncoderError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Deterministic splitmix64 stream; identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)

 private:
  std::uint64_t state_;
};

/// Stable 64-bit hash used to derive per-role seeds from labeled inputs.
std::uint64_t seed_hash(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                        std::uint64_t c, std::uint64_t d);

struct Vocab {
  std::vector<std::string> tokens;  // index -> token; index 0 is <unk>
  std::unordered_map<std::string, std::size_t> index;

  static constexpr const char* kUnknown = "<unk>";
  static constexpr const char* kSlot = "{SLOT}";

  std::size_t size() const { return tokens.size(); }
  std::size_t unknown_index() const { return 0; }
  std::size_t lookup(const std::string& token) const;
  void add(const std::string& token);

  /// Vocabulary over all given texts, plus <unk>, {SLOT}, and one
  /// {CATEGORY} row per category name.
  static Vocab build(const std::vector<std::vector<std::string>>& texts,
                     const std::vector<std::string>& categories);
};

enum class Source { utterance, template_ };

struct Representation {
  std::vector<double> v;
  Source source = Source::utterance;
};

/// All trainable weights: token embeddings, tanh pooler MLP, and the
/// template alignment MLP.
struct EncoderParams {
  Vocab vocab;
  std::size_t dim = 64;
  double dropout_rate = 0.1;
  std::vector<double> embed;    // |V| x dim, row-major
  std::vector<double> w_pool;   // dim x dim, row-major
  std::vector<double> b_pool;   // dim
  std::vector<double> w_align;  // dim x dim
  std::vector<double> b_align;  // dim
};

EncoderParams init_params(const Vocab& vocab, std::size_t dim,
                          double dropout_rate, std::uint64_t seed);

/// Mean of (dropout-masked, inverse-scaled) token embeddings through the
/// tanh pooler. Dropout applies only when a seed is given.
Representation encode(const EncoderParams& params,
                      const std::vector<std::string>& tokens, Source source,
                      std::optional<std::uint64_t> dropout_seed = std::nullopt);

/// t' = tanh(W_A t + b_A) when enabled, identity otherwise. Errors on a
/// non-template representation.
Representation align_template(const EncoderParams& params,
                              const Representation& t, bool enabled);

/// Checkpoint IO; hexfloat text, bit-exact round trip.
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

std::vector<std::string> split_on_spaces(const std::string& text);

}  // namespace temba
