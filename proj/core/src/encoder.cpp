#include "temba/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace temba {

std::uint64_t Rng::next() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t seed_hash(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                        std::uint64_t c, std::uint64_t d) {
  Rng rng(base ^ 0x5bf03635aca1f9e7ULL);
  std::uint64_t h = rng.next();
  for (std::uint64_t x : {a, b, c, d}) {
    h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    Rng mix(h);
    h = mix.next();
  }
  return h;
}

std::size_t Vocab::lookup(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? unknown_index() : it->second;
}

void Vocab::add(const std::string& token) {
  if (index.emplace(token, tokens.size()).second) tokens.push_back(token);
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& texts,
                   const std::vector<std::string>& categories) {
  Vocab v;
  v.add(kUnknown);
  v.add(kSlot);
  for (const auto& cat : categories) v.add("{" + cat + "}");
  for (const auto& text : texts)
    for (const auto& tok : text) v.add(tok);
  return v;
}

std::vector<std::string> split_on_spaces(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

EncoderParams init_params(const Vocab& vocab, std::size_t dim,
                          double dropout_rate, std::uint64_t seed) {
  if (dim < 1) throw EncoderError("dimension must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw EncoderError("dropout rate must be in [0, 1)");
  EncoderParams p;
  p.vocab = vocab;
  p.dim = dim;
  p.dropout_rate = dropout_rate;
  double bound = 0.5 / std::sqrt(static_cast<double>(dim));
  Rng rng(seed);
  p.embed.resize(vocab.size() * dim);
  for (auto& w : p.embed) w = rng.uniform(-bound, bound);
  p.w_pool.resize(dim * dim);
  for (auto& w : p.w_pool) w = rng.uniform(-bound, bound);
  p.b_pool.assign(dim, 0.0);
  p.w_align.resize(dim * dim);
  for (auto& w : p.w_align) w = rng.uniform(-bound, bound);
  p.b_align.assign(dim, 0.0);
  return p;
}

Representation encode(const EncoderParams& params,
                      const std::vector<std::string>& tokens, Source source,
                      std::optional<std::uint64_t> dropout_seed) {
  if (tokens.empty()) throw EncoderError("empty input");
  const std::size_t d = params.dim;
  std::vector<double> pooled(d, 0.0);

  bool use_dropout = dropout_seed.has_value() && params.dropout_rate > 0.0;
  Rng rng(dropout_seed.value_or(0));
  const double keep = 1.0 - params.dropout_rate;

  for (const auto& tok : tokens) {
    std::size_t row = params.vocab.lookup(tok) * d;
    if (use_dropout) {
      for (std::size_t j = 0; j < d; ++j) {
        double mask = rng.uniform() < params.dropout_rate ? 0.0 : 1.0 / keep;
        pooled[j] += params.embed[row + j] * mask;
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) pooled[j] += params.embed[row + j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  for (auto& x : pooled) x *= inv_n;

  Representation rep;
  rep.source = source;
  rep.v.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = params.b_pool[i];
    const double* row = params.w_pool.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * pooled[j];
    rep.v[i] = std::tanh(acc);
  }
  return rep;
}

Representation align_template(const EncoderParams& params,
                              const Representation& t, bool enabled) {
  if (t.source != Source::template_)
    throw EncoderError("align_template requires a template representation");
  if (!enabled) return t;
  const std::size_t d = params.dim;
  Representation out;
  out.source = Source::template_;
  out.v.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = params.b_align[i];
    const double* row = params.w_align.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * t.v[j];
    out.v[i] = std::tanh(acc);
  }
  return out;
}

namespace {

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  char buf[64];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%a", v[i]);
    if (i) out << ' ';
    out << buf;
  }
  out << '\n';
}

std::vector<double> read_doubles(std::istream& in, std::size_t n,
                                 const std::string& what) {
  std::vector<double> v(n);
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> tok)) throw EncoderError("checkpoint truncated in " + what);
    v[i] = std::strtod(tok.c_str(), nullptr);
  }
  return v;
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw EncoderError("cannot open for writing: " + path);
  out << "temba-checkpoint v1\n";
  out << "dim " << params.dim << '\n';
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", params.dropout_rate);
  out << "dropout " << buf << '\n';
  out << "vocab " << params.vocab.size() << '\n';
  for (const auto& tok : params.vocab.tokens) out << tok << '\n';
  out << "embed\n";
  write_doubles(out, params.embed);
  out << "w_pool\n";
  write_doubles(out, params.w_pool);
  out << "b_pool\n";
  write_doubles(out, params.b_pool);
  out << "w_align\n";
  write_doubles(out, params.w_align);
  out << "b_align\n";
  write_doubles(out, params.b_align);
  if (!out) throw EncoderError("write failed: " + path);
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EncoderError("cannot open checkpoint: " + path);
  std::string magic, version, key;
  in >> magic >> version;
  if (magic != "temba-checkpoint" || version != "v1")
    throw EncoderError("not a recognized checkpoint: " + path);
  EncoderParams p;
  std::size_t vocab_size = 0;
  in >> key >> p.dim;
  if (key != "dim") throw EncoderError("checkpoint parse error: expected dim");
  std::string rate;
  in >> key >> rate;
  if (key != "dropout") throw EncoderError("checkpoint parse error: expected dropout");
  p.dropout_rate = std::strtod(rate.c_str(), nullptr);
  in >> key >> vocab_size;
  if (key != "vocab") throw EncoderError("checkpoint parse error: expected vocab");
  std::string tok;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (!(in >> tok)) throw EncoderError("checkpoint truncated in vocab");
    p.vocab.add(tok);
  }
  auto expect = [&](const char* name) {
    if (!(in >> key) || key != name)
      throw EncoderError(std::string("checkpoint parse error: expected ") + name);
  };
  const std::size_t d = p.dim;
  expect("embed");
  p.embed = read_doubles(in, vocab_size * d, "embed");
  expect("w_pool");
  p.w_pool = read_doubles(in, d * d, "w_pool");
  expect("b_pool");
  p.b_pool = read_doubles(in, d, "b_pool");
  expect("w_align");
  p.w_align = read_doubles(in, d * d, "w_align");
  expect("b_align");
  p.b_align = read_doubles(in, d, "b_align");
  return p;
}

}  // namespace temba
