#include "dpcr/stream.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dpcr/errors.hpp"
#include "dpcr/rng.hpp"

namespace dpcr {

namespace {

constexpr uint64_t kMaxLength = 1ull << 31;     // keeps F2 <= T^2 in int64
constexpr uint64_t kMaxUniverse = 100'000'000;  // oracle-backed runs
constexpr uint64_t kDenseLimit = 1'000'000;

}  // namespace

const char* model_name(StreamModel model) {
  switch (model) {
    case StreamModel::InsertionOnly:
      return "insertion";
    case StreamModel::StrictTurnstile:
      return "strict";
    case StreamModel::GeneralTurnstile:
      return "general";
  }
  return "unknown";
}

StreamModel model_from_name(const std::string& name) {
  if (name == "insertion") return StreamModel::InsertionOnly;
  if (name == "strict") return StreamModel::StrictTurnstile;
  if (name == "general") return StreamModel::GeneralTurnstile;
  throw InputError("unknown stream model: " + name);
}

void StreamMeta::validate() const {
  if (universe < 1) throw InputError("universe size must be >= 1");
  if (length < 1) throw InputError("stream length must be >= 1");
  if (length > kMaxLength)
    throw InputError("stream length above 2^31 would overflow exact F2");
}

ExactOracle::ExactOracle(const StreamMeta& meta) : meta_(meta) {
  meta_.validate();
  if (meta_.universe > kMaxUniverse)
    throw InputError("oracle-backed runs are capped at a 10^8 universe");
  if (meta_.universe <= kDenseLimit) dense_.assign(meta_.universe + 1, 0);
}

int64_t* ExactOracle::slot(uint64_t element) {
  if (!dense_.empty()) return &dense_[element];
  return &sparse_[element];
}

int64_t ExactOracle::frequency(uint64_t element) const {
  if (element < 1 || element > meta_.universe) return 0;
  if (!dense_.empty()) return dense_[element];
  auto it = sparse_.find(element);
  return it == sparse_.end() ? 0 : it->second;
}

void ExactOracle::update(const StreamUpdate& u) {
  ++timestep_;
  if (u.element < 1 || u.element > meta_.universe)
    throw InputError("element " + std::to_string(u.element) +
                     " outside universe at timestep " +
                     std::to_string(timestep_));
  if (u.sign < -1 || u.sign > 1)
    throw InputError("sign outside {-1,0,+1} at timestep " +
                     std::to_string(timestep_));
  if (meta_.model == StreamModel::InsertionOnly && u.sign != 1)
    throw InputError("non-insertion under insertion-only model at timestep " +
                     std::to_string(timestep_));
  int64_t* x = slot(u.element);
  const int64_t before = *x;
  const int64_t after = before + u.sign;
  if (meta_.model == StreamModel::StrictTurnstile && after < 0)
    throw InputError("strict-turnstile violation: element " +
                     std::to_string(u.element) + " negative at timestep " +
                     std::to_string(timestep_));
  *x = after;
  distinct_ += (after != 0) - (before != 0);
  second_moment_ += 2 * before * u.sign + (u.sign != 0 ? 1 : 0);
}

const char* kind_name(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::UniformInsertDelete:
      return "uniform-insert-delete";
    case GeneratorKind::SingletonHeavy:
      return "singleton-heavy";
    case GeneratorKind::PhasedGrowShrink:
      return "phased-grow-shrink";
    case GeneratorKind::F2LowerBound:
      return "f2-lowerbound";
  }
  return "unknown";
}

GeneratorKind kind_from_name(const std::string& name) {
  if (name == "uniform-insert-delete") return GeneratorKind::UniformInsertDelete;
  if (name == "singleton-heavy") return GeneratorKind::SingletonHeavy;
  if (name == "phased-grow-shrink") return GeneratorKind::PhasedGrowShrink;
  if (name == "f2-lowerbound") return GeneratorKind::F2LowerBound;
  throw InputError("unknown generator kind: " + name);
}

namespace {

Stream gen_uniform(const StreamMeta& meta, uint64_t seed) {
  SeededRng rng(seed);
  std::unordered_map<uint64_t, int64_t> freq;
  Stream out;
  out.reserve(meta.length);
  for (uint64_t t = 0; t < meta.length; ++t) {
    const uint64_t a = 1 + rng.next_below(meta.universe);
    int sign = 1;
    if (meta.model == StreamModel::GeneralTurnstile) {
      sign = (rng.next_u64() & 1) ? 1 : -1;
    } else if (meta.model == StreamModel::StrictTurnstile) {
      if (freq[a] > 0 && (rng.next_u64() & 1)) sign = -1;
    }
    freq[a] += sign;
    out.push_back({a, sign});
  }
  return out;
}

Stream gen_singleton_heavy(const StreamMeta& meta, uint64_t /*seed*/) {
  if (meta.universe < 2)
    throw InputError("singleton-heavy needs a universe of at least 2");
  Stream out;
  out.reserve(meta.length);
  // Every other update pumps one heavy element; the rest insert fresh
  // singletons, wrapping around when the universe runs out.
  uint64_t next_single = 2;
  for (uint64_t t = 0; t < meta.length; ++t) {
    if (t % 2 == 0) {
      out.push_back({1, 1});
    } else {
      out.push_back({next_single, 1});
      next_single = next_single < meta.universe ? next_single + 1 : 2;
    }
  }
  return out;
}

Stream gen_phased(const StreamMeta& meta, uint64_t seed) {
  if (meta.model == StreamModel::InsertionOnly)
    throw InputError("phased-grow-shrink requires a turnstile model");
  SeededRng rng(seed);
  Stream out;
  out.reserve(meta.length);
  std::vector<uint64_t> live;  // insertion order, deleted LIFO
  const uint64_t phase = std::max<uint64_t>(1, meta.length / 8);
  bool growing = false;
  for (uint64_t t = 0; t < meta.length; ++t) {
    if (t % phase == 0) growing = !growing;
    if (live.empty()) growing = true;
    if (growing) {
      const uint64_t a = 1 + rng.next_below(meta.universe);
      live.push_back(a);
      out.push_back({a, 1});
    } else {
      const uint64_t a = live.back();
      live.pop_back();
      out.push_back({a, -1});
    }
  }
  return out;
}

}  // namespace

std::pair<Stream, Stream> f2_lower_bound_pair(uint64_t length) {
  if (length < 1) throw InputError("stream length must be >= 1");
  Stream base(length, StreamUpdate{1, 1});
  Stream neighbor = base;
  neighbor.back() = StreamUpdate{2, 1};
  return {base, neighbor};
}

Stream gen_stream(GeneratorKind kind, const StreamMeta& meta, uint64_t seed) {
  meta.validate();
  switch (kind) {
    case GeneratorKind::UniformInsertDelete:
      return gen_uniform(meta, seed);
    case GeneratorKind::SingletonHeavy:
      return gen_singleton_heavy(meta, seed);
    case GeneratorKind::PhasedGrowShrink:
      return gen_phased(meta, seed);
    case GeneratorKind::F2LowerBound: {
      if (meta.universe < 2)
        throw InputError("f2-lowerbound needs a universe of at least 2");
      return f2_lower_bound_pair(meta.length).first;
    }
  }
  throw InputError("unknown generator kind");
}

void write_stream(const StreamMeta& meta, const Stream& stream,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << "# n=" << meta.universe << " T=" << meta.length
      << " model=" << model_name(meta.model) << "\n";
  uint64_t t = 0;
  for (const auto& u : stream)
    out << ++t << ',' << u.element << ',' << u.sign << '\n';
  if (!out) throw InputError("write failed for " + path);
}

namespace {

uint64_t parse_u64(const std::string& text, const std::string& what,
                   size_t line_no) {
  try {
    size_t pos = 0;
    if (text.empty() || text[0] == '-') throw std::invalid_argument(text);
    const uint64_t v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line_no) + ": bad " + what +
                     " '" + text + "'");
  }
}

}  // namespace

std::pair<StreamMeta, Stream> read_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");

  StreamMeta meta;
  {
    unsigned long long n = 0, t = 0;
    char model[16] = {0};
    if (std::sscanf(line.c_str(), "# n=%llu T=%llu model=%15s", &n, &t,
                    model) != 3)
      throw InputError(path + ": line 1: malformed header '" + line + "'");
    meta.universe = n;
    meta.length = t;
    meta.model = model_from_name(model);
    meta.validate();
  }

  Stream stream;
  stream.reserve(meta.length);
  size_t line_no = 1;
  uint64_t expected_t = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string t_text, elem_text, sign_text;
    if (!std::getline(row, t_text, ',') || !std::getline(row, elem_text, ',') ||
        !std::getline(row, sign_text))
      throw InputError(path + ": line " + std::to_string(line_no) +
                       ": expected 't,element,sign'");
    const uint64_t t = parse_u64(t_text, "timestep", line_no);
    if (t != ++expected_t)
      throw InputError(path + ": line " + std::to_string(line_no) +
                       ": timestep " + std::to_string(t) +
                       " out of order (expected " +
                       std::to_string(expected_t) + ")");
    const uint64_t element = parse_u64(elem_text, "element", line_no);
    if (element < 1 || element > meta.universe)
      throw InputError(path + ": line " + std::to_string(line_no) +
                       ": element outside universe");
    int sign = 0;
    if (sign_text == "1" || sign_text == "+1")
      sign = 1;
    else if (sign_text == "-1")
      sign = -1;
    else if (sign_text == "0")
      sign = 0;
    else
      throw InputError(path + ": line " + std::to_string(line_no) +
                       ": sign '" + sign_text + "' outside {-1,0,+1}");
    if (meta.model == StreamModel::InsertionOnly && sign != 1)
      throw InputError(path + ": line " + std::to_string(line_no) +
                       ": non-insertion under insertion-only model");
    stream.push_back({element, sign});
  }
  if (stream.size() != meta.length)
    throw InputError(path + ": header declares T=" +
                     std::to_string(meta.length) + " but file has " +
                     std::to_string(stream.size()) + " updates");
  return {meta, stream};
}

}  // namespace dpcr
