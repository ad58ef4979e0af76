#include "promptcache/model.hpp"

#include <cmath>
#include <cstring>
#include <map>

#include "promptcache/tokenizer.hpp"
#include "json.hpp"

namespace pc::model {

// ---------------------------------------------------------------------------
// PRNG / hashing
// ---------------------------------------------------------------------------

uint64_t fnv1a64(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 14695981039346656037ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

const char* pos_name(PosEncoding p) {
  switch (p) {
    case PosEncoding::Rope: return "rope";
    case PosEncoding::Alibi: return "alibi";
    case PosEncoding::AbsTable: return "abs_table";
  }
  return "?";
}

PosEncoding pos_from_name(const std::string& s) {
  if (s == "rope") return PosEncoding::Rope;
  if (s == "alibi") return PosEncoding::Alibi;
  if (s == "abs_table") return PosEncoding::AbsTable;
  throw Error(ErrorCode::InvalidConfig, "unknown pos_encoding \"" + s + "\"");
}

}  // namespace

ModelConfig ModelConfig::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad config JSON: ") + e.what());
  }
  ModelConfig c;
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.head_dim = j.value("head_dim", c.head_dim);
  c.hidden = j.value("hidden", c.n_heads * c.head_dim);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.pos_encoding = pos_from_name(j.value("pos_encoding", "rope"));
  c.max_position = j.value("max_position", c.max_position);
  c.bytes_per_element = j.value("bytes_per_element", c.bytes_per_element);
  c.seed = j.value("seed", c.seed);
  if (c.n_layers < 1 || c.n_heads < 1 || c.head_dim < 1 || c.hidden < 1 ||
      c.vocab_size < 1 || c.max_position < 1 || c.bytes_per_element < 1)
    throw Error(ErrorCode::InvalidConfig, "config fields must be positive");
  return c;
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["n_layers"] = n_layers;
  j["n_heads"] = n_heads;
  j["head_dim"] = head_dim;
  j["hidden"] = hidden;
  j["vocab_size"] = vocab_size;
  j["pos_encoding"] = pos_name(pos_encoding);
  j["max_position"] = max_position;
  j["bytes_per_element"] = bytes_per_element;
  j["seed"] = seed;
  return j.dump();
}

uint64_t ModelConfig::hash() const { return fnv1a64(to_json()); }

// ---------------------------------------------------------------------------
// KVState
// ---------------------------------------------------------------------------

void KVState::append(const KVState& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (n_layers != other.n_layers || hidden != other.hidden)
    throw Error(ErrorCode::ShapeMismatch, "KVState layer/hidden mismatch in append");
  position_ids.insert(position_ids.end(), other.position_ids.begin(),
                      other.position_ids.end());
  for (int l = 0; l < n_layers; ++l) {
    k[l].insert(k[l].end(), other.k[l].begin(), other.k[l].end());
    v[l].insert(v[l].end(), other.v[l].begin(), other.v[l].end());
  }
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

namespace {

void fill_uniform(std::vector<float>& w, size_t count, const std::string& name,
                  uint64_t seed, float scale) {
  Pcg32 rng(splitmix64(fnv1a64(name) ^ splitmix64(seed)));
  w.resize(count);
  for (size_t i = 0; i < count; ++i) w[i] = rng.symmetric(scale);
}

// Double accumulators: a float running sum over d terms carries ~sqrt(d) ulps
// of order-sensitive noise, enough to break the 1e-6 equivalence budgets.
// Four independent lanes break the loop-carried dependency so the compiler
// can vectorize; the lane split and combine order are fixed, so the result
// for a given input row never depends on surrounding shapes.
inline float dotf(const float* a, const float* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return static_cast<float>(((s0 + s1) + (s2 + s3)));
}

// out[i][o] = dot(x[i], w[o]);  w is [rows_out][cols_in] row-major
void linear(const float* x, const float* w, float* out, long n, int in, int outdim) {
  for (long i = 0; i < n; ++i)
    for (int o = 0; o < outdim; ++o)
      out[i * outdim + o] = dotf(x + i * in, w + static_cast<long>(o) * in, in);
}

void layer_norm(const float* x, const float* g, const float* b, float* out, long n,
                int d) {
  for (long i = 0; i < n; ++i) {
    const float* row = x + i * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = row[j] - mean;
      var += c * c;
    }
    var /= d;
    double inv = 1.0 / std::sqrt(var + 1e-5);
    float* o = out + i * d;
    for (int j = 0; j < d; ++j)
      o[j] = static_cast<float>((row[j] - mean) * inv) * g[j] + b[j];
  }
}

inline float gelu(float x) {
  double t = 0.7978845608028654 * (x + 0.044715 * x * x * x);
  return static_cast<float>(0.5 * x * (1.0 + std::tanh(t)));
}

}  // namespace

Model::Model(const ModelConfig& config) : config_(config) {
  const auto& c = config_;
  if (c.hidden != c.n_heads * c.head_dim)
    throw Error(ErrorCode::InvalidConfig, "hidden must equal n_heads * head_dim");
  if (c.n_layers < 1 || c.n_heads < 1 || c.head_dim < 2 || c.head_dim % 2 != 0)
    throw Error(ErrorCode::InvalidConfig, "bad layer/head geometry");
  if (c.vocab_size < tok::kMinVocab)
    throw Error(ErrorCode::InvalidConfig,
                "vocab_size must be at least " + std::to_string(tok::kMinVocab) +
                    " to cover bytes plus specials");
  if (c.max_position < 1)
    throw Error(ErrorCode::InvalidConfig, "max_position must be positive");

  const int d = c.hidden;
  const float ws = 1.0f / std::sqrt(static_cast<float>(d));
  fill_uniform(embed_, static_cast<size_t>(c.vocab_size) * d, "embed", c.seed, 0.1f);
  fill_uniform(unembed_, static_cast<size_t>(c.vocab_size) * d, "unembed", c.seed, ws);
  lnf_g_.assign(d, 1.0f);
  lnf_b_.assign(d, 0.0f);

  layers_.resize(c.n_layers);
  for (int l = 0; l < c.n_layers; ++l) {
    Layer& L = layers_[l];
    std::string p = "layer" + std::to_string(l) + ".";
    L.ln1_g.assign(d, 1.0f);
    L.ln1_b.assign(d, 0.0f);
    L.ln2_g.assign(d, 1.0f);
    L.ln2_b.assign(d, 0.0f);
    fill_uniform(L.wq, static_cast<size_t>(d) * d, p + "wq", c.seed, ws);
    fill_uniform(L.wk, static_cast<size_t>(d) * d, p + "wk", c.seed, ws);
    fill_uniform(L.wv, static_cast<size_t>(d) * d, p + "wv", c.seed, ws);
    fill_uniform(L.wo, static_cast<size_t>(d) * d, p + "wo", c.seed, ws);
    fill_uniform(L.w1, static_cast<size_t>(4 * d) * d, p + "w1", c.seed, ws);
    fill_uniform(L.w2, static_cast<size_t>(d) * (4 * d), p + "w2", c.seed,
                 1.0f / std::sqrt(static_cast<float>(4 * d)));
  }

  if (c.pos_encoding == PosEncoding::Rope) {
    int half = c.head_dim / 2;
    rope_cos_.resize(static_cast<size_t>(c.max_position) * half);
    rope_sin_.resize(static_cast<size_t>(c.max_position) * half);
    for (long p = 0; p < c.max_position; ++p)
      for (int i = 0; i < half; ++i) {
        double theta = std::pow(10000.0, -2.0 * i / c.head_dim);
        rope_cos_[p * half + i] = std::cos(p * theta);
        rope_sin_[p * half + i] = std::sin(p * theta);
      }
  }
  if (c.pos_encoding == PosEncoding::Alibi) {
    alibi_slopes_.resize(c.n_heads);
    for (int h = 0; h < c.n_heads; ++h)
      alibi_slopes_[h] =
          static_cast<float>(std::pow(2.0, -8.0 * (h + 1) / c.n_heads));
  }
  if (c.pos_encoding == PosEncoding::AbsTable) {
    abs_table_.resize(static_cast<size_t>(c.max_position) * d);
    for (long p = 0; p < c.max_position; ++p)
      for (int i = 0; i < d / 2; ++i) {
        double theta = p / std::pow(10000.0, 2.0 * i / d);
        abs_table_[p * d + 2 * i] = static_cast<float>(std::sin(theta));
        abs_table_[p * d + 2 * i + 1] = static_cast<float>(std::cos(theta));
      }
  }
}

uint64_t Model::weight_checksum(const std::string& tensor_name) const {
  const std::vector<float>* t = nullptr;
  if (tensor_name == "embed") t = &embed_;
  else if (tensor_name == "unembed") t = &unembed_;
  else {
    for (int l = 0; l < config_.n_layers; ++l) {
      std::string p = "layer" + std::to_string(l) + ".";
      const Layer& L = layers_[l];
      if (tensor_name == p + "wq") t = &L.wq;
      else if (tensor_name == p + "wk") t = &L.wk;
      else if (tensor_name == p + "wv") t = &L.wv;
      else if (tensor_name == p + "wo") t = &L.wo;
      else if (tensor_name == p + "w1") t = &L.w1;
      else if (tensor_name == p + "w2") t = &L.w2;
      if (t) break;
    }
  }
  if (!t) throw Error(ErrorCode::Internal, "unknown tensor \"" + tensor_name + "\"");
  return fnv1a64(t->data(), t->size() * sizeof(float));
}

// ---------------------------------------------------------------------------
// Positional encodings
// ---------------------------------------------------------------------------

void Model::rope_rotate_with_table(float* head_vec, long position) const {
  int half = config_.head_dim / 2;
  const double* cs = rope_cos_.data() + position * half;
  const double* sn = rope_sin_.data() + position * half;
  for (int i = 0; i < half; ++i) {
    double a = head_vec[2 * i], b = head_vec[2 * i + 1];
    head_vec[2 * i] = static_cast<float>(a * cs[i] - b * sn[i]);
    head_vec[2 * i + 1] = static_cast<float>(a * sn[i] + b * cs[i]);
  }
}

void Model::rope_rotate_direct(float* head_vec, long position, int head_dim) {
  int half = head_dim / 2;
  for (int i = 0; i < half; ++i) {
    double theta = std::pow(10000.0, -2.0 * i / head_dim);
    double cs = std::cos(position * theta);
    double sn = std::sin(position * theta);
    double a = head_vec[2 * i], b = head_vec[2 * i + 1];
    head_vec[2 * i] = static_cast<float>(a * cs - b * sn);
    head_vec[2 * i + 1] = static_cast<float>(a * sn + b * cs);
  }
}

float Model::alibi_bias(int head, long query_pos, long key_pos) const {
  return alibi_slopes_[head] * static_cast<float>(key_pos - query_pos);
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

ForwardOutput Model::run(const std::vector<int>& tokens,
                         const std::vector<long>& position_ids, const KVState* past,
                         const std::vector<uint8_t>* mask) const {
  const auto& c = config_;
  const int d = c.hidden;
  const int hd = c.head_dim;
  const long n = static_cast<long>(tokens.size());

  if (position_ids.size() != tokens.size())
    throw Error(ErrorCode::ShapeMismatch, "tokens/position_ids length mismatch");
  for (long p : position_ids)
    if (p < 0 || p >= c.max_position)
      throw Error(ErrorCode::PositionOutOfRange,
                  "position " + std::to_string(p) + " outside [0, " +
                      std::to_string(c.max_position) + ")");
  for (int t : tokens)
    if (t < 0 || t >= c.vocab_size)
      throw Error(ErrorCode::ShapeMismatch, "token id out of vocab range");
  if (past) {
    if (past->n_layers != c.n_layers || past->hidden != d)
      throw Error(ErrorCode::ShapeMismatch, "past KV shape mismatch");
    for (long p : past->position_ids)
      if (p < 0 || p >= c.max_position)
        throw Error(ErrorCode::PositionOutOfRange, "past position out of range");
  }
  if (mask) {
    if (past) throw Error(ErrorCode::ShapeMismatch, "masked forward takes no past KV");
    if (static_cast<long>(mask->size()) != n * n)
      throw Error(ErrorCode::ShapeMismatch, "mask must be [seq, seq]");
    for (long i = 0; i < n; ++i)
      if (!(*mask)[i * n + i])
        throw Error(ErrorCode::ShapeMismatch, "mask diagonal must be true");
  }

  forward_tokens.fetch_add(n, std::memory_order_relaxed);

  const long P = past ? past->seq_len() : 0;
  const long total = P + n;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(hd));

  ForwardOutput out;
  out.seq = n;
  out.vocab = c.vocab_size;
  out.new_kv.n_layers = c.n_layers;
  out.new_kv.hidden = d;
  out.new_kv.position_ids.assign(position_ids.begin(), position_ids.end());
  out.new_kv.k.resize(c.n_layers);
  out.new_kv.v.resize(c.n_layers);

  std::vector<float> h(n * d);
  for (long i = 0; i < n; ++i) {
    const float* e = embed_.data() + static_cast<long>(tokens[i]) * d;
    float* row = h.data() + i * d;
    std::memcpy(row, e, d * sizeof(float));
    if (c.pos_encoding == PosEncoding::AbsTable) {
      const float* pe = abs_table_.data() + position_ids[i] * d;
      for (int j = 0; j < d; ++j) row[j] += pe[j];
    }
  }

  std::vector<float> norm(n * d), q(n * d), attn(n * d), proj(n * d);
  std::vector<float> mlp_mid(n * 4 * d);
  std::vector<float> kbuf(total * d), vbuf(total * d);
  std::vector<long> posbuf(total);
  std::vector<float> scores(total);
  std::vector<double> acc(hd);

  for (long j = 0; j < P; ++j) posbuf[j] = past->position_ids[j];
  for (long i = 0; i < n; ++i) posbuf[P + i] = position_ids[i];

  for (int l = 0; l < c.n_layers; ++l) {
    const Layer& L = layers_[l];
    layer_norm(h.data(), L.ln1_g.data(), L.ln1_b.data(), norm.data(), n, d);

    linear(norm.data(), L.wq.data(), q.data(), n, d, d);
    std::vector<float>& knew = out.new_kv.k[l];
    std::vector<float>& vnew = out.new_kv.v[l];
    knew.resize(n * d);
    vnew.resize(n * d);
    linear(norm.data(), L.wk.data(), knew.data(), n, d, d);
    linear(norm.data(), L.wv.data(), vnew.data(), n, d, d);

    if (c.pos_encoding == PosEncoding::Rope) {
      for (long i = 0; i < n; ++i)
        for (int hh = 0; hh < c.n_heads; ++hh) {
          rope_rotate_with_table(q.data() + i * d + hh * hd, position_ids[i]);
          rope_rotate_with_table(knew.data() + i * d + hh * hd, position_ids[i]);
        }
    }

    if (P > 0) {
      std::memcpy(kbuf.data(), past->k[l].data(), P * d * sizeof(float));
      std::memcpy(vbuf.data(), past->v[l].data(), P * d * sizeof(float));
    }
    std::memcpy(kbuf.data() + P * d, knew.data(), n * d * sizeof(float));
    std::memcpy(vbuf.data() + P * d, vnew.data(), n * d * sizeof(float));

    for (long i = 0; i < n; ++i) {
      for (int hh = 0; hh < c.n_heads; ++hh) {
        const float* qv = q.data() + i * d + hh * hd;
        const long limit = P + i;  // causal by sequence order
        // scores over the allowed set
        double maxs = -1e30;
        for (long j = 0; j <= (mask ? n - 1 : limit); ++j) {
          if (mask && !(*mask)[i * n + j]) continue;
          float s = dotf(qv, kbuf.data() + j * d + hh * hd, hd) * inv_sqrt;
          if (c.pos_encoding == PosEncoding::Alibi)
            s += alibi_bias(hh, posbuf[P + i], posbuf[j]);
          scores[j] = s;
          if (s > maxs) maxs = s;
        }
        double denom = 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        for (long j = 0; j <= (mask ? n - 1 : limit); ++j) {
          if (mask && !(*mask)[i * n + j]) continue;
          double w = std::exp(static_cast<double>(scores[j]) - maxs);
          denom += w;
          const float* vv = vbuf.data() + j * d + hh * hd;
          for (int x = 0; x < hd; ++x) acc[x] += w * vv[x];
        }
        float* o = attn.data() + i * d + hh * hd;
        for (int x = 0; x < hd; ++x) o[x] = static_cast<float>(acc[x] / denom);
      }
    }

    linear(attn.data(), L.wo.data(), proj.data(), n, d, d);
    for (long i = 0; i < n * d; ++i) h[i] += proj[i];

    layer_norm(h.data(), L.ln2_g.data(), L.ln2_b.data(), norm.data(), n, d);
    linear(norm.data(), L.w1.data(), mlp_mid.data(), n, d, 4 * d);
    for (long i = 0; i < n * 4 * d; ++i) mlp_mid[i] = gelu(mlp_mid[i]);
    linear(mlp_mid.data(), L.w2.data(), proj.data(), n, 4 * d, d);
    for (long i = 0; i < n * d; ++i) h[i] += proj[i];
  }

  layer_norm(h.data(), lnf_g_.data(), lnf_b_.data(), norm.data(), n, d);
  out.logits.resize(n * c.vocab_size);
  linear(norm.data(), unembed_.data(), out.logits.data(), n, d, c.vocab_size);
  return out;
}

ForwardOutput Model::forward(const std::vector<int>& tokens,
                             const std::vector<long>& position_ids,
                             const KVState* past) const {
  return run(tokens, position_ids, past, nullptr);
}

ForwardOutput Model::forward_masked(const std::vector<int>& tokens,
                                    const std::vector<long>& position_ids,
                                    const std::vector<uint8_t>& mask) const {
  return run(tokens, position_ids, nullptr, &mask);
}

int argmax_lowest(const float* logits, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

std::vector<int> Model::generate(KVState& kv, int last_token, long last_position,
                                 int n_steps) const {
  std::vector<int> out;
  int cur = last_token;
  long pos = last_position;
  for (int s = 0; s < n_steps; ++s) {
    ForwardOutput o = forward({cur}, {pos}, kv.empty() ? nullptr : &kv);
    kv.append(o.new_kv);
    cur = argmax_lowest(o.row(0), o.vocab);
    out.push_back(cur);
    ++pos;
  }
  return out;
}

long long flops_prefill(long long n, long long d) {
  return 6 * n * d * d + 4 * n * n * d;
}

long long flops_decode_step(long long n, long long d) {
  return 6 * d * d + 4 * n * d;
}

}  // namespace pc::model
