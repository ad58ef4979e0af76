#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "promptcache/errors.hpp"

namespace pc::model {

enum class PosEncoding { Rope, Alibi, AbsTable };

struct ModelConfig {
  int n_layers = 4;
  int n_heads = 8;
  int head_dim = 32;
  int hidden = 256;  // must equal n_heads * head_dim
  int vocab_size = 512;
  PosEncoding pos_encoding = PosEncoding::Rope;
  long max_position = 8192;
  int bytes_per_element = 2;  // accounting only; compute is fp32
  uint64_t seed = 42;

  static ModelConfig from_json(const std::string& json_text);
  std::string to_json() const;
  // FNV-1a over the canonical serialization; identifies compatible stores.
  uint64_t hash() const;
};

// Per-layer key/value tensors [seq, n_heads*head_dim] plus the position ID of
// every cached row. For rope the keys are stored post-rotation; for alibi and
// abs_table the position IDs drive bias/embedding lookup instead.
struct KVState {
  int n_layers = 0;
  int hidden = 0;
  std::vector<long> position_ids;
  std::vector<std::vector<float>> k;  // [n_layers][seq * hidden]
  std::vector<std::vector<float>> v;

  long seq_len() const { return static_cast<long>(position_ids.size()); }
  bool empty() const { return position_ids.empty(); }
  void append(const KVState& other);
};

struct ForwardOutput {
  std::vector<float> logits;  // [seq * vocab_size]
  long seq = 0;
  int vocab = 0;
  KVState new_kv;

  const float* row(long i) const { return logits.data() + i * vocab; }
};

// Weight generation: every tensor gets its own PCG32 stream (64-bit LCG state,
// XSH-RR output; multiplier 6364136223846793005, increment 1442695040888963407)
// seeded with splitmix64(fnv1a64(tensor_name) ^ splitmix64(config.seed)).
// Uniform floats are (rng() >> 8) * 2^-24.
class Model {
 public:
  explicit Model(const ModelConfig& config);  // throws InvalidConfig

  const ModelConfig& config() const { return config_; }

  ForwardOutput forward(const std::vector<int>& tokens,
                        const std::vector<long>& position_ids,
                        const KVState* past = nullptr) const;

  // Exact attention under an arbitrary mask over the full sequence.
  // mask[i*seq + j] == true iff token i may attend to token j.
  ForwardOutput forward_masked(const std::vector<int>& tokens,
                               const std::vector<long>& position_ids,
                               const std::vector<uint8_t>& mask) const;

  // Greedy decoding: feeds last_token at last_position, then each new token at
  // the next position. Ties break toward the lowest token ID. `kv` grows by
  // one row per step.
  std::vector<int> generate(KVState& kv, int last_token, long last_position,
                            int n_steps) const;

  uint64_t weight_checksum(const std::string& tensor_name) const;

  // rope helpers (exposed for the table-vs-direct oracle test)
  void rope_rotate_with_table(float* head_vec, long position) const;
  static void rope_rotate_direct(float* head_vec, long position, int head_dim);
  float alibi_bias(int head, long query_pos, long key_pos) const;
  float alibi_slope(int head) const { return alibi_slopes_[head]; }

  // total tokens pushed through forward(); test instrumentation
  mutable std::atomic<long> forward_tokens{0};

 private:
  struct Layer {
    std::vector<float> ln1_g, ln1_b, ln2_g, ln2_b;
    std::vector<float> wq, wk, wv, wo;  // [out][in] row-major, out==in==hidden
    std::vector<float> w1;              // [4*hidden][hidden]
    std::vector<float> w2;              // [hidden][4*hidden]
  };

  ForwardOutput run(const std::vector<int>& tokens,
                    const std::vector<long>& position_ids, const KVState* past,
                    const std::vector<uint8_t>* mask) const;

  ModelConfig config_;
  std::vector<float> embed_;    // [vocab][hidden]
  std::vector<float> unembed_;  // [vocab][hidden]  (rows = output tokens)
  std::vector<float> lnf_g_, lnf_b_;
  std::vector<Layer> layers_;
  // double so that rotating at position p and p+s agree to float rounding
  std::vector<double> rope_cos_, rope_sin_;  // [max_position][head_dim/2]
  std::vector<float> alibi_slopes_;
  std::vector<float> abs_table_;  // [max_position][hidden], sinusoidal
};

int argmax_lowest(const float* logits, int n);

// Attention FLOPs cost model: full prefill of n tokens vs one decode step.
long long flops_prefill(long long n, long long d);
long long flops_decode_step(long long n, long long d);

// PRNG building blocks, documented so alternate implementations can
// reproduce the weights.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64(const std::string& s);
uint64_t splitmix64(uint64_t x);

struct Pcg32 {
  uint64_t state;
  explicit Pcg32(uint64_t seed) : state(seed + 1442695040888963407ULL) { next(); }
  uint32_t next() {
    uint64_t old = state;
    state = old * 6364136223846793005ULL + 1442695040888963407ULL;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }
  float uniform() { return static_cast<float>(next() >> 8) * (1.0f / 16777216.0f); }
  float symmetric(float scale) { return (2.0f * uniform() - 1.0f) * scale; }
};

}  // namespace pc::model
