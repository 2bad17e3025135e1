#include "dsas/toy_transformer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>

#include "dsas/cgw.hpp"
#include "dsas/errors.hpp"
#include "dsas/io_util.hpp"

namespace dsas {

namespace {

constexpr char kModelMagic[8] = {'D', 'S', 'A', 'S', 'T', 'O', 'Y', '1'};
constexpr double kLayerNormEps = 1e-5;

enum class Init { Normal, Ones, Zeros };

// Visits every parameter block in declaration order.
template <typename Params, typename F>
void for_each_block(Params& p, F&& f) {
  f(p.token_embedding, Init::Normal);
  f(p.position_embedding, Init::Normal);
  for (auto& l : p.layers) {
    f(l.ln1_gain, Init::Ones);
    f(l.ln1_bias, Init::Zeros);
    f(l.wq, Init::Normal);
    f(l.wk, Init::Normal);
    f(l.wv, Init::Normal);
    f(l.wo, Init::Normal);
    f(l.ln2_gain, Init::Ones);
    f(l.ln2_bias, Init::Zeros);
    f(l.w_up, Init::Normal);
    f(l.b_up, Init::Zeros);
    f(l.w_down, Init::Normal);
    f(l.b_down, Init::Zeros);
  }
  f(p.final_gain, Init::Ones);
  f(p.final_bias, Init::Zeros);
  f(p.unembedding, Init::Normal);
}

ModelParams shaped_params(const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto ff = static_cast<std::size_t>(c.ffn_dim());
  ModelParams p;
  p.token_embedding = Tensor(static_cast<std::size_t>(c.vocab_size), d);
  p.position_embedding = Tensor(static_cast<std::size_t>(c.max_seq_len), d);
  p.layers.resize(static_cast<std::size_t>(c.num_layers));
  for (auto& l : p.layers) {
    l.ln1_gain = Tensor(1, d);
    l.ln1_bias = Tensor(1, d);
    l.wq = Tensor(d, d);
    l.wk = Tensor(d, d);
    l.wv = Tensor(d, d);
    l.wo = Tensor(d, d);
    l.ln2_gain = Tensor(1, d);
    l.ln2_bias = Tensor(1, d);
    l.w_up = Tensor(d, ff);
    l.b_up = Tensor(1, ff);
    l.w_down = Tensor(ff, d);
    l.b_down = Tensor(1, d);
  }
  p.final_gain = Tensor(1, d);
  p.final_bias = Tensor(1, d);
  p.unembedding = Tensor(d, static_cast<std::size_t>(c.vocab_size));
  return p;
}

std::vector<double> layer_norm(std::span<const double> x, std::size_t rows, std::size_t d,
                               const Tensor& gain, const Tensor& bias) {
  std::vector<double> out(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < d; ++c) {
      out[r * d + c] = (in[c] - mean) * inv * gain.data[c] + bias.data[c];
    }
  }
  return out;
}

// rows x W.rows times W -> rows x W.cols, plus an optional bias row.
std::vector<double> matmul(std::span<const double> x, std::size_t rows, const Tensor& w,
                           const Tensor* bias = nullptr) {
  std::vector<double> out(rows * w.cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * w.cols;
    if (bias) {
      for (std::size_t c = 0; c < w.cols; ++c) o[c] = bias->data[c];
    }
    for (std::size_t k = 0; k < w.rows; ++k) {
      const double a = x[r * w.rows + k];
      const float* wr = w.data.data() + k * w.cols;
      for (std::size_t c = 0; c < w.cols; ++c) o[c] += a * wr[c];
    }
  }
  return out;
}

double gelu(double x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
}

void mlp_block(std::vector<double>& hidden, std::size_t rows, const LayerParams& lp,
               std::size_t d) {
  const auto h = layer_norm(hidden, rows, d, lp.ln2_gain, lp.ln2_bias);
  auto up = matmul(h, rows, lp.w_up, &lp.b_up);
  for (auto& u : up) u = gelu(u);
  const auto down = matmul(up, rows, lp.w_down, &lp.b_down);
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] += down[i];
}

// Stable softmax over the unmasked prefix [0, n); the tail of `out` is zeroed.
void softmax_prefix(std::span<const double> scores, std::span<double> out, std::size_t n) {
  double mx = scores[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, scores[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(scores[j] - mx);
    sum += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
  for (std::size_t j = n; j < out.size(); ++j) out[j] = 0.0;
}

bool layer_selected(const DsasConfig* dsas, int layer, int num_layers) {
  if (!dsas) return false;
  const auto sel = dsas->selected_layers(num_layers);
  return std::find(sel.begin(), sel.end(), layer) != sel.end();
}

void write_i32(std::ostream& out, std::int32_t v) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  const char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                     static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
  out.write(b, 4);
}

std::int32_t read_i32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw Error(Errc::FormatError, "truncated model header");
  const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<std::int32_t>(u);
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model < 1 || num_heads < 1 || num_layers < 1 || vocab_size < 1 || max_seq_len < 1) {
    throw Error(Errc::InvalidConfig, "all model dimensions must be positive");
  }
  if (d_model % num_heads != 0) {
    throw Error(Errc::InvalidConfig, "d_model " + std::to_string(d_model) +
                                         " is not divisible by num_heads " +
                                         std::to_string(num_heads));
  }
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  params_ = shaped_params(config_);
  std::mt19937 rng(config_.seed);
  std::normal_distribution<float> normal(0.0f, 1.0f / std::sqrt(static_cast<float>(config_.d_model)));
  for_each_block(params_, [&](Tensor& t, Init init) {
    switch (init) {
      case Init::Normal:
        for (auto& v : t.data) v = normal(rng);
        break;
      case Init::Ones:
        std::fill(t.data.begin(), t.data.end(), 1.0f);
        break;
      case Init::Zeros:
        std::fill(t.data.begin(), t.data.end(), 0.0f);
        break;
    }
  });
}

Model::Model(const ModelConfig& config, ModelParams params)
    : config_(config), params_(std::move(params)) {}

void Model::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto staged = staging_path(path);
  {
    std::ofstream out(staged, std::ios::binary | std::ios::trunc);
    out.write(kModelMagic, sizeof kModelMagic);
    for (int v : {config_.d_model, config_.num_heads, config_.num_layers, config_.vocab_size,
                  config_.max_seq_len}) {
      write_i32(out, v);
    }
    write_i32(out, std::bit_cast<std::int32_t>(config_.seed));
    for_each_block(params_, [&](const Tensor& t, Init) {
      for (float v : t.data) {
        if constexpr (std::endian::native == std::endian::big) v = byteswap_f32(v);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    });
    out.close();
    if (!out) throw Error(Errc::IoError, "cannot write " + staged.string());
  }
  commit_staged(staged, path);
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open model " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
    throw Error(Errc::FormatError, path.string() + " is not a toy model file");
  }
  ModelConfig c;
  c.d_model = read_i32(in);
  c.num_heads = read_i32(in);
  c.num_layers = read_i32(in);
  c.vocab_size = read_i32(in);
  c.max_seq_len = read_i32(in);
  c.seed = std::bit_cast<std::uint32_t>(read_i32(in));
  c.validate();

  auto params = shaped_params(c);
  for_each_block(params, [&](Tensor& t, Init) {
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw Error(Errc::FormatError, "truncated parameter block in " + path.string());
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : t.data) v = byteswap_f32(v);
    }
  });
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::FormatError, "trailing bytes after parameters in " + path.string());
  }
  return Model(c, std::move(params));
}

std::uint64_t Model::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for_each_block(params_, [&](const Tensor& t, Init) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data.data());
    for (std::size_t i = 0; i < t.data.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  });
  return h;
}

AttentionLayerResult attention_layer(const Model& model, std::span<const double> hidden,
                                     int layer_index, const DsasConfig* dsas,
                                     const PromptLayout* layout, bool capture_pre_scores) {
  const auto& cfg = model.config();
  const auto& lp = model.params().layers.at(static_cast<std::size_t>(layer_index));
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto H = static_cast<std::size_t>(cfg.num_heads);
  const auto dk = static_cast<std::size_t>(cfg.head_dim());
  const std::size_t L = hidden.size() / d;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  const bool selected = layer_selected(dsas, layer_index, cfg.num_layers);
  if (selected && (!layout || layout->total_len != L)) {
    throw Error(Errc::LayoutMismatch, "selected layer needs a layout matching the input");
  }

  const auto h = layer_norm(hidden, L, d, lp.ln1_gain, lp.ln1_bias);
  const auto q = matmul(h, L, lp.wq);
  const auto k = matmul(h, L, lp.wk);
  const auto v = matmul(h, L, lp.wv);

  AttentionLayerResult res;
  res.cache.keys.assign(H, std::vector<double>(L * dk));
  res.cache.values.assign(H, std::vector<double>(L * dk));
  for (std::size_t hd = 0; hd < H; ++hd) {
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t c = 0; c < dk; ++c) {
        res.cache.keys[hd][i * dk + c] = k[i * d + hd * dk + c];
        res.cache.values[hd][i * dk + c] = v[i * d + hd * dk + c];
      }
    }
  }

  res.head_scores.reserve(H);
  for (std::size_t hd = 0; hd < H; ++hd) {
    AttentionMatrix s(L, MatrixKind::Score, Reduction::PerHead);
    const auto& keys = res.cache.keys[hd];
    for (std::size_t i = 0; i < L; ++i) {
      const double* qi = q.data() + i * d + hd * dk;
      for (std::size_t j = 0; j <= i; ++j) {
        const double* kj = keys.data() + j * dk;
        double dot = 0.0;
        for (std::size_t c = 0; c < dk; ++c) dot += qi[c] * kj[c];
        s.set(i, j, dot * inv_sqrt_dk);
      }
    }
    res.head_scores.push_back(std::move(s));
  }
  if (capture_pre_scores) res.pre_scores = sum_heads(res.head_scores);
  if (selected) res.intervention = apply_dsas(res.head_scores, *layout, *dsas);

  std::vector<double> concat(L * d, 0.0);
  res.head_weights.reserve(H);
  for (std::size_t hd = 0; hd < H; ++hd) {
    std::vector<double> w(L * L, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
      softmax_prefix(res.head_scores[hd].row(i), std::span<double>(w.data() + i * L, L), i + 1);
    }
    const auto& vals = res.cache.values[hd];
    for (std::size_t i = 0; i < L; ++i) {
      double* o = concat.data() + i * d + hd * dk;
      for (std::size_t j = 0; j <= i; ++j) {
        const double a = w[i * L + j];
        const double* vj = vals.data() + j * dk;
        for (std::size_t c = 0; c < dk; ++c) o[c] += a * vj[c];
      }
    }
    // Constructor re-checks unit row sums and the causal mask.
    res.head_weights.emplace_back(L, MatrixKind::Weight, Reduction::PerHead, std::move(w));
  }

  const auto out = matmul(concat, L, lp.wo);
  res.hidden.assign(hidden.begin(), hidden.end());
  for (std::size_t i = 0; i < res.hidden.size(); ++i) res.hidden[i] += out[i];
  return res;
}

namespace {

struct FrozenGate {
  bool active = false;
  std::vector<double> weights;
};

// One new position through every layer, extending the caches.
std::vector<double> decode_step(const Model& model, TokenId token, std::size_t pos,
                                std::vector<LayerCache>& caches,
                                const std::vector<FrozenGate>& gates,
                                const PromptLayout& layout) {
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto H = static_cast<std::size_t>(cfg.num_heads);
  const auto dk = static_cast<std::size_t>(cfg.head_dim());
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  std::vector<double> x(d);
  for (std::size_t c = 0; c < d; ++c) {
    x[c] = p.token_embedding(static_cast<std::size_t>(token), c) + p.position_embedding(pos, c);
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& lp = p.layers[l];
    auto& cache = caches[l];
    const auto h = layer_norm(x, 1, d, lp.ln1_gain, lp.ln1_bias);
    const auto q = matmul(h, 1, lp.wq);
    const auto k = matmul(h, 1, lp.wk);
    const auto v = matmul(h, 1, lp.wv);
    std::vector<double> concat(d, 0.0);
    const std::size_t n = pos + 1;
    std::vector<double> scores(n), w(n);
    for (std::size_t hd = 0; hd < H; ++hd) {
      auto& keys = cache.keys[hd];
      auto& vals = cache.values[hd];
      keys.insert(keys.end(), k.begin() + static_cast<std::ptrdiff_t>(hd * dk),
                  k.begin() + static_cast<std::ptrdiff_t>((hd + 1) * dk));
      vals.insert(vals.end(), v.begin() + static_cast<std::ptrdiff_t>(hd * dk),
                  v.begin() + static_cast<std::ptrdiff_t>((hd + 1) * dk));
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dk; ++c) dot += q[hd * dk + c] * keys[j * dk + c];
        scores[j] = dot * inv_sqrt_dk;
      }
      if (gates[l].active) apply_cgw_row(scores, pos, layout, gates[l].weights);
      softmax_prefix(scores, w, n);
      double sum = 0.0;
      for (double a : w) sum += a;
      if (std::abs(sum - 1.0) > 1e-5) {
        throw Error(Errc::InvalidMatrix, "decode softmax row does not sum to 1");
      }
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < dk; ++c) concat[hd * dk + c] += w[j] * vals[j * dk + c];
      }
    }
    const auto out = matmul(concat, 1, lp.wo);
    for (std::size_t c = 0; c < d; ++c) x[c] += out[c];
    mlp_block(x, 1, lp, d);
  }
  const auto hf = layer_norm(x, 1, d, p.final_gain, p.final_bias);
  return matmul(hf, 1, p.unembedding);
}

TokenId argmax_token(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

}  // namespace

Generation generate(const Model& model, const BuiltPrompt& prompt,
                    const std::optional<DsasConfig>& dsas, const GenerateOptions& options) {
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto& layout = prompt.layout;
  const std::size_t L = prompt.token_ids.size();
  if (options.max_new_tokens < 0) throw Error(Errc::InvalidConfig, "max_new_tokens < 0");
  if (L == 0 || L + static_cast<std::size_t>(options.max_new_tokens) >
                    static_cast<std::size_t>(cfg.max_seq_len)) {
    throw Error(Errc::PromptTooLong, "prompt of " + std::to_string(L) + " tokens plus " +
                                         std::to_string(options.max_new_tokens) +
                                         " new tokens exceeds max_seq_len " +
                                         std::to_string(cfg.max_seq_len));
  }
  if (layout.total_len != L) throw Error(Errc::LayoutMismatch, "layout does not match tokens");
  validate_layout(layout);
  if (dsas) dsas->validate();
  for (TokenId t : prompt.token_ids) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw Error(Errc::InvalidSample, "token id " + std::to_string(t) + " outside vocabulary");
    }
  }

  const auto d = static_cast<std::size_t>(cfg.d_model);
  std::vector<double> hidden(L * d);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      hidden[i * d + c] = p.token_embedding(static_cast<std::size_t>(prompt.token_ids[i]), c) +
                          p.position_embedding(i, c);
    }
  }

  Generation gen;
  auto& trace = gen.trace;
  std::vector<LayerCache> caches(p.layers.size());
  std::vector<FrozenGate> gates(p.layers.size());
  const DsasConfig* cfg_ptr = dsas ? &*dsas : nullptr;

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto res = attention_layer(model, hidden, static_cast<int>(l), cfg_ptr, &layout,
                               options.capture_matrices);
    caches[l] = std::move(res.cache);
    std::optional<AttentionMatrix> summed;
    if (options.capture_matrices) {
      summed = sum_heads(res.head_weights);
      trace.layer_weights.push_back(*summed);
    }
    if (res.intervention) {
      gates[l].active = dsas->cgw_enabled;
      gates[l].weights = res.intervention->gates.final_weights();
      SelectedLayerTrace st;
      st.layer = static_cast<int>(l);
      st.pre_scores = std::move(res.pre_scores);
      st.gates = std::move(res.intervention->gates);
      st.partition = std::move(res.intervention->partition);
      st.post_weights = summed;
      trace.selected.push_back(std::move(st));
    }
    if (options.capture_head_weights) trace.head_weights.push_back(std::move(res.head_weights));
    hidden = std::move(res.hidden);
    mlp_block(hidden, L, p.layers[l], d);
  }

  const auto last = std::span<const double>(hidden).subspan((L - 1) * d, d);
  const auto hf = layer_norm(last, 1, d, p.final_gain, p.final_bias);
  auto logits = matmul(hf, 1, p.unembedding);

  for (int n = 0; n < options.max_new_tokens; ++n) {
    const TokenId tok = argmax_token(logits);
    if (options.stop_at_eos && tok == Tokenizer::kEos) break;
    gen.tokens.push_back(tok);
    if (n + 1 < options.max_new_tokens) {
      logits = decode_step(model, tok, L + static_cast<std::size_t>(n), caches, gates, layout);
    }
  }
  trace.generated = gen.tokens;
  return gen;
}

}  // namespace dsas
