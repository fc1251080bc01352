#include "ssrcnn/heads.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <type_traits>

#include "ssrcnn/error.hpp"
#include "parallel.hpp"

namespace ssrcnn {

namespace {

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << name << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    throw DimensionMismatch(os.str());
  }
}

LayerNormParams ln(std::size_t n) { return LayerNormParams::identity(n); }

DynamicConvWeights zero_dyn(std::size_t in, const HeadConfig& cfg) {
  const std::size_t kc = cfg.filters * cfg.channels;
  return {Matrix(in, kc),       Matrix(in, kc),       Matrix(in, cfg.channels * cfg.pool * cfg.pool),
          ln(cfg.filters),      ln(cfg.channels),     ln(in),
          ln(in)};
}

// out = ln(x + W2 relu(W1 x))
Vector ffn(std::span<const double> x, const Matrix& w1, const Matrix& w2, const LayerNormParams& norm) {
  Vector h = matvec(w2, relu(matvec(w1, x)));
  add_inplace(h, x);
  return norm(h);
}

}  // namespace

void HeadConfig::validate() const {
  if (obj_dim == 0 || rel_dim == 0 || channels == 0 || filters == 0 || pool == 0 ||
      attention_heads == 0 || obj_ffn_dim == 0 || rel_ffn_dim == 0)
    throw ConfigError("head dimensions must be positive");
  if (obj_dim % 8 != 0 || rel_dim % 8 != 0)
    throw ConfigError("object and relation dimensions must be multiples of 8 for positional encoding");
  if (obj_dim % attention_heads != 0)
    throw ConfigError("object dimension must be divisible by the attention head count");
  if (num_object_classes <= 0 || num_predicates <= 0) throw ConfigError("class counts must be positive");
  if (!(max_log_scale > 0.0)) throw ConfigError("max_log_scale must be positive");
}

HeadWeights HeadWeights::zeros(const HeadConfig& cfg) {
  cfg.validate();
  const std::size_t o = cfg.obj_dim, r = cfg.rel_dim;
  const auto no = static_cast<std::size_t>(cfg.num_object_classes);
  const auto nr = static_cast<std::size_t>(cfg.num_predicates);
  HeadWeights w;
  w.pf_sub0 = w.pf_obj0 = w.pf_sub1 = w.pf_obj1 = Matrix(o, o);
  w.pf_ln = ln(o);
  w.attn = {Matrix(o, o), Matrix(o, o), Matrix(o, o), Matrix(o, o)};
  w.attn_ln = ln(o);
  w.obj_dyn = zero_dyn(o, cfg);
  w.rel_dyn = zero_dyn(r, cfg);
  w.obj_ffn1 = Matrix(cfg.obj_ffn_dim, o);
  w.obj_ffn2 = Matrix(o, cfg.obj_ffn_dim);
  w.obj_ffn_ln = ln(o);
  w.obj_cls = Matrix(no, o);
  w.obj_reg = Matrix(4, o);
  w.e2r_sub = w.e2r_obj = w.e2r_pos_sub = w.e2r_pos_obj = Matrix(r, o);
  w.e2r_x = w.e2r_y = w.e2r_pos_rel = Matrix(r, r);
  w.e2r_ln_sub = w.e2r_ln_obj = w.e2r_ln_out = ln(r);
  w.rel_ffn1 = Matrix(cfg.rel_ffn_dim, r);
  w.rel_ffn2 = Matrix(r, cfg.rel_ffn_dim);
  w.rel_ffn_ln = ln(r);
  w.rel_cls = Matrix(nr, r);
  w.rf_sub = w.rf_obj = Matrix(o, o);
  w.rf_cls = Matrix(nr, o);
  w.rf_ln_sub = w.rf_ln_obj = ln(o);
  return w;
}

HeadWeights HeadWeights::random(const HeadConfig& cfg, std::uint64_t seed, double scale) {
  HeadWeights w = zeros(cfg);
  std::mt19937_64 rng(seed);
  w.for_each([&](const std::string&, auto& p) {
    if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Matrix>) {
      const double a = scale / std::sqrt(static_cast<double>(p.cols()));
      std::uniform_real_distribution<double> u(-a, a);
      for (double& v : p.values()) v = u(rng);
    }
  });
  return w;
}

void HeadWeights::validate(const HeadConfig& cfg) const {
  const HeadWeights ref = zeros(cfg);
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  ref.for_each([&](const std::string&, const auto& p) {
    if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Matrix>) {
      shapes.emplace_back(p.rows(), p.cols());
    } else {
      shapes.emplace_back(1, p.size());
    }
  });
  std::size_t i = 0;
  for_each([&](const std::string& name, const auto& p) {
    const auto [rows, cols] = shapes[i++];
    if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Matrix>) {
      expect_shape(p, rows, cols, name);
      require_finite(p.values(), name.c_str());
    } else {
      if (p.size() != cols) throw DimensionMismatch(name + ": wrong vector length");
      require_finite(p, name.c_str());
    }
  });
}

Vector positional_encoding(const Box& box, std::size_t dim) {
  if (dim == 0 || dim % 8 != 0) throw DimensionMismatch("positional encoding dimension must be a multiple of 8");
  const std::size_t per = dim / 4;
  const auto coords = box.as_array();
  Vector pe(dim);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t j = 0; j < per / 2; ++j) {
      const double freq = std::pow(10000.0, -2.0 * double(j) / double(per));
      const double a = 2.0 * std::numbers::pi * coords[k] * freq;
      pe[k * per + 2 * j] = std::sin(a);
      pe[k * per + 2 * j + 1] = std::cos(a);
    }
  }
  return pe;
}

PairFusionResult pair_fusion(std::span<const double> x_sub, std::span<const double> x_obj,
                             std::span<const double> pe_sub, std::span<const double> pe_obj,
                             const HeadWeights& w) {
  require_finite(x_sub, "pair_fusion subject");
  require_finite(x_obj, "pair_fusion object");
  const Vector fused = relu(w.pf_ln(add(matvec(w.pf_sub0, x_sub), matvec(w.pf_obj0, x_obj))));
  PairFusionResult r;
  r.sub = add(x_sub, matvec(w.pf_sub1, fused));
  add_inplace(r.sub, pe_sub);
  r.obj = add(x_obj, matvec(w.pf_obj1, fused));
  add_inplace(r.obj, pe_obj);
  return r;
}

Vector dynamic_conv(std::span<const double> x, const Matrix& pooled, const DynamicConvWeights& w) {
  const std::size_t channels = pooled.rows();
  const std::size_t spatial = pooled.cols();
  if (w.gen1.rows() != x.size() || w.gen2.rows() != x.size() || w.proj.rows() != x.size())
    throw DimensionMismatch("dynamic_conv: generator input dimension differs from x");
  if (channels == 0 || w.gen1.cols() % channels != 0)
    throw DimensionMismatch("dynamic_conv: filter generator incompatible with channel count");
  const std::size_t filters = w.gen1.cols() / channels;
  if (w.gen2.cols() != channels * filters || w.proj.cols() != channels * spatial)
    throw DimensionMismatch("dynamic_conv: weight shapes disagree with pooled features");

  // Filters generated from x: K1 x C, then C x K1.
  const Matrix f1(filters, channels, matvec_t(w.gen1, x));
  const Matrix f2(channels, filters, matvec_t(w.gen2, x));

  // 1x1 convolutions: per spatial position a matrix-vector product,
  // normalized across channels.
  Matrix v1 = gemm(f1, pooled);  // K1 x S
  Vector col(filters);
  for (std::size_t s = 0; s < spatial; ++s) {
    for (std::size_t k = 0; k < filters; ++k) col[k] = v1(k, s);
    const Vector y = relu(w.ln1(col));
    for (std::size_t k = 0; k < filters; ++k) v1(k, s) = y[k];
  }
  Matrix v2 = gemm(f2, v1);  // C x S
  Vector col2(channels);
  for (std::size_t s = 0; s < spatial; ++s) {
    for (std::size_t c = 0; c < channels; ++c) col2[c] = v2(c, s);
    const Vector y = relu(w.ln2(col2));
    for (std::size_t c = 0; c < channels; ++c) v2(c, s) = y[c];
  }
  Vector out = relu(w.ln_proj(matvec(w.proj, v2.values())));
  add_inplace(out, x);
  return w.ln_out(out);
}

Vector e2r_fusion(std::span<const double> f_sub, std::span<const double> f_obj,
                  std::span<const double> f_rel, std::span<const double> pe_sub,
                  std::span<const double> pe_obj, const HeadWeights& w) {
  Vector h = matvec(w.e2r_x, relu(w.e2r_ln_sub(matvec(w.e2r_sub, f_sub))));
  add_inplace(h, matvec(w.e2r_y, relu(w.e2r_ln_obj(matvec(w.e2r_obj, f_obj)))));
  const Vector pos = matvec(w.e2r_pos_rel, relu(add(matvec(w.e2r_pos_sub, pe_sub), matvec(w.e2r_pos_obj, pe_obj))));
  Vector out = add(f_rel, h);
  add_inplace(out, pos);
  return w.e2r_ln_out(out);
}

Vector relation_logits(std::span<const double> f_sub, std::span<const double> f_obj,
                       std::span<const double> rel_logits, const HeadWeights& w) {
  const Vector gs = w.rf_ln_sub(matvec(w.rf_sub, f_sub));
  const Vector go = w.rf_ln_obj(matvec(w.rf_obj, f_obj));
  Vector gso(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const double diff = gs[i] - go[i];
    gso[i] = std::max(gs[i] + go[i], 0.0) - diff * diff;
  }
  return add(rel_logits, matvec(w.rf_cls, relu(gso)));
}

Box apply_box_delta(const Box& box, std::span<const double> delta, double max_log_scale) {
  if (delta.size() != 4) throw DimensionMismatch("box delta must have 4 entries");
  const double dw = std::clamp(delta[2], -max_log_scale, max_log_scale);
  const double dh = std::clamp(delta[3], -max_log_scale, max_log_scale);
  return Box(box.cx() + delta[0] * box.w(), box.cy() + delta[1] * box.h(), box.w() * std::exp(dw),
             box.h() * std::exp(dh));
}

HeadOutput head_forward(const std::vector<TripletQuery>& queries, const FeatureMap& fmap,
                        const HeadWeights& w, const HeadConfig& cfg,
                        const std::vector<std::pair<Box, Box>>& pe_boxes) {
  if (queries.empty()) throw InvalidArgument("head_forward: empty query set");
  if (!pe_boxes.empty() && pe_boxes.size() != queries.size())
    throw DimensionMismatch("head_forward: positional boxes do not match query count");
  if (fmap.channels() != cfg.channels)
    throw DimensionMismatch("head_forward: feature map channels differ from head config");
  const std::size_t n = queries.size();
  for (const auto& q : queries) {
    if (q.sub_content.size() != cfg.obj_dim || q.obj_content.size() != cfg.obj_dim ||
        q.rel_content.size() != cfg.rel_dim)
      throw DimensionMismatch("head_forward: query content dimension differs from head config");
    require_finite(q.rel_content, "relation content");
  }

  // Pair fusion and object self-attention over all 2N object vectors.
  std::vector<Vector> fused(2 * n), content(2 * n);
  detail::parallel_for(n, [&](std::size_t i) {
    const Box& bs = pe_boxes.empty() ? queries[i].sub_box : pe_boxes[i].first;
    const Box& bo = pe_boxes.empty() ? queries[i].obj_box : pe_boxes[i].second;
    PairFusionResult pf = pair_fusion(queries[i].sub_content, queries[i].obj_content,
                                      positional_encoding(bs, cfg.obj_dim),
                                      positional_encoding(bo, cfg.obj_dim), w);
    fused[i] = std::move(pf.sub);
    fused[n + i] = std::move(pf.obj);
    content[i] = queries[i].sub_content;
    content[n + i] = queries[i].obj_content;
  });
  const AttentionResult attn = mh_attention(fused, fused, content, cfg.attention_heads, w.attn);

  HeadOutput out;
  out.queries.resize(n, queries.front());
  out.predictions.resize(n, TripletPrediction{{queries.front().sub_box, {}}, {queries.front().obj_box, {}}, {}});
  detail::parallel_for(n, [&](std::size_t i) {
    const TripletQuery& q = queries[i];
    auto object_branch = [&](std::size_t token, const Box& box, Box& new_box, Vector& logits) {
      const Vector attended = w.attn_ln(add(content[token], attn.outputs[token]));
      const Vector feat = dynamic_conv(attended, fmap.roi_pool(box, cfg.pool), w.obj_dyn);
      Vector refined = ffn(feat, w.obj_ffn1, w.obj_ffn2, w.obj_ffn_ln);
      logits = matvec(w.obj_cls, refined);
      new_box = apply_box_delta(box, matvec(w.obj_reg, refined), cfg.max_log_scale);
      return refined;
    };
    Box sub_box = q.sub_box, obj_box = q.obj_box;
    Vector sub_logits, obj_logits;
    const Vector f_sub = object_branch(i, q.sub_box, sub_box, sub_logits);
    const Vector f_obj = object_branch(n + i, q.obj_box, obj_box, obj_logits);

    // Relation features: dynamic conv on both object regions, then on their union.
    Vector r_pair = dynamic_conv(q.rel_content, fmap.roi_pool(sub_box, cfg.pool), w.rel_dyn);
    add_inplace(r_pair, dynamic_conv(q.rel_content, fmap.roi_pool(obj_box, cfg.pool), w.rel_dyn));
    for (double& v : r_pair) v *= 0.5;
    const Vector f_rel =
        dynamic_conv(r_pair, fmap.roi_pool(union_box(sub_box, obj_box), cfg.pool), w.rel_dyn);

    const Vector fused_rel = e2r_fusion(f_sub, f_obj, f_rel, positional_encoding(sub_box, cfg.obj_dim),
                                        positional_encoding(obj_box, cfg.obj_dim), w);
    Vector rel_feat = ffn(fused_rel, w.rel_ffn1, w.rel_ffn2, w.rel_ffn_ln);
    Vector rel = relation_logits(f_sub, f_obj, matvec(w.rel_cls, rel_feat), w);

    out.queries[i] = {sub_box, obj_box, f_sub, f_obj, std::move(rel_feat)};
    out.predictions[i] = {{sub_box, std::move(sub_logits)}, {obj_box, std::move(obj_logits)}, std::move(rel)};
  });
  return out;
}

Cascade::Cascade(HeadConfig cfg, std::vector<HeadWeights> heads)
    : cfg_(std::move(cfg)), heads_(std::move(heads)) {
  cfg_.validate();
  if (heads_.empty()) throw ConfigError("cascade needs at least one head");
  for (const auto& h : heads_) h.validate(cfg_);
}

Cascade Cascade::random(const HeadConfig& cfg, std::size_t stages, std::uint64_t seed, double scale) {
  std::vector<HeadWeights> heads;
  for (std::size_t s = 0; s < stages; ++s) heads.push_back(HeadWeights::random(cfg, seed + s, scale));
  return Cascade(cfg, std::move(heads));
}

std::vector<HeadOutput> Cascade::forward(const std::vector<TripletQuery>& queries,
                                         const FeatureMap& fmap) const {
  std::vector<std::pair<Box, Box>> pe_boxes;
  if (!cfg_.recompute_pe)
    for (const auto& q : queries) pe_boxes.emplace_back(q.sub_box, q.obj_box);
  std::vector<HeadOutput> outs;
  outs.reserve(heads_.size());
  const std::vector<TripletQuery>* current = &queries;
  for (const auto& h : heads_) {
    outs.push_back(head_forward(*current, fmap, h, cfg_, pe_boxes));
    current = &outs.back().queries;
  }
  return outs;
}

std::vector<TripletQuery> init_queries(const HeadConfig& cfg, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> centre(0.15, 0.85), side(0.1, 0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto vec = [&](std::size_t d) {
    Vector v(d);
    for (double& x : v) x = normal(rng);
    return v;
  };
  std::vector<TripletQuery> qs;
  qs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Box s(centre(rng), centre(rng), side(rng), side(rng));
    Box o(centre(rng), centre(rng), side(rng), side(rng));
    qs.push_back({s, o, vec(cfg.obj_dim), vec(cfg.obj_dim), vec(cfg.rel_dim)});
  }
  return qs;
}

}  // namespace ssrcnn
