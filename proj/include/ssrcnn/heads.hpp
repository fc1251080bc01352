#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ssrcnn/features.hpp"
#include "ssrcnn/geometry.hpp"
#include "ssrcnn/numerics.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn {

struct HeadConfig {
  std::size_t obj_dim = 1024;
  std::size_t rel_dim = 256;
  std::size_t channels = 16;  // feature-map channels C
  std::size_t filters = 8;    // dynamic-conv filters K1
  std::size_t pool = kPoolSize;
  std::size_t attention_heads = 8;
  std::size_t obj_ffn_dim = 1024;
  std::size_t rel_ffn_dim = 256;
  int num_object_classes = 150;
  int num_predicates = 50;
  // Recompute positional encodings from each head's input boxes; when
  // false the encodings of the initial query boxes are reused by every head.
  bool recompute_pe = true;
  // Log-scale width/height deltas are clamped to +-max_log_scale.
  double max_log_scale = 4.0;

  void validate() const;
};

struct LayerNormParams {
  Vector gain;
  Vector bias;

  static LayerNormParams identity(std::size_t n) { return {Vector(n, 1.0), Vector(n, 0.0)}; }
  Vector operator()(std::span<const double> x) const { return layer_norm(x, gain, bias); }
};

// Filter generators and output projection of one dynamic convolution.
// Row i of `gen1` is the K1 x C matrix W1_i flattened row-major; row i of
// `gen2` is the C x K1 matrix W2_i. `proj` maps the flattened C*H*W map
// back to the input dimension.
struct DynamicConvWeights {
  Matrix gen1;
  Matrix gen2;
  Matrix proj;
  LayerNormParams ln1;   // K1
  LayerNormParams ln2;   // C
  LayerNormParams ln_proj;
  LayerNormParams ln_out;
};

struct HeadWeights {
  // pair fusion
  Matrix pf_sub0, pf_obj0, pf_sub1, pf_obj1;
  LayerNormParams pf_ln;
  // object self-attention
  AttentionWeights attn;
  LayerNormParams attn_ln;
  // dynamic convolutions
  DynamicConvWeights obj_dyn;
  DynamicConvWeights rel_dyn;
  // object FFN with cls / reg branches
  Matrix obj_ffn1, obj_ffn2;
  LayerNormParams obj_ffn_ln;
  Matrix obj_cls, obj_reg;
  // entity-to-relation fusion
  Matrix e2r_sub, e2r_obj, e2r_x, e2r_y, e2r_pos_sub, e2r_pos_obj, e2r_pos_rel;
  LayerNormParams e2r_ln_sub, e2r_ln_obj, e2r_ln_out;
  // relation FFN
  Matrix rel_ffn1, rel_ffn2;
  LayerNormParams rel_ffn_ln;
  Matrix rel_cls;
  // object-branch relation classifier
  Matrix rf_sub, rf_obj, rf_cls;
  LayerNormParams rf_ln_sub, rf_ln_obj;

  // Every matrix uniform in +-scale/sqrt(fan_in); layer norms identity.
  static HeadWeights random(const HeadConfig& cfg, std::uint64_t seed, double scale = 1.0);
  // Every matrix zero; layer norms identity.
  static HeadWeights zeros(const HeadConfig& cfg);

  // Visits every parameter as (name, Matrix&) or (name, Vector&). Names are
  // the serialization keys.
  template <typename F>
  void for_each(F&& f);
  template <typename F>
  void for_each(F&& f) const {
    const_cast<HeadWeights*>(this)->for_each([&](const std::string& n, auto& p) {
      f(n, std::as_const(p));
    });
  }

  // Throws DimensionMismatch when any shape disagrees with `cfg`.
  void validate(const HeadConfig& cfg) const;
};

struct TripletQuery {
  Box sub_box;
  Box obj_box;
  Vector sub_content;
  Vector obj_content;
  Vector rel_content;
};

// Sinusoidal encoding of (cx, cy, w, h); dim must be a multiple of 8.
Vector positional_encoding(const Box& box, std::size_t dim);

struct PairFusionResult {
  Vector sub;
  Vector obj;
};

PairFusionResult pair_fusion(std::span<const double> x_sub, std::span<const double> x_obj,
                             std::span<const double> pe_sub, std::span<const double> pe_obj,
                             const HeadWeights& w);

// `pooled` is C x (H*W) as produced by FeatureMap::roi_pool.
Vector dynamic_conv(std::span<const double> x, const Matrix& pooled,
                    const DynamicConvWeights& w);

Vector e2r_fusion(std::span<const double> f_sub, std::span<const double> f_obj,
                  std::span<const double> f_rel, std::span<const double> pe_sub,
                  std::span<const double> pe_obj, const HeadWeights& w);

Vector relation_logits(std::span<const double> f_sub, std::span<const double> f_obj,
                       std::span<const double> rel_logits, const HeadWeights& w);

// Applies (dcx, dcy, dlogw, dlogh) to a box; log deltas clamped.
Box apply_box_delta(const Box& box, std::span<const double> delta, double max_log_scale);

struct HeadOutput {
  std::vector<TripletQuery> queries;  // refined, input to the next head
  std::vector<TripletPrediction> predictions;
};

// One triplet detection head. `pe_boxes`, when non-empty, supplies the
// (subject, object) boxes used for positional encoding instead of the
// query boxes.
HeadOutput head_forward(const std::vector<TripletQuery>& queries, const FeatureMap& fmap,
                        const HeadWeights& w, const HeadConfig& cfg,
                        const std::vector<std::pair<Box, Box>>& pe_boxes = {});

class Cascade {
 public:
  Cascade(HeadConfig cfg, std::vector<HeadWeights> heads);
  static Cascade random(const HeadConfig& cfg, std::size_t stages, std::uint64_t seed,
                        double scale = 1.0);

  const HeadConfig& config() const { return cfg_; }
  const std::vector<HeadWeights>& heads() const { return heads_; }

  // Output of every head in order; the last entry is the final prediction.
  std::vector<HeadOutput> forward(const std::vector<TripletQuery>& queries,
                                  const FeatureMap& fmap) const;

 private:
  HeadConfig cfg_;
  std::vector<HeadWeights> heads_;
};

// Seeded learnable-query initialization: boxes spread over the image,
// content vectors N(0, 1).
std::vector<TripletQuery> init_queries(const HeadConfig& cfg, std::size_t n,
                                       std::uint64_t seed);

template <typename F>
void HeadWeights::for_each(F&& f) {
  auto ln = [&](const std::string& n, LayerNormParams& p) {
    f(n + ".gain", p.gain);
    f(n + ".bias", p.bias);
  };
  auto dyn = [&](const std::string& n, DynamicConvWeights& d) {
    f(n + ".gen1", d.gen1);
    f(n + ".gen2", d.gen2);
    f(n + ".proj", d.proj);
    ln(n + ".ln1", d.ln1);
    ln(n + ".ln2", d.ln2);
    ln(n + ".ln_proj", d.ln_proj);
    ln(n + ".ln_out", d.ln_out);
  };
  f(std::string("pair_fusion.sub0"), pf_sub0);
  f(std::string("pair_fusion.obj0"), pf_obj0);
  f(std::string("pair_fusion.sub1"), pf_sub1);
  f(std::string("pair_fusion.obj1"), pf_obj1);
  ln("pair_fusion.ln", pf_ln);
  f(std::string("attention.query"), attn.query);
  f(std::string("attention.key"), attn.key);
  f(std::string("attention.value"), attn.value);
  f(std::string("attention.output"), attn.output);
  ln("attention.ln", attn_ln);
  dyn("obj_dynconv", obj_dyn);
  dyn("rel_dynconv", rel_dyn);
  f(std::string("obj_ffn.fc1"), obj_ffn1);
  f(std::string("obj_ffn.fc2"), obj_ffn2);
  ln("obj_ffn.ln", obj_ffn_ln);
  f(std::string("obj_cls"), obj_cls);
  f(std::string("obj_reg"), obj_reg);
  f(std::string("e2r.sub"), e2r_sub);
  f(std::string("e2r.obj"), e2r_obj);
  f(std::string("e2r.x"), e2r_x);
  f(std::string("e2r.y"), e2r_y);
  f(std::string("e2r.pos_sub"), e2r_pos_sub);
  f(std::string("e2r.pos_obj"), e2r_pos_obj);
  f(std::string("e2r.pos_rel"), e2r_pos_rel);
  ln("e2r.ln_sub", e2r_ln_sub);
  ln("e2r.ln_obj", e2r_ln_obj);
  ln("e2r.ln_out", e2r_ln_out);
  f(std::string("rel_ffn.fc1"), rel_ffn1);
  f(std::string("rel_ffn.fc2"), rel_ffn2);
  ln("rel_ffn.ln", rel_ffn_ln);
  f(std::string("rel_cls"), rel_cls);
  f(std::string("rel_fusion.sub"), rf_sub);
  f(std::string("rel_fusion.obj"), rf_obj);
  f(std::string("rel_fusion.cls"), rf_cls);
  ln("rel_fusion.ln_sub", rf_ln_sub);
  ln("rel_fusion.ln_obj", rf_ln_obj);
}

}  // namespace ssrcnn
