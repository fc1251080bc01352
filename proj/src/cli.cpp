#include "ssrcnn/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ssrcnn/calibration.hpp"
#include "ssrcnn/error.hpp"
#include "ssrcnn/metrics.hpp"

namespace ssrcnn::cli {

using io::Json;

HeadConfig toy_head_config() {
  HeadConfig c;
  c.obj_dim = 32;
  c.rel_dim = 16;
  c.channels = 16;
  c.filters = 4;
  c.attention_heads = 4;
  c.obj_ffn_dim = 64;
  c.rel_ffn_dim = 32;
  return c;
}

AssignOptions RunConfig::assign_options() const {
  AssignOptions a;
  a.cost.coeffs = coefficients;
  a.cost.object_focal = object_focal;
  a.cost.relation_focal = relation_focal;
  a.cost.class_mode = class_mode;
  a.mode = assign_mode;
  a.num_object_classes = scene.num_object_classes;
  return a;
}

FitOptions RunConfig::fit_options() const {
  FitOptions f;
  f.assign = assign_options();
  f.num_predicates = scene.num_predicates;
  f.slots = fit_slots;
  f.steps = fit_steps;
  f.step_size = fit_step_size;
  f.box_step_scale = fit_box_step_scale;
  f.seed = seed;
  return f;
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions e;
  e.ks = k_at;
  e.graph_constraint = graph_constraint_on();
  e.averaging = profile == Profile::vg ? RecallAveraging::macro : RecallAveraging::micro;
  return e;
}

void RunConfig::validate() const {
  if (images == 0) throw ConfigError("--images must be >= 1");
  if (queries == 0) throw ConfigError("--queries must be >= 1");
  if (heads == 0) throw ConfigError("--heads must be >= 1");
  if (!(tau >= 0.0)) throw ConfigError("--tau must be nonnegative");
  if (!(mu > 0.0)) throw ConfigError("--mu must be positive");
  if (k_at.empty()) throw ConfigError("--k-at needs at least one value");
  for (auto k : k_at)
    if (k == 0) throw ConfigError("--k-at values must be >= 1");
  if (jobs < 0) throw ConfigError("--jobs must be nonnegative");
  if (fit_slots == 0) throw ConfigError("fit.slots must be >= 1");
  coefficients.validate();
  object_focal.validate(static_cast<std::size_t>(scene.num_object_classes));
  relation_focal.validate(static_cast<std::size_t>(scene.num_predicates));
  scene.validate();
  perturb.validate();
  head.validate();
}

namespace {

const char* to_string(Profile p) { return p == Profile::vg ? "vg" : "oi"; }

Profile profile_from_string(const std::string& s) {
  if (s == "vg") return Profile::vg;
  if (s == "oi") return Profile::oi;
  throw ConfigError("unknown profile '" + s + "' (expected vg or oi)");
}

ClassCostMode class_mode_from_string(const std::string& s) {
  if (s == "full") return ClassCostMode::full;
  if (s == "target_only") return ClassCostMode::target_only;
  throw ConfigError("unknown class cost mode '" + s + "'");
}

Json focal_json(const FocalParams& f) {
  Json j = {{"alpha", f.alpha}, {"gamma", f.gamma}};
  if (!f.class_gamma.empty()) j["class_gamma"] = f.class_gamma;
  return j;
}

// Reads the keys of one config object, rejecting anything unknown.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      dst = it->template get<T>();
    } catch (const Json::exception& e) {
      throw ParseError(path_ + "/" + key, e.what());
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_ + "/" + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ParseError(path_ + "/" + k, "unknown config key");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_focal(const Json& j, const std::string& path, FocalParams& f) {
  Reader r(j, path);
  r.get("alpha", f.alpha);
  r.get("gamma", f.gamma);
  r.get("class_gamma", f.class_gamma);
  r.finish();
}

}  // namespace

Json to_json(const RunConfig& c) {
  const auto& k = c.coefficients;
  const auto& s = c.scene;
  const auto& p = c.perturb;
  const auto& m = c.prediction;
  Json j;
  j["seed"] = c.seed;
  j["images"] = c.images;
  j["queries"] = c.queries;
  j["heads"] = c.heads;
  j["tau"] = c.tau;
  j["mu"] = c.mu;
  j["k_at"] = c.k_at;
  j["profile"] = to_string(c.profile);
  j["graph_constraint"] = c.graph_constraint_on();
  j["jobs"] = c.jobs;
  j["coefficients"] = {{"lambda_cls_rel", k.lambda_cls_rel}, {"lambda_cls_obj", k.lambda_cls_obj},
                       {"lambda_l1", k.lambda_l1},           {"lambda_giou", k.lambda_giou},
                       {"eta_cls", k.eta_cls},               {"eta_l1", k.eta_l1},
                       {"eta_giou", k.eta_giou}};
  j["object_focal"] = focal_json(c.object_focal);
  j["relation_focal"] = focal_json(c.relation_focal);
  j["class_cost"] = c.class_mode == ClassCostMode::full ? "full" : "target_only";
  j["assign_mode"] = ssrcnn::to_string(c.assign_mode);
  j["scene"] = {{"min_objects", s.min_objects},
                {"max_objects", s.max_objects},
                {"num_object_classes", s.num_object_classes},
                {"num_predicates", s.num_predicates},
                {"relation_density", s.relation_density},
                {"relations_per_image", s.relations_per_image},
                {"min_box_side", s.min_box_side},
                {"max_box_side", s.max_box_side},
                {"predicate_skew", s.predicate_skew},
                {"object_skew", s.object_skew},
                {"image_width", s.image_width},
                {"image_height", s.image_height},
                {"feature_channels", s.feature_channels},
                {"feature_size", s.feature_size}};
  auto perturb_json = [](const PerturbModel& q) {
    return Json{{"box_jitter", q.box_jitter}, {"label_flip", q.label_flip}, {"drop", q.drop},
                {"spurious_rate", q.spurious_rate}, {"score_noise", q.score_noise}};
  };
  j["perturb"] = perturb_json(p);
  j["prediction"] = {{"boxes", perturb_json(m.boxes)},
                     {"signal", m.signal},
                     {"noise", m.noise},
                     {"frequency_bias", m.frequency_bias},
                     {"distractors_per_image", m.distractors_per_image}};
  j["head"] = io::head_config_to_json(c.head);
  j["weight_scale"] = c.weight_scale;
  j["fit"] = {{"slots", c.fit_slots},
              {"steps", c.fit_steps},
              {"step_size", c.fit_step_size},
              {"box_step_scale", c.fit_box_step_scale}};
  return j;
}

RunConfig config_from_json(const Json& j, RunConfig c) {
  Reader r(j, "");
  r.get("seed", c.seed);
  r.get("images", c.images);
  r.get("queries", c.queries);
  r.get("heads", c.heads);
  r.get("tau", c.tau);
  r.get("mu", c.mu);
  r.get("k_at", c.k_at);
  r.get("jobs", c.jobs);
  r.get("weight_scale", c.weight_scale);
  r.child("_meta");
  if (const Json* v = r.child("profile")) {
    if (!v->is_string()) throw ParseError("/profile", "expected a string");
    c.profile = profile_from_string(v->get<std::string>());
  }
  if (const Json* v = r.child("graph_constraint")) {
    if (!v->is_boolean()) throw ParseError("/graph_constraint", "expected a boolean");
    c.graph_constraint = v->get<bool>();
  }
  if (const Json* v = r.child("class_cost")) c.class_mode = class_mode_from_string(v->get<std::string>());
  if (const Json* v = r.child("assign_mode")) c.assign_mode = assign_mode_from_string(v->get<std::string>());
  if (const Json* v = r.child("coefficients")) {
    Reader q(*v, "/coefficients");
    auto& k = c.coefficients;
    q.get("lambda_cls_rel", k.lambda_cls_rel);
    q.get("lambda_cls_obj", k.lambda_cls_obj);
    q.get("lambda_l1", k.lambda_l1);
    q.get("lambda_giou", k.lambda_giou);
    q.get("eta_cls", k.eta_cls);
    q.get("eta_l1", k.eta_l1);
    q.get("eta_giou", k.eta_giou);
    q.finish();
  }
  if (const Json* v = r.child("object_focal")) read_focal(*v, "/object_focal", c.object_focal);
  if (const Json* v = r.child("relation_focal")) read_focal(*v, "/relation_focal", c.relation_focal);
  if (const Json* v = r.child("scene")) {
    Reader q(*v, "/scene");
    auto& s = c.scene;
    q.get("min_objects", s.min_objects);
    q.get("max_objects", s.max_objects);
    q.get("num_object_classes", s.num_object_classes);
    q.get("num_predicates", s.num_predicates);
    q.get("relation_density", s.relation_density);
    q.get("relations_per_image", s.relations_per_image);
    q.get("min_box_side", s.min_box_side);
    q.get("max_box_side", s.max_box_side);
    q.get("predicate_skew", s.predicate_skew);
    q.get("object_skew", s.object_skew);
    q.get("image_width", s.image_width);
    q.get("image_height", s.image_height);
    q.get("feature_channels", s.feature_channels);
    q.get("feature_size", s.feature_size);
    q.finish();
  }
  auto read_perturb = [](const Json& v, const std::string& path, PerturbModel& p) {
    Reader q(v, path);
    q.get("box_jitter", p.box_jitter);
    q.get("label_flip", p.label_flip);
    q.get("drop", p.drop);
    q.get("spurious_rate", p.spurious_rate);
    q.get("score_noise", p.score_noise);
    q.finish();
  };
  if (const Json* v = r.child("perturb")) read_perturb(*v, "/perturb", c.perturb);
  if (const Json* v = r.child("prediction")) {
    Reader q(*v, "/prediction");
    auto& m = c.prediction;
    if (const Json* b = q.child("boxes")) read_perturb(*b, "/prediction/boxes", m.boxes);
    q.get("signal", m.signal);
    q.get("noise", m.noise);
    q.get("frequency_bias", m.frequency_bias);
    q.get("distractors_per_image", m.distractors_per_image);
    q.finish();
  }
  if (const Json* v = r.child("head")) {
    if (!v->is_object()) throw ParseError("/head", "expected an object");
    Json merged = io::head_config_to_json(c.head);
    for (const auto& [k, val] : v->items()) {
      if (!merged.contains(k)) throw ParseError("/head/" + k, "unknown config key");
      merged[k] = val;
    }
    c.head = io::head_config_from_json(merged);
  }
  if (const Json* v = r.child("fit")) {
    Reader q(*v, "/fit");
    q.get("slots", c.fit_slots);
    q.get("steps", c.fit_steps);
    q.get("step_size", c.fit_step_size);
    q.get("box_step_scale", c.fit_box_step_scale);
    q.finish();
  }
  r.finish();
  return c;
}

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("ssrcnn");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("SSRCNN_LOG")) {
    const auto level = spdlog::level::from_str(lvl);
    if (level == spdlog::level::off && std::string(lvl) != "off")
      spdlog::warn("unrecognised SSRCNN_LOG value '{}'", lvl);
    else
      spdlog::set_level(level);
  }
}

std::string replace_extension(const std::string& path, const std::string& ext) {
  std::filesystem::path p(path);
  p.replace_extension(ext);
  return p.string();
}

Json meta(const char* command, const RunConfig& cfg, Json inputs = Json::object()) {
  return {{"version", io::kVersion}, {"command", command}, {"config", to_json(cfg)}, {"inputs", inputs}};
}

void write_json(const std::string& path, const Json& j) { io::write_atomic(path, j.dump(2) + "\n"); }

std::string fmt_fixed(double v, int prec = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

// Aligned-column text table.
std::string text_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream s;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) s << "  ";
      if (c == 0) s << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      else s << std::right << std::setw(static_cast<int>(width[c])) << r[c];
    }
    s << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return s.str();
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream s;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) s << (c ? "," : "") << r[c];
    s << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return s.str();
}

io::Vocab default_vocab(const SceneConfig& s) {
  io::Vocab v;
  for (int i = 0; i < s.num_object_classes; ++i) v.objects.push_back("object_" + std::to_string(i));
  for (int i = 0; i < s.num_predicates; ++i) v.predicates.push_back("predicate_" + std::to_string(i));
  return v;
}

io::Dataset synthetic_dataset(const SceneConfig& s, std::size_t images) {
  io::Dataset d;
  d.vocab = default_vocab(s);
  const auto scenes = generate_dataset(s, images);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    io::DatasetImage im;
    std::ostringstream id;
    id << "img_" << std::setw(6) << std::setfill('0') << i;
    im.id = id.str();
    im.width = scenes[i].width;
    im.height = scenes[i].height;
    im.graph = scenes[i].graph;
    im.seed = scenes[i].seed;
    for (std::size_t k = 0; k < im.graph.objects.size(); ++k) im.object_ids.push_back(static_cast<long long>(k));
    d.images.push_back(std::move(im));
  }
  return d;
}

std::vector<SceneGraph> graphs_of(const io::Dataset& d) {
  std::vector<SceneGraph> g;
  for (const auto& im : d.images) g.push_back(im.graph);
  return g;
}

// Vocabulary sizes of a loaded dataset override the configured ones.
void adopt_vocab(RunConfig& cfg, const io::Dataset& d) {
  cfg.scene.num_object_classes = static_cast<int>(d.vocab.objects.size());
  cfg.scene.num_predicates = static_cast<int>(d.vocab.predicates.size());
  cfg.head.num_object_classes = cfg.scene.num_object_classes;
  cfg.head.num_predicates = cfg.scene.num_predicates;
}

std::vector<io::PredictionImage> simulated_predictions(const io::Dataset& d, const RunConfig& cfg) {
  const auto freq = FrequencyTable::predicates(graphs_of(d), static_cast<int>(d.vocab.predicates.size()));
  std::vector<io::PredictionImage> out(d.images.size());
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    out[i].id = d.images[i].id;
    out[i].triplets = simulate_predictions(d.images[i].graph, cfg.prediction, freq,
                                           static_cast<int>(d.vocab.objects.size()), cfg.seed + i);
  }
  return out;
}

// Parses a JSON file, prefixing parse-error locations with the file name.
template <typename F>
auto in_file(const std::string& path, F&& parse) {
  const Json j = io::read_json(path);
  try {
    return parse(j);
  } catch (const ParseError& e) {
    throw ParseError(path + ":" + e.path(), e.detail());
  }
}

Json box_json(const Box& b) { return Json::array({b.cx(), b.cy(), b.w(), b.h()}); }

Json matching_pairs(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                    const std::vector<double>& costs, const char* target) {
  Json arr = Json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i)
    arr.push_back({{"prediction", pairs[i].first}, {target, pairs[i].second}, {"cost", costs[i]}});
  return arr;
}

struct Scene {
  SceneGraph graph;
  std::uint64_t seed;
  std::string source;
};

Scene pick_scene(RunConfig& cfg, const std::string& dataset, std::size_t image) {
  if (!dataset.empty()) {
    const io::Dataset d = io::load_dataset(dataset);
    adopt_vocab(cfg, d);
    if (image >= d.images.size())
      throw ConfigError("--image " + std::to_string(image) + " out of range for " + dataset);
    const auto& im = d.images[image];
    return {im.graph, im.seed.value_or(cfg.seed + image), dataset + "#" + im.id};
  }
  SceneConfig s = cfg.scene;
  s.seed = cfg.seed;
  return {generate_scene(s).graph, cfg.seed, "synthetic"};
}

// ---- subcommands ----------------------------------------------------------

struct GenArgs {
  std::string pred_out;
  std::string seen_out;
};

int run_gen(const RunConfig& cfg, const std::string& out, const GenArgs& a) {
  SceneConfig s = cfg.scene;
  s.seed = cfg.seed;
  const io::Dataset d = synthetic_dataset(s, cfg.images);
  write_json(out, io::dataset_to_json(d, meta("gen", cfg)));
  std::size_t rels = 0, objs = 0;
  for (const auto& im : d.images) {
    rels += im.graph.relations.size();
    objs += im.graph.objects.size();
  }
  if (!a.pred_out.empty())
    write_json(a.pred_out, io::predictions_to_json(simulated_predictions(d, cfg), d, meta("gen", cfg)));
  if (!a.seen_out.empty()) {
    // Seen set of a disjoint training split.
    SceneConfig t = s;
    t.seed = cfg.seed + 1000000;
    Json j = io::seen_set_to_json(io::seen_set_of(synthetic_dataset(t, cfg.images)));
    j["_meta"] = meta("gen", cfg, {{"train_seed", t.seed}});
    write_json(a.seen_out, j);
  }
  std::cout << "wrote " << out << ": " << d.images.size() << " images, " << objs << " objects, " << rels
            << " relations\n";
  return 0;
}

struct SceneArgs {
  std::string dataset;
  std::size_t image = 0;
};

int run_assign(RunConfig cfg, const std::string& out, const SceneArgs& a, bool queries_given) {
  const Scene sc = pick_scene(cfg, a.dataset, a.image);
  const std::size_t n = queries_given ? cfg.queries : std::max<std::size_t>(cfg.queries, sc.graph.relations.size());
  const auto preds = random_slots(n, cfg.scene.num_object_classes, cfg.scene.num_predicates, cfg.seed);
  const auto aux = perturb_detections(sc.graph, cfg.perturb, cfg.scene.num_object_classes, sc.seed);
  const AssignmentResult r = two_stage_assign(preds, sc.graph, aux, cfg.assign_options());

  Json pseudo = Json::array();
  for (const auto& p : r.pseudo) {
    auto obj = [](const PseudoObject& o) {
      return Json{{"box", box_json(o.box)}, {"label", o.label ? Json(*o.label) : Json(nullptr)}, {"hit", o.hit}};
    };
    pseudo.push_back({{"sub", obj(p.sub)}, {"obj", obj(p.obj)}, {"sub_detection", p.sub_detection},
                      {"obj_detection", p.obj_detection}});
  }
  Json j = {{"_meta", meta("assign", cfg, {{"scene", sc.source}})},
            {"mode", ssrcnn::to_string(r.mode)},
            {"predictions", n},
            {"gt_triplets", sc.graph.relations.size()},
            {"stage1", matching_pairs(r.stage1, r.stage1_costs, "gt")},
            {"stage2", matching_pairs(r.stage2, r.stage2_costs, "pseudo")},
            {"background", r.background},
            {"pseudo", pseudo},
            {"pseudo_count", r.pseudo.size()},
            {"k_min", r.k_min},
            {"candidate_count", r.candidate_count}};
  write_json(out, j);
  std::cout << "stage1 " << r.stage1.size() << "  stage2 " << r.stage2.size() << "  background "
            << r.background.size() << "  |U| " << r.pseudo.size() << "  K_min " << r.k_min << "  C "
            << r.candidate_count << "\n";
  return 0;
}

int run_fit(RunConfig cfg, const std::string& out, const SceneArgs& a, bool queries_given,
            std::optional<std::size_t> steps) {
  if (queries_given) cfg.fit_slots = cfg.queries;
  if (steps) cfg.fit_steps = *steps;
  const Scene sc = pick_scene(cfg, a.dataset, a.image);
  const auto aux = perturb_detections(sc.graph, cfg.perturb, cfg.scene.num_object_classes, sc.seed);
  const FitOptions opt = cfg.fit_options();
  const auto init = random_slots(opt.slots, cfg.scene.num_object_classes, cfg.scene.num_predicates, cfg.seed);
  const FitResult r = fit_direct(init, sc.graph, aux, opt);

  Json traj = Json::array();
  std::vector<std::vector<std::string>> rows;
  std::optional<std::size_t> first_full;
  for (const auto& s : r.trajectory) {
    traj.push_back({{"step", s.step}, {"loss", s.loss}, {"recall", s.recall}, {"step_size", s.accepted_step}});
    rows.push_back({std::to_string(s.step), fmt_fixed(s.loss, 6), fmt_fixed(s.recall, 4)});
    if (!first_full && s.recall >= 1.0) first_full = s.step;
  }
  const FitStep& last = r.trajectory.back();
  Json j = {{"_meta", meta("fit", cfg, {{"scene", sc.source}})},
            {"gt_triplets", sc.graph.relations.size()},
            {"recall_k", opt.recall_k},
            {"trajectory", traj},
            {"final_loss", last.loss},
            {"final_recall", last.recall},
            {"first_full_recall_step", first_full ? Json(*first_full) : Json(nullptr)},
            {"diverged", r.diverged}};
  write_json(out, j);
  io::write_atomic(replace_extension(out, ".csv"), csv({"step", "loss", "recall_at_" + std::to_string(opt.recall_k)}, rows));
  std::cout << "steps " << last.step << "  loss " << fmt_fixed(last.loss, 6) << "  R@" << opt.recall_k << " "
            << fmt_fixed(last.recall, 4);
  if (first_full) std::cout << "  (full recall at step " << *first_full << ")";
  std::cout << "\n";
  return r.diverged ? 3 : 0;
}

struct EvalArgs {
  std::string gt;
  std::string pred;
  std::string seen;
};

std::string format_report(const MetricsReport& r, const RunConfig& cfg) {
  std::vector<std::vector<std::string>> rows;
  for (auto k : cfg.k_at) {
    const auto z = r.zero_shot_recall.find(k);
    const bool has_z = z != r.zero_shot_recall.end() && z->second;
    rows.push_back({std::to_string(k), fmt_fixed(100 * r.recall.at(k)), fmt_fixed(100 * r.mean_recall.at(k)),
                    has_z ? fmt_fixed(100 * *z->second) : "-"});
  }
  std::string s = text_table({"K", "R@K", "mR@K", "zR@K"}, rows);
  s += "micro R@50 " + fmt_fixed(100 * r.recall50_micro) + "  wmAP_rel " + fmt_fixed(100 * r.wmap_rel.value) +
       "  wmAP_phr " + fmt_fixed(100 * r.wmap_phr.value) + "  score_wtd " + fmt_fixed(100 * r.score_wtd) + "\n";
  return s;
}

int run_eval(RunConfig cfg, const std::string& out, const EvalArgs& a) {
  const io::Dataset gt = io::load_dataset(a.gt);
  adopt_vocab(cfg, gt);
  const auto preds = in_file(a.pred, [&](const Json& j) { return io::parse_predictions(j, gt); });
  std::optional<SeenSet> seen;
  if (!a.seen.empty()) seen = in_file(a.seen, [](const Json& j) { return io::parse_seen_set(j); });
  const MetricsReport r = evaluate(io::join(gt, preds), cfg.eval_options(), seen ? &*seen : nullptr);

  Json j = io::metrics_to_json(r);
  j["_meta"] = meta("eval", cfg, {{"gt", a.gt}, {"pred", a.pred}, {"seen", a.seen}});
  write_json(out, j);

  std::vector<std::string> header{"predicate", "gt"};
  for (auto k : cfg.k_at) header.push_back("R@" + std::to_string(k));
  header.push_back("AP_rel");
  header.push_back("AP_phr");
  std::vector<std::vector<std::string>> rows;
  const std::size_t np = gt.vocab.predicates.size();
  for (std::size_t c = 0; c < np; ++c) {
    std::size_t n_gt = 0;
    std::vector<std::string> row{gt.vocab.predicates[c], ""};
    for (auto k : cfg.k_at) {
      const auto& cats = r.per_category.at(k);
      const auto it = std::find_if(cats.begin(), cats.end(), [&](const CategoryRecall& x) {
        return x.predicate == static_cast<int>(c);
      });
      if (it == cats.end()) {
        row.push_back("");
      } else {
        n_gt = it->gt_count;
        row.push_back(fmt_fixed(100 * it->recall(), 4));
      }
    }
    if (n_gt == 0) continue;
    row[1] = std::to_string(n_gt);
    auto ap = [&](const WmapResult& w) {
      const auto it = w.ap.find(static_cast<int>(c));
      return it == w.ap.end() ? std::string() : fmt_fixed(100 * it->second, 4);
    };
    row.push_back(ap(r.wmap_rel));
    row.push_back(ap(r.wmap_phr));
    rows.push_back(std::move(row));
  }
  io::write_atomic(replace_extension(out, ".csv"), csv(header, rows));
  std::cout << format_report(r, cfg);
  return 0;
}

struct CalibrateArgs {
  std::string gt;
  std::string pred;
  std::string freq;
  std::string freq_out;
  std::vector<double> taus{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
};

int run_calibrate(RunConfig cfg, const std::string& out, const CalibrateArgs& a) {
  io::Dataset gt;
  if (a.gt.empty()) {
    SceneConfig s = cfg.scene;
    s.seed = cfg.seed;
    gt = synthetic_dataset(s, cfg.images);
  } else {
    gt = io::load_dataset(a.gt);
  }
  adopt_vocab(cfg, gt);
  const auto graphs = graphs_of(gt);
  const FrequencyTable freq = a.freq.empty()
                                  ? FrequencyTable::predicates(graphs, cfg.scene.num_predicates)
                                  : in_file(a.freq, [&](const Json& j) {
                                      return io::parse_frequencies(j, gt.vocab.predicates);
                                    });
  auto preds = a.pred.empty() ? simulated_predictions(gt, cfg)
                              : in_file(a.pred, [&](const Json& j) { return io::parse_predictions(j, gt); });
  for (const auto& p : preds)
    for (const auto& t : p.triplets)
      if (t.predicate_logits.empty())
        throw ConfigError("calibrate needs predicate_logits on every predicted triplet");

  std::vector<double> taus = a.taus;
  if (std::find(taus.begin(), taus.end(), cfg.tau) == taus.end()) taus.push_back(cfg.tau);
  std::sort(taus.begin(), taus.end());

  const EvalOptions eo = cfg.eval_options();
  Json curve = Json::array();
  std::vector<std::vector<std::string>> rows;
  for (double tau : taus) {
    auto adjusted = preds;
    for (auto& p : adjusted)
      for (auto& t : p.triplets) rescore_from_logits(t, logit_adjust(t.predicate_logits, freq, tau));
    const auto images = io::join(gt, adjusted);
    Json point = {{"tau", tau}};
    std::vector<std::string> row{fmt_fixed(tau, 3)};
    for (auto k : cfg.k_at) {
      const double rk = recall_at_k(images, k, eo.graph_constraint, eo.averaging);
      const double mrk = mean_recall_at_k(images, k, eo.graph_constraint);
      point["recall"][std::to_string(k)] = 100 * rk;
      point["mean_recall"][std::to_string(k)] = 100 * mrk;
      row.push_back(fmt_fixed(100 * rk));
      row.push_back(fmt_fixed(100 * mrk));
    }
    curve.push_back(point);
    rows.push_back(std::move(row));
  }
  std::vector<std::string> header{"tau"};
  for (auto k : cfg.k_at) {
    header.push_back("R@" + std::to_string(k));
    header.push_back("mR@" + std::to_string(k));
  }

  Json gammas = Json::object();
  const auto g = freq.gammas(cfg.mu);
  for (std::size_t c = 0; c < g.size(); ++c) gammas[gt.vocab.predicates[c]] = g[c];
  Json j = {{"_meta", meta("calibrate", cfg, {{"gt", a.gt}, {"pred", a.pred}, {"freq", a.freq}})},
            {"scale", "percent"},
            {"curve", curve},
            {"adaptive_gamma", gammas}};
  write_json(out, j);
  io::write_atomic(replace_extension(out, ".csv"), csv(header, rows));
  if (!a.freq_out.empty()) write_json(a.freq_out, io::frequencies_to_json(freq, gt.vocab.predicates, meta("calibrate", cfg)));
  std::cout << text_table(header, rows);
  return 0;
}

struct ForwardArgs {
  std::string weights;
  std::string save_weights;
};

int run_forward(RunConfig cfg, const std::string& out, const ForwardArgs& a) {
  std::optional<Cascade> cascade;
  if (!a.weights.empty()) {
    cascade = in_file(a.weights, [](const Json& j) { return io::cascade_from_json(j); });
    cfg.head = cascade->config();
    cfg.heads = cascade->heads().size();
  } else {
    cfg.head.num_object_classes = cfg.scene.num_object_classes;
    cfg.head.num_predicates = cfg.scene.num_predicates;
    cascade = Cascade::random(cfg.head, cfg.heads, cfg.seed, cfg.weight_scale);
  }
  if (cfg.head.channels != cfg.scene.feature_channels)
    throw ConfigError("head channels (" + std::to_string(cfg.head.channels) + ") differ from feature channels (" +
                      std::to_string(cfg.scene.feature_channels) + ")");
  SceneConfig s = cfg.scene;
  s.seed = cfg.seed;
  const SyntheticScene scene = generate_scene(s);
  const auto queries = init_queries(cfg.head, cfg.queries, cfg.seed);
  const auto outs = cascade->forward(queries, scene.features);

  Json heads = Json::array();
  for (const auto& h : outs) {
    Json trips = Json::array();
    for (const auto& p : h.predictions) {
      auto obj = [](const ObjectPrediction& o) {
        const auto best = std::max_element(o.logits.begin(), o.logits.end());
        return Json{{"box", box_json(o.box)}, {"label", best - o.logits.begin()}, {"logit", *best}};
      };
      const auto best = std::max_element(p.rel_logits.begin(), p.rel_logits.end());
      trips.push_back({{"sub", obj(p.sub)}, {"obj", obj(p.obj)}, {"predicate", best - p.rel_logits.begin()},
                       {"predicate_logit", *best}});
    }
    heads.push_back({{"triplets", trips}});
  }
  Json j = {{"_meta", meta("forward", cfg, {{"weights", a.weights}})}, {"box_format", "cxcywh_normalized"}, {"heads", heads}};
  write_json(out, j);
  if (!a.save_weights.empty()) {
    Json w = io::cascade_to_json(*cascade);
    w["_meta"] = meta("forward", cfg);
    write_json(a.save_weights, w);
  }
  std::cout << "forward: " << outs.size() << " heads x " << cfg.queries << " queries\n";
  return 0;
}

struct ReportArgs {
  std::optional<double> recall50, wmap_rel, wmap_phr;
  std::string metrics;
};

int run_report(const RunConfig& cfg, const std::string& out, const ReportArgs& a) {
  double r50, rel, phr;
  if (!a.metrics.empty()) {
    const Json m = io::read_json(a.metrics);
    auto num = [&](const char* key) {
      if (!m.contains(key) || !m[key].is_number()) throw ParseError(a.metrics + ":/" + key, "missing number");
      return m[key].get<double>();
    };
    r50 = num("recall50_micro");
    rel = num("wmap_rel");
    phr = num("wmap_phr");
  } else {
    if (!a.recall50 || !a.wmap_rel || !a.wmap_phr)
      throw ConfigError("report needs --metrics or all of --recall50, --wmap-rel, --wmap-phr");
    r50 = *a.recall50;
    rel = *a.wmap_rel;
    phr = *a.wmap_phr;
  }
  const double score = weighted_score(r50, rel, phr);
  Json j = {{"_meta", meta("report", cfg, {{"metrics", a.metrics}})},
            {"scale", "percent"},
            {"recall50_micro", r50},
            {"wmap_rel", rel},
            {"wmap_phr", phr},
            {"score_wtd", score}};
  write_json(out, j);
  std::cout << text_table({"R@50", "wmAP_rel", "wmAP_phr", "score_wtd"},
                          {{fmt_fixed(r50), fmt_fixed(rel), fmt_fixed(phr), fmt_fixed(score)}});
  return 0;
}

void print_error(const std::string& kind, const std::string& message, const std::string& path = {}) {
  Json e = {{"kind", kind}, {"message", message}};
  if (!path.empty()) e["path"] = path;
  std::cerr << Json{{"error", e}}.dump() << std::endl;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  if (!spdlog::get("ssrcnn")) configure_logging();

  CLI::App app{"Structured sparse scene-graph generation toolkit", "ssrcnn"};
  app.set_version_flag("--version", io::kVersion);
  app.require_subcommand(1);

  RunConfig flags;
  std::string config_path, out, profile, graph_constraint;
  auto* o_seed = app.add_option("--seed", flags.seed, "Master seed");
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* o_images = app.add_option("--images", flags.images, "Image count");
  auto* o_queries = app.add_option("--queries", flags.queries, "Triplet query count N");
  auto* o_heads = app.add_option("--heads", flags.heads, "Cascade head count");
  auto* o_tau = app.add_option("--tau", flags.tau, "Logit adjustment scale");
  auto* o_mu = app.add_option("--mu", flags.mu, "Adaptive focal gamma exponent");
  auto* o_k = app.add_option("--k-at", flags.k_at, "Recall cut-offs (repeatable)")->delimiter(',');
  app.add_option("--profile", profile, "Dataset profile")->check(CLI::IsMember({"vg", "oi"}));
  app.add_option("--graph-constraint", graph_constraint, "Graph constraint")->check(CLI::IsMember({"on", "off"}));
  auto* o_jobs = app.add_option("--jobs", flags.jobs, "Worker thread limit (0: all)");
  auto* o_out = app.add_option("--out", out, "Output artifact path");

  auto sub = [&](const char* name, const char* desc) {
    auto* s = app.add_subcommand(name, desc);
    s->fallthrough();
    return s;
  };
  GenArgs gen_args;
  auto* gen = sub("gen", "Generate a synthetic dataset");
  gen->add_option("--pred-out", gen_args.pred_out, "Also write simulated predictions");
  gen->add_option("--seen-out", gen_args.seen_out, "Also write the seen set of a disjoint training split");

  SceneArgs assign_args, fit_args;
  std::optional<std::size_t> fit_steps;
  auto* assign = sub("assign", "Run two-stage label assignment on one scene");
  assign->add_option("--dataset", assign_args.dataset)->check(CLI::ExistingFile);
  assign->add_option("--image", assign_args.image);
  std::string assign_mode;
  assign->add_option("--mode", assign_mode)->check(CLI::IsMember({"pseudo", "full_bg", "no_bg"}));

  auto* fit = sub("fit", "Fit free prediction slots to one scene by gradient descent");
  fit->add_option("--dataset", fit_args.dataset)->check(CLI::ExistingFile);
  fit->add_option("--image", fit_args.image);
  fit->add_option("--steps", fit_steps);
  fit->add_option("--mode", assign_mode)->check(CLI::IsMember({"pseudo", "full_bg", "no_bg"}));

  EvalArgs eval_args;
  auto* eval = sub("eval", "Evaluate predictions against ground truth");
  eval->add_option("--gt", eval_args.gt)->required()->check(CLI::ExistingFile);
  eval->add_option("--pred", eval_args.pred)->required()->check(CLI::ExistingFile);
  eval->add_option("--seen", eval_args.seen)->check(CLI::ExistingFile);

  CalibrateArgs cal_args;
  auto* calibrate = sub("calibrate", "Sweep the logit adjustment scale");
  calibrate->add_option("--gt", cal_args.gt)->check(CLI::ExistingFile);
  calibrate->add_option("--pred", cal_args.pred)->check(CLI::ExistingFile);
  calibrate->add_option("--freq", cal_args.freq)->check(CLI::ExistingFile);
  calibrate->add_option("--freq-out", cal_args.freq_out);
  calibrate->add_option("--tau-grid", cal_args.taus)->delimiter(',');

  ForwardArgs fwd_args;
  auto* forward = sub("forward", "Run the head cascade on a synthetic feature map");
  forward->add_option("--weights", fwd_args.weights)->check(CLI::ExistingFile);
  forward->add_option("--save-weights", fwd_args.save_weights);

  ReportArgs rep_args;
  auto* report = sub("report", "Weighted score from component metrics");
  report->add_option("--recall50", rep_args.recall50);
  report->add_option("--wmap-rel", rep_args.wmap_rel);
  report->add_option("--wmap-phr", rep_args.wmap_phr);
  report->add_option("--metrics", rep_args.metrics)->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty())
      cfg = in_file(config_path, [&](const Json& j) { return config_from_json(j, cfg); });
    if (o_seed->count()) cfg.seed = flags.seed;
    if (o_images->count()) cfg.images = flags.images;
    if (o_queries->count()) cfg.queries = flags.queries;
    if (o_heads->count()) cfg.heads = flags.heads;
    if (o_tau->count()) cfg.tau = flags.tau;
    if (o_mu->count()) cfg.mu = flags.mu;
    if (o_k->count()) cfg.k_at = flags.k_at;
    if (o_jobs->count()) cfg.jobs = flags.jobs;
    if (!profile.empty()) cfg.profile = profile_from_string(profile);
    if (!graph_constraint.empty()) cfg.graph_constraint = graph_constraint == "on";
    if (!assign_mode.empty()) cfg.assign_mode = assign_mode_from_string(assign_mode);
    std::sort(cfg.k_at.begin(), cfg.k_at.end());
    cfg.k_at.erase(std::unique(cfg.k_at.begin(), cfg.k_at.end()), cfg.k_at.end());
    if (std::find(cfg.k_at.begin(), cfg.k_at.end(), 50) == cfg.k_at.end()) cfg.k_at.push_back(50);
    std::sort(cfg.k_at.begin(), cfg.k_at.end());
    cfg.validate();
    if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);

    auto out_or = [&](const char* def) { return o_out->count() ? out : std::string(def); };
    const bool queries_given = o_queries->count() > 0;
    if (*gen) return run_gen(cfg, out_or("dataset.json"), gen_args);
    if (*assign) return run_assign(cfg, out_or("assignment.json"), assign_args, queries_given);
    if (*fit) return run_fit(cfg, out_or("fit.json"), fit_args, queries_given, fit_steps);
    if (*eval) return run_eval(cfg, out_or("metrics.json"), eval_args);
    if (*calibrate) return run_calibrate(cfg, out_or("calibration.json"), cal_args);
    if (*forward) return run_forward(cfg, out_or("forward.json"), fwd_args);
    if (*report) return run_report(cfg, out_or("score.json"), rep_args);
    print_error("usage", "no subcommand");
    return 2;
  } catch (const ParseError& e) {
    print_error(e.kind(), e.what(), e.path());
    return 2;
  } catch (const ConfigError& e) {
    print_error(e.kind(), e.what());
    return 2;
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}

int cli_dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"ssrcnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ssrcnn::cli
