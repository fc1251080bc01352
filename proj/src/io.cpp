#include "ssrcnn/io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

#include "ssrcnn/error.hpp"

namespace ssrcnn::io {

namespace {

std::string at(const std::string& base, const std::string& key) { return base + "/" + key; }
std::string at(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(at(path, key), "missing field");
  return *it;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

long long integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<long long>();
}

const Json& array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  return j;
}

std::string id_string(const Json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ParseError(path, "expected a string or integer id");
}

int label_of(const Json& j, const std::vector<std::string>& names, const std::string& path) {
  if (j.is_string()) {
    const auto it = std::find(names.begin(), names.end(), j.get<std::string>());
    if (it == names.end()) throw ParseError(path, "unknown label '" + j.get<std::string>() + "'");
    return static_cast<int>(it - names.begin());
  }
  const long long v = integer(j, path);
  if (v < 0 || v >= static_cast<long long>(names.size()))
    throw ParseError(path, "label " + std::to_string(v) + " outside vocabulary of size " +
                               std::to_string(names.size()));
  return static_cast<int>(v);
}

// Pixel corners -> normalized Box, clipped to the image.
Box read_bbox(const Json& j, double width, double height, const std::string& path) {
  array(j, path);
  if (j.size() != 4) throw ParseError(path, "bbox must have 4 entries [x1, y1, x2, y2]");
  double c[4];
  for (std::size_t i = 0; i < 4; ++i) c[i] = number(j[i], at(path, i));
  if (!(c[2] > c[0])) throw ParseError(path, "x2 must exceed x1");
  if (!(c[3] > c[1])) throw ParseError(path, "y2 must exceed y1");
  const double x1 = std::clamp(c[0], 0.0, width), x2 = std::clamp(c[2], 0.0, width);
  const double y1 = std::clamp(c[1], 0.0, height), y2 = std::clamp(c[3], 0.0, height);
  if (!(x2 > x1 && y2 > y1)) throw ParseError(path, "bbox lies outside the image");
  return Box::from_corners(x1 / width, y1 / height, x2 / width, y2 / height);
}

Json write_bbox(const Box& b, double width, double height) {
  const CornerBox c = b.corners();
  return Json::array({c.x1 * width, c.y1 * height, c.x2 * width, c.y2 * height});
}

std::vector<std::string> string_list(const Json& j, const std::string& path) {
  array(j, path);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw ParseError(at(path, i), "expected a string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

Json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

}  // namespace

Dataset parse_dataset(const Json& j) {
  Dataset d;
  d.meta = j.contains("_meta") ? j["_meta"] : Json::object();
  const Json& vocab = field(j, "vocab", "");
  d.vocab.objects = string_list(field(vocab, "objects", "/vocab"), "/vocab/objects");
  d.vocab.predicates = string_list(field(vocab, "predicates", "/vocab"), "/vocab/predicates");
  const Json& images = array(field(j, "images", ""), "/images");
  std::set<std::string> image_ids;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string p = at("/images", i);
    const Json& im = images[i];
    DatasetImage img;
    img.id = id_string(field(im, "id", p), at(p, "id"));
    if (!image_ids.insert(img.id).second) throw ParseError(at(p, "id"), "duplicate image id");
    img.width = number(field(im, "width", p), at(p, "width"));
    img.height = number(field(im, "height", p), at(p, "height"));
    if (!(img.width > 0.0)) throw ParseError(at(p, "width"), "must be positive");
    if (!(img.height > 0.0)) throw ParseError(at(p, "height"), "must be positive");
    if (im.contains("seed")) img.seed = static_cast<std::uint64_t>(integer(im["seed"], at(p, "seed")));

    const Json& objects = array(field(im, "objects", p), at(p, "objects"));
    std::map<long long, std::size_t> index_of;
    for (std::size_t k = 0; k < objects.size(); ++k) {
      const std::string q = at(at(p, "objects"), k);
      const long long oid = integer(field(objects[k], "id", q), at(q, "id"));
      if (!index_of.emplace(oid, k).second)
        throw ParseError(at(q, "id"), "object id " + std::to_string(oid) + " used more than once");
      const int label = label_of(field(objects[k], "label", q), d.vocab.objects, at(q, "label"));
      const Box box = read_bbox(field(objects[k], "bbox", q), img.width, img.height, at(q, "bbox"));
      img.object_ids.push_back(oid);
      img.graph.objects.push_back({box, label});
    }
    const Json& rels = im.contains("relations") ? array(im["relations"], at(p, "relations")) : Json::array();
    for (std::size_t k = 0; k < rels.size(); ++k) {
      const std::string q = at(at(p, "relations"), k);
      auto object_ref = [&](const char* key) {
        const long long oid = integer(field(rels[k], key, q), at(q, key));
        const auto it = index_of.find(oid);
        if (it == index_of.end()) throw ParseError(at(q, key), "unknown object id " + std::to_string(oid));
        return it->second;
      };
      const std::size_t s = object_ref("sub_id"), o = object_ref("obj_id");
      if (s == o) throw ParseError(q, "relation between an object and itself");
      const int pred = label_of(field(rels[k], "predicate", q), d.vocab.predicates, at(q, "predicate"));
      img.graph.relations.push_back({s, o, pred});
    }
    d.images.push_back(std::move(img));
  }
  return d;
}

Json dataset_to_json(const Dataset& d, const Json& meta) {
  Json images = Json::array();
  for (const auto& im : d.images) {
    Json objects = Json::array(), rels = Json::array();
    for (std::size_t k = 0; k < im.graph.objects.size(); ++k) {
      const long long oid = k < im.object_ids.size() ? im.object_ids[k] : static_cast<long long>(k);
      objects.push_back({{"id", oid},
                         {"label", im.graph.objects[k].label},
                         {"bbox", write_bbox(im.graph.objects[k].box, im.width, im.height)}});
    }
    auto oid = [&](std::size_t k) {
      return k < im.object_ids.size() ? im.object_ids[k] : static_cast<long long>(k);
    };
    for (const auto& r : im.graph.relations)
      rels.push_back({{"sub_id", oid(r.sub)}, {"obj_id", oid(r.obj)}, {"predicate", r.predicate}});
    Json j = {{"id", im.id}, {"width", im.width}, {"height", im.height}, {"objects", objects}, {"relations", rels}};
    if (im.seed) j["seed"] = *im.seed;
    images.push_back(std::move(j));
  }
  Json out;
  out["_meta"] = meta.empty() ? d.meta : meta;
  out["vocab"] = {{"objects", d.vocab.objects}, {"predicates", d.vocab.predicates}};
  out["images"] = std::move(images);
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  const Json j = read_json(path);
  try {
    return parse_dataset(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + e.path(), e.detail());
  }
}

std::vector<PredictionImage> parse_predictions(const Json& j, const Dataset& gt) {
  std::map<std::string, const DatasetImage*> by_id;
  for (const auto& im : gt.images) by_id[im.id] = &im;
  std::vector<PredictionImage> out;
  const Json& images = array(field(j, "images", ""), "/images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string p = at("/images", i);
    PredictionImage pi;
    pi.id = id_string(field(images[i], "id", p), at(p, "id"));
    const auto it = by_id.find(pi.id);
    if (it == by_id.end()) throw ParseError(at(p, "id"), "no ground-truth image with id '" + pi.id + "'");
    const DatasetImage& im = *it->second;
    const Json& trips = array(field(images[i], "triplets", p), at(p, "triplets"));
    for (std::size_t k = 0; k < trips.size(); ++k) {
      const std::string q = at(at(p, "triplets"), k);
      const Json& t = trips[k];
      auto object = [&](const char* key) {
        const std::string r = at(q, key);
        const Json& o = field(t, key, q);
        ScoredObject so{read_bbox(field(o, "bbox", r), im.width, im.height, at(r, "bbox")),
                        label_of(field(o, "label", r), gt.vocab.objects, at(r, "label")),
                        o.contains("score") ? number(o["score"], at(r, "score")) : 1.0};
        return so;
      };
      RankedTriplet rt;
      rt.sub = object("sub");
      rt.obj = object("obj");
      const Json& pr = field(t, "predicate", q);
      rt.predicate = label_of(field(pr, "label", at(q, "predicate")), gt.vocab.predicates, at(at(q, "predicate"), "label"));
      rt.predicate_score = pr.contains("score") ? number(pr["score"], at(at(q, "predicate"), "score")) : 1.0;
      rt.score = t.contains("score") ? number(t["score"], at(q, "score"))
                                     : triplet_score(rt.sub.score, rt.obj.score, rt.predicate_score);
      if (t.contains("predicate_logits")) {
        const Json& z = array(t["predicate_logits"], at(q, "predicate_logits"));
        if (z.size() != gt.vocab.predicates.size())
          throw ParseError(at(q, "predicate_logits"), "length differs from the predicate vocabulary");
        for (std::size_t c = 0; c < z.size(); ++c) rt.predicate_logits.push_back(number(z[c], at(at(q, "predicate_logits"), c)));
      }
      pi.triplets.push_back(std::move(rt));
    }
    out.push_back(std::move(pi));
  }
  return out;
}

Json predictions_to_json(const std::vector<PredictionImage>& p, const Dataset& gt, const Json& meta) {
  std::map<std::string, const DatasetImage*> by_id;
  for (const auto& im : gt.images) by_id[im.id] = &im;
  Json images = Json::array();
  for (const auto& pi : p) {
    const DatasetImage& im = *by_id.at(pi.id);
    Json trips = Json::array();
    for (const auto& t : pi.triplets) {
      Json j = {{"sub", {{"bbox", write_bbox(t.sub.box, im.width, im.height)}, {"label", t.sub.label}, {"score", t.sub.score}}},
                {"obj", {{"bbox", write_bbox(t.obj.box, im.width, im.height)}, {"label", t.obj.label}, {"score", t.obj.score}}},
                {"predicate", {{"label", t.predicate}, {"score", t.predicate_score}}},
                {"score", t.score}};
      if (!t.predicate_logits.empty()) j["predicate_logits"] = t.predicate_logits;
      trips.push_back(std::move(j));
    }
    images.push_back({{"id", pi.id}, {"triplets", std::move(trips)}});
  }
  return {{"_meta", meta}, {"images", std::move(images)}};
}

std::vector<ImageEval> join(const Dataset& gt, const std::vector<PredictionImage>& preds) {
  std::map<std::string, const PredictionImage*> by_id;
  for (const auto& p : preds) by_id[p.id] = &p;
  std::vector<ImageEval> out;
  out.reserve(gt.images.size());
  for (const auto& im : gt.images) {
    ImageEval e;
    e.gts = im.graph.triplets();
    if (const auto it = by_id.find(im.id); it != by_id.end()) e.preds = it->second->triplets;
    out.push_back(std::move(e));
  }
  return out;
}

SeenSet parse_seen_set(const Json& j) {
  const Json& seen = array(field(j, "seen", ""), "/seen");
  SeenSet s;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    const std::string p = at("/seen", i);
    if (!seen[i].is_array() || seen[i].size() != 3) throw ParseError(p, "expected [sub, predicate, obj]");
    s.emplace(static_cast<int>(integer(seen[i][0], at(p, 0))), static_cast<int>(integer(seen[i][1], at(p, 1))),
              static_cast<int>(integer(seen[i][2], at(p, 2))));
  }
  return s;
}

Json seen_set_to_json(const SeenSet& s) {
  Json arr = Json::array();
  for (const auto& [a, b, c] : s) arr.push_back({a, b, c});
  return {{"seen", arr}};
}

SeenSet seen_set_of(const Dataset& d) {
  SeenSet s;
  for (const auto& im : d.images)
    for (const auto& t : im.graph.triplets()) s.emplace(t.sub.label, t.predicate, t.obj.label);
  return s;
}

Json frequencies_to_json(const FrequencyTable& t, const std::vector<std::string>& names, const Json& meta) {
  if (names.size() != t.size()) throw DimensionMismatch("frequency table and label names differ in size");
  Json f = Json::object();
  for (std::size_t c = 0; c < t.size(); ++c) f[names[c]] = t[c];
  return {{"_meta", meta}, {"frequencies", f}};
}

FrequencyTable parse_frequencies(const Json& j, const std::vector<std::string>& names) {
  const Json& f = field(j, "frequencies", "");
  if (!f.is_object()) throw ParseError("/frequencies", "expected an object");
  std::vector<double> v(names.size());
  for (std::size_t c = 0; c < names.size(); ++c)
    v[c] = number(field(f, names[c], "/frequencies"), "/frequencies/" + names[c]);
  try {
    return FrequencyTable(std::move(v));
  } catch (const InvalidArgument& e) {
    throw ParseError("/frequencies", e.what());
  }
}

Json head_config_to_json(const HeadConfig& c) {
  return {{"obj_dim", c.obj_dim},           {"rel_dim", c.rel_dim},
          {"channels", c.channels},         {"filters", c.filters},
          {"pool", c.pool},                 {"attention_heads", c.attention_heads},
          {"obj_ffn_dim", c.obj_ffn_dim},   {"rel_ffn_dim", c.rel_ffn_dim},
          {"num_object_classes", c.num_object_classes}, {"num_predicates", c.num_predicates},
          {"recompute_pe", c.recompute_pe}, {"max_log_scale", c.max_log_scale}};
}

HeadConfig head_config_from_json(const Json& j) {
  HeadConfig c;
  const std::string p = "/config";
  auto sz = [&](const char* k, std::size_t& dst) {
    if (j.contains(k)) dst = static_cast<std::size_t>(integer(j[k], at(p, k)));
  };
  sz("obj_dim", c.obj_dim);
  sz("rel_dim", c.rel_dim);
  sz("channels", c.channels);
  sz("filters", c.filters);
  sz("pool", c.pool);
  sz("attention_heads", c.attention_heads);
  sz("obj_ffn_dim", c.obj_ffn_dim);
  sz("rel_ffn_dim", c.rel_ffn_dim);
  if (j.contains("num_object_classes")) c.num_object_classes = static_cast<int>(integer(j["num_object_classes"], at(p, "num_object_classes")));
  if (j.contains("num_predicates")) c.num_predicates = static_cast<int>(integer(j["num_predicates"], at(p, "num_predicates")));
  if (j.contains("recompute_pe")) c.recompute_pe = j["recompute_pe"].get<bool>();
  if (j.contains("max_log_scale")) c.max_log_scale = number(j["max_log_scale"], at(p, "max_log_scale"));
  return c;
}

Json cascade_to_json(const Cascade& c) {
  Json heads = Json::array();
  for (const auto& h : c.heads()) {
    Json hj = Json::object();
    h.for_each([&](const std::string& name, const auto& p) {
      if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Matrix>) {
        hj[name] = matrix_to_json(p);
      } else {
        hj[name] = {{"rows", 1}, {"cols", p.size()}, {"data", p}};
      }
    });
    heads.push_back(std::move(hj));
  }
  return {{"_meta", {{"version", kVersion}}}, {"config", head_config_to_json(c.config())}, {"heads", heads}};
}

Cascade cascade_from_json(const Json& j) {
  const HeadConfig cfg = head_config_from_json(field(j, "config", ""));
  const Json& heads = array(field(j, "heads", ""), "/heads");
  std::vector<HeadWeights> out;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const std::string p = at("/heads", i);
    HeadWeights w = HeadWeights::zeros(cfg);
    w.for_each([&](const std::string& name, auto& param) {
      const std::string q = at(p, name);
      const Json& m = field(heads[i], name, p);
      const auto rows = static_cast<std::size_t>(integer(field(m, "rows", q), at(q, "rows")));
      const auto cols = static_cast<std::size_t>(integer(field(m, "cols", q), at(q, "cols")));
      const Json& data = array(field(m, "data", q), at(q, "data"));
      if (data.size() != rows * cols) throw ParseError(at(q, "data"), "entry count differs from rows x cols");
      std::vector<double> v;
      v.reserve(data.size());
      for (std::size_t k = 0; k < data.size(); ++k) v.push_back(number(data[k], at(at(q, "data"), k)));
      if constexpr (std::is_same_v<std::decay_t<decltype(param)>, Matrix>) {
        if (rows != param.rows() || cols != param.cols()) throw ParseError(q, "shape differs from config");
        param = Matrix(rows, cols, std::move(v));
      } else {
        if (v.size() != param.size()) throw ParseError(q, "length differs from config");
        param = std::move(v);
      }
    });
    out.push_back(std::move(w));
  }
  return Cascade(cfg, std::move(out));
}

Json metrics_to_json(const MetricsReport& r) {
  auto pct = [](double v) { return 100.0 * v; };
  Json j;
  j["scale"] = "percent";
  for (const auto& [k, v] : r.recall) j["recall"][std::to_string(k)] = pct(v);
  for (const auto& [k, v] : r.mean_recall) j["mean_recall"][std::to_string(k)] = pct(v);
  for (const auto& [k, v] : r.zero_shot_recall)
    j["zero_shot_recall"][std::to_string(k)] = v ? Json(pct(*v)) : Json(nullptr);
  j["recall50_micro"] = pct(r.recall50_micro);
  j["wmap_rel"] = pct(r.wmap_rel.value);
  j["wmap_phr"] = pct(r.wmap_phr.value);
  j["score_wtd"] = pct(r.score_wtd);
  for (const auto& [k, cats] : r.per_category) {
    Json arr = Json::array();
    for (const auto& c : cats)
      arr.push_back({{"predicate", c.predicate}, {"gt", c.gt_count}, {"hit", c.hit_count}, {"recall", pct(c.recall())}});
    j["per_category"][std::to_string(k)] = arr;
  }
  for (const auto& [c, ap] : r.wmap_rel.ap) j["ap_rel"][std::to_string(c)] = pct(ap);
  for (const auto& [c, ap] : r.wmap_phr.ap) j["ap_phr"][std::to_string(c)] = pct(ap);
  return j;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string(), std::string("malformed JSON: ") + e.what());
  }
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("io_error", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ssrcnn::io
