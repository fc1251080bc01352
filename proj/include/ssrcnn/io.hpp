#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssrcnn/calibration.hpp"
#include "ssrcnn/heads.hpp"
#include "ssrcnn/metrics.hpp"
#include "ssrcnn/scene.hpp"

namespace ssrcnn::io {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "ssrcnn 0.3.0";

struct Vocab {
  std::vector<std::string> objects;
  std::vector<std::string> predicates;
};

struct DatasetImage {
  std::string id;
  double width = 0.0;
  double height = 0.0;
  std::vector<long long> object_ids;  // file ids, parallel to graph.objects
  SceneGraph graph;                   // normalized coordinates
  std::optional<std::uint64_t> seed;  // synthetic images only
};

struct Dataset {
  std::vector<DatasetImage> images;
  Vocab vocab;
  Json meta;  // reproducibility header as read from the file
};

// Boxes in files are absolute-pixel corners; they are clipped to the
// image and normalized on read. Schema violations throw ParseError with
// the JSON path of the offending field.
Dataset parse_dataset(const Json& j);
Json dataset_to_json(const Dataset& d, const Json& meta = Json::object());
Dataset load_dataset(const std::filesystem::path& path);

struct PredictionImage {
  std::string id;
  std::vector<RankedTriplet> triplets;
};

// Predictions file: {images: [{id, triplets: [{sub: {bbox, label, score},
// obj: {...}, predicate: {label, score}, score, predicate_logits?}]}]}.
// Boxes use the pixel size of the matching dataset image.
std::vector<PredictionImage> parse_predictions(const Json& j, const Dataset& gt);
Json predictions_to_json(const std::vector<PredictionImage>& p, const Dataset& gt,
                         const Json& meta = Json::object());

// Pairs each dataset image with its predictions by id (images without
// predictions get an empty list).
std::vector<ImageEval> join(const Dataset& gt, const std::vector<PredictionImage>& preds);

// {"seen": [[sub_label, predicate, obj_label], ...]}
SeenSet parse_seen_set(const Json& j);
Json seen_set_to_json(const SeenSet& s);
SeenSet seen_set_of(const Dataset& d);

// {"_meta": {...}, "frequencies": {"label name": f, ...}}
Json frequencies_to_json(const FrequencyTable& t, const std::vector<std::string>& names,
                         const Json& meta = Json::object());
FrequencyTable parse_frequencies(const Json& j, const std::vector<std::string>& names);

// {"_meta": {...}, "config": {...}, "heads": [{"<key>": {"rows", "cols", "data"}}]}
Json cascade_to_json(const Cascade& c);
Cascade cascade_from_json(const Json& j);
Json head_config_to_json(const HeadConfig& c);
HeadConfig head_config_from_json(const Json& j);

Json metrics_to_json(const MetricsReport& r);

Json read_json(const std::filesystem::path& path);
// Writes via a temporary file in the same directory and renames it over
// the destination.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace ssrcnn::io
