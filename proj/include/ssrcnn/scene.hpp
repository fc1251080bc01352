#pragma once

#include <cstddef>
#include <vector>

#include "ssrcnn/geometry.hpp"
#include "ssrcnn/numerics.hpp"

namespace ssrcnn {

struct LabeledBox {
  Box box;
  int label = 0;
};

// Annotated (subject, predicate, object) relation between two object indices.
struct Relation {
  std::size_t sub = 0;
  std::size_t obj = 0;
  int predicate = 0;
};

struct GroundTruthTriplet {
  LabeledBox sub;
  LabeledBox obj;
  int predicate = 0;
  // Indices of the subject and object in the owning SceneGraph.
  std::size_t sub_index = 0;
  std::size_t obj_index = 0;
};

struct SceneGraph {
  std::vector<LabeledBox> objects;
  std::vector<Relation> relations;

  std::vector<GroundTruthTriplet> triplets() const;
  bool has_relation(std::size_t sub, std::size_t obj) const;
  // Throws InvalidArgument on out-of-range indices or labels, or self-relations.
  void validate(int num_object_classes, int num_predicates) const;
};

// Detector-side view of one object inside a triplet prediction.
struct ObjectPrediction {
  Box box;
  Vector logits;  // one sigmoid logit per object class
};

struct TripletPrediction {
  ObjectPrediction sub;
  ObjectPrediction obj;
  Vector rel_logits;  // one sigmoid logit per predicate class
};

}  // namespace ssrcnn
