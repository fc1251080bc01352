#include "ssrcnn/scene.hpp"

#include <sstream>

#include "ssrcnn/error.hpp"

namespace ssrcnn {

std::vector<GroundTruthTriplet> SceneGraph::triplets() const {
  std::vector<GroundTruthTriplet> out;
  out.reserve(relations.size());
  for (const Relation& r : relations) {
    out.push_back({objects.at(r.sub), objects.at(r.obj), r.predicate, r.sub, r.obj});
  }
  return out;
}

bool SceneGraph::has_relation(std::size_t sub, std::size_t obj) const {
  for (const Relation& r : relations)
    if (r.sub == sub && r.obj == obj) return true;
  return false;
}

void SceneGraph::validate(int num_object_classes, int num_predicates) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].label < 0 || objects[i].label >= num_object_classes) {
      std::ostringstream os;
      os << "object " << i << " label " << objects[i].label << " outside [0, "
         << num_object_classes << ")";
      throw InvalidArgument(os.str());
    }
  }
  for (std::size_t i = 0; i < relations.size(); ++i) {
    const Relation& r = relations[i];
    std::ostringstream os;
    if (r.sub >= objects.size() || r.obj >= objects.size()) {
      os << "relation " << i << " refers to a missing object";
      throw InvalidArgument(os.str());
    }
    if (r.sub == r.obj) {
      os << "relation " << i << " relates an object to itself";
      throw InvalidArgument(os.str());
    }
    if (r.predicate < 0 || r.predicate >= num_predicates) {
      os << "relation " << i << " predicate " << r.predicate << " outside [0, " << num_predicates
         << ")";
      throw InvalidArgument(os.str());
    }
  }
}

}  // namespace ssrcnn
