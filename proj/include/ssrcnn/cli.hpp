#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssrcnn/assignment.hpp"
#include "ssrcnn/fit.hpp"
#include "ssrcnn/heads.hpp"
#include "ssrcnn/io.hpp"
#include "ssrcnn/synth.hpp"

namespace ssrcnn::cli {

enum class Profile { vg, oi };

// Small dimensions for desk-scale forward runs.
HeadConfig toy_head_config();

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t images = 10;
  std::size_t queries = 300;
  std::size_t heads = 6;
  double tau = 0.3;
  double mu = 4.0;
  std::vector<std::size_t> k_at{20, 50, 100};
  Profile profile = Profile::vg;
  std::optional<bool> graph_constraint;  // unset: on for vg, off for oi
  int jobs = 0;                          // 0: OpenMP default

  LossCoefficients coefficients;
  FocalParams object_focal;
  FocalParams relation_focal;
  ClassCostMode class_mode = ClassCostMode::full;
  AssignMode assign_mode = AssignMode::pseudo;

  SceneConfig scene;
  PerturbModel perturb;
  PredictionModel prediction;
  HeadConfig head = toy_head_config();
  double weight_scale = 1.0;

  std::size_t fit_slots = 12;
  std::size_t fit_steps = 2000;
  double fit_step_size = 0.05;
  double fit_box_step_scale = 0.02;

  bool graph_constraint_on() const { return graph_constraint.value_or(profile == Profile::vg); }
  AssignOptions assign_options() const;
  FitOptions fit_options() const;
  EvalOptions eval_options() const;
  void validate() const;
};

io::Json to_json(const RunConfig& c);
// Overlays the keys present in `j` onto `base`. Unknown keys are errors.
RunConfig config_from_json(const io::Json& j, RunConfig base = {});

// argv[0] is the program name. Returns the process exit status; failures
// print a JSON error object on stderr.
int cli_dispatch(int argc, const char* const* argv);
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace ssrcnn::cli
