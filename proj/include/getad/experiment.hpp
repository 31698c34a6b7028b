#pragma once

#include <array>
#include <vector>

#include "getad/anomaly_forge.hpp"
#include "getad/anomaly_scores.hpp"
#include "getad/eval_metrics.hpp"
#include "getad/synth_world.hpp"
#include "getad/train_engine.hpp"

namespace getad {

/// The grid-world protocol: per agent, the first train_trips trips train the
/// model and the next eval_trips form the evaluation pool, of which a fraction
/// is turned into detours.
struct ExperimentSpec {
  GridSpec grid;
  std::size_t train_trips = 40;
  std::size_t eval_trips = 20;
  double anomaly_rate = 0.05;
  DetourSpec detour;
  TrainConfig train;

  /// Points every seed (world, detours, training) at the same value.
  void set_seed(std::uint64_t seed);
};

struct ExperimentData {
  RoadNetwork network;
  std::vector<Trajectory> train;
  LabeledSet eval;
  /// Evaluation-pool trajectories dropped for using segments never seen in
  /// training.
  std::size_t dropped_oov = 0;
};

ExperimentData make_experiment_data(const ExperimentSpec& spec);

inline constexpr std::array<Scoring, 3> kAllScorings = {Scoring::cw_nll, Scoring::nll,
                                                        Scoring::perplexity};

/// Scores every item; labels are 1 for anomalies.
struct ScoreTable {
  std::vector<std::uint8_t> labels;
  std::array<std::vector<double>, 3> values;  // indexed like kAllScorings
};
ScoreTable score_set(const Checkpoint& ckpt, const LabeledSet& set);

struct RunOutcome {
  TrainResult trained;
  std::array<EvalResult, 3> metrics;  // indexed like kAllScorings
};

RunOutcome run_experiment(const ExperimentSpec& spec, const ExperimentData& data,
                          const EpochCallback& on_epoch = {});

}  // namespace getad
