#include "getad/experiment.hpp"

#include <map>
#include <stdexcept>

namespace getad {

void ExperimentSpec::set_seed(std::uint64_t seed) {
  grid.seed = seed;
  detour.rng_seed = seed;
  train.seed = seed;
}

ExperimentData make_experiment_data(const ExperimentSpec& spec) {
  GridSpec g = spec.grid;
  g.trips_per_agent = spec.train_trips + spec.eval_trips;
  ExperimentData d;
  d.network = grid_network(g);
  const auto all = generate_trajectories(d.network, g);

  std::map<std::string, std::size_t> seen;
  std::vector<Trajectory> pool;
  for (const auto& t : all) {
    const std::size_t k = seen[t.agent.value_or("")]++;
    (k < spec.train_trips ? d.train : pool).push_back(t);
  }
  const Vocab vocab = build_vocab(d.train);
  std::vector<Trajectory> normals;
  for (auto& t : pool) {
    if (encode(t, vocab).ok())
      normals.push_back(std::move(t));
    else
      ++d.dropped_oov;
  }
  // Detours stay on segments the model has a token for.
  const RoadNetwork known = restrict_network(d.network, vocab.segments());
  d.eval = build_eval_set(known, normals, spec.anomaly_rate, spec.detour);
  return d;
}

ScoreTable score_set(const Checkpoint& ckpt, const LabeledSet& set) {
  const Scorer scorer(ckpt);
  ScoreTable t;
  for (const auto& it : set.items) {
    const ScoreBreakdown b = scorer.score(it.trajectory);
    t.labels.push_back(it.label == Label::anomalous ? 1 : 0);
    for (std::size_t k = 0; k < kAllScorings.size(); ++k)
      t.values[k].push_back(score_value(b, kAllScorings[k]));
  }
  return t;
}

RunOutcome run_experiment(const ExperimentSpec& spec, const ExperimentData& data,
                          const EpochCallback& on_epoch) {
  RunOutcome out;
  ModelData md = prepare_data(data.network, data.train);
  out.trained = train(std::move(md), data.train, spec.train, on_epoch);
  const ScoreTable t = score_set(out.trained.checkpoint, data.eval);
  for (std::size_t k = 0; k < kAllScorings.size(); ++k)
    out.metrics[k] = evaluate(t.values[k], t.labels, to_string(kAllScorings[k]));
  return out;
}

}  // namespace getad
