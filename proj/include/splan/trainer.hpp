#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splan/actor_critic.hpp"
#include "splan/dataset.hpp"
#include "splan/diffcore.hpp"

namespace splan {

// Offline training loop configuration. Network shape and gamma live in
// NetsConfig; everything here drives the optimization schedule.
struct TrainerConfig {
    int epochs = 72;
    int batch_size = 4;
    double lr = 0.001;
    double tau = 0.01;      // value fixed-point convergence is paced by tau*(1-gamma)
    double eta = 1.0;       // behavioral-regularizer weight in the actor objective
    int warmup_epochs = 40; // critic-only epochs (iteration gate N = this x iters/epoch)
    bool early_stopping = true;
    int patience = 8;        // epochs without val-loss improvement before stopping
    double min_delta = 1e-4; // improvement below this counts as plateau
    uint64_t seed = 1;
    std::string checkpoint_dir; // empty: keep everything in memory only

    void validate() const;
};

// Actor/critic parameters plus their frozen target copies.
struct ModelBundle {
    NetsConfig cfg;
    ad::ParamStore actor, critic;
    ad::ParamStore actor_target, critic_target;

    // Glorot-initialized networks with targets equal to the online nets.
    static ModelBundle init(const NetsConfig& cfg, uint64_t seed);
};

// ---------------------------------------------------------------------------
// Checkpoints: one binary file holding the four parameter stores behind a
// JSON shape header; round-trips bit-exactly.

nlohmann::ordered_json nets_config_to_json(const NetsConfig& cfg);
NetsConfig nets_config_from_json(const nlohmann::ordered_json& j);

void save_checkpoint(const std::string& path, const ModelBundle& bundle);
ModelBundle load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Single training steps (exposed for tests; train() composes them)

// Per-risk-preference TD target y for one logged transition. Warmup evaluates
// the target critic on the logged next action; afterwards the target actor
// supplies mu(x') per risk slice. Reward comes from x'.
Eigen::VectorXd td_target(const Corpus& corpus, const Transition& tr, const ModelBundle& bundle,
                          bool warmup);

// One Adam step on the critic over a batch; returns the batch TD loss
// (mean over samples and risk slices) before the step.
double critic_step(const Corpus& corpus, std::span<const Transition* const> batch,
                   ModelBundle& bundle, ad::GradStore& grads, ad::Adam& opt, bool warmup,
                   ad::Tape& tape);

// One Adam ascent step on the actor (critic frozen); returns the batch
// objective mean_lambda(Q + eta * L) before the step.
double actor_step(const Corpus& corpus, std::span<const Transition* const> batch,
                  ModelBundle& bundle, ad::GradStore& grads, ad::Adam& opt, double eta,
                  ad::Tape& tape);

// Mean TD loss over a dataset without taking a step (validation tracking).
double td_loss(const Corpus& corpus, const TransitionDataset& ds, const ModelBundle& bundle,
               bool warmup);

// ---------------------------------------------------------------------------
// Full loop

struct EpochStats {
    int epoch = 0;
    bool warmup = false;
    double critic_loss = 0.0;
    double actor_objective = 0.0;            // NaN during warmup epochs
    std::optional<double> val_td_loss;       // present when a validation set is given
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0; // 1-based; minimal validation TD loss after warmup
    long iterations = 0;
};

// Algorithm: iterate minibatches (uniform shuffle per epoch, seeded); the
// first warmup_epochs' worth of iterations update the critic alone with
// logged next actions and soft-update only the critic target; afterwards each
// iteration runs a critic step, an actor step, then soft-updates both targets.
// Writes a checkpoint per epoch plus metadata.json when checkpoint_dir is set.
TrainResult train(const Corpus& corpus, const TransitionDataset& train_set,
                  const TransitionDataset* val_set, ModelBundle& bundle, const TrainerConfig& tc);

} // namespace splan
