#pragma once

#include "splan/simkit.hpp"

namespace splan {

// ---------------------------------------------------------------------------
// Rule-based safety-stock (days-of-supply) policy and its plumbing. The rule
// is deliberately objective-blind: nothing here reads a CostObjective.

// Sum of predicted demand over the next ceil(dos) weeks; the final partial
// week is prorated linearly. forecast holds the node's predictions for
// weeks now+0, now+1, ... and must cover the ceil(dos) window.
double safety_stock(const Eigen::VectorXd& forecast, double dos);

// Log-derived context: which parents each node can ask, how likely each is
// to be asked (historical quantity shares), and each edge's dominant MOT.
struct RuleContext {
    std::vector<std::vector<int>> parent_edges; // per node: in-edge indices
    std::vector<std::vector<double>> parent_probs; // aligned shares, sum 1
    std::vector<int> dominant_mot;                 // per edge
};

// Builds the context from shipments sent in [begin_week, end_week]. Nodes
// whose in-edges carried nothing fall back to uniform parent shares; edges
// with no recorded traffic fall back to MOT 0.
RuleContext build_rule_context(const SkuData& sku, int begin_week, int end_week);

struct RuleOutcome {
    ActionTensor actions;  // single slice, routed via each edge's dominant MOT
    double requested = 0.0;
    double unfilled = 0.0; // requested minus shipped
    int unfillable = 0;    // deficit nodes with no parents at all
};

// One interval of the rule: every node requests max(safety - inventory, 0)
// from a single parent sampled by historical share; each parent serves the
// requests addressed to it in a uniformly shuffled order, never exceeding
// its capacity. `forecast` is the |V| x H prediction matrix as of now;
// `capacity` is the per-node supply limit (stock left after own demand).
RuleOutcome rule_based_step(const SkuTopology& st, const Eigen::VectorXd& inventory,
                            const Eigen::MatrixXd& forecast, const Eigen::VectorXd& dos,
                            const RuleContext& ctx, const Eigen::VectorXd& capacity, Rng& rng);

// Rollout adapter: reads forecasts from the log as of each interval and uses
// the rollout's capability vector as the supply limit.
StepPolicy rule_policy(const SkuData& sku, const RuleContext& ctx);

} // namespace splan
