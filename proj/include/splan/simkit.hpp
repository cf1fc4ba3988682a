#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "splan/actor_critic.hpp"
#include "splan/dataset.hpp"
#include "splan/trainer.hpp"

namespace splan {

// Economic objective: unit costs for excess stock and lost sales, plus a unit
// price multiplier. The per-SKU variant is built by copying the cost pair and
// substituting the SKU's own price.
struct CostObjective {
    double c_es = 1.0;
    double c_oos = 1.0;
    double price = 1.0;

    void validate() const;
    CostObjective for_sku(const SkuData& sku) const { return {c_es, c_oos, sku.price}; }
};

// price * (c_es * |es| + c_oos * |oos|); signs of the inputs are ignored.
double total_cost(double es, double oos, const CostObjective& obj);

// Shared simulation shape parameters.
struct RolloutConfig {
    int horizon = 13;      // J intervals simulated per start week
    int feature_count = 4; // K entries per node profile
    int mc_runs = 50;      // Z Monte-Carlo draws
    uint64_t seed = 1;
    bool record_inventory = false; // keep full per-step inventory traces
    bool sample_production = false; // default replays the logged/planned schedule
    double production_sigma = 0.1;  // lognormal dispersion when sampling production

    void validate() const;
};

// ---------------------------------------------------------------------------
// Arrival bookkeeping. Every shipment is scheduled once at issue time
// (send week + lead); reading a week gives the supply landing then. Grows on
// demand so horizons and lead tails never clip.

class ArrivalSchedule {
public:
    ArrivalSchedule(int base_week, int node_count);

    void add(int week, int node, double quantity);
    const Eigen::VectorXd& at(int week) const; // zeros outside the written range

    // Total scheduled to land strictly after `week`: the in-transit stock
    // once interval `week` has completed.
    double pending_after(int week) const;

    int base_week() const { return base_; }

private:
    int base_;
    Eigen::VectorXd zero_;
    std::vector<Eigen::VectorXd> by_week_;
};

// Seeds a schedule with the log's in-flight shipments at `week`: records sent
// before `week` that land at `week` or later, at their realized lead times.
ArrivalSchedule inflight_schedule(const SkuData& sku, int week);

// ---------------------------------------------------------------------------
// One simulated interval, shared by the history generator, planning, and
// evaluation so replayed trajectories are bit-for-bit consistent.
//
// Distribution node: available = I + arrivals - demand; lost sales
//   oos = min(available, 0); on-hand floors at zero (no backorders); the
//   interval's outgoing supply then leaves.
// Production node: available = I + arrivals + production; no demand, no oos.
//
// Throws if outgoing exceeds available stock beyond float tolerance: callers
// must clamp actions to capability first.
struct StepOutcome {
    Eigen::VectorXd oos; // <= 0, distribution nodes only
    Eigen::VectorXd es;  // >= 0 end-of-interval on-hand, distribution nodes only
};

StepOutcome step_network(const NetworkTopology& topo, Eigen::VectorXd& inventory,
                         const Eigen::VectorXd& arrivals, const Eigen::VectorXd& demand,
                         const Eigen::VectorXd& production, const Eigen::VectorXd& outgoing);

// Per-node outgoing totals of a single-slice action tensor.
Eigen::VectorXd outgoing_totals(const NetworkTopology& topo, const ActionTensor& actions,
                                int slice);

// Predicted-imbalance profiles for a simulated state: f[0] = on-hand, then
// each step adds scheduled arrivals and either subtracts demand (distribution)
// or adds production (plants). demand/production are (node, absolute week)
// views chosen by the caller: scenario draws in planning, fresh forecasts and
// the production plan in evaluation.
using QuantityView = std::function<double(int node, int week)>;

NodeStateMatrix sim_features(const NetworkTopology& topo, const Eigen::VectorXd& inventory,
                             const ArrivalSchedule& sched, int week, int feature_count,
                             const QuantityView& demand, const QuantityView& production);

// ---------------------------------------------------------------------------
// Scenario draws for planning: one Monte-Carlo sample of everything random
// over the horizon, fixed at planning time. Reused across risk preferences so
// policy comparison is paired (common random numbers).

struct ScenarioSample {
    int start_week = 0;
    Eigen::MatrixXd demand;     // |V| x (J+K-2), weeks start..start+J+K-3, >= 0
    Eigen::MatrixXd production; // |V| x (J+K-2), same coverage, >= 0
    // leads[s](e, m): lead drawn for a shipment issued at week start+s
    std::vector<Eigen::MatrixXi> leads;
};

// Demand: forecast as of start_week times unbiased lognormal noise with the
// stored per-horizon dispersion. Leads: per-(edge, MOT) empirical histogram.
// Production: logged plan, optionally with lognormal noise.
ScenarioSample sample_scenario(const SkuData& sku, int start_week, const RolloutConfig& rc,
                               Rng& rng);

// ---------------------------------------------------------------------------
// Planning: roll the policy over J intervals from a start week, Z times, for
// every risk preference; average actions and costs per preference.

struct PlanResult {
    std::vector<Eigen::MatrixXd> plan; // per lambda: (|E|*M) x J actions, averaged over draws
    Eigen::VectorXd avg_cost;          // per lambda: mean over draws of horizon-mean interval cost
    int lambda_star = 0;               // argmin avg_cost, ties to the lowest index
};

PlanResult plan(const SkuData& sku, int week, const ModelBundle& bundle,
                const CostObjective& obj, const RolloutConfig& rc);

// argmin with lowest-index tie-break; throws on empty input.
int select_policy(const Eigen::VectorXd& avg_costs);

// ---------------------------------------------------------------------------
// Evaluation: receding-horizon counterfactual rollout of one policy. At each
// interval the state is rebuilt from simulated inventories, scheduled
// arrivals, and predictions refreshed at that interval; the policy's action
// executes against actual demand and actual production.

// Single-slice actions for the current interval, already capability-clamped.
using StepPolicy = std::function<ActionTensor(const SkuTopology& st, const NodeStateMatrix& x,
                                              const Eigen::VectorXd& capability, int week,
                                              Rng& rng)>;

// Lead time assigned to a shipment issued now on (edge, mot).
using LeadSampler = std::function<int(int edge, int mot, int week, Rng& rng)>;

// Trained policy restricted to one risk-preference slice.
StepPolicy actor_policy(const ModelBundle& bundle, int lambda);

// Replays the logged actions for each week (counterfactual identity policy).
StepPolicy replay_policy(const SkuData& sku);

// Draws from the per-(edge, MOT) lead histograms.
LeadSampler empirical_leads(const SkuData& sku);

// Realized lead of the logged shipment at (week, edge, mot); throws when the
// log has no unique matching record.
LeadSampler logged_leads(const SkuData& sku);

struct SkuRollouts {
    std::vector<int> start_weeks;
    // per draw z: (starts x J) distribution-node sums, scaled units
    std::vector<Eigen::MatrixXd> abs_oos;
    std::vector<Eigen::MatrixXd> es;
    // per draw z: (starts x |V|) end-state imbalance at the final step
    // (es + oos at that step; NaN for production nodes)
    std::vector<Eigen::MatrixXd> final_imbalance;
    // when record_inventory: [z][start] = (J+1) x |V| on-hand trajectory,
    // row i = start of week start+i
    std::vector<std::vector<Eigen::MatrixXd>> inventory;
};

// Rolls `policy` from every start week in [begin, end] that keeps the full
// J+K-2 window inside the log. Draw z varies the sampled lead times (and any
// policy-internal randomness) through a per-(start, z) substream.
SkuRollouts rollout_policy(const SkuData& sku, const StepPolicy& policy,
                           const LeadSampler& leads, int begin_week, int end_week,
                           const RolloutConfig& rc);

// Start weeks the rollout will use for this SKU and period.
std::vector<int> rollout_starts(const SkuData& sku, int begin_week, int end_week,
                                const RolloutConfig& rc);

// ---------------------------------------------------------------------------
// Metrics

// Historical 100% levels over the given weeks, computed from the log:
// per-week averages of total |ES|, total |OOS|, and total cost across all
// SKUs and distribution nodes.
struct HistLevels {
    double es = 0.0;
    double oos = 0.0;
    double cost = 0.0;
};

HistLevels historical_levels(const Corpus& corpus, const CostObjective& obj,
                             const std::vector<int>& weeks);

// Logged per-node outcomes at one week: oos = min(I + arrivals - D, 0), es =
// next week's logged on-hand; zeros at production nodes.
StepOutcome logged_outcome(const SkuData& sku, int week);

// Per-timestep percentages relative to the historical levels, with mean and
// standard deviation over the Monte-Carlo draws. A zero historical level
// makes that series undefined (NaN) rather than dividing.
struct PercentSeries {
    Eigen::VectorXd mean; // length J
    Eigen::VectorXd sd;
    bool defined = true;
};

struct PercentReport {
    PercentSeries es, oos, cost;
};

PercentReport percent_metrics(const std::vector<SkuRollouts>& rollouts,
                              const std::vector<const SkuData*>& skus, const CostObjective& obj,
                              const HistLevels& hist);

// Fixed-bin histogram of final-step outcome imbalances (scaled units).
// Values outside [lo, hi] clamp into the edge bins.
struct Histogram {
    Eigen::VectorXd edges;  // bins+1 ascending
    Eigen::VectorXd counts; // bins
};

Histogram imbalance_histogram(const std::vector<double>& values, double lo = -2.0,
                              double hi = 2.0, int bins = 80);

// Collects all defined final-step imbalances (every draw, start, DC node).
std::vector<double> collect_final_imbalances(const std::vector<SkuRollouts>& rollouts);

// ---------------------------------------------------------------------------
// Validation: per-objective cost tables at the final (J-th) timestep and the
// scalar validation loss.

struct ValidationResult {
    std::vector<CostObjective> objectives;
    // per objective: (starts x lambdas), mean over draws, summed over SKUs
    std::vector<Eigen::MatrixXd> cost_final;
    std::vector<int> start_weeks;
    std::vector<int> lambda_star; // per objective: argmin of the start-mean cost
    double loss = 0.0;            // mean over objectives and starts of min-over-lambda cost
};

ValidationResult validate_policies(const Corpus& corpus, const ModelBundle& bundle,
                                   const std::vector<CostObjective>& objectives,
                                   int begin_week, int end_week, const RolloutConfig& rc);

// Mean over objectives and start weeks of the per-start minimum-over-lambda
// final-step cost. Exposed separately for table-driven tests.
double validation_loss(const std::vector<Eigen::MatrixXd>& cost_final);

} // namespace splan
