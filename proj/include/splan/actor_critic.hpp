#pragma once

#include <string>
#include <vector>

#include "splan/diffcore.hpp"
#include "splan/gat.hpp"
#include "splan/netmodel.hpp"

namespace splan {

// One risk preference: cost slopes on either side of the reference stock
// level in the piecewise node reward.
struct RiskPreference {
    double c1 = 1.0;   // excess-stock slope (f above f_ref)
    double c2 = 1.0;   // out-of-stock slope (f below f_ref)
    double f_ref = 0.0;
};

// Peak 1 at f = f_ref, slopes -c1 / -c2 on each side, floored at -1.
double node_reward(double f, const RiskPreference& risk);

// Sum of node_reward over every node's final profile entry of the successor
// state (the furthest-ahead imbalance, the one current actions influence).
double network_reward(const NodeStateMatrix& x_next, const RiskPreference& risk);

// Capability Y_v: what a node may ship this interval. Clamped at zero so
// actions stay nonnegative. Distribution nodes reserve their demand
// (actual demand in evaluation, predicted in planning - caller chooses what
// to pass); production nodes ship from on-hand stock.
Eigen::VectorXd supply_capability(const NetworkTopology& topo, const Eigen::VectorXd& inventory,
                                  const Eigen::VectorXd& demand);

// Model shape shared by the actor and critic.
struct NetsConfig {
    int feature_count = 4;  // K
    int mot_count = 2;      // M
    double gamma = 0.95;
    double slope = 0.2;
    std::vector<RiskPreference> lambdas; // one policy/value head slice per entry
    GatStack x_stack;                    // actor embedding (node features only)
    GatStack xa_stack;                   // critic embedding (node + action features)
    std::vector<int> mu_hidden{32, 8};
    std::vector<int> q_hidden{128, 32, 8};

    int lambda_count() const { return static_cast<int>(lambdas.size()); }

    // Published defaults: GAT_X [16,16,16], GAT_XA [100,20,20], 3 heads, and
    // the twelve-policy grid (c2/c1 ratio 1 and 5) x (f_ref 0.0..0.5).
    static NetsConfig defaults(int feature_count = 4, int mot_count = 2);
};

// Twelve-policy grid: (c1,c2) = (10,10) then (2,10), each with
// f_ref in {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}.
std::vector<RiskPreference> default_lambda_grid();

// Parameter registration. Actor owns {xf,xb}.* + head.*; critic owns
// {xaf,xab}.* + head.*. The two stores are disjoint.
void add_actor_params(ad::ParamStore& ps, const NetsConfig& cfg);
void add_critic_params(ad::ParamStore& ps, const NetsConfig& cfg);

// Policy forward on the tape: embed, per-edge fractions via the shared MLP
// head (sigmoid), then the per-node capacity clamp. edge_actions[l][e] is the
// dim-M action Var for risk slice l on edge e; total outgoing per node is
// <= capability by construction.
struct PolicyVars {
    std::vector<std::vector<ad::Var>> edge_actions; // [lambda][edge]
};

PolicyVars policy_forward(ad::Tape& tape, const NetworkTopology& topo,
                          const NetworkTopology& reversed, const NodeStateMatrix& x,
                          const Eigen::VectorXd& capability, const ad::ParamStore& actor,
                          int actor_store, const NetsConfig& cfg);

// Copies tape action values into a plain tensor (one slice per lambda).
ActionTensor extract_actions(const ad::Tape& tape, const PolicyVars& pv, const NetsConfig& cfg,
                             int edge_count);

// Critic on a logged action tensor (single shared slice): one embedding pass,
// per-lambda network values read off the |Lambda|-wide head.
std::vector<ad::Var> value_forward_logged(ad::Tape& tape, const NetworkTopology& topo,
                                          const NetworkTopology& reversed,
                                          const NodeStateMatrix& x, const ActionTensor& actions,
                                          int slice, const ad::ParamStore& critic,
                                          int critic_store, const NetsConfig& cfg);

// Critic on per-lambda policy actions: one embedding pass per lambda, each
// returning its own head component.
std::vector<ad::Var> value_forward_policy(ad::Tape& tape, const NetworkTopology& topo,
                                          const NetworkTopology& reversed,
                                          const NodeStateMatrix& x, const PolicyVars& pv,
                                          const ad::ParamStore& critic, int critic_store,
                                          const NetsConfig& cfg);

// L^lambda <= 0: mean squared mismatch between each node's clipped predicted
// shortfall and its total incoming supply under the slice's actions.
ad::Var behavioral_regularizer(ad::Tape& tape, const NetworkTopology& topo,
                               const NodeStateMatrix& x,
                               const std::vector<ad::Var>& edge_actions, double f_ref);

// Plain (untaped) recomputation of the same regularizer for given action
// values; test oracle and simulation-side diagnostics.
double behavioral_regularizer_value(const NetworkTopology& topo, const NodeStateMatrix& x,
                                    const ActionTensor& actions, int slice, double f_ref);

// Raw-math policy evaluation for the simulation hot path; bit-compatible with
// the taped policy_forward (property-tested). Returns all lambda slices.
ActionTensor policy_actions(const NetworkTopology& topo, const NetworkTopology& reversed,
                            const NodeStateMatrix& x, const Eigen::VectorXd& capability,
                            const ad::ParamStore& actor, const NetsConfig& cfg);

// Untaped critic evaluation (diagnostics; |Lambda| network values for a
// logged-style single-slice tensor).
Eigen::VectorXd network_values(const NetworkTopology& topo, const NetworkTopology& reversed,
                               const NodeStateMatrix& x, const ActionTensor& actions, int slice,
                               const ad::ParamStore& critic, const NetsConfig& cfg);

} // namespace splan
