#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splan/netmodel.hpp"

#include "json.hpp"

namespace splan {

// Empirical lead-time distribution for one (edge, MOT) pair; integer week
// supports with probabilities summing to 1.
struct LeadTimeDist {
    std::vector<int> values;
    std::vector<double> probs;
};

// One topology snapshot. Most SKUs carry a single static snapshot; the
// format allows several so week records can point at the one active for them.
struct SkuTopology {
    NetworkTopology topo;
    NetworkTopology reversed;
    std::vector<int> edge_map; // reversal index map (identity here, kept for generality)
    std::vector<std::string> node_names;
    std::vector<std::vector<LeadTimeDist>> lead_dist; // [edge][mot]

    int edge_index(int src, int dst) const; // -1 when absent
};

// Weekly observed record. `inventory` is on-hand at the start of the week,
// before that week's arrivals, demand, and outgoing shipments. `forecast`
// row v holds predicted demand for weeks week+0 .. week+H-1 as seen at the
// start of `week`.
struct WeekRecord {
    int week = 0;
    int topology = 0;
    Eigen::VectorXd inventory;
    Eigen::VectorXd demand;     // realized during the week (distribution nodes)
    Eigen::VectorXd production; // arrived during the week (production nodes)
    Eigen::MatrixXd forecast;   // |V| x H
};

// Inclusive absolute-week ranges; chronological (train < validation < test).
struct SplitRanges {
    int train_begin = 0, train_end = -1;
    int val_begin = 0, val_end = -1;
    int test_begin = 0, test_end = -1;
};

struct SkuData {
    std::string id;
    double price = 1.0;
    int mot_count = 2;
    bool scaled = false;          // quantities divided by scaler.max_inventory
    SkuScaler scaler{1.0};        // from train-period max inventory (raw units)
    std::vector<SkuTopology> topologies;
    std::vector<WeekRecord> weeks; // consecutive, ascending week index
    ShipmentLog shipments;         // every logged action, with realized lead
    Eigen::VectorXd dos;           // per-node safety days of supply (weeks)
    std::vector<double> forecast_sigma; // lognormal dispersion per horizon step
    SplitRanges split;

    int first_week() const { return weeks.empty() ? 0 : weeks.front().week; }
    int last_week() const { return weeks.empty() ? -1 : weeks.back().week; }
    bool has_week(int w) const { return w >= first_week() && w <= last_week(); }
    const WeekRecord& at_week(int w) const;
    const SkuTopology& topology_at(int w) const;
};

struct Corpus {
    int format_version = 1;
    uint64_t seed = 0;
    nlohmann::ordered_json config_echo; // generator config, replayed into reports
    std::vector<SkuData> skus;
    bool scaled = false;
};

// ---------------------------------------------------------------------------
// Serialization. One JSON document per SKU plus a corpus index; quantities on
// disk are always raw units (scaling is applied in memory only).

void write_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir); // raw, unscaled

// ---------------------------------------------------------------------------
// Scaling: divides inventory/demand/production/forecast/shipment quantities
// by the SKU's train-period max inventory. DOS (weeks) and price are unitless
// under this scaler and stay untouched.

SkuScaler compute_scaler(const SkuData& sku);
void scale_sku(SkuData& sku);   // raw -> scaled, records the scaler
void unscale_sku(SkuData& sku); // exact inverse
void scale_corpus(Corpus& corpus);

// ---------------------------------------------------------------------------
// Logged-history views (used by the trainer and the replay/consistency checks)

// Action tensor (single slice) reconstructed from shipments sent at `week`.
ActionTensor logged_actions(const SkuData& sku, int week);

// Imbalance profiles x^t for all nodes: f[0] = on-hand at t; future entries
// use in-flight arrivals as of t and the logged demand path. Production
// nodes accumulate logged production and see no demand. Requires week
// records through t+K-2 for demand (the profile spans t .. t+K-1).
NodeStateMatrix state_at(const SkuData& sku, int week, int feature_count);

// Per-node shipping capability at `week` under actual logged demand.
Eigen::VectorXd capability_at(const SkuData& sku, int week);

// ---------------------------------------------------------------------------
// Offline transitions

struct Transition {
    int sku = 0;  // index into corpus.skus
    int week = 0; // t
    int topology = 0;
    NodeStateMatrix x, x_next;
    ActionTensor a, a_next; // single-slice logged actions
    Eigen::VectorXd cap, cap_next;
};

struct TransitionDataset {
    std::vector<Transition> samples;
    size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

enum class Split { Train, Validation, Test };

// Builds (x^t, a^t, x^{t+1}, a^{t+1}) samples for every week t of the chosen
// split whose K-week feature window stays inside the split's range.
TransitionDataset build_transitions(const Corpus& corpus, Split split, int feature_count);

} // namespace splan
