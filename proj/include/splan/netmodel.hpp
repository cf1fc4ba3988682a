#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace splan {

enum class NodeKind { Distribution, Production };

// Directed supply network for one SKU snapshot. Node ids are dense integers
// 0..|V|-1; the string-name map lives at the dataset boundary only.
struct NetworkTopology {
    std::vector<NodeKind> nodes;
    std::vector<std::pair<int, int>> edges; // (source, destination)
    int mot_count = 1;

    // adjacency caches, filled by make(): edge indices per node
    std::vector<std::vector<int>> in_edges;  // edges whose destination is v
    std::vector<std::vector<int>> out_edges; // edges whose source is v

    static NetworkTopology make(std::vector<NodeKind> nodes,
                                std::vector<std::pair<int, int>> edges,
                                int mot_count);

    int node_count() const { return static_cast<int>(nodes.size()); }
    int edge_count() const { return static_cast<int>(edges.size()); }
};

// Reversal keeps edge order, so reversed.edges[i] = (w,v) where
// topo.edges[i] = (v,w). edge_map[i] gives the originating edge index
// (identity here, but part of the contract so mirror() stays a permutation
// even if a future construction reorders).
struct ReversedTopology {
    NetworkTopology topo;
    std::vector<int> edge_map;
};

ReversedTopology reverse_topology(const NetworkTopology& topo);

// x^t: one K-entry predicted-imbalance profile per node (row v = node v).
struct NodeStateMatrix {
    Eigen::MatrixXd profiles; // |V| x K

    int node_count() const { return static_cast<int>(profiles.rows()); }
    int feature_count() const { return static_cast<int>(profiles.cols()); }
};

// Supply actions: M values per edge per risk-preference slice. Logged history
// carries a single slice; policy output carries one per risk preference.
// Row layout is edge-major (edge e, mot m) -> row e*M + m, so an edge's
// M-vector is a contiguous block.
struct ActionTensor {
    int mot_count = 0;
    int edge_count = 0;
    int slice_count = 0;
    Eigen::MatrixXd values; // (|E|*M) x slices

    static ActionTensor zeros(int mot_count, int edge_count, int slice_count);

    double& at(int mot, int edge, int slice) { return values(edge * mot_count + mot, slice); }
    double at(int mot, int edge, int slice) const { return values(edge * mot_count + mot, slice); }

    // Edge features for the reverse graph: b_{wv} = a_{vw}. edge_map comes
    // from reverse_topology; mirror(mirror()) is the identity.
    ActionTensor mirror(const std::vector<int>& edge_map) const;
};

struct ShipmentRecord {
    int send_time = 0;
    int source = 0;
    int destination = 0;
    int mot = 0;
    double quantity = 0.0;
    int lead = 0; // intervals until delivery; delivers exactly once at send_time + lead
};

struct ShipmentLog {
    std::vector<ShipmentRecord> records;

    void add(const ShipmentRecord& r);
    double total_sent() const;
};

// Sum of shipments delivered to `node` at `receive_time`, counting only
// records sent strictly before `as_of`. Feature construction passes
// as_of = t (in-transit only); post-action inventory updates pass
// as_of = t + 1 so a zero-lead shipment sent this interval arrives now.
double incoming_supply(const ShipmentLog& log, int node, int receive_time, int as_of,
                       int node_count);

// f[0] = initial inventory; f[k] = f[k-1] + incoming[k-1] - demand[k-1].
// Entries may go negative (predicted stockout); nothing is clipped here.
Eigen::VectorXd imbalance_profile(double initial_inventory, const Eigen::VectorXd& incoming,
                                  const Eigen::VectorXd& demand);

// Per-SKU scaler: every quantity is divided by the max inventory observed
// over the SKU's training weeks, so scale(max_inventory) = 1.
struct SkuScaler {
    double max_inventory = 1.0;

    explicit SkuScaler(double max_inv = 1.0);
    double scale(double raw) const { return raw / max_inventory; }
    double unscale(double scaled) const { return scaled * max_inventory; }
};

} // namespace splan
