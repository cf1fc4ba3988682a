#include "splan/netmodel.hpp"

#include <set>
#include <stdexcept>

namespace splan {

NetworkTopology NetworkTopology::make(std::vector<NodeKind> nodes,
                                      std::vector<std::pair<int, int>> edges, int mot_count) {
    if (nodes.empty()) throw std::invalid_argument("topology: at least one node required");
    if (mot_count < 1) throw std::invalid_argument("topology: mot_count must be >= 1");

    const int n = static_cast<int>(nodes.size());
    std::set<std::pair<int, int>> seen;
    for (const auto& [src, dst] : edges) {
        if (src < 0 || src >= n || dst < 0 || dst >= n)
            throw std::invalid_argument("topology: edge endpoint is not a declared node");
        if (src == dst) throw std::invalid_argument("topology: self-loops are not allowed");
        if (!seen.insert({src, dst}).second)
            throw std::invalid_argument("topology: duplicate edge");
    }

    NetworkTopology t;
    t.nodes = std::move(nodes);
    t.edges = std::move(edges);
    t.mot_count = mot_count;
    t.in_edges.resize(n);
    t.out_edges.resize(n);
    for (int e = 0; e < t.edge_count(); ++e) {
        t.out_edges[t.edges[e].first].push_back(e);
        t.in_edges[t.edges[e].second].push_back(e);
    }
    return t;
}

ReversedTopology reverse_topology(const NetworkTopology& topo) {
    std::vector<std::pair<int, int>> rev;
    rev.reserve(topo.edges.size());
    for (const auto& [src, dst] : topo.edges) rev.emplace_back(dst, src);

    ReversedTopology out;
    out.topo = NetworkTopology::make(topo.nodes, std::move(rev), topo.mot_count);
    out.edge_map.resize(topo.edges.size());
    for (size_t i = 0; i < out.edge_map.size(); ++i) out.edge_map[i] = static_cast<int>(i);
    return out;
}

ActionTensor ActionTensor::zeros(int mot_count, int edge_count, int slice_count) {
    ActionTensor a;
    a.mot_count = mot_count;
    a.edge_count = edge_count;
    a.slice_count = slice_count;
    a.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edge_count) * mot_count,
                                     slice_count);
    return a;
}

ActionTensor ActionTensor::mirror(const std::vector<int>& edge_map) const {
    if (static_cast<int>(edge_map.size()) != edge_count)
        throw std::invalid_argument("mirror: edge_map size mismatch");
    ActionTensor out = zeros(mot_count, edge_count, slice_count);
    for (int e = 0; e < edge_count; ++e) {
        int src_edge = edge_map[e];
        if (src_edge < 0 || src_edge >= edge_count)
            throw std::invalid_argument("mirror: edge_map entry out of range");
        out.values.middleRows(static_cast<Eigen::Index>(e) * mot_count, mot_count) =
            values.middleRows(static_cast<Eigen::Index>(src_edge) * mot_count, mot_count);
    }
    return out;
}

void ShipmentLog::add(const ShipmentRecord& r) {
    if (r.quantity < 0.0) throw std::invalid_argument("shipment: negative quantity");
    if (r.lead < 0) throw std::invalid_argument("shipment: negative lead time");
    records.push_back(r);
}

double ShipmentLog::total_sent() const {
    double total = 0.0;
    for (const auto& r : records) total += r.quantity;
    return total;
}

double incoming_supply(const ShipmentLog& log, int node, int receive_time, int as_of,
                       int node_count) {
    if (node < 0 || node >= node_count)
        throw std::invalid_argument("incoming_supply: unknown node id");
    double total = 0.0;
    for (const auto& r : log.records) {
        if (r.destination != node) continue;
        if (r.send_time >= as_of) continue;
        if (r.send_time + r.lead == receive_time) total += r.quantity;
    }
    return total;
}

Eigen::VectorXd imbalance_profile(double initial_inventory, const Eigen::VectorXd& incoming,
                                  const Eigen::VectorXd& demand) {
    if (incoming.size() != demand.size())
        throw std::invalid_argument("imbalance_profile: incoming/demand length mismatch");
    const Eigen::Index k = incoming.size() + 1;
    Eigen::VectorXd f(k);
    f[0] = initial_inventory;
    for (Eigen::Index i = 1; i < k; ++i) f[i] = f[i - 1] + incoming[i - 1] - demand[i - 1];
    return f;
}

SkuScaler::SkuScaler(double max_inv) : max_inventory(max_inv) {
    if (!(max_inventory > 0.0))
        throw std::invalid_argument("scaler: max_inventory must be positive");
}

} // namespace splan
