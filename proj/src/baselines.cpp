#include "splan/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace splan {

double safety_stock(const Eigen::VectorXd& forecast, double dos) {
    if (dos < 0.0) throw std::invalid_argument("safety_stock: dos must be >= 0");
    if (dos == 0.0) return 0.0;
    int whole = static_cast<int>(std::floor(dos));
    double frac = dos - whole;
    int needed = whole + (frac > 0.0 ? 1 : 0);
    if (forecast.size() < needed)
        throw std::invalid_argument("safety_stock: forecast shorter than the DOS window");
    double total = forecast.head(whole).sum();
    if (frac > 0.0) total += frac * forecast[whole];
    return total;
}

RuleContext build_rule_context(const SkuData& sku, int begin_week, int end_week) {
    const auto& st = sku.topologies.front();
    const int n = st.topo.node_count();
    const int ec = st.topo.edge_count();
    const int mots = st.topo.mot_count;

    Eigen::MatrixXd edge_mot = Eigen::MatrixXd::Zero(ec, mots);
    for (const auto& rec : sku.shipments.records) {
        if (rec.send_time < begin_week || rec.send_time > end_week) continue;
        int e = st.edge_index(rec.source, rec.destination);
        if (e >= 0) edge_mot(e, rec.mot) += rec.quantity;
    }

    RuleContext ctx;
    ctx.parent_edges.resize(static_cast<size_t>(n));
    ctx.parent_probs.resize(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) {
        const auto& in = st.topo.in_edges[static_cast<size_t>(v)];
        auto& edges = ctx.parent_edges[static_cast<size_t>(v)];
        auto& probs = ctx.parent_probs[static_cast<size_t>(v)];
        edges.assign(in.begin(), in.end());
        probs.resize(edges.size());
        double total = 0.0;
        for (size_t i = 0; i < edges.size(); ++i) {
            probs[i] = edge_mot.row(edges[i]).sum();
            total += probs[i];
        }
        if (total > 0.0)
            for (double& p : probs) p /= total;
        else if (!probs.empty())
            std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(probs.size()));
    }
    ctx.dominant_mot.assign(static_cast<size_t>(ec), 0);
    for (int e = 0; e < ec; ++e) {
        int best = 0;
        for (int m = 1; m < mots; ++m)
            if (edge_mot(e, m) > edge_mot(e, best)) best = m;
        ctx.dominant_mot[static_cast<size_t>(e)] = best;
    }
    return ctx;
}

RuleOutcome rule_based_step(const SkuTopology& st, const Eigen::VectorXd& inventory,
                            const Eigen::MatrixXd& forecast, const Eigen::VectorXd& dos,
                            const RuleContext& ctx, const Eigen::VectorXd& capacity, Rng& rng) {
    const int n = st.topo.node_count();
    if (inventory.size() != n || dos.size() != n || capacity.size() != n ||
        forecast.rows() != n)
        throw std::invalid_argument("rule_based_step: vector size mismatch");

    RuleOutcome out;
    out.actions = ActionTensor::zeros(st.topo.mot_count, st.topo.edge_count(), 1);

    // step 1+2: deficit nodes each pick one parent, by historical share
    struct Request {
        int edge;
        double quantity;
    };
    std::vector<Request> requests;
    for (int v = 0; v < n; ++v) {
        double deficit = std::max(safety_stock(forecast.row(v), dos[v]) - inventory[v], 0.0);
        if (deficit <= 0.0) continue;
        out.requested += deficit;
        const auto& edges = ctx.parent_edges[static_cast<size_t>(v)];
        if (edges.empty()) {
            ++out.unfillable;
            out.unfilled += deficit;
            continue;
        }
        size_t pick = rng.categorical(ctx.parent_probs[static_cast<size_t>(v)]);
        requests.push_back({edges[pick], deficit});
    }

    // step 3: parents serve their requests in a uniformly shuffled order,
    // never exceeding capacity
    for (size_t i = requests.size(); i > 1; --i)
        std::swap(requests[i - 1], requests[static_cast<size_t>(
                                       rng.uniform_int(0, static_cast<int>(i) - 1))]);
    Eigen::VectorXd remaining = capacity.cwiseMax(0.0);
    for (const auto& req : requests) {
        int parent = st.topo.edges[static_cast<size_t>(req.edge)].first;
        double ship = std::min(req.quantity, remaining[parent]);
        if (ship > 0.0) {
            out.actions.at(ctx.dominant_mot[static_cast<size_t>(req.edge)], req.edge, 0) +=
                ship;
            remaining[parent] -= ship;
        }
        out.unfilled += req.quantity - ship;
    }
    return out;
}

StepPolicy rule_policy(const SkuData& sku, const RuleContext& ctx) {
    return [&sku, ctx](const SkuTopology& st, const NodeStateMatrix& x,
                       const Eigen::VectorXd& capability, int week, Rng& rng) {
        // the simulated on-hand is the first profile entry, not the log's
        Eigen::VectorXd inventory = x.profiles.col(0);
        return rule_based_step(st, inventory, sku.at_week(week).forecast, sku.dos, ctx,
                               capability, rng)
            .actions;
    };
}

} // namespace splan
