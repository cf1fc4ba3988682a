#include "splan/actor_critic.hpp"

#include <cmath>
#include <stdexcept>

namespace splan {

double node_reward(double f, const RiskPreference& risk) {
    double d = f - risk.f_ref;
    double y = d >= 0.0 ? 1.0 - risk.c1 * d : 1.0 - risk.c2 * (-d);
    return std::max(y, -1.0);
}

double network_reward(const NodeStateMatrix& x_next, const RiskPreference& risk) {
    const Eigen::Index last = x_next.profiles.cols() - 1;
    double total = 0.0;
    for (Eigen::Index v = 0; v < x_next.profiles.rows(); ++v)
        total += node_reward(x_next.profiles(v, last), risk);
    return total;
}

Eigen::VectorXd supply_capability(const NetworkTopology& topo, const Eigen::VectorXd& inventory,
                                  const Eigen::VectorXd& demand) {
    const int n = topo.node_count();
    if (inventory.size() != n || demand.size() != n)
        throw std::invalid_argument("supply_capability: vector size mismatch");
    Eigen::VectorXd y(n);
    for (int v = 0; v < n; ++v) {
        double reserve = topo.nodes[static_cast<size_t>(v)] == NodeKind::Production
                             ? inventory[v]
                             : inventory[v] - demand[v];
        y[v] = std::max(reserve, 0.0);
    }
    return y;
}

std::vector<RiskPreference> default_lambda_grid() {
    std::vector<RiskPreference> grid;
    for (auto [c1, c2] : {std::pair{10.0, 10.0}, std::pair{2.0, 10.0}})
        for (int i = 0; i <= 5; ++i) grid.push_back({c1, c2, i / 10.0});
    return grid;
}

NetsConfig NetsConfig::defaults(int feature_count, int mot_count) {
    NetsConfig cfg;
    cfg.feature_count = feature_count;
    cfg.mot_count = mot_count;
    cfg.lambdas = default_lambda_grid();
    cfg.x_stack = GatStack{{16, 16, 16}, 3, cfg.slope, false, feature_count, 0};
    cfg.xa_stack = GatStack{{100, 20, 20}, 3, cfg.slope, true, feature_count, mot_count};
    return cfg;
}

// ---------------------------------------------------------------------------
// MLP helpers

namespace {

std::string lname(const std::string& prefix, int layer, const char* which) {
    return prefix + ".l" + std::to_string(layer) + "." + which;
}

void add_mlp_params(ad::ParamStore& ps, const std::string& prefix, int in_dim,
                    const std::vector<int>& hidden, int out_dim) {
    int d = in_dim;
    int l = 0;
    for (int h : hidden) {
        ps.add(lname(prefix, l, "W"), h, d);
        ps.add(lname(prefix, l, "b"), h, 1);
        d = h;
        ++l;
    }
    ps.add(lname(prefix, l, "W"), out_dim, d);
    ps.add(lname(prefix, l, "b"), out_dim, 1);
}

// linear stack with LeakyReLU between layers; output layer left linear for
// the caller's squashing function
ad::Var mlp_forward(ad::Tape& tape, ad::Var in, const ad::ParamStore& ps, int store,
                    const std::string& prefix, int layer_count, double slope) {
    ad::Var h = in;
    for (int l = 0; l < layer_count; ++l) {
        ad::ParamRef w{store, ps.require(lname(prefix, l, "W"))};
        ad::ParamRef b{store, ps.require(lname(prefix, l, "b"))};
        h = tape.param_affine(w, b, h);
        if (l + 1 < layer_count) h = tape.leaky_relu(h, slope);
    }
    return h;
}

Eigen::VectorXd mlp_forward_raw(const Eigen::VectorXd& in, const ad::ParamStore& ps,
                                const std::string& prefix, int layer_count, double slope) {
    Eigen::VectorXd h = in;
    for (int l = 0; l < layer_count; ++l) {
        const auto& W = ps.value(ps.require(lname(prefix, l, "W")));
        const auto& B = ps.value(ps.require(lname(prefix, l, "b")));
        h = W * h + B.col(0);
        if (l + 1 < layer_count)
            h = (h.array() > 0.0).select(h, slope * h);
    }
    return h;
}

std::vector<ad::Var> node_feature_vars(ad::Tape& tape, const NodeStateMatrix& x) {
    std::vector<ad::Var> feats;
    feats.reserve(static_cast<size_t>(x.node_count()));
    for (int v = 0; v < x.node_count(); ++v) {
        Eigen::VectorXd row = x.profiles.row(v).transpose();
        feats.push_back(tape.input(row));
    }
    return feats;
}

} // namespace

void add_actor_params(ad::ParamStore& ps, const NetsConfig& cfg) {
    add_gat_params(ps, "xf", cfg.x_stack);
    add_gat_params(ps, "xb", cfg.x_stack);
    const int h = cfg.x_stack.dims.back();
    add_mlp_params(ps, "head", 4 * h, cfg.mu_hidden, cfg.mot_count * cfg.lambda_count());
}

void add_critic_params(ad::ParamStore& ps, const NetsConfig& cfg) {
    add_gat_params(ps, "xaf", cfg.xa_stack);
    add_gat_params(ps, "xab", cfg.xa_stack);
    const int h = cfg.xa_stack.dims.back();
    add_mlp_params(ps, "head", 2 * h, cfg.q_hidden, cfg.lambda_count());
}

PolicyVars policy_forward(ad::Tape& tape, const NetworkTopology& topo,
                          const NetworkTopology& reversed, const NodeStateMatrix& x,
                          const Eigen::VectorXd& capability, const ad::ParamStore& actor,
                          int actor_store, const NetsConfig& cfg) {
    const int n = topo.node_count();
    const int edge_count = topo.edge_count();
    const int m = cfg.mot_count;
    const int lc = cfg.lambda_count();
    if (capability.size() != n) throw std::invalid_argument("policy_forward: capability size");

    auto feats = node_feature_vars(tape, x);
    auto s = embed_bidirectional(tape, topo, reversed, feats, nullptr, actor, actor_store, "x",
                                 cfg.x_stack);

    const int mu_layers = static_cast<int>(cfg.mu_hidden.size()) + 1;
    std::vector<ad::Var> fractions(static_cast<size_t>(edge_count)); // sigmoid output, dim M*|Lambda|
    for (int e = 0; e < edge_count; ++e) {
        auto [v, w] = topo.edges[static_cast<size_t>(e)];
        std::vector<ad::Var> pair{s[static_cast<size_t>(v)], s[static_cast<size_t>(w)]};
        ad::Var in = tape.concat(pair);
        ad::Var out = mlp_forward(tape, in, actor, actor_store, "head", mu_layers, cfg.slope);
        fractions[static_cast<size_t>(e)] = tape.sigmoid(out);
    }

    PolicyVars pv;
    pv.edge_actions.assign(static_cast<size_t>(lc),
                           std::vector<ad::Var>(static_cast<size_t>(edge_count)));
    for (int v = 0; v < n; ++v) {
        const auto& out_edges = topo.out_edges[static_cast<size_t>(v)];
        if (out_edges.empty()) continue;
        const double y = capability[v];
        for (int l = 0; l < lc; ++l) {
            std::vector<ad::Var> segs(out_edges.size());
            std::vector<ad::Var> sums(out_edges.size());
            for (size_t k = 0; k < out_edges.size(); ++k) {
                segs[k] = tape.segment(fractions[static_cast<size_t>(out_edges[k])], l * m, m);
                sums[k] = tape.sum(segs[k]);
            }
            ad::Var total = sums.size() == 1 ? sums[0] : tape.add_many(sums);
            // normalization branch: above 1 the fractions are shared
            // proportionally; at or below 1 each fraction earns Y directly
            if (tape.value_scalar(total) > 1.0) {
                ad::Var factor = tape.div_scalar(tape.input_scalar(y), total);
                for (size_t k = 0; k < out_edges.size(); ++k)
                    pv.edge_actions[static_cast<size_t>(l)][static_cast<size_t>(out_edges[k])] =
                        tape.mul_scalar(segs[k], factor);
            } else {
                for (size_t k = 0; k < out_edges.size(); ++k)
                    pv.edge_actions[static_cast<size_t>(l)][static_cast<size_t>(out_edges[k])] =
                        tape.scale(segs[k], y);
            }
        }
    }
    return pv;
}

ActionTensor extract_actions(const ad::Tape& tape, const PolicyVars& pv, const NetsConfig& cfg,
                             int edge_count) {
    ActionTensor out = ActionTensor::zeros(cfg.mot_count, edge_count, cfg.lambda_count());
    for (int l = 0; l < cfg.lambda_count(); ++l) {
        for (int e = 0; e < edge_count; ++e) {
            const ad::Var& v = pv.edge_actions[static_cast<size_t>(l)][static_cast<size_t>(e)];
            if (v.node < 0) continue; // source node had no capability entry (never happens: zeros stay)
            Eigen::VectorXd a = tape.value(v);
            for (int m = 0; m < cfg.mot_count; ++m) out.at(m, e, l) = a[m];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Value heads

namespace {

// per-node |Lambda|-wide bounded value: tanh(mlp_Q(u_v)) / (1 - gamma)
std::vector<ad::Var> per_node_values(ad::Tape& tape, const std::vector<ad::Var>& u,
                                     const ad::ParamStore& critic, int store,
                                     const NetsConfig& cfg) {
    const int q_layers = static_cast<int>(cfg.q_hidden.size()) + 1;
    std::vector<ad::Var> q(u.size());
    for (size_t v = 0; v < u.size(); ++v) {
        ad::Var raw = mlp_forward(tape, u[v], critic, store, "head", q_layers, cfg.slope);
        q[v] = tape.scale(tape.tanh(raw), 1.0 / (1.0 - cfg.gamma));
    }
    return q;
}

std::vector<ad::Var> sum_per_lambda(ad::Tape& tape, const std::vector<ad::Var>& node_values,
                                    int lambda_count) {
    std::vector<ad::Var> out(static_cast<size_t>(lambda_count));
    for (int l = 0; l < lambda_count; ++l) {
        std::vector<ad::Var> comps(node_values.size());
        for (size_t v = 0; v < node_values.size(); ++v)
            comps[v] = tape.segment(node_values[v], l, 1);
        out[static_cast<size_t>(l)] = comps.size() == 1 ? comps[0] : tape.add_many(comps);
    }
    return out;
}

} // namespace

std::vector<ad::Var> value_forward_logged(ad::Tape& tape, const NetworkTopology& topo,
                                          const NetworkTopology& reversed,
                                          const NodeStateMatrix& x, const ActionTensor& actions,
                                          int slice, const ad::ParamStore& critic,
                                          int critic_store, const NetsConfig& cfg) {
    if (slice < 0 || slice >= actions.slice_count)
        throw std::invalid_argument("value_forward_logged: slice out of range");
    auto feats = node_feature_vars(tape, x);
    std::vector<ad::Var> edge_feats(static_cast<size_t>(topo.edge_count()));
    for (int e = 0; e < topo.edge_count(); ++e) {
        Eigen::VectorXd a(cfg.mot_count);
        for (int m = 0; m < cfg.mot_count; ++m) a[m] = actions.at(m, e, slice);
        edge_feats[static_cast<size_t>(e)] = tape.input(a);
    }
    auto u = embed_bidirectional(tape, topo, reversed, feats, &edge_feats, critic, critic_store,
                                 "xa", cfg.xa_stack);
    auto q = per_node_values(tape, u, critic, critic_store, cfg);
    return sum_per_lambda(tape, q, cfg.lambda_count());
}

std::vector<ad::Var> value_forward_policy(ad::Tape& tape, const NetworkTopology& topo,
                                          const NetworkTopology& reversed,
                                          const NodeStateMatrix& x, const PolicyVars& pv,
                                          const ad::ParamStore& critic, int critic_store,
                                          const NetsConfig& cfg) {
    const int lc = cfg.lambda_count();
    std::vector<ad::Var> out(static_cast<size_t>(lc));
    auto feats = node_feature_vars(tape, x);
    for (int l = 0; l < lc; ++l) {
        auto u = embed_bidirectional(tape, topo, reversed, feats,
                                     &pv.edge_actions[static_cast<size_t>(l)], critic,
                                     critic_store, "xa", cfg.xa_stack);
        auto q = per_node_values(tape, u, critic, critic_store, cfg);
        std::vector<ad::Var> comps(q.size());
        for (size_t v = 0; v < q.size(); ++v) comps[v] = tape.segment(q[v], l, 1);
        out[static_cast<size_t>(l)] = comps.size() == 1 ? comps[0] : tape.add_many(comps);
    }
    return out;
}

ad::Var behavioral_regularizer(ad::Tape& tape, const NetworkTopology& topo,
                               const NodeStateMatrix& x,
                               const std::vector<ad::Var>& edge_actions, double f_ref) {
    const int n = topo.node_count();
    const Eigen::Index last = x.profiles.cols() - 1;
    std::vector<ad::Var> squares;
    squares.reserve(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) {
        double shortfall = std::min(x.profiles(v, last) - f_ref, 0.0);
        const auto& in_edges = topo.in_edges[static_cast<size_t>(v)];
        ad::Var resid;
        if (in_edges.empty()) {
            resid = tape.input_scalar(shortfall);
        } else {
            std::vector<ad::Var> sums;
            sums.reserve(in_edges.size() + 1);
            sums.push_back(tape.input_scalar(shortfall));
            for (int e : in_edges) sums.push_back(tape.sum(edge_actions[static_cast<size_t>(e)]));
            resid = tape.add_many(sums);
        }
        squares.push_back(tape.square(resid));
    }
    ad::Var total = squares.size() == 1 ? squares[0] : tape.add_many(squares);
    return tape.scale(total, -1.0 / n);
}

double behavioral_regularizer_value(const NetworkTopology& topo, const NodeStateMatrix& x,
                                    const ActionTensor& actions, int slice, double f_ref) {
    const int n = topo.node_count();
    const Eigen::Index last = x.profiles.cols() - 1;
    double total = 0.0;
    for (int v = 0; v < n; ++v) {
        double resid = std::min(x.profiles(v, last) - f_ref, 0.0);
        for (int e : topo.in_edges[static_cast<size_t>(v)])
            for (int m = 0; m < actions.mot_count; ++m) resid += actions.at(m, e, slice);
        total += resid * resid;
    }
    return -total / n;
}

// ---------------------------------------------------------------------------
// Raw (untaped) forward passes for the simulation hot path

namespace {

std::string gname(const std::string& prefix, int layer, int head, const char* which) {
    return prefix + ".L" + std::to_string(layer) + ".h" + std::to_string(head) + "." + which;
}

Eigen::RowVectorXd leaky_row(const Eigen::RowVectorXd& x, double slope) {
    return (x.array() > 0.0).select(x, slope * x);
}

Eigen::MatrixXd gat_forward_raw(const NetworkTopology& topo, const Eigen::MatrixXd& feats,
                                const Eigen::MatrixXd* edge_feats, const ad::ParamStore& ps,
                                const std::string& prefix, const GatStack& cfg) {
    const int n = topo.node_count();
    Eigen::MatrixXd h = feats; // n x d
    const int layer_count = static_cast<int>(cfg.dims.size());
    for (int l = 0; l < layer_count; ++l) {
        const bool final_layer = (l == layer_count - 1);
        const int out_dim = cfg.dims[static_cast<size_t>(l)];
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, final_layer ? out_dim
                                                                   : out_dim * cfg.heads);
        for (int hd = 0; hd < cfg.heads; ++hd) {
            const auto& W0 = ps.value(ps.require(gname(prefix, l, hd, "W0")));
            const auto& W1 = ps.value(ps.require(gname(prefix, l, hd, "W1")));
            const auto& C = ps.value(ps.require(gname(prefix, l, hd, "c")));
            const Eigen::MatrixXd* W2 = nullptr;
            Eigen::MatrixXd w2e;
            if (cfg.edge_features) {
                W2 = &ps.value(ps.require(gname(prefix, l, hd, "W2")));
                w2e = (*edge_feats) * W2->transpose(); // E x out
            }
            Eigen::MatrixXd w0h = h * W0.transpose(); // n x out
            Eigen::MatrixXd w1h = h * W1.transpose();

            for (int i = 0; i < n; ++i) {
                const auto& in_edges = topo.in_edges[static_cast<size_t>(i)];
                const int k = static_cast<int>(in_edges.size()) + 1;
                Eigen::VectorXd scores(k);
                Eigen::MatrixXd msgs(k, out_dim);
                msgs.row(0) = w0h.row(i);
                scores[0] =
                    C.col(0).dot(leaky_row(w0h.row(i) + w1h.row(i), cfg.slope).transpose());
                for (int idx = 0; idx < k - 1; ++idx) {
                    int e = in_edges[static_cast<size_t>(idx)];
                    int j = topo.edges[static_cast<size_t>(e)].first;
                    Eigen::RowVectorXd msg = w1h.row(j);
                    if (cfg.edge_features) msg += w2e.row(e);
                    msgs.row(idx + 1) = msg;
                    scores[idx + 1] =
                        C.col(0).dot(leaky_row(w0h.row(i) + msg, cfg.slope).transpose());
                }
                // softmax, ordered exactly like the taped version
                double mx = scores.maxCoeff();
                Eigen::VectorXd alpha = (scores.array() - mx).exp();
                alpha /= alpha.sum();
                Eigen::RowVectorXd agg = Eigen::RowVectorXd::Zero(out_dim);
                for (int idx = 0; idx < k; ++idx) agg += alpha[idx] * msgs.row(idx);
                if (final_layer)
                    out.row(i) += agg; // heads summed, averaged below
                else
                    out.block(i, hd * out_dim, 1, out_dim) = agg;
            }
        }
        if (final_layer)
            out /= static_cast<double>(cfg.heads);
        else
            out = (out.array() > 0.0).select(out, cfg.slope * out);
        h = std::move(out);
    }
    return h;
}

} // namespace

ActionTensor policy_actions(const NetworkTopology& topo, const NetworkTopology& reversed,
                            const NodeStateMatrix& x, const Eigen::VectorXd& capability,
                            const ad::ParamStore& actor, const NetsConfig& cfg) {
    const int n = topo.node_count();
    const int m = cfg.mot_count;
    const int lc = cfg.lambda_count();
    const int mu_layers = static_cast<int>(cfg.mu_hidden.size()) + 1;

    Eigen::MatrixXd sf = gat_forward_raw(topo, x.profiles, nullptr, actor, "xf", cfg.x_stack);
    Eigen::MatrixXd sb = gat_forward_raw(reversed, x.profiles, nullptr, actor, "xb", cfg.x_stack);

    const int h = cfg.x_stack.dims.back();
    Eigen::MatrixXd fractions(topo.edge_count(), m * lc);
    for (int e = 0; e < topo.edge_count(); ++e) {
        auto [v, w] = topo.edges[static_cast<size_t>(e)];
        Eigen::VectorXd in(4 * h);
        in << sf.row(v).transpose(), sb.row(v).transpose(), sf.row(w).transpose(),
            sb.row(w).transpose();
        Eigen::VectorXd raw = mlp_forward_raw(in, actor, "head", mu_layers, cfg.slope);
        fractions.row(e) = (1.0 / (1.0 + (-raw.array()).exp())).transpose();
    }

    ActionTensor out = ActionTensor::zeros(m, topo.edge_count(), lc);
    for (int v = 0; v < n; ++v) {
        const auto& out_edges = topo.out_edges[static_cast<size_t>(v)];
        if (out_edges.empty()) continue;
        const double y = capability[v];
        for (int l = 0; l < lc; ++l) {
            double total = 0.0;
            for (int e : out_edges) total += fractions.row(e).segment(l * m, m).sum();
            const double factor = total > 1.0 ? y / total : y;
            for (int e : out_edges)
                for (int mm = 0; mm < m; ++mm)
                    out.at(mm, e, l) = factor * fractions(e, l * m + mm);
        }
    }
    return out;
}

Eigen::VectorXd network_values(const NetworkTopology& topo, const NetworkTopology& reversed,
                               const NodeStateMatrix& x, const ActionTensor& actions, int slice,
                               const ad::ParamStore& critic, const NetsConfig& cfg) {
    Eigen::MatrixXd edge_feats(topo.edge_count(), cfg.mot_count);
    for (int e = 0; e < topo.edge_count(); ++e)
        for (int m = 0; m < cfg.mot_count; ++m) edge_feats(e, m) = actions.at(m, e, slice);

    Eigen::MatrixXd uf =
        gat_forward_raw(topo, x.profiles, &edge_feats, critic, "xaf", cfg.xa_stack);
    Eigen::MatrixXd ub =
        gat_forward_raw(reversed, x.profiles, &edge_feats, critic, "xab", cfg.xa_stack);

    const int hdim = cfg.xa_stack.dims.back();
    const int q_layers = static_cast<int>(cfg.q_hidden.size()) + 1;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(cfg.lambda_count());
    for (int v = 0; v < topo.node_count(); ++v) {
        Eigen::VectorXd u(2 * hdim);
        u << uf.row(v).transpose(), ub.row(v).transpose();
        Eigen::VectorXd raw = mlp_forward_raw(u, critic, "head", q_layers, cfg.slope);
        q += (raw.array().tanh() / (1.0 - cfg.gamma)).matrix();
    }
    return q;
}

} // namespace splan
