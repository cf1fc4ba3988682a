#include "splan/gat.hpp"

#include <stdexcept>

namespace splan {

namespace {

std::string pname(const std::string& prefix, int layer, int head, const char* which) {
    return prefix + ".L" + std::to_string(layer) + ".h" + std::to_string(head) + "." + which;
}

} // namespace

void add_gat_params(ad::ParamStore& ps, const std::string& prefix, const GatStack& cfg) {
    if (cfg.dims.empty()) throw std::invalid_argument("gat: at least one layer required");
    if (cfg.heads < 1) throw std::invalid_argument("gat: head count must be >= 1");
    if (cfg.input_dim < 1) throw std::invalid_argument("gat: input_dim unset");
    if (cfg.edge_features && cfg.edge_dim < 1) throw std::invalid_argument("gat: edge_dim unset");

    int in_dim = cfg.input_dim;
    for (size_t l = 0; l < cfg.dims.size(); ++l) {
        int out = cfg.dims[l];
        for (int h = 0; h < cfg.heads; ++h) {
            ps.add(pname(prefix, static_cast<int>(l), h, "W0"), out, in_dim);
            ps.add(pname(prefix, static_cast<int>(l), h, "W1"), out, in_dim);
            if (cfg.edge_features)
                ps.add(pname(prefix, static_cast<int>(l), h, "W2"), out, cfg.edge_dim);
            ps.add(pname(prefix, static_cast<int>(l), h, "c"), out, 1);
        }
        // hidden layers concatenate heads; the final layer averages them
        in_dim = (l + 1 < cfg.dims.size()) ? out * cfg.heads : out;
    }
}

std::vector<ad::Var> gat_forward(ad::Tape& tape, const NetworkTopology& topo,
                                 const std::vector<ad::Var>& features,
                                 const std::vector<ad::Var>* edge_feats,
                                 const ad::ParamStore& params, int store,
                                 const std::string& prefix, const GatStack& cfg) {
    const int n = topo.node_count();
    if (static_cast<int>(features.size()) != n)
        throw std::invalid_argument("gat_forward: one feature Var per node required");
    if (cfg.edge_features) {
        if (!edge_feats || static_cast<int>(edge_feats->size()) != topo.edge_count())
            throw std::invalid_argument("gat_forward: missing edge feature for an existing edge");
    }

    std::vector<ad::Var> h = features;
    const int layer_count = static_cast<int>(cfg.dims.size());

    for (int l = 0; l < layer_count; ++l) {
        const bool final_layer = (l == layer_count - 1);
        // per-head aggregated outputs per node
        std::vector<std::vector<ad::Var>> head_out(
            static_cast<size_t>(cfg.heads), std::vector<ad::Var>(static_cast<size_t>(n)));

        for (int hd = 0; hd < cfg.heads; ++hd) {
            ad::ParamRef w0{store, params.require(pname(prefix, l, hd, "W0"))};
            ad::ParamRef w1{store, params.require(pname(prefix, l, hd, "W1"))};
            ad::ParamRef att{store, params.require(pname(prefix, l, hd, "c"))};
            ad::ParamRef w2{store, -1};
            if (cfg.edge_features) w2.index = params.require(pname(prefix, l, hd, "W2"));

            // shared per-node linear maps
            std::vector<ad::Var> w0h(static_cast<size_t>(n)), w1h(static_cast<size_t>(n));
            for (int v = 0; v < n; ++v) {
                w0h[static_cast<size_t>(v)] = tape.param_matvec(w0, h[static_cast<size_t>(v)]);
                w1h[static_cast<size_t>(v)] = tape.param_matvec(w1, h[static_cast<size_t>(v)]);
            }
            std::vector<ad::Var> w2e;
            if (cfg.edge_features) {
                w2e.resize(static_cast<size_t>(topo.edge_count()));
                for (int e = 0; e < topo.edge_count(); ++e)
                    w2e[static_cast<size_t>(e)] = tape.param_matvec(w2, (*edge_feats)[static_cast<size_t>(e)]);
            }

            for (int i = 0; i < n; ++i) {
                const auto& in_edges = topo.in_edges[static_cast<size_t>(i)];
                std::vector<ad::Var> scores;
                std::vector<ad::Var> messages;
                scores.reserve(in_edges.size() + 1);
                messages.reserve(in_edges.size() + 1);

                // self term first: no edge feature, message is W0 h_i
                ad::Var self_pre = tape.add(w0h[static_cast<size_t>(i)], w1h[static_cast<size_t>(i)]);
                scores.push_back(tape.param_dot(att, tape.leaky_relu(self_pre, cfg.slope)));
                messages.push_back(w0h[static_cast<size_t>(i)]);

                for (int e : in_edges) {
                    int j = topo.edges[static_cast<size_t>(e)].first;
                    ad::Var msg = w1h[static_cast<size_t>(j)];
                    if (cfg.edge_features) msg = tape.add(msg, w2e[static_cast<size_t>(e)]);
                    ad::Var pre = tape.add(w0h[static_cast<size_t>(i)], msg);
                    scores.push_back(tape.param_dot(att, tape.leaky_relu(pre, cfg.slope)));
                    messages.push_back(msg);
                }

                ad::Var alpha = tape.softmax(scores);
                head_out[static_cast<size_t>(hd)][static_cast<size_t>(i)] =
                    tape.weighted_sum(alpha, messages);
            }
        }

        std::vector<ad::Var> next(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<ad::Var> per_head(static_cast<size_t>(cfg.heads));
            for (int hd = 0; hd < cfg.heads; ++hd)
                per_head[static_cast<size_t>(hd)] = head_out[static_cast<size_t>(hd)][static_cast<size_t>(i)];
            if (final_layer) {
                // mean over heads, identity activation
                ad::Var acc = tape.add_many(per_head);
                next[static_cast<size_t>(i)] = tape.scale(acc, 1.0 / cfg.heads);
            } else {
                ad::Var cat = tape.concat(per_head);
                next[static_cast<size_t>(i)] = tape.leaky_relu(cat, cfg.slope);
            }
        }
        h = std::move(next);
    }
    return h;
}

std::vector<ad::Var> embed_bidirectional(ad::Tape& tape, const NetworkTopology& topo,
                                         const NetworkTopology& reversed,
                                         const std::vector<ad::Var>& features,
                                         const std::vector<ad::Var>* edge_feats,
                                         const ad::ParamStore& params, int store,
                                         const std::string& prefix, const GatStack& cfg) {
    auto fwd = gat_forward(tape, topo, features, edge_feats, params, store, prefix + "f", cfg);
    auto bwd = gat_forward(tape, reversed, features, edge_feats, params, store, prefix + "b", cfg);
    std::vector<ad::Var> out(fwd.size());
    for (size_t v = 0; v < fwd.size(); ++v) {
        std::vector<ad::Var> halves{fwd[v], bwd[v]};
        out[v] = tape.concat(halves);
    }
    return out;
}

} // namespace splan
