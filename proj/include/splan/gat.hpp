#pragma once

#include <string>
#include <vector>

#include "splan/diffcore.hpp"
#include "splan/netmodel.hpp"

namespace splan {

// One directional attention stack (applied to the forward or the reverse
// graph). dims are per-head output widths; hidden layers concatenate heads
// (width dims[l] * heads) and apply LeakyReLU, the final layer averages heads
// and applies no activation, so the stack output width is dims.back().
struct GatStack {
    std::vector<int> dims;
    int heads = 3;
    double slope = 0.2;      // LeakyReLU slope, also used inside attention scores
    bool edge_features = false;
    int input_dim = 0;       // node feature width K
    int edge_dim = 0;        // M, only read when edge_features
};

// Registers {prefix}.L{l}.h{h}.{W0,W1,c} (+W2 for the edge variant).
void add_gat_params(ad::ParamStore& ps, const std::string& prefix, const GatStack& cfg);

// Taped forward pass over one graph direction. edge_feats must hold one
// dim-M Var per edge when cfg.edge_features, in topology edge order; pass
// nullptr otherwise. Attention per destination i spans {i} + in-neighbors;
// the self term scores c'LeakyReLU(W0 h_i + W1 h_i) and carries message
// W0 h_i with no edge contribution.
std::vector<ad::Var> gat_forward(ad::Tape& tape, const NetworkTopology& topo,
                                 const std::vector<ad::Var>& features,
                                 const std::vector<ad::Var>* edge_feats,
                                 const ad::ParamStore& params, int store,
                                 const std::string& prefix, const GatStack& cfg);

// Bidirectional node embedding s_v = [forward-stack || reverse-stack], each
// direction with its own parameters ({prefix}f.*, {prefix}b.*). The reverse
// direction reuses the same per-edge feature Vars: reversal preserves edge
// order, so mirrored features b_wv = a_vw are index-identical.
std::vector<ad::Var> embed_bidirectional(ad::Tape& tape, const NetworkTopology& topo,
                                         const NetworkTopology& reversed,
                                         const std::vector<ad::Var>& features,
                                         const std::vector<ad::Var>* edge_feats,
                                         const ad::ParamStore& params, int store,
                                         const std::string& prefix, const GatStack& cfg);

} // namespace splan
