// Release acceptance checks. Each numbered check prints exactly one
// [PASS]/[FAIL] line with its measured quantities and the tolerance it was
// held to; the process exit code is the number of failed gated checks.
// Check 9 is directional and reported only - it never gates.
//
//   splan_acceptance [--only 1,4,10] [--work DIR]
//
// --only reuses artifacts left in the work directory by earlier invocations
// (development convenience); a full run always starts from a clean slate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "splan/cliapp.hpp"

namespace fs = std::filesystem;
using namespace splan;
using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// small utilities

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2g", v);
    return buf;
}

std::string fix1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

struct CheckResult {
    bool pass = false;
    std::string detail;
};

// One topology with 3..max_nodes nodes, at least one plant, one DC, and one
// edge; duplicate-free random directed edges, cycles allowed (the embedding
// has no acyclicity requirement).
NetworkTopology random_topology(Rng& rng, int min_nodes, int max_nodes, int mot_count) {
    const int n = rng.uniform_int(min_nodes, max_nodes);
    std::vector<NodeKind> kinds(static_cast<size_t>(n), NodeKind::Distribution);
    kinds[0] = NodeKind::Production;
    for (int v = 1; v + 1 < n; ++v)
        if (rng.uniform() < 0.3) kinds[static_cast<size_t>(v)] = NodeKind::Production;
    std::set<std::pair<int, int>> seen;
    std::vector<std::pair<int, int>> edges;
    const int want = rng.uniform_int(n - 1, 2 * n);
    int guard = 0;
    while (static_cast<int>(edges.size()) < want && ++guard < 200) {
        int a = rng.uniform_int(0, n - 1), b = rng.uniform_int(0, n - 1);
        if (a == b || !seen.insert({a, b}).second) continue;
        edges.emplace_back(a, b);
    }
    if (edges.empty()) edges.emplace_back(0, n - 1);
    return NetworkTopology::make(std::move(kinds), std::move(edges), mot_count);
}

NodeStateMatrix random_state(Rng& rng, int n, int k) {
    NodeStateMatrix x;
    x.profiles.resize(n, k);
    for (int v = 0; v < n; ++v)
        for (int j = 0; j < k; ++j) x.profiles(v, j) = rng.normal(0.2, 0.6);
    return x;
}

// Shapes kept small so full-chain central differences stay fast while still
// exercising hidden layers (head concat) and the final head-average layer.
NetsConfig probe_config(int mot_count) {
    NetsConfig cfg;
    cfg.feature_count = 4;
    cfg.mot_count = mot_count;
    cfg.lambdas = {{10.0, 10.0, 0.3}, {2.0, 10.0, 0.5}};
    cfg.x_stack = GatStack{{6, 5, 4}, 2, cfg.slope, false, 4, 0};
    cfg.xa_stack = GatStack{{8, 5, 4}, 2, cfg.slope, true, 4, mot_count};
    cfg.mu_hidden = {6, 4};
    cfg.q_hidden = {8, 5};
    return cfg;
}

// ===========================================================================
// 1. gradient correctness: analytic gradients vs central differences at
//    h = 1e-5 for (a) the node-feature and edge-feature attention stacks,
//    (b) the full policy objective, (c) the full TD loss.

CheckResult check_gradients() {
    const double h = 1e-5, tol = 1e-5;
    const int seeds = 20, coords = 5;
    double err_x = 0.0, err_xa = 0.0, err_policy = 0.0, err_td = 0.0;
    Timer t;

    // Central differences at h carry ~|loss|*eps/h of roundoff noise in the
    // numerator, so the relative metric gets an absolute denominator floor at
    // that noise scale over the tolerance; coordinates above the floor are
    // certified to `tol` relative, coordinates below it to tol*floor absolute
    // (~1e-9 here, far below anything training can feel).
    auto checked = [&](const ad::LossFn& fn, ad::ParamStore& ps, uint64_t probe) {
        double base = std::abs(fn(ps, nullptr));
        return ad::finite_diff_check(fn, ps, h, coords, probe,
                                     1e-4 * std::max(1.0, base));
    };

    for (int s = 0; s < seeds; ++s) {
        Rng rng(Rng::derive(1000 + static_cast<uint64_t>(s), "acc-grad"));
        NetworkTopology topo = random_topology(rng, 3, 6, 2);
        ReversedTopology rev = reverse_topology(topo);
        const int n = topo.node_count(), m = topo.mot_count;
        NetsConfig cfg = probe_config(m);
        NodeStateMatrix x = random_state(rng, n, cfg.feature_count);
        Eigen::MatrixXd feats = x.profiles;
        ActionTensor logged = ActionTensor::zeros(m, topo.edge_count(), 1);
        for (int e = 0; e < topo.edge_count(); ++e)
            for (int mm = 0; mm < m; ++mm) logged.at(mm, e, 0) = rng.uniform(0.0, 0.5);
        Eigen::VectorXd cap(n);
        for (int v = 0; v < n; ++v) cap[v] = rng.uniform(0.2, 1.5);

        // (a) bidirectional attention stacks, with and without edge features
        auto stack_loss = [&](const GatStack& gs, bool with_edges) {
            return [&, gs, with_edges](const ad::ParamStore& ps, ad::GradStore* grads) {
                ad::Tape tape;
                int st = tape.attach(ps, grads);
                std::vector<ad::Var> fv;
                for (int v = 0; v < n; ++v)
                    fv.push_back(tape.input(Eigen::VectorXd(feats.row(v))));
                std::vector<ad::Var> ev;
                if (with_edges)
                    for (int e = 0; e < topo.edge_count(); ++e)
                        ev.push_back(tape.input(Eigen::VectorXd(
                            logged.values.block(e * m, 0, m, 1))));
                auto emb = embed_bidirectional(tape, topo, rev.topo, fv,
                                               with_edges ? &ev : nullptr, ps, st, "g", gs);
                std::vector<ad::Var> sums;
                for (auto& vv : emb) sums.push_back(tape.sum(vv));
                ad::Var loss = tape.sum(tape.add_many(sums));
                double v = tape.value_scalar(loss);
                if (grads) tape.backward(loss);
                return v;
            };
        };
        {
            ad::ParamStore ps;
            add_gat_params(ps, "gf", cfg.x_stack);
            add_gat_params(ps, "gb", cfg.x_stack);
            ps.glorot_init(rng);
            err_x = std::max(err_x, checked(stack_loss(cfg.x_stack, false), ps,
                                            100 + static_cast<uint64_t>(s)));
        }
        {
            ad::ParamStore ps;
            add_gat_params(ps, "gf", cfg.xa_stack);
            add_gat_params(ps, "gb", cfg.xa_stack);
            ps.glorot_init(rng);
            err_xa = std::max(err_xa, checked(stack_loss(cfg.xa_stack, true), ps,
                                              200 + static_cast<uint64_t>(s)));
        }

        // (b) policy objective mean_lambda(Q(x, mu(x)) + eta L), critic frozen
        ad::ParamStore actor, critic;
        add_actor_params(actor, cfg);
        add_critic_params(critic, cfg);
        actor.glorot_init(rng);
        critic.glorot_init(rng);
        const double eta = 1.0;
        auto objective = [&](const ad::ParamStore& ap, ad::GradStore* grads) {
            ad::Tape tape;
            int sa = tape.attach(ap, grads);
            int sc = tape.attach(critic, nullptr);
            PolicyVars pv = policy_forward(tape, topo, rev.topo, x, cap, ap, sa, cfg);
            auto qs = value_forward_policy(tape, topo, rev.topo, x, pv, critic, sc, cfg);
            std::vector<ad::Var> terms;
            for (int l = 0; l < cfg.lambda_count(); ++l) {
                ad::Var reg = behavioral_regularizer(tape, topo, x,
                                                     pv.edge_actions[static_cast<size_t>(l)],
                                                     cfg.lambdas[static_cast<size_t>(l)].f_ref);
                terms.push_back(tape.add(qs[static_cast<size_t>(l)], tape.scale(reg, eta)));
            }
            ad::Var j = tape.scale(tape.add_many(terms), 1.0 / cfg.lambda_count());
            double v = tape.value_scalar(j);
            if (grads) tape.backward(j);
            return v;
        };
        err_policy = std::max(err_policy,
                              checked(objective, actor, 300 + static_cast<uint64_t>(s)));

        // (c) TD loss mean_lambda (y - Q(x, a_logged))^2 with fixed targets
        // from a frozen target copy (constant w.r.t. the online critic)
        ad::ParamStore target;
        add_critic_params(target, cfg);
        target.glorot_init(rng);
        Eigen::VectorXd q_next = network_values(topo, rev.topo, x, logged, 0, target, cfg);
        Eigen::VectorXd y(cfg.lambda_count());
        for (int l = 0; l < cfg.lambda_count(); ++l)
            y[l] = network_reward(x, cfg.lambdas[static_cast<size_t>(l)]) +
                   cfg.gamma * q_next[l];
        auto td = [&](const ad::ParamStore& cp, ad::GradStore* grads) {
            ad::Tape tape;
            int sc = tape.attach(cp, grads);
            auto qs = value_forward_logged(tape, topo, rev.topo, x, logged, 0, cp, sc, cfg);
            std::vector<ad::Var> sq;
            for (int l = 0; l < cfg.lambda_count(); ++l)
                sq.push_back(tape.square(tape.sub(tape.input_scalar(y[l]),
                                                  qs[static_cast<size_t>(l)])));
            ad::Var loss = tape.scale(tape.add_many(sq), 1.0 / cfg.lambda_count());
            double v = tape.value_scalar(loss);
            if (grads) tape.backward(loss);
            return v;
        };
        err_td = std::max(err_td, checked(td, critic, 400 + static_cast<uint64_t>(s)));
    }

    double elapsed = t.seconds();
    double worst = std::max({err_x, err_xa, err_policy, err_td});
    bool pass = worst < tol && elapsed < 60.0;
    return {pass, "max rel err: node-stack " + sci(err_x) + ", edge-stack " + sci(err_xa) +
                      ", policy objective " + sci(err_policy) + ", td loss " + sci(err_td) +
                      " (tol 1e-05, h=1e-05, denom floor 1e-4*max(1,|loss|), 20 seeds, "
                      "3-6 nodes, " + fix1(elapsed) + "s)"};
}

// ===========================================================================
// 2. reward exactness against the piecewise closed form

CheckResult check_reward() {
    auto closed_form = [](double f, double c1, double c2, double f_ref) {
        double r = f >= f_ref ? 1.0 - c1 * (f - f_ref) : 1.0 - c2 * (f_ref - f);
        return std::max(r, -1.0);
    };
    const RiskPreference cases[] = {{2.0, 5.0, 0.2}, {1.0, 5.0, 0.4}};
    double max_err = 0.0;
    bool in_range = true;
    for (const RiskPreference& rp : cases) {
        for (int i = 0; i < 1000; ++i) {
            double f = -2.0 + 4.0 * static_cast<double>(i) / 999.0;
            double got = node_reward(f, rp);
            max_err = std::max(max_err, std::abs(got - closed_form(f, rp.c1, rp.c2, rp.f_ref)));
            in_range = in_range && got >= -1.0 && got <= 1.0;
        }
        max_err = std::max(max_err, std::abs(node_reward(rp.f_ref, rp) - 1.0));
    }
    bool pass = max_err < 1e-12 && in_range;
    return {pass, "closed-form max abs err " + sci(max_err) + " over 2x1000-point grids" +
                      (in_range ? ", range within [-1,1]" : ", RANGE VIOLATION") +
                      " (tol 1e-12)"};
}

// ===========================================================================
// 3. capacity clamp and stock conservation over 10,000 randomized steps,
//    with outgoing quantities produced by randomly initialized policies

CheckResult check_conservation() {
    const int worlds = 200, steps_per_world = 50;
    int steps = 0, cap_viol = 0, mass_viol = 0, neg_inv = 0;
    double worst_mass = 0.0, worst_cap = 0.0;
    Timer t;

    for (int w = 0; w < worlds; ++w) {
        Rng rng(Rng::derive(2000 + static_cast<uint64_t>(w), "acc-sim"));
        NetworkTopology topo = random_topology(rng, 3, 8, 2);
        ReversedTopology rev = reverse_topology(topo);
        const int n = topo.node_count(), m = topo.mot_count;
        NetsConfig cfg = probe_config(m);
        cfg.x_stack = GatStack{{5, 4}, 2, cfg.slope, false, 4, 0};
        cfg.mu_hidden = {6};
        ad::ParamStore actor;
        add_actor_params(actor, cfg);
        actor.glorot_init(rng);

        Eigen::VectorXd inv(n);
        for (int v = 0; v < n; ++v) inv[v] = rng.uniform(0.0, 2.0);
        ArrivalSchedule sched(0, n);

        for (int s = 0; s < steps_per_world; ++s, ++steps) {
            Eigen::VectorXd demand = Eigen::VectorXd::Zero(n);
            Eigen::VectorXd prod = Eigen::VectorXd::Zero(n);
            for (int v = 0; v < n; ++v) {
                if (topo.nodes[static_cast<size_t>(v)] == NodeKind::Production)
                    prod[v] = rng.uniform(0.0, 0.4);
                else
                    demand[v] = rng.uniform(0.0, 0.4);
            }
            NodeStateMatrix x = random_state(rng, n, cfg.feature_count);
            Eigen::VectorXd cap = supply_capability(topo, inv, demand);
            ActionTensor acts = policy_actions(topo, rev.topo, x, cap, actor, cfg);

            for (int l = 0; l < cfg.lambda_count(); ++l) {
                Eigen::VectorXd out_tot = outgoing_totals(topo, acts, l);
                for (int v = 0; v < n; ++v) {
                    worst_cap = std::max(worst_cap, out_tot[v] - cap[v]);
                    if (out_tot[v] > cap[v] + 1e-9) ++cap_viol;
                }
            }

            // snapshot total stock before this week's sends enter the pipe
            // (afterwards they would sit in inventory and in-transit at once)
            double before = inv.sum() + sched.pending_after(s - 1);
            const int slice = rng.uniform_int(0, cfg.lambda_count() - 1);
            for (int e = 0; e < topo.edge_count(); ++e)
                for (int mm = 0; mm < m; ++mm) {
                    double q = acts.at(mm, e, slice);
                    if (q > 0.0)
                        sched.add(s + rng.uniform_int(0, 2),
                                  topo.edges[static_cast<size_t>(e)].second, q);
                }
            Eigen::VectorXd outgoing = outgoing_totals(topo, acts, slice);
            StepOutcome out = step_network(topo, inv, sched.at(s), demand, prod, outgoing);
            double served = 0.0;
            for (int v = 0; v < n; ++v) served += demand[v] + out.oos[v];
            double after = inv.sum() + sched.pending_after(s);
            double gap = std::abs(after - before - (prod.sum() - served));
            worst_mass = std::max(worst_mass, gap);
            if (gap > 1e-9) ++mass_viol;
            if (inv.minCoeff() < 0.0) ++neg_inv;
        }
    }

    bool pass = cap_viol == 0 && mass_viol == 0 && neg_inv == 0;
    return {pass, std::to_string(steps) + " randomized steps: " + std::to_string(cap_viol) +
                      " capacity / " + std::to_string(mass_viol) +
                      " conservation violations, worst cap slack " + sci(worst_cap) +
                      ", worst mass gap " + sci(worst_mass) + " (tol 1e-09, " +
                      fix1(t.seconds()) + "s)"};
}

// ===========================================================================
// 4. attention rows are probability distributions; embeddings are
//    permutation-equivariant under node relabeling

CheckResult check_attention() {
    double worst_sum = 0.0, worst_equiv = 0.0;
    int distributions = 0;

    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(Rng::derive(3000 + static_cast<uint64_t>(trial), "acc-attn"));
        NetworkTopology topo = random_topology(rng, 5, 8, 2);
        ReversedTopology rev = reverse_topology(topo);
        const int n = topo.node_count(), m = topo.mot_count;
        NetsConfig cfg = probe_config(m);
        Eigen::MatrixXd feats(n, cfg.feature_count);
        for (int v = 0; v < n; ++v)
            for (int k = 0; k < cfg.feature_count; ++k) feats(v, k) = rng.normal(0.0, 1.0);
        Eigen::MatrixXd efeat(topo.edge_count(), m);
        for (int e = 0; e < topo.edge_count(); ++e)
            for (int mm = 0; mm < m; ++mm) efeat(e, mm) = rng.uniform(0.0, 0.6);

        std::vector<int> perm(static_cast<size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        std::vector<NodeKind> kinds2(static_cast<size_t>(n));
        for (int v = 0; v < n; ++v)
            kinds2[static_cast<size_t>(perm[static_cast<size_t>(v)])] =
                topo.nodes[static_cast<size_t>(v)];
        std::vector<std::pair<int, int>> edges2;
        for (auto [a, b] : topo.edges)
            edges2.emplace_back(perm[static_cast<size_t>(a)], perm[static_cast<size_t>(b)]);
        NetworkTopology topo2 = NetworkTopology::make(std::move(kinds2), std::move(edges2), m);
        ReversedTopology rev2 = reverse_topology(topo2);
        Eigen::MatrixXd feats2(n, cfg.feature_count);
        for (int v = 0; v < n; ++v)
            feats2.row(perm[static_cast<size_t>(v)]) = feats.row(v);

        for (int variant = 0; variant < 2; ++variant) {
            const GatStack& gs = variant == 0 ? cfg.x_stack : cfg.xa_stack;
            ad::ParamStore ps;
            add_gat_params(ps, "gf", gs);
            add_gat_params(ps, "gb", gs);
            ps.glorot_init(rng);

            auto run = [&](const NetworkTopology& tp, const NetworkTopology& rv,
                           const Eigen::MatrixXd& ft, ad::Tape& tape) {
                int st = tape.attach(ps, nullptr);
                std::vector<ad::Var> fv;
                for (int v = 0; v < n; ++v) fv.push_back(tape.input(Eigen::VectorXd(ft.row(v))));
                std::vector<ad::Var> ev;
                if (variant == 1)
                    for (int e = 0; e < tp.edge_count(); ++e)
                        ev.push_back(tape.input(Eigen::VectorXd(efeat.row(e))));
                return embed_bidirectional(tape, tp, rv, fv, variant == 1 ? &ev : nullptr, ps,
                                           st, "g", gs);
            };

            ad::Tape tape1, tape2;
            auto emb1 = run(topo, rev.topo, feats, tape1);
            auto emb2 = run(topo2, rev2.topo, feats2, tape2);

            for (const ad::Tape* tp : {&tape1, &tape2})
                for (const Eigen::VectorXd& alpha : tp->values_of(ad::Op::Softmax)) {
                    ++distributions;
                    worst_sum = std::max(worst_sum, std::abs(alpha.sum() - 1.0));
                    if (alpha.minCoeff() < 0.0) worst_sum = 1.0; // negative weight: hard fail
                }
            for (int v = 0; v < n; ++v) {
                Eigen::VectorXd a = tape1.value(emb1[static_cast<size_t>(v)]);
                Eigen::VectorXd b =
                    tape2.value(emb2[static_cast<size_t>(perm[static_cast<size_t>(v)])]);
                worst_equiv = std::max(worst_equiv, (a - b).cwiseAbs().maxCoeff());
            }
        }
    }

    bool pass = worst_sum <= 1e-12 && worst_equiv <= 1e-10;
    return {pass, std::to_string(distributions) + " attention distributions, worst |sum-1| " +
                      sci(worst_sum) + " (tol 1e-12); equivariance worst gap " +
                      sci(worst_equiv) + " over 10 relabelings (tol 1e-10)"};
}

// ===========================================================================
// 5 + 6. two-node chain with a steady logged policy: closed-form return for
// the critic, analytic shortfall deficit for the actor and the regularizer

struct ChainOracle {
    bool ran = false;
    double seconds = 0.0;
    double v_closed = 0.0, q_hat = 0.0;  // return: closed form vs critic
    double deficit = 0.0, a_hat = 0.0;   // shipment: analytic vs actor
    double residual = 0.0;               // regularizer offset residual
};

// Two-node chain, one transport mode, lead 1, single risk preference
// (c1=1, c2=5, f_ref=0.5). Both SKUs share the topology and are built by the
// forward stock recursion so the log is physically consistent.
//
//   "steady"   : constant demand = production = shipment (0.02), constant
//                inventories; every week repeats one orbit snapshot.
//   "explorer" : same orbit, but spike blocks: from the orbit state it ships
//                spike + trickle, drains back to the orbit over spike/demand
//                weeks, re-arms the trickle, and repeats with the next spike
//                size. Every spike therefore fires at exactly the steady
//                snapshot, giving the critic many action samples at the
//                probe state itself.
//
// With production equal to demand, stock plus in-transit is conserved, and
// the sum of the two final profile entries equals that total: the in-transit
// quantity counts toward the dc profile and has already left plant stock.
// Both SKUs share total 0.56, and the builder asserts every profile stays
// below f_ref, so every logged state has the same network reward
// r* = 2 - c2*(2*f_ref - 0.56) = -0.2: the logged return from any state is
// exactly r* / (1 - gamma), and shifting stock along the chain just trades
// shortfall at c2 for shortfall at c2. The value is flat in the action, the
// critic sees that flatness in its own training data, and the behavioral
// regularizer is the only force with a preferred point - its anchor is the
// analytic deficit max(f_ref - f, 0) = 0.2 at the probe state. Plant stock
// at the orbit equals that deficit, so the capability clamp also pins any
// residual upward drift of the actor at the same point.
struct ChainSpec {
    int weeks = 48;
    double demand = 0.02;          // dc demand = plant production, per week
    double i_plant = 0.3, i_dc = 0.34;
    std::vector<double> actions;   // shipment per week (index = week)
    double preweek_action = 0.0;   // shipment sent at week -1 (lead 1)
    bool keep_short = true;        // assert both profiles stay below f_ref
};

SkuData build_chain_sku(const std::string& id, const ChainSpec& spec) {
    const int horizon = 6;
    const double f_ref = 0.5;
    SkuData sku;
    sku.id = id;
    sku.price = 1.0;
    sku.mot_count = 1;
    sku.scaled = true; // quantities are already in model units
    sku.scaler = SkuScaler{1.0};

    SkuTopology st;
    st.topo = NetworkTopology::make({NodeKind::Production, NodeKind::Distribution}, {{0, 1}}, 1);
    ReversedTopology rt = reverse_topology(st.topo);
    st.reversed = rt.topo;
    st.edge_map = rt.edge_map;
    st.node_names = {"plant-0", "dc-0"};
    st.lead_dist = {{LeadTimeDist{{1}, {1.0}}}};
    sku.topologies.push_back(std::move(st));

    if (spec.preweek_action > 0.0) sku.shipments.add({-1, 0, 1, 0, spec.preweek_action, 1});
    double p = spec.i_plant, i = spec.i_dc;
    for (int w = 0; w < spec.weeks; ++w) {
        double a = spec.actions[static_cast<size_t>(w)];
        double arr = w == 0 ? spec.preweek_action : spec.actions[static_cast<size_t>(w - 1)];
        if (a > p + 1e-12) throw std::logic_error("chain sku: shipment exceeds plant stock");
        // both nodes must stay short of f_ref for the constant-reward identity
        if (spec.keep_short && p + 3 * spec.demand >= f_ref - 0.01)
            throw std::logic_error("chain sku: plant profile reached f_ref");
        if (spec.keep_short && i + arr - 3 * spec.demand >= f_ref - 0.01)
            throw std::logic_error("chain sku: dc profile reached f_ref");

        WeekRecord rec;
        rec.week = w;
        rec.topology = 0;
        rec.inventory = Eigen::Vector2d(p, i);
        rec.demand = Eigen::Vector2d(0.0, spec.demand);
        rec.production = Eigen::Vector2d(spec.demand, 0.0);
        rec.forecast = Eigen::MatrixXd::Zero(2, horizon);
        rec.forecast.row(1).setConstant(spec.demand);
        sku.weeks.push_back(std::move(rec));
        if (a > 0.0) sku.shipments.add({w, 0, 1, 0, a, 1});

        i = i + arr - spec.demand;
        p = p + spec.demand - a;
        if (i <= 0.02 || p <= 0.02) throw std::logic_error("chain sku: stock ran out");
    }
    sku.dos = Eigen::Vector2d::Zero();
    sku.forecast_sigma.assign(static_cast<size_t>(horizon), 0.0);
    sku.split = SplitRanges{0, spec.weeks - 1, spec.weeks, spec.weeks - 1,
                            spec.weeks, spec.weeks - 1};
    return sku;
}

Corpus chain_corpus() {
    const double d = 0.02;
    const double p0 = 0.20, i0 = 0.34;

    ChainSpec steady;
    steady.weeks = 100;
    steady.demand = d;
    steady.i_plant = p0;
    steady.i_dc = i0;
    steady.actions.assign(100, d);
    steady.preweek_action = d;

    ChainSpec explorer;
    explorer.demand = d;
    explorer.i_plant = p0;
    explorer.i_dc = i0;
    explorer.preweek_action = d;
    const double spikes[] = {0.16, 0.06, 0.12, 0.08, 0.16, 0.10,
                             0.14, 0.04, 0.16, 0.12, 0.08, 0.14,
                             0.06, 0.16, 0.10, 0.12};
    for (double s : spikes) {
        explorer.actions.push_back(s + d);       // spike fired at the orbit state
        int drain = static_cast<int>(std::lround(s / d));
        for (int w = 0; w < drain; ++w) explorer.actions.push_back(0.0);
        explorer.actions.push_back(d);           // re-arm the in-transit trickle
    }
    explorer.weeks = static_cast<int>(explorer.actions.size());

    Corpus corpus;
    corpus.seed = 0;
    corpus.config_echo = ojson::object();
    corpus.scaled = true;
    corpus.skus.push_back(build_chain_sku("chain-steady", steady));
    corpus.skus.push_back(build_chain_sku("chain-explorer", explorer));
    return corpus;
}

const ChainOracle& chain_oracle() {
    static ChainOracle oracle;
    if (oracle.ran) return oracle;
    Timer t;

    Corpus corpus = chain_corpus();
    const SkuData& sku = corpus.skus[0]; // the steady SKU carries the oracle state
    const SkuTopology& st = sku.topologies[0];
    const int k = 4;

    NetsConfig cfg;
    cfg.feature_count = k;
    cfg.mot_count = 1;
    cfg.gamma = 0.95;
    cfg.lambdas = {{1.0, 5.0, 0.5}};
    cfg.x_stack = GatStack{{8, 6}, 2, cfg.slope, false, k, 0};
    cfg.xa_stack = GatStack{{8, 6}, 2, cfg.slope, true, k, 1};
    cfg.mu_hidden = {16, 8};
    cfg.q_hidden = {16, 8};

    TransitionDataset train_set = build_transitions(corpus, Split::Train, k);
    ModelBundle bundle = ModelBundle::init(cfg, 4242);

    // Three-stage schedule. Critic-only warmup runs with a fast soft update
    // (convergence is paced by tau*(1-gamma) per iteration), then repeats at
    // a tenth of the learning rate: once the TD loss is near zero, Adam's
    // normalized steps make the weights random-walk at ~lr per step, and the
    // 1/(1-gamma) value head amplifies that noise into spurious action
    // slopes, so the polish stage shrinks the walk before the actor looks at
    // the critic. The coupled stage then drops tau to the benchmark default
    // (bootstrap targets stay pinned at the warmup fixed point) and keeps
    // the reduced learning rate.
    TrainerConfig tc;
    tc.epochs = 1000;
    tc.warmup_epochs = 1000;
    tc.batch_size = 8;
    tc.lr = 1e-3;
    tc.tau = 0.02;
    tc.eta = 1.0;
    tc.early_stopping = false;
    tc.seed = 77;
    train(corpus, train_set, nullptr, bundle, tc);
    tc.epochs = 300;
    tc.lr = 1e-4;
    tc.seed = 78;
    train(corpus, train_set, nullptr, bundle, tc);
    tc.epochs = 500;
    tc.warmup_epochs = 0;
    tc.lr = 2e-4;
    tc.tau = 5e-5;
    tc.seed = 79;
    train(corpus, train_set, nullptr, bundle, tc);

    NodeStateMatrix x0 = state_at(sku, 20, k);
    ActionTensor a0 = logged_actions(sku, 20);
    const RiskPreference& rp = cfg.lambdas[0];
    double r_star = network_reward(state_at(sku, 21, k), rp); // constant every week

    oracle.v_closed = r_star / (1.0 - cfg.gamma);
    oracle.q_hat = network_values(st.topo, st.reversed, x0, a0, 0, bundle.critic, cfg)[0];
    oracle.deficit = std::max(rp.f_ref - x0.profiles(1, k - 1), 0.0);
    Eigen::VectorXd cap = capability_at(sku, 20);
    oracle.a_hat =
        policy_actions(st.topo, st.reversed, x0, cap, bundle.actor, cfg).at(0, 0, 0);
    oracle.residual = oracle.a_hat + std::min(x0.profiles(1, k - 1) - rp.f_ref, 0.0);
    oracle.seconds = t.seconds();
    oracle.ran = true;
    return oracle;
}

CheckResult check_tiny_mdp() {
    const ChainOracle& o = chain_oracle();
    double rel = std::abs(o.q_hat - o.v_closed) / std::abs(o.v_closed);
    double adiff = std::abs(o.a_hat - o.deficit);
    bool pass = rel < 0.05 && adiff < 0.05 && o.seconds < 300.0;
    return {pass, "critic " + sci(o.q_hat) + " vs closed-form return " + sci(o.v_closed) +
                      " (rel err " + sci(rel) + ", tol 0.05); actor ships " + sci(o.a_hat) +
                      " vs deficit " + sci(o.deficit) + " (abs err " + sci(adiff) +
                      ", tol 0.05) (" + fix1(o.seconds) + "s)"};
}

CheckResult check_regularizer() {
    const ChainOracle& o = chain_oracle();
    bool pass = std::abs(o.residual) < 0.05;
    return {pass, "shortfall-offset residual |sum(a) + min(f - f_ref, 0)| = " +
                      sci(std::abs(o.residual)) + " at eta=1 (tol 0.05)"};
}

// ===========================================================================
// desk-scale pipeline shared by checks 7-9 (and generated fresh on a full
// run; --only invocations reuse whatever stages already completed)

struct DeskPipeline {
    fs::path root, data, train_dir, eval_dir, report_dir;
    std::map<std::string, double> seconds;
    std::vector<std::string> reused;
};

DeskPipeline* g_desk = nullptr;
fs::path g_work;

void save_times(const DeskPipeline& p) {
    ojson j;
    for (const auto& [k, v] : p.seconds) j[k] = v;
    write_text_file((p.root / "times.json").string(), j.dump(2) + "\n");
}

double load_time(const DeskPipeline& p, const std::string& stage) {
    fs::path f = p.root / "times.json";
    if (!fs::exists(f)) return 0.0;
    ojson j = read_json_file(f.string());
    return j.contains(stage) ? j[stage].get<double>() : 0.0;
}

const DeskPipeline& desk_pipeline() {
    static DeskPipeline pipe;
    if (g_desk) return *g_desk;
    pipe.root = g_work / "desk";
    pipe.data = pipe.root / "data";
    pipe.train_dir = pipe.root / "train";
    pipe.eval_dir = pipe.root / "eval";
    pipe.report_dir = pipe.root / "report";
    fs::create_directories(pipe.root);
    RunConfig cfg; // published defaults: 20 SKUs, 60 train weeks, J=13, K=4, Z=50

    auto stage = [&](const std::string& name, const fs::path& dir, const fs::path& probe,
                     auto&& fn) {
        if (fs::exists(probe)) {
            pipe.seconds[name] = load_time(pipe, name);
            pipe.reused.push_back(name);
            return;
        }
        fs::remove_all(dir);
        Timer t;
        fn();
        pipe.seconds[name] = t.seconds();
        save_times(pipe);
        std::cout << "  [desk] " << name << " finished in " << fix1(pipe.seconds[name])
                  << "s\n"
                  << std::flush;
    };

    stage("gen", pipe.data, pipe.data / "manifest.json",
          [&] { cmd_gen(cfg, pipe.data.string()); });
    stage("train", pipe.train_dir, pipe.train_dir / "model.ckpt",
          [&] { cmd_train(cfg, pipe.data.string(), pipe.train_dir.string()); });
    stage("evaluate", pipe.eval_dir, pipe.eval_dir / "evaluation.json", [&] {
        cmd_evaluate(cfg, pipe.data.string(), (pipe.train_dir / "model.ckpt").string(),
                     pipe.eval_dir.string());
    });
    stage("report", pipe.report_dir, pipe.report_dir / "summary.json", [&] {
        cmd_report(pipe.eval_dir.string(), pipe.report_dir.string());
    });

    g_desk = &pipe;
    return pipe;
}

// ===========================================================================
// 7. replay fidelity: logged actions fed through the evaluation rollout
//    reproduce the generator's inventories over the full corpus span

CheckResult check_replay() {
    const DeskPipeline& p = desk_pipeline();
    Corpus corpus = load_corpus(p.data.string()); // raw units
    double worst = 0.0;
    long cells = 0;
    Timer t;
    for (const SkuData& sku : corpus.skus) {
        const int k = 4;
        const int total = sku.last_week() - sku.first_week() + 1;
        RolloutConfig rc;
        rc.horizon = total - k + 2;
        rc.feature_count = k;
        rc.mc_runs = 1;
        rc.seed = 11;
        rc.record_inventory = true;
        SkuRollouts r = rollout_policy(sku, replay_policy(sku), logged_leads(sku),
                                       sku.first_week(), sku.first_week(), rc);
        const Eigen::MatrixXd& traj = r.inventory[0][0]; // (J+1) x |V|
        for (int i = 0; i < traj.rows() && sku.has_week(sku.first_week() + i); ++i) {
            const Eigen::VectorXd& logged = sku.at_week(sku.first_week() + i).inventory;
            worst = std::max(worst, (traj.row(i).transpose() - logged).cwiseAbs().maxCoeff());
            cells += logged.size();
        }
    }
    bool pass = worst <= 1e-6;
    return {pass, "replayed " + std::to_string(corpus.skus.size()) + " SKUs, " +
                      std::to_string(cells) + " inventory cells, worst abs gap " + sci(worst) +
                      " raw units (tol 1e-06, " + fix1(t.seconds()) + "s)"};
}

// ===========================================================================
// 8. desk-scale benchmark: trained policy beats logged history on total cost
//    and the rule baseline on final-step %OOS, for both cost ratios

CheckResult check_benchmark() {
    const DeskPipeline& p = desk_pipeline();
    ojson summary = read_json_file((p.report_dir / "summary.json").string());
    std::string detail;
    bool pass = true;
    for (const ojson& so : summary.at("objectives")) {
        const ojson& checks = so.at("checks");
        bool cost_ok = checks.at("trained_cost_below_history").is_boolean() &&
                       checks.at("trained_cost_below_history").get<bool>();
        bool oos_ok = checks.at("trained_final_oos_below_rule").is_boolean() &&
                      checks.at("trained_final_oos_below_rule").get<bool>();
        pass = pass && cost_ok && oos_ok;
        double ratio = so.at("c_oos").get<double>() / so.at("c_es").get<double>();
        detail += "ratio " + fix1(ratio) + ": cost trained " +
                  sci(so.at("totals").at("trained").at("cost").get<double>()) + " vs history " +
                  sci(so.at("totals").at("history").at("cost").get<double>()) +
                  (cost_ok ? " ok" : " VIOLATED") + ", final %OOS trained " +
                  fix1(so.at("oos_pct_final").at("trained").get<double>()) + " vs rule " +
                  fix1(so.at("oos_pct_final").at("rule").get<double>()) +
                  (oos_ok ? " ok" : " VIOLATED") + "; ";
    }
    double total = 0.0;
    for (const auto& [k, v] : p.seconds) total += v;
    pass = pass && total < 1800.0;
    detail += "pipeline " + fix1(total) + "s";
    if (!p.reused.empty()) {
        detail += " (reused:";
        for (const auto& s : p.reused) detail += " " + s;
        detail += ")";
    }
    detail += " (budget 1800s)";
    return {pass, detail};
}

// ===========================================================================
// 9. directional risk response (reported, never gates): the higher
//    shortage-cost objective should select an f_ref at least as high

CheckResult check_risk_direction() {
    const DeskPipeline& p = desk_pipeline();
    ojson ev = read_json_file((p.eval_dir / "evaluation.json").string());
    ojson summary = read_json_file((p.report_dir / "summary.json").string());

    // per-lambda validation AvgCost tables (always logged, per the criterion)
    const ojson& grid = ev.at("lambda_grid");
    std::cout << "  validation AvgCost per risk preference:\n";
    for (size_t o = 0; o < ev.at("objectives").size(); ++o) {
        const ojson& eo = ev.at("objectives").at(o);
        const ojson& vo = ev.at("validation").at("objectives").at(o);
        int star = vo.at("lambda_star").get<int>();
        std::cout << "    objective c_es=" << eo.at("c_es") << " c_oos=" << eo.at("c_oos")
                  << ":\n";
        const ojson& costs = vo.at("avg_final_cost");
        for (size_t l = 0; l < costs.size(); ++l) {
            const ojson& g = grid.at(l);
            std::printf("      lambda %2zu (c1=%4.1f c2=%4.1f f_ref=%.1f)  AvgCost %.6f%s\n",
                        l, g.at("c1").get<double>(), g.at("c2").get<double>(),
                        g.at("f_ref").get<double>(), costs.at(l).get<double>(),
                        static_cast<int>(l) == star ? "  <- selected" : "");
        }
    }
    std::cout << std::flush;

    const ojson& rr = summary.at("risk_response");
    bool ordered = rr.at("ordered").get<bool>();
    std::string detail = "selected f_ref by cost ratio:";
    for (const ojson& sel : rr.at("selections"))
        detail += " ratio " + fix1(sel.at("cost_ratio").get<double>()) + " -> f_ref " +
                  fix1(sel.at("f_ref").get<double>()) + ";";
    detail += ordered ? " nondecreasing" : " NOT nondecreasing (soft deviation, tables above)";
    return {ordered, detail};
}

// ===========================================================================
// 10. determinism: two tiny end-to-end runs produce byte-identical datasets,
//     checkpoints, and reports

CheckResult check_determinism() {
    Timer t;
    ojson doc = {{"seed", 7},
                 {"feature_count", 4},
                 {"horizon", 4},
                 {"mc_runs", 2},
                 {"gen", {{"sku_count", 2}, {"train_weeks", 16}, {"val_weeks", 6},
                          {"test_weeks", 8}}},
                 {"trainer", {{"epochs", 2}, {"warmup_epochs", 1}, {"early_stopping", false}}}};
    RunConfig cfg = RunConfig::from_json(doc);

    auto run = [&](const fs::path& dir) {
        fs::remove_all(dir);
        cmd_gen(cfg, (dir / "data").string());
        cmd_train(cfg, (dir / "data").string(), (dir / "train").string());
        cmd_evaluate(cfg, (dir / "data").string(), (dir / "train" / "model.ckpt").string(),
                     (dir / "eval").string());
        cmd_report((dir / "eval").string(), (dir / "report").string());
        std::map<std::string, std::string> hashes;
        for (const auto& entry : fs::recursive_directory_iterator(dir))
            if (entry.is_regular_file())
                hashes[fs::relative(entry.path(), dir).generic_string()] =
                    sha256_file(entry.path().string());
        return hashes;
    };

    auto h1 = run(g_work / "det" / "run1");
    auto h2 = run(g_work / "det" / "run2");
    int mismatched = 0;
    for (const auto& [rel, sha] : h1) {
        auto it = h2.find(rel);
        if (it == h2.end() || it->second != sha) ++mismatched;
    }
    bool pass = h1 == h2 && !h1.empty();
    return {pass, "two identical-seed runs: " + std::to_string(h1.size()) + " vs " +
                      std::to_string(h2.size()) + " files, " + std::to_string(mismatched) +
                      " hash mismatches (datasets, checkpoints, reports; " + fix1(t.seconds()) +
                      "s)"};
}

} // namespace

// ===========================================================================

int main(int argc, char** argv) {
    std::set<int> only;
    g_work = "acceptance_work";
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
        } else if (a == "--work" && i + 1 < argc) {
            g_work = argv[++i];
        } else {
            std::cerr << "usage: splan_acceptance [--only 1,2,...] [--work DIR]\n";
            return 64;
        }
    }
    if (only.empty()) fs::remove_all(g_work); // full runs start clean
    fs::create_directories(g_work);

    struct Entry {
        int id;
        bool gated;
        const char* name;
        CheckResult (*fn)();
    };
    const Entry entries[] = {
        {1, true, "gradient correctness", check_gradients},
        {2, true, "reward exactness", check_reward},
        {3, true, "capacity and conservation", check_conservation},
        {4, true, "attention normalization and equivariance", check_attention},
        {5, true, "tiny-MDP oracle", check_tiny_mdp},
        {6, true, "behavioral-regularizer efficacy", check_regularizer},
        {7, true, "replay fidelity", check_replay},
        {8, true, "desk-scale benchmark", check_benchmark},
        {9, false, "directional risk response", check_risk_direction},
        {10, true, "determinism", check_determinism},
    };

    int failures = 0;
    for (const Entry& e : entries) {
        if (!only.empty() && !only.count(e.id)) continue;
        CheckResult r;
        try {
            r = e.fn();
        } catch (const std::exception& ex) {
            r = {false, std::string("exception: ") + ex.what()};
        }
        if (!r.pass && e.gated) ++failures;
        std::printf("criterion %2d [%s]%s %s: %s\n", e.id, r.pass ? "PASS" : "FAIL",
                    e.gated ? "" : " (soft, not gated)", e.name, r.detail.c_str());
        std::fflush(stdout);
    }
    if (only.empty() || only.size() > 1)
        std::printf("acceptance: %d gated failure(s)\n", failures);
    return failures;
}
