#include "splan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <stdexcept>

namespace splan {

namespace {

constexpr double kPi = std::numbers::pi;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// uniformly random probability weights over a support (bounded away from zero
// so every value stays drawable)
std::vector<double> random_probs(size_t count, Rng& rng) {
    std::vector<double> p(count);
    double total = 0.0;
    for (double& v : p) {
        v = rng.uniform(0.2, 1.0);
        total += v;
    }
    for (double& v : p) v /= total;
    return p;
}

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

} // namespace

void GenConfig::validate() const {
    if (sku_count < 1) throw std::invalid_argument("gen: sku_count must be >= 1");
    if (train_weeks < 1 || val_weeks < 1 || test_weeks < 1)
        throw std::invalid_argument("gen: every split needs at least one week");
    if (forecast_horizon < 2) throw std::invalid_argument("gen: forecast_horizon must be >= 2");
    if (node_min < 2 || node_max < node_min)
        throw std::invalid_argument("gen: node count range must satisfy 2 <= min <= max");
    if (node_median <= 0.0 || node_log_sigma < 0.0)
        throw std::invalid_argument("gen: bad node count distribution");
    if (edges_per_dc <= 0.0 || edge_max < 1)
        throw std::invalid_argument("gen: bad edge density");
    if (truckload_share < 0.0 || truckload_share > 1.0)
        throw std::invalid_argument("gen: truckload_share must be in [0, 1]");
    for (const auto& leads : {truckload_leads, intermodal_leads}) {
        if (leads.empty()) throw std::invalid_argument("gen: empty lead-time support");
        for (int l : leads)
            if (l < 0) throw std::invalid_argument("gen: negative lead time");
    }
    if (demand_median <= 0.0)
        throw std::invalid_argument("gen: demand_median must be positive");
    if (demand_log_sigma < 0.0 || demand_noise < 0.0 || production_noise < 0.0)
        throw std::invalid_argument("gen: dispersions must be >= 0");
    if (season_amp_lo < 0.0 || season_amp_hi < season_amp_lo || season_amp_hi >= 1.0)
        throw std::invalid_argument("gen: seasonal amplitude must satisfy 0 <= lo <= hi < 1");
    if (season_period <= 0.0) throw std::invalid_argument("gen: season_period must be positive");
    if (behavior_jitter < 0.0) throw std::invalid_argument("gen: behavior_jitter must be >= 0");
    if (drop_prob < 0.0 || double_prob < 0.0 || drop_prob + double_prob > 1.0)
        throw std::invalid_argument("gen: drop/double probabilities must be >= 0, sum <= 1");
    if (dos_lo < 0.0 || dos_hi < dos_lo)
        throw std::invalid_argument("gen: dos range must satisfy 0 <= lo <= hi");
    if (price_lo <= 0.0 || price_hi < price_lo)
        throw std::invalid_argument("gen: price range must satisfy 0 < lo <= hi");
    if (wmape_lo < 0.0 || wmape_hi < wmape_lo || wmape_hi >= 2.0)
        throw std::invalid_argument("gen: wmape levels must satisfy 0 <= lo <= hi < 2");
    if (wmape_ramp < 1) throw std::invalid_argument("gen: wmape_ramp must be >= 1");
}

nlohmann::ordered_json GenConfig::to_json() const {
    nlohmann::ordered_json j;
    j["sku_count"] = sku_count;
    j["train_weeks"] = train_weeks;
    j["val_weeks"] = val_weeks;
    j["test_weeks"] = test_weeks;
    j["forecast_horizon"] = forecast_horizon;
    j["node_median"] = node_median;
    j["node_log_sigma"] = node_log_sigma;
    j["node_min"] = node_min;
    j["node_max"] = node_max;
    j["edges_per_dc"] = edges_per_dc;
    j["edge_max"] = edge_max;
    j["truckload_share"] = truckload_share;
    j["truckload_leads"] = truckload_leads;
    j["intermodal_leads"] = intermodal_leads;
    j["demand_median"] = demand_median;
    j["demand_log_sigma"] = demand_log_sigma;
    j["season_amp_lo"] = season_amp_lo;
    j["season_amp_hi"] = season_amp_hi;
    j["season_period"] = season_period;
    j["demand_noise"] = demand_noise;
    j["production_noise"] = production_noise;
    j["behavior_jitter"] = behavior_jitter;
    j["drop_prob"] = drop_prob;
    j["double_prob"] = double_prob;
    j["dos_lo"] = dos_lo;
    j["dos_hi"] = dos_hi;
    j["price_lo"] = price_lo;
    j["price_hi"] = price_hi;
    j["wmape_lo"] = wmape_lo;
    j["wmape_hi"] = wmape_hi;
    j["wmape_ramp"] = wmape_ramp;
    j["seed"] = seed;
    return j;
}

GenConfig GenConfig::from_json(const nlohmann::ordered_json& j) {
    GenConfig c;
    c.sku_count = j.value("sku_count", c.sku_count);
    c.train_weeks = j.value("train_weeks", c.train_weeks);
    c.val_weeks = j.value("val_weeks", c.val_weeks);
    c.test_weeks = j.value("test_weeks", c.test_weeks);
    c.forecast_horizon = j.value("forecast_horizon", c.forecast_horizon);
    c.node_median = j.value("node_median", c.node_median);
    c.node_log_sigma = j.value("node_log_sigma", c.node_log_sigma);
    c.node_min = j.value("node_min", c.node_min);
    c.node_max = j.value("node_max", c.node_max);
    c.edges_per_dc = j.value("edges_per_dc", c.edges_per_dc);
    c.edge_max = j.value("edge_max", c.edge_max);
    c.truckload_share = j.value("truckload_share", c.truckload_share);
    c.truckload_leads = j.value("truckload_leads", c.truckload_leads);
    c.intermodal_leads = j.value("intermodal_leads", c.intermodal_leads);
    c.demand_median = j.value("demand_median", c.demand_median);
    c.demand_log_sigma = j.value("demand_log_sigma", c.demand_log_sigma);
    c.season_amp_lo = j.value("season_amp_lo", c.season_amp_lo);
    c.season_amp_hi = j.value("season_amp_hi", c.season_amp_hi);
    c.season_period = j.value("season_period", c.season_period);
    c.demand_noise = j.value("demand_noise", c.demand_noise);
    c.production_noise = j.value("production_noise", c.production_noise);
    c.behavior_jitter = j.value("behavior_jitter", c.behavior_jitter);
    c.drop_prob = j.value("drop_prob", c.drop_prob);
    c.double_prob = j.value("double_prob", c.double_prob);
    c.dos_lo = j.value("dos_lo", c.dos_lo);
    c.dos_hi = j.value("dos_hi", c.dos_hi);
    c.price_lo = j.value("price_lo", c.price_lo);
    c.price_hi = j.value("price_hi", c.price_hi);
    c.wmape_lo = j.value("wmape_lo", c.wmape_lo);
    c.wmape_hi = j.value("wmape_hi", c.wmape_hi);
    c.wmape_ramp = j.value("wmape_ramp", c.wmape_ramp);
    c.seed = j.value("seed", c.seed);
    return c;
}

double wmape_sigma(double wmape) {
    if (wmape < 0.0 || wmape >= 2.0)
        throw std::invalid_argument("wmape_sigma: level must be in [0, 2)");
    if (wmape == 0.0) return 0.0;
    // E|X - 1| = 4*Phi(sigma/2) - 2 for X = exp(sigma Z - sigma^2/2)
    double target = (wmape + 2.0) / 4.0;
    double lo = 0.0, hi = 16.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < target ? lo : hi) = mid;
    }
    return 2.0 * 0.5 * (lo + hi);
}

std::vector<double> wmape_targets(const GenConfig& cfg) {
    std::vector<double> t(static_cast<size_t>(cfg.forecast_horizon));
    for (int h = 0; h < cfg.forecast_horizon; ++h) {
        double frac = static_cast<double>(std::min(h, cfg.wmape_ramp)) / cfg.wmape_ramp;
        t[static_cast<size_t>(h)] = cfg.wmape_lo + (cfg.wmape_hi - cfg.wmape_lo) * frac;
    }
    return t;
}

std::vector<SkuWorld> gen_world(const GenConfig& cfg) {
    cfg.validate();
    std::vector<SkuWorld> worlds;
    worlds.reserve(static_cast<size_t>(cfg.sku_count));
    const int width = cfg.total_weeks() + cfg.forecast_horizon - 1;

    for (int s = 0; s < cfg.sku_count; ++s) {
        Rng rng = Rng::derive(cfg.seed, "world-" + std::to_string(s));

        int n = static_cast<int>(
            std::lround(rng.lognormal(std::log(cfg.node_median), cfg.node_log_sigma)));
        n = std::clamp(n, cfg.node_min, cfg.node_max);
        int plants = 1 + (n >= 8 ? 1 : 0) + (n >= 16 ? 1 : 0);
        if (plants >= n) plants = n - 1;
        const int dcs = n - plants;
        const int tier1 = (dcs + 2) / 3; // regional DCs; the rest are stores
        const int t1_begin = plants, t1_end = plants + tier1;

        // mandatory edges make every DC reachable from a plant
        std::set<std::pair<int, int>> chosen;
        for (int v = t1_begin; v < t1_end; ++v)
            chosen.insert({rng.uniform_int(0, plants - 1), v});
        for (int v = t1_end; v < n; ++v)
            chosen.insert({rng.uniform_int(t1_begin, t1_end - 1), v});

        // optional extras keep the graph acyclic: plants feed any DC, tier 1
        // feeds tier 2, and same-tier links only run low index -> high index
        std::vector<std::pair<int, int>> pool;
        for (int p = 0; p < plants; ++p)
            for (int v = plants; v < n; ++v)
                if (!chosen.count({p, v})) pool.emplace_back(p, v);
        for (int a = t1_begin; a < t1_end; ++a)
            for (int b = t1_end; b < n; ++b)
                if (!chosen.count({a, b})) pool.emplace_back(a, b);
        for (int a = t1_begin; a < t1_end; ++a)
            for (int b = a + 1; b < t1_end; ++b)
                if (!chosen.count({a, b})) pool.emplace_back(a, b);
        for (int a = t1_end; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if (!chosen.count({a, b})) pool.emplace_back(a, b);
        shuffle_vec(pool, rng);

        int target = static_cast<int>(std::lround(cfg.edges_per_dc * dcs + rng.normal(0.0, 1.5)));
        target = std::clamp(target, static_cast<int>(chosen.size()),
                            std::min(cfg.edge_max,
                                     static_cast<int>(chosen.size() + pool.size())));
        for (const auto& e : pool) {
            if (static_cast<int>(chosen.size()) >= target) break;
            chosen.insert(e);
        }

        std::vector<NodeKind> kinds(static_cast<size_t>(n), NodeKind::Distribution);
        for (int p = 0; p < plants; ++p) kinds[static_cast<size_t>(p)] = NodeKind::Production;
        std::vector<std::pair<int, int>> edges(chosen.begin(), chosen.end()); // sorted

        SkuWorld w;
        w.st.topo = NetworkTopology::make(kinds, edges, 2);
        auto rev = reverse_topology(w.st.topo);
        w.st.reversed = rev.topo;
        w.st.edge_map = rev.edge_map;
        for (int v = 0; v < n; ++v)
            w.st.node_names.push_back(
                (v < plants ? "plant-" : "dc-") +
                std::to_string(v < plants ? v : v - plants));
        w.st.lead_dist.resize(edges.size());
        for (size_t e = 0; e < edges.size(); ++e) {
            w.st.lead_dist[e].push_back(
                LeadTimeDist{cfg.truckload_leads, random_probs(cfg.truckload_leads.size(), rng)});
            w.st.lead_dist[e].push_back(LeadTimeDist{
                cfg.intermodal_leads, random_probs(cfg.intermodal_leads.size(), rng)});
        }

        // seasonal-plus-noise demand per DC; plants track the mean total
        Eigen::VectorXd base = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd amp = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd phase = Eigen::VectorXd::Zero(n);
        for (int v = plants; v < n; ++v) {
            base[v] = rng.lognormal(std::log(cfg.demand_median), cfg.demand_log_sigma);
            amp[v] = rng.uniform(cfg.season_amp_lo, cfg.season_amp_hi);
            phase[v] = rng.uniform(0.0, 2.0 * kPi);
        }
        w.demand = Eigen::MatrixXd::Zero(n, width);
        for (int v = plants; v < n; ++v)
            for (int t = 0; t < width; ++t) {
                double level =
                    base[v] * (1.0 + amp[v] * std::sin(2.0 * kPi * t / cfg.season_period +
                                                       phase[v]));
                double dn = cfg.demand_noise;
                w.demand(v, t) = level * rng.lognormal(-0.5 * dn * dn, dn);
            }
        w.production = Eigen::MatrixXd::Zero(n, width);
        for (int t = 0; t < width; ++t) {
            double expected = 0.0;
            for (int v = plants; v < n; ++v)
                expected += base[v] * (1.0 + amp[v] * std::sin(2.0 * kPi * t /
                                                                   cfg.season_period +
                                                               phase[v]));
            for (int p = 0; p < plants; ++p) {
                double pn = cfg.production_noise;
                w.production(p, t) =
                    expected / plants * rng.lognormal(-0.5 * pn * pn, pn);
            }
        }

        w.dos = Eigen::VectorXd::Zero(n);
        w.init_inventory = Eigen::VectorXd::Zero(n);
        for (int v = plants; v < n; ++v) {
            w.dos[v] = rng.uniform(cfg.dos_lo, cfg.dos_hi);
            w.init_inventory[v] = w.dos[v] * base[v];
        }
        for (int p = 0; p < plants; ++p) w.init_inventory[p] = w.production(p, 0);
        w.price = rng.uniform(cfg.price_lo, cfg.price_hi);
        worlds.push_back(std::move(w));
    }
    return worlds;
}

Eigen::MatrixXd forecast_at(const SkuWorld& world, int week, int horizon,
                            const std::vector<double>& sigma, Rng& rng) {
    const int n = world.st.topo.node_count();
    if (week + horizon > world.demand.cols())
        throw std::invalid_argument("forecast_at: truth does not cover the horizon");
    if (static_cast<int>(sigma.size()) < horizon)
        throw std::invalid_argument("forecast_at: dispersion vector too short");
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, horizon);
    for (int v = 0; v < n; ++v) {
        if (world.st.topo.nodes[static_cast<size_t>(v)] == NodeKind::Production) continue;
        for (int h = 0; h < horizon; ++h) {
            double sg = sigma[static_cast<size_t>(h)];
            f(v, h) = world.demand(v, week + h) * rng.lognormal(-0.5 * sg * sg, sg);
        }
    }
    return f;
}

SkuData gen_history(const SkuWorld& world, const GenConfig& cfg, int sku_index) {
    const auto& st = world.st;
    const int n = st.topo.node_count();
    const int total = cfg.total_weeks();
    const bool pure_rule =
        cfg.behavior_jitter == 0.0 && cfg.drop_prob == 0.0 && cfg.double_prob == 0.0;
    Rng rng = Rng::derive(cfg.seed, "history-" + std::to_string(sku_index));

    std::vector<double> sigmas;
    for (double m : wmape_targets(cfg)) sigmas.push_back(wmape_sigma(m));

    // bootstrap rule context: uniform parent shares, MOT chosen per shipment
    RuleContext ctx;
    ctx.parent_edges.resize(static_cast<size_t>(n));
    ctx.parent_probs.resize(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) {
        const auto& in = st.topo.in_edges[static_cast<size_t>(v)];
        ctx.parent_edges[static_cast<size_t>(v)].assign(in.begin(), in.end());
        if (!in.empty())
            ctx.parent_probs[static_cast<size_t>(v)].assign(in.size(),
                                                            1.0 / static_cast<double>(in.size()));
    }
    ctx.dominant_mot.assign(static_cast<size_t>(st.topo.edge_count()), 0);

    SkuData sku;
    char id[16];
    std::snprintf(id, sizeof(id), "sku-%03d", sku_index);
    sku.id = id;
    sku.price = world.price;
    sku.mot_count = 2;
    sku.scaled = false;
    sku.topologies.push_back(st);
    sku.dos = world.dos;
    sku.forecast_sigma = sigmas;
    sku.split = {0, cfg.train_weeks - 1, cfg.train_weeks,
                 cfg.train_weeks + cfg.val_weeks - 1, cfg.train_weeks + cfg.val_weeks,
                 total - 1};

    Eigen::VectorXd inventory = world.init_inventory;
    ArrivalSchedule sched(0, n);
    for (int w = 0; w < total; ++w) {
        WeekRecord rec;
        rec.week = w;
        rec.topology = 0;
        rec.inventory = inventory;
        rec.demand = world.demand.col(w);
        rec.production = world.production.col(w);
        rec.forecast = forecast_at(world, w, cfg.forecast_horizon, sigmas, rng);

        // behavioral action: the rule as seen through predicted demand ...
        Eigen::VectorXd cap_pred = supply_capability(st.topo, inventory, rec.forecast.col(0));
        ActionTensor acts =
            rule_based_step(st, inventory, rec.forecast, sku.dos, ctx, cap_pred, rng).actions;

        // ... roughened by MOT sampling, jitter, and dropped/doubled shipments
        if (!pure_rule) {
            for (int e = 0; e < st.topo.edge_count(); ++e) {
                double q = acts.at(0, e, 0);
                if (q <= 0.0) continue;
                int mot = rng.uniform() < cfg.truckload_share ? 0 : 1;
                double jit = cfg.behavior_jitter;
                q *= rng.lognormal(-0.5 * jit * jit, jit);
                double u = rng.uniform();
                if (u < cfg.drop_prob)
                    q = 0.0;
                else if (u < cfg.drop_prob + cfg.double_prob)
                    q *= 2.0;
                acts.at(0, e, 0) = 0.0;
                acts.at(mot, e, 0) = q;
            }
        }

        // never ship beyond what actual demand leaves available
        Eigen::VectorXd cap_true = supply_capability(st.topo, inventory, rec.demand);
        Eigen::VectorXd totals = outgoing_totals(st.topo, acts, 0);
        for (int v = 0; v < n; ++v) {
            if (totals[v] <= cap_true[v]) continue;
            double scale = cap_true[v] > 0.0 ? cap_true[v] / totals[v] : 0.0;
            for (int e : st.topo.out_edges[static_cast<size_t>(v)])
                for (int m = 0; m < 2; ++m) acts.at(m, e, 0) *= scale;
        }

        for (int e = 0; e < st.topo.edge_count(); ++e)
            for (int m = 0; m < 2; ++m) {
                double q = acts.at(m, e, 0);
                if (q <= 0.0) continue;
                const auto& dist = st.lead_dist[static_cast<size_t>(e)][static_cast<size_t>(m)];
                int lead = dist.values[rng.categorical(dist.probs)];
                auto [src, dst] = st.topo.edges[static_cast<size_t>(e)];
                sku.shipments.add({w, src, dst, m, q, lead});
                sched.add(w + lead, dst, q);
            }
        step_network(st.topo, inventory, sched.at(w), rec.demand, rec.production,
                     outgoing_totals(st.topo, acts, 0));
        sku.weeks.push_back(std::move(rec));
    }
    return sku;
}

Corpus gen_corpus(const GenConfig& cfg) {
    cfg.validate();
    Corpus corpus;
    corpus.format_version = 1;
    corpus.seed = cfg.seed;
    corpus.config_echo = cfg.to_json();
    corpus.scaled = false;
    auto worlds = gen_world(cfg);
    for (int s = 0; s < cfg.sku_count; ++s)
        corpus.skus.push_back(gen_history(worlds[static_cast<size_t>(s)], cfg, s));
    return corpus;
}

} // namespace splan
