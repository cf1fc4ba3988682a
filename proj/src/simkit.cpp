#include "splan/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace splan {

namespace {

constexpr double kStockSlack = 1e-9; // float tolerance on the no-overdraw check

bool is_production(const NetworkTopology& topo, int v) {
    return topo.nodes[static_cast<size_t>(v)] == NodeKind::Production;
}

std::string draw_tag(const char* kind, const std::string& sku_id, int week, int z) {
    return std::string(kind) + "|" + sku_id + "|w" + std::to_string(week) + "|z" +
           std::to_string(z);
}

} // namespace

void CostObjective::validate() const {
    if (c_es < 0.0 || c_oos < 0.0 || price < 0.0)
        throw std::invalid_argument("cost objective: parameters must be >= 0");
}

double total_cost(double es, double oos, const CostObjective& obj) {
    return obj.price * (obj.c_es * std::abs(es) + obj.c_oos * std::abs(oos));
}

void RolloutConfig::validate() const {
    if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
    if (feature_count < 2) throw std::invalid_argument("rollout: feature_count must be >= 2");
    if (mc_runs < 1) throw std::invalid_argument("rollout: mc_runs must be >= 1");
    if (production_sigma < 0.0)
        throw std::invalid_argument("rollout: production_sigma must be >= 0");
}

// ---------------------------------------------------------------------------
// ArrivalSchedule

ArrivalSchedule::ArrivalSchedule(int base_week, int node_count)
    : base_(base_week), zero_(Eigen::VectorXd::Zero(node_count)) {}

void ArrivalSchedule::add(int week, int node, double quantity) {
    if (week < base_) throw std::invalid_argument("arrival schedule: week before base");
    size_t idx = static_cast<size_t>(week - base_);
    while (by_week_.size() <= idx) by_week_.push_back(zero_);
    by_week_[idx][node] += quantity;
}

const Eigen::VectorXd& ArrivalSchedule::at(int week) const {
    if (week < base_) return zero_;
    size_t idx = static_cast<size_t>(week - base_);
    return idx < by_week_.size() ? by_week_[idx] : zero_;
}

double ArrivalSchedule::pending_after(int week) const {
    double total = 0.0;
    for (size_t i = 0; i < by_week_.size(); ++i)
        if (base_ + static_cast<int>(i) > week) total += by_week_[i].sum();
    return total;
}

ArrivalSchedule inflight_schedule(const SkuData& sku, int week) {
    const auto& st = sku.topology_at(week);
    ArrivalSchedule sched(week, st.topo.node_count());
    for (const auto& rec : sku.shipments.records) {
        if (rec.send_time < week && rec.send_time + rec.lead >= week)
            sched.add(rec.send_time + rec.lead, rec.destination, rec.quantity);
    }
    return sched;
}

// ---------------------------------------------------------------------------
// Stepper

StepOutcome step_network(const NetworkTopology& topo, Eigen::VectorXd& inventory,
                         const Eigen::VectorXd& arrivals, const Eigen::VectorXd& demand,
                         const Eigen::VectorXd& production, const Eigen::VectorXd& outgoing) {
    const int n = topo.node_count();
    if (inventory.size() != n || arrivals.size() != n || demand.size() != n ||
        production.size() != n || outgoing.size() != n)
        throw std::invalid_argument("step_network: vector size mismatch");

    StepOutcome out;
    out.oos = Eigen::VectorXd::Zero(n);
    out.es = Eigen::VectorXd::Zero(n);
    for (int v = 0; v < n; ++v) {
        double stock;
        if (is_production(topo, v)) {
            stock = inventory[v] + arrivals[v] + production[v];
        } else {
            double avail = inventory[v] + arrivals[v] - demand[v];
            out.oos[v] = std::min(avail, 0.0); // unmet demand is lost, not backordered
            stock = std::max(avail, 0.0);
        }
        double next = stock - outgoing[v];
        if (next < -kStockSlack)
            throw std::runtime_error("step_network: outgoing exceeds available stock at node " +
                                     std::to_string(v));
        inventory[v] = std::max(next, 0.0);
        if (!is_production(topo, v)) out.es[v] = inventory[v];
    }
    return out;
}

Eigen::VectorXd outgoing_totals(const NetworkTopology& topo, const ActionTensor& actions,
                                int slice) {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(topo.node_count());
    for (int e = 0; e < topo.edge_count(); ++e)
        for (int m = 0; m < actions.mot_count; ++m)
            total[topo.edges[static_cast<size_t>(e)].first] += actions.at(m, e, slice);
    return total;
}

NodeStateMatrix sim_features(const NetworkTopology& topo, const Eigen::VectorXd& inventory,
                             const ArrivalSchedule& sched, int week, int feature_count,
                             const QuantityView& demand, const QuantityView& production) {
    NodeStateMatrix x;
    x.profiles.resize(topo.node_count(), feature_count);
    for (int v = 0; v < topo.node_count(); ++v) {
        double f = inventory[v];
        x.profiles(v, 0) = f;
        for (int k = 1; k < feature_count; ++k) {
            int w = week + k - 1;
            double delta = sched.at(w)[v];
            if (is_production(topo, v))
                delta += production(v, w);
            else
                delta -= demand(v, w);
            f += delta;
            x.profiles(v, k) = f;
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Scenario sampling

ScenarioSample sample_scenario(const SkuData& sku, int start_week, const RolloutConfig& rc,
                               Rng& rng) {
    const auto& st = sku.topology_at(start_week);
    const int n = st.topo.node_count();
    const int width = rc.horizon + rc.feature_count - 2;
    const auto& base = sku.at_week(start_week);
    if (base.forecast.cols() < width)
        throw std::invalid_argument("scenario: stored forecast horizon too short");
    if (static_cast<int>(sku.forecast_sigma.size()) < width)
        throw std::invalid_argument("scenario: forecast_sigma too short");
    if (!sku.has_week(start_week + width - 1))
        throw std::invalid_argument("scenario: production plan does not cover the horizon");

    ScenarioSample s;
    s.start_week = start_week;
    s.demand = Eigen::MatrixXd::Zero(n, width);
    s.production = Eigen::MatrixXd::Zero(n, width);

    // draw order is pinned: demand (node-major), production, then leads
    for (int v = 0; v < n; ++v) {
        if (is_production(st.topo, v)) continue;
        for (int h = 0; h < width; ++h) {
            double sigma = sku.forecast_sigma[static_cast<size_t>(h)];
            double noise = rng.lognormal(-0.5 * sigma * sigma, sigma); // unbiased multiplier
            s.demand(v, h) = base.forecast(v, h) * noise;
        }
    }
    for (int v = 0; v < n; ++v) {
        if (!is_production(st.topo, v)) continue;
        for (int h = 0; h < width; ++h) {
            double planned = sku.at_week(start_week + h).production[v];
            if (rc.sample_production) {
                double sg = rc.production_sigma;
                planned *= rng.lognormal(-0.5 * sg * sg, sg);
            }
            s.production(v, h) = planned;
        }
    }
    s.leads.reserve(static_cast<size_t>(rc.horizon));
    for (int step = 0; step < rc.horizon; ++step) {
        Eigen::MatrixXi lead(st.topo.edge_count(), st.topo.mot_count);
        for (int e = 0; e < st.topo.edge_count(); ++e)
            for (int m = 0; m < st.topo.mot_count; ++m) {
                const auto& dist = st.lead_dist[static_cast<size_t>(e)][static_cast<size_t>(m)];
                lead(e, m) = dist.values[rng.categorical(dist.probs)];
            }
        s.leads.push_back(std::move(lead));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Planning

PlanResult plan(const SkuData& sku, int week, const ModelBundle& bundle,
                const CostObjective& obj, const RolloutConfig& rc) {
    rc.validate();
    obj.validate();
    if (rc.feature_count != bundle.cfg.feature_count)
        throw std::invalid_argument("plan: feature_count does not match the trained model");
    if (!sku.scaled) throw std::invalid_argument("plan: SKU must be scaled for the model");

    const auto& st = sku.topology_at(week);
    const int J = rc.horizon, Z = rc.mc_runs;
    const int lambdas = bundle.cfg.lambda_count();
    const int rows = st.topo.edge_count() * st.topo.mot_count;

    PlanResult result;
    result.plan.assign(static_cast<size_t>(lambdas), Eigen::MatrixXd::Zero(rows, J));
    result.avg_cost = Eigen::VectorXd::Zero(lambdas);

    const ArrivalSchedule inflight = inflight_schedule(sku, week);
    const Eigen::VectorXd start_inventory = sku.at_week(week).inventory;

    for (int z = 0; z < Z; ++z) {
        Rng zr = Rng::derive(rc.seed, draw_tag("plan", sku.id, week, z));
        const ScenarioSample scen = sample_scenario(sku, week, rc, zr);
        // common random numbers: every risk preference sees this same draw
        auto demand_view = [&](int v, int w) { return scen.demand(v, w - week); };
        auto production_view = [&](int v, int w) { return scen.production(v, w - week); };

        for (int l = 0; l < lambdas; ++l) {
            Eigen::VectorXd inventory = start_inventory;
            ArrivalSchedule sched = inflight;
            double cost_acc = 0.0;
            for (int j = week; j < week + J; ++j) {
                const int step = j - week;
                NodeStateMatrix x = sim_features(st.topo, inventory, sched, j,
                                                 rc.feature_count, demand_view, production_view);
                Eigen::VectorXd cap =
                    supply_capability(st.topo, inventory, scen.demand.col(step));
                ActionTensor actions = policy_actions(st.topo, st.reversed, x, cap,
                                                      bundle.actor, bundle.cfg);
                for (int e = 0; e < st.topo.edge_count(); ++e)
                    for (int m = 0; m < st.topo.mot_count; ++m) {
                        double q = actions.at(m, e, l);
                        result.plan[static_cast<size_t>(l)](e * st.topo.mot_count + m, step) +=
                            q;
                        if (q > 0.0)
                            sched.add(j + scen.leads[static_cast<size_t>(step)](e, m),
                                      st.topo.edges[static_cast<size_t>(e)].second, q);
                    }
                StepOutcome out = step_network(st.topo, inventory, sched.at(j),
                                               scen.demand.col(step), scen.production.col(step),
                                               outgoing_totals(st.topo, actions, l));
                for (int v = 0; v < st.topo.node_count(); ++v)
                    if (!is_production(st.topo, v))
                        cost_acc += total_cost(out.es[v], out.oos[v], obj);
            }
            result.avg_cost[l] += cost_acc / J;
        }
    }
    for (auto& p : result.plan) p /= static_cast<double>(Z);
    result.avg_cost /= static_cast<double>(Z);
    result.lambda_star = select_policy(result.avg_cost);
    return result;
}

int select_policy(const Eigen::VectorXd& avg_costs) {
    if (avg_costs.size() == 0) throw std::invalid_argument("select_policy: empty cost vector");
    int best = 0;
    for (int l = 1; l < avg_costs.size(); ++l)
        if (avg_costs[l] < avg_costs[best]) best = l;
    return best;
}

// ---------------------------------------------------------------------------
// Policies and lead samplers

StepPolicy actor_policy(const ModelBundle& bundle, int lambda) {
    if (lambda < 0 || lambda >= bundle.cfg.lambda_count())
        throw std::invalid_argument("actor_policy: risk-preference index out of range");
    return [&bundle, lambda](const SkuTopology& st, const NodeStateMatrix& x,
                             const Eigen::VectorXd& cap, int, Rng&) {
        ActionTensor all = policy_actions(st.topo, st.reversed, x, cap, bundle.actor, bundle.cfg);
        ActionTensor one = ActionTensor::zeros(all.mot_count, all.edge_count, 1);
        one.values.col(0) = all.values.col(lambda);
        return one;
    };
}

StepPolicy replay_policy(const SkuData& sku) {
    return [&sku](const SkuTopology&, const NodeStateMatrix&, const Eigen::VectorXd&, int week,
                  Rng&) { return logged_actions(sku, week); };
}

LeadSampler empirical_leads(const SkuData& sku) {
    return [&sku](int edge, int mot, int week, Rng& rng) {
        const auto& dist =
            sku.topology_at(week).lead_dist[static_cast<size_t>(edge)][static_cast<size_t>(mot)];
        return dist.values[rng.categorical(dist.probs)];
    };
}

LeadSampler logged_leads(const SkuData& sku) {
    return [&sku](int edge, int mot, int week, Rng&) {
        const auto& st = sku.topology_at(week);
        auto [src, dst] = st.topo.edges[static_cast<size_t>(edge)];
        int lead = -1;
        for (const auto& rec : sku.shipments.records) {
            if (rec.send_time != week || rec.source != src || rec.destination != dst ||
                rec.mot != mot)
                continue;
            if (lead >= 0)
                throw std::runtime_error("logged_leads: multiple records for one shipment slot");
            lead = rec.lead;
        }
        if (lead < 0) throw std::runtime_error("logged_leads: no logged shipment to replay");
        return lead;
    };
}

// ---------------------------------------------------------------------------
// Evaluation rollouts

std::vector<int> rollout_starts(const SkuData& sku, int begin_week, int end_week,
                                const RolloutConfig& rc) {
    std::vector<int> starts;
    int last_ok = sku.last_week() - (rc.horizon + rc.feature_count - 3);
    for (int t = std::max(begin_week, sku.first_week()); t <= std::min(end_week, last_ok); ++t)
        starts.push_back(t);
    return starts;
}

SkuRollouts rollout_policy(const SkuData& sku, const StepPolicy& policy,
                           const LeadSampler& leads, int begin_week, int end_week,
                           const RolloutConfig& rc) {
    rc.validate();
    SkuRollouts R;
    R.start_weeks = rollout_starts(sku, begin_week, end_week, rc);
    const int S = static_cast<int>(R.start_weeks.size());
    const int J = rc.horizon, Z = rc.mc_runs;
    if (S == 0) return R;

    const auto& st = sku.topology_at(R.start_weeks.front());
    const int n = st.topo.node_count();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    R.abs_oos.assign(static_cast<size_t>(Z), Eigen::MatrixXd::Zero(S, J));
    R.es.assign(static_cast<size_t>(Z), Eigen::MatrixXd::Zero(S, J));
    R.final_imbalance.assign(static_cast<size_t>(Z), Eigen::MatrixXd::Constant(S, n, nan));
    if (rc.record_inventory) R.inventory.assign(static_cast<size_t>(Z), {});

    // actual production, read straight from the log
    auto production_view = [&sku](int v, int w) { return sku.at_week(w).production[v]; };

    for (int si = 0; si < S; ++si) {
        const int t = R.start_weeks[static_cast<size_t>(si)];
        const ArrivalSchedule inflight = inflight_schedule(sku, t);
        for (int z = 0; z < Z; ++z) {
            Rng rr = Rng::derive(rc.seed, draw_tag("eval", sku.id, t, z));
            Eigen::VectorXd inventory = sku.at_week(t).inventory;
            ArrivalSchedule sched = inflight;
            Eigen::MatrixXd traj;
            if (rc.record_inventory) {
                traj.resize(J + 1, n);
                traj.row(0) = inventory.transpose();
            }
            for (int j = t; j < t + J; ++j) {
                const int step = j - t;
                // predictions are refreshed at each interval (receding horizon)
                const auto& rec = sku.at_week(j);
                auto demand_view = [&rec, j](int v, int w) { return rec.forecast(v, w - j); };
                NodeStateMatrix x = sim_features(st.topo, inventory, sched, j,
                                                 rc.feature_count, demand_view, production_view);
                Eigen::VectorXd cap = supply_capability(st.topo, inventory, rec.demand);
                ActionTensor actions = policy(st, x, cap, j, rr);
                if (actions.edge_count != st.topo.edge_count() ||
                    actions.mot_count != st.topo.mot_count || actions.slice_count != 1)
                    throw std::runtime_error("rollout: policy returned a misshapen tensor");
                for (int e = 0; e < st.topo.edge_count(); ++e)
                    for (int m = 0; m < st.topo.mot_count; ++m) {
                        double q = actions.at(m, e, 0);
                        if (q > 0.0)
                            sched.add(j + leads(e, m, j, rr),
                                      st.topo.edges[static_cast<size_t>(e)].second, q);
                    }
                StepOutcome out =
                    step_network(st.topo, inventory, sched.at(j), rec.demand, rec.production,
                                 outgoing_totals(st.topo, actions, 0));
                double oos_sum = 0.0, es_sum = 0.0;
                for (int v = 0; v < n; ++v) {
                    if (is_production(st.topo, v)) continue;
                    oos_sum += std::abs(out.oos[v]);
                    es_sum += out.es[v];
                }
                R.abs_oos[static_cast<size_t>(z)](si, step) = oos_sum;
                R.es[static_cast<size_t>(z)](si, step) = es_sum;
                if (step == J - 1)
                    for (int v = 0; v < n; ++v)
                        if (!is_production(st.topo, v))
                            R.final_imbalance[static_cast<size_t>(z)](si, v) =
                                out.es[v] + out.oos[v];
                if (rc.record_inventory) traj.row(step + 1) = inventory.transpose();
            }
            if (rc.record_inventory) R.inventory[static_cast<size_t>(z)].push_back(traj);
        }
    }
    return R;
}

// ---------------------------------------------------------------------------
// Metrics

StepOutcome logged_outcome(const SkuData& sku, int week) {
    if (!sku.has_week(week + 1))
        throw std::invalid_argument("logged_outcome: needs the following week's record");
    const auto& st = sku.topology_at(week);
    const auto& rec = sku.at_week(week);
    const auto& next = sku.at_week(week + 1);
    const int n = st.topo.node_count();
    StepOutcome out;
    out.oos = Eigen::VectorXd::Zero(n);
    out.es = Eigen::VectorXd::Zero(n);
    for (int v = 0; v < n; ++v) {
        if (is_production(st.topo, v)) continue;
        double arrivals = incoming_supply(sku.shipments, v, week, week + 1, n);
        out.oos[v] = std::min(rec.inventory[v] + arrivals - rec.demand[v], 0.0);
        out.es[v] = next.inventory[v];
    }
    return out;
}

HistLevels historical_levels(const Corpus& corpus, const CostObjective& obj,
                             const std::vector<int>& weeks) {
    if (weeks.empty()) throw std::invalid_argument("historical_levels: no weeks given");
    HistLevels h;
    for (const auto& sku : corpus.skus) {
        CostObjective so = obj.for_sku(sku);
        for (int t : weeks) {
            StepOutcome out = logged_outcome(sku, t);
            for (int v = 0; v < out.es.size(); ++v) {
                h.es += std::abs(out.es[v]);
                h.oos += std::abs(out.oos[v]);
                h.cost += total_cost(out.es[v], out.oos[v], so);
            }
        }
    }
    double T = static_cast<double>(weeks.size());
    h.es /= T;
    h.oos /= T;
    h.cost /= T;
    return h;
}

namespace {

PercentSeries percent_series(const Eigen::MatrixXd& per_draw_level, double hist_level) {
    // per_draw_level: (Z x J) weekly-averaged aggregates
    PercentSeries s;
    const int Z = static_cast<int>(per_draw_level.rows());
    const int J = static_cast<int>(per_draw_level.cols());
    if (hist_level <= 0.0) {
        s.defined = false;
        s.mean = Eigen::VectorXd::Constant(J, std::numeric_limits<double>::quiet_NaN());
        s.sd = s.mean;
        return s;
    }
    Eigen::MatrixXd pct = 100.0 * per_draw_level / hist_level;
    s.mean = pct.colwise().mean();
    s.sd = Eigen::VectorXd::Zero(J);
    if (Z > 1) {
        for (int j = 0; j < J; ++j) {
            double m = s.mean[j];
            double acc = 0.0;
            for (int z = 0; z < Z; ++z) acc += (pct(z, j) - m) * (pct(z, j) - m);
            s.sd[j] = std::sqrt(acc / (Z - 1));
        }
    }
    return s;
}

} // namespace

PercentReport percent_metrics(const std::vector<SkuRollouts>& rollouts,
                              const std::vector<const SkuData*>& skus, const CostObjective& obj,
                              const HistLevels& hist) {
    if (rollouts.empty() || rollouts.size() != skus.size())
        throw std::invalid_argument("percent_metrics: rollout/SKU list mismatch");
    const int Z = static_cast<int>(rollouts.front().abs_oos.size());
    const int J = static_cast<int>(rollouts.front().abs_oos.front().cols());
    const int T = static_cast<int>(rollouts.front().start_weeks.size());
    for (const auto& r : rollouts) {
        if (static_cast<int>(r.abs_oos.size()) != Z ||
            static_cast<int>(r.start_weeks.size()) != T)
            throw std::invalid_argument("percent_metrics: rollouts must share draws and starts");
    }

    Eigen::MatrixXd es_level = Eigen::MatrixXd::Zero(Z, J);
    Eigen::MatrixXd oos_level = Eigen::MatrixXd::Zero(Z, J);
    Eigen::MatrixXd cost_level = Eigen::MatrixXd::Zero(Z, J);
    for (size_t i = 0; i < rollouts.size(); ++i) {
        CostObjective so = obj.for_sku(*skus[i]);
        for (int z = 0; z < Z; ++z) {
            const auto& es = rollouts[i].es[static_cast<size_t>(z)];
            const auto& oos = rollouts[i].abs_oos[static_cast<size_t>(z)];
            for (int j = 0; j < J; ++j) {
                double es_sum = es.col(j).sum();
                double oos_sum = oos.col(j).sum();
                es_level(z, j) += es_sum / T;
                oos_level(z, j) += oos_sum / T;
                cost_level(z, j) += total_cost(es_sum, oos_sum, so) / T;
            }
        }
    }
    PercentReport rep;
    rep.es = percent_series(es_level, hist.es);
    rep.oos = percent_series(oos_level, hist.oos);
    rep.cost = percent_series(cost_level, hist.cost);
    return rep;
}

std::vector<double> collect_final_imbalances(const std::vector<SkuRollouts>& rollouts) {
    std::vector<double> values;
    for (const auto& r : rollouts)
        for (const auto& mat : r.final_imbalance)
            for (int i = 0; i < mat.rows(); ++i)
                for (int j = 0; j < mat.cols(); ++j)
                    if (!std::isnan(mat(i, j))) values.push_back(mat(i, j));
    return values;
}

Histogram imbalance_histogram(const std::vector<double>& values, double lo, double hi,
                              int bins) {
    if (bins < 1 || !(hi > lo)) throw std::invalid_argument("histogram: bad bin layout");
    Histogram h;
    h.edges = Eigen::VectorXd::LinSpaced(bins + 1, lo, hi);
    h.counts = Eigen::VectorXd::Zero(bins);
    const double width = (hi - lo) / bins;
    for (double v : values) {
        int idx = static_cast<int>(std::floor((v - lo) / width));
        idx = std::clamp(idx, 0, bins - 1); // edge bins absorb the tails
        h.counts[idx] += 1.0;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Validation

double validation_loss(const std::vector<Eigen::MatrixXd>& cost_final) {
    if (cost_final.empty()) throw std::invalid_argument("validation_loss: no objectives");
    double total = 0.0;
    for (const auto& table : cost_final) {
        if (table.rows() == 0 || table.cols() == 0)
            throw std::invalid_argument("validation_loss: empty cost table");
        double obj_sum = 0.0;
        for (int t = 0; t < table.rows(); ++t) obj_sum += table.row(t).minCoeff();
        total += obj_sum / static_cast<double>(table.rows());
    }
    return total / static_cast<double>(cost_final.size());
}

ValidationResult validate_policies(const Corpus& corpus, const ModelBundle& bundle,
                                   const std::vector<CostObjective>& objectives,
                                   int begin_week, int end_week, const RolloutConfig& rc) {
    rc.validate();
    if (objectives.empty()) throw std::invalid_argument("validate: no objectives");
    if (corpus.skus.empty()) throw std::invalid_argument("validate: empty corpus");
    if (!corpus.scaled) throw std::invalid_argument("validate: corpus must be scaled");
    if (rc.feature_count != bundle.cfg.feature_count)
        throw std::invalid_argument("validate: feature_count does not match the trained model");

    ValidationResult res;
    res.objectives = objectives;
    res.start_weeks = rollout_starts(corpus.skus.front(), begin_week, end_week, rc);
    const int S = static_cast<int>(res.start_weeks.size());
    if (S == 0) throw std::invalid_argument("validate: no start week fits the horizon");
    for (const auto& sku : corpus.skus)
        if (rollout_starts(sku, begin_week, end_week, rc) != res.start_weeks)
            throw std::invalid_argument("validate: SKUs disagree on usable start weeks");

    const int lambdas = bundle.cfg.lambda_count();
    const int J = rc.horizon, Z = rc.mc_runs;
    res.cost_final.assign(objectives.size(), Eigen::MatrixXd::Zero(S, lambdas));

    for (const auto& sku : corpus.skus) {
        LeadSampler leads = empirical_leads(sku);
        for (int l = 0; l < lambdas; ++l) {
            StepPolicy pol = actor_policy(bundle, l);
            SkuRollouts R = rollout_policy(sku, pol, leads, begin_week, end_week, rc);
            for (size_t o = 0; o < objectives.size(); ++o) {
                CostObjective so = objectives[o].for_sku(sku);
                for (int si = 0; si < S; ++si) {
                    double acc = 0.0;
                    for (int z = 0; z < Z; ++z)
                        acc += total_cost(R.es[static_cast<size_t>(z)](si, J - 1),
                                          R.abs_oos[static_cast<size_t>(z)](si, J - 1), so);
                    res.cost_final[o](si, l) += acc / Z;
                }
            }
        }
    }
    res.lambda_star.resize(objectives.size());
    for (size_t o = 0; o < objectives.size(); ++o) {
        Eigen::VectorXd mean_cost = res.cost_final[o].colwise().mean();
        res.lambda_star[static_cast<size_t>(o)] = select_policy(mean_cost);
    }
    res.loss = validation_loss(res.cost_final);
    return res;
}

} // namespace splan
