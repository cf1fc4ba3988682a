#pragma once

#include "splan/baselines.hpp"

namespace splan {

// ---------------------------------------------------------------------------
// Synthetic corpus generator. Shapes (node/edge counts, MOT mix, lead-time
// spans, forecast-error levels, split widths) follow the published dataset
// statistics; the generating processes themselves are original plumbing.
// History comes from rolling the world forward under a deliberately imperfect
// behavioral policy: the days-of-supply rule plus multiplicative jitter,
// occasional dropped or doubled shipments, and per-shipment MOT sampling.

struct GenConfig {
    int sku_count = 20;
    int train_weeks = 60;
    int val_weeks = 17;
    int test_weeks = 26;
    int forecast_horizon = 15; // prediction columns per weekly snapshot

    // topology shape: lognormal node counts with the published median,
    // two DC tiers below the plants, extra edges up to a target density
    double node_median = 9.0;
    double node_log_sigma = 0.35;
    int node_min = 2, node_max = 20;
    double edges_per_dc = 2.8; // median edge count ~ 20 at the median size
    int edge_max = 60;

    // transport: two modes, truckload dominating events with shorter leads
    double truckload_share = 0.8;
    std::vector<int> truckload_leads = {0, 1, 2};
    std::vector<int> intermodal_leads = {1, 2, 3, 4};

    // demand and production processes (raw units)
    double demand_median = 50.0;   // lognormal median of per-DC base demand
    double demand_log_sigma = 0.5; // spread of base levels across DCs
    double season_amp_lo = 0.1, season_amp_hi = 0.4;
    double season_period = 52.0;
    double demand_noise = 0.15;    // weekly lognormal dispersion
    double production_noise = 0.1; // plants track mean demand with this noise

    // behavioral-policy imperfections; all zero = pure rule actions
    double behavior_jitter = 0.25;
    double drop_prob = 0.05;
    double double_prob = 0.05;

    double dos_lo = 1.0, dos_hi = 3.0;     // safety days of supply per DC
    double price_lo = 0.5, price_hi = 2.0; // per-SKU unit price

    // forecast-error ramp: median WMAPE from lo at step 0 to hi at step
    // `wmape_ramp`, flat beyond
    double wmape_lo = 0.30, wmape_hi = 0.50;
    int wmape_ramp = 13;

    uint64_t seed = 1;

    int total_weeks() const { return train_weeks + val_weeks + test_weeks; }
    void validate() const;
    nlohmann::ordered_json to_json() const; // the config echo stored in artifacts
    static GenConfig from_json(const nlohmann::ordered_json& j); // partial overrides
};

// Ground truth for one SKU before any history is rolled out. Demand and
// production cover total_weeks + forecast_horizon - 1 weeks so every stored
// snapshot has a full prediction window ahead of it.
struct SkuWorld {
    SkuTopology st;
    Eigen::MatrixXd demand;     // |V| x extended weeks, zero at plants
    Eigen::MatrixXd production; // |V| x extended weeks, zero at DCs
    Eigen::VectorXd dos;        // zero at plants
    Eigen::VectorXd init_inventory;
    double price = 1.0;
};

std::vector<SkuWorld> gen_world(const GenConfig& cfg);

// Dispersion of an unbiased lognormal multiplier whose expected absolute
// error E|X - 1| equals the given WMAPE level (solves 4*Phi(sigma/2) - 2).
double wmape_sigma(double wmape);

// Per-horizon-step WMAPE targets implied by the config ramp.
std::vector<double> wmape_targets(const GenConfig& cfg);

// One weekly forecast snapshot: truth times unbiased lognormal noise with
// per-step dispersion; production-node rows stay zero.
Eigen::MatrixXd forecast_at(const SkuWorld& world, int week, int horizon,
                            const std::vector<double>& sigma, Rng& rng);

// Rolls the behavioral policy over the configured weeks and returns the SKU
// with its full log, forecasts, DOS column, and chronological splits (raw
// units, unscaled).
SkuData gen_history(const SkuWorld& world, const GenConfig& cfg, int sku_index);

// World + history for every SKU, with the config echoed into the corpus.
Corpus gen_corpus(const GenConfig& cfg);

} // namespace splan
