#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "splan/synthgen.hpp"

using namespace splan;
namespace fs = std::filesystem;

namespace {

Corpus sample_corpus() {
    GenConfig cfg;
    cfg.sku_count = 3;
    cfg.seed = 29;
    return gen_corpus(cfg);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("splan-test-" + tag)) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("a corpus written twice through a load round-trip is byte-identical") {
    Corpus corpus = sample_corpus();
    TempDir a("rt-a"), b("rt-b");
    write_corpus(corpus, a.path.string());
    Corpus loaded = load_corpus(a.path.string());
    write_corpus(loaded, b.path.string());

    std::vector<fs::path> names;
    for (const auto& entry : fs::directory_iterator(a.path))
        names.push_back(entry.path().filename());
    REQUIRE(names.size() == corpus.skus.size() + 1); // one file per sku + index
    for (const auto& name : names)
        CHECK(slurp(a.path / name) == slurp(b.path / name));
}

TEST_CASE("loading restores every field bit-for-bit") {
    Corpus corpus = sample_corpus();
    TempDir dir("load");
    write_corpus(corpus, dir.path.string());
    Corpus got = load_corpus(dir.path.string());

    CHECK(got.format_version == corpus.format_version);
    CHECK(got.seed == corpus.seed);
    CHECK(got.config_echo == corpus.config_echo);
    CHECK(!got.scaled);
    REQUIRE(got.skus.size() == corpus.skus.size());
    for (size_t s = 0; s < corpus.skus.size(); ++s) {
        const SkuData& x = corpus.skus[s];
        const SkuData& y = got.skus[s];
        CHECK(y.id == x.id);
        CHECK(y.price == x.price);
        CHECK(y.mot_count == x.mot_count);
        CHECK(y.dos == x.dos);
        CHECK(y.forecast_sigma == x.forecast_sigma);
        CHECK(y.split.train_end == x.split.train_end);
        CHECK(y.split.val_begin == x.split.val_begin);
        CHECK(y.split.test_end == x.split.test_end);
        REQUIRE(y.topologies.size() == x.topologies.size());
        const SkuTopology& xt = x.topologies[0];
        const SkuTopology& yt = y.topologies[0];
        CHECK(yt.topo.edges == xt.topo.edges);
        CHECK(yt.node_names == xt.node_names);
        CHECK(yt.reversed.edges.size() == xt.reversed.edges.size());
        for (size_t e = 0; e < xt.lead_dist.size(); ++e)
            for (int m = 0; m < x.mot_count; ++m) {
                CHECK(yt.lead_dist[e][static_cast<size_t>(m)].values ==
                      xt.lead_dist[e][static_cast<size_t>(m)].values);
                CHECK(yt.lead_dist[e][static_cast<size_t>(m)].probs ==
                      xt.lead_dist[e][static_cast<size_t>(m)].probs);
            }
        REQUIRE(y.weeks.size() == x.weeks.size());
        for (size_t w = 0; w < x.weeks.size(); ++w) {
            CHECK(y.weeks[w].week == x.weeks[w].week);
            CHECK(y.weeks[w].inventory == x.weeks[w].inventory);
            CHECK(y.weeks[w].demand == x.weeks[w].demand);
            CHECK(y.weeks[w].production == x.weeks[w].production);
            CHECK(y.weeks[w].forecast == x.weeks[w].forecast);
        }
        REQUIRE(y.shipments.records.size() == x.shipments.records.size());
        for (size_t r = 0; r < x.shipments.records.size(); ++r) {
            CHECK(y.shipments.records[r].send_time == x.shipments.records[r].send_time);
            CHECK(y.shipments.records[r].quantity == x.shipments.records[r].quantity);
            CHECK(y.shipments.records[r].lead == x.shipments.records[r].lead);
        }
    }
}

TEST_CASE("scaled corpora are refused on disk; files stay in raw units") {
    Corpus corpus = sample_corpus();
    scale_corpus(corpus);
    TempDir dir("scaled");
    CHECK_THROWS_AS(write_corpus(corpus, dir.path.string()), std::invalid_argument);
}

TEST_CASE("scaling divides by the train-period inventory peak and inverts cleanly") {
    Corpus corpus = sample_corpus();
    Corpus original = corpus;
    scale_corpus(corpus);
    CHECK(corpus.scaled);
    for (size_t s = 0; s < corpus.skus.size(); ++s) {
        SkuData& sku = corpus.skus[s];
        const SkuData& raw = original.skus[s];
        CHECK(sku.scaled);
        double peak = 0.0;
        for (const auto& w : raw.weeks)
            if (w.week <= raw.split.train_end)
                peak = std::max(peak, w.inventory.maxCoeff());
        CHECK(sku.scaler.max_inventory == peak);
        // scaled train inventories peak at exactly 1
        double scaled_peak = 0.0;
        for (const auto& w : sku.weeks)
            if (w.week <= sku.split.train_end)
                scaled_peak = std::max(scaled_peak, w.inventory.maxCoeff());
        CHECK(scaled_peak == doctest::Approx(1.0).epsilon(1e-12));
        // dos and price are unitless and untouched
        CHECK(sku.dos == raw.dos);
        CHECK(sku.price == raw.price);
        CHECK_THROWS_AS(scale_sku(sku), std::logic_error);

        unscale_sku(sku);
        for (size_t w = 0; w < sku.weeks.size(); ++w) {
            CHECK(sku.weeks[w].inventory.isApprox(raw.weeks[w].inventory, 1e-12));
            CHECK(sku.weeks[w].forecast.isApprox(raw.weeks[w].forecast, 1e-12));
        }
        for (size_t r = 0; r < sku.shipments.records.size(); ++r)
            CHECK(sku.shipments.records[r].quantity ==
                  doctest::Approx(raw.shipments.records[r].quantity).epsilon(1e-12));
        CHECK_THROWS_AS(unscale_sku(sku), std::logic_error);
    }
}

TEST_CASE("logged views agree with the raw records") {
    Corpus corpus = sample_corpus();
    const SkuData& sku = corpus.skus[0];
    const int n = sku.topologies[0].topo.node_count();

    for (int w : {0, 25, 60}) {
        // actions: tensor totals match the log's quantities for that week
        ActionTensor a = logged_actions(sku, w);
        double tensor_total = a.values.sum(), log_total = 0.0;
        for (const auto& r : sku.shipments.records)
            if (r.send_time == w) log_total += r.quantity;
        CHECK(tensor_total == doctest::Approx(log_total).epsilon(1e-12));

        // profiles: first entry is on-hand inventory at t
        NodeStateMatrix x = state_at(sku, w, 4);
        REQUIRE(x.profiles.rows() == n);
        for (int v = 0; v < n; ++v)
            CHECK(x.profiles(v, 0) == sku.at_week(w).inventory[v]);

        Eigen::VectorXd cap = capability_at(sku, w);
        CHECK(cap.minCoeff() >= 0.0);
        for (int v = 0; v < n; ++v)
            CHECK(cap[v] <= sku.at_week(w).inventory[v] + 1e-12);
    }
    CHECK_THROWS_AS(state_at(sku, sku.last_week(), 4), std::out_of_range);
}

TEST_CASE("transition datasets stay inside their split") {
    Corpus corpus = sample_corpus();
    scale_corpus(corpus);
    const int K = 4;
    auto check_split = [&](Split split, int begin, int end) {
        TransitionDataset ds = build_transitions(corpus, split, K);
        // each sku contributes one sample per week whose full window fits
        CHECK(static_cast<int>(ds.size()) ==
              static_cast<int>(corpus.skus.size()) * (end - begin + 1 - K));
        for (const auto& tr : ds.samples) {
            CHECK(tr.week >= begin);
            CHECK(tr.week + K <= end);
            CHECK(tr.x.profiles.allFinite());
            CHECK(tr.x_next.profiles.allFinite());
            CHECK(tr.a.slice_count == 1);
            CHECK(tr.cap.minCoeff() >= 0.0);
            CHECK(tr.cap_next.minCoeff() >= 0.0);
        }
    };
    const SplitRanges& sp = corpus.skus[0].split;
    check_split(Split::Train, sp.train_begin, sp.train_end);
    check_split(Split::Validation, sp.val_begin, sp.val_end);
    check_split(Split::Test, sp.test_begin, sp.test_end);
}
