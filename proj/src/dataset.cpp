#include "splan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "splan/actor_critic.hpp" // supply_capability

namespace splan {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

int SkuTopology::edge_index(int src, int dst) const {
    for (int e = 0; e < topo.edge_count(); ++e)
        if (topo.edges[static_cast<size_t>(e)] == std::pair{src, dst}) return e;
    return -1;
}

const WeekRecord& SkuData::at_week(int w) const {
    if (!has_week(w))
        throw std::out_of_range("sku " + id + ": no record for week " + std::to_string(w));
    return weeks[static_cast<size_t>(w - first_week())];
}

const SkuTopology& SkuData::topology_at(int w) const {
    int idx = at_week(w).topology;
    return topologies.at(static_cast<size_t>(idx));
}

// ---------------------------------------------------------------------------
// JSON serialization

namespace {

ojson vec_to_json(const Eigen::VectorXd& v) {
    ojson arr = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vec_from_json(const ojson& arr) {
    Eigen::VectorXd v(arr.size());
    Eigen::Index i = 0;
    for (const auto& x : arr) v[i++] = x.get<double>();
    return v;
}

ojson mat_to_json(const Eigen::MatrixXd& m) {
    ojson rows = ojson::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
    return rows;
}

Eigen::MatrixXd mat_from_json(const ojson& rows) {
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        if (static_cast<Eigen::Index>(row.size()) != m.cols())
            throw std::runtime_error("ragged matrix rows in dataset file");
        Eigen::Index c = 0;
        for (const auto& x : row) m(r, c++) = x.get<double>();
        ++r;
    }
    return m;
}

ojson topology_to_json(const SkuTopology& st, int mot_count) {
    ojson nodes = ojson::array();
    for (size_t v = 0; v < st.topo.nodes.size(); ++v) {
        ojson n;
        n["name"] = st.node_names.at(v);
        n["kind"] = st.topo.nodes[v] == NodeKind::Production ? "production" : "distribution";
        nodes.push_back(std::move(n));
    }
    ojson edges = ojson::array();
    for (int e = 0; e < st.topo.edge_count(); ++e) {
        auto [src, dst] = st.topo.edges[static_cast<size_t>(e)];
        ojson je;
        je["src"] = src;
        je["dst"] = dst;
        ojson leads = ojson::array();
        for (int m = 0; m < mot_count; ++m) {
            const auto& d = st.lead_dist.at(static_cast<size_t>(e)).at(static_cast<size_t>(m));
            ojson jd;
            jd["values"] = d.values;
            jd["probs"] = d.probs;
            leads.push_back(std::move(jd));
        }
        je["lead_times"] = std::move(leads);
        edges.push_back(std::move(je));
    }
    ojson out;
    out["nodes"] = std::move(nodes);
    out["edges"] = std::move(edges);
    return out;
}

SkuTopology topology_from_json(const ojson& j, int mot_count) {
    SkuTopology st;
    std::vector<NodeKind> kinds;
    for (const auto& n : j.at("nodes")) {
        st.node_names.push_back(n.at("name").get<std::string>());
        std::string k = n.at("kind").get<std::string>();
        if (k == "production")
            kinds.push_back(NodeKind::Production);
        else if (k == "distribution")
            kinds.push_back(NodeKind::Distribution);
        else
            throw std::runtime_error("unknown node kind '" + k + "'");
    }
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges"))
        edges.emplace_back(e.at("src").get<int>(), e.at("dst").get<int>());
    st.topo = NetworkTopology::make(std::move(kinds), std::move(edges), mot_count);
    auto rev = reverse_topology(st.topo);
    st.reversed = std::move(rev.topo);
    st.edge_map = std::move(rev.edge_map);

    st.lead_dist.resize(static_cast<size_t>(st.topo.edge_count()));
    size_t e = 0;
    for (const auto& je : j.at("edges")) {
        const auto& leads = je.at("lead_times");
        if (static_cast<int>(leads.size()) != mot_count)
            throw std::runtime_error("lead_times entries must match mot_count");
        for (const auto& jd : leads) {
            LeadTimeDist d;
            d.values = jd.at("values").get<std::vector<int>>();
            d.probs = jd.at("probs").get<std::vector<double>>();
            if (d.values.size() != d.probs.size() || d.values.empty())
                throw std::runtime_error("malformed lead-time distribution");
            double total = 0.0;
            for (double p : d.probs) total += p;
            if (std::abs(total - 1.0) > 1e-9)
                throw std::runtime_error("lead-time probabilities must sum to 1");
            st.lead_dist[e].push_back(std::move(d));
        }
        ++e;
    }
    return st;
}

ojson sku_to_json(const SkuData& sku) {
    if (sku.scaled)
        throw std::invalid_argument("refusing to write scaled quantities; files hold raw units");
    ojson j;
    j["id"] = sku.id;
    j["price"] = sku.price;
    j["mot_count"] = sku.mot_count;
    j["dos"] = vec_to_json(sku.dos);
    j["forecast_sigma"] = sku.forecast_sigma;
    j["split"] = {{"train", {sku.split.train_begin, sku.split.train_end}},
                  {"validation", {sku.split.val_begin, sku.split.val_end}},
                  {"test", {sku.split.test_begin, sku.split.test_end}}};
    ojson topos = ojson::array();
    for (const auto& t : sku.topologies) topos.push_back(topology_to_json(t, sku.mot_count));
    j["topologies"] = std::move(topos);
    ojson weeks = ojson::array();
    for (const auto& w : sku.weeks) {
        ojson jw;
        jw["week"] = w.week;
        jw["topology"] = w.topology;
        jw["inventory"] = vec_to_json(w.inventory);
        jw["demand"] = vec_to_json(w.demand);
        jw["production"] = vec_to_json(w.production);
        jw["forecast"] = mat_to_json(w.forecast);
        weeks.push_back(std::move(jw));
    }
    j["weeks"] = std::move(weeks);
    ojson ships = ojson::array();
    for (const auto& r : sku.shipments.records) {
        ojson js;
        js["week"] = r.send_time;
        js["src"] = r.source;
        js["dst"] = r.destination;
        js["mot"] = r.mot;
        js["qty"] = r.quantity;
        js["lead"] = r.lead;
        ships.push_back(std::move(js));
    }
    j["shipments"] = std::move(ships);
    return j;
}

SkuData sku_from_json(const ojson& j) {
    SkuData sku;
    sku.id = j.at("id").get<std::string>();
    sku.price = j.at("price").get<double>();
    sku.mot_count = j.at("mot_count").get<int>();
    sku.dos = vec_from_json(j.at("dos"));
    sku.forecast_sigma = j.at("forecast_sigma").get<std::vector<double>>();
    const auto& sp = j.at("split");
    auto range = [&](const char* name, int& lo, int& hi) {
        const auto& r = sp.at(name);
        lo = r.at(0).get<int>();
        hi = r.at(1).get<int>();
    };
    range("train", sku.split.train_begin, sku.split.train_end);
    range("validation", sku.split.val_begin, sku.split.val_end);
    range("test", sku.split.test_begin, sku.split.test_end);

    for (const auto& jt : j.at("topologies"))
        sku.topologies.push_back(topology_from_json(jt, sku.mot_count));
    if (sku.topologies.empty()) throw std::runtime_error("sku has no topology");

    int expect = -1;
    for (const auto& jw : j.at("weeks")) {
        WeekRecord w;
        w.week = jw.at("week").get<int>();
        if (expect >= 0 && w.week != expect)
            throw std::runtime_error("sku " + sku.id + ": week records not consecutive at " +
                                     std::to_string(w.week));
        expect = w.week + 1;
        w.topology = jw.at("topology").get<int>();
        if (w.topology < 0 || w.topology >= static_cast<int>(sku.topologies.size()))
            throw std::runtime_error("week topology index out of range");
        w.inventory = vec_from_json(jw.at("inventory"));
        w.demand = vec_from_json(jw.at("demand"));
        w.production = vec_from_json(jw.at("production"));
        w.forecast = mat_from_json(jw.at("forecast"));
        const int n = sku.topologies[static_cast<size_t>(w.topology)].topo.node_count();
        if (w.inventory.size() != n || w.demand.size() != n || w.production.size() != n ||
            w.forecast.rows() != n)
            throw std::runtime_error("sku " + sku.id + ": week " + std::to_string(w.week) +
                                     " vector sizes do not match node count");
        if (w.forecast.cols() != static_cast<Eigen::Index>(sku.forecast_sigma.size()))
            throw std::runtime_error("sku " + sku.id +
                                     ": forecast horizon does not match forecast_sigma length");
        sku.weeks.push_back(std::move(w));
    }
    for (const auto& js : j.at("shipments")) {
        ShipmentRecord r;
        r.send_time = js.at("week").get<int>();
        r.source = js.at("src").get<int>();
        r.destination = js.at("dst").get<int>();
        r.mot = js.at("mot").get<int>();
        r.quantity = js.at("qty").get<double>();
        r.lead = js.at("lead").get<int>();
        sku.shipments.add(r);
    }
    return sku;
}

std::string sku_filename(const std::string& id) { return id + ".json"; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ojson read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return ojson::parse(in);
}

} // namespace

void write_corpus(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    ojson index;
    index["format"] = "splan-corpus";
    index["format_version"] = corpus.format_version;
    index["seed"] = corpus.seed;
    index["config"] = corpus.config_echo;
    ojson skus = ojson::array();
    for (const auto& sku : corpus.skus) {
        ojson e;
        e["id"] = sku.id;
        e["file"] = sku_filename(sku.id);
        skus.push_back(std::move(e));
        write_text(fs::path(dir) / sku_filename(sku.id), sku_to_json(sku).dump(2) + "\n");
    }
    index["skus"] = std::move(skus);
    write_text(fs::path(dir) / "corpus.json", index.dump(2) + "\n");
}

Corpus load_corpus(const std::string& dir) {
    ojson index = read_json(fs::path(dir) / "corpus.json");
    if (index.at("format").get<std::string>() != "splan-corpus")
        throw std::runtime_error(dir + "/corpus.json: not a corpus index");
    Corpus corpus;
    corpus.format_version = index.at("format_version").get<int>();
    corpus.seed = index.at("seed").get<uint64_t>();
    corpus.config_echo = index.at("config");
    for (const auto& e : index.at("skus")) {
        auto sku = sku_from_json(read_json(fs::path(dir) / e.at("file").get<std::string>()));
        if (sku.id != e.at("id").get<std::string>())
            throw std::runtime_error("sku id mismatch between index and file");
        corpus.skus.push_back(std::move(sku));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Scaling

SkuScaler compute_scaler(const SkuData& sku) {
    double max_inv = 0.0;
    for (const auto& w : sku.weeks)
        if (w.week >= sku.split.train_begin && w.week <= sku.split.train_end)
            max_inv = std::max(max_inv, w.inventory.maxCoeff());
    if (!(max_inv > 0.0))
        throw std::runtime_error("sku " + sku.id + ": nonpositive max training inventory");
    return SkuScaler{max_inv};
}

namespace {

void rescale_sku(SkuData& sku, double factor) {
    for (auto& w : sku.weeks) {
        w.inventory *= factor;
        w.demand *= factor;
        w.production *= factor;
        w.forecast *= factor;
    }
    for (auto& r : sku.shipments.records) r.quantity *= factor;
}

} // namespace

void scale_sku(SkuData& sku) {
    if (sku.scaled) throw std::logic_error("sku already scaled");
    sku.scaler = compute_scaler(sku);
    rescale_sku(sku, 1.0 / sku.scaler.max_inventory);
    sku.scaled = true;
}

void unscale_sku(SkuData& sku) {
    if (!sku.scaled) throw std::logic_error("sku not scaled");
    rescale_sku(sku, sku.scaler.max_inventory);
    sku.scaled = false;
}

void scale_corpus(Corpus& corpus) {
    for (auto& sku : corpus.skus) scale_sku(sku);
    corpus.scaled = true;
}

// ---------------------------------------------------------------------------
// Logged-history views

ActionTensor logged_actions(const SkuData& sku, int week) {
    const SkuTopology& st = sku.topology_at(week);
    ActionTensor a = ActionTensor::zeros(sku.mot_count, st.topo.edge_count(), 1);
    for (const auto& r : sku.shipments.records) {
        if (r.send_time != week) continue;
        int e = st.edge_index(r.source, r.destination);
        if (e < 0)
            throw std::runtime_error("sku " + sku.id + ": shipment on unknown edge " +
                                     std::to_string(r.source) + "->" +
                                     std::to_string(r.destination));
        a.at(r.mot, e, 0) += r.quantity;
    }
    return a;
}

NodeStateMatrix state_at(const SkuData& sku, int week, int feature_count) {
    const SkuTopology& st = sku.topology_at(week);
    const int n = st.topo.node_count();
    const int k_steps = feature_count - 1;
    if (k_steps > 0 && !sku.has_week(week + k_steps - 1))
        throw std::out_of_range("sku " + sku.id + ": feature window for week " +
                                std::to_string(week) + " runs past the last record");
    NodeStateMatrix x;
    x.profiles.resize(n, feature_count);
    for (int v = 0; v < n; ++v) {
        Eigen::VectorXd incoming(k_steps), demand(k_steps);
        for (int k = 0; k < k_steps; ++k) {
            const WeekRecord& rec = sku.at_week(week + k);
            double s = incoming_supply(sku.shipments, v, week + k, week, n);
            if (st.topo.nodes[static_cast<size_t>(v)] == NodeKind::Production) {
                incoming[k] = s + rec.production[v];
                demand[k] = 0.0;
            } else {
                incoming[k] = s;
                demand[k] = rec.demand[v];
            }
        }
        x.profiles.row(v) =
            imbalance_profile(sku.at_week(week).inventory[v], incoming, demand).transpose();
    }
    return x;
}

Eigen::VectorXd capability_at(const SkuData& sku, int week) {
    const SkuTopology& st = sku.topology_at(week);
    const WeekRecord& rec = sku.at_week(week);
    return supply_capability(st.topo, rec.inventory, rec.demand);
}

// ---------------------------------------------------------------------------
// Offline transitions

TransitionDataset build_transitions(const Corpus& corpus, Split split, int feature_count) {
    TransitionDataset ds;
    for (size_t si = 0; si < corpus.skus.size(); ++si) {
        const SkuData& sku = corpus.skus[si];
        int begin = 0, end = -1;
        switch (split) {
        case Split::Train: begin = sku.split.train_begin; end = sku.split.train_end; break;
        case Split::Validation: begin = sku.split.val_begin; end = sku.split.val_end; break;
        case Split::Test: begin = sku.split.test_begin; end = sku.split.test_end; break;
        }
        for (int t = begin; t <= end; ++t) {
            // full feature window (x^{t+1} spans t+1 .. t+K) inside the split
            if (t + feature_count > end) break;
            if (!sku.has_week(t) || !sku.has_week(t + feature_count)) continue;
            if (sku.at_week(t).topology != sku.at_week(t + 1).topology) continue;
            Transition tr;
            tr.sku = static_cast<int>(si);
            tr.week = t;
            tr.topology = sku.at_week(t).topology;
            tr.x = state_at(sku, t, feature_count);
            tr.x_next = state_at(sku, t + 1, feature_count);
            tr.a = logged_actions(sku, t);
            tr.a_next = logged_actions(sku, t + 1);
            tr.cap = capability_at(sku, t);
            tr.cap_next = capability_at(sku, t + 1);
            ds.samples.push_back(std::move(tr));
        }
    }
    return ds;
}

} // namespace splan
