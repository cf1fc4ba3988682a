#include "splan/cliapp.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

namespace splan {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

uint64_t sub_seed(uint64_t seed, std::string_view tag) {
    return Rng::derive(seed, tag).next_u64();
}

// Overlay `over` onto `base`, rejecting keys the section does not define.
ojson merged(const ojson& base, const ojson& over, const std::string& where) {
    if (!over.is_object())
        throw std::invalid_argument("config section '" + where + "' must be an object");
    ojson out = base;
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (!out.contains(it.key()))
            throw std::invalid_argument("config section '" + where + "': unknown key '" +
                                        it.key() + "'");
        out[it.key()] = it.value();
    }
    return out;
}

ojson trainer_to_json(const TrainerConfig& tc) {
    ojson j;
    j["epochs"] = tc.epochs;
    j["batch_size"] = tc.batch_size;
    j["lr"] = tc.lr;
    j["tau"] = tc.tau;
    j["eta"] = tc.eta;
    j["warmup_epochs"] = tc.warmup_epochs;
    j["early_stopping"] = tc.early_stopping;
    j["patience"] = tc.patience;
    j["min_delta"] = tc.min_delta;
    j["seed"] = tc.seed;
    return j;
}

TrainerConfig trainer_from_json(const ojson& j) {
    TrainerConfig tc;
    tc.epochs = j.at("epochs").get<int>();
    tc.batch_size = j.at("batch_size").get<int>();
    tc.lr = j.at("lr").get<double>();
    tc.tau = j.at("tau").get<double>();
    tc.eta = j.at("eta").get<double>();
    tc.warmup_epochs = j.at("warmup_epochs").get<int>();
    tc.early_stopping = j.at("early_stopping").get<bool>();
    tc.patience = j.at("patience").get<int>();
    tc.min_delta = j.at("min_delta").get<double>();
    tc.seed = j.at("seed").get<uint64_t>();
    return tc;
}

ojson lambda_json(const RiskPreference& l) {
    return {{"c1", l.c1}, {"c2", l.c2}, {"f_ref", l.f_ref}};
}

ojson grid_json(const std::vector<RiskPreference>& grid) {
    ojson arr = ojson::array();
    for (const auto& l : grid) arr.push_back(lambda_json(l));
    return arr;
}

ojson objective_json(const CostObjective& o) {
    return {{"c_es", o.c_es}, {"c_oos", o.c_oos}, {"price", o.price}};
}

ojson series_json(const PercentSeries& s) {
    ojson j;
    if (s.defined) {
        j["mean"] = std::vector<double>(s.mean.begin(), s.mean.end());
        j["sd"] = std::vector<double>(s.sd.begin(), s.sd.end());
    } else {
        j["mean"] = nullptr;
        j["sd"] = nullptr;
    }
    j["defined"] = s.defined;
    return j;
}

ojson histogram_json(const Histogram& h) {
    ojson j;
    j["edges"] = std::vector<double>(h.edges.begin(), h.edges.end());
    j["counts"] = std::vector<double>(h.counts.begin(), h.counts.end());
    return j;
}

ojson cfg_header(const std::string& command, const RunConfig& cfg) {
    ojson j;
    j["command"] = command;
    j["seed"] = cfg.seed;
    j["config"] = cfg.to_json();
    return j;
}

void write_json_artifact(const fs::path& path, const ojson& doc) {
    write_text_file(path.string(), doc.dump(2) + "\n");
}

Corpus load_scaled(const std::string& dir) {
    Corpus corpus = load_corpus(dir);
    scale_corpus(corpus);
    return corpus;
}

ModelBundle load_model(const std::string& path, const RunConfig& cfg) {
    if (!fs::exists(path))
        throw std::runtime_error("model checkpoint not found: " + path);
    ModelBundle bundle = load_checkpoint(path);
    if (bundle.cfg.feature_count != cfg.feature_count)
        throw std::runtime_error("checkpoint feature_count " +
                                 std::to_string(bundle.cfg.feature_count) +
                                 " does not match configured feature_count " +
                                 std::to_string(cfg.feature_count));
    if (bundle.cfg.mot_count != 2)
        throw std::runtime_error("checkpoint was trained for a different MOT count");
    if (bundle.cfg.lambdas.empty())
        throw std::runtime_error("checkpoint carries no risk preferences");
    return bundle;
}

// The corpus generator pins identical split ranges for every SKU; the
// windowed commands rely on that.
const SplitRanges& common_split(const Corpus& corpus) {
    if (corpus.skus.empty()) throw std::runtime_error("corpus holds no SKUs");
    const SplitRanges& sp = corpus.skus.front().split;
    for (const auto& sku : corpus.skus)
        if (sku.split.train_end != sp.train_end || sku.split.val_begin != sp.val_begin ||
            sku.split.val_end != sp.val_end || sku.split.test_begin != sp.test_begin ||
            sku.split.test_end != sp.test_end)
            throw std::runtime_error("SKUs disagree on split ranges");
    return sp;
}

} // namespace

// ---------------------------------------------------------------------------
// RunConfig

RunConfig::RunConfig() : nets(NetsConfig::defaults(4, 2)) {
    gen.seed = sub_seed(seed, "gen");
    trainer.seed = sub_seed(seed, "train");
}

ojson RunConfig::to_json() const {
    ojson j;
    j["seed"] = seed;
    j["feature_count"] = feature_count;
    j["horizon"] = horizon;
    j["mc_runs"] = mc_runs;
    ojson objs = ojson::array();
    for (const auto& o : objectives) objs.push_back(objective_json(o));
    j["objectives"] = std::move(objs);
    j["gen"] = gen.to_json();
    j["nets"] = nets_config_to_json(nets);
    j["trainer"] = trainer_to_json(trainer);
    return j;
}

RunConfig RunConfig::from_json(const ojson& j) {
    if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
    static const std::vector<std::string> known = {
        "seed", "feature_count", "horizon", "mc_runs", "objectives", "gen", "nets", "trainer"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::invalid_argument("run config: unknown key '" + it.key() + "'");

    RunConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.feature_count = j.value("feature_count", cfg.feature_count);
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.mc_runs = j.value("mc_runs", cfg.mc_runs);
    if (j.contains("objectives")) {
        cfg.objectives.clear();
        for (const auto& o : j.at("objectives")) {
            CostObjective obj;
            obj.c_es = o.at("c_es").get<double>();
            obj.c_oos = o.at("c_oos").get<double>();
            obj.price = o.value("price", 1.0);
            cfg.objectives.push_back(obj);
        }
    }
    cfg.gen = GenConfig::from_json(
        merged(GenConfig{}.to_json(), j.value("gen", ojson::object()), "gen"));
    cfg.nets = nets_config_from_json(
        merged(nets_config_to_json(NetsConfig::defaults(cfg.feature_count, 2)),
               j.value("nets", ojson::object()), "nets"));
    cfg.trainer = trainer_from_json(
        merged(trainer_to_json(TrainerConfig{}), j.value("trainer", ojson::object()), "trainer"));

    // one seed to rule them all: nested seeds always derive from the run seed
    cfg.gen.seed = sub_seed(cfg.seed, "gen");
    cfg.trainer.seed = sub_seed(cfg.seed, "train");
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (feature_count < 2)
        throw std::invalid_argument("run config: feature_count must be >= 2");
    if (horizon < 1) throw std::invalid_argument("run config: horizon must be >= 1");
    if (mc_runs < 1) throw std::invalid_argument("run config: mc_runs must be >= 1");
    if (objectives.empty())
        throw std::invalid_argument("run config: at least one cost objective is required");
    for (const auto& o : objectives) o.validate();
    gen.validate();
    trainer.validate();
    if (nets.feature_count != feature_count)
        throw std::invalid_argument("run config: nets.feature_count must equal feature_count");
    if (nets.mot_count != 2)
        throw std::invalid_argument("run config: generated data carries exactly two MOTs");
    if (nets.lambdas.empty())
        throw std::invalid_argument("run config: the risk-preference grid is empty");
    if (gen.forecast_horizon < horizon + feature_count - 2)
        throw std::invalid_argument(
            "run config: gen.forecast_horizon must cover horizon + feature_count - 2 weeks");
}

RolloutConfig RunConfig::rollout(uint64_t s) const {
    RolloutConfig rc;
    rc.horizon = horizon;
    rc.feature_count = feature_count;
    rc.mc_runs = mc_runs;
    rc.seed = s;
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig::from_json(ojson::object());
    ojson doc = read_json_file(path);
    try {
        return RunConfig::from_json(doc);
    } catch (const std::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Commands

ojson cmd_gen(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    Corpus corpus = gen_corpus(cfg.gen);
    write_corpus(corpus, out_dir);
    std::vector<std::string> files = {"corpus.json"};
    for (const auto& sku : corpus.skus) files.push_back(sku.id + ".json");
    return write_manifest(out_dir, "gen", cfg, files);
}

ojson cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
    cfg.validate();
    Corpus corpus = load_scaled(data_dir);
    TransitionDataset train_set = build_transitions(corpus, Split::Train, cfg.feature_count);
    TransitionDataset val_set = build_transitions(corpus, Split::Validation, cfg.feature_count);
    if (train_set.empty())
        throw std::runtime_error("the training split yields no transitions");

    ModelBundle bundle = ModelBundle::init(cfg.nets, sub_seed(cfg.seed, "init"));
    TrainerConfig tc = cfg.trainer;
    tc.checkpoint_dir = (fs::path(out_dir) / "checkpoints").string();
    TrainResult res = train(corpus, train_set, val_set.empty() ? nullptr : &val_set, bundle, tc);

    // the shipped model is the checkpoint with the best validation TD loss
    char best_name[32];
    std::snprintf(best_name, sizeof(best_name), "epoch_%03d.ckpt", res.best_epoch);
    ModelBundle best = load_checkpoint((fs::path(tc.checkpoint_dir) / best_name).string());
    save_checkpoint((fs::path(out_dir) / "model.ckpt").string(), best);

    std::string csv = "epoch,warmup,critic_loss,actor_objective,val_td_loss\n";
    for (const auto& s : res.history) {
        csv += std::to_string(s.epoch) + ',' + (s.warmup ? "1" : "0") + ',' +
               format_number(s.critic_loss) + ',' + format_number(s.actor_objective) + ',' +
               (s.val_td_loss ? format_number(*s.val_td_loss) : std::string()) + '\n';
    }
    write_text_file((fs::path(out_dir) / "loss_curves.csv").string(), csv);

    ojson sum = cfg_header("train", cfg);
    sum["transitions"] = {{"train", train_set.size()}, {"validation", val_set.size()}};
    sum["epochs_run"] = res.history.size();
    sum["iterations"] = res.iterations;
    sum["best_epoch"] = res.best_epoch;
    sum["final_critic_loss"] = res.history.empty() ? 0.0 : res.history.back().critic_loss;
    if (!res.history.empty() && res.history.back().val_td_loss)
        sum["final_val_td_loss"] = *res.history.back().val_td_loss;
    sum["model"] = "model.ckpt";
    write_json_artifact(fs::path(out_dir) / "train_summary.json", sum);

    std::vector<std::string> files = {"model.ckpt", "loss_curves.csv", "train_summary.json",
                                      "checkpoints/metadata.json"};
    for (const auto& s : res.history) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoints/epoch_%03d.ckpt", s.epoch);
        files.push_back(name);
    }
    return write_manifest(out_dir, "train", cfg, files);
}

ojson cmd_validate(const RunConfig& cfg, const std::string& data_dir,
                   const std::string& model_path, const std::string& out_dir) {
    cfg.validate();
    Corpus corpus = load_scaled(data_dir);
    ModelBundle bundle = load_model(model_path, cfg);
    const SplitRanges& sp = common_split(corpus);

    ValidationResult vr =
        validate_policies(corpus, bundle, cfg.objectives, sp.val_begin, sp.val_end,
                          cfg.rollout(sub_seed(cfg.seed, "validate")));

    ojson out = cfg_header("validate", cfg);
    out["window"] = {{"begin", sp.val_begin}, {"end", sp.val_end}};
    out["start_weeks"] = vr.start_weeks;
    out["lambda_grid"] = grid_json(bundle.cfg.lambdas);
    out["loss"] = vr.loss;
    std::string csv = "objective_index,c_es,c_oos,lambda,c1,c2,f_ref,avg_final_cost,selected\n";
    ojson objs = ojson::array();
    for (size_t o = 0; o < vr.objectives.size(); ++o) {
        Eigen::VectorXd avg = vr.cost_final[o].colwise().mean();
        ojson jo = objective_json(cfg.objectives[o]);
        jo.erase("price"); // per-SKU prices apply inside the tables
        jo["lambda_star"] = vr.lambda_star[o];
        jo["lambda"] = lambda_json(bundle.cfg.lambdas[static_cast<size_t>(vr.lambda_star[o])]);
        jo["avg_final_cost"] = std::vector<double>(avg.begin(), avg.end());
        objs.push_back(std::move(jo));
        for (int l = 0; l < avg.size(); ++l) {
            const RiskPreference& rp = bundle.cfg.lambdas[static_cast<size_t>(l)];
            csv += std::to_string(o) + ',' + format_number(cfg.objectives[o].c_es) + ',' +
                   format_number(cfg.objectives[o].c_oos) + ',' + std::to_string(l) + ',' +
                   format_number(rp.c1) + ',' + format_number(rp.c2) + ',' +
                   format_number(rp.f_ref) + ',' + format_number(avg[l]) + ',' +
                   (l == vr.lambda_star[o] ? "1" : "0") + '\n';
        }
    }
    out["objectives"] = std::move(objs);
    write_json_artifact(fs::path(out_dir) / "validation.json", out);
    write_text_file((fs::path(out_dir) / "validation_costs.csv").string(), csv);
    return write_manifest(out_dir, "validate", cfg, {"validation.json", "validation_costs.csv"});
}

ojson cmd_plan(const RunConfig& cfg, const std::string& data_dir, const std::string& model_path,
               const std::string& sku_id, int week, int objective_index,
               const std::string& out_dir) {
    cfg.validate();
    if (objective_index < 0 || objective_index >= static_cast<int>(cfg.objectives.size()))
        throw std::runtime_error("objective index " + std::to_string(objective_index) +
                                 " is outside the configured list");
    Corpus corpus = load_scaled(data_dir);
    ModelBundle bundle = load_model(model_path, cfg);

    const SkuData* sku = nullptr;
    for (const auto& s : corpus.skus)
        if (s.id == sku_id) sku = &s;
    if (!sku) throw std::runtime_error("corpus has no SKU '" + sku_id + "'");

    const int latest = sku->last_week() - (cfg.horizon + cfg.feature_count - 3);
    if (week < sku->first_week() || week > latest)
        throw std::runtime_error("plan start week must lie in [" +
                                 std::to_string(sku->first_week()) + ", " +
                                 std::to_string(latest) + "] for this corpus");

    CostObjective obj = cfg.objectives[static_cast<size_t>(objective_index)].for_sku(*sku);
    PlanResult pr = plan(*sku, week, bundle, obj, cfg.rollout(sub_seed(cfg.seed, "plan")));

    ojson out = cfg_header("plan", cfg);
    out["sku"] = sku->id;
    out["week"] = week;
    out["objective"] = objective_json(obj);
    out["lambda_grid"] = grid_json(bundle.cfg.lambdas);
    out["avg_cost"] = std::vector<double>(pr.avg_cost.begin(), pr.avg_cost.end());
    out["lambda_star"] = pr.lambda_star;
    out["lambda"] = lambda_json(bundle.cfg.lambdas[static_cast<size_t>(pr.lambda_star)]);
    out["units"] = {{"quantity", "raw"}, {"avg_cost", "scaled, price-weighted"}};

    const SkuTopology& st = sku->topology_at(week);
    const Eigen::MatrixXd& act = pr.plan[static_cast<size_t>(pr.lambda_star)];
    ojson actions = ojson::array();
    for (int j = 0; j < act.cols(); ++j)
        for (int e = 0; e < st.topo.edge_count(); ++e)
            for (int m = 0; m < sku->mot_count; ++m) {
                double q = act(e * sku->mot_count + m, j);
                if (q <= 1e-12) continue;
                ojson a;
                a["week"] = week + j;
                a["source"] = st.node_names[static_cast<size_t>(st.topo.edges[static_cast<size_t>(e)].first)];
                a["destination"] =
                    st.node_names[static_cast<size_t>(st.topo.edges[static_cast<size_t>(e)].second)];
                a["mot"] = m;
                a["quantity"] = q * sku->scaler.max_inventory;
                a["quantity_scaled"] = q;
                actions.push_back(std::move(a));
            }
    out["actions"] = std::move(actions);
    write_json_artifact(fs::path(out_dir) / "plan.json", out);
    return write_manifest(out_dir, "plan", cfg, {"plan.json"});
}

ojson cmd_evaluate(const RunConfig& cfg, const std::string& data_dir,
                   const std::string& model_path, const std::string& out_dir,
                   int lambda_override) {
    cfg.validate();
    Corpus corpus = load_scaled(data_dir);
    ModelBundle bundle = load_model(model_path, cfg);
    const SplitRanges& sp = common_split(corpus);
    const int lambda_count = bundle.cfg.lambda_count();

    ojson out = cfg_header("evaluate", cfg);
    out["lambda_grid"] = grid_json(bundle.cfg.lambdas);
    out["test_window"] = {{"begin", sp.test_begin}, {"end", sp.test_end}};

    // risk preference per objective: validation-selected unless pinned
    std::vector<int> lam(cfg.objectives.size(), lambda_override);
    if (lambda_override >= 0) {
        if (lambda_override >= lambda_count)
            throw std::runtime_error("lambda override is outside the checkpoint's grid");
        out["lambda_override"] = lambda_override;
    } else {
        ValidationResult vr =
            validate_policies(corpus, bundle, cfg.objectives, sp.val_begin, sp.val_end,
                              cfg.rollout(sub_seed(cfg.seed, "validate")));
        ojson jv;
        jv["window"] = {{"begin", sp.val_begin}, {"end", sp.val_end}};
        jv["loss"] = vr.loss;
        ojson jvo = ojson::array();
        for (size_t o = 0; o < vr.objectives.size(); ++o) {
            Eigen::VectorXd avg = vr.cost_final[o].colwise().mean();
            ojson e;
            e["lambda_star"] = vr.lambda_star[o];
            e["avg_final_cost"] = std::vector<double>(avg.begin(), avg.end());
            jvo.push_back(std::move(e));
            lam[o] = vr.lambda_star[o];
        }
        jv["objectives"] = std::move(jvo);
        out["validation"] = std::move(jv);
    }

    std::vector<const SkuData*> skus;
    for (const auto& sku : corpus.skus) skus.push_back(&sku);
    std::vector<int> starts =
        rollout_starts(corpus.skus.front(), sp.test_begin, sp.test_end,
                       cfg.rollout(0));
    if (starts.empty())
        throw std::runtime_error("the test window admits no rollout start weeks");
    out["start_weeks"] = starts;
    std::vector<int> hist_weeks;
    for (int w = starts.front(); w <= starts.back() + cfg.horizon - 1; ++w)
        hist_weeks.push_back(w);
    out["historical_window"] = {{"begin", hist_weeks.front()}, {"end", hist_weeks.back()}};

    // one rollout set per distinct policy; trained rollouts cached per lambda
    auto roll_all = [&](const std::function<StepPolicy(const SkuData&)>& make_policy,
                        const std::function<LeadSampler(const SkuData&)>& make_leads,
                        uint64_t seed_tag, int z) {
        std::vector<SkuRollouts> rolls;
        RolloutConfig rc = cfg.rollout(seed_tag);
        rc.mc_runs = z;
        for (const auto& sku : corpus.skus)
            rolls.push_back(rollout_policy(sku, make_policy(sku), make_leads(sku), sp.test_begin,
                                           sp.test_end, rc));
        return rolls;
    };

    std::map<int, std::vector<SkuRollouts>> trained;
    for (int l : lam)
        if (!trained.count(l))
            trained[l] = roll_all(
                [&](const SkuData&) { return actor_policy(bundle, l); },
                [](const SkuData& s) { return empirical_leads(s); },
                sub_seed(cfg.seed, "evaluate-trained-" + std::to_string(l)), cfg.mc_runs);

    std::vector<RuleContext> contexts;
    for (const auto& sku : corpus.skus)
        contexts.push_back(build_rule_context(sku, sp.train_begin, sp.train_end));
    std::vector<SkuRollouts> rule = roll_all(
        [&](const SkuData& s) {
            return rule_policy(s, contexts[static_cast<size_t>(&s - corpus.skus.data())]);
        },
        [](const SkuData& s) { return empirical_leads(s); }, sub_seed(cfg.seed, "evaluate-rule"),
        cfg.mc_runs);

    // the logged history replayed exactly: one draw, realized leads
    std::vector<SkuRollouts> history = roll_all(
        [](const SkuData& s) { return replay_policy(s); },
        [](const SkuData& s) { return logged_leads(s); }, sub_seed(cfg.seed, "evaluate-history"),
        1);

    auto policy_block = [&](const std::vector<SkuRollouts>& rolls, const CostObjective& obj,
                            const HistLevels& hist) {
        PercentReport pm = percent_metrics(rolls, skus, obj, hist);
        ojson b;
        b["percent"] = {{"es", series_json(pm.es)},
                        {"oos", series_json(pm.oos)},
                        {"cost", series_json(pm.cost)}};
        auto total = [](const PercentSeries& s, double level) {
            return s.defined ? ojson(level * s.mean.sum() / 100.0) : ojson(nullptr);
        };
        b["totals"] = {{"es", total(pm.es, hist.es)},
                       {"oos", total(pm.oos, hist.oos)},
                       {"cost", total(pm.cost, hist.cost)}};
        b["oos_pct_final"] =
            pm.oos.defined ? ojson(pm.oos.mean[pm.oos.mean.size() - 1]) : ojson(nullptr);
        return b;
    };

    ojson objs = ojson::array();
    for (size_t o = 0; o < cfg.objectives.size(); ++o) {
        const CostObjective& obj = cfg.objectives[o];
        HistLevels hist = historical_levels(corpus, obj, hist_weeks);
        ojson jo = objective_json(obj);
        jo.erase("price");
        jo["lambda_star"] = lam[o];
        jo["lambda"] = lambda_json(bundle.cfg.lambdas[static_cast<size_t>(lam[o])]);
        jo["hist_levels"] = {{"es", hist.es}, {"oos", hist.oos}, {"cost", hist.cost}};
        jo["policies"] = {{"trained", policy_block(trained[lam[o]], obj, hist)},
                          {"rule", policy_block(rule, obj, hist)},
                          {"history", policy_block(history, obj, hist)}};
        objs.push_back(std::move(jo));
    }
    out["objectives"] = std::move(objs);

    ojson hg;
    for (const auto& [l, rolls] : trained)
        hg["trained_lambda_" + std::to_string(l)] =
            histogram_json(imbalance_histogram(collect_final_imbalances(rolls)));
    hg["rule"] = histogram_json(imbalance_histogram(collect_final_imbalances(rule)));
    hg["history"] = histogram_json(imbalance_histogram(collect_final_imbalances(history)));
    out["imbalance_histograms"] = std::move(hg);

    write_json_artifact(fs::path(out_dir) / "evaluation.json", out);
    return write_manifest(out_dir, "evaluate", cfg, {"evaluation.json"});
}

} // namespace splan
