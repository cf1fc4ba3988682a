#include "splan/trainer.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace splan {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void TrainerConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("trainer: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("trainer: batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("trainer: lr must be positive");
    if (!(tau > 0.0) || tau > 1.0) throw std::invalid_argument("trainer: tau out of (0,1]");
    if (eta < 0.0) throw std::invalid_argument("trainer: eta must be >= 0");
    if (warmup_epochs < 0) throw std::invalid_argument("trainer: warmup_epochs must be >= 0");
    if (patience < 1) throw std::invalid_argument("trainer: patience must be >= 1");
    if (min_delta < 0.0) throw std::invalid_argument("trainer: min_delta must be >= 0");
}

ModelBundle ModelBundle::init(const NetsConfig& cfg, uint64_t seed) {
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0))
        throw std::invalid_argument("trainer: gamma out of [0,1)");
    if (cfg.lambdas.empty()) throw std::invalid_argument("trainer: empty risk-preference grid");
    ModelBundle b;
    b.cfg = cfg;
    add_actor_params(b.actor, cfg);
    add_critic_params(b.critic, cfg);
    Rng actor_rng(Rng::derive(seed, "actor-init"));
    Rng critic_rng(Rng::derive(seed, "critic-init"));
    b.actor.glorot_init(actor_rng);
    b.critic.glorot_init(critic_rng);
    b.actor_target = b.actor;
    b.critic_target = b.critic;
    return b;
}

// ---------------------------------------------------------------------------
// Checkpoints

ojson nets_config_to_json(const NetsConfig& cfg) {
    ojson j;
    j["feature_count"] = cfg.feature_count;
    j["mot_count"] = cfg.mot_count;
    j["gamma"] = cfg.gamma;
    j["slope"] = cfg.slope;
    ojson grid = ojson::array();
    for (const auto& l : cfg.lambdas)
        grid.push_back({{"c1", l.c1}, {"c2", l.c2}, {"f_ref", l.f_ref}});
    j["lambdas"] = std::move(grid);
    j["x_dims"] = cfg.x_stack.dims;
    j["xa_dims"] = cfg.xa_stack.dims;
    j["heads"] = cfg.x_stack.heads;
    j["mu_hidden"] = cfg.mu_hidden;
    j["q_hidden"] = cfg.q_hidden;
    return j;
}

NetsConfig nets_config_from_json(const ojson& j) {
    NetsConfig cfg;
    cfg.feature_count = j.at("feature_count").get<int>();
    cfg.mot_count = j.at("mot_count").get<int>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.slope = j.at("slope").get<double>();
    cfg.lambdas.clear();
    for (const auto& l : j.at("lambdas"))
        cfg.lambdas.push_back({l.at("c1").get<double>(), l.at("c2").get<double>(),
                               l.at("f_ref").get<double>()});
    int heads = j.at("heads").get<int>();
    cfg.x_stack = GatStack{j.at("x_dims").get<std::vector<int>>(), heads, cfg.slope,
                           false, cfg.feature_count, 0};
    cfg.xa_stack = GatStack{j.at("xa_dims").get<std::vector<int>>(), heads, cfg.slope,
                            true, cfg.feature_count, cfg.mot_count};
    cfg.mu_hidden = j.at("mu_hidden").get<std::vector<int>>();
    cfg.q_hidden = j.at("q_hidden").get<std::vector<int>>();
    return cfg;
}

namespace {

constexpr char kCkptMagic[8] = {'S', 'P', 'L', 'A', 'N', 'C', 'K', 'P'};
constexpr uint32_t kCkptVersion = 1;

} // namespace

void save_checkpoint(const std::string& path, const ModelBundle& bundle) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    uint32_t version = kCkptVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    std::string header = nets_config_to_json(bundle.cfg).dump();
    uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(hlen));
    bundle.actor.save(out);
    bundle.critic.save(out);
    bundle.actor_target.save(out);
    bundle.critic_target.save(out);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kCkptVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
    ModelBundle b;
    b.cfg = nets_config_from_json(ojson::parse(header));
    b.actor = ad::ParamStore::load(in);
    b.critic = ad::ParamStore::load(in);
    b.actor_target = ad::ParamStore::load(in);
    b.critic_target = ad::ParamStore::load(in);
    return b;
}

// ---------------------------------------------------------------------------
// Target computation (raw math; no gradients needed)

namespace {

const SkuTopology& sample_topology(const Corpus& corpus, const Transition& tr) {
    return corpus.skus.at(static_cast<size_t>(tr.sku))
        .topologies.at(static_cast<size_t>(tr.topology));
}

Eigen::VectorXd per_lambda_reward(const NodeStateMatrix& x_next, const NetsConfig& cfg) {
    Eigen::VectorXd r(cfg.lambda_count());
    for (int l = 0; l < cfg.lambda_count(); ++l)
        r[l] = network_reward(x_next, cfg.lambdas[static_cast<size_t>(l)]);
    return r;
}

} // namespace

Eigen::VectorXd td_target(const Corpus& corpus, const Transition& tr, const ModelBundle& bundle,
                          bool warmup) {
    const auto& st = sample_topology(corpus, tr);
    const NetsConfig& cfg = bundle.cfg;
    Eigen::VectorXd y = per_lambda_reward(tr.x_next, cfg);
    if (warmup) {
        Eigen::VectorXd q = network_values(st.topo, st.reversed, tr.x_next, tr.a_next, 0,
                                           bundle.critic_target, cfg);
        y += cfg.gamma * q;
    } else {
        ActionTensor mu = policy_actions(st.topo, st.reversed, tr.x_next, tr.cap_next,
                                         bundle.actor_target, cfg);
        for (int l = 0; l < cfg.lambda_count(); ++l) {
            Eigen::VectorXd q =
                network_values(st.topo, st.reversed, tr.x_next, mu, l, bundle.critic_target, cfg);
            y[l] += cfg.gamma * q[l];
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// Steps

double critic_step(const Corpus& corpus, std::span<const Transition* const> batch,
                   ModelBundle& bundle, ad::GradStore& grads, ad::Adam& opt, bool warmup,
                   ad::Tape& tape) {
    if (batch.empty()) throw std::invalid_argument("critic_step: empty batch");
    const NetsConfig& cfg = bundle.cfg;
    const double norm = 1.0 / (static_cast<double>(batch.size()) * cfg.lambda_count());
    grads.zero();
    double total = 0.0;
    for (const Transition* tr : batch) {
        Eigen::VectorXd y = td_target(corpus, *tr, bundle, warmup);
        const auto& st = sample_topology(corpus, *tr);
        tape.clear();
        int sc = tape.attach(bundle.critic, &grads);
        auto qs = value_forward_logged(tape, st.topo, st.reversed, tr->x, tr->a, 0, bundle.critic,
                                       sc, cfg);
        std::vector<ad::Var> residuals;
        residuals.reserve(qs.size());
        for (int l = 0; l < cfg.lambda_count(); ++l)
            residuals.push_back(
                tape.sq_diff_sum(qs[static_cast<size_t>(l)], tape.input_scalar(y[l])));
        ad::Var loss = tape.scale(tape.add_many(residuals), norm);
        total += tape.value_scalar(loss);
        tape.backward(loss);
    }
    if (!std::isfinite(total))
        throw std::runtime_error("critic_step: non-finite TD loss (" + std::to_string(total) +
                                 ")");
    opt.step(bundle.critic, grads);
    return total;
}

double actor_step(const Corpus& corpus, std::span<const Transition* const> batch,
                  ModelBundle& bundle, ad::GradStore& grads, ad::Adam& opt, double eta,
                  ad::Tape& tape) {
    if (batch.empty()) throw std::invalid_argument("actor_step: empty batch");
    const NetsConfig& cfg = bundle.cfg;
    const double norm = 1.0 / (static_cast<double>(batch.size()) * cfg.lambda_count());
    grads.zero();
    double total = 0.0;
    for (const Transition* tr : batch) {
        const auto& st = sample_topology(corpus, *tr);
        tape.clear();
        int sa = tape.attach(bundle.actor, &grads);
        int sc = tape.attach(bundle.critic, nullptr); // frozen during the actor step
        PolicyVars pv = policy_forward(tape, st.topo, st.reversed, tr->x, tr->cap, bundle.actor,
                                       sa, cfg);
        auto qs = value_forward_policy(tape, st.topo, st.reversed, tr->x, pv, bundle.critic, sc,
                                       cfg);
        std::vector<ad::Var> terms;
        terms.reserve(qs.size());
        for (int l = 0; l < cfg.lambda_count(); ++l) {
            ad::Var term = qs[static_cast<size_t>(l)];
            if (eta != 0.0) {
                ad::Var reg = behavioral_regularizer(tape, st.topo, tr->x,
                                                     pv.edge_actions[static_cast<size_t>(l)],
                                                     cfg.lambdas[static_cast<size_t>(l)].f_ref);
                term = tape.add(term, tape.scale(reg, eta));
            }
            terms.push_back(term);
        }
        ad::Var objective = tape.scale(tape.add_many(terms), norm);
        total += tape.value_scalar(objective);
        // Adam minimizes; ascend by backpropagating the negated objective.
        tape.backward(tape.scale(objective, -1.0));
    }
    if (!std::isfinite(total))
        throw std::runtime_error("actor_step: non-finite objective (" + std::to_string(total) +
                                 ")");
    opt.step(bundle.actor, grads);
    return total;
}

double td_loss(const Corpus& corpus, const TransitionDataset& ds, const ModelBundle& bundle,
               bool warmup) {
    if (ds.empty()) throw std::invalid_argument("td_loss: empty dataset");
    const NetsConfig& cfg = bundle.cfg;
    double total = 0.0;
    for (const Transition& tr : ds.samples) {
        Eigen::VectorXd y = td_target(corpus, tr, bundle, warmup);
        const auto& st = sample_topology(corpus, tr);
        Eigen::VectorXd q =
            network_values(st.topo, st.reversed, tr.x, tr.a, 0, bundle.critic, cfg);
        total += (y - q).squaredNorm() / cfg.lambda_count();
    }
    return total / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------
// Full loop

TrainResult train(const Corpus& corpus, const TransitionDataset& train_set,
                  const TransitionDataset* val_set, ModelBundle& bundle, const TrainerConfig& tc) {
    tc.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training dataset");
    if (!corpus.scaled) throw std::invalid_argument("train: corpus must be scaled");

    const long iters_per_epoch =
        (static_cast<long>(train_set.size()) + tc.batch_size - 1) / tc.batch_size;
    const long warmup_iters = tc.warmup_epochs * iters_per_epoch;

    ad::GradStore actor_grads, critic_grads;
    actor_grads.init_like(bundle.actor);
    critic_grads.init_like(bundle.critic);
    ad::AdamConfig opt_cfg;
    opt_cfg.lr = tc.lr;
    ad::Adam actor_opt(bundle.actor, opt_cfg);
    ad::Adam critic_opt(bundle.critic, opt_cfg);
    ad::Tape tape;

    if (!tc.checkpoint_dir.empty()) fs::create_directories(tc.checkpoint_dir);

    TrainResult result;
    long iter = 0;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(tc.seed, "shuffle-epoch-" + std::to_string(epoch)));
        shuffle_rng.shuffle(order);

        double critic_sum = 0.0, actor_sum = 0.0;
        long actor_steps = 0;
        bool epoch_warmup = iter < warmup_iters;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(tc.batch_size)) {
            size_t stop = std::min(order.size(), start + static_cast<size_t>(tc.batch_size));
            std::vector<const Transition*> batch;
            batch.reserve(stop - start);
            for (size_t i = start; i < stop; ++i)
                batch.push_back(&train_set.samples[order[i]]);

            bool warmup = iter < warmup_iters;
            critic_sum += critic_step(corpus, batch, bundle, critic_grads, critic_opt, warmup,
                                      tape);
            if (warmup) {
                ad::soft_update(bundle.critic_target, bundle.critic, tc.tau);
            } else {
                actor_sum += actor_step(corpus, batch, bundle, actor_grads, actor_opt, tc.eta,
                                        tape);
                ++actor_steps;
                ad::soft_update(bundle.actor_target, bundle.actor, tc.tau);
                ad::soft_update(bundle.critic_target, bundle.critic, tc.tau);
            }
            ++iter;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.warmup = epoch_warmup;
        stats.critic_loss = critic_sum / static_cast<double>(iters_per_epoch);
        stats.actor_objective = actor_steps > 0
                                    ? actor_sum / static_cast<double>(actor_steps)
                                    : std::numeric_limits<double>::quiet_NaN();
        if (val_set && !val_set->empty())
            stats.val_td_loss = td_loss(corpus, *val_set, bundle, iter < warmup_iters);
        result.history.push_back(stats);

        if (!tc.checkpoint_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
            save_checkpoint((fs::path(tc.checkpoint_dir) / name).string(), bundle);
        }

        // early stopping on the validation plateau, armed after warmup
        if (stats.val_td_loss && !epoch_warmup) {
            double v = *stats.val_td_loss;
            if (v < best_val - tc.min_delta) {
                best_val = v;
                result.best_epoch = epoch;
                since_best = 0;
            } else {
                ++since_best;
                if (tc.early_stopping && since_best >= tc.patience) break;
            }
        }
    }
    if (result.best_epoch == 0) result.best_epoch = static_cast<int>(result.history.size());
    result.iterations = iter;

    if (!tc.checkpoint_dir.empty()) {
        ojson meta;
        meta["seed"] = tc.seed;
        meta["config"] = {{"epochs", tc.epochs},
                          {"batch_size", tc.batch_size},
                          {"lr", tc.lr},
                          {"tau", tc.tau},
                          {"eta", tc.eta},
                          {"warmup_epochs", tc.warmup_epochs},
                          {"early_stopping", tc.early_stopping},
                          {"patience", tc.patience},
                          {"min_delta", tc.min_delta}};
        meta["nets"] = nets_config_to_json(bundle.cfg);
        meta["warmup_iterations"] = warmup_iters;
        meta["iterations"] = result.iterations;
        meta["best_epoch"] = result.best_epoch;
        ojson hist = ojson::array();
        for (const auto& s : result.history) {
            ojson e;
            e["epoch"] = s.epoch;
            e["warmup"] = s.warmup;
            e["critic_loss"] = s.critic_loss;
            if (!s.warmup) e["actor_objective"] = s.actor_objective;
            if (s.val_td_loss) e["val_td_loss"] = *s.val_td_loss;
            hist.push_back(std::move(e));
        }
        meta["epochs_run"] = std::move(hist);
        std::ofstream out(fs::path(tc.checkpoint_dir) / "metadata.json", std::ios::binary);
        out << meta.dump(2) << "\n";
        if (!out) throw std::runtime_error("cannot write training metadata");
    }
    return result;
}

} // namespace splan
