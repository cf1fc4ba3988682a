#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "splan/cliapp.hpp"

namespace {

using ojson = nlohmann::ordered_json;

std::string error_record(const std::string& type, const std::string& message) {
    ojson j;
    j["error"] = {{"type", type}, {"message", message}};
    return j.dump();
}

struct Flags {
    std::string config, data, model, out, eval_dir, sku;
    std::optional<uint64_t> seed;
    std::optional<int> sku_count, train_weeks, epochs, mc_runs, horizon;
    int week = 0;
    int objective = 0;
    int lambda_override = -1;

    splan::RunConfig make_config() const {
        ojson doc = config.empty() ? ojson::object() : splan::read_json_file(config);
        if (seed) doc["seed"] = *seed;
        if (sku_count) doc["gen"]["sku_count"] = *sku_count;
        if (train_weeks) doc["gen"]["train_weeks"] = *train_weeks;
        if (epochs) doc["trainer"]["epochs"] = *epochs;
        if (mc_runs) doc["mc_runs"] = *mc_runs;
        if (horizon) doc["horizon"] = *horizon;
        return splan::RunConfig::from_json(doc);
    }
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "run config JSON (defaults apply when omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "override the run seed");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"supply-network data generation, offline training, planning, and evaluation"};
    app.require_subcommand(1);
    Flags f;

    CLI::App* gen = app.add_subcommand("gen", "synthesize a corpus of SKU histories");
    add_common(gen, f);
    gen->add_option("--out", f.out, "output directory")->required();
    gen->add_option("--sku-count", f.sku_count, "override gen.sku_count");
    gen->add_option("--train-weeks", f.train_weeks, "override gen.train_weeks");

    CLI::App* train = app.add_subcommand("train", "train the policy/value networks offline");
    add_common(train, f);
    train->add_option("--data", f.data, "corpus directory")->required();
    train->add_option("--out", f.out, "output directory")->required();
    train->add_option("--epochs", f.epochs, "override trainer.epochs");

    CLI::App* validate =
        app.add_subcommand("validate", "select a risk preference per objective");
    add_common(validate, f);
    validate->add_option("--data", f.data, "corpus directory")->required();
    validate->add_option("--model", f.model, "model checkpoint")->required();
    validate->add_option("--out", f.out, "output directory")->required();
    validate->add_option("--mc-runs", f.mc_runs, "override mc_runs");

    CLI::App* plan = app.add_subcommand("plan", "Monte-Carlo plan for one SKU and week");
    add_common(plan, f);
    plan->add_option("--data", f.data, "corpus directory")->required();
    plan->add_option("--model", f.model, "model checkpoint")->required();
    plan->add_option("--sku", f.sku, "SKU id")->required();
    plan->add_option("--week", f.week, "absolute start week")->required();
    plan->add_option("--objective", f.objective, "objective index (default 0)");
    plan->add_option("--mc-runs", f.mc_runs, "override mc_runs");
    plan->add_option("--horizon", f.horizon, "override horizon");
    plan->add_option("--out", f.out, "output directory")->required();

    CLI::App* evaluate =
        app.add_subcommand("evaluate", "receding-horizon test-window evaluation");
    add_common(evaluate, f);
    evaluate->add_option("--data", f.data, "corpus directory")->required();
    evaluate->add_option("--model", f.model, "model checkpoint")->required();
    evaluate->add_option("--out", f.out, "output directory")->required();
    evaluate->add_option("--lambda", f.lambda_override,
                         "pin this risk-preference index instead of validating");
    evaluate->add_option("--mc-runs", f.mc_runs, "override mc_runs");

    CLI::App* report = app.add_subcommand("report", "render an evaluation into CSV tables");
    report->add_option("--eval", f.eval_dir, "directory holding evaluation.json")->required();
    report->add_option("--out", f.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) std::cerr << error_record("usage", e.what()) << "\n";
        return app.exit(e);
    }

    try {
        ojson manifest;
        std::string command;
        if (gen->parsed()) {
            command = "gen";
            manifest = splan::cmd_gen(f.make_config(), f.out);
        } else if (train->parsed()) {
            command = "train";
            manifest = splan::cmd_train(f.make_config(), f.data, f.out);
        } else if (validate->parsed()) {
            command = "validate";
            manifest = splan::cmd_validate(f.make_config(), f.data, f.model, f.out);
        } else if (plan->parsed()) {
            command = "plan";
            manifest = splan::cmd_plan(f.make_config(), f.data, f.model, f.sku, f.week,
                                       f.objective, f.out);
        } else if (evaluate->parsed()) {
            command = "evaluate";
            manifest = splan::cmd_evaluate(f.make_config(), f.data, f.model, f.out,
                                           f.lambda_override);
        } else if (report->parsed()) {
            command = "report";
            manifest = splan::cmd_report(f.eval_dir, f.out);
        }
        std::cout << "[" << command << "] " << manifest.at("artifacts").size()
                  << " artifact(s) under " << f.out << "\n";
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << error_record("config", e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << error_record("runtime", e.what()) << "\n";
        return 1;
    }
}
