#pragma once

#include <string>
#include <vector>

#include "splan/baselines.hpp"
#include "splan/simkit.hpp"
#include "splan/synthgen.hpp"

namespace splan {

// One reproducibility document for a whole run. Every command takes the same
// config; flags override individual fields. The top-level seed is the only
// randomness source: generator and trainer sub-seeds are derived from it and
// any seed keys inside the nested sections are ignored.
struct RunConfig {
    uint64_t seed = 1;
    int feature_count = 4; // K, profile entries per node
    int horizon = 13;      // J, planning/evaluation intervals
    int mc_runs = 50;      // Z, Monte-Carlo draws
    std::vector<CostObjective> objectives{{1.0, 1.0, 1.0}, {1.0, 5.0, 1.0}};
    GenConfig gen;         // synthetic-data settings (seed derived)
    NetsConfig nets;       // model shape + risk-preference grid
    TrainerConfig trainer; // optimization schedule (seed derived)

    RunConfig();

    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::ordered_json& j); // partial overrides
    void validate() const;

    RolloutConfig rollout(uint64_t sub_seed) const;
};

// Reads a config document; an empty path yields the defaults.
RunConfig load_run_config(const std::string& path);

// ---------------------------------------------------------------------------
// Run-directory plumbing. Every command writes its artifacts under one
// directory plus a manifest listing each file with its SHA-256 content hash.
// Nothing embeds wall-clock time, so reruns are byte-identical.

std::string sha256_file(const std::string& path);

// Artifact IO. JSON artifacts are two-space indented with a trailing newline;
// numbers in CSV tables use the shortest round-trip decimal form, with
// non-finite values rendered as empty fields.
void write_text_file(const std::string& path, const std::string& content);
nlohmann::ordered_json read_json_file(const std::string& path);
std::string format_number(double v);

// Writes <dir>/manifest.json covering `files` (paths relative to dir).
nlohmann::ordered_json write_manifest(const std::string& dir, const std::string& command,
                                      const RunConfig& cfg,
                                      const std::vector<std::string>& files);

// ---------------------------------------------------------------------------
// Commands. Each returns the manifest it wrote and throws on failure; the
// executable maps exceptions to a machine-readable error record and a
// nonzero exit status.

// Synthesizes a corpus into out_dir (dataset files + manifest).
nlohmann::ordered_json cmd_gen(const RunConfig& cfg, const std::string& out_dir);

// Trains on the corpus in data_dir: per-epoch checkpoints, the selected
// model (model.ckpt), loss curves, and a training summary.
nlohmann::ordered_json cmd_train(const RunConfig& cfg, const std::string& data_dir,
                                 const std::string& out_dir);

// Risk-preference selection on the validation window: per-objective cost
// tables and the chosen preference per objective.
nlohmann::ordered_json cmd_validate(const RunConfig& cfg, const std::string& data_dir,
                                    const std::string& model_path, const std::string& out_dir);

// Monte-Carlo plan for one SKU and start week under one objective.
nlohmann::ordered_json cmd_plan(const RunConfig& cfg, const std::string& data_dir,
                                const std::string& model_path, const std::string& sku_id,
                                int week, int objective_index, const std::string& out_dir);

// Receding-horizon evaluation on the test window: the trained policy (with
// the validation-selected preference per objective) against the rule-based
// baseline and the logged behavioral history, plus percent metrics and
// imbalance histograms. lambda_override >= 0 skips validation and pins the
// preference index for every objective.
nlohmann::ordered_json cmd_evaluate(const RunConfig& cfg, const std::string& data_dir,
                                    const std::string& model_path, const std::string& out_dir,
                                    int lambda_override = -1);

// Renders an evaluation.json into CSV tables and a comparison summary.
nlohmann::ordered_json cmd_report(const std::string& eval_dir, const std::string& out_dir);

} // namespace splan
