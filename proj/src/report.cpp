#include "splan/cliapp.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <openssl/evp.h>

namespace splan {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Artifact IO

void write_text_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path);
}

ojson read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return ojson::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::string format_number(double v) {
    if (!std::isfinite(v)) return "";
    return ojson(v).dump(); // shortest decimal that round-trips
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 init failed");
    }
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        if (in.gcount() > 0 &&
            EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount())) != 1) {
            EVP_MD_CTX_free(ctx);
            throw std::runtime_error("sha256 update failed");
        }
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, md, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 final failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

ojson write_manifest(const std::string& dir, const std::string& command, const RunConfig& cfg,
                     const std::vector<std::string>& files) {
    ojson m;
    m["command"] = command;
    m["seed"] = cfg.seed;
    m["config"] = cfg.to_json();
    std::vector<std::string> sorted = files;
    std::sort(sorted.begin(), sorted.end());
    ojson arts = ojson::array();
    for (const auto& f : sorted) {
        fs::path p = fs::path(dir) / f;
        ojson a;
        a["file"] = f;
        a["bytes"] = static_cast<uint64_t>(fs::file_size(p));
        a["sha256"] = sha256_file(p.string());
        arts.push_back(std::move(a));
    }
    m["artifacts"] = std::move(arts);
    write_text_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
    return m;
}

// ---------------------------------------------------------------------------
// report: render an evaluation document into CSV tables + a comparison summary

namespace {

double num_or_nan(const ojson& j) {
    return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

// one CSV field per step from a percent series (null when undefined)
std::string series_field(const ojson& series, const char* key, int step) {
    const ojson& arr = series.at(key);
    if (!arr.is_array()) return "";
    return format_number(num_or_nan(arr.at(static_cast<size_t>(step))));
}

} // namespace

ojson cmd_report(const std::string& eval_dir, const std::string& out_dir) {
    ojson ev = read_json_file((fs::path(eval_dir) / "evaluation.json").string());
    if (ev.value("command", std::string()) != "evaluate")
        throw std::runtime_error(eval_dir + "/evaluation.json is not an evaluation artifact");
    RunConfig cfg = RunConfig::from_json(ev.at("config"));
    static const std::vector<std::string> policies = {"trained", "rule", "history"};

    std::string pcsv =
        "objective_index,c_es,c_oos,policy,step,"
        "es_pct_mean,es_pct_sd,oos_pct_mean,oos_pct_sd,cost_pct_mean,cost_pct_sd\n";
    std::string scsv =
        "objective_index,c_es,c_oos,policy,cost_total,es_total,oos_total,oos_pct_final\n";
    ojson summary;
    summary["command"] = "report";
    summary["seed"] = cfg.seed;
    summary["config"] = ev.at("config");
    ojson sobjs = ojson::array();

    const ojson& objs = ev.at("objectives");
    for (size_t o = 0; o < objs.size(); ++o) {
        const ojson& jo = objs.at(o);
        std::string c_es = format_number(jo.at("c_es").get<double>());
        std::string c_oos = format_number(jo.at("c_oos").get<double>());

        ojson so;
        so["c_es"] = jo.at("c_es");
        so["c_oos"] = jo.at("c_oos");
        so["lambda_star"] = jo.at("lambda_star");
        so["lambda"] = jo.at("lambda");
        ojson totals, finals;
        for (const auto& p : policies) {
            const ojson& blk = jo.at("policies").at(p);
            const ojson& pct = blk.at("percent");
            int steps = pct.at("oos").at("mean").is_array()
                            ? static_cast<int>(pct.at("oos").at("mean").size())
                            : cfg.horizon;
            for (int s = 0; s < steps; ++s)
                pcsv += std::to_string(o) + ',' + c_es + ',' + c_oos + ',' + p + ',' +
                        std::to_string(s + 1) + ',' + series_field(pct.at("es"), "mean", s) +
                        ',' + series_field(pct.at("es"), "sd", s) + ',' +
                        series_field(pct.at("oos"), "mean", s) + ',' +
                        series_field(pct.at("oos"), "sd", s) + ',' +
                        series_field(pct.at("cost"), "mean", s) + ',' +
                        series_field(pct.at("cost"), "sd", s) + '\n';
            totals[p] = blk.at("totals");
            finals[p] = blk.at("oos_pct_final");
            scsv += std::to_string(o) + ',' + c_es + ',' + c_oos + ',' + p + ',' +
                    format_number(num_or_nan(blk.at("totals").at("cost"))) + ',' +
                    format_number(num_or_nan(blk.at("totals").at("es"))) + ',' +
                    format_number(num_or_nan(blk.at("totals").at("oos"))) + ',' +
                    format_number(num_or_nan(blk.at("oos_pct_final"))) + '\n';
        }
        so["totals"] = std::move(totals);
        so["oos_pct_final"] = std::move(finals);

        double cost_trained =
            num_or_nan(jo.at("policies").at("trained").at("totals").at("cost"));
        double cost_history =
            num_or_nan(jo.at("policies").at("history").at("totals").at("cost"));
        double oos_trained = num_or_nan(jo.at("policies").at("trained").at("oos_pct_final"));
        double oos_rule = num_or_nan(jo.at("policies").at("rule").at("oos_pct_final"));
        ojson checks;
        checks["trained_cost_below_history"] =
            std::isfinite(cost_trained) && std::isfinite(cost_history)
                ? ojson(cost_trained < cost_history)
                : ojson(nullptr);
        checks["trained_final_oos_below_rule"] =
            std::isfinite(oos_trained) && std::isfinite(oos_rule)
                ? ojson(oos_trained < oos_rule)
                : ojson(nullptr);
        so["checks"] = std::move(checks);
        sobjs.push_back(std::move(so));
    }
    summary["objectives"] = std::move(sobjs);

    // directional risk response: objectives with a larger shortage-to-excess
    // cost ratio should select a reference level at least as high
    {
        std::vector<std::pair<double, double>> ratio_fref; // (c_oos/c_es, f_ref)
        for (const auto& jo : objs) {
            double ces = jo.at("c_es").get<double>();
            double ratio = ces > 0.0 ? jo.at("c_oos").get<double>() / ces
                                     : std::numeric_limits<double>::infinity();
            ratio_fref.emplace_back(ratio, jo.at("lambda").at("f_ref").get<double>());
        }
        std::stable_sort(ratio_fref.begin(), ratio_fref.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        bool ordered = true;
        ojson detail = ojson::array();
        for (size_t i = 0; i < ratio_fref.size(); ++i) {
            if (i > 0 && ratio_fref[i].second < ratio_fref[i - 1].second - 1e-12)
                ordered = false;
            detail.push_back(
                {{"cost_ratio", ratio_fref[i].first}, {"f_ref", ratio_fref[i].second}});
        }
        summary["risk_response"] = {{"ordered", ordered}, {"selections", std::move(detail)}};
    }
    if (ev.contains("validation")) summary["validation"] = ev.at("validation");

    std::string hcsv = "key,bin_lo,bin_hi,count\n";
    for (const auto& [key, h] : ev.at("imbalance_histograms").items()) {
        const ojson& edges = h.at("edges");
        const ojson& counts = h.at("counts");
        for (size_t b = 0; b < counts.size(); ++b)
            hcsv += key + ',' + format_number(edges.at(b).get<double>()) + ',' +
                    format_number(edges.at(b + 1).get<double>()) + ',' +
                    format_number(counts.at(b).get<double>()) + '\n';
    }

    write_text_file((fs::path(out_dir) / "percent_metrics.csv").string(), pcsv);
    write_text_file((fs::path(out_dir) / "histograms.csv").string(), hcsv);
    write_text_file((fs::path(out_dir) / "summary.csv").string(), scsv);
    write_text_file((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
    return write_manifest(out_dir, "report", cfg,
                          {"percent_metrics.csv", "histograms.csv", "summary.csv",
                           "summary.json"});
}

} // namespace splan
