// mfnn: command-line runner for MFNNMC / HFMC campaigns.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "mfnn/campaign.hpp"
#include "mfnn/config.hpp"
#include "mfnn/errors.hpp"
#include "mfnn/verify.hpp"

namespace fs = std::filesystem;
using namespace mfnn;

namespace {

std::vector<std::size_t> pick(const config::CampaignConfig& cfg, int tol_index) {
    if (tol_index < 0) {
        std::vector<std::size_t> all;
        for (std::size_t i = 0; i < cfg.tolerances.size(); ++i) all.push_back(i);
        return all;
    }
    if (static_cast<std::size_t>(tol_index) >= cfg.tolerances.size())
        throw ConfigError("--tol-index " + std::to_string(tol_index) + " is out of range");
    return {static_cast<std::size_t>(tol_index)};
}

void print_result(const std::string& label, const pipeline::EstimatorResult& r, bool cost_only = false) {
    std::printf("%-10s %-6s N=%-10zu", label.c_str(), pipeline::to_string(r.method).c_str(), r.n_samples);
    if (cost_only) std::printf(" estimate=n/a (cost only)");
    else std::printf(" estimate=%.10g variance=%.6g", r.estimate, r.sample_variance);
    if (r.reference) std::printf(" reference=%.10g abs_err=%.3e rel_err=%.3e", *r.reference, *r.error_abs, *r.error_rel);
    std::printf(" cost=%.4gs\n", r.method == pipeline::Method::HFMC ? r.cost.total_hfmc : r.cost.total_mfnnmc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-fidelity neural-network Monte Carlo campaigns"};
    app.require_subcommand(1);

    std::string config_path;
    std::size_t threads = 1;
    int tol_index = -1;
    std::size_t rep = 0;

    auto* mf = app.add_subcommand("mfnnmc", "run one MFNNMC campaign per tolerance");
    mf->add_option("-c,--config", config_path, "campaign config (JSON)")->required()->check(CLI::ExistingFile);
    mf->add_option("--tol-index", tol_index, "only this tolerance entry");
    mf->add_option("--rep", rep, "repetition index (selects the seeds)");
    mf->add_option("--threads", threads, "worker threads for solves and sampling")->check(CLI::PositiveNumber);

    bool cost_only = false;
    std::size_t n_override = 0;
    auto* hf = app.add_subcommand("hfmc", "run the high-fidelity Monte Carlo baseline");
    hf->add_option("-c,--config", config_path, "campaign config (JSON)")->required()->check(CLI::ExistingFile);
    hf->add_option("--tol-index", tol_index, "only this tolerance entry");
    hf->add_option("--rep", rep, "repetition index");
    hf->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    hf->add_flag("--cost-only", cost_only, "measure W_HF on a few solves and report N W_HF");
    hf->add_option("-n,--samples", n_override, "override N");

    std::size_t reps_override = 0;
    auto* sw = app.add_subcommand("sweep", "tolerances x repetitions with compliance and cost CSVs");
    sw->add_option("-c,--config", config_path, "campaign config (JSON)")->required()->check(CLI::ExistingFile);
    sw->add_option("--tol-index", tol_index, "only this tolerance entry");
    sw->add_option("--reps", reps_override, "override the number of repetitions");
    sw->add_option("--threads", threads, "worker threads (1 for cost benchmarks)")->check(CLI::PositiveNumber);

    std::string artifacts;
    auto* cmp = app.add_subcommand("compare", "cost-vs-tolerance table and fitted slopes from sweep artifacts");
    auto* cmp_cfg = cmp->add_option("-c,--config", config_path, "config whose hash the artifacts must match");
    cmp->add_option("-a,--artifacts", artifacts, "sweep output directory");

    bool quick = false;
    std::uint64_t seed = 20240601;
    auto* val = app.add_subcommand("validate", "gradient, convergence-order and residual checks");
    val->add_flag("--quick", quick, "fewer draws");
    val->add_option("--seed", seed, "seed of the random draws");

    int table_id = 0;
    std::string out_path;
    auto* tab = app.add_subcommand("emit-table", "CSV of one results table from sweep artifacts");
    tab->add_option("-a,--artifacts", artifacts, "sweep output directory")->required();
    tab->add_option("-t,--table", table_id, "table id (1-4)")->required()->check(CLI::Range(1, 4));
    tab->add_option("-o,--output", out_path, "write here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*val) {
            bool ok = true;
            for (const auto& c : verify::run_property_suite(seed, quick)) {
                std::printf("%-5s %-28s %.6g in [%g, %g]\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                            c.lower, c.upper);
                ok = ok && c.pass;
            }
            return ok ? 0 : 1;
        }

        if (*tab) {
            const std::string csv = campaign::emit_table(artifacts, table_id);
            if (out_path.empty()) {
                std::cout << csv;
            } else {
                std::ofstream f(out_path);
                if (!f) throw InputError("cannot write " + out_path);
                f << csv;
            }
            return 0;
        }

        if (*cmp) {
            config::CampaignConfig cfg;
            const bool have_cfg = cmp_cfg->count() > 0;
            if (have_cfg) cfg = config::load_config(config_path);
            if (artifacts.empty()) {
                if (!have_cfg) throw ConfigError("compare needs --artifacts or --config");
                artifacts = config::output_root(cfg).string();
            }
            const auto rep_ = campaign::compare(artifacts, have_cfg ? &cfg : nullptr);
            std::printf("%-10s %-12s %-14s %-14s %-14s\n", "label", "N", "HFMC", "MFNNMC", "prediction");
            for (const auto& r : rep_.rows)
                std::printf("%-10s %-12.6g %-14.6g %-14.6g %-14.6g\n", r.label.c_str(), r.n_samples, r.hfmc_total,
                            r.mfnnmc_total, r.prediction_total);
            for (const auto& s : rep_.slopes) std::printf("slope %-18s %.4f (%zu points)\n", s.series.c_str(), s.slope, s.points);
            return 0;
        }

        const config::CampaignConfig cfg = config::load_config(config_path);
        const campaign::Resolved res = campaign::resolve(cfg);

        if (*mf) {
            for (std::size_t i : pick(cfg, tol_index)) {
                const auto out = campaign::run_mfnnmc(cfg, res, i, rep, threads);
                print_result(cfg.tolerances[i].label, out.result);
            }
            return 0;
        }
        if (*hf) {
            campaign::HfmcOptions opt;
            opt.threads = threads;
            opt.cost_only = cost_only;
            if (n_override > 0) opt.n_samples = n_override;
            for (std::size_t i : pick(cfg, tol_index)) print_result(cfg.tolerances[i].label, campaign::run_hfmc(cfg, res, i, rep, opt), opt.cost_only);
            return 0;
        }
        if (*sw) {
            campaign::SweepOptions opt;
            opt.threads = threads;
            if (reps_override > 0) opt.repetitions = reps_override;
            if (tol_index >= 0) opt.tolerance_indices = pick(cfg, tol_index);
            const auto rows = campaign::run_sweep(cfg, opt);
            for (const auto& r : rows)
                std::printf("%-10s h_hf=%-8.4g runs=%zu compliant=%zu required=%zu max_err=%.3e %s\n", r.label.c_str(),
                            r.h_hf, r.compliance.runs, r.compliance.compliant, r.compliance.required, r.max_error,
                            r.compliance.pass ? "PASS" : "FAIL");
            std::printf("artifacts: %s\n", config::output_root(cfg).string().c_str());
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const StageError& e) {
        std::fprintf(stderr, "stage %s failed: %s\n", e.stage().c_str(), e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
