// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// Tolerances are fixed here; the compliance rows use the shipped configs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mfnn/analysis.hpp"
#include "mfnn/campaign.hpp"
#include "mfnn/config.hpp"
#include "mfnn/ledger.hpp"
#include "mfnn/models.hpp"
#include "mfnn/pipeline.hpp"
#include "mfnn/rng.hpp"
#include "mfnn/verify.hpp"

using namespace mfnn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = MFNN_CONFIG_DIR;

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mfnn_accept_" + name);
    fs::remove_all(p);
    return p;
}

config::CampaignConfig load_into(const std::string& file, const fs::path& out) {
    std::ifstream f(kConfigDir / file);
    json doc = json::parse(f, nullptr, true, true);
    doc["output_dir"] = out.string();
    return config::parse_config(doc);
}

const models::ForwardModel& ode() { return models::model_catalog(models::ModelId::Ode15); }
const models::ForwardModel& wave() { return models::model_catalog(models::ModelId::Wave16); }

// ---------------------------------------------------------------------------

void gradient_criterion() {
    const auto t0 = std::chrono::steady_clock::now();
    const nnet::Architecture archs[] = {
        {1, {20, 20, 20, 20}, 1}, {2, {20, 20, 20, 20}, 1}, {2, {30, 30, 30, 30}, 1}, {3, {30, 30, 30, 30}, 1}};
    double worst = 0;
    for (const auto& a : archs) worst = std::max(worst, verify::gradient_discrepancy(a, 50, 1000 + a.input_width));
    const double t = seconds_since(t0);
    report("gradient correctness", worst <= 1e-4 && t < 10.0,
           fmt("max rel err %.3g (<= 1e-4) over 4 archs x 50 cases, %.2f s (< 10 s)", worst, t));
}

void order_criterion() {
    const auto t0 = std::chrono::steady_clock::now();
    const double rk = verify::ode_observed_order(0.025, 0.0125, 20, 11);
    const double fd = verify::wave_observed_order(1.0 / 32, 1.0 / 64, 20, 12);
    const double t = seconds_since(t0);
    const bool ok = rk >= 1.7 && rk <= 2.3 && fd >= 1.7 && fd <= 2.3 && t < 120.0;
    report("solver orders", ok, fmt("rk2 %.3f, fd wave %.3f (in [1.7, 2.3]) on 20 draws, %.1f s (< 120 s)", rk, fd, t));
}

void residual_criterion() {
    const auto t0 = std::chrono::steady_clock::now();
    const double r_ode = verify::ode_residual_max(1000, 21);
    const double r_wave = verify::wave_residual_max(500, 22);
    const double t = seconds_since(t0);
    report("manufactured residuals", r_ode <= 1e-6 && r_wave <= 1e-5 && t < 10.0,
           fmt("ode %.2g (<= 1e-6), wave scaled %.2g (<= 1e-5), %.2f s", r_ode, r_wave, t));
}

struct ComplianceRun {
    analysis::ComplianceReport report;
    double max_error = 0;
    pipeline::CampaignOutcome first;
};

ComplianceRun run_compliance(const config::CampaignConfig& cfg, std::size_t tol_index) {
    const auto res = campaign::resolve(cfg);
    ComplianceRun out;
    std::vector<pipeline::EstimatorResult> results;
    pipeline::FidelityData cache;
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
        auto o = campaign::run_mfnnmc(cfg, res, tol_index, rep, 1, rep == 0 ? nullptr : &cache);
        const double err = cfg.error_mode == analysis::ErrorMode::Relative ? *o.result.error_rel : *o.result.error_abs;
        out.max_error = std::max(out.max_error, err);
        results.push_back(o.result);
        if (rep == 0) {
            cache = o.fidelity;
            out.first = std::move(o);
        }
    }
    out.report = analysis::check_tolerance_compliance(results, config::budget_for(cfg, cfg.tolerances[tol_index]));
    return out;
}

pipeline::CampaignOutcome ode_compliance() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = load_into("ode.json", scratch("ode"));
    const auto& e = cfg.tolerances[0];
    auto r = run_compliance(cfg, 0);
    const auto& d = r.first.design;
    const bool setup = e.tol == 1e-2 && r.first.result.n_samples == 135000 && d.m1() == 61 && d.m2() == 180 &&
                       campaign::resolve(cfg).h_hf[0] == 0.1 && e.h_lf == 0.5;
    report("ode tolerance compliance", setup && r.report.runs == 20 && r.report.compliant >= 19,
           fmt("%zu/%zu runs with rel err <= 1e-2 (need 19/20), worst %.3g; N=%zu M1=%zu M2=%zu; %.0f s",
               r.report.compliant, r.report.runs, r.max_error, r.first.result.n_samples, d.m1(), d.m2(),
               seconds_since(t0)));
    return std::move(r.first);
}

void pde_compliance() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = load_into("pde.json", scratch("pde"));
    const auto& e = cfg.tolerances[0];
    auto r = run_compliance(cfg, 0);
    const bool setup = e.tol == 1e-1 && r.first.result.n_samples == 150 && campaign::resolve(cfg).h_hf[0] == 1.0 / 32 &&
                       e.h_lf == 0.05;
    report("pde tolerance compliance", setup && r.report.runs == 20 && r.report.compliant >= 19,
           fmt("%zu/%zu runs with abs err <= 1e-1 (need 19/20), worst %.3g; N=%zu; %.0f s", r.report.compliant,
               r.report.runs, r.max_error, r.first.result.n_samples, seconds_since(t0)));
}

double pilot_variance(const models::ForwardModel& m, std::size_t n, std::uint64_t seed, double* mean) {
    const pipeline::FunctionSurrogate q(m.dim(), [&](std::span<const double> y) { return m.qoi_exact(y); });
    const auto r = pipeline::estimate_mfnnmc(q, pipeline::SampleStream{m.parameter_domain(), n, seed});
    if (mean) *mean = r.estimate;
    return r.sample_variance;
}

void cost_slopes(const pipeline::CampaignOutcome& ode_run) {
    const auto t0 = std::chrono::steady_clock::now();
    // ODE: h from the anchored constant on the ladder, N from the variance
    const auto cfg = config::load_config(kConfigDir / "ode.json");
    const double c = config::resolve_bias_constant(cfg, 0);
    double mean = 0;
    const double v = pilot_variance(ode(), 100000, 41, &mean);
    const pipeline::NetworkSurrogate nn2(ode_run.bundle.nn2, ode_run.bundle.scaling.y);
    std::vector<std::pair<double, double>> hf_pts, pred_pts;
    std::string hs;
    for (double tol : {1e-2, 3e-3, 1e-3}) {
        config::ToleranceEntry e = cfg.tolerances[0];
        e.tol = tol;
        e.h_hf.reset();
        const double h = config::resolve_h_hf(cfg, e, c);
        const auto b = config::budget_for(cfg, e);
        const std::size_t n = analysis::select_n_samples(b, v, mean);
        const double w_hf = pipeline::measure_solve_cost(ode(), h, 20000, 42);
        hf_pts.emplace_back(tol, static_cast<double>(n) * w_hf);
        const auto r = pipeline::estimate_mfnnmc(nn2, pipeline::SampleStream{ode().parameter_domain(), n, 43});
        pred_pts.emplace_back(tol, r.cost.predict_nn2);
        hs += fmt(" %g:h=%g,N=%zu", tol, h, n);
    }
    const double s_hf = analysis::fit_cost_slope(hf_pts), s_pred = analysis::fit_cost_slope(pred_pts);

    // wave: anchored h (1/32 -> 1/64), N scaled from the 1e-1 row
    const auto pcfg = config::load_config(kConfigDir / "pde.json");
    const double pc = config::resolve_bias_constant(pcfg, 0);
    const double pv = pilot_variance(wave(), 20000, 44, nullptr);
    std::vector<std::pair<double, double>> pde_pts;
    for (double tol : {1e-1, 3e-2}) {
        config::ToleranceEntry e = pcfg.tolerances[0];
        e.tol = tol;
        e.h_hf.reset();
        const double h = config::resolve_h_hf(pcfg, e, pc);
        const std::size_t n = analysis::select_n_samples(config::budget_for(pcfg, e), pv);
        const double w_hf = pipeline::measure_solve_cost(wave(), h, h < 0.02 ? 4 : 20, 45);
        pde_pts.emplace_back(tol, static_cast<double>(n) * w_hf);
        hs += fmt(" wave %g:h=1/%g,N=%zu", tol, 1.0 / h, n);
    }
    const double s_pde = analysis::fit_cost_slope(pde_pts);
    const bool ok = s_hf >= 2.2 && s_hf <= 2.8 && s_pred >= 1.7 && s_pred <= 2.3 && s_pde >= 3.0 && s_pde <= 4.0;
    report("cost-scaling slopes", ok,
           fmt("ode hfmc %.2f (in [2.2, 2.8]), ode prediction %.2f (in [1.7, 2.3]), pde hfmc %.2f (in [3, 4]);%s; "
               "%.0f s single thread",
               s_hf, s_pred, s_pde, hs.c_str(), seconds_since(t0)));
}

void oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    const pipeline::FunctionSurrogate q(1, [](std::span<const double> y) { return ode().qoi_exact(y); });
    auto a = pipeline::estimate_mfnnmc(q, pipeline::SampleStream{ode().parameter_domain(), 1000000, 51});
    a.set_reference(ode().reference_mean());
    const double band_a = 4.0 * std::sqrt(a.sample_variance / 1e6);

    const double h = 0.1;
    const std::vector<double> steps{0.1, 0.05};
    const double c = analysis::fit_bias_constant(ode(), steps, 200, 52).constant;
    auto b = pipeline::estimate_hfmc(ode(), h, pipeline::SampleStream{ode().parameter_domain(), 135000, 53});
    b.set_reference(ode().reference_mean());
    const double band_b = 4.0 * std::sqrt(b.sample_variance / 135000.0) + c * h * h;
    const double t = seconds_since(t0);
    report("estimator oracle equivalence", *a.error_abs <= band_a && *b.error_abs <= band_b && t < 60.0,
           fmt("oracle N=1e6 err %.3g (<= 4 sigma %.3g); hfmc h=0.1 N=1.35e5 err %.3g (<= %.3g); %.1f s",
               *a.error_abs, band_a, *b.error_abs, band_b, t));
}

void exactness(const pipeline::CampaignOutcome& ode_run) {
    // case split: Y_I values are the solver's bytes
    const auto& aug = ode_run.augmented;
    const auto& fd = ode_run.fidelity;
    const std::size_t m1 = ode_run.design.m1();
    bool split = aug.size() == ode_run.design.m() && fd.hf_on_I.size() == m1 &&
                 std::memcmp(aug.values.data(), fd.hf_on_I.data(), m1 * sizeof(double)) == 0;
    for (std::size_t i = 0; i < aug.size(); ++i)
        split = split && aug.provenance[i] == (i < m1 ? pipeline::Provenance::Solver : pipeline::Provenance::Nn1);

    // ledger: campaign ledger plus random ones
    bool ledger = ode_run.result.cost.total_mfnnmc == ode_run.result.cost.six_term_sum();
    SplitMix64 rng(61);
    for (std::size_t k = 0; k < 1000; ++k) {
        const analysis::SampleCounts n{1000 + k, 250, 750 + k, 100000 + 37 * k};
        const analysis::PhaseTimes w{rng.uniform(0, 1e-4), rng.uniform(0, 1e-3), rng.uniform(0, 10),
                                     rng.uniform(0, 1e-6), rng.uniform(0, 10),   rng.uniform(0, 1e-6)};
        const auto l = analysis::build_ledger(n, w);
        const double sum = ((((l.lf_solves + l.hf_solves) + l.train_nn1) + l.predict_nn1) + l.train_nn2) + l.predict_nn2;
        ledger = ledger && l.total_mfnnmc == sum && l.total_mfnnmc == l.six_term_sum() &&
                 l.total_hfmc == static_cast<double>(n.n) * w.w_hf;
    }
    report("augmentation and ledger exactness", split && ledger,
           fmt("Y_I bit-exact %s on %zu points, ledger totals exact %s over 1001 ledgers", split ? "yes" : "no", m1,
               ledger ? "yes" : "no"));
}

json strip_timing(json j) {
    for (const char* k : {"terms", "unit", "total_hfmc", "total_mfnnmc"}) j["ledger"].erase(k);
    return j;
}

void determinism() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path ra = scratch("det_a"), rb = scratch("det_b");
    campaign::run_sweep(load_into("smoke_ode.json", ra), {.threads = 1});
    campaign::run_sweep(load_into("smoke_ode.json", rb), {.threads = 3});
    std::size_t files = 0, diffs = 0;
    for (const auto& entry : fs::recursive_directory_iterator(ra)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), ra);
        const std::string name = rel.filename().string();
        ++files;
        if (name == "result.json") {
            json a = strip_timing(json::parse(slurp(entry.path())));
            json b = strip_timing(json::parse(slurp(rb / rel)));
            // output_dir is echoed with the config and its hash
            for (const char* k : {"config", "config_hash"}) {
                a.erase(k);
                b.erase(k);
            }
            diffs += a != b;
        } else if (name == "sweep.json") {
            json a = json::parse(slurp(entry.path())), b = json::parse(slurp(rb / rel));
            a.erase("config");
            b.erase("config");
            a.erase("config_hash");
            b.erase("config_hash");
            diffs += a != b;
        } else if (name == "costs.csv") {
            --files;  // timings only beyond the keys
        } else {
            diffs += slurp(entry.path()) != slurp(rb / rel);
        }
    }
    report("determinism", files > 10 && diffs == 0,
           fmt("%zu artifact files compared across two seeded smoke sweeps (1 and 3 threads), %zu differ; %.1f s",
               files, diffs, seconds_since(t0)));
}

}  // namespace

int main() {
    std::printf("mfnn acceptance\n");
    gradient_criterion();
    order_criterion();
    residual_criterion();
    oracle_equivalence();
    determinism();
    const auto ode_run = ode_compliance();
    exactness(ode_run);
    cost_slopes(ode_run);
    pde_compliance();
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
