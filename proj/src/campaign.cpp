#include "mfnn/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mfnn/errors.hpp"
#include "mfnn/json_io.hpp"
#include "mfnn/rng.hpp"

namespace mfnn::campaign {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string rep_name(const char* prefix, std::size_t rep) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, rep);
    return buf;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write " + path.string());
    f << body;
}

json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("missing artifact " + path.string());
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

ToleranceSummary summarize(const std::string& label, double tol, double h_lf, double h_hf,
                           const std::vector<pipeline::EstimatorResult>& results,
                           const analysis::ToleranceBudget& budget) {
    ToleranceSummary s;
    s.label = label;
    s.tol = tol;
    s.h_lf = h_lf;
    s.h_hf = h_hf;
    s.compliance = analysis::check_tolerance_compliance(results, budget);
    const double k = static_cast<double>(results.size());
    for (const auto& r : results) {
        const double e = budget.error_mode == analysis::ErrorMode::Relative ? *r.error_rel : *r.error_abs;
        s.max_error = std::max(s.max_error, e);
        s.mean_error += e / k;
        const auto& l = r.cost;
        s.n_samples += static_cast<double>(l.counts.n) / k;
        s.unit.w_lf += l.unit.w_lf / k;
        s.unit.w_hf += l.unit.w_hf / k;
        s.unit.w_t1 += l.unit.w_t1 / k;
        s.unit.w_p1 += l.unit.w_p1 / k;
        s.unit.w_t2 += l.unit.w_t2 / k;
        s.unit.w_p2 += l.unit.w_p2 / k;
        s.mfnnmc_total += l.total_mfnnmc / k;
        s.prediction_total += l.predict_nn2 / k;
        s.hfmc_total += l.total_hfmc / k;
        s.m = l.counts.m;
        s.m1 = l.counts.m1;
        s.m2 = l.counts.m2;
    }
    return s;
}

struct SweepArtifacts {
    json manifest;
    std::vector<json> tolerances;
    std::vector<std::vector<json>> runs;
};

SweepArtifacts load_sweep(const fs::path& root) {
    const fs::path manifest_path = root / "sweep.json";
    if (!fs::exists(manifest_path))
        throw ConfigError("no sweep artifacts under " + root.string() + " (sweep.json missing)");
    SweepArtifacts a;
    a.manifest = read_json(manifest_path);
    const std::string hash = a.manifest.at("config_hash").get<std::string>();
    const RunLayout layout{root};
    std::vector<std::string> missing;
    for (const auto& t : a.manifest.at("tolerances")) {
        a.tolerances.push_back(t);
        std::vector<json> runs;
        const auto label = t.at("label").get<std::string>();
        for (std::size_t rep = 0; rep < t.at("repetitions").get<std::size_t>(); ++rep) {
            const fs::path dir = layout.run_dir(label, rep);
            if (!fs::exists(dir / "result.json") || !fs::exists(dir / "nn2.ckpt")) {
                missing.push_back(dir.string());
                continue;
            }
            json r = read_json(dir / "result.json");
            if (r.value("config_hash", std::string()) != hash)
                throw ConfigError("stale artifact " + (dir / "result.json").string() +
                                  ": produced by a different configuration; re-run sweep");
            runs.push_back(std::move(r));
        }
        a.runs.push_back(std::move(runs));
    }
    if (!missing.empty()) {
        std::string msg = "incomplete sweep artifacts; re-run sweep for:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw ConfigError(msg);
    }
    return a;
}

analysis::ToleranceBudget budget_from(const json& manifest, double tol) {
    return analysis::ToleranceBudget::make(
        tol, analysis::error_mode_from_string(manifest.at("error_mode").get<std::string>()),
        manifest.at("theta").get<double>(), manifest.at("alpha").get<double>());
}

std::vector<ToleranceSummary> summaries_from(const SweepArtifacts& a) {
    std::vector<ToleranceSummary> rows;
    for (std::size_t i = 0; i < a.tolerances.size(); ++i) {
        const auto& t = a.tolerances[i];
        std::vector<pipeline::EstimatorResult> results;
        for (const auto& r : a.runs[i]) results.push_back(result_from_json(r));
        const double tol = t.at("tol").get<double>();
        rows.push_back(summarize(t.at("label").get<std::string>(), tol, t.at("h_lf").get<double>(),
                                 t.at("h_hf").get<double>(), results, budget_from(a.manifest, tol)));
    }
    return rows;
}

}  // namespace

fs::path RunLayout::run_dir(const std::string& label, std::size_t rep) const {
    return tolerance_dir(label) / rep_name("rep_", rep);
}

fs::path RunLayout::hfmc_dir(const std::string& label, std::size_t rep) const {
    return tolerance_dir(label) / rep_name("hfmc_", rep);
}

Resolved resolve(const config::CampaignConfig& cfg) {
    Resolved r;
    const bool need_c = std::any_of(cfg.tolerances.begin(), cfg.tolerances.end(),
                                    [](const auto& e) { return !e.h_hf.has_value(); });
    if (need_c) r.bias_constant = config::resolve_bias_constant(cfg, derive_seed(cfg.master_seed, SeedPhase::Calibration));
    for (const auto& e : cfg.tolerances) r.h_hf.push_back(config::resolve_h_hf(cfg, e, r.bias_constant));
    return r;
}

pipeline::CampaignOutcome run_mfnnmc(const config::CampaignConfig& cfg, const Resolved& res,
                                     std::size_t tol_index, std::size_t rep, std::size_t threads,
                                     const pipeline::FidelityData* cached) {
    const auto spec = config::resolve_run(cfg, tol_index, rep, res.h_hf.at(tol_index));
    const auto& entry = cfg.tolerances[tol_index];
    pipeline::RunOptions opt;
    opt.threads = threads;
    opt.artifacts_dir = RunLayout{config::output_root(cfg)}.run_dir(entry.label, rep);
    opt.cached_fidelity = cached;
    opt.config_echo_json = cfg.echo.dump();
    opt.config_hash = cfg.hash;
    opt.tolerance_label = entry.label;
    return pipeline::run_mfnnmc(spec, opt);
}

pipeline::EstimatorResult run_hfmc(const config::CampaignConfig& cfg, const Resolved& res,
                                   std::size_t tol_index, std::size_t rep, const HfmcOptions& opt) {
    const auto& model = models::model_catalog(cfg.model);
    const auto& entry = cfg.tolerances.at(tol_index);
    const double h = res.h_hf.at(tol_index);
    const auto budget = config::budget_for(cfg, entry);
    const Box domain = model.parameter_domain();

    std::size_t n = opt.n_samples.value_or(entry.n_samples.value_or(0));
    if (n == 0) {
        const std::size_t pilot = std::min<std::size_t>(cfg.pilot_samples, 1000);
        pipeline::FunctionSurrogate solver(model.dim(), [&](std::span<const double> y) { return model.qoi(y, h); });
        const auto m = pipeline::sample_moments(
            solver, pipeline::SampleStream{domain, pilot, derive_seed(cfg.master_seed, SeedPhase::Pilot, rep)},
            {1, opt.threads});
        n = analysis::select_n_samples(budget, m.variance(), m.mean);
    }

    pipeline::EstimatorResult r;
    const pipeline::SampleStream stream{domain, n, derive_seed(cfg.master_seed, SeedPhase::McDraws, rep)};
    if (opt.cost_only) {
        analysis::PhaseTimes t;
        t.w_hf = pipeline::measure_solve_cost(model, h, std::min<std::size_t>(n, 200),
                                              derive_seed(cfg.master_seed, SeedPhase::McDraws, rep));
        r.method = pipeline::Method::HFMC;
        r.n_samples = n;
        r.cost = analysis::build_ledger({0, 0, 0, n}, t);
    } else {
        r = pipeline::estimate_hfmc(model, h, stream, {1, opt.threads});
        r.set_reference(model.reference_mean());
    }

    const fs::path dir = RunLayout{config::output_root(cfg)}.hfmc_dir(entry.label, rep);
    fs::create_directories(dir);
    json j = result_to_json(r);
    j["cost_only"] = opt.cost_only;
    j["tolerance"] = entry.tol;
    j["h_hf"] = h;
    j["config_hash"] = cfg.hash;
    write_text(dir / "result.json", j.dump(2) + "\n");
    return r;
}

std::string compliance_csv(const std::vector<ToleranceSummary>& rows, analysis::ErrorMode mode) {
    std::ostringstream os;
    os.precision(17);
    os << "label,tol,error_mode,runs,compliant,required,fraction,pass,max_error,mean_error\n";
    for (const auto& r : rows)
        os << r.label << ',' << r.tol << ',' << analysis::to_string(mode) << ',' << r.compliance.runs << ','
           << r.compliance.compliant << ',' << r.compliance.required << ',' << r.compliance.fraction << ','
           << (r.compliance.pass ? "true" : "false") << ',' << r.max_error << ',' << r.mean_error << '\n';
    return os.str();
}

std::string costs_csv(const std::vector<ToleranceSummary>& rows) {
    std::ostringstream os;
    os << "label,tol,method,N,h_hf,h_lf,M,M1,M2,W_LF,W_HF,W_T1,W_P1,W_T2,W_P2,total,prediction\n";
    for (const auto& r : rows) {
        os << r.label << ',' << fmt(r.tol) << ",MFNNMC," << fmt(r.n_samples) << ',' << fmt(r.h_hf) << ','
           << fmt(r.h_lf) << ',' << r.m << ',' << r.m1 << ',' << r.m2 << ',' << fmt(r.unit.w_lf) << ','
           << fmt(r.unit.w_hf) << ',' << fmt(r.unit.w_t1) << ',' << fmt(r.unit.w_p1) << ','
           << fmt(r.unit.w_t2) << ',' << fmt(r.unit.w_p2) << ',' << fmt(r.mfnnmc_total) << ','
           << fmt(r.prediction_total) << '\n';
        os << r.label << ',' << fmt(r.tol) << ",HFMC," << fmt(r.n_samples) << ',' << fmt(r.h_hf) << ",,,,,,"
           << fmt(r.unit.w_hf) << ",,,,,"<< fmt(r.hfmc_total) << ",\n";
    }
    return os.str();
}

std::vector<ToleranceSummary> run_sweep(const config::CampaignConfig& cfg, const SweepOptions& opt) {
    const Resolved res = resolve(cfg);
    const fs::path root = config::output_root(cfg);
    fs::create_directories(root);
    const std::size_t reps = opt.repetitions.value_or(cfg.repetitions);
    std::vector<std::size_t> indices = opt.tolerance_indices;
    if (indices.empty())
        for (std::size_t i = 0; i < cfg.tolerances.size(); ++i) indices.push_back(i);

    json manifest{{"config_hash", cfg.hash},
                  {"config", cfg.echo},
                  {"model", models::to_string(cfg.model)},
                  {"error_mode", analysis::to_string(cfg.error_mode)},
                  {"theta", cfg.theta},
                  {"alpha", cfg.alpha},
                  {"bias_constant", res.bias_constant},
                  {"tolerances", json::array()}};

    std::vector<ToleranceSummary> rows;
    for (std::size_t ti : indices) {
        const auto& entry = cfg.tolerances.at(ti);
        std::vector<pipeline::EstimatorResult> results;
        pipeline::FidelityData cache;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            auto out = run_mfnnmc(cfg, res, ti, rep, opt.threads, rep == 0 ? nullptr : &cache);
            if (rep == 0) cache = out.fidelity;
            results.push_back(out.result);
        }
        rows.push_back(summarize(entry.label, entry.tol, entry.h_lf, res.h_hf[ti], results,
                                 config::budget_for(cfg, entry)));
        manifest["tolerances"].push_back({{"label", entry.label},
                                          {"tol", entry.tol},
                                          {"h_lf", entry.h_lf},
                                          {"h_hf", res.h_hf[ti]},
                                          {"repetitions", reps}});
    }
    write_text(root / "compliance.csv", compliance_csv(rows, cfg.error_mode));
    write_text(root / "costs.csv", costs_csv(rows));
    write_text(root / "sweep.json", manifest.dump(2) + "\n");
    return rows;
}

CompareReport compare(const fs::path& root, const config::CampaignConfig* current) {
    const SweepArtifacts a = load_sweep(root);
    if (current && a.manifest.at("config_hash").get<std::string>() != current->hash)
        throw ConfigError("artifacts under " + root.string() +
                          " were produced by a different configuration; re-run sweep");
    CompareReport rep;
    rep.rows = summaries_from(a);
    if (rep.rows.size() < 2) throw ConfigError("compare needs at least two tolerances in the sweep");

    auto fit = [&](const std::string& name, auto get) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : rep.rows) pts.emplace_back(r.tol, get(r));
        rep.slopes.push_back({name, analysis::fit_cost_slope(pts), pts.size()});
    };
    fit("HFMC", [](const ToleranceSummary& r) { return r.hfmc_total; });
    fit("MFNNMC", [](const ToleranceSummary& r) { return r.mfnnmc_total; });
    fit("MFNNMC_prediction", [](const ToleranceSummary& r) { return r.prediction_total; });

    std::ostringstream cmp, slopes, loglog;
    cmp << "label,tol,N,hfmc_cost,mfnnmc_cost,mfnnmc_prediction_cost\n";
    for (const auto& r : rep.rows)
        cmp << r.label << ',' << fmt(r.tol) << ',' << fmt(r.n_samples) << ',' << fmt(r.hfmc_total) << ','
            << fmt(r.mfnnmc_total) << ',' << fmt(r.prediction_total) << '\n';
    slopes << "series,slope,points\n";
    for (const auto& s : rep.slopes) slopes << s.series << ',' << fmt(s.slope) << ',' << s.points << '\n';

    // log-log points with the fitted line through their centroid
    loglog << "series,log10_inv_tol,log10_cost,fitted_log10_cost\n";
    for (std::size_t k = 0; k < rep.slopes.size(); ++k) {
        std::vector<std::pair<double, double>> xy;
        for (const auto& r : rep.rows) {
            const double c = k == 0 ? r.hfmc_total : (k == 1 ? r.mfnnmc_total : r.prediction_total);
            xy.emplace_back(-std::log10(r.tol), std::log10(c));
        }
        double mx = 0.0, my = 0.0;
        for (const auto& [x, y] : xy) {
            mx += x / static_cast<double>(xy.size());
            my += y / static_cast<double>(xy.size());
        }
        for (const auto& [x, y] : xy)
            loglog << rep.slopes[k].series << ',' << fmt(x) << ',' << fmt(y) << ','
                   << fmt(my + rep.slopes[k].slope * (x - mx)) << '\n';
    }
    write_text(root / "compare.csv", cmp.str());
    write_text(root / "slopes.csv", slopes.str());
    write_text(root / "loglog.csv", loglog.str());
    return rep;
}

std::string emit_table(const fs::path& root, int table_id) {
    if (table_id < 1 || table_id > 4) throw InputError("table id must be 1, 2, 3 or 4");
    const SweepArtifacts a = load_sweep(root);
    const std::string model = a.manifest.at("model").get<std::string>();
    const bool ode_table = table_id <= 2;
    if ((model == "ode") != ode_table)
        throw ConfigError("table " + std::to_string(table_id) + " needs model " + std::string(ode_table ? "ode" : "wave") +
                          " sweep, found " + model);
    const auto rows = summaries_from(a);
    std::ostringstream os;
    if (table_id % 2 == 1) {
        os << "eps_tol,N,h_HF,W_HF,h_LF,W_LF\n";
        for (const auto& r : rows)
            os << fmt(r.tol) << ',' << fmt(r.n_samples) << ',' << fmt(r.h_hf) << ',' << fmt(r.unit.w_hf) << ','
               << fmt(r.h_lf) << ',' << fmt(r.unit.w_lf) << '\n';
    } else {
        os << "eps_tol,M1,M2,NN1_epochs,NN1_batch,W_T1,W_P1,NN2_epochs,NN2_batch,W_T2,W_P2\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            const json& first = a.runs[i].front();
            auto net = [&](const char* key, const char* field) -> std::string {
                if (!first.contains(key)) return "";
                return std::to_string(first.at(key).at(field).get<std::size_t>());
            };
            os << fmt(r.tol) << ',' << r.m1 << ',' << r.m2 << ',' << net("nn1", "epochs") << ','
               << net("nn1", "batch_size") << ',' << fmt(r.unit.w_t1) << ',' << fmt(r.unit.w_p1) << ','
               << net("nn2", "epochs") << ',' << net("nn2", "batch_size") << ',' << fmt(r.unit.w_t2) << ','
               << fmt(r.unit.w_p2) << '\n';
        }
    }
    return os.str();
}

}  // namespace mfnn::campaign
