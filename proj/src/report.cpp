#include <cstdio>
#include <fstream>
#include <sstream>

#include "mfnn/errors.hpp"
#include "mfnn/json_io.hpp"
#include "mfnn/pipeline.hpp"

namespace mfnn {

using nlohmann::json;

json ledger_to_json(const analysis::CostLedger& l) {
    return json{
        {"counts", {{"M", l.counts.m}, {"M1", l.counts.m1}, {"M2", l.counts.m2}, {"N", l.counts.n}}},
        {"unit",
         {{"W_LF", l.unit.w_lf},
          {"W_HF", l.unit.w_hf},
          {"W_T1", l.unit.w_t1},
          {"W_P1", l.unit.w_p1},
          {"W_T2", l.unit.w_t2},
          {"W_P2", l.unit.w_p2}}},
        {"terms",
         {{"lf_solves", l.lf_solves},
          {"hf_solves", l.hf_solves},
          {"train_nn1", l.train_nn1},
          {"predict_nn1", l.predict_nn1},
          {"train_nn2", l.train_nn2},
          {"predict_nn2", l.predict_nn2}}},
        {"total_mfnnmc", l.total_mfnnmc},
        {"total_hfmc", l.total_hfmc},
    };
}

analysis::CostLedger ledger_from_json(const json& j) {
    analysis::SampleCounts c{j.at("counts").at("M").get<std::size_t>(), j.at("counts").at("M1").get<std::size_t>(),
                             j.at("counts").at("M2").get<std::size_t>(), j.at("counts").at("N").get<std::size_t>()};
    const auto& u = j.at("unit");
    analysis::PhaseTimes t{u.at("W_LF").get<double>(), u.at("W_HF").get<double>(), u.at("W_T1").get<double>(),
                           u.at("W_P1").get<double>(), u.at("W_T2").get<double>(), u.at("W_P2").get<double>()};
    return analysis::build_ledger(c, t);
}

json result_to_json(const pipeline::EstimatorResult& r) {
    json j{{"method", pipeline::to_string(r.method)},
           {"estimate", r.estimate},
           {"sample_variance", r.sample_variance},
           {"n_samples", r.n_samples},
           {"moment", r.moment},
           {"ledger", ledger_to_json(r.cost)}};
    j["reference"] = r.reference ? json(*r.reference) : json(nullptr);
    j["error_abs"] = r.error_abs ? json(*r.error_abs) : json(nullptr);
    j["error_rel"] = r.error_rel ? json(*r.error_rel) : json(nullptr);
    return j;
}

pipeline::EstimatorResult result_from_json(const json& j) {
    pipeline::EstimatorResult r;
    r.method = pipeline::method_from_string(j.at("method").get<std::string>());
    r.estimate = j.at("estimate").get<double>();
    r.sample_variance = j.at("sample_variance").get<double>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.moment = j.value("moment", 1);
    r.cost = ledger_from_json(j.at("ledger"));
    if (j.contains("reference") && !j["reference"].is_null()) r.set_reference(j["reference"].get<double>());
    return r;
}

std::string content_hash(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace mfnn

namespace mfnn::pipeline {

namespace {

json history_json(const nnet::TrainingHistory& h, const NetworkSpec& spec) {
    json j{{"hidden_widths", spec.hidden_widths},
           {"activation", nnet::to_string(spec.activation)},
           {"epochs", spec.training.epochs},
           {"batch_size", spec.training.batch_size},
           {"learning_rate", spec.training.learning_rate},
           {"train_size", h.train_size},
           {"validation_size", h.validation_size},
           {"final_train_loss", h.final_train_loss}};
    if (!h.epochs.empty()) {
        j["last_learning_rate"] = h.epochs.back().learning_rate;
        if (h.epochs.back().validation_loss) j["final_validation_loss"] = *h.epochs.back().validation_loss;
    }
    return j;
}

}  // namespace

void write_fidelity_csv(const CampaignOutcome& out, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write " + path.string());
    f.precision(17);
    const auto& d = out.design;
    f << "index";
    for (std::size_t k = 0; k < d.domain.dim(); ++k) f << ",y" << k;
    f << ",set,q_lf,q_hf,q_hf_hat,provenance\n";
    for (std::size_t i = 0; i < d.m(); ++i) {
        const bool in_I = i < d.m1();
        const auto y = in_I ? d.y_I.point(i) : d.y_II.point(i - d.m1());
        f << (in_I ? d.grid_index_I[i] : d.grid_index_II[i - d.m1()]);
        for (double v : y) f << ',' << v;
        f << ',' << (in_I ? "I" : "II") << ',' << out.fidelity.lf_all[i] << ',';
        if (in_I) f << out.fidelity.hf_on_I[i];
        f << ',' << out.augmented.values[i] << ','
          << (out.augmented.provenance[i] == Provenance::Solver ? "solver" : "nn1") << '\n';
    }
}

std::string result_json(const CampaignOutcome& out, const RunSpec& spec, const RunOptions& options) {
    json j = result_to_json(out.result);
    j["tolerance"] = spec.budget.tol;
    j["tolerance_label"] = options.tolerance_label;
    j["budget"] = {{"tol", spec.budget.tol},
                   {"theta", spec.budget.theta},
                   {"alpha", spec.budget.alpha},
                   {"c_alpha", spec.budget.c_alpha},
                   {"error_mode", analysis::to_string(spec.budget.error_mode)}};
    j["fidelity"] = {{"model", models::to_string(spec.fidelity.model_id)},
                     {"h_lf", spec.fidelity.h_lf},
                     {"h_hf", spec.fidelity.h_hf},
                     {"order_q", spec.fidelity.order_q}};
    j["design"] = {{"M", out.design.m()}, {"M1", out.design.m1()}, {"M2", out.design.m2()},
                   {"m", spec.design.m},  {"n1", spec.design.n1},  {"n2", spec.design.n2}};
    j["nn2"] = history_json(out.bundle.nn2_history, spec.nn2);
    if (out.bundle.has_nn1) j["nn1"] = history_json(out.bundle.nn1_history, spec.nn1);
    const auto& s = out.bundle.scaling;
    j["scaling"] = {{"y", {{"source_lower", s.y.source.lower},
                           {"source_upper", s.y.source.upper},
                           {"target_lower", s.y.target_lower},
                           {"target_upper", s.y.target_upper}}},
                    {"q_lf", {{"min", s.q_lf.lo}, {"max", s.q_lf.hi}}}};
    j["seeds"] = {{"master", spec.master_seed}, {"repetition", spec.repetition}};
    j["pilot"] = {{"n", out.pilot_n}, {"mean", out.pilot_mean}, {"variance", out.pilot_variance}};
    j["config_hash"] = options.config_hash;
    j["config"] = options.config_echo_json.empty() ? json(nullptr) : json::parse(options.config_echo_json);
    return j.dump(2);
}

}  // namespace mfnn::pipeline
