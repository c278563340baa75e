#include "mfnn/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mfnn/errors.hpp"
#include "mfnn/json_io.hpp"

namespace mfnn::config {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const char* key) {
    return path == "(root)" ? std::string(key) : path + "." + key;
}

/// Collects field-level problems so one run reports all of them.
class Checker {
public:
    void fail(const std::string& path, const std::string& msg) { errors_.push_back(path + ": " + msg); }

    const json* field(const json& obj, const std::string& path, const char* key, bool required) {
        if (!obj.is_object()) {
            fail(path, "must be an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(join(path, key), "is required");
            return nullptr;
        }
        return &*it;
    }

    double positive(const json& obj, const std::string& path, const char* key, double fallback,
                    bool required = false) {
        const json* v = field(obj, path, key, required);
        if (!v) return fallback;
        if (!v->is_number() || !(v->get<double>() > 0.0) || !std::isfinite(v->get<double>())) {
            fail(join(path, key), "must be a positive number");
            return fallback;
        }
        return v->get<double>();
    }

    double number(const json& obj, const std::string& path, const char* key, double fallback) {
        const json* v = field(obj, path, key, false);
        if (!v) return fallback;
        if (!v->is_number()) {
            fail(join(path, key), "must be a number");
            return fallback;
        }
        return v->get<double>();
    }

    std::size_t count(const json& obj, const std::string& path, const char* key, std::size_t fallback,
                      bool required = false, std::size_t min = 1) {
        const json* v = field(obj, path, key, required);
        if (!v) return fallback;
        if (!v->is_number_integer() || v->get<long long>() < static_cast<long long>(min)) {
            fail(join(path, key), "must be an integer >= " + std::to_string(min));
            return fallback;
        }
        return v->get<std::size_t>();
    }

    std::string text(const json& obj, const std::string& path, const char* key, const std::string& fallback,
                     bool required = false) {
        const json* v = field(obj, path, key, required);
        if (!v) return fallback;
        if (!v->is_string()) {
            fail(join(path, key), "must be a string");
            return fallback;
        }
        return v->get<std::string>();
    }

    void finish() const {
        if (errors_.empty()) return;
        std::string msg = "invalid configuration:";
        for (const auto& e : errors_) msg += "\n  " + e;
        throw ConfigError(msg);
    }

private:
    std::vector<std::string> errors_;
};

void parse_network(Checker& c, const json& obj, const std::string& path, pipeline::NetworkSpec& net) {
    if (!obj.is_object()) {
        c.fail(path, "must be an object");
        return;
    }
    if (const json* h = c.field(obj, path, "hidden", false)) {
        if (!h->is_array() || h->empty()) {
            c.fail(path + ".hidden", "must be a non-empty list of widths");
        } else {
            net.hidden_widths.clear();
            for (const auto& w : *h) {
                if (!w.is_number_integer() || w.get<long long>() < 1) {
                    c.fail(path + ".hidden", "widths must be integers >= 1");
                    break;
                }
                net.hidden_widths.push_back(w.get<std::size_t>());
            }
        }
    }
    auto& t = net.training;
    if (obj.contains("activation")) {
        try {
            net.activation = nnet::activation_from_string(c.text(obj, path, "activation", "relu"));
            if (net.activation == nnet::Activation::Identity)
                c.fail(path + ".activation", "hidden layers need relu, tanh or sigmoid");
        } catch (const InputError& e) {
            c.fail(path + ".activation", e.what());
        }
    }
    t.epochs = c.count(obj, path, "epochs", t.epochs);
    t.batch_size = c.count(obj, path, "batch_size", t.batch_size);
    t.learning_rate = c.positive(obj, path, "learning_rate", t.learning_rate);
    t.adam.beta1 = c.number(obj, path, "adam_beta1", t.adam.beta1);
    t.adam.beta2 = c.number(obj, path, "adam_beta2", t.adam.beta2);
    t.adam.epsilon = c.number(obj, path, "adam_epsilon", t.adam.epsilon);
    if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0)) c.fail(path + ".adam_beta1", "must lie in [0, 1)");
    if (!(t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0)) c.fail(path + ".adam_beta2", "must lie in [0, 1)");
    if (!(t.adam.epsilon > 0.0)) c.fail(path + ".adam_epsilon", "must be positive");
    t.validation_fraction = c.number(obj, path, "validation_fraction", t.validation_fraction);
    if (!(t.validation_fraction >= 0.0 && t.validation_fraction < 1.0))
        c.fail(path + ".validation_fraction", "must lie in [0, 1)");
    if (obj.contains("init")) {
        try {
            t.init.bias = nnet::bias_init_from_string(c.text(obj, path, "init", "zero"));
        } catch (const InputError& e) {
            c.fail(path + ".init", e.what());
        }
    }
    if (const json* s = c.field(obj, path, "schedule", false)) {
        const std::string sp = path + ".schedule";
        const std::string type = c.text(*s, sp, "type", "fixed", true);
        if (type == "fixed") {
            t.lr_schedule = nnet::FixedRate{};
        } else if (type == "plateau") {
            nnet::ReduceOnPlateau r;
            if (const auto* cur = std::get_if<nnet::ReduceOnPlateau>(&t.lr_schedule)) r = *cur;
            r.patience = c.count(*s, sp, "patience", r.patience);
            r.factor = c.number(*s, sp, "factor", r.factor);
            r.min_lr = c.number(*s, sp, "min_lr", r.min_lr);
            if (!(r.factor > 0.0 && r.factor < 1.0)) c.fail(sp + ".factor", "must lie in (0, 1)");
            if (!(r.min_lr >= 0.0)) c.fail(sp + ".min_lr", "must be >= 0");
            t.lr_schedule = r;
        } else {
            c.fail(sp + ".type", "must be \"fixed\" or \"plateau\"");
        }
    }
}

std::optional<double> auto_or_positive(Checker& c, const json& obj, const std::string& path, const char* key) {
    const json* v = c.field(obj, path, key, false);
    if (!v || (v->is_string() && v->get<std::string>() == "auto")) return std::nullopt;
    if (!v->is_number() || !(v->get<double>() > 0.0)) {
        c.fail(join(path, key), "must be a positive number or \"auto\"");
        return std::nullopt;
    }
    return v->get<double>();
}

}  // namespace

std::string tolerance_label(double tol) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "tol_%.0e", tol);
    return buf;
}

CampaignConfig parse_config(const json& doc) {
    Checker c;
    CampaignConfig cfg;
    if (!doc.is_object()) throw ConfigError("invalid configuration:\n  (root): must be an object");
    const std::string root = "(root)";

    try {
        cfg.model = models::model_id_from_string(c.text(doc, root, "model", "ode", true));
    } catch (const InputError& e) {
        c.fail("model", e.what());
    }
    try {
        cfg.error_mode = analysis::error_mode_from_string(c.text(doc, root, "error_mode", "relative", true));
    } catch (const InputError& e) {
        c.fail("error_mode", e.what());
    }
    cfg.theta = c.number(doc, root, "theta", cfg.theta);
    if (!(cfg.theta > 0.0 && cfg.theta < 1.0)) c.fail("theta", "must lie in (0, 1)");
    cfg.alpha = c.number(doc, root, "alpha", cfg.alpha);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) c.fail("alpha", "must lie in (0, 1)");
    cfg.master_seed = c.count(doc, root, "master_seed", 0, false, 0);
    cfg.repetitions = c.count(doc, root, "repetitions", 1);
    cfg.output_dir = c.text(doc, root, "output_dir", cfg.output_dir);
    cfg.pilot_samples = c.count(doc, root, "pilot_samples", cfg.pilot_samples, false, 2);
    if (doc.contains("reference_scale")) cfg.reference_scale = c.positive(doc, root, "reference_scale", 1.0);

    const models::ForwardModel& model = models::model_catalog(cfg.model);
    if (const json* s = c.field(doc, root, "scaling", false)) {
        cfg.scaling_lower = c.number(*s, "scaling", "lower", cfg.scaling_lower);
        cfg.scaling_upper = c.number(*s, "scaling", "upper", cfg.scaling_upper);
        if (!(cfg.scaling_lower < cfg.scaling_upper)) c.fail("scaling", "lower must be < upper");
    }

    if (const json* b = c.field(doc, root, "bias_constant", false)) {
        const std::string mode = c.text(*b, "bias_constant", "mode", "fit", true);
        if (mode == "value") {
            cfg.bias.mode = BiasConstantSpec::Mode::Value;
            cfg.bias.value = c.positive(*b, "bias_constant", "C", 1.0, true);
        } else if (mode == "anchor") {
            cfg.bias.mode = BiasConstantSpec::Mode::Anchor;
            cfg.bias.anchor_tol = c.positive(*b, "bias_constant", "tol", 1.0, true);
            cfg.bias.anchor_h = c.positive(*b, "bias_constant", "h", 1.0, true);
        } else if (mode == "fit") {
            cfg.bias.mode = BiasConstantSpec::Mode::Fit;
            cfg.bias.fit_draws = c.count(*b, "bias_constant", "draws", cfg.bias.fit_draws);
            if (const json* st = c.field(*b, "bias_constant", "steps", false)) {
                if (!st->is_array() || st->size() < 2) c.fail("bias_constant.steps", "needs at least two steps");
                else
                    for (const auto& h : *st) {
                        if (!h.is_number() || !(h.get<double>() > 0.0)) c.fail("bias_constant.steps", "steps must be positive");
                        else cfg.bias.fit_steps.push_back(h.get<double>());
                    }
            }
        } else {
            c.fail("bias_constant.mode", "must be \"value\", \"anchor\" or \"fit\"");
        }
    }
    if (cfg.bias.mode == BiasConstantSpec::Mode::Fit && cfg.bias.fit_steps.empty()) {
        const auto ladder = model.step_ladder();
        cfg.bias.fit_steps = {ladder[0], ladder[1]};
    }

    pipeline::NetworkSpec nn1_base, nn2_base;
    if (const json* n = c.field(doc, root, "nn1", false)) parse_network(c, *n, "nn1", nn1_base);
    if (const json* n = c.field(doc, root, "nn2", false)) parse_network(c, *n, "nn2", nn2_base);

    const json* tols = c.field(doc, root, "tolerances", true);
    if (tols && (!tols->is_array() || tols->empty())) c.fail("tolerances", "must be a non-empty list");
    if (tols && tols->is_array()) {
        for (std::size_t i = 0; i < tols->size(); ++i) {
            const json& t = (*tols)[i];
            const std::string p = "tolerances[" + std::to_string(i) + "]";
            if (!t.is_object()) {
                c.fail(p, "must be an object");
                continue;
            }
            ToleranceEntry e;
            e.tol = c.positive(t, p, "tol", 1.0, true);
            e.label = c.text(t, p, "label", tolerance_label(e.tol));
            e.h_lf = c.positive(t, p, "h_lf", 1.0, true);
            e.h_hf = auto_or_positive(c, t, p, "h_hf");
            if (const auto n = auto_or_positive(c, t, p, "N")) {
                if (std::floor(*n) != *n) c.fail(p + ".N", "must be an integer or \"auto\"");
                e.n_samples = static_cast<std::size_t>(*n);
            }
            try {
                model.check_step(e.h_lf);
            } catch (const std::exception& ex) {
                c.fail(p + ".h_lf", ex.what());
            }
            if (e.h_hf) {
                try {
                    model.check_step(*e.h_hf);
                } catch (const std::exception& ex) {
                    c.fail(p + ".h_hf", ex.what());
                }
                if (!(*e.h_hf < e.h_lf)) c.fail(p + ".h_hf", "must be smaller than h_lf");
            }
            if (model.dim() == 1) {
                e.design.m = c.count(t, p, "M", 0, true, 5);
                e.design.stride = c.count(t, p, "stride", 4);
            } else {
                const json* g = c.field(t, p, "grid", true);
                if (g && (!g->is_array() || g->size() != 2 || !(*g)[0].is_number_integer() ||
                          !(*g)[1].is_number_integer() || (*g)[0].get<long long>() < 3 ||
                          (*g)[1].get<long long>() < 3)) {
                    c.fail(p + ".grid", "must be [n1, n2] with n1, n2 >= 3");
                } else if (g) {
                    e.design.n1 = (*g)[0].get<std::size_t>();
                    e.design.n2 = (*g)[1].get<std::size_t>();
                }
            }
            e.nn1 = nn1_base;
            e.nn2 = nn2_base;
            if (const json* n = c.field(t, p, "nn1", false)) parse_network(c, *n, p + ".nn1", e.nn1);
            if (const json* n = c.field(t, p, "nn2", false)) parse_network(c, *n, p + ".nn2", e.nn2);
            const std::size_t m = model.dim() == 1 ? e.design.m : e.design.n1 * e.design.n2;
            const std::size_t m1 = model.dim() == 1
                                       ? (e.design.m + e.design.stride - 1) / std::max<std::size_t>(1, e.design.stride)
                                       : ((e.design.n1 + 1) / 2) * ((e.design.n2 + 1) / 2);
            auto check_batch = [&](const pipeline::NetworkSpec& net, std::size_t rows, const char* which) {
                const auto& tr = net.training;
                if (rows > 0 && static_cast<double>(tr.batch_size) >
                                    static_cast<double>(rows) * (1.0 - tr.validation_fraction))
                    c.fail(p + "." + which + ".batch_size", "exceeds the number of training samples");
            };
            if (m > m1) check_batch(e.nn1, m1, "nn1");
            check_batch(e.nn2, m, "nn2");
            cfg.tolerances.push_back(std::move(e));
        }
    }
    c.finish();
    cfg.echo = doc;
    cfg.hash = content_hash(doc);
    return cfg;
}

CampaignConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read configuration " + path.string());
    json doc;
    try {
        doc = json::parse(f, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

std::filesystem::path output_root(const CampaignConfig& cfg) {
    std::filesystem::path p(cfg.output_dir);
    if (const char* root = std::getenv("MFNN_OUTPUT_ROOT"); root && *root && p.is_relative())
        return std::filesystem::path(root) / p;
    return p;
}

analysis::ToleranceBudget budget_for(const CampaignConfig& cfg, const ToleranceEntry& entry) {
    return analysis::ToleranceBudget::make(entry.tol, cfg.error_mode, cfg.theta, cfg.alpha);
}

double resolve_bias_constant(const CampaignConfig& cfg, std::uint64_t seed) {
    const auto& model = models::model_catalog(cfg.model);
    const double scale = cfg.reference_scale.value_or(model.reference_mean());
    switch (cfg.bias.mode) {
        case BiasConstantSpec::Mode::Value:
            return cfg.bias.value;
        case BiasConstantSpec::Mode::Anchor: {
            const auto b = analysis::ToleranceBudget::make(cfg.bias.anchor_tol, cfg.error_mode, cfg.theta, cfg.alpha);
            return analysis::anchor_bias_constant(b, model.order(), cfg.bias.anchor_h, scale);
        }
        case BiasConstantSpec::Mode::Fit:
            return analysis::fit_bias_constant(model, cfg.bias.fit_steps, cfg.bias.fit_draws, seed).constant;
    }
    throw ConfigError("unknown bias constant mode");
}

double resolve_h_hf(const CampaignConfig& cfg, const ToleranceEntry& entry, double bias_constant) {
    if (entry.h_hf) return *entry.h_hf;
    const auto& model = models::model_catalog(cfg.model);
    const auto ladder = model.step_ladder();
    const double scale = cfg.reference_scale.value_or(model.reference_mean());
    return analysis::select_h_hf(budget_for(cfg, entry), model.order(), bias_constant, ladder, scale);
}

pipeline::RunSpec resolve_run(const CampaignConfig& cfg, std::size_t tol_index, std::size_t repetition,
                              double h_hf) {
    if (tol_index >= cfg.tolerances.size()) throw ConfigError("tolerance index out of range");
    const ToleranceEntry& e = cfg.tolerances[tol_index];
    pipeline::RunSpec s;
    s.fidelity = {e.h_lf, h_hf, 2.0, cfg.model};
    s.design = e.design;
    s.budget = budget_for(cfg, e);
    s.n_samples = e.n_samples.value_or(0);
    s.pilot_samples = cfg.pilot_samples;
    s.nn1 = e.nn1;
    s.nn2 = e.nn2;
    s.scaling_lower = cfg.scaling_lower;
    s.scaling_upper = cfg.scaling_upper;
    s.master_seed = cfg.master_seed;
    s.repetition = repetition;
    return s;
}

}  // namespace mfnn::config
