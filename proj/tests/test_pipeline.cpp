#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "mfnn/errors.hpp"
#include "mfnn/json_io.hpp"
#include "mfnn/pipeline.hpp"

using namespace mfnn;
using namespace mfnn::pipeline;

namespace {

const models::ForwardModel& ode() { return models::model_catalog(models::ModelId::Ode15); }
const models::ForwardModel& wave() { return models::model_catalog(models::ModelId::Wave16); }

const models::BiFidelitySpec kOdeSpec{0.5, 0.1, 2.0, models::ModelId::Ode15};

nnet::TrainingConfig quick_training(std::size_t epochs, std::size_t batch = 10, double lr = 0.005) {
    nnet::TrainingConfig t;
    t.epochs = epochs;
    t.batch_size = batch;
    t.learning_rate = lr;
    return t;
}

RunSpec small_ode_run() {
    RunSpec s;
    s.fidelity = kOdeSpec;
    s.design.m = 81;
    s.budget = analysis::ToleranceBudget::make(5e-2, analysis::ErrorMode::Relative);
    s.n_samples = 5000;
    s.nn1.hidden_widths = {10, 10};
    s.nn1.training = quick_training(50);
    s.nn2.hidden_widths = {10, 10};
    s.nn2.training = quick_training(80);
    s.master_seed = 42;
    return s;
}

double exact_ode(std::span<const double> y) { return ode().qoi_exact(y); }

nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream f(p);
    return nlohmann::json::parse(f);
}

}  // namespace

TEST(Fidelity, OdePaperDesignCounts) {
    const auto d = build_design(ode(), {241, 4, 0, 0});
    const auto fd = evaluate_fidelity_data(d, kOdeSpec);
    EXPECT_EQ(fd.lf_all.size(), 241u);
    EXPECT_EQ(fd.hf_on_I.size(), 61u);
    EXPECT_GE(fd.lf_seconds, 0.0);
    for (std::size_t i = 0; i < d.m1(); ++i) {
        EXPECT_EQ(fd.lf_all[i], ode().qoi(d.y_I.point(i), 0.5));
        EXPECT_EQ(fd.hf_on_I[i], ode().qoi(d.y_I.point(i), 0.1));
    }
}

TEST(Fidelity, EqualStepsAgreeExactly) {
    const auto d = build_design(ode(), {41, 4, 0, 0});
    const auto fd = evaluate_fidelity_data(d, {0.1, 0.1, 2.0, models::ModelId::Ode15});
    for (std::size_t i = 0; i < d.m1(); ++i) EXPECT_EQ(fd.lf_all[i], fd.hf_on_I[i]);
}

TEST(Fidelity, ValuesWithinBiasBoundOfExact) {
    const std::vector<double> steps{0.5, 0.1};
    const auto fit = analysis::fit_bias_constant(ode(), steps, 400, 3);
    const auto d = build_design(ode(), {241, 4, 0, 0});
    const auto fd = evaluate_fidelity_data(d, kOdeSpec);
    for (std::size_t i = 0; i < d.m1(); ++i) {
        const double q = ode().qoi_exact(d.y_I.point(i));
        // max over 400 random draws, 5% slack for design points beyond it
        EXPECT_LE(std::abs(fd.hf_on_I[i] - q), fit.max_errors[1] * 1.05);
        EXPECT_LE(std::abs(fd.lf_all[i] - q), fit.max_errors[0] * 1.05);
    }
}

TEST(Fidelity, ThreadCountDoesNotChangeValues) {
    const auto d = build_design(wave(), {0, 4, 9, 7});
    const models::BiFidelitySpec s{1.0 / 20, 1.0 / 32, 2.0, models::ModelId::Wave16};
    const auto a = evaluate_fidelity_data(d, s, 1);
    const auto b = evaluate_fidelity_data(d, s, 3);
    EXPECT_EQ(a.lf_all, b.lf_all);
    EXPECT_EQ(a.hf_on_I, b.hf_on_I);
}

TEST(Fidelity, SolverFailureNamesThePoint) {
    const auto d = build_design(wave(), {0, 4, 3, 3});
    try {
        evaluate_fidelity_data(d, {0.3, 0.2, 2.0, models::ModelId::Wave16});
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("at y = "), std::string::npos);
    }
}

TEST(Nn1, LearnsIdentityCorrelation) {
    // Q_HF := Q_LF on Y_I: NN1 should reproduce q on unseen Y_II points
    const auto d = build_design(ode(), {241, 4, 0, 0});
    const auto fd = evaluate_fidelity_data(d, kOdeSpec);
    const std::vector<double> target(fd.lf_all.begin(), fd.lf_all.begin() + static_cast<long>(d.m1()));
    const InputScaling sc{design::ScalingTransform::unit(d.domain),
                          design::MinMaxScaler::fit(std::span<const double>(target))};
    nnet::Architecture a{2, {20, 20, 20, 20}, 1};
    const auto r = train_nn1(d, fd.lf_all, target, sc, a, quick_training(400, 10, 0.002), 1);
    EXPECT_EQ(r.params.arch.input_width, 2u);
    const double rmse = std::sqrt(r.history.final_train_loss);
    const auto aug = augment_hf(r.params, d, fd.lf_all, target, sc);
    // only points whose q lies inside the Y_I range: outside it NN1 extrapolates.
    // pointwise max is recorded but the bound is on the held-out RMS, 61 points are too sparse for a sup bound
    const auto [lo, hi] = std::minmax_element(target.begin(), target.end());
    double worst = 0, ss = 0;
    std::size_t checked = 0;
    for (std::size_t k = 0; k < d.m2(); ++k) {
        const double q = fd.lf_all[d.m1() + k];
        if (q < *lo || q > *hi) continue;
        const double e = aug.values[d.m1() + k] - q;
        worst = std::max(worst, std::abs(e));
        ss += e * e;
        ++checked;
    }
    RecordProperty("rmse", std::to_string(rmse));
    RecordProperty("worst", std::to_string(worst));
    EXPECT_GE(checked, 170u);
    EXPECT_LE(std::sqrt(ss / static_cast<double>(checked)), 5.0 * rmse);
}

TEST(Augment, CaseSplitIsBitExact) {
    const auto d = build_design(ode(), {241, 4, 0, 0});
    const auto fd = evaluate_fidelity_data(d, kOdeSpec);
    const InputScaling sc{design::ScalingTransform::unit(d.domain),
                          design::MinMaxScaler::fit(std::span<const double>(fd.lf_all.data(), d.m1()))};
    const auto nn1 = nnet::train(nnet::Architecture{2, {8}, 1},
                                 nnet::Dataset{nn1_inputs(d.y_I, std::span(fd.lf_all).first(d.m1()), sc),
                                               Eigen::Map<const nnet::Matrix>(fd.hf_on_I.data(), 61, 1)},
                                 quick_training(5), 0)
                         .params;
    const auto aug = augment_hf(nn1, d, fd.lf_all, fd.hf_on_I, sc);
    ASSERT_EQ(aug.size(), 241u);
    std::size_t solver = 0, net = 0;
    for (std::size_t i = 0; i < aug.size(); ++i) (aug.provenance[i] == Provenance::Solver ? solver : net)++;
    EXPECT_EQ(solver, 61u);
    EXPECT_EQ(net, 180u);
    for (std::size_t i = 0; i < 61; ++i) {
        EXPECT_EQ(std::memcmp(&aug.values[i], &fd.hf_on_I[i], sizeof(double)), 0);
        EXPECT_EQ(aug.provenance[i], Provenance::Solver);
        EXPECT_EQ(aug.points.point(i)[0], d.y_I.point(i)[0]);
    }
    for (std::size_t k = 0; k < 180; ++k) {
        const double* y = d.y_II.point(k).data();
        const double qs = sc.q_lf.apply(fd.lf_all[61 + k]);
        const double want = nnet::forward(nn1, std::vector<double>{sc.y.apply(d.y_II.point(k))[0], qs})[0];
        EXPECT_NEAR(aug.values[61 + k], want, 1e-13 * std::max(1.0, std::abs(want))) << *y;
    }
}

TEST(Augment, PerfectStubReproducesHighFidelity) {
    const auto d = build_design(ode(), {121, 4, 0, 0});
    const auto fd = evaluate_fidelity_data(d, kOdeSpec);
    const auto aug = augment_hf([](std::span<const double> y, double) { return ode().qoi(y, 0.1); }, d,
                                fd.lf_all, fd.hf_on_I);
    const auto all = d.all_points();
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(aug.values[i], ode().qoi(all.point(i), 0.1));
}

TEST(Nn2, ConstantTargetConverges) {
    const auto d = build_design(wave(), {0, 4, 11, 11});
    AugmentedDataset data;
    data.points = d.all_points();
    data.values.assign(d.m(), 0.37);
    data.provenance.assign(d.m(), Provenance::Solver);
    const auto sc = design::ScalingTransform::unit(d.domain);
    const auto r = train_nn2(data, sc, nnet::Architecture{2, {10, 10}, 1}, quick_training(600, 11, 0.005), 2);
    EXPECT_EQ(r.params.arch.input_width, 2u);
    const NetworkSurrogate s(r.params, sc);
    const auto ys = design::draw_mc_samples(2000, d.domain, 1);
    std::vector<double> out(ys.size());
    s.evaluate(ys, out);
    for (double v : out) EXPECT_NEAR(v, 0.37, 1e-3);
}

TEST(Estimators, ConstantSurrogate) {
    const FunctionSurrogate c(1, [](std::span<const double>) { return 2.5; });
    const auto r = estimate_mfnnmc(c, SampleStream{ode().parameter_domain(), 1000, 1});
    EXPECT_EQ(r.estimate, 2.5);
    EXPECT_EQ(r.sample_variance, 0.0);
    EXPECT_EQ(r.n_samples, 1000u);
    EXPECT_EQ(r.method, Method::MFNNMC);
    EXPECT_EQ(r.cost.counts.n, 1000u);
    EXPECT_FALSE(r.reference.has_value());
}

TEST(Estimators, ExactOracleWithinCltBand) {
    const FunctionSurrogate q(1, exact_ode);
    auto r = estimate_mfnnmc(q, SampleStream{ode().parameter_domain(), 1000000, 9});
    r.set_reference(ode().reference_mean());
    EXPECT_LE(*r.error_abs, 4.0 * std::sqrt(r.sample_variance / 1e6));
}

TEST(Estimators, DuplicatedSamplesKeepMean) {
    const FunctionSurrogate q(1, exact_ode);
    const auto ys = design::draw_mc_samples(20000, ode().parameter_domain(), 4);
    auto twice = ys;
    twice.values.insert(twice.values.end(), ys.values.begin(), ys.values.end());
    const auto a = estimate_mfnnmc(q, ys), b = estimate_mfnnmc(q, twice);
    EXPECT_NEAR(a.estimate, b.estimate, 1e-13 * a.estimate);
    EXPECT_NEAR(b.sample_variance, a.sample_variance * (2.0 * 19999.0) / (2.0 * 20000.0 - 1.0),
                1e-10 * a.sample_variance);
}

TEST(Estimators, Linearity) {
    const auto ys = design::draw_mc_samples(30000, wave().parameter_domain(), 5);
    const FunctionSurrogate q(2, [](std::span<const double> y) { return wave().qoi_exact(y); });
    for (double a : {-3.0, 0.5, 7.0}) {
        const FunctionSurrogate aq(2, [a](std::span<const double> y) { return a * wave().qoi_exact(y); });
        EXPECT_NEAR(estimate_mfnnmc(aq, ys).estimate, a * estimate_mfnnmc(q, ys).estimate, 1e-13 * std::abs(a));
    }
}

TEST(Estimators, MomentOrder) {
    const auto ys = design::draw_mc_samples(1000, ode().parameter_domain(), 6);
    const FunctionSurrogate q(1, exact_ode);
    EstimateOptions opt;
    opt.moment = 2;
    double s = 0;
    for (std::size_t i = 0; i < ys.size(); ++i) s += std::pow(exact_ode(ys.point(i)), 2);
    EXPECT_NEAR(estimate_mfnnmc(q, ys, opt).estimate, s / 1000.0, 1e-12 * s);
}

TEST(Estimators, HfmcExactStubAndSolver) {
    const auto ys = design::draw_mc_samples(500, ode().parameter_domain(), 7);
    const FunctionSurrogate q(1, exact_ode);
    double s = 0;
    for (std::size_t i = 0; i < ys.size(); ++i) s += exact_ode(ys.point(i));
    const auto r = estimate_hfmc(q, ys);
    EXPECT_EQ(r.method, Method::HFMC);
    EXPECT_NEAR(r.estimate, s / 500.0, 1e-13 * s);
    EXPECT_EQ(r.cost.total_hfmc, 500.0 * r.cost.unit.w_hf);
}

TEST(Estimators, HfmcWithinCltPlusBias) {
    const double h = 0.025;
    const std::vector<double> steps{0.05, 0.025};
    const double c = analysis::fit_bias_constant(ode(), steps, 100, 8).constant;
    auto r = estimate_hfmc(ode(), h, SampleStream{ode().parameter_domain(), 10000, 21});
    r.set_reference(ode().reference_mean());
    EXPECT_LE(*r.error_abs, 4.0 * std::sqrt(r.sample_variance / 1e4) + c * h * h);
}

TEST(Estimators, OracleMfnnmcAgreesWithExactHfmc) {
    const std::size_t n = 200000;
    const FunctionSurrogate q(1, exact_ode);
    const auto a = estimate_mfnnmc(q, SampleStream{ode().parameter_domain(), n, 31});
    const auto b = estimate_hfmc(q, design::draw_mc_samples(n, ode().parameter_domain(), 32));
    EXPECT_LE(std::abs(a.estimate - b.estimate),
              4.0 * std::sqrt((a.sample_variance + b.sample_variance) / static_cast<double>(n)));
}

TEST(Estimators, ThreadCountIndependentBitExact) {
    const FunctionSurrogate q(1, exact_ode);
    const SampleStream stream{ode().parameter_domain(), 3 * kReductionBlock + 123, 3};
    EstimateOptions o1, o4;
    o4.threads = 4;
    const auto a = estimate_mfnnmc(q, stream, o1), b = estimate_mfnnmc(q, stream, o4);
    EXPECT_EQ(std::memcmp(&a.estimate, &b.estimate, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&a.sample_variance, &b.sample_variance, sizeof(double)), 0);
    // the stream equals the explicit sample list
    const auto c = estimate_mfnnmc(q, design::draw_mc_samples(stream.n, stream.domain, stream.seed), o4);
    EXPECT_EQ(a.estimate, c.estimate);
}

TEST(Estimators, TreeMergeMatchesDirect) {
    std::vector<Moments> blocks(5);
    Moments all;
    for (int b = 0; b < 5; ++b)
        for (int i = 0; i < 100 + b; ++i) {
            const double x = std::sin(0.1 * (b * 1000 + i));
            blocks[b].add(x);
            all.add(x);
        }
    const auto t = tree_merge(blocks);
    EXPECT_EQ(t.count, all.count);
    EXPECT_NEAR(t.mean, all.mean, 1e-15);
    EXPECT_NEAR(t.variance(), all.variance(), 1e-14);
}

TEST(Campaign, DeterministicAcrossRepeatsAndThreads) {
    const auto s = small_ode_run();
    RunOptions o1, o2;
    o2.threads = 3;
    const auto a = run_mfnnmc(s, o1), b = run_mfnnmc(s, o2);
    EXPECT_EQ(a.result.estimate, b.result.estimate);
    EXPECT_EQ(a.result.sample_variance, b.result.sample_variance);
    EXPECT_TRUE(a.result.cost.counts == b.result.cost.counts);
    EXPECT_TRUE(a.bundle.nn1 == b.bundle.nn1);
    EXPECT_TRUE(a.bundle.nn2 == b.bundle.nn2);
    EXPECT_TRUE(a.bundle.nn2_history == b.bundle.nn2_history);
    auto s2 = s;
    s2.repetition = 1;
    EXPECT_NE(run_mfnnmc(s2).result.estimate, a.result.estimate);
}

TEST(Campaign, InvariantsOfOutcome) {
    const auto out = run_mfnnmc(small_ode_run());
    EXPECT_EQ(out.bundle.nn1.arch.input_width, 2u);
    EXPECT_EQ(out.bundle.nn2.arch.input_width, 1u);
    EXPECT_EQ(out.bundle.nn2.arch.output_width, 1u);
    EXPECT_EQ(out.augmented.size(), 81u);
    for (std::size_t i = 0; i < out.design.m1(); ++i) EXPECT_EQ(out.augmented.values[i], out.fidelity.hf_on_I[i]);
    EXPECT_EQ(out.result.cost.total_mfnnmc, out.result.cost.six_term_sum());
    EXPECT_EQ(out.result.cost.counts.m1, 21u);
    EXPECT_EQ(out.result.cost.counts.n, 5000u);
    EXPECT_GE(out.result.sample_variance, 0.0);
    ASSERT_TRUE(out.result.reference.has_value());
    EXPECT_EQ(*out.result.reference, ode().reference_mean());
}

TEST(Campaign, PilotChoosesN) {
    auto s = small_ode_run();
    s.n_samples = 0;
    s.pilot_samples = 2000;
    const auto out = run_mfnnmc(s);
    EXPECT_EQ(out.pilot_n, 2000u);
    EXPECT_EQ(out.result.n_samples, analysis::select_n_samples(s.budget, out.pilot_variance, out.pilot_mean));
}

TEST(Campaign, StageTagOnFailure) {
    auto s = small_ode_run();
    s.nn1.training.batch_size = 500;
    try {
        run_mfnnmc(s);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "nn1");
    }
    s = small_ode_run();
    s.design.m = 3;
    try {
        run_mfnnmc(s);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "design");
    }
}

TEST(Campaign, ArtifactsWritten) {
    const auto dir = std::filesystem::temp_directory_path() / "mfnn_pipeline_artifacts";
    std::filesystem::remove_all(dir);
    RunOptions o;
    o.artifacts_dir = dir;
    const auto out = run_mfnnmc(small_ode_run(), o);
    for (const char* f : {"design.csv", "fidelity.csv", "nn1.ckpt", "nn2.ckpt", "result.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    const auto j = read_json(dir / "result.json");
    EXPECT_EQ(j.at("estimate").get<double>(), out.result.estimate);
    EXPECT_EQ(j.at("n_samples").get<std::size_t>(), 5000u);
    EXPECT_EQ(j.at("method").get<std::string>(), "MFNNMC");
    EXPECT_TRUE(nnet::load_checkpoint(dir / "nn2.ckpt") == out.bundle.nn2);
    const auto back = result_from_json(j);
    EXPECT_EQ(back.estimate, out.result.estimate);
    EXPECT_TRUE(back.cost == out.result.cost);
    std::filesystem::remove_all(dir);
}

TEST(Campaign, NoSecondLevelDataReducesToPureHighFidelity) {
    // stride 1: every point in Y_I, NN2 trained on HF data only
    RunSpec s;
    s.fidelity = kOdeSpec;
    s.design = {241, 1, 0, 0};
    s.budget = analysis::ToleranceBudget::make(1e-2, analysis::ErrorMode::Relative);
    s.n_samples = 135000;
    s.scaling_lower = -1;
    s.scaling_upper = 1;
    s.nn2.training.epochs = 3000;
    s.nn2.training.batch_size = 10;
    s.nn2.training.learning_rate = 0.002;
    s.nn2.training.init.bias = nnet::BiasInit::Spread;
    s.nn2.training.lr_schedule = nnet::ReduceOnPlateau{100, 0.5, 1e-5};
    s.master_seed = 5;
    const auto out = run_mfnnmc(s);
    EXPECT_FALSE(out.bundle.has_nn1);
    EXPECT_EQ(out.result.cost.counts.m2, 0u);
    EXPECT_TRUE(std::isfinite(out.result.estimate));
    EXPECT_LE(*out.result.error_rel, 1e-2);
}
