#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qsync/probe.hpp"
#include "test_helpers.hpp"

using namespace qsync;
using namespace qsync::test;

namespace {

QubitPairParams base(double lam, double T = 0.0) { return params(1.0, lam, T); }

std::vector<TransitionPoint> analytic_constraints(const SpectralDensityModel& truth, double T = 0.0) {
    const auto set = collect_constraints(truth, base(0.2, T), {0.1, 0.15, 0.2, 0.25, 0.3});
    EXPECT_TRUE(set.failures.empty());
    return set.points;
}

} // namespace

TEST(PredictTransition, PowerLawLineSelfConsistency) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> sd(0.5, 2.5), ld(0.05, 0.4);
    for (int draw = 0; draw < 30; ++draw) {
        const double s = sd(rng), lam = ld(rng);
        const PowerLawCutoff bath{0.01, s, std::nullopt};
        const double w = predict_transition(bath, base(lam), 0.3, 3.0);
        auto p = base(lam);
        p.omega_p = w;
        EXPECT_LT(std::abs(power_law_line(diagonalize(p)) - s), 1e-6) << "s=" << s << " lambda=" << lam;
    }
}

TEST(PredictTransition, RatesCoincideAtRoot) {
    const PowerLawCutoff bath{0.01, 2.0, 20.0};
    auto p = base(0.2);
    p.omega_p = predict_transition(bath, p, 0.6, 1.6);
    const auto r = lindblad_rates(diagonalize(p), bath, 0.0);
    EXPECT_NEAR(r.g1_down / r.g2_down, 1.0, 1e-9);
}

TEST(PredictTransition, CutoffDisplacesRootSlightly) {
    const double pure = predict_transition(PowerLawCutoff{0.01, 2.0, std::nullopt}, base(0.2), 0.6, 1.6);
    const double cut = predict_transition(PowerLawCutoff{0.01, 2.0, 20.0}, base(0.2), 0.6, 1.6);
    EXPECT_GT(std::abs(cut - pure), 1e-5);
    EXPECT_LT(std::abs(cut - pure), 0.02);
}

TEST(PredictTransition, FiniteTemperatureEqualizesTotalRates) {
    const auto bath = ohmic();
    auto p = base(0.2, 1.0);
    p.omega_p = predict_transition(bath, p, 0.6, 1.6);
    const auto eig = diagonalize(p);
    const auto r = lindblad_rates(eig, bath, 1.0);
    EXPECT_NEAR(r.total1() / r.total2(), 1.0, 1e-9);
    EXPECT_NEAR(evaluate_J(bath, eig.E1) / evaluate_J(bath, eig.E2), constraint_ratio(eig, 1.0), 1e-8);
}

TEST(PredictTransition, NoCrossingInBracket) {
    EXPECT_THROW(predict_transition(ohmic(), base(0.2), 1.3, 1.6), NoTransitionError);
    EXPECT_THROW(predict_transition(ohmic(), base(0.2), 1.6, 1.3), DomainError);
}

TEST(ScanTransition, SignalJumpTracksRateCrossing) {
    const PowerLawCutoff bath{0.01, 2.0, 20.0};
    const auto tp = scan_transition(bath, base(0.2), linear_grid(0.6, 1.6, 41));
    const double pred = predict_transition(bath, base(0.2), 0.6, 1.6);
    EXPECT_LT(std::abs(tp.omega_p_bar - pred), 0.05);
    EXPECT_GT(tp.omega_p_bar, 0.6);
    EXPECT_LT(tp.omega_p_bar, 1.6);
    EXPECT_GT(tp.ratio, 0.0);
}

TEST(ScanTransition, OhmicSingleJumpOfModeSplitting) {
    const auto tp = scan_transition(ohmic(), base(0.2), linear_grid(0.6, 1.6, 41));
    ASSERT_TRUE(tp.omega_sync_below && tp.omega_sync_above);
    const double bin = 2 * std::numbers::pi / (4 * 2201 * 0.05);
    EXPECT_NEAR(std::abs(*tp.omega_sync_above - *tp.omega_sync_below), tp.E1 - tp.E2, 2 * bin);
}

TEST(ScanTransition, GridWithoutJump) {
    EXPECT_THROW(scan_transition(ohmic(), base(0.2), linear_grid(1.3, 1.6, 7)), NoTransitionError);
    EXPECT_THROW(scan_transition(ohmic(), base(0.2), {1.0, 0.9, 1.1}), DomainError);
}

TEST(InferSystemParams, ExactEigenfrequencies) {
    const auto e = invert_eigenfrequencies({1.2, 1.341640786, 0.894427191});
    EXPECT_NEAR(e.omega_q, 1.0, 1e-6);
    EXPECT_NEAR(e.lambda, 0.2, 1e-6);
}

TEST(InferSystemParams, UncoupledPeaksGiveQubitDirectly) {
    EXPECT_NEAR(invert_eigenfrequencies({0.7, 1.0, 0.7}).omega_q, 1.0, 1e-15);
    EXPECT_NEAR(invert_eigenfrequencies({1.4, 1.4, 1.0}).omega_q, 1.0, 1e-15);
    EXPECT_NEAR(invert_eigenfrequencies({1.4, 1.4, 1.0}).lambda, 0.0, 1e-7);
}

TEST(InferSystemParams, Errors) {
    EXPECT_THROW(invert_eigenfrequencies({2.0, 1.0, 0.9}), InversionError);
    SpectrumEstimate empty;
    EXPECT_THROW(infer_system_params(empty, 1.2), InsufficientSpectrumError);
}

TEST(InferSystemParams, FromSimulatedSpectra) {
    std::vector<ProbeMeasurement> data;
    for (double wp : {1.2, 0.8}) {
        const auto m = model(params(wp, 0.2), ohmic());
        const auto traj = evolve_analytic(m.eig, m.ops, m.rates, plus_plus_state(), uniform_times(0.05, 110.0));
        const auto spec = windowed_fft(traj.sx_p, traj.times, 0.0, 110.0);
        const auto single = infer_system_params(spec, wp);
        EXPECT_NEAR(single.omega_q, 1.0, 0.02);
        EXPECT_NEAR(single.lambda, 0.2, 0.2 * 0.02);
        data.push_back(peaks_of(spec, wp));
    }
    const auto joint = infer_system_params(data);
    EXPECT_NEAR(joint.omega_q, 1.0, 0.02);
    EXPECT_NEAR(joint.lambda, 0.2, 0.01);
    EXPECT_LT(joint.consistency, 0.02);
}

TEST(InferSystemParams, RoundTripOnRandomGrid) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> wq(0.5, 2.0), wp(0.3, 2.5), lam(0.0, 0.5);
    for (int draw = 0; draw < 50; ++draw) {
        QubitPairParams p;
        p.omega_q = wq(rng);
        p.omega_p = wp(rng);
        p.lambda = lam(rng);
        const auto eig = diagonalize(p);
        const auto e = invert_eigenfrequencies({p.omega_p, eig.E1, eig.E2});
        EXPECT_NEAR(e.omega_q, p.omega_q, 1e-10);
        EXPECT_NEAR(e.lambda, p.lambda, 1e-6);
    }
}

TEST(CollectConstraints, AnalyticPointsAreDistinctAndSorted) {
    const PowerLawCutoff truth{0.01, 2.0, std::nullopt};
    const auto pts = analytic_constraints(truth);
    ASSERT_EQ(pts.size(), 5u);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        EXPECT_GT(pts[i].lambda, pts[i - 1].lambda);
        EXPECT_NE(pts[i].E1, pts[i - 1].E1);
        EXPECT_NE(pts[i].E2, pts[i - 1].E2);
    }
    for (const auto& tp : pts) {
        auto p = base(tp.lambda);
        p.omega_p = tp.omega_p_bar;
        const double t = std::tan(diagonalize(p).theta_sum());
        EXPECT_NEAR(tp.ratio, t * t, 1e-14);
    }
}

TEST(CollectConstraints, FailuresAreReportedAndOrderDoesNotMatter) {
    CollectConfig cfg;
    cfg.omega_p_lo = 0.9;
    cfg.omega_p_hi = 1.2;
    const auto a = collect_constraints(ohmic(), base(0.2), {0.3, -0.1, 0.2, 0.0}, cfg);
    const auto b = collect_constraints(ohmic(), base(0.2), {0.0, 0.2, -0.1, 0.3}, cfg);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.points.size(), 2u);
    ASSERT_EQ(a.failures.size(), 2u);
    EXPECT_DOUBLE_EQ(a.failures[0].lambda, -0.1);
    EXPECT_DOUBLE_EQ(a.failures[1].lambda, 0.0);
}

TEST(CollectConstraints, SignalPathForSingleCoupling) {
    CollectConfig cfg;
    cfg.source = ConstraintSource::Signal;
    const auto set = collect_constraints(PowerLawCutoff{0.01, 2.0, 20.0}, base(0.2), {0.2}, cfg);
    ASSERT_EQ(set.points.size(), 1u);
    EXPECT_TRUE(set.points[0].omega_sync_below.has_value());
}

TEST(FitSpectralDensity, ExactConstraintsRecoverExponent) {
    const auto pts = analytic_constraints(PowerLawCutoff{0.01, 2.0, std::nullopt});
    const auto r = fit_spectral_density(pts, FitFamily::PowerLaw);
    ASSERT_TRUE(r.power_law);
    EXPECT_NEAR(r.power_law->s, 2.0, 1e-4);
    EXPECT_FALSE(r.amplitude_identified);
    EXPECT_EQ(r.residuals.size(), pts.size());

    const auto cut = analytic_constraints(PowerLawCutoff{0.01, 2.0, 20.0});
    FitOptions opt;
    opt.omega_c = 20.0;
    const auto rc = fit_spectral_density(cut, FitFamily::PowerLaw, std::nullopt, opt);
    EXPECT_NEAR(rc.power_law->s, 2.0, 1e-4);
    EXPECT_TRUE(rc.diagnostics.converged);
}

TEST(FitSpectralDensity, SingleConstraintFixesExponentNotAmplitude) {
    const auto set = collect_constraints(PowerLawCutoff{0.01, 1.5, std::nullopt}, base(0.2), {0.2});
    const auto r = fit_spectral_density(set.points, FitFamily::PowerLaw);
    EXPECT_NEAR(r.power_law->s, 1.5, 1e-6);
    EXPECT_FALSE(r.amplitude_identified);
}

TEST(FitSpectralDensity, AmplitudeRescalingLeavesExponentUnchanged) {
    const auto a = analytic_constraints(PowerLawCutoff{0.01, 2.0, 20.0});
    const auto b = analytic_constraints(PowerLawCutoff{0.5, 2.0, 20.0});
    FitOptions opt;
    opt.omega_c = 20.0;
    EXPECT_NEAR(fit_spectral_density(a, FitFamily::PowerLaw, std::nullopt, opt).power_law->s,
                fit_spectral_density(b, FitFamily::PowerLaw, std::nullopt, opt).power_law->s, 1e-12);
}

TEST(FitSpectralDensity, RatePrefactorCancels) {
    const PowerLawCutoff truth{0.01, 2.0, 20.0};
    CollectConfig cfg;
    cfg.predict.rate_prefactor = 1.0;
    const auto a = collect_constraints(truth, base(0.2), {0.1, 0.2, 0.3}, cfg);
    cfg.predict.rate_prefactor = kDefaultRatePrefactor;
    const auto b = collect_constraints(truth, base(0.2), {0.1, 0.2, 0.3}, cfg);
    for (std::size_t i = 0; i < a.points.size(); ++i)
        EXPECT_NEAR(a.points[i].omega_p_bar, b.points[i].omega_p_bar, 1e-10);
}

TEST(FitSpectralDensity, LinewidthDatumFixesAmplitude) {
    const PowerLawCutoff truth{0.025, 2.0, 20.0};
    const auto pts = analytic_constraints(truth);
    LinewidthDatum d;
    d.params = params(1.2, 0.2);
    const auto rates = lindblad_rates(diagonalize(d.params), truth, 0.0);
    d.fwhm = std::min(rates.total1(), rates.total2());
    FitOptions opt;
    opt.omega_c = 20.0;
    const auto r = fit_spectral_density(pts, FitFamily::PowerLaw, d, opt);
    ASSERT_TRUE(r.amplitude_identified);
    EXPECT_NEAR(r.power_law->gamma0, 0.025, 1e-8);
    EXPECT_EQ(r.diagnostics.surviving_mode, 1);
}

TEST(FitSpectralDensity, TabulatedReproducesConstraints) {
    const PowerLawCutoff truth{0.01, 2.0, 20.0};
    const auto pts = analytic_constraints(truth);
    const auto r = fit_spectral_density(pts, FitFamily::Tabulated);
    ASSERT_TRUE(r.tabulated);
    EXPECT_EQ(r.residuals.size(), pts.size());
    EXPECT_LT(r.diagnostics.rms_residual, 0.05);
    r.tabulated->validate();
    // shape relative to node 0 against the truth
    const auto& t = r.tabulated->points;
    const double ref = evaluate_J(truth, t.front().first);
    for (const auto& [w, j] : t) EXPECT_NEAR(std::log(j), std::log(evaluate_J(truth, w) / ref), 0.1);
}

TEST(FitSpectralDensity, TabulatedRankDeficiency) {
    const auto set = collect_constraints(ohmic(), base(0.2), {0.2});
    EXPECT_THROW(fit_spectral_density(set.points, FitFamily::Tabulated), RankDeficiencyError);
    const auto pts = analytic_constraints(ohmic());
    FitOptions opt;
    opt.nodes = {0.5, 0.7, 0.8, 0.85, 0.9, 1.0, 1.5};
    try {
        fit_spectral_density(pts, FitFamily::Tabulated, std::nullopt, opt);
        FAIL() << "expected a rank deficiency";
    } catch (const RankDeficiencyError& e) {
        EXPECT_FALSE(e.unconstrained_nodes.empty());
        EXPECT_EQ(e.unconstrained_nodes.front(), 0u);
    }
}
