//! Acceptance suite: one test per criterion, each printing a `[PASS]` line
//! with the measured quantities (run with `--nocapture` to see them all).
//!
//! Tolerances are pinned in the asserts; every criterion also pins its
//! runtime budget.

use std::f64::consts::PI;
use std::time::Instant;

use slvq_core::conditioning::{
    exit_statistics, fleming_viot, histogram_tv, ks_distance_to_exponential, sample_from_density,
    survival_rate_from_nu1, FvConfig, KilledKernel, StepOutcome,
};
use slvq_core::harness::{DirichletBox, SlvBoundaryKernel};
use slvq_core::model::{validate_params, Axis, KolmogorovModel, RawParams};
use slvq_core::regimes::{classify, scan_phase_transition, Classification, ScanConfig};
use slvq_core::sde::{coupled_comparison, Opponent, Scheme, SimConfig};
use slvq_core::spectral::{
    auto_axis_spec, conditioned_tv_trajectory, fit_log_decay, mollified_point, solve_on_grid,
    solve_qsd_1d, solve_qsd_2d, AxisSpec, EvolveOptions, Grid, SolveOptions,
};

fn independent_model() -> KolmogorovModel {
    KolmogorovModel::new(validate_params(&RawParams::independent_ones()).unwrap())
}

fn model_with_cross(c12: f64, c21: f64) -> KolmogorovModel {
    KolmogorovModel::new(validate_params(&RawParams::all_ones_with_cross(c12, c21)).unwrap())
}

fn elapsed_ok(t0: Instant, budget_s: f64, label: &str) {
    let dt = t0.elapsed().as_secs_f64();
    assert!(
        dt < budget_s,
        "{label}: runtime {dt:.1}s over budget {budget_s}s"
    );
}

/// Criterion 1: analytic Dirichlet-Laplacian eigenvalue regression.
#[test]
fn c01_analytic_eigenvalue_regression() {
    let t0 = Instant::now();
    let box1 = DirichletBox::new(1, PI);
    let grid1 = Grid::new_1d(AxisSpec::new(0.0, PI, 400).unwrap());
    let res1 = solve_on_grid(&box1, &grid1, 2, &SolveOptions::default()).unwrap();
    assert!(
        (res1.lambda[0] - 0.5).abs() <= 1e-3 * 0.5,
        "1D lambda1 = {}",
        res1.lambda[0]
    );
    assert!(
        (res1.lambda[1] - 2.0).abs() <= 1e-3 * 2.0,
        "1D lambda2 = {}",
        res1.lambda[1]
    );

    let box2 = DirichletBox::new(2, PI);
    let grid2 = Grid::square(AxisSpec::new(0.0, PI, 200).unwrap());
    let res2 = solve_on_grid(&box2, &grid2, 1, &SolveOptions::default()).unwrap();
    assert!(
        (res2.lambda[0] - 1.0).abs() <= 1e-2,
        "2D lambda1 = {}",
        res2.lambda[0]
    );
    elapsed_ok(t0, 30.0, "criterion 1");
    println!(
        "[PASS] criterion 1: Dirichlet harness lambda = ({:.6}, {:.6}) 1D, {:.6} 2D ({:.1?})",
        res1.lambda[0],
        res1.lambda[1],
        res2.lambda[0],
        t0.elapsed()
    );
}

/// Criterion 2: independence additivity and product structure of the
/// ground state.
#[test]
fn c02_independence_additivity() {
    let t0 = Instant::now();
    let model = independent_model();
    let spec = AxisSpec::new(1e-3, 8.0, 200).unwrap();
    let res2d = solve_qsd_2d(&model, &Grid::square(spec), 1, &SolveOptions::default()).unwrap();
    let res1d = solve_qsd_1d(
        &model,
        Axis::One,
        &Grid::new_1d(spec),
        1,
        &SolveOptions::default(),
    )
    .unwrap();
    let lambda_sum = 2.0 * res1d.lambda[0];
    let rel = (res2d.lambda[0] - lambda_sum).abs() / res2d.lambda[0];
    assert!(rel <= 0.01, "additivity off by {rel:.4}");

    // psi1(2D) against the outer product of the 1D ground states
    let n = spec.n;
    let outer: Vec<f64> = (0..n * n)
        .map(|idx| res1d.psi1[idx / n] * res1d.psi1[idx % n])
        .collect();
    let dot: f64 = res2d.psi1.iter().zip(&outer).map(|(a, b)| a * b).sum();
    let na: f64 = res2d.psi1.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = outer.iter().map(|b| b * b).sum::<f64>().sqrt();
    let cosine = dot / (na * nb);
    assert!(cosine >= 0.999, "cosine similarity {cosine}");
    elapsed_ok(t0, 120.0, "criterion 2");
    println!(
        "[PASS] criterion 2: additivity rel err {rel:.2e}, cosine {cosine:.6} ({:.1?})",
        t0.elapsed()
    );
}

/// Criterion 3: competition inequality and boundary classification.
#[test]
fn c03_competition_inequality() {
    let t0 = Instant::now();
    let sets = [
        RawParams::all_ones_with_cross(1.0, 1.0),
        RawParams {
            gamma2: 2.0,
            c12: 1.0,
            c21: 2.0,
            ..RawParams::independent_ones()
        },
        RawParams {
            r1: 1.5,
            r2: 0.8,
            c12: 0.7,
            c21: 0.7,
            ..RawParams::independent_ones()
        },
    ];
    for raw in sets {
        let model = KolmogorovModel::new(validate_params(&raw).unwrap());
        let grid2 = Grid::square(auto_axis_spec(&model, 160));
        let grid1 = Grid::new_1d(auto_axis_spec(&model, 1200));
        let l1 = solve_qsd_2d(&model, &grid2, 1, &SolveOptions::default())
            .unwrap()
            .lambda[0];
        let l11 = solve_qsd_1d(&model, Axis::One, &grid1, 1, &SolveOptions::default())
            .unwrap()
            .lambda[0];
        let l12 = solve_qsd_1d(&model, Axis::Two, &grid1, 1, &SolveOptions::default())
            .unwrap()
            .lambda[0];
        assert!(
            l1 >= (l11 + l12) * (1.0 - 0.01),
            "competition inequality violated: {l1} vs {} + {}",
            l11,
            l12
        );
        let class = classify(l1, l11, l12, 0.02).unwrap();
        assert!(
            matches!(
                class,
                Classification::BoundaryType1Dominant
                    | Classification::BoundaryType2Dominant
                    | Classification::BoundarySymmetric
            ),
            "expected a boundary regime, got {class:?} ({l1}, {l11}, {l12})"
        );
        println!(
            "  competition {raw:?}: lambda1 = {l1:.5} >= {:.5}, {class:?}",
            l11 + l12
        );
    }
    elapsed_ok(t0, 300.0, "criterion 3");
    println!(
        "[PASS] criterion 3: competition inequality on 3 sets ({:.1?})",
        t0.elapsed()
    );
}

/// Criterion 4: weak-cooperation inequality.
#[test]
fn c04_cooperation_inequality() {
    let t0 = Instant::now();
    let sets = [
        RawParams::all_ones_with_cross(-0.5, -0.5),
        RawParams::all_ones_with_cross(-0.3, -0.3),
        RawParams {
            gamma2: 2.0,
            c12: -0.2,
            c21: -0.4,
            ..RawParams::independent_ones()
        },
    ];
    for raw in sets {
        let model = KolmogorovModel::new(validate_params(&raw).unwrap());
        let grid2 = Grid::square(auto_axis_spec(&model, 160));
        let grid1 = Grid::new_1d(auto_axis_spec(&model, 1200));
        let l1 = solve_qsd_2d(&model, &grid2, 1, &SolveOptions::default())
            .unwrap()
            .lambda[0];
        let l11 = solve_qsd_1d(&model, Axis::One, &grid1, 1, &SolveOptions::default())
            .unwrap()
            .lambda[0];
        let l12 = solve_qsd_1d(&model, Axis::Two, &grid1, 1, &SolveOptions::default())
            .unwrap()
            .lambda[0];
        assert!(
            l1 <= (l11 + l12) * (1.0 + 0.01),
            "cooperation inequality violated: {l1} vs {} + {}",
            l11,
            l12
        );
        println!(
            "  cooperation {raw:?}: lambda1 = {l1:.5} <= {:.5}",
            l11 + l12
        );
    }
    elapsed_ok(t0, 300.0, "criterion 4");
    println!(
        "[PASS] criterion 4: cooperation inequality on 3 sets ({:.1?})",
        t0.elapsed()
    );
}

/// Criterion 5: spectral vs Monte Carlo cross-validation on the
/// independent set.
#[test]
fn c05_spectral_monte_carlo_cross_validation() {
    let t0 = Instant::now();
    let model = independent_model();
    let fine = Grid::square(AxisSpec::new(1e-3, 8.0, 200).unwrap());
    let spectral = solve_qsd_2d(&model, &fine, 1, &SolveOptions::default()).unwrap();
    let lambda1 = spectral.lambda[0];

    // Fleming-Viot on a matched coarse grid
    let coarse = Grid::square(AxisSpec::new(1e-3, 8.0, 36).unwrap());
    let ref_coarse = solve_qsd_2d(&model, &coarse, 1, &SolveOptions::default()).unwrap();
    let sim = SimConfig {
        dt: 5e-4,
        seed: 11,
        ..SimConfig::default()
    };
    let kernel = SlvBoundaryKernel::new(model, &sim);
    let init = sample_from_density(&ref_coarse.qsd_density, &coarse, 2000, 99);
    let fv = fleming_viot(
        &kernel,
        &init,
        &FvConfig {
            n_particles: 2000,
            dt: 5e-4,
            t_burn: 10.0,
            t_sample: 120.0,
            seed: 7,
        },
        &coarse,
    )
    .unwrap();
    let fv_rel = (fv.lambda_fv - lambda1).abs() / lambda1;
    assert!(fv_rel <= 0.05, "lambda_fv {} vs {lambda1}", fv.lambda_fv);
    let tv = histogram_tv(&fv.histogram, &ref_coarse.qsd_density, &coarse);
    assert!(tv <= 0.05, "Fleming-Viot TV distance {tv}");

    // killing-rate fit from QSD starts
    let exit_cfg = SimConfig {
        dt: 2e-4,
        t_max: ((10_000f64).ln() + 12.0) / lambda1,
        seed: 5,
        n_paths: 10_000,
        ..SimConfig::default()
    };
    let check =
        survival_rate_from_nu1(&model, &spectral.qsd_density, &fine, 10_000, &exit_cfg).unwrap();
    let fit_rel = (check.lambda - lambda1).abs() / lambda1;
    assert!(
        fit_rel <= 0.05,
        "survival fit {} vs {lambda1}",
        check.lambda
    );

    elapsed_ok(t0, 600.0, "criterion 5");
    println!(
        "[PASS] criterion 5: lambda_fv rel {fv_rel:.4}, fit rel {fit_rel:.4}, TV {tv:.4} ({:.1?})",
        t0.elapsed()
    );
}

/// Criterion 6: QSD stationarity under the evolved conditioned law and the
/// exponential exit law.
#[test]
fn c06_qsd_stationarity_and_exponential_exit() {
    let t0 = Instant::now();
    let model = independent_model();
    let grid = Grid::square(AxisSpec::new(1e-3, 8.0, 160).unwrap());
    let spectral = solve_qsd_2d(&model, &grid, 1, &SolveOptions::default()).unwrap();
    let lambda1 = spectral.lambda[0];

    let opts = EvolveOptions {
        dt: 0.01,
        record_every: 20,
    };
    let (times, tvs, masses) = conditioned_tv_trajectory(
        &model,
        &grid,
        &spectral.qsd_density,
        &spectral.qsd_density,
        2.0,
        &opts,
    )
    .unwrap();
    let span = times.last().unwrap() - times[0];
    let tv_drift = tvs.iter().cloned().fold(0.0, f64::max) / span;
    assert!(tv_drift <= 1e-6, "TV drift per unit time {tv_drift:.3e}");
    let mass_rate = fit_log_decay(&times, &masses, 0.0, f64::INFINITY)
        .unwrap()
        .0;
    let mass_rel = (mass_rate - lambda1).abs() / lambda1;
    assert!(mass_rel <= 0.01, "mass decay {mass_rate} vs {lambda1}");

    // KS distance of boundary-exit times from QSD starts to Exp(lambda1)
    let n_paths = 10_000usize;
    let exit_cfg = SimConfig {
        dt: 2e-4,
        t_max: ((n_paths as f64).ln() + 12.0) / lambda1,
        seed: 23,
        n_paths,
        ..SimConfig::default()
    };
    let starts = sample_from_density(&spectral.qsd_density, &grid, n_paths, exit_cfg.seed);
    let kernel = SlvBoundaryKernel::new(model, &exit_cfg);
    let n_steps = (exit_cfg.t_max / exit_cfg.dt).ceil() as usize;
    use rayon::prelude::*;
    let exit_times: Vec<f64> = starts
        .par_iter()
        .enumerate()
        .map(|(p, s)| {
            let mut rng = exit_cfg.path_rng(p as u64);
            let mut x = *s;
            for step in 1..=n_steps {
                if let StepOutcome::Absorbed { .. } = kernel.advance(&mut x, exit_cfg.dt, &mut rng)
                {
                    return step as f64 * exit_cfg.dt;
                }
            }
            panic!("path censored at t_max; horizon too short for the exit law check");
        })
        .collect();
    let ks = ks_distance_to_exponential(&exit_times, lambda1);
    assert!(ks <= 0.02, "KS distance {ks}");
    elapsed_ok(t0, 600.0, "criterion 6");
    println!(
        "[PASS] criterion 6: TV drift {tv_drift:.2e}/t, mass rate rel {mass_rel:.2e}, KS {ks:.4} ({:.1?})",
        t0.elapsed()
    );
}

/// Criterion 7: conditioned-law convergence exponent matches the spectral
/// gap on the 1D axis model.
#[test]
fn c07_convergence_rate_matches_spectral_gap() {
    let t0 = Instant::now();
    let model = independent_model();
    let grid = Grid::new_1d(AxisSpec::new(1e-3, 8.0, 800).unwrap());
    let res = solve_qsd_1d(&model, Axis::One, &grid, 2, &SolveOptions::default()).unwrap();
    let gap = res.lambda[1] - res.lambda[0];
    let axis = model.axis_model(Axis::One);
    let rho0 = mollified_point(&grid, [1.0, 0.0], 3.0 * grid.axis(0).h());
    let opts = EvolveOptions {
        dt: 2e-3,
        record_every: 25,
    };
    let (times, tvs, _) =
        conditioned_tv_trajectory(&axis, &grid, &rho0, &res.qsd_density, 16.0 / gap, &opts)
            .unwrap();
    let (rate, used) = fit_log_decay(&times, &tvs, 1e-8, 1e-3).unwrap();
    let rel = (rate - gap).abs() / gap;
    assert!(used >= 6, "only {used} points in the fit window");
    assert!(rel <= 0.10, "TV decay {rate} vs gap {gap}");
    elapsed_ok(t0, 300.0, "criterion 7");
    println!(
        "[PASS] criterion 7: TV exponent {rate:.5} vs gap {gap:.5} (rel {rel:.3}) ({:.1?})",
        t0.elapsed()
    );
}

/// Criterion 8: pathwise coupling monotonicity.
#[test]
fn c08_coupling_monotonicity() {
    let t0 = Instant::now();
    let cfg = SimConfig {
        dt: 1e-4,
        t_max: 6.0,
        n_paths: 1000,
        seed: 3,
        scheme: Scheme::EulerX,
        ..SimConfig::default()
    };
    let competition = model_with_cross(1.0, 1.0);
    let rep_h = coupled_comparison(&competition, [1.0, 1.0], &cfg, Opponent::H).unwrap();
    assert!(
        rep_h.max_excursion <= rep_h.tol_cmp,
        "X vs H excursion {} over tol {}",
        rep_h.max_excursion,
        rep_h.tol_cmp
    );
    let cooperative = model_with_cross(-0.5, -0.5);
    let rep_u = coupled_comparison(&cooperative, [1.0, 1.0], &cfg, Opponent::U).unwrap();
    assert!(
        rep_u.max_excursion <= rep_u.tol_cmp,
        "X vs U excursion {} over tol {}",
        rep_u.max_excursion,
        rep_u.tol_cmp
    );
    elapsed_ok(t0, 300.0, "criterion 8");
    println!(
        "[PASS] criterion 8: excursions H {:.2e}, U {:.2e} <= tol {:.2e} ({:.1?})",
        rep_h.max_excursion,
        rep_u.max_excursion,
        rep_h.tol_cmp,
        t0.elapsed()
    );
}

/// Criterion 9: phase-transition scan of the symmetric cooperative family.
#[test]
fn c09_phase_transition_scan() {
    let t0 = Instant::now();
    let c_values: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let scan = scan_phase_transition(&c_values, &ScanConfig::default()).unwrap();

    // monotone gap table (lambda1 non-increasing in c up to solver noise)
    for w in scan.points.windows(2) {
        assert!(
            w[1].lambda1 <= w[0].lambda1 + 1e-3 * w[0].lambda1.abs().max(1e-3),
            "lambda1 not monotone: {:?} -> {:?}",
            w[0],
            w[1]
        );
    }
    // the family crosses lambda = lambda_axis; the bracket must be tight
    let (lo, hi) = scan.crossing.expect("crossing exists for this family");
    assert!(hi - lo <= 1e-2 + 1e-12, "bracket ({lo}, {hi}) too wide");

    // exit-split invariants on the feasible scan points
    for &c in &[0.1, 0.3, 0.5] {
        let model = model_with_cross(-c, -c);
        let grid = Grid::square(auto_axis_spec(&model, 120));
        let res = solve_qsd_2d(&model, &grid, 1, &SolveOptions::default()).unwrap();
        let n_paths = 1000usize;
        let cfg = SimConfig {
            dt: 1e-3,
            t_max: ((n_paths as f64).ln() + 12.0) / res.lambda[0],
            seed: 77,
            n_paths,
            ..SimConfig::default()
        };
        let stats = exit_statistics(&model, &res.qsd_density, &grid, n_paths, &cfg).unwrap();
        assert_eq!(stats.c1_hat + stats.c2_hat, 1.0, "splits must sum to one");
        assert!(
            stats.c1_hat > 0.0 && stats.c2_hat > 0.0,
            "both exit axes must occur (c = {c}): {stats:?}"
        );
    }
    elapsed_ok(t0, 1200.0, "criterion 9");
    println!(
        "[PASS] criterion 9: crossing bracketed at ({lo:.3}, {hi:.3}), lambda_axis {:.5}, {} scan points ({:.1?})",
        scan.lambda_axis,
        scan.points.len(),
        t0.elapsed()
    );
}
