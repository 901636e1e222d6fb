//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use std::error::Error;
use std::process::ExitCode;
use std::time::Instant;

use hyperdelay_core::chartimes::{
    crossing_window, sup_undamped_measure, tau_bar, tau_star_bounds, three_speed_geometry, undamped_union,
    Interval, ScanSpec, ThreeSpeedCase, UndampedRegion,
};
use hyperdelay_core::model::{diagonalize, sk_check_eigvec, sk_check_kalman, validate_system};
use hyperdelay_core::solver::{Bump, BumpShape, Domain, InitialDataSpec, RunSetup, Simulation};
use hyperdelay_core::spectral::{gamma_estimate, FullSpaceEvolver, DEFAULT_SAMPLES, DEFAULT_XI_MAX};
use hyperdelay_core::{HyperbolicSystem, Mat};
use hyperdelay_lab::envelope::{EnvelopeReport, ONSET_EPS};
use hyperdelay_lab::fit::{fit_decay_rate_between, fit_power_law};
use hyperdelay_lab::pipeline::{run_experiment, verify, Outcome};
use hyperdelay_lab::scenario::{load_scenario, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Res<T> = Result<T, Box<dyn Error>>;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Res<Verdict> {
    Ok(Verdict { passed, detail })
}

fn criterion(id: u32, title: &str, body: impl FnOnce() -> Res<Verdict>) -> bool {
    let start = Instant::now();
    let outcome = body();
    let secs = start.elapsed().as_secs_f64();
    let (passed, detail) = match outcome {
        Ok(v) => (v.passed, v.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("{} criterion {id:>2} [{secs:7.2}s] {title}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

const DAMPED_WAVE: &str = include_str!("../../../scenarios/damped_wave.json");
const THREE_SPEED: &str = include_str!("../../../scenarios/three_speed_321.json");
const CORRIDOR_321: &str = include_str!("../../../scenarios/corridor_321.json");
const CORRIDOR_421: &str = include_str!("../../../scenarios/corridor_421.json");
const GENERIC_321: &str = include_str!("../../../scenarios/generic_321.json");

fn scenario(text: &str) -> Res<Scenario> {
    Ok(load_scenario(text)?)
}

// ---------------------------------------------------------------- corpus

/// Random orthonormal basis; the first column is `lead` when given.
fn basis(rng: &mut ChaCha8Rng, n: usize, lead: Option<Vec<f64>>) -> Mat {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut next = lead;
    while cols.len() < n {
        let mut v = next.take().unwrap_or_else(|| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        for _ in 0..2 {
            for c in &cols {
                let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(c) {
                    *a -= d * b;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            cols.push(v.iter().map(|a| a / norm).collect());
        }
    }
    let mut q = Mat::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            q[(i, j)] = x;
        }
    }
    q
}

struct Case {
    system: HyperbolicSystem,
    /// An eigenvector was planted in the undamped coordinates.
    planted: bool,
}

fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let n = rng.gen_range(2..=6);
    let n1 = rng.gen_range(0..n);
    let speeds = loop {
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        s.sort_by(f64::total_cmp);
        if s.windows(2).all(|w| w[1] - w[0] > 0.05) && s.iter().all(|x| x.abs() > 0.05) {
            break s;
        }
    };
    let planted = n1 > 0 && rng.gen_bool(0.4);
    let lead = planted.then(|| {
        let mut v: Vec<f64> = (0..n).map(|i| if i < n1 { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
        v[0] += 1.5_f64.copysign(v[0]);
        v
    });
    let q = basis(rng, n, lead);
    let flux = q.matmul(&Mat::diag(&speeds)).matmul(&q.transpose()).symmetric_part();
    let n2 = n - n1;
    let l = Mat::from_row_major(n2, n2, &(0..n2 * n2).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
    let mut dd = l.matmul(&l.transpose());
    for i in 0..n2 {
        dd[(i, i)] += 0.1;
    }
    Case { system: HyperbolicSystem::new(n1, flux, dd, None).expect("dimensions agree"), planted }
}

fn corpus() -> Res<Vec<Case>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2024);
    let mut cases = Vec::new();
    while cases.len() < 500 {
        let case = random_case(&mut rng);
        if validate_system(&case.system)?.passed() {
            cases.push(case);
        }
    }
    Ok(cases)
}

struct SkVerdicts {
    eigvec: Vec<bool>,
    kalman: Vec<bool>,
}

fn sk_verdicts(cases: &[Case]) -> Res<SkVerdicts> {
    let mut eigvec = Vec::with_capacity(cases.len());
    let mut kalman = Vec::with_capacity(cases.len());
    for case in cases {
        let eigs = diagonalize(case.system.flux())?;
        let b = case.system.full_damping()?;
        eigvec.push(sk_check_eigvec(&eigs, &b));
        kalman.push(sk_check_kalman(case.system.flux(), &b));
    }
    Ok(SkVerdicts { eigvec, kalman })
}

// ---------------------------------------------------------------- 1, 2

fn sk_equivalence(cases: &[Case]) -> Res<Verdict> {
    let start = Instant::now();
    let sk = sk_verdicts(cases)?;
    let secs = start.elapsed().as_secs_f64();
    let agree = sk.eigvec.iter().zip(&sk.kalman).filter(|(a, b)| a == b).count();
    let planted_fail = cases.iter().zip(&sk.eigvec).filter(|(c, &e)| c.planted && e).count();
    let sk_false = sk.eigvec.iter().filter(|&&e| !e).count();
    verdict(
        agree == cases.len() && planted_fail == 0 && secs < 5.0,
        format!(
            "{agree}/{} agree ({sk_false} SK-false, planted violations missed: {planted_fail}), checks took {secs:.3}s (< 5s)",
            cases.len()
        ),
    )
}

fn spectral_dichotomy(cases: &[Case]) -> Res<Verdict> {
    let sk = sk_verdicts(cases)?;
    let (mut worst_true, mut worst_false) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut bad = 0;
    for (case, &holds) in cases.iter().zip(&sk.eigvec) {
        let scan = gamma_estimate(&case.system, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
        let max = scan
            .xi_grid
            .iter()
            .zip(&scan.abscissas)
            .filter(|(xi, _)| **xi >= 1e-2 && **xi <= 100.0)
            .fold(f64::NEG_INFINITY, |m, (_, a)| m.max(*a));
        if holds {
            worst_true = worst_true.max(max);
            bad += usize::from(max.is_nan() || max >= -1e-12);
        } else {
            worst_false = worst_false.min(max);
            bad += usize::from(max.is_nan() || max < -1e-9);
        }
    }
    verdict(
        bad == 0,
        format!("{bad} misclassified; max abscissa over SK-true {worst_true:.3e} (< -1e-12), min over SK-false {worst_false:.3e} (>= -1e-9)"),
    )
}

// ---------------------------------------------------------------- 3, 4

fn damped_wave() -> HyperbolicSystem {
    HyperbolicSystem::new(1, Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]), Mat::from_rows(&[[1.0]]), None)
        .expect("dimensions agree")
}

fn damped_wave_gamma() -> Res<Verdict> {
    // Roots of μ² + μ + ξ² have real part −1/2 once ξ ≥ 1/2.
    let gamma = gamma_estimate(&damped_wave(), DEFAULT_XI_MAX, DEFAULT_SAMPLES)?.gamma;
    verdict((gamma - 0.5).abs() <= 1e-6, format!("gamma = {gamma:.15} (0.5 ± 1e-6)"))
}

fn fullspace_rates() -> Res<Verdict> {
    let start = Instant::now();
    let sys = damped_wave();
    let gamma = gamma_estimate(&sys, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?.gamma;
    let (cells, dx) = (4096, 0.1);
    let x0 = 0.5 * cells as f64 * dx;
    let gauss: Vec<f64> = (0..cells).map(|j| (-((j as f64 + 0.5) * dx - x0).powi(2) / 2.0).exp()).collect();
    let evolver = FullSpaceEvolver::new(&sys, &[gauss, vec![0.0; cells]], dx)?;
    let mut high = Vec::new();
    for k in 0..=90 {
        let t = 2.0 + 0.2 * k as f64;
        high.push((t, evolver.norms_at(t)?.l2_high));
    }
    let mut low = Vec::new();
    for k in 0..=90 {
        let t = 10.0 * 10f64.powf(k as f64 / 90.0);
        low.push((t, evolver.norms_at(t)?.linf_low));
    }
    let rate = fit_decay_rate_between(&high, 2.0, 20.0)?;
    let slope = fit_power_law(&low, 10.0, 100.0)?;
    let secs = start.elapsed().as_secs_f64();
    let rel = (rate.rate - gamma).abs() / gamma;
    verdict(
        rel <= 0.1 && (slope.slope + 0.5).abs() <= 0.1 && secs < 30.0,
        format!(
            "high-frequency rate {:.4} vs gamma {gamma:.4} ({:.2}% off, <= 10%), low-frequency Linf slope {:.4} (-0.5 ± 0.1)",
            rate.rate,
            100.0 * rel,
            slope.slope
        ),
    )
}

// ---------------------------------------------------------------- 5

fn three_speed_flux(speeds: [f64; 3]) -> Mat {
    let r2 = 2f64.sqrt();
    let p = Mat::from_rows(&[[0.5, 1.0 / r2, 0.5], [-r2 / 2.0, 0.0, r2 / 2.0], [0.5, -1.0 / r2, 0.5]]);
    p.matmul(&Mat::diag(&speeds)).matmul(&p.transpose()).symmetric_part()
}

fn conservative_exactness() -> Res<Verdict> {
    let sys = HyperbolicSystem::new(3, three_speed_flux([-1.0, 1.0, 2.0]), Mat::zeros(0, 0), None)?;
    let bumps = (0..3)
        .map(|component| Bump {
            component,
            shape: BumpShape::CosineBump,
            center: -0.5 + 0.5 * component as f64,
            width: 2.0,
            amplitude: 1.0 + component as f64,
        })
        .collect();
    let domain = Domain { x_min: -30.0, x_max: 30.0, cells: 60_000 };
    let dt = domain.dx();
    let setup = RunSetup { domain, initial: InitialDataSpec::new(bumps), t_final: 10_000.0 * dt, stride: Some(100) };
    let mut sim = Simulation::new(&sys, &setup)?;
    let steps = sim.steps();
    let traj = sim.run()?;
    let l0 = traj.samples[0].l2_total;
    let drift = traj.samples.iter().map(|s| (s.l2_total - l0).abs() / l0).fold(0.0, f64::max);
    verdict(steps >= 10_000 && drift <= 1e-12, format!("{steps} steps, max relative L2 drift {drift:.3e} (<= 1e-12)"))
}

// ---------------------------------------------------------------- 6

fn first_violation(report: &EnvelopeReport) -> Option<f64> {
    let tol = (1.0 + report.slack).ln();
    report.margins.iter().find(|(t, m)| *t >= report.check_from && *m > tol).map(|(t, _)| *t)
}

fn delayed_envelope() -> Res<Verdict> {
    let mut lines = Vec::new();
    let mut passed = true;
    for (text, expected) in [(DAMPED_WAVE, 2.0), (THREE_SPEED, 11.0 / 3.0)] {
        let s = scenario(text)?;
        let start = Instant::now();
        let outcome: Outcome = verify(&s)?;
        let secs = start.elapsed().as_secs_f64();
        let report = outcome.envelope.as_ref().ok_or("no envelope report")?;
        let ok = report.violations == 0 && (report.tau_bar - expected).abs() < 1e-12 && secs < 60.0;
        passed &= ok;
        let first = first_violation(report).map_or(String::from("none"), |t| format!("t = {t:.2}"));
        lines.push(format!(
            "{} tau_bar {:.6}, {} violation(s) over [{:.2}, {:.1}] (first {first}), max margin {:.3}, {secs:.1}s",
            s.name.as_deref().unwrap_or("?"),
            report.tau_bar,
            report.violations,
            report.check_from,
            s.t_final,
            report.max_margin
        ));
    }
    verdict(passed, lines.join("; "))
}

// ---------------------------------------------------------------- 7

fn geometry_oracle() -> Res<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst, mut failures) = (0.0_f64, Vec::new());
    for k in 0..100 {
        let s3 = rng.gen_range(0.3..2.0);
        let s2 = s3 * rng.gen_range(1.2..3.0);
        let s1 = if k % 10 == 0 { s2 * s2 / s3 } else { s2 * rng.gen_range(1.2..3.0) };
        let r = rng.gen_range(0.5..2.0);
        let g = three_speed_geometry(s1, s2, s3, r)?;
        let region = UndampedRegion::single(r);
        let stripe = Interval::new(-r, r);

        // Walk the slow characteristic leaving (−R, 0) and record where the
        // windows of consecutive speeds first abut.
        let horizon = 1.5 * g.t1.max(g.t2);
        let dt = horizon / 30_000.0;
        let (mut t2, mut t1) = (f64::NAN, f64::NAN);
        for j in 1..=30_000 {
            let t = j as f64 * dt;
            let x = -r + s3 * t;
            if x <= r {
                continue;
            }
            let slow = crossing_window(s3, stripe, x, t)?;
            let middle = crossing_window(s2, stripe, x, t)?;
            let fast = crossing_window(s1, stripe, x, t)?;
            if t2.is_nan() && slow.t_ex <= middle.t_en {
                t2 = t;
            }
            if t1.is_nan() && middle.t_ex <= fast.t_en {
                t1 = t;
            }
        }
        let missing = g.tau_bar() - undamped_union(&[s1, s2, s3], &region, -r + s3 * t2, t2)?.measure;
        let errs = [
            (t2 - g.t2).abs() / dt,
            (t1 - g.t1).abs() / dt,
            (-r + s3 * t2 - g.x2).abs() / (s3 * dt),
            (-r + s3 * t1 - g.x1).abs() / (s3 * dt),
            (missing - g.t_lambda).abs() / (6.0 * dt / 1.5),
        ];
        let err = errs.iter().fold(0.0_f64, |m, e| m.max(if e.is_nan() { f64::INFINITY } else { *e }));
        worst = worst.max(err);

        let bounds = tau_star_bounds(&[s1, s2, s3], &region)?;
        let exact = bounds.exact_three_speed.ok_or("no exact tau*")?;
        let ordered = bounds.lemma_lower <= exact * (1.0 + 1e-12) && exact <= bounds.upper * (1.0 + 1e-12);
        let disc_nonpos = s2 * s2 - s1 * s3 <= 1e-12 * s2 * s2;
        let consistent = (g.t_lambda == 0.0) == disc_nonpos
            && (k % 10 != 0 || g.case == ThreeSpeedCase::Geometric);
        if err > 1.5 || !ordered || !consistent {
            failures.push(format!("({s1:.3},{s2:.3},{s3:.3}) R={r:.3}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "100 triples (10 geometric), worst closed-form/scan gap {worst:.2} scan steps (<= 1.5), failures: {}",
            if failures.is_empty() { String::from("none") } else { failures.join(" ") }
        ),
    )
}

// ---------------------------------------------------------------- 8, 10

const SCAN_STEP: f64 = 1.0 / 256.0;

fn sup_at(speeds: &[f64], region: &UndampedRegion, t: f64) -> Res<f64> {
    Ok(sup_undamped_measure(speeds, region, t, ScanSpec::auto(speeds, region, t).with_step(SCAN_STEP))?.sup)
}

struct Saturation {
    sup_at_4: f64,
    first: Option<f64>,
}

fn saturation(region: &UndampedRegion) -> Res<Saturation> {
    let speeds = [3.0, 2.0, 1.0];
    let target = tau_bar(&speeds, region);
    let sup_at_4 = sup_at(&speeds, region, 4.0)?;
    let mut first = None;
    for k in 0..=(4 * 256) {
        let t = 4.0 + k as f64 * SCAN_STEP;
        if sup_at(&speeds, region, t)? >= target - 1e-9 {
            first = Some(t);
            break;
        }
    }
    Ok(Saturation { sup_at_4, first })
}

fn saturation_verdict(s: &Saturation) -> (bool, String) {
    let ok = (s.sup_at_4 - 10.0 / 3.0).abs() <= 1e-9 && s.first.is_some_and(|t| (t - 6.0).abs() <= SCAN_STEP);
    (ok, format!("sup at t=4 is {:.12} (10/3), first t with sup = 11/3 is {:?} (6 ± 1/256)", s.sup_at_4, s.first))
}

fn sharp_delay_saturation() -> Res<Verdict> {
    let (ok, detail) = saturation_verdict(&saturation(&UndampedRegion::single(1.0))?);
    verdict(ok, detail)
}

fn stripes_bound() -> Res<Verdict> {
    let speeds = [1.0, 2.0];
    let region = UndampedRegion::new(vec![Interval::new(0.0, 1.0), Interval::new(2.0, 4.0)])?;
    let bound = tau_bar(&speeds, &region);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=200 {
        let t = 0.25 * k as f64;
        let sup = sup_undamped_measure(&speeds, &region, t, ScanSpec::auto(&speeds, &region, t))?.sup;
        worst = worst.max(sup);
    }
    let single = UndampedRegion::new(vec![Interval::new(-1.0, 1.0)])?;
    let (single_ok, single_detail) = saturation_verdict(&saturation(&single)?);
    verdict(
        (bound - 4.5).abs() < 1e-12 && worst <= bound + 1e-9 && single_ok,
        format!("bound {bound}, largest sup over t in [0, 50] is {worst:.6}; single stripe: {single_detail}"),
    )
}

// ---------------------------------------------------------------- 9

fn conservation_before_tau_star() -> Res<Verdict> {
    let mut lines = Vec::new();
    let mut passed = true;
    let mut onsets = Vec::new();
    let mut tau_stars = Vec::new();
    for text in [CORRIDOR_421, CORRIDOR_321] {
        let s = scenario(text)?;
        let outcome = run_experiment(&s)?;
        let probe = outcome.probe.as_ref().ok_or("no probe report")?;
        let l0 = outcome.trajectory.samples[0].l2_total;
        let plateau = outcome
            .trajectory
            .samples
            .iter()
            .filter(|x| x.t <= probe.tau_slow * (1.0 + 1e-12))
            .map(|x| x.l2_total / l0)
            .fold(f64::INFINITY, f64::min);
        let onset = probe.onset.ok_or("no decay onset")?;
        let lag = onset - probe.predicted_onset;
        let ok = plateau >= 0.99 && lag.abs() <= probe.stride_time * (1.0 + 1e-9);
        passed &= ok;
        let bounds = tau_star_bounds(s.speeds(), s.region().ok_or("no region")?)?;
        tau_stars.push(bounds.exact_three_speed.ok_or("no exact tau*")?);
        onsets.push(onset);
        lines.push(format!(
            "{}: plateau {:.4} up to tau_slow {:.3}, onset {:.4} vs predicted {:.4} (stride {:.3})",
            s.name.as_deref().unwrap_or("?"),
            plateau,
            probe.tau_slow,
            onset,
            probe.predicted_onset,
            probe.stride_time
        ));
    }
    let generic = run_experiment(&scenario(GENERIC_321)?)?;
    let generic_onset = generic.trajectory.decay_onset(ONSET_EPS).ok_or("generic run never decays")?;
    onsets.push(generic_onset);
    let ordered = onsets.windows(2).all(|w| w[0] >= w[1]) && tau_stars[0] >= tau_stars[1];
    passed &= ordered;
    lines.push(format!(
        "onsets geometric {:.4} >= overlap {:.4} >= generic {:.4}: {ordered} (tau* {:.4} >= {:.4})",
        onsets[0], onsets[1], onsets[2], tau_stars[0], tau_stars[1]
    ));
    verdict(passed, lines.join("; "))
}

fn main() -> ExitCode {
    let cases = match corpus() {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL building the random corpus: {e}");
            return ExitCode::FAILURE;
        }
    };
    let results = [
        criterion(1, "SK eigenvector and Kalman forms agree", || sk_equivalence(&cases)),
        criterion(2, "spectral dichotomy", || spectral_dichotomy(&cases)),
        criterion(3, "damped-wave gamma", damped_wave_gamma),
        criterion(4, "full-space rates", fullspace_rates),
        criterion(5, "conservative exactness", conservative_exactness),
        criterion(6, "delayed envelope", delayed_envelope),
        criterion(7, "three-speed geometry oracle", geometry_oracle),
        criterion(8, "sharp-delay saturation", sharp_delay_saturation),
        criterion(9, "conservation before tau*", conservation_before_tau_star),
        criterion(10, "stripes bound", stripes_bound),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
