//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use hinfsf::hinfnorm::{closed_loop, hinf_norm, hinf_norm_bisect, NormOptions};
use hinfsf::linalg;
use hinfsf::model::fixtures;
use hinfsf::positivity::{closed_loop_positivity_condition, is_metzler};
use hinfsf::riccati::synth_are;
use hinfsf::simulate::{
    feedback_response, run_comparison_experiment, Controller, Disturbance, ExperimentConfig,
};
use hinfsf::synthesis::{
    optimal_gamma, optimality_margin, reduce_coordination, synth_coordinated, synth_optimal,
    CoordinatedPlant,
};
use hinfsf::{GainMatrix, LtiSystem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Outcome {
    check(
        elapsed < limit,
        format!("{what} took {elapsed:.2?} (limit {limit:?})"),
    )
}

fn seeded_systems(seed: u64, count: usize) -> Vec<LtiSystem> {
    let mut rng = common::rng(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=6);
            common::random_system(&mut rng, n, m)
        })
        .collect()
}

fn gain_reproduction() -> Outcome {
    let cases = [
        (
            "network",
            fixtures::buffer_network(),
            fixtures::buffer_network_sparse_gain(),
        ),
        (
            "chain",
            fixtures::buffer_chain(),
            fixtures::buffer_chain_gain(),
        ),
    ];
    let mut notes = Vec::new();
    for (name, sys, expected) in cases {
        let start = Instant::now();
        let l = synth_optimal(&sys).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        let err = common::max_abs_diff(&l.l, &expected);
        check(err <= 1e-12, format!("{name}: max entry error {err:e}"))?;
        within(elapsed, Duration::from_millis(1), name)?;
        notes.push(format!("{name} err {err:.1e} in {elapsed:.1?}"));
    }
    Ok(notes.join(", "))
}

fn tri_oracle_agreement() -> Outcome {
    let start = Instant::now();
    let mut systems = vec![fixtures::buffer_network(), fixtures::buffer_chain()];
    systems.extend(seeded_systems(0xACCE_0002, 100));
    let opts = NormOptions::default();
    let (mut worst_bisect, mut worst_are) = (0.0f64, 0.0f64);
    for (i, sys) in systems.iter().enumerate() {
        let g = optimal_gamma(sys);
        let l = synth_optimal(sys).map_err(|e| format!("system {i}: {e}"))?;
        let ss = closed_loop(sys, &l).map_err(|e| format!("system {i}: {e}"))?;
        let bisect = hinf_norm_bisect(&ss, &opts)
            .map_err(|e| format!("system {i}: {e}"))?
            .gamma;
        let are = synth_are(sys, 1e-6)
            .map_err(|e| format!("system {i}: {e}"))?
            .achieved_gamma;
        let d_bisect = (g - bisect).abs();
        let d_are = (g - are).abs();
        check(
            d_bisect <= 1e-6f64.max(1e-6 * g),
            format!("system {i}: bisection gap {d_bisect:e} at gamma {g}"),
        )?;
        check(
            d_are <= 1e-4f64.max(1e-4 * g),
            format!("system {i}: riccati gap {d_are:e} at gamma {g}"),
        )?;
        worst_bisect = worst_bisect.max(d_bisect / g.max(1.0));
        worst_are = worst_are.max(d_are / g.max(1.0));
    }
    within(start.elapsed(), Duration::from_secs(60), "102 systems")?;
    Ok(format!(
        "{} systems, worst scaled gaps: bisection {worst_bisect:.1e}, riccati {worst_are:.1e}, {:.2?}",
        systems.len(),
        start.elapsed()
    ))
}

fn perturbation_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(0xACCE_0003);
    let opts = NormOptions::default();
    let mut lowest_excess = f64::INFINITY;
    let mut unstable = 0usize;
    for (i, sys) in seeded_systems(0xACCE_0034, 20).iter().enumerate() {
        let g = optimal_gamma(sys);
        let l = synth_optimal(sys).map_err(|e| e.to_string())?;
        for k in 0..200 {
            let scale = 10f64.powf(rng.random_range(-4.0..0.5));
            let dl = common::uniform(&mut rng, sys.m(), sys.n(), -1.0, 1.0);
            let dl = &dl * (scale / linalg::spectral_norm(&dl).max(f64::MIN_POSITIVE));
            let Ok(ss) = closed_loop(sys, &GainMatrix::new(&l.l + dl)) else {
                unstable += 1;
                continue;
            };
            let norm = hinf_norm_bisect(&ss, &opts)
                .map_err(|e| format!("system {i}, draw {k}: {e}"))?
                .gamma;
            check(
                norm >= g - 2e-6,
                format!("system {i}, draw {k}: norm {norm} below optimum {g}"),
            )?;
            lowest_excess = lowest_excess.min(norm - g);
        }
    }
    within(
        start.elapsed(),
        Duration::from_secs(120),
        "4000 perturbations",
    )?;
    Ok(format!(
        "4000 perturbations ({unstable} destabilizing), smallest norm - gamma* = {lowest_excess:.2e}, {:.2?}",
        start.elapsed()
    ))
}

fn proof_margin() -> Outcome {
    let mut closest = f64::INFINITY;
    for (i, sys) in seeded_systems(0xACCE_0034, 20).iter().enumerate() {
        let g = optimal_gamma(sys);
        let above = optimality_margin(sys, 1.001 * g);
        let below = optimality_margin(sys, 0.999 * g);
        check(
            above < -1e-10,
            format!("system {i}: max eigenvalue {above:e} at 1.001 gamma*"),
        )?;
        check(
            below > 1e-10,
            format!("system {i}: max eigenvalue {below:e} at 0.999 gamma*"),
        )?;
        closest = closest.min(-above).min(below);
    }
    Ok(format!(
        "20 systems, smallest |max eigenvalue| {closest:.2e}"
    ))
}

fn coordination() -> Outcome {
    let mut rng = common::rng(0xACCE_0005);
    let (mut worst_sum, mut worst_path) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let nu = rng.random_range(2..=5);
        let (m, max_n) = if i < 10 {
            (1, 1)
        } else {
            (rng.random_range(1..=3), 3)
        };
        let plant =
            CoordinatedPlant::new(common::random_blocks(&mut rng, nu, m, max_n), 1e-9, 1e-9)
                .map_err(|e| format!("plant {i}: {e}"))?;
        let stacked = synth_coordinated(&plant)
            .map_err(|e| format!("plant {i}: {e}"))?
            .stacked();
        let mut sum = DMatrix::zeros(m, stacked.ncols());
        for b in 0..nu {
            sum += stacked.rows(b * m, m);
        }
        let via = reduce_coordination(&plant)
            .and_then(|r| r.solve(1e-12))
            .map_err(|e| format!("plant {i}: {e}"))?;
        let path = common::max_abs_diff(&stacked, &via.l);
        check(
            sum.amax() <= 1e-12,
            format!("plant {i}: row sum {:e}", sum.amax()),
        )?;
        check(path <= 1e-12, format!("plant {i}: path gap {path:e}"))?;
        worst_sum = worst_sum.max(sum.amax());
        worst_path = worst_path.max(path);
    }
    Ok(format!("20 plants (10 scalar, 10 block), worst row sum {worst_sum:.1e}, worst path gap {worst_path:.1e}"))
}

fn positivity() -> Outcome {
    let mut rng = common::rng(0xACCE_0006);
    let mut positive = 0;
    for i in 0..100 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let sys = common::random_diagonal_system(&mut rng, n, m);
        let l = synth_optimal(&sys).map_err(|e| e.to_string())?;
        let direct = is_metzler(&(sys.a() + sys.b() * &l.l), 0.0)
            .map_err(|e| e.to_string())?
            .is_metzler;
        let condition = closed_loop_positivity_condition(&sys, 0.0).map_err(|e| e.to_string())?;
        check(
            direct == condition,
            format!("system {i}: condition {condition}, closed loop Metzler {direct}"),
        )?;
        positive += direct as usize;
    }
    let chain = fixtures::buffer_chain();
    let l = synth_optimal(&chain).map_err(|e| e.to_string())?;
    let traj = feedback_response(&chain, &l, &DVector::from_element(3, 1.0), 10.0, 0.01)
        .map_err(|e| e.to_string())?;
    let min = traj.min_state();
    check(
        min >= -1e-9,
        format!("chain simulation minimum state {min:e}"),
    )?;
    Ok(format!(
        "100 systems agree ({positive} Metzler), chain minimum state {min:.3e}"
    ))
}

fn experiment() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let table = run_comparison_experiment(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        table.failures.is_empty(),
        format!("failed draws: {:?}", table.failures),
    )?;
    check(
        table.draws.len() == 50,
        format!("{} draws", table.draws.len()),
    )?;
    let worst = table
        .draws
        .iter()
        .map(|d| d.relative_norm_gap())
        .fold(0.0, f64::max);
    check(
        worst <= 1e-3,
        format!("norm gap {worst:e} exceeds 1e-3 gamma"),
    )?;
    let peak = |c, s| {
        table
            .series(c, Disturbance::Channel(0), s)
            .map(|x| x.peak())
            .ok_or("missing series")
    };
    let (o1, r1) = (peak(Controller::Optimal, 0)?, peak(Controller::Riccati, 0)?);
    check(
        o1 < r1,
        format!("x1 peak {o1} under optimal, {r1} under riccati"),
    )?;
    let opposite: Vec<usize> = [1, 2]
        .into_iter()
        .filter(|&s| matches!((peak(Controller::Optimal, s), peak(Controller::Riccati, s)), (Ok(o), Ok(r)) if o > r))
        .collect();
    check(
        !opposite.is_empty(),
        "neither x2 nor x3 reverses the ordering".into(),
    )?;
    within(elapsed, Duration::from_secs(300), "experiment")?;
    Ok(format!(
        "x1 peak {o1:.4} < {r1:.4}, reversed on x{:?}, worst norm gap {worst:.1e}, {elapsed:.2?}",
        opposite.iter().map(|s| s + 1).collect::<Vec<_>>()
    ))
}

fn dense_gain_cross_check() -> Outcome {
    let sys = fixtures::buffer_network();
    let g = optimal_gamma(&sys);
    let are = synth_are(&sys, 1e-6).map_err(|e| e.to_string())?;
    let norm = hinf_norm(&closed_loop(&sys, &are.gain).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?
        .gamma;
    let gap = common::max_abs_diff(&are.gain.l, &fixtures::buffer_network_dense_gain());
    check(
        (norm - g).abs() <= 1e-4,
        format!("closed-loop norm {norm} vs gamma* {g}"),
    )?;
    check(
        gap <= 5e-2,
        format!("max entry gap {gap} to the reference dense gain"),
    )?;
    Ok(format!(
        "norm {norm:.7} vs gamma* {g:.7}, max entry gap {gap:.3}"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("closed-form gain reproduction", gain_reproduction),
        ("tri-oracle gamma agreement", tri_oracle_agreement),
        ("optimality under perturbation", perturbation_optimality),
        ("definiteness margin around gamma*", proof_margin),
        ("coordination", coordination),
        ("positivity", positivity),
        ("buffer network experiment", experiment),
        ("riccati dense gain cross-check", dense_gain_cross_check),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("criterion {}: PASS {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {msg}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
