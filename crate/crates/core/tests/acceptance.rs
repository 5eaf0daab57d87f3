//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::f64::consts::FRAC_PI_4;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use unary_pricing::circuit::{build_loader, build_payoff, build_q, build_s_0, build_s_psi, initial_state, payoff_angles};
use unary_pricing::estimation::loglog_slope;
use unary_pricing::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(elapsed: Duration, limit: Option<Duration>) -> bool {
    limit.is_none_or(|l| elapsed <= l)
}

fn payoff_identity() -> Outcome {
    let mut r = common::rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = r.random_range(2..=16);
        let (dist, strike) = common::random_instance(&mut r, n);
        let state = initial_state(n)
            .unwrap()
            .apply(&build_loader(&fit_loader(&dist).unwrap(), n).unwrap())
            .unwrap()
            .apply(&build_payoff(&payoff_angles(&dist, strike)))
            .unwrap();
        let read = ancilla_one_prob(&state, payoff_angles(&dist, strike).strike_mask()).unwrap() * (dist.s_max() - strike);
        worst = worst.max((read - expected_payoff_discrete(&dist, strike)).abs());
    }
    Outcome { pass: worst < 1e-10, detail: format!("max |error| = {worst:.2e} over 200 instances") }
}

fn grover_dynamics() -> Outcome {
    let mut r = common::rng(2);
    let mut worst: f64 = 0.0;
    let mut found = 0;
    let depths: Vec<u32> = (1..=50).collect();
    while found < 50 {
        let n = r.random_range(2..=16);
        let (dist, strike) = common::random_instance(&mut r, n);
        let c = PricingCircuit::new(&dist, strike).unwrap();
        let alpha = c.alpha();
        if !(alpha > 0.0 && alpha < FRAC_PI_4) {
            continue;
        }
        found += 1;
        for (m, state) in depths.iter().zip(c.amplified_states(&depths)) {
            let got = ancilla_one_prob(&state, c.angles().strike_mask()).unwrap();
            let want = ((2 * m + 1) as f64 * alpha).sin().powi(2);
            worst = worst.max((got - want).abs());
        }
    }
    Outcome { pass: worst < 1e-9, detail: format!("max |error| = {worst:.2e} over 50 instances, m = 1..50") }
}

fn unitarity() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [3, 8, 16, 64] {
        let dist = discretize(&BsmParams::reference(), n, 0.997).unwrap();
        let loader = build_loader(&fit_loader(&dist).unwrap(), n).unwrap();
        let payoff = build_payoff(&payoff_angles(&dist, 1.0));
        let q = build_q(&loader, &payoff, n).unwrap();
        for op in [&loader, &payoff, &build_s_psi(n).unwrap(), &build_s_0(n).unwrap(), &q] {
            worst = worst.max(op.unitarity_error());
        }
    }
    Outcome { pass: worst < 1e-12, detail: format!("max ‖U†U − I‖ = {worst:.2e} for D, P, S_psi, S_0, Q at n = 3, 8, 16, 64") }
}

fn reference_rows() -> Vec<ConvergenceRow> {
    let dist = DiscreteDistribution::new(vec![1.0, 2.0, 3.0], vec![0.25, 0.5, 0.25]).unwrap();
    convergence_study(&dist, 1.5, &AESchedule::default(), 0).unwrap()
}

fn speedup(rows: &[ConvergenceRow], study: Duration) -> Outcome {
    let calls: Vec<f64> = rows.iter().map(|r| r.oracle_calls as f64).collect();
    let ae: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
    let mc: Vec<f64> = rows.iter().map(|r| r.mc_error).collect();
    let ae_slope = loglog_slope(&calls, &ae).unwrap_or(f64::NAN);
    let mc_slope = loglog_slope(&calls, &mc).unwrap_or(f64::NAN);
    Outcome {
        pass: (-1.2..=-0.8).contains(&ae_slope) && (-0.6..=-0.4).contains(&mc_slope),
        detail: format!(
            "AE slope {ae_slope:.3} (want [-1.2, -0.8]), MC slope {mc_slope:.3} (want [-0.6, -0.4]); study {:.2}s",
            study.as_secs_f64()
        ),
    }
}

fn std_contraction(rows: &[ConvergenceRow]) -> Outcome {
    let first = rows.first().unwrap();
    let last = rows.last().unwrap();
    let ratio = first.payoff_std / last.payoff_std;
    Outcome {
        pass: last.m == 50 && ratio >= 20.0,
        detail: format!("STD {:.3e} at m=0, {:.3e} at m={}, ratio {ratio:.1}", first.payoff_std, last.payoff_std, last.m),
    }
}

fn angle_recovery() -> Outcome {
    let cfg = EstimatorConfig::default();
    let mut r = common::rng(6);
    let depths: Vec<u32> = (0..=50).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let alpha = r.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let obs: Vec<Observation> = depths.iter().map(|&m| Observation::noiseless(m, alpha, 100.0)).collect();
        match recover_angle(&obs, &cfg) {
            Ok(est) => worst = worst.max((est.alpha - alpha).abs()),
            Err(_) => worst = f64::INFINITY,
        }
    }
    let trials = 200;
    let mut covered = 0;
    for _ in 0..trials {
        let alpha = r.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let obs: Vec<Observation> = depths
            .iter()
            .map(|&m| {
                let p = ((2 * m + 1) as f64 * alpha).sin().powi(2).clamp(0.0, 1.0);
                let hits = Binomial::new(100, p).unwrap().sample(&mut r);
                Observation { depth: m, hits: hits as f64, shots: 100.0 }
            })
            .collect();
        if let Ok(est) = recover_angle(&obs, &cfg) {
            if est.ci.0 <= alpha && alpha <= est.ci.1 {
                covered += 1;
            }
        }
    }
    let coverage = covered as f64 / trials as f64;
    Outcome {
        pass: worst < 1e-4 && coverage >= 0.9,
        detail: format!("noiseless max |error| = {worst:.2e} over 100 angles; noisy coverage {covered}/{trials}"),
    }
}

fn gradient_check() -> (usize, usize) {
    let mut r = common::rng(7);
    let mut ok = 0;
    for case in 0..50u64 {
        let n = r.random_range(2..=10);
        let net = CriticNet::random(&[n, 32, 16, 1], 1.0, Activation::Tanh, case).unwrap();
        let batch = |r: &mut unary_pricing::rng::Rng| -> Vec<Vec<f64>> {
            (0..4).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect()
        };
        let (real, fake) = (batch(&mut r), batch(&mut r));
        let grad = net.objective_gradient(&real, &fake).unwrap();
        let base = net.parameters();
        let h = 1e-6;
        let good = (0..base.len()).all(|k| {
            let eval = |d: f64| {
                let mut p = base.clone();
                p[k] += d;
                let mut m = net.clone();
                m.set_parameters(&p).unwrap();
                m.objective(&real, &fake).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-3) < 1e-5
        });
        ok += good as usize;
    }
    (ok, 50)
}

fn gan_convergence() -> Outcome {
    let lognormal = discretize(&BsmParams::reference(), 8, 0.997).unwrap();
    let normal = DiscreteDistribution::from_normal(0.0, 1.0, 8, 0.997).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, target) in [("log-normal", lognormal.probs()), ("normal", normal.probs())] {
        let mut finals: Vec<f64> = (0..10u64)
            .map(|seed| train_gan(target, &TrainConfig { seed, ..TrainConfig::default() }).unwrap().final_l2())
            .collect();
        finals.sort_by(f64::total_cmp);
        let median = 0.5 * (finals[4] + finals[5]);
        let best = finals[0];
        pass &= median <= 0.05 && best <= 0.02;
        parts.push(format!("{name}: median {median:.4}, best {best:.4}"));
    }
    let (ok, total) = gradient_check();
    pass &= ok == total;
    parts.push(format!("gradient check {ok}/{total}"));
    Outcome { pass, detail: parts.join("; ") }
}

fn mc_sanity() -> Outcome {
    let params = BsmParams::reference();
    let runs: Vec<McResult> = (0..30).map(|s| mc_price(&params, 100_000, s).unwrap()).collect();
    let k = runs.len() as f64;
    let mean = runs.iter().map(|r| r.estimate).sum::<f64>() / k;
    let sd = (runs.iter().map(|r| (r.estimate - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    let se = runs.iter().map(|r| r.std_error).sum::<f64>() / k;
    let oracle = common::lognormal_call_simpson(&params);
    let combined = se / k.sqrt();
    let rel = (sd / se - 1.0).abs();
    let z = (mean - oracle).abs() / combined;
    Outcome {
        pass: rel <= 0.25 && z <= 4.0,
        detail: format!("std {sd:.3e} vs reported {se:.3e} ({:.1}% off); mean {mean:.5} vs quadrature {oracle:.5} ({z:.2} SE)", 100.0 * rel),
    }
}

fn report(id: usize, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let pass = out.pass && within(elapsed, limit);
    let budget = limit.map(|l| format!(" / {}s", l.as_secs())).unwrap_or_default();
    println!(
        "criterion {id} {name}: {} ({}; {:.2}s{budget})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64()
    );
    pass
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut results = vec![
        report(1, "payoff identity", secs(5), payoff_identity),
        report(2, "grover dynamics", secs(10), grover_dynamics),
        report(3, "unitarity", None, unitarity),
    ];
    let start = Instant::now();
    let rows = reference_rows();
    let study = start.elapsed();
    results.push(report(4, "quadratic speedup", secs(120).map(|l| l.saturating_sub(study)), || speedup(&rows, study)));
    results.push(report(5, "std contraction", None, || std_contraction(&rows)));
    results.push(report(6, "angle recovery", None, angle_recovery));
    results.push(report(7, "gan convergence", secs(180), gan_convergence));
    results.push(report(8, "mc baseline", None, mc_sanity));
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
