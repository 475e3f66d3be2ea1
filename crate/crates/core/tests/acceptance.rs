//! Acceptance run: one PASS/FAIL line per criterion, with its runtime.
//!
//! `cargo test --test acceptance -- <substring>` runs the matching criteria only.

use std::f64::consts::PI;
use std::time::Instant;

use ibmsim::analysis::{exit_tail_bound, min_gap, tail_condition_integral, Intensity, TailKind, TailParams, Verdict};
use ibmsim::drift::{airy_compensator, ginibre_drift_pair, ShellSchedule};
use ibmsim::models::{build_model, Configuration, Domain, KernelSpec, ModelSpec, PotentialModel, Window};
use ibmsim::pointfields::{
    acceptance_probability, dlr_ratio_check, estimate_rho_k, ibp_residual, replicate_seed, sample_dpp, sample_ensemble,
    sample_gibbs_mcmc, sample_ginibre_matrix_with, Bins, IbpOptions, Precision, SampleEnsemble, Sampler,
    TestFunction,
};
use ibmsim::sde::{finite_volume_convergence, ifc_consistency_report, simulate, LabeledPath, Scheme};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = (bool, String);

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// First `n` canonical points of a Sine2 draw on [-half, half], on the line.
fn sine_start(half: f64, n: usize, seed: u64) -> Configuration {
    let c = sample_dpp(&KernelSpec::sine(), &Window::Interval { lo: -half, hi: half }, seed).unwrap();
    assert!(c.len() >= n, "draw has {} < {n} points", c.len());
    c.truncate_canonical(n).with_window(Window::Whole { dim: 1 }).unwrap()
}

fn ifc_consistency() -> Outcome {
    let init = sine_start(40.0, 64, 11);
    let path = simulate(&PotentialModel::sine(2.0), &init, 1.0, 1e-3, 1, Scheme::Tamed).unwrap();
    let rows = ifc_consistency_report(&path, &[4, 8, 16]).unwrap();
    let max = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    let detail = rows.iter().map(|r| format!("m={} err={:.2e}", r.m, r.error)).collect::<Vec<_>>().join(", ");
    (max <= 1e-10, detail)
}

fn ginibre_gauge() -> Outcome {
    let probes = [[1.0, 0.0], [0.0, -1.5], [-1.2, 0.7], [0.6, 1.1]];
    let mut medians = Vec::new();
    for n in [100usize, 400, 1600] {
        let rk = 0.8 * (n as f64).sqrt();
        let s = ShellSchedule::new((0..6).map(|k| rk / 2f64.powi(5 - k)).collect(), 1e-3).unwrap();
        let precision = if n >= 1600 { Precision::F32 } else { Precision::F64 };
        let rel: Vec<f64> = (0..100u64)
            .into_par_iter()
            .flat_map_iter(|i| {
                let c = sample_ginibre_matrix_with(n, replicate_seed(5, i), precision).unwrap();
                let s = s.clone();
                probes
                    .iter()
                    .map(move |x| {
                        let (b1, b2) = ginibre_drift_pair(x, &c, &s, None).unwrap();
                        let d = (b1.value[0] - b2.value[0]).hypot(b1.value[1] - b2.value[1]);
                        d / b2.value[0].hypot(b2.value[1])
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        medians.push(median(rel));
    }
    let ok = medians.windows(2).all(|w| w[1] < w[0]) && medians[2] < 0.10;
    (ok, format!("median relative |b1-b2| at n=100,400,1600: {:.4}, {:.4}, {:.4}", medians[0], medians[1], medians[2]))
}

fn max_rel_dev(e: &SampleEnsemble, bins: &Bins, target: f64) -> f64 {
    let est = estimate_rho_k(e, 1, bins).unwrap();
    est.values.iter().map(|v| (v / target - 1.0).abs()).fold(0.0, f64::max)
}

/// Each ensemble has its own 5 minute budget, checked here.
fn sampler_fidelity() -> Outcome {
    let t = Instant::now();
    let sine = Sampler::Dpp { kernel: KernelSpec::sine(), window: Window::Interval { lo: 0.0, hi: 20.0 }, options: None };
    let e = sample_ensemble(&sine, 500, 21).unwrap();
    let d_sine = max_rel_dev(&e, &Bins::Line { lo: 0.0, hi: 20.0, n: 10 }, 1.0);
    let t_sine = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let e = sample_ensemble(&Sampler::GinibreMatrix { n: 400, precision: Precision::F64 }, 200, 22).unwrap();
    let d_gin = max_rel_dev(&e, &Bins::Radial { r_min: 0.0, r_max: 10.0, n: 5 }, 1.0 / PI);
    let t_gin = t.elapsed().as_secs_f64();
    (
        d_sine <= 0.05 && d_gin <= 0.05 && t_sine < 300.0 && t_gin < 300.0,
        format!(
            "max bin deviation: Sine2 on [0,20] {:.2}% ({t_sine:.1} s), Ginibre |z|<10 {:.2}% ({t_gin:.1} s)",
            100.0 * d_sine,
            100.0 * d_gin
        ),
    )
}

fn ibp_pair(e: &SampleEnsemble, m: &PotentialModel, f: &TestFunction, shells: &[f64]) -> ((f64, f64), (f64, f64)) {
    let s = ShellSchedule::new(shells.to_vec(), 1e-3).unwrap();
    let run = |scale| ibp_residual(e, m, f, &IbpOptions { shells: s.clone(), drift_scale: scale }).unwrap();
    (run(1.0), run(2.0))
}

fn ibp_identity() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut check = |name: &str, (res, ctrl): ((f64, f64), (f64, f64))| {
        let good = res.0.abs() <= 3.0 * res.1 && ctrl.0.abs() > 5.0 * ctrl.1;
        ok &= good;
        parts.push(format!("{name} res {:.1}se, x2 {:.1}se", res.0 / res.1, ctrl.0 / ctrl.1));
    };

    let sine = Sampler::Dpp { kernel: KernelSpec::sine(), window: Window::Interval { lo: 0.0, hi: 60.0 }, options: None };
    let e = sample_ensemble(&sine, 400, 31).unwrap();
    let f = TestFunction::PairBump { center: vec![30.0], radius: 5.0, width: 1.5, direction: vec![1.0] };
    check("sine2", ibp_pair(&e, &PotentialModel::sine(2.0), &f, &[1.25, 2.5, 5.0, 10.0, 20.0]));

    let gin = Sampler::Dpp { kernel: KernelSpec::ginibre(), window: Window::Ball { center: vec![0.0, 0.0], radius: 8.0 }, options: None };
    let e = sample_ensemble(&gin, 500, 32).unwrap();
    let m = build_model(&ModelSpec::new("ginibre_gauge", 2.0)).unwrap();
    let f = TestFunction::PairBump { center: vec![1.0, 0.5], radius: 2.0, width: 1.5, direction: vec![1.0, 0.0] };
    check("ginibre", ibp_pair(&e, &m, &f, &[0.8, 1.6, 3.2, 6.4]));

    let m = PotentialModel::lennard_jones(1.0, 2);
    let bx = Window::PeriodicBox { half: vec![5.0, 5.0] };
    let configs: Vec<Configuration> = (0..1600u64)
        .into_par_iter()
        .map(|i| sample_gibbs_mcmc(&m, &bx, 30, 500, replicate_seed(33, i)).unwrap())
        .collect();
    let e = SampleEnsemble::new(configs, 33, serde_json::json!("lj gibbs")).unwrap();
    let f = TestFunction::PairBump { center: vec![0.0, 0.0], radius: 3.0, width: 1.5, direction: vec![1.0, 0.0] };
    check("lj", ibp_pair(&e, &m, &f, &[0.5, 1.0, 2.0, 4.5]));

    (ok, parts.join("; "))
}

/// Accepted Metropolis moves inside S_r, each compared as a (before, after) pair.
fn dlr_ratio() -> Outcome {
    let m = PotentialModel::lennard_jones(1.0, 2);
    let bx = Window::PeriodicBox { half: vec![5.0, 5.0] };
    let r = 2.5;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for k in 0..10u64 {
        let mut a = sample_gibbs_mcmc(&m, &bx, 30, 200, replicate_seed(41, k)).unwrap();
        let target = (k as usize + 1) * 100;
        while pairs < target {
            let inside: Vec<usize> = (0..a.len()).filter(|&i| a.point(i).iter().map(|v| v * v).sum::<f64>().sqrt() <= r).collect();
            let i = inside[rng.random_range(0..inside.len())];
            let p: Vec<f64> = a.point(i).iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
            if p.iter().map(|v| v * v).sum::<f64>().sqrt() > r || rng.random::<f64>() >= acceptance_probability(&m, &a, i, &p).unwrap() {
                continue;
            }
            let mut coords = a.coords().to_vec();
            coords[2 * i..2 * i + 2].copy_from_slice(&p);
            let b = Configuration::new(2, coords, bx.clone()).unwrap();
            worst = worst.max(dlr_ratio_check(&a, &b, r, &m).unwrap());
            pairs += 1;
            a = b;
        }
    }
    (worst <= 1e-12, format!("{pairs} accepted move pairs, max discrepancy {worst:.2e}"))
}

fn lyons_zheng() -> Outcome {
    let init = sine_start(25.0, 32, 51);
    let r = 0.5 * init.points().map(|p| p[0].abs()).fold(0.0, f64::max);
    let m = PotentialModel::sine(2.0);
    let results: Vec<_> =
        (0..500u64).into_par_iter().map(|i| simulate(&m, &init, 1.0, 1e-3, replicate_seed(52, i), Scheme::Tamed)).collect();
    let aborted = results.iter().filter(|r| r.is_err()).count();
    let paths: Vec<LabeledPath> = results.into_iter().filter_map(Result::ok).collect();
    let rows = exit_tail_bound(&paths, r, 1.0).unwrap();
    let worst = rows.iter().map(|w| (w.frequency - w.bound) / w.stderr.max(1e-300)).fold(f64::NEG_INFINITY, f64::max);
    let hits: usize = rows.iter().map(|w| w.hits).sum();
    (
        rows.iter().all(|w| w.within),
        format!("{} runs ({aborted} aborted), r={r:.2}, {} labels, {hits} entries, worst (freq-bound)/se {worst:.2}", paths.len(), rows.len()),
    )
}

fn non_collision() -> Outcome {
    let init = sine_start(25.0, 32, 61);
    let m = PotentialModel::sine(2.0);
    let dyson = (0..100u64)
        .into_par_iter()
        .filter(|&i| match simulate(&m, &init, 1.0, 1e-4, replicate_seed(62, i), Scheme::Tamed) {
            Ok(p) => min_gap(&p).gap > 0.0,
            Err(_) => false,
        })
        .count();
    let mb = build_model(&ModelSpec::new("bessel", 2.0).alpha(2.0).domain(Domain::HalfLine)).unwrap();
    let start: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
    let binit = Configuration::from_points_1d(&start, Window::HalfLine).unwrap();
    let bessel = (0..100u64)
        .into_par_iter()
        .filter(|&i| match simulate(&mb, &binit, 1.0, 1e-4, replicate_seed(63, i), Scheme::Tamed) {
            Ok(p) => p.states.iter().flatten().all(|x| *x > 0.0) && min_gap(&p).gap > 0.0,
            Err(_) => false,
        })
        .count();
    (dyson == 100 && bessel == 100, format!("Dyson N=32 clean {dyson}/100, Bessel N=8 positive {bessel}/100"))
}

fn tail_evaluators() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, rho) in [
        ("constant", Intensity::Constant { lambda: 1.0, dim: 1 }),
        ("1/pi", Intensity::Ginibre),
        ("airy", Intensity::AiryLeft),
    ] {
        for kind in [TailKind::A5b, TailKind::A8a] {
            let rep = tail_condition_integral(kind, &rho, TailParams::default()).unwrap();
            ok &= rep.verdict == Verdict::Finite && rep.quadrature_error < 1e-6;
            parts.push(format!("{name} {kind:?} {:?} err {:.1e}", rep.verdict, rep.quadrature_error));
        }
    }
    (ok, parts.join(", "))
}

/// Master seeds whose coupled runs abort are replaced by the next seed.
fn finite_volume() -> Outcome {
    let m = PotentialModel::sine(2.0);
    let mut deltas: Vec<(f64, f64)> = Vec::new();
    let mut aborted = 0;
    let mut next = 0u64;
    while deltas.len() < 20 {
        let batch: Vec<_> = (next..next + (20 - deltas.len()) as u64)
            .into_par_iter()
            .map(|s| {
                let master = sine_start(70.0, 128, replicate_seed(71, s));
                finite_volume_convergence(&m, &master, &[32, 64, 128], 1, 1.0, 1e-3, replicate_seed(72, s))
            })
            .collect();
        next += batch.len() as u64;
        for r in batch {
            match r {
                Ok(d) => deltas.push((d[0].delta, d[1].delta)),
                Err(e) if e.is_numerical_abort() => aborted += 1,
                Err(e) => panic!("{e}"),
            }
        }
    }
    let a = median(deltas.iter().map(|d| d.0).collect());
    let b = median(deltas.iter().map(|d| d.1).collect());
    (b <= a, format!("median delta(32->64) {a:.3e}, delta(64->128) {b:.3e}; {aborted} master seeds replaced after an abort"))
}

fn airy_closed_form() -> Outcome {
    let worst = (0..=10_000)
        .map(|k| {
            let r = 1e-3 * k as f64 * k as f64 / 100.0;
            (airy_compensator(r, 2.0) - 2.0 * r.sqrt() / PI).abs()
        })
        .fold(0.0, f64::max);
    (worst <= 1e-12, format!("max deviation {worst:.1e} over r in [0, 1000]"))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, f64, fn() -> Outcome); 10] = [
        ("ifc-consistency", 60.0, ifc_consistency),
        ("ginibre-gauge", 300.0, ginibre_gauge),
        ("sampler-fidelity", 600.0, sampler_fidelity),
        ("ibp-identity", 600.0, ibp_identity),
        ("dlr-ratio", 10.0, dlr_ratio),
        ("lyons-zheng", 600.0, lyons_zheng),
        ("non-collision", 300.0, non_collision),
        ("tail-evaluators", 10.0, tail_evaluators),
        ("finite-volume", 900.0, finite_volume),
        ("airy-compensator", 1.0, airy_closed_form),
    ];
    let mut failed = Vec::new();
    for (name, budget, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = f();
        let secs = t.elapsed().as_secs_f64();
        let pass = ok && secs < budget;
        println!("{} {name}: {detail} [{secs:.1} s, budget {budget} s]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
