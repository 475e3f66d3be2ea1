//! Metropolis sampling of Ruelle-class Gibbs measures in a periodic box.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::poisson::uniform_point;
use crate::drift::Kahan;
use crate::error::{Error, Result};
use crate::models::{norm, Configuration, PotentialModel, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsOptions {
    /// Half-width of the uniform displacement proposal.
    pub step: f64,
    /// Activity z of the grand-canonical variant; `None` keeps the count fixed.
    pub activity: Option<f64>,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        GibbsOptions { step: 0.3, activity: None }
    }
}

fn check_model(m: &PotentialModel) -> Result<()> {
    if !m.family.is_ruelle() {
        return Err(Error::InvalidParameter {
            name: "family",
            reason: format!("{} has no Gibbs sampler", m.family),
        });
    }
    Ok(())
}

/// Σ_{j ∉ skip} Ψ(|x - p_j|) with the window metric.
fn interaction(m: &PotentialModel, w: &Window, x: &[f64], pts: &[f64], d: usize, skip: Option<usize>) -> f64 {
    let mut acc = Kahan::new(1);
    for (j, p) in pts.chunks_exact(d).enumerate() {
        if Some(j) != skip {
            let v = m.pair_potential(w.distance(x, p));
            if v == f64::INFINITY {
                return v;
            }
            acc.add(&[v]);
        }
    }
    acc.value()[0]
}

/// min(1, e^{-βΔE}) with ΔE = 0 giving exactly 1 and β = 0 ignoring ΔE.
fn metropolis(beta: f64, de: f64) -> Result<f64> {
    if de.is_nan() {
        return Err(Error::NonFinitePotential);
    }
    if beta == 0.0 || de <= 0.0 {
        return Ok(1.0);
    }
    Ok((-beta * de).exp().min(1.0))
}

/// Energy change of moving point i of c to `proposal`, as used by the sampler.
pub fn move_energy(m: &PotentialModel, c: &Configuration, i: usize, proposal: &[f64]) -> f64 {
    let d = c.dim();
    let w = c.window();
    let new = interaction(m, w, proposal, c.coords(), d, Some(i));
    let old = interaction(m, w, c.point(i), c.coords(), d, Some(i));
    new - old
}

/// Metropolis acceptance probability of moving point i of c to `proposal`.
pub fn acceptance_probability(
    m: &PotentialModel,
    c: &Configuration,
    i: usize,
    proposal: &[f64],
) -> Result<f64> {
    check_model(m)?;
    if proposal == c.point(i) {
        return Ok(1.0);
    }
    metropolis(m.beta, move_energy(m, c, i, proposal))
}

fn lattice_start(half: &[f64], count: usize) -> Vec<f64> {
    let d = half.len();
    let k = (1..).find(|k: &usize| k.pow(d as u32) >= count).unwrap_or(1);
    let mut coords = Vec::with_capacity(count * d);
    for idx in 0..count {
        let mut r = idx;
        for h in half {
            let a = (r % k) as f64;
            r /= k;
            coords.push(-h + 2.0 * h * (a + 0.5) / k as f64);
        }
    }
    coords
}

/// `sweeps` Metropolis sweeps targeting exp(-β H_box) on a periodic box,
/// with H_box the sum of Ψ over all pairs at minimum-image distance.
pub fn sample_gibbs_mcmc(
    m: &PotentialModel,
    bx: &Window,
    count: usize,
    sweeps: usize,
    seed: u64,
) -> Result<Configuration> {
    sample_gibbs_mcmc_with(m, bx, count, sweeps, seed, &GibbsOptions::default())
}

pub fn sample_gibbs_mcmc_with(
    m: &PotentialModel,
    bx: &Window,
    count: usize,
    sweeps: usize,
    seed: u64,
    opts: &GibbsOptions,
) -> Result<Configuration> {
    check_model(m)?;
    let Window::PeriodicBox { half } = bx else {
        return Err(Error::InvalidParameter { name: "box", reason: "need a periodic box".into() });
    };
    if half.len() != m.dim {
        return Err(Error::DimensionMismatch(format!("box dim {} vs model dim {}", half.len(), m.dim)));
    }
    if sweeps == 0 {
        return Err(Error::InvalidParameter { name: "sweeps", reason: "need at least one".into() });
    }
    if !(opts.step > 0.0) {
        return Err(Error::InvalidParameter { name: "step", reason: format!("{}", opts.step) });
    }
    let d = m.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = lattice_start(half, count);
    let vol = bx.volume();
    let mut trial = vec![0.0; d];
    for _ in 0..sweeps {
        let n = pts.len() / d;
        for _ in 0..n.max(1) {
            let n = pts.len() / d;
            if n == 0 {
                break;
            }
            let i = rng.random_range(0..n);
            for (t, x) in trial.iter_mut().zip(&pts[i * d..(i + 1) * d]) {
                *t = x + rng.random_range(-opts.step..opts.step);
            }
            bx.wrap(&mut trial);
            let de = interaction(m, bx, &trial, &pts, d, Some(i))
                - interaction(m, bx, &pts[i * d..(i + 1) * d], &pts, d, Some(i));
            if rng.random::<f64>() < metropolis(m.beta, de)? {
                pts[i * d..(i + 1) * d].copy_from_slice(&trial);
            }
        }
        if let Some(z) = opts.activity {
            let moves = (z * vol).ceil().max(1.0) as usize;
            for _ in 0..moves {
                let n = pts.len() / d;
                if rng.random::<bool>() {
                    let x = uniform_point(bx, &mut rng);
                    let de = interaction(m, bx, &x, &pts, d, None);
                    let p = z * vol / (n + 1) as f64 * metropolis(m.beta, de)?;
                    if rng.random::<f64>() < p {
                        pts.extend(x);
                    }
                } else if n > 0 {
                    let i = rng.random_range(0..n);
                    let de = -interaction(m, bx, &pts[i * d..(i + 1) * d], &pts, d, Some(i));
                    let p = n as f64 / (z * vol) * metropolis(m.beta, de)?;
                    if rng.random::<f64>() < p {
                        let last = n - 1;
                        for k in 0..d {
                            pts.swap(i * d + k, last * d + k);
                        }
                        pts.truncate(last * d);
                    }
                }
            }
        }
    }
    Configuration::new(d, pts, bx.clone())
}

fn inside_outside(c: &Configuration, r: f64) -> (Vec<usize>, Vec<usize>) {
    let order = c.canonical_order();
    order.into_iter().partition(|&i| norm(c.point(i)) <= r)
}

/// Compares two routes to log(π(b)/π(a)) for configurations that differ
/// only inside S_r: the sampler's local energy changes, applied one moved
/// point at a time, against -β(ΔH_r + Δ cross terms between S_r and its
/// complement). Returns the absolute difference.
pub fn dlr_ratio_check(a: &Configuration, b: &Configuration, r: f64, m: &PotentialModel) -> Result<f64> {
    check_model(m)?;
    if a.dim() != b.dim() || a.window() != b.window() {
        return Err(Error::OutsideMismatch("configurations live on different windows".into()));
    }
    let (ain, aout) = inside_outside(a, r);
    let (bin, bout) = inside_outside(b, r);
    let key = |c: &Configuration, idx: &[usize]| -> Vec<Vec<u64>> {
        let mut v: Vec<Vec<u64>> = idx.iter().map(|&i| c.point(i).iter().map(|x| x.to_bits()).collect()).collect();
        v.sort();
        v
    };
    if key(a, &aout) != key(b, &bout) {
        return Err(Error::OutsideMismatch("points outside S_r differ".into()));
    }
    if ain.len() != bin.len() {
        return Err(Error::OutsideMismatch(format!(
            "{} vs {} points inside S_r",
            ain.len(),
            bin.len()
        )));
    }
    let d = a.dim();
    let w = a.window();

    // Sampler route: move a's inside points to b's one at a time. Points
    // present in both stay put; the rest pair up in canonical order.
    let bits = |c: &Configuration, i: usize| -> Vec<u64> { c.point(i).iter().map(|x| x.to_bits()).collect() };
    let mut unmatched_b = bin.clone();
    let mut unmatched_a = Vec::new();
    for &ia in &ain {
        match unmatched_b.iter().position(|&ib| bits(b, ib) == bits(a, ia)) {
            Some(k) => {
                unmatched_b.remove(k);
            }
            None => unmatched_a.push(ia),
        }
    }
    let mut cur: Vec<f64> = a.coords().to_vec();
    let mut local = Kahan::new(1);
    for (&ia, &ib) in unmatched_a.iter().zip(&unmatched_b) {
        let old: Vec<f64> = cur[ia * d..(ia + 1) * d].to_vec();
        let new = b.point(ib);
        if old.as_slice() == new {
            continue;
        }
        let de = interaction(m, w, new, &cur, d, Some(ia)) - interaction(m, w, &old, &cur, d, Some(ia));
        if de.is_nan() {
            return Err(Error::NonFinitePotential);
        }
        local.add(&[de]);
        cur[ia * d..(ia + 1) * d].copy_from_slice(new);
    }
    let sampler = -m.beta * local.value()[0];

    // Window route: H_r and the cross terms, each compensated.
    let energy = |c: &Configuration, inside: &[usize], outside: &[usize]| -> Result<(f64, f64)> {
        let mut h = Kahan::new(1);
        for (k, &i) in inside.iter().enumerate() {
            h.add(&[m.free_potential(c.point(i))]);
            for &j in &inside[k + 1..] {
                let v = m.pair_potential(w.distance(c.point(i), c.point(j)));
                h.add(&[v]);
            }
        }
        let mut x = Kahan::new(1);
        for &i in inside {
            for &j in outside {
                x.add(&[m.pair_potential(w.distance(c.point(i), c.point(j)))]);
            }
        }
        let (h, x) = (h.value()[0], x.value()[0]);
        if h.is_nan() || x.is_nan() {
            return Err(Error::NonFinitePotential);
        }
        Ok((h, x))
    };
    let (ha, xa) = energy(a, &ain, &aout)?;
    let (hb, xb) = energy(b, &bin, &bout)?;
    let window = -m.beta * ((hb - ha) + (xb - xa));
    if sampler == window {
        return Ok(0.0);
    }
    Ok((sampler - window).abs())
}
