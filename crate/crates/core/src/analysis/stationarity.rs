use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ball_volume, Configuration, PotentialModel};
use crate::pointfields::{replicate_seed, sample_ensemble, Sampler};
use crate::sde::{simulate, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityOptions {
    pub t_end: f64,
    pub dt: f64,
    pub runs: usize,
    pub seed: u64,
    /// ρ¹ is binned in |x| on [0, radius]; pair distances are counted
    /// from points in that ball.
    pub radius: f64,
    pub bins: usize,
    pub pair_max: f64,
    pub pair_bins: usize,
    pub bootstrap: usize,
    /// Thin each initial configuration, in canonical order, so that no two
    /// kept points are closer than this.
    #[serde(default)]
    pub min_separation: Option<f64>,
}

impl Default for StationarityOptions {
    fn default() -> Self {
        StationarityOptions {
            t_end: 0.25,
            dt: 1e-3,
            runs: 500,
            seed: 0,
            radius: 5.0,
            bins: 10,
            pair_max: 2.5,
            pair_bins: 10,
            bootstrap: 200,
            min_separation: None,
        }
    }
}

/// L¹ distance between two binned densities. Pair densities are divided
/// by the squared mean central density, giving the pair correlation g(r).
/// `stderr` is the L¹ norm of the bin-wise bootstrap standard errors of the
/// difference, so a matched pair has distance ≈ 0.8·stderr on average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDistance {
    pub edges: Vec<f64>,
    pub at_start: Vec<f64>,
    pub at_end: Vec<f64>,
    pub distance: f64,
    pub stderr: f64,
    /// 2.5% and 97.5% bootstrap quantiles of the distance.
    pub ci: (f64, f64),
}

impl HistogramDistance {
    pub fn within(&self, sigmas: f64) -> bool {
        self.distance <= sigmas * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// Runs that reached T; runs ending in a numerical abort are left out.
    pub runs: usize,
    pub aborted: usize,
    pub rho1: HistogramDistance,
    pub pair: HistogramDistance,
}

fn edges(hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| hi * k as f64 / n as f64).collect()
}

fn bin(e: &[f64], v: f64) -> Option<usize> {
    let n = e.len() - 1;
    if !(v > 0.0 || (v == 0.0 && e[0] == 0.0)) || v >= e[n] {
        return None;
    }
    Some(((v / e[n] * n as f64) as usize).min(n - 1))
}

/// Radial ρ¹ and pair-distance densities of one configuration, then the
/// mean density of the central ball.
fn features(c: &Configuration, o: &StationarityOptions) -> Vec<f64> {
    let d = c.dim();
    let (re, pe) = (edges(o.radius, o.bins), edges(o.pair_max, o.pair_bins));
    let shell = |e: &[f64], k: usize| ball_volume(d, e[k + 1]) - ball_volume(d, e[k]);
    let mut out = vec![0.0; o.bins + o.pair_bins + 1];
    let norm = |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let central = ball_volume(d, o.radius);
    for (i, x) in c.points().enumerate() {
        let Some(b) = bin(&re, norm(x)) else { continue };
        out[b] += 1.0 / shell(&re, b);
        out[o.bins + o.pair_bins] += 1.0 / central;
        for (j, y) in c.points().enumerate() {
            if i != j {
                if let Some(k) = bin(&pe, c.window().distance(x, y)) {
                    out[o.bins + k] += 1.0 / (central * shell(&pe, k));
                }
            }
        }
    }
    out
}

fn thin(c: &Configuration, delta: f64) -> Result<Configuration> {
    let c = c.canonicalized();
    let mut kept: Vec<&[f64]> = Vec::new();
    for p in c.points() {
        if kept.iter().all(|q| c.window().distance(p, q) >= delta) {
            kept.push(p);
        }
    }
    Configuration::new(c.dim(), kept.concat(), c.window().clone())
}

fn distance(
    e: Vec<f64>,
    start: &[Vec<f64>],
    end: &[Vec<f64>],
    range: std::ops::Range<usize>,
    density: Option<usize>,
    o: &StationarityOptions,
) -> HistogramDistance {
    let n = start.len();
    let nb = range.len();
    let w: Vec<f64> = e.windows(2).map(|v| v[1] - v[0]).collect();
    let mean = |rows: &[Vec<f64>], idx: &[usize]| -> Vec<f64> {
        let mut m = vec![0.0; nb];
        let mut rho = 0.0;
        for &r in idx {
            for (b, k) in range.clone().enumerate() {
                m[b] += rows[r][k];
            }
            rho += density.map_or(1.0, |k| rows[r][k]);
        }
        let n = idx.len() as f64;
        let scale = if density.is_some() { n / (rho * rho) } else { 1.0 / n };
        m.iter().map(|v| v * scale).collect()
    };
    let all: Vec<usize> = (0..n).collect();
    let (a, b) = (mean(start, &all), mean(end, &all));
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&w).map(|((x, y), w)| (x - y).abs() * w).sum::<f64>();
    let dist = l1(&a, &b);
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0xb007_57a7);
    let mut diffs = Vec::with_capacity(o.bootstrap);
    let mut dists = Vec::with_capacity(o.bootstrap);
    for _ in 0..o.bootstrap {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let (sa, sb) = (mean(start, &idx), mean(end, &idx));
        dists.push(l1(&sa, &sb));
        diffs.push(sa.iter().zip(&sb).map(|(x, y)| y - x).collect::<Vec<f64>>());
    }
    let mut stderr = 0.0;
    for k in 0..nb {
        let m = diffs.iter().map(|v| v[k]).sum::<f64>() / o.bootstrap as f64;
        let var = diffs.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (o.bootstrap as f64 - 1.0);
        stderr += var.sqrt() * w[k];
    }
    dists.sort_by(f64::total_cmp);
    let q = |p: f64| dists[((p * (dists.len() - 1) as f64).round() as usize).min(dists.len() - 1)];
    HistogramDistance { edges: e, at_start: a, at_end: b, distance: dist, stderr, ci: (q(0.025), q(0.975)) }
}

/// Draws `runs` initial configurations from `sampler`, runs the dynamics
/// of `m` to T from each and compares the radial ρ¹ and pair-distance
/// histograms at t = 0 and t = T.
pub fn stationarity_test(m: &PotentialModel, sampler: &Sampler, o: &StationarityOptions) -> Result<StationarityReport> {
    if o.runs < 10 {
        return Err(Error::InsufficientSamples { needed: 10, got: o.runs });
    }
    if o.bootstrap < 2 || o.bins == 0 || o.pair_bins == 0 || !(o.radius > 0.0) || !(o.pair_max > 0.0) {
        return Err(Error::InvalidParameter { name: "options", reason: format!("{o:?}") });
    }
    let ens = sample_ensemble(sampler, o.runs, o.seed)?;
    if ens.dim() != m.dim {
        return Err(Error::DimensionMismatch(format!("sampler dim {} vs model dim {}", ens.dim(), m.dim)));
    }
    let scheme = Scheme::default_for(m.family);
    let pairs: Vec<Option<(Vec<f64>, Vec<f64>)>> = ens
        .configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let thinned;
            let c = match o.min_separation {
                Some(delta) => {
                    thinned = thin(c, delta)?;
                    &thinned
                }
                None => c,
            };
            let start = features(c, o);
            if o.t_end == 0.0 {
                return Ok(Some((start.clone(), start)));
            }
            let path = match simulate(m, c, o.t_end, o.dt, replicate_seed(o.seed ^ 0xd1ff, i as u64), scheme) {
                Ok(p) => p,
                Err(e) if e.is_numerical_abort() => return Ok(None),
                Err(e) => return Err(e),
            };
            let last = Configuration::new(c.dim(), path.states.last().expect("nonempty").clone(), path.window.clone())?;
            Ok(Some((start, features(&last, o))))
        })
        .collect::<Result<_>>()?;
    let (start, end): (Vec<Vec<f64>>, Vec<Vec<f64>>) = pairs.into_iter().flatten().unzip();
    if start.len() < 10 {
        return Err(Error::InsufficientSamples { needed: 10, got: start.len() });
    }
    Ok(StationarityReport {
        runs: start.len(),
        aborted: o.runs - start.len(),
        rho1: distance(edges(o.radius, o.bins), &start, &end, 0..o.bins, None, o),
        pair: distance(
            edges(o.pair_max, o.pair_bins),
            &start,
            &end,
            o.bins..o.bins + o.pair_bins,
            Some(o.bins + o.pair_bins),
            o,
        ),
    })
}
