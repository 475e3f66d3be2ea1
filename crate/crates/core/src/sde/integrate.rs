use serde::{Deserialize, Serialize};

use super::noise::{NoiseSource, MAX_LEVEL};
use super::path::{FineSegment, LabeledPath};
use crate::drift::{airy_compensator, pair_drift_term, Kahan};
use crate::error::{Error, Result};
use crate::models::{norm, Configuration, Family, PotentialModel, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Plain,
    Tamed,
}

impl Scheme {
    pub fn default_for(f: Family) -> Scheme {
        if f.is_ruelle() {
            Scheme::Plain
        } else {
            Scheme::Tamed
        }
    }
}

/// One Euler-Maruyama step for a single particle.
pub fn em_step(x: &[f64], b: &[f64], dt: f64, dw: &[f64], scheme: Scheme) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    em_step_into(x, b, dt, dw, scheme, &mut out);
    out
}

#[inline]
fn em_step_into(x: &[f64], b: &[f64], dt: f64, dw: &[f64], scheme: Scheme, out: &mut [f64]) {
    let scale = match scheme {
        Scheme::Plain => dt,
        Scheme::Tamed => dt / (1.0 + norm(b) * dt),
    };
    for k in 0..x.len() {
        out[k] = x[k] + b[k] * scale + dw[k];
    }
}

/// Ratio gap_min / sqrt(h) below which a substep is refined.
pub const GAP_FACTOR: f64 = 10.0;

/// Drift of particle i in a finite system: full sums over every other
/// particle in label order, compensated.
pub(crate) fn system_drift(
    m: &PotentialModel,
    window: &Window,
    state: &[f64],
    d: usize,
    i: usize,
    out: &mut [f64],
) {
    let n = state.len() / d;
    let x = &state[i * d..(i + 1) * d];
    let mut acc = Kahan::new(d);
    let mut u = vec![0.0; d];
    let mut term = vec![0.0; d];
    for j in 0..n {
        if j == i {
            continue;
        }
        window.displacement(x, &state[j * d..(j + 1) * d], &mut u);
        pair_drift_term(m, &u, &mut term);
        acc.add(&term);
    }
    out.copy_from_slice(acc.value());
    match m.family {
        Family::Bessel => out[0] += 0.5 * m.beta * (m.alpha / (2.0 * x[0])),
        Family::GinibreGauge => {
            for k in 0..d {
                out[k] -= x[k];
            }
        }
        Family::AiryBeta => {
            let r = state.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            out[0] -= airy_compensator(r, m.beta);
        }
        _ => {}
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Failure {
    Gap,
    Order { i: usize, j: usize, gap: f64 },
    Boundary { i: usize },
    NonFinite { i: usize },
}

/// A finite system whose first `active` particles are integrated; the rest
/// are supplied externally at every substep time.
pub(crate) struct System<'a> {
    pub model: &'a PotentialModel,
    pub window: &'a Window,
    pub scheme: Scheme,
    pub d: usize,
    pub n: usize,
    pub active: usize,
    pub noise: NoiseSource,
    pub labels: &'a [u64],
    pub dt: f64,
}

impl System<'_> {
    /// Pair potential blows up at contact, so pairs must not meet.
    fn singular(&self) -> bool {
        self.model.beta > 0.0 && self.model.family != Family::CustomRuelle
    }

    fn one_d_ordered(&self) -> bool {
        self.d == 1 && !self.window.is_periodic() && self.singular()
    }

    /// Indices sorted by position (1-d only).
    fn sorted(&self, full: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| full[a].total_cmp(&full[b]).then(a.cmp(&b)));
        idx
    }

    fn gap_violation(&self, full: &[f64], sorted: &[usize], thr: f64) -> bool {
        let d = self.d;
        if self.model.family == Family::Bessel
            && (0..self.active).any(|i| full[i * d] < thr)
        {
            return true;
        }
        if !self.singular() {
            return false;
        }
        if self.one_d_ordered() {
            return sorted.windows(2).any(|w| {
                (w[0] < self.active || w[1] < self.active) && full[w[1]] - full[w[0]] < thr
            });
        }
        for i in 0..self.active {
            let xi = &full[i * d..(i + 1) * d];
            for j in 0..self.n {
                if j != i && (j > i || j >= self.active) {
                    let g = self.window.distance(xi, &full[j * d..(j + 1) * d]);
                    if g < thr {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn check_after(&self, next: &[f64], sorted: &[usize]) -> Option<Failure> {
        let d = self.d;
        for i in 0..self.active {
            if next[i * d..(i + 1) * d].iter().any(|v| !v.is_finite()) {
                return Some(Failure::NonFinite { i });
            }
        }
        if self.model.family == Family::Bessel {
            if let Some(i) = (0..self.active).find(|&i| next[i * d] <= 0.0) {
                return Some(Failure::Boundary { i });
            }
        }
        if self.one_d_ordered() {
            for w in sorted.windows(2) {
                if (w[0] < self.active || w[1] < self.active) && !(next[w[1]] > next[w[0]]) {
                    let (i, j) = (w[0].min(w[1]), w[0].max(w[1]));
                    return Some(Failure::Order { i, j, gap: (next[w[1]] - next[w[0]]).abs() });
                }
            }
        }
        None
    }

    /// Integrates grid step `step` at refinement `level`. Returns the active
    /// states at substep times 1..=2^level.
    pub(crate) fn try_step(
        &self,
        step: usize,
        level: u32,
        start: &[f64],
        outer_at: &dyn Fn(usize) -> Vec<f64>,
    ) -> std::result::Result<Vec<Vec<f64>>, (Failure, usize)> {
        let d = self.d;
        let k = 1usize << level;
        let h = self.dt / k as f64;
        let thr = GAP_FACTOR * h.sqrt();
        let last_level = level >= MAX_LEVEL;
        let incs: Vec<Vec<f64>> = self.labels[..self.active]
            .iter()
            .map(|&l| self.noise.increments(l, step as u64, level, self.dt, d))
            .collect();
        let mut cur = start.to_vec();
        let mut full = vec![0.0; self.n * d];
        let mut b = vec![0.0; self.active * d];
        let mut out = Vec::with_capacity(k);
        for j in 0..k {
            full[..self.active * d].copy_from_slice(&cur);
            full[self.active * d..].copy_from_slice(&outer_at(j));
            let sorted = if self.one_d_ordered() { self.sorted(&full) } else { Vec::new() };
            if !last_level && self.gap_violation(&full, &sorted, thr) {
                return Err((Failure::Gap, j));
            }
            for i in 0..self.active {
                system_drift(self.model, self.window, &full, d, i, &mut b[i * d..(i + 1) * d]);
            }
            let mut next = vec![0.0; self.active * d];
            for i in 0..self.active {
                em_step_into(
                    &cur[i * d..(i + 1) * d],
                    &b[i * d..(i + 1) * d],
                    h,
                    &incs[i][j * d..(j + 1) * d],
                    self.scheme,
                    &mut next[i * d..(i + 1) * d],
                );
                self.window.wrap(&mut next[i * d..(i + 1) * d]);
            }
            let mut after = next.clone();
            after.extend_from_slice(&outer_at(j + 1));
            if let Some(f) = self.check_after(&after, &sorted) {
                return Err((f, j));
            }
            cur = next;
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// Refines until the step succeeds; errors out past the finest level.
    pub(crate) fn step(
        &self,
        step: usize,
        min_level: u32,
        start: &[f64],
        outer_at: &dyn Fn(u32, usize) -> Vec<f64>,
    ) -> Result<(u32, Vec<Vec<f64>>)> {
        let mut level = min_level;
        loop {
            match self.try_step(step, level, start, &|j| outer_at(level, j)) {
                Ok(states) => return Ok((level, states)),
                Err((fail, j)) => {
                    if level < MAX_LEVEL {
                        level += 1;
                        continue;
                    }
                    let t = (step as f64 + (j + 1) as f64 / (1u64 << level) as f64) * self.dt;
                    return Err(match fail {
                        Failure::Boundary { i } => Error::BoundaryHit { t, particle: i },
                        Failure::Order { i, j, gap } => Error::StepCollapse { t, i, j, gap },
                        Failure::NonFinite { i } => {
                            Error::StepCollapse { t, i, j: i, gap: f64::NAN }
                        }
                        Failure::Gap => unreachable!("gap test is skipped at the finest level"),
                    });
                }
            }
        }
    }
}

pub(crate) fn grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Precondition(format!("T must be nonnegative, got {t_end}")));
    }
    let m = (t_end / dt).round();
    if (m * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::Precondition(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok((0..=m as usize).map(|k| k as f64 * dt).collect())
}

/// Domain the particles move in, given the window the initial points came from.
pub(crate) fn dynamics_window(m: &PotentialModel, init: &Window) -> Window {
    if init.is_periodic() {
        init.clone()
    } else if m.family == Family::Bessel {
        Window::HalfLine
    } else {
        Window::Whole { dim: m.dim }
    }
}

/// Integrates the finite N-particle system started from `init`.
///
/// Particles are labeled in canonical order (|x| increasing) and particle k
/// is driven by noise stream k. Each grid step is retried at levels
/// 0, 1, ..., 10 (substep dt/2^level) while some pair is closer than
/// 10·sqrt(substep), a Bessel particle is that close to 0, or a 1-d step
/// changes the particle order (pairs are only watched when the pair
/// potential is singular). At level 10 only order changes, boundary
/// crossings and non-finite states abort the run.
pub fn simulate(
    m: &PotentialModel,
    init: &Configuration,
    t_end: f64,
    dt: f64,
    seed: u64,
    scheme: Scheme,
) -> Result<LabeledPath> {
    let times = grid(t_end, dt)?;
    if init.dim() != m.dim {
        return Err(Error::Precondition(format!(
            "initial configuration dim {} vs model dim {}",
            init.dim(),
            m.dim
        )));
    }
    if m.family == Family::Bessel && init.points().any(|p| !(p[0] > 0.0)) {
        return Err(Error::Precondition("bessel initial points must be > 0".into()));
    }
    let input_order = init.canonical_order();
    let canon = init.canonicalized();
    let n = canon.len();
    let d = m.dim;
    let labels: Vec<u64> = (0..n as u64).collect();
    let window = dynamics_window(m, init.window());
    let noise = NoiseSource::new(seed);
    let sys = System {
        model: m,
        window: &window,
        scheme,
        d,
        n,
        active: n,
        noise,
        labels: &labels,
        dt,
    };
    let steps = times.len() - 1;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(canon.coords().to_vec());
    let mut bm = Vec::with_capacity(steps);
    let mut levels = Vec::with_capacity(steps);
    let mut fine = Vec::new();
    let empty = |_: u32, _: usize| Vec::new();
    for step in 0..steps {
        let (level, mut sub) = sys.step(step, 0, &states[step], &empty)?;
        let end = sub.pop().expect("at least one substep");
        if level > 0 {
            fine.push(FineSegment { step, level, states: sub });
        }
        states.push(end);
        levels.push(level);
        let mut inc = Vec::with_capacity(n * d);
        for &l in &labels {
            inc.extend(noise.increments(l, step as u64, 0, dt, d));
        }
        bm.push(inc);
    }
    Ok(LabeledPath {
        model: m.clone(),
        scheme,
        seed,
        dt,
        dim: d,
        window,
        labels,
        times,
        states,
        bm_increments: bm,
        levels,
        fine,
        input_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelSpec};

    #[test]
    fn em_step_examples() {
        let x = [1.0, -2.0];
        assert_eq!(em_step(&x, &[0.0, 0.0], 0.1, &[0.0, 0.0], Scheme::Plain), x.to_vec());
        assert_eq!(em_step(&x, &[0.0, 0.0], 0.1, &[0.0, 0.0], Scheme::Tamed), x.to_vec());
        let y = em_step(&[0.0], &[3.0], 0.25, &[0.0], Scheme::Plain);
        assert_eq!(y, vec![0.75]);
        let y = em_step(&[0.0], &[1e6], 1e-3, &[0.0], Scheme::Tamed);
        assert!((y[0] - 1e3 / (1.0 + 1e3)).abs() < 1e-15);
        assert!(y[0] < 1.0);
    }

    #[test]
    fn grid_preconditions() {
        assert!(matches!(grid(1.0, 0.0), Err(Error::Precondition(_))));
        assert!(matches!(grid(1.0, -1.0), Err(Error::Precondition(_))));
        assert_eq!(grid(1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(grid(0.0, 0.1).unwrap(), vec![0.0]);
    }

    fn line(p: &[f64]) -> Configuration {
        Configuration::from_points_1d(p, Window::Whole { dim: 1 }).unwrap()
    }

    #[test]
    fn simulate_rejects_bad_dt() {
        let m = PotentialModel::sine(2.0);
        assert!(matches!(
            simulate(&m, &line(&[0.0]), 1.0, -1.0, 1, Scheme::Tamed),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn single_dyson_particle_is_brownian() {
        let m = PotentialModel::sine(2.0);
        let init = line(&[0.0]);
        let runs = 10_000;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for seed in 0..runs {
            let p = simulate(&m, &init, 1.0, 0.1, seed, Scheme::Tamed).unwrap();
            let x = p.states[p.steps()][0];
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / runs as f64;
        let var = s2 / runs as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn free_particles_have_uncorrelated_increments() {
        let m = build_model(&ModelSpec::new("custom", 0.0)).unwrap();
        let init = line(&[-3.0, -1.0, 1.0, 3.0]);
        let p = simulate(&m, &init, 10.0, 0.01, 5, Scheme::Plain).unwrap();
        let n = p.steps();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let mut prods = Vec::with_capacity(n);
                for k in 0..n {
                    let da = p.states[k + 1][a] - p.states[k][a];
                    let db = p.states[k + 1][b] - p.states[k][b];
                    prods.push(da * db);
                }
                let mean = prods.iter().sum::<f64>() / n as f64;
                let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                assert!(mean.abs() <= 3.0 * se, "pair ({a},{b}): {mean} vs {se}");
            }
        }
    }

    #[test]
    fn paths_are_reproducible_and_record_increments() {
        let m = PotentialModel::sine(2.0);
        let init = line(&[-1.5, -0.2, 0.9, 2.0]);
        let a = simulate(&m, &init, 0.5, 1e-3, 11, Scheme::Tamed).unwrap();
        let b = simulate(&m, &init, 0.5, 1e-3, 11, Scheme::Tamed).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.states[0], vec![-0.2, 0.9, -1.5, 2.0]);
        assert_eq!(a.input_order, vec![1, 2, 0, 3]);
        assert_eq!(a.bm_increments.len(), 500);
        // Order is preserved along the whole path.
        for s in &a.states {
            assert!(s[2] < s[0] && s[0] < s[1] && s[1] < s[3]);
        }
    }

    #[test]
    fn exchange_symmetry() {
        let m = PotentialModel::sine(2.0);
        let pts = [-1.5, -0.2, 0.9, 2.0, 3.1, -2.7];
        let base = simulate(&m, &line(&pts), 0.2, 1e-3, 3, Scheme::Tamed).unwrap();
        let perm = [3.1, 0.9, -2.7, -0.2, 2.0, -1.5];
        let other = simulate(&m, &line(&perm), 0.2, 1e-3, 3, Scheme::Tamed).unwrap();
        assert_eq!(base.states, other.states);
    }

    #[test]
    fn close_pairs_trigger_refinement() {
        let m = PotentialModel::sine(2.0);
        let p = simulate(&m, &line(&[0.0, 0.05]), 0.01, 1e-3, 2, Scheme::Tamed).unwrap();
        assert!(p.levels[0] > 0);
        assert!(p.fine_segment(0).is_some());
        let seg = p.fine_segment(0).unwrap();
        assert_eq!(seg.states.len(), (1 << seg.level) - 1);
    }

    #[test]
    fn bessel_particles_stay_positive() {
        let m = build_model(&ModelSpec::new("bessel", 2.0).alpha(2.0)).unwrap();
        let init = Configuration::from_points_1d(&[0.5, 1.5, 3.0], Window::HalfLine).unwrap();
        let p = simulate(&m, &init, 1.0, 1e-3, 4, Scheme::Tamed).unwrap();
        assert!(p.states.iter().flatten().all(|v| *v > 0.0));
        let bad = Configuration::from_points_1d(&[0.0, 1.0], Window::HalfLine).unwrap();
        assert!(matches!(simulate(&m, &bad, 1.0, 1e-3, 4, Scheme::Tamed), Err(Error::Precondition(_))));
    }
}
