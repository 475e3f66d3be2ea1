use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrate::{simulate, Scheme, System};
use super::path::{BrownianPath, FineSegment, LabeledPath};
use crate::error::{Error, Result};
use crate::models::{dist, Configuration, PotentialModel};

/// One finite-dimensional SDE of the IFC system: m particles driven by `bm`
/// and interacting with the frozen outer path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfcProblem {
    pub m: usize,
    pub outer: LabeledPath,
    pub bm: BrownianPath,
    /// Flat m·d initial positions.
    pub init: Vec<f64>,
    pub model: PotentialModel,
    pub dt: f64,
    pub scheme: Scheme,
}

impl IfcProblem {
    /// The problem whose solution is the first m particles of `reference`.
    pub fn from_reference(reference: &LabeledPath, m: usize) -> Result<Self> {
        if m == 0 || m > reference.n() {
            return Err(Error::Precondition(format!("m = {m} for N = {}", reference.n())));
        }
        let d = reference.dim;
        Ok(IfcProblem {
            m,
            outer: reference.restrict(m..reference.n()),
            bm: reference.brownian(0..m),
            init: reference.states[0][..m * d].to_vec(),
            model: reference.model.clone(),
            dt: reference.dt,
            scheme: reference.scheme,
        })
    }

    fn validate(&self) -> Result<()> {
        let d = self.outer.dim;
        if self.m == 0 {
            return Err(Error::Precondition("m must be at least 1".into()));
        }
        if self.init.len() != self.m * d || self.bm.labels.len() != self.m || self.bm.dim != d {
            return Err(Error::Precondition("init/bm sizes do not match m".into()));
        }
        if self.bm.dt != self.dt || self.outer.dt != self.dt || self.bm.steps != self.outer.steps()
        {
            return Err(Error::Precondition("outer and bm grids differ".into()));
        }
        let pts: Vec<&[f64]> = self.init.chunks_exact(d).collect();
        let outer0: Vec<&[f64]> = self.outer.states[0].chunks_exact(d).collect();
        for (a, p) in pts.iter().enumerate() {
            if pts[a + 1..].iter().any(|q| dist(p, q) == 0.0) {
                return Err(Error::Precondition("initial points are not distinct".into()));
            }
            if outer0.iter().any(|q| dist(p, q) == 0.0) {
                return Err(Error::Precondition("initial point coincides with outer path".into()));
            }
        }
        Ok(())
    }
}

/// Integrates Y^m against the frozen outer path.
///
/// Drifts are the same label-ordered full sums as in `simulate`, over the
/// m integrated particles followed by the outer ones. Each grid step starts
/// at the outer path's own refinement level and refines further only when
/// a pair involving an integrated particle requires it; outer positions at
/// finer times are interpolated linearly. With the reference's own outer
/// path and Brownian motion this reproduces the reference bit for bit.
pub fn solve_ifc(p: &IfcProblem) -> Result<LabeledPath> {
    p.validate()?;
    let d = p.outer.dim;
    let n = p.m + p.outer.n();
    let window = p.outer.window.clone();
    let noise = p.bm.source();
    let sys = System {
        model: &p.model,
        window: &window,
        scheme: p.scheme,
        d,
        n,
        active: p.m,
        noise,
        labels: &p.bm.labels,
        dt: p.dt,
    };
    let steps = p.outer.steps();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(p.init.clone());
    let mut levels = Vec::with_capacity(steps);
    let mut fine = Vec::new();
    let mut bm = Vec::with_capacity(steps);
    for step in 0..steps {
        let outer_at = |level: u32, j: usize| p.outer.substep_state(step, level, j);
        let (level, mut sub) = sys.step(step, p.outer.levels[step], &states[step], &outer_at)?;
        let end = sub.pop().expect("at least one substep");
        if level > 0 {
            fine.push(FineSegment { step, level, states: sub });
        }
        states.push(end);
        levels.push(level);
        let mut inc = Vec::with_capacity(p.m * d);
        for &l in &p.bm.labels {
            inc.extend(noise.increments(l, step as u64, 0, p.dt, d));
        }
        bm.push(inc);
    }
    Ok(LabeledPath {
        model: p.model.clone(),
        scheme: p.scheme,
        seed: p.bm.seed,
        dt: p.dt,
        dim: d,
        window,
        labels: p.bm.labels.clone(),
        times: p.outer.times.clone(),
        states,
        bm_increments: bm,
        levels,
        fine,
        input_order: Vec::new(),
    })
}

/// sup over grid times and i < m of |Y^i_t - X^i_t|.
pub fn sup_error(y: &LabeledPath, x: &LabeledPath, m: usize) -> f64 {
    let d = x.dim;
    let mut e: f64 = 0.0;
    for k in 0..y.states.len() {
        for i in 0..m {
            e = e.max(dist(&y.states[k][i * d..(i + 1) * d], &x.states[k][i * d..(i + 1) * d]));
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfcReportRow {
    pub m: usize,
    pub error: f64,
}

/// For each m: solve the IFC problem built from the reference's own outer
/// path and Brownian motion, and compare with the reference.
pub fn ifc_consistency_report(reference: &LabeledPath, ms: &[usize]) -> Result<Vec<IfcReportRow>> {
    for &m in ms {
        if m == 0 || m >= reference.n() {
            return Err(Error::Precondition(format!("m = {m} not in [1, {})", reference.n())));
        }
    }
    ms.par_iter()
        .map(|&m| {
            let y = solve_ifc(&IfcProblem::from_reference(reference, m)?)?;
            Ok(IfcReportRow { m, error: sup_error(&y, reference, m) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteVolumeDelta {
    pub n: usize,
    pub n_next: usize,
    pub delta: f64,
}

/// delta(N) = sup_t max_{i<k} |X^{i,(N)}_t - X^{i,(N')}_t| for consecutive
/// N < N' in `ns`. The N-point system starts from the first N canonical
/// points of `master`; particle i uses noise stream i in every system.
pub fn finite_volume_convergence(
    m: &PotentialModel,
    master: &Configuration,
    ns: &[usize],
    k: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<FiniteVolumeDelta>> {
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("Ns must be increasing".into()));
    }
    if ns.len() < 2 {
        return Ok(Vec::new());
    }
    if *ns.last().unwrap() > master.len() || k == 0 || k > ns[0] {
        return Err(Error::Precondition(format!(
            "need k in [1, {}] and max N <= {} master points",
            ns[0],
            master.len()
        )));
    }
    let scheme = Scheme::default_for(m.family);
    let paths: Vec<LabeledPath> = ns
        .par_iter()
        .map(|&n| simulate(m, &master.truncate_canonical(n), t_end, dt, seed, scheme))
        .collect::<Result<_>>()?;
    Ok(paths
        .windows(2)
        .map(|w| FiniteVolumeDelta { n: w[0].n(), n_next: w[1].n(), delta: sup_error(&w[0], &w[1], k) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Window;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lattice(n: usize, seed: u64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<f64> = (0..n)
            .map(|i| i as f64 - n as f64 / 2.0 + rng.random_range(-0.3..0.3))
            .collect();
        Configuration::from_points_1d(&pts, Window::Whole { dim: 1 }).unwrap()
    }

    #[test]
    fn full_problem_reproduces_simulate() {
        let m = PotentialModel::sine(2.0);
        let x = simulate(&m, &lattice(12, 1), 0.3, 1e-3, 9, Scheme::Tamed).unwrap();
        let y = solve_ifc(&IfcProblem::from_reference(&x, 12).unwrap()).unwrap();
        assert_eq!(y.states, x.states);
        assert_eq!(y.levels, x.levels);
    }

    #[test]
    fn consistency_with_reference() {
        let m = PotentialModel::sine(2.0);
        let x = simulate(&m, &lattice(24, 2), 0.5, 1e-3, 4, Scheme::Tamed).unwrap();
        let rows = ifc_consistency_report(&x, &[1, 4, 8, 23]).unwrap();
        for r in rows {
            assert!(r.error <= 1e-10, "m = {}: {}", r.m, r.error);
        }
        assert!(ifc_consistency_report(&x, &[24]).is_err());
    }

    #[test]
    fn shifted_outer_and_reseeded_noise_change_the_solution() {
        let m = PotentialModel::sine(2.0);
        let x = simulate(&m, &lattice(24, 3), 1.0, 1e-3, 5, Scheme::Tamed).unwrap();
        let p = IfcProblem::from_reference(&x, 8).unwrap();
        let mut shifted = p.clone();
        shifted.outer = p.outer.translated(&[0.1]);
        let y0 = solve_ifc(&p).unwrap();
        let y1 = solve_ifc(&shifted).unwrap();
        assert!(sup_error(&y0, &y1, 8) > 0.0);
        let mut noisy = p.clone();
        noisy.bm = p.bm.reseeded(999);
        let y2 = solve_ifc(&noisy).unwrap();
        assert!(sup_error(&y2, &x, 8) > 0.1);
    }

    #[test]
    fn problem_validation() {
        let m = PotentialModel::sine(2.0);
        let x = simulate(&m, &lattice(6, 4), 0.1, 1e-2, 5, Scheme::Tamed).unwrap();
        let mut p = IfcProblem::from_reference(&x, 3).unwrap();
        p.init[0] = p.outer.states[0][0];
        assert!(matches!(solve_ifc(&p), Err(Error::Precondition(_))));
    }

    #[test]
    fn finite_volume_trivial_and_nested() {
        let m = PotentialModel::sine(2.0);
        let master = lattice(40, 5);
        assert!(finite_volume_convergence(&m, &master, &[16], 1, 0.1, 1e-2, 1).unwrap().is_empty());
        let d = finite_volume_convergence(&m, &master, &[8, 16, 32], 1, 0.2, 1e-3, 1).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.iter().all(|r| r.delta > 0.0 && r.delta.is_finite()));
    }
}
