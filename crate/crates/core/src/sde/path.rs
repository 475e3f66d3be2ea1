use serde::{Deserialize, Serialize};
use serde_json::json;
use std::io::{BufRead, Write};

use super::integrate::Scheme;
use super::noise::NoiseSource;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64, sha256_hex};
use crate::models::{PotentialModel, Window};

/// States inside one refined grid step: the 2^level - 1 interior substep
/// states, each a flat N·d array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineSegment {
    pub step: usize,
    pub level: u32,
    pub states: Vec<Vec<f64>>,
}

/// Time-gridded trajectories of labeled particles.
///
/// Particle k is driven by noise stream `labels[k]`; for paths from
/// `simulate` the labels are the canonical ranks of the initial points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPath {
    pub model: PotentialModel,
    pub scheme: Scheme,
    pub seed: u64,
    pub dt: f64,
    pub dim: usize,
    /// Domain of the dynamics (distances and wrapping follow it).
    pub window: Window,
    pub labels: Vec<u64>,
    pub times: Vec<f64>,
    /// states[k] is the flat N·d position array at times[k].
    pub states: Vec<Vec<f64>>,
    /// bm_increments[k] is the flat N·d Brownian increment over step k.
    pub bm_increments: Vec<Vec<f64>>,
    /// Refinement level used for each grid step.
    pub levels: Vec<u32>,
    /// Interior states of the steps with level > 0, in step order.
    pub fine: Vec<FineSegment>,
    /// Input index of each particle, when built from an unlabeled configuration.
    pub input_order: Vec<usize>,
}

impl LabeledPath {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn position(&self, k: usize, i: usize) -> &[f64] {
        &self.states[k][i * self.dim..(i + 1) * self.dim]
    }

    pub fn fine_segment(&self, step: usize) -> Option<&FineSegment> {
        self.fine.binary_search_by_key(&step, |f| f.step).ok().map(|k| &self.fine[k])
    }

    /// Positions at substep j (0..=2^level) of grid step `step`, with linear
    /// interpolation when `level` is finer than what was recorded.
    pub fn substep_state(&self, step: usize, level: u32, j: usize) -> Vec<f64> {
        let rec = self.levels[step];
        assert!(level >= rec, "requested level below recorded level");
        let ratio = 1usize << (level - rec);
        let kr = 1usize << rec;
        let at = |jj: usize| -> &[f64] {
            if jj == 0 {
                &self.states[step]
            } else if jj == kr {
                &self.states[step + 1]
            } else {
                &self.fine_segment(step).expect("fine segment").states[jj - 1]
            }
        };
        if j % ratio == 0 {
            return at(j / ratio).to_vec();
        }
        let (a, b) = (at(j / ratio), at(j / ratio + 1));
        let w = (j % ratio) as f64 / ratio as f64;
        a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
    }

    /// Sub-path of the particles in `range`.
    pub fn restrict(&self, range: std::ops::Range<usize>) -> LabeledPath {
        let d = self.dim;
        let cut = |v: &Vec<f64>| v[range.start * d..range.end * d].to_vec();
        LabeledPath {
            labels: self.labels[range.clone()].to_vec(),
            states: self.states.iter().map(cut).collect(),
            bm_increments: self.bm_increments.iter().map(cut).collect(),
            fine: self
                .fine
                .iter()
                .map(|f| FineSegment {
                    step: f.step,
                    level: f.level,
                    states: f.states.iter().map(cut).collect(),
                })
                .collect(),
            input_order: if self.input_order.len() == self.n() {
                self.input_order[range.clone()].to_vec()
            } else {
                Vec::new()
            },
            ..self.clone_header()
        }
    }

    /// Same path with every position shifted by h.
    pub fn translated(&self, h: &[f64]) -> LabeledPath {
        let d = self.dim;
        let shift = |v: &Vec<f64>| -> Vec<f64> {
            v.iter().enumerate().map(|(k, x)| x + h[k % d]).collect()
        };
        let mut p = self.clone();
        p.states = self.states.iter().map(shift).collect();
        for f in &mut p.fine {
            f.states = f.states.iter().map(shift).collect();
        }
        p
    }

    fn clone_header(&self) -> LabeledPath {
        LabeledPath {
            model: self.model.clone(),
            scheme: self.scheme,
            seed: self.seed,
            dt: self.dt,
            dim: self.dim,
            window: self.window.clone(),
            labels: Vec::new(),
            times: self.times.clone(),
            states: Vec::new(),
            bm_increments: Vec::new(),
            levels: self.levels.clone(),
            fine: Vec::new(),
            input_order: Vec::new(),
        }
    }

    /// The Brownian drivers of particles in `range`.
    pub fn brownian(&self, range: std::ops::Range<usize>) -> BrownianPath {
        BrownianPath {
            seed: self.seed,
            labels: self.labels[range].to_vec(),
            dt: self.dt,
            steps: self.steps(),
            dim: self.dim,
        }
    }

    /// Trajectory CSV: t,particle,x1..xd at every grid time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t,particle")?;
        for c in 1..=self.dim {
            write!(w, ",x{c}")?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            for i in 0..self.n() {
                write!(w, "{},{}", fmt_f64(*t), i)?;
                for v in self.position(k, i) {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Increment CSV: step,particle,dB1..dBd.
    pub fn write_increments_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "step,particle")?;
        for c in 1..=self.dim {
            write!(w, ",dB{c}")?;
        }
        writeln!(w)?;
        for (k, inc) in self.bm_increments.iter().enumerate() {
            for i in 0..self.n() {
                write!(w, "{k},{i}")?;
                for v in &inc[i * self.dim..(i + 1) * self.dim] {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Parameters that determine the path, for the manifest.
    pub fn params(&self) -> serde_json::Value {
        json!({
            "model": self.model,
            "N": self.n(),
            "dt": self.dt,
            "T": self.horizon(),
            "seed": self.seed,
            "scheme": self.scheme,
        })
    }

    /// One JSON-lines manifest record with a content hash of `params()`.
    pub fn manifest_record(&self) -> serde_json::Value {
        let params = self.params();
        let hash = sha256_hex(params.to_string().as_bytes());
        let mut rec = params;
        rec["params_hash"] = json!(hash);
        rec
    }
}

/// Grid times and positions read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub dim: usize,
    pub n: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

pub fn read_trajectory_csv<R: BufRead>(r: R) -> Result<TrajectoryTable> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty trajectory file".into()))??;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "particle" {
        return Err(Error::Format(format!("bad trajectory header {header:?}")));
    }
    let dim = cols.len() - 2;
    let mut times: Vec<f64> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != dim + 2 {
            return Err(Error::Format(format!("line {}: {} fields", ln + 2, f.len())));
        }
        let t = parse_f64(f[0])?;
        let i: usize = f[1]
            .parse()
            .map_err(|_| Error::Format(format!("line {}: bad particle index", ln + 2)))?;
        if times.last() != Some(&t) {
            times.push(t);
            states.push(Vec::new());
        }
        let st = states.last_mut().expect("state row");
        if st.len() != i * dim {
            return Err(Error::Format(format!("line {}: particles out of order", ln + 2)));
        }
        for v in &f[2..] {
            st.push(parse_f64(v)?);
        }
    }
    let n = states.first().map_or(0, |s| s.len() / dim);
    if states.iter().any(|s| s.len() != n * dim) {
        return Err(Error::Format("ragged trajectory".into()));
    }
    Ok(TrajectoryTable { dim, n, times, states })
}

/// Brownian drivers of a set of labels, regenerated on demand from the
/// counter-based source (so any refinement level is available).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    pub seed: u64,
    pub labels: Vec<u64>,
    pub dt: f64,
    pub steps: usize,
    pub dim: usize,
}

impl BrownianPath {
    pub fn source(&self) -> NoiseSource {
        NoiseSource::new(self.seed)
    }

    /// Same labels, different seed: an independent Brownian path.
    pub fn reseeded(&self, seed: u64) -> BrownianPath {
        BrownianPath { seed, ..self.clone() }
    }
}
