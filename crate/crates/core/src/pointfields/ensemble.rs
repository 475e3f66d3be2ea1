use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::dpp::{DppOptions, DppSampler};
use super::ginibre::{sample_ginibre_matrix_with, Precision};
use super::gibbs::{sample_gibbs_mcmc_with, GibbsOptions};
use super::poisson::sample_poisson;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64, sha256_hex};
use crate::models::{Configuration, KernelSpec, PotentialModel, Window};

/// Seed of replicate `index` in the stream rooted at `seed`.
pub fn replicate_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// A sampler and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case")]
pub enum Sampler {
    Dpp {
        kernel: KernelSpec,
        window: Window,
        #[serde(default)]
        options: Option<DppOptions>,
    },
    GinibreMatrix {
        n: usize,
        #[serde(default)]
        precision: Precision,
    },
    Poisson {
        intensity: f64,
        window: Window,
    },
    Gibbs {
        model: PotentialModel,
        window: Window,
        count: usize,
        sweeps: usize,
        #[serde(default)]
        options: Option<GibbsOptions>,
    },
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Dpp { .. } => "dpp",
            Sampler::GinibreMatrix { .. } => "ginibre_matrix",
            Sampler::Poisson { .. } => "poisson",
            Sampler::Gibbs { .. } => "gibbs",
        }
    }
}

/// Draws from one sampler, all on one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEnsemble {
    pub configs: Vec<Configuration>,
    /// Root of the replicate seed stream.
    pub seed: u64,
    pub provenance: serde_json::Value,
}

impl SampleEnsemble {
    pub fn new(configs: Vec<Configuration>, seed: u64, provenance: serde_json::Value) -> Result<Self> {
        let first = configs
            .first()
            .ok_or_else(|| Error::InvalidParameter { name: "configs", reason: "empty ensemble".into() })?;
        if configs.iter().any(|c| c.window() != first.window()) {
            return Err(Error::InvalidParameter {
                name: "configs",
                reason: "configurations on different windows".into(),
            });
        }
        Ok(SampleEnsemble { configs, seed, provenance })
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn window(&self) -> &Window {
        self.configs[0].window()
    }

    pub fn dim(&self) -> usize {
        self.configs[0].dim()
    }

    /// One CSV per configuration plus `manifest.json` with the sampler,
    /// seed, window and a hash of every file.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.len());
        for (k, c) in self.configs.iter().enumerate() {
            let name = format!("config_{k:05}.csv");
            let text = config_csv(c);
            fs::write(dir.join(&name), &text)?;
            files.push(json!({"file": name, "sha256": sha256_hex(text.as_bytes())}));
        }
        let manifest = json!({
            "provenance": self.provenance,
            "seed": self.seed,
            "window": self.window(),
            "dim": self.dim(),
            "files": files,
        });
        let mut f = fs::File::create(dir.join("manifest.json"))?;
        writeln!(f, "{}", serde_json::to_string_pretty(&manifest).map_err(fmt_err)?)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        let m: serde_json::Value = serde_json::from_str(&text).map_err(fmt_err)?;
        let window: Window = serde_json::from_value(m["window"].clone()).map_err(fmt_err)?;
        let dim = m["dim"].as_u64().ok_or_else(|| Error::Format("manifest lacks dim".into()))? as usize;
        let seed = m["seed"].as_u64().ok_or_else(|| Error::Format("manifest lacks seed".into()))?;
        let files = m["files"].as_array().ok_or_else(|| Error::Format("manifest lacks files".into()))?;
        let mut configs = Vec::with_capacity(files.len());
        for f in files {
            let name = f["file"].as_str().ok_or_else(|| Error::Format("bad file entry".into()))?;
            let text = fs::read_to_string(dir.join(name))?;
            if f["sha256"].as_str() != Some(sha256_hex(text.as_bytes()).as_str()) {
                return Err(Error::Format(format!("{name}: hash mismatch")));
            }
            configs.push(parse_config_csv(&text, dim, window.clone())?);
        }
        SampleEnsemble::new(configs, seed, m["provenance"].clone())
    }
}

fn fmt_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

/// `index,x1..xd` rows in stored order.
pub fn config_csv(c: &Configuration) -> String {
    let mut s = String::from("index");
    for k in 1..=c.dim() {
        s.push_str(&format!(",x{k}"));
    }
    s.push('\n');
    for (i, p) in c.points().enumerate() {
        s.push_str(&i.to_string());
        for v in p {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

pub fn parse_config_csv(text: &str, dim: usize, window: Window) -> Result<Configuration> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty configuration file".into()))?;
    if header.split(',').count() != dim + 1 || !header.starts_with("index") {
        return Err(Error::Format(format!("bad configuration header {header:?}")));
    }
    let mut coords = Vec::new();
    for (ln, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != dim + 1 || f[0].parse::<usize>().ok() != Some(ln) {
            return Err(Error::Format(format!("line {}: bad row", ln + 2)));
        }
        for v in &f[1..] {
            coords.push(parse_f64(v)?);
        }
    }
    Configuration::new(dim, coords, window)
}

/// `count` independent draws; replicate i uses `replicate_seed(seed, i)`.
pub fn sample_ensemble(sampler: &Sampler, count: usize, seed: u64) -> Result<SampleEnsemble> {
    let dpp = match sampler {
        Sampler::Dpp { kernel, window, options } => {
            Some(DppSampler::new(kernel, window, &options.unwrap_or_default())?)
        }
        _ => None,
    };
    let configs: Vec<Configuration> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = replicate_seed(seed, i);
            match sampler {
                Sampler::Dpp { .. } => dpp.as_ref().expect("built above").sample(s),
                Sampler::GinibreMatrix { n, precision } => sample_ginibre_matrix_with(*n, s, *precision),
                Sampler::Poisson { intensity, window } => sample_poisson(*intensity, window, s),
                Sampler::Gibbs { model, window, count, sweeps, options } => {
                    sample_gibbs_mcmc_with(model, window, *count, *sweeps, s, &options.unwrap_or_default())
                }
            }
        })
        .collect::<Result<_>>()?;
    // Matrix draws carry their own enlarged disk; put them on a common one.
    let configs = match sampler {
        Sampler::GinibreMatrix { .. } => {
            let r = configs.iter().map(|c| c.window().radius()).fold(0.0, f64::max);
            let w = Window::Ball { center: vec![0.0, 0.0], radius: r };
            configs.iter().map(|c| c.with_window(w.clone())).collect::<Result<_>>()?
        }
        _ => configs,
    };
    let provenance = serde_json::to_value(sampler).map_err(fmt_err)?;
    SampleEnsemble::new(configs, seed, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..100).map(|i| replicate_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_eq!(a[3], replicate_seed(7, 3));
        assert_ne!(replicate_seed(8, 3), a[3]);
    }

    #[test]
    fn ensemble_round_trips_through_a_directory() {
        let s = Sampler::Poisson { intensity: 2.0, window: Window::Interval { lo: -1.0, hi: 3.0 } };
        let e = sample_ensemble(&s, 5, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        e.write_dir(dir.path()).unwrap();
        let back = SampleEnsemble::read_dir(dir.path()).unwrap();
        assert_eq!(back, e);
        let again = sample_ensemble(&s, 5, 11).unwrap();
        assert_eq!(again, e);
    }

    #[test]
    fn tampered_file_is_detected() {
        let s = Sampler::Poisson { intensity: 2.0, window: Window::Interval { lo: 0.0, hi: 3.0 } };
        let e = sample_ensemble(&s, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        e.write_dir(dir.path()).unwrap();
        fs::write(dir.path().join("config_00001.csv"), "index,x1\n0,1.5\n").unwrap();
        assert!(SampleEnsemble::read_dir(dir.path()).is_err());
    }

    #[test]
    fn empty_and_mixed_ensembles_are_rejected() {
        assert!(SampleEnsemble::new(Vec::new(), 0, json!(null)).is_err());
        let a = Configuration::empty(Window::Interval { lo: 0.0, hi: 1.0 });
        let b = Configuration::empty(Window::Interval { lo: 0.0, hi: 2.0 });
        assert!(SampleEnsemble::new(vec![a, b], 0, json!(null)).is_err());
    }
}
