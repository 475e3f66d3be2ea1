use std::io::BufReader;

use ibmsim::analysis::min_gap;
use ibmsim::models::{KernelSpec, PotentialModel, Window};
use ibmsim::pointfields::{sample_ensemble, SampleEnsemble, Sampler};
use ibmsim::sde::{read_trajectory_csv, simulate, Scheme};

#[test]
fn sample_simulate_and_reload_bit_exact() {
    let sampler = Sampler::Dpp { kernel: KernelSpec::sine(), window: Window::Interval { lo: -10.0, hi: 10.0 }, options: None };
    let e = sample_ensemble(&sampler, 3, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    e.write_dir(dir.path()).unwrap();
    let back = SampleEnsemble::read_dir(dir.path()).unwrap();
    assert_eq!(back.configs, e.configs);

    let init = e.configs[0].with_window(Window::Whole { dim: 1 }).unwrap();
    let path = simulate(&PotentialModel::sine(2.0), &init, 0.2, 1e-3, 4, Scheme::Tamed).unwrap();
    assert!(min_gap(&path).gap > 0.0);
    let mut csv = Vec::new();
    path.write_csv(&mut csv).unwrap();
    let table = read_trajectory_csv(BufReader::new(csv.as_slice())).unwrap();
    assert_eq!(table.times, path.times);
    assert_eq!(table.states, path.states);
    assert_eq!(table.n, init.len());
}

#[test]
fn same_seed_same_path_different_seed_different_path() {
    let init = ibmsim::models::Configuration::from_points_1d(&[-1.5, -0.5, 0.5, 1.5], Window::Whole { dim: 1 }).unwrap();
    let m = PotentialModel::sine(2.0);
    let a = simulate(&m, &init, 0.1, 1e-3, 1, Scheme::Tamed).unwrap();
    let b = simulate(&m, &init, 0.1, 1e-3, 1, Scheme::Tamed).unwrap();
    let c = simulate(&m, &init, 0.1, 1e-3, 2, Scheme::Tamed).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.states, c.states);
}
