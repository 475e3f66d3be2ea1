//! Model families, configurations, windows and kernels.

mod config;
mod kernel;
mod model;
pub mod special;

pub use config::{ball_volume, canonical_order, Configuration, Window, DUPLICATE_TOL};
#[allow(unused_imports)]
pub(crate) use config::{dist, norm};
pub use kernel::{kernel_eval, sine_kernel, KernelKind, KernelSpec};
pub use model::{
    build_model, hamiltonian_window, Domain, Family, ModelSpec, PairTable, PotentialModel,
};
