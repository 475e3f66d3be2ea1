//! Euler-Maruyama integration of labeled particle systems and the IFC
//! machinery built on it.

mod ifc;
mod integrate;
mod noise;
mod path;

pub use ifc::{
    finite_volume_convergence, ifc_consistency_report, solve_ifc, sup_error, FiniteVolumeDelta,
    IfcProblem, IfcReportRow,
};
pub use integrate::{em_step, simulate, Scheme, GAP_FACTOR};
pub use noise::{NoiseSource, MAX_LEVEL};
pub use path::{read_trajectory_csv, BrownianPath, FineSegment, LabeledPath, TrajectoryTable};
