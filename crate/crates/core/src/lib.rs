//! Numerics for inverse scattering of one-dimensional NLS with an
//! inhomogeneous nonlinearity: a pseudo-spectral split-step solver, direct and
//! modified scattering maps, the quadrature kernels of the small-data
//! asymptotics, and the reconstruction routines built on them.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64`/`*32`
//! aliases below fix the scalar.

pub mod coefficient;
pub mod error;
pub mod gamma;
pub mod kernels;
pub mod quadrature;
pub mod recovery;
pub mod scalar;
pub mod scattering;
pub mod solver;
pub mod spectral;

pub use coefficient::{Coefficient, CoefficientNorms, Generator};
pub use error::{Error, Result};
pub use recovery::{
    choose_sigma, lattice, modified_structure, recover_difference_modified, recover_lattice, recover_lattice_modified, recover_point_holder,
    recover_point_log, BornMap, ModifiedAccess, ModifiedSolverPair, PairingConfig, PointEstimate, RecoveryMode,
    RecoveryReport, ScatteringAccess, SigmaRule, SolverMap, StructureTerms,
};
pub use scalar::Real;
pub use solver::{evolve, nonlinear_substep, strang_step, Evolution, Nonlinearity, NonlinearitySpec, PairStepper, SolverConfig};
pub use scattering::{
    h11_norm, modified_difference, modified_scattering_map, operator_distance, scattering_difference, scattering_map,
    scattering_map_probe, DistanceReport, ModScatterRecord, NormKind, ScatterConfig, ScatterRecord,
};
pub use spectral::{free_propagate, gaussian_probe, make_grid, Field, Grid, ProbeSpec, Spectrum};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Spectrum64 = Spectrum<f64>;
pub type Spectrum32 = Spectrum<f32>;
pub type Coefficient64 = Coefficient<f64>;
pub type Coefficient32 = Coefficient<f32>;
pub type ProbeSpec64 = ProbeSpec<f64>;
pub type ProbeSpec32 = ProbeSpec<f32>;
pub type NonlinearitySpec64 = NonlinearitySpec<f64>;
pub type NonlinearitySpec32 = NonlinearitySpec<f32>;
pub type ScatterConfig64 = ScatterConfig<f64>;
pub type ScatterConfig32 = ScatterConfig<f32>;
pub type PairingConfig64 = PairingConfig<f64>;
pub type PairingConfig32 = PairingConfig<f32>;
