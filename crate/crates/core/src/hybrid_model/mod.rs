//! The jump-diffusion system class and its sample-path simulator.

mod nonlinearity;
mod signal;
mod simulate;
mod system;

pub use nonlinearity::{iqc_check, CustomMap, IqcReport, Nonlinearity, NonlinearityKind};
pub use signal::{InputSignal, ScalarSignal};
pub use simulate::{euler_step, simulate, simulate_stream, time_grid, NoiseDraw, NoiseStream, Trajectory};
pub(crate) use simulate::warn_coarse_rates;
pub use system::{drift, AuxiliarySystem, JumpDiffusionSystem};
pub(crate) use system::drift_unchecked;
