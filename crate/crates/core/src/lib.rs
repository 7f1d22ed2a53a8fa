//! Parameter-dependent Preisach hysteresis operators on right-continuous step
//! signals: the play operator, discretized Preisach operators, their inversion
//! with certified Lipschitz bounds, and a thermo-piezoelectric solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csv_io;
pub mod error;
pub mod inverse;
pub mod piezo;
pub mod play;
pub mod preisach;
pub mod quadrature;
pub mod random;
pub mod signals;

pub use error::{Error, Result};
pub use inverse::{invert, invert_step, InversionReport};
pub use piezo::{solve_pe5, solve_pe5_with_radius, PiezoConfig, PiezoModel};
pub use play::{play_init, play_state_step, play_trajectory, play_update, PlayState};
pub use preisach::{discretize, forward_apply, forward_eval, DensityModel, DiscretePreisach};
pub use signals::{ParamSignal, StepSignal};
