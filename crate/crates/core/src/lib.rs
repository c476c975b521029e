//! Banach fixed-point iteration with loss of derivatives on graded Fréchet
//! spaces, a Picard–Lindelöf solver and certifier for normal Cauchy
//! problems, and closed-form series for a linear PDE class.

pub mod expr;
pub mod funcspace;
pub mod graded_core;
pub mod picard_pde;
pub mod linear_series;
