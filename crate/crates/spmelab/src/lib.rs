//! Numerical laboratory for porous-medium equations driven by rough
//! multiplicative signals.
//!
//! The crate simulates the degenerate diffusion `∂_t u = Δ(|u|^m sgn u)`
//! and its stochastically perturbed variants, evaluates the explicit
//! free-boundary bounds (hole-filling horizons, propagation radii, barrier
//! supersolutions) that govern how supports move, and runs the bump-grid
//! entropy experiment that certifies lower bounds on attractor complexity.
//!
//! Module map:
//!
//! - [`signals`] — rough driving paths (Brownian, fractional Brownian,
//!   drift), mollification, growth diagnostics.
//! - [`noise_field`] — the spatial noise field `μ_t(ξ) = -Σ f_k(ξ) z_t^k`
//!   with analytic derivatives and sup-norm queries.
//! - [`transforms`] — exponential spatial transforms and the random time
//!   changes that map perturbed equations onto deterministic ones.
//! - [`solver`] — semi-implicit finite-difference solver for
//!   `∂_t Y = ρ₁ Δ Φ(ρ₂ Y)` in 1D and 2D.
//! - [`support`] — thresholded numerical supports and the set operations
//!   (dilation, vanish radius, containment margins) the bounds quantify over.
//! - [`bounds`] — every explicit constant and radius schedule: the
//!   deterministic, homogeneous, small-ball, small-time and general bounds.
//! - [`barriers`] — explicit supersolutions and their numerical certification.
//! - [`entropy`] — bump grids, rescaled evolution, L¹ separation and the
//!   entropy exponent fit.
//! - [`oracle`] — the closed-form Barenblatt solution used as ground truth.
//! - [`harness`] — experiment configs, orchestration, reports and exports.
//!
//! The `spmelab` binary exposes the experiments as subcommands; the
//! `examples/` directory holds one runnable walk-through per capability.

pub mod barriers;
pub mod bounds;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod noise_field;
pub mod oracle;
pub mod signals;
pub mod solver;
pub mod support;
pub mod transforms;

pub use error::{Error, Result};
