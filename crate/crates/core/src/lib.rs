//! Gaussian noise stability of Euclidean partitions.
//!
//! The crate evaluates the noise stability functional
//! `J = Σᵢ P((X, Y) ∈ Aᵢ × Aᵢ)` for ρ-correlated standard Gaussian vectors,
//! together with the machinery around it: the noise operator `T_ρ` and its
//! generator `L`, Hermite expansions, the first-variation functional `ψ_ρ`,
//! conical partition geometry, discrete k-ary stability and the MAX-k-CUT
//! rounding constant.
//!
//! Module map:
//!
//! | module        | contents                                                   |
//! |---------------|------------------------------------------------------------|
//! | [`hermite`]   | Hermite polynomials, multi-indices, sparse series          |
//! | [`gauss`]     | Gaussian measure, samplers, quadrature, surface measures   |
//! | [`partition`] | conical partitions, barycenters, `ψ₀`, the `d₂` metric      |
//! | [`stability`] | `T_ρ`, `L`, `d/dρ T_ρ`, `J`, `ψ_ρ`, boundary identities     |
//! | [`optimize`]  | variational experiments around the regular partition       |
//! | [`discrete`]  | k-ary Fourier analysis, plurality, influences              |
//! | [`maxkcut`]   | `α_k`, brute force, relaxation and conical rounding        |
//! | [`verify`]    | the acceptance criteria, shared by the CLI and the tests   |

pub mod discrete;
pub mod error;
pub mod gauss;
pub mod hermite;
pub mod manifest;
pub mod maxkcut;
pub mod optimize;
pub mod partition;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};
