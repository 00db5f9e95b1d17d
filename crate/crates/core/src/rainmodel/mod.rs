//! The scale-aware heavy rain model.
//!
//! A clean high-resolution image `H` is first reduced to `J = (H ⊗ K)↓s`
//! ([`degrade_lr`]), then rain streaks `S`, a transmission map `T`, and
//! atmospheric light `A` are composited as
//! `I = T ⊙ (J + Σ Sᵢ) + (1 − T) ⊙ A` ([`compose_heavyrain`]). The same
//! arithmetic backs [`recompose`], and [`invert_heavyrain`] undoes it exactly
//! when the physical parameters are known.

mod compose;
mod params;
mod streaks;

pub use compose::{
    compose_heavyrain, degrade_full, degrade_lr, invert_heavyrain, make_atmospheric, make_transmission,
    physical_params, recompose, Composite, Degraded, PhysicalParams, DEFAULT_INVERT_EPS,
};
pub use params::{derive_seed, sample_params, DegradationConfig, RainParams, MIN_TRANSMISSION};
pub use streaks::{motion_kernel, noise_rng, synth_rain_layer, synth_rain_layers};
