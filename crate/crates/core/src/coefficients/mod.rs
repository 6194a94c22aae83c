//! Controlled coefficients, jump measures, the symbol and the modified drift,
//! with sampling validators for the regularity conditions.

mod control;
mod field;
mod kernel;
mod symbol;
mod truncation;
pub mod validators;

pub use control::ControlSet;
pub use field::{
    CoefficientField, DeclaredLipschitz, DiffusionFn, DriftFn, FieldBuilder, JumpFn, SampleBox,
};
pub use kernel::{GammaFn, JumpAtom, JumpKernel};
pub use symbol::{
    compensated_drift, eval_symbol, modified_drift, theta_triplets, SymbolValue, Triplet,
};
pub use truncation::TruncationFunction;
pub use validators::{
    check_symbol_uniform_continuity, check_tightness, estimate_lipschitz_constants,
    symbol_sup_near, LipschitzEstimate, SymbolDecayReport, TightnessReport,
};

pub(crate) use symbol::jump_drift_correction;
