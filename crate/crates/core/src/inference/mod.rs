//! Plug-in sandwich covariance Σ̂ = Ĥ⁻¹(r·V̂_f + V̂_Δ)Ĥ⁻¹ and the confidence
//! sets built around a point estimate.

mod sandwich;
mod sets;

pub use sandwich::{
    assemble_sigma, covariance_parts, covariance_parts_with, hessian_general, hessian_glm,
    one_step_estimate, HessianPath, OneStep, SandwichParts,
};
pub use sets::{
    ci_coordinate, confidence_ellipse, confidence_rectangle, ConfidenceSet, Ellipse, GridSet,
    Interval, Rectangle, SetShape,
};
