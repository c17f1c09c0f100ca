//! Quantities computed from a solved `u`.

mod flux;
mod hessian;
mod identity;
mod kato;
mod levelset;
mod mass;
mod rigidity;

pub use flux::{inner_flux, outer_flux, sphere_terms, ComponentFlux, InnerFlux, OuterFlux, OuterFluxSettings, SphereTerms};
pub use hessian::{level_set_gauss_curvature_at, spacetime_hessian, spacetime_hessian_at};
pub use identity::{integral_identity_check, IdentityReport, Region};
pub use kato::{kato_check, KatoReport};
pub use levelset::{
    extract_level_set, level_set_diagnostics, level_set_gauss_curvature, LevelSetCurvature, LevelSetDiagnostics,
    LevelSetMesh,
};
pub use mass::{mass_lower_bound, MassBoundReport};
pub use rigidity::{killing_development, DirectionSolve, RigidityConfig, RigidityReport, RIGIDITY_DIRECTIONS};

pub(crate) use hessian::Local;

/// Default guard for divisions by `|∇u|`: `h²`.
pub fn gradient_floor_for(grid: &crate::grid::Grid) -> f64 {
    grid.spacing() * grid.spacing()
}
