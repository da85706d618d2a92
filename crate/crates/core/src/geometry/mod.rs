//! Manifolds, charts, metrics, geodesics, and pointwise exterior algebra.
//!
//! Points carry chart coordinates on one of the model manifolds; differential
//! forms are pointwise-evaluable alternating tensors on chart/ambient tangent
//! vectors. Embedded spheres use their ambient coordinates as a global chart
//! (forms extend smoothly off the submanifold, so finite-difference exterior
//! derivatives restrict to the intrinsic ones on tangent vectors).

mod form;
mod geodesic;
mod manifold;
mod point;
pub mod symform;

pub use form::{interior_product, numeric_d, numeric_d_richardson, wedge, FormField, PointFn};
pub use geodesic::{geodesic, lex_smallest_unit_tangent, GeodesicArc, Path};
pub use manifold::{Manifold, VOL_CP2, VOL_S2XS2, VOL_S3, VOL_S3XS3};
pub use point::Point;
pub use symform::SymForm;
