//! Numerical laboratory for average asymptotic linking numbers.
//!
//! A divergence-free vector field on a closed oriented manifold links its flow
//! lines with codimension-two cycles and with measured foliations. This crate
//! computes those linking numbers two independent ways:
//!
//! * **ergodically** — integrate the flow, close long flow segments into loops
//!   with a system of short paths, and count signed crossings of a Seifert
//!   chain ([`flow`], [`shortpaths`], [`linking`]);
//! * **cohomologically** — evaluate the corresponding Hopf-type integral
//!   `∫ α` over the cycle, or the Ruelle–Sullivan pairing `∫ α ∧ ν` for a
//!   measured foliation ([`ruelle`]).
//!
//! Supporting machinery: pointwise exterior algebra on the model manifolds
//! ([`geometry`]), constructors for the standard divergence-free fields
//! ([`fields`]), an exact Fourier realisation of the Green's operator and
//! linking form on flat tori ([`hodge`]), and the Godbillon–Vey / temporal
//! Godbillon–Vey constructions for families of codimension-one foliations
//! ([`godbillon`]).

pub mod error;
pub mod expr;
pub mod fields;
pub mod flow;
pub mod geometry;
pub mod godbillon;
pub mod hodge;
pub mod linking;
pub mod records;
pub mod ruelle;
pub mod shortpaths;
pub mod util;

pub use error::{Error, Result};
pub use fields::VectorField;
pub use geometry::{FormField, Manifold, Path, Point};
pub use linking::{LinkingEstimate, PhaseChain};
pub use ruelle::{MeasuredFoliation, ParametricCycle};
pub use shortpaths::{ClosedLoop, ShortPathSystem};
