//! Structure-preserving moment model reduction for the 1D kinetic equation
//! `df/dt + xi df/dx = Q[f]`.
//!
//! A reduced model restricts `f` to a finite-dimensional family of velocity
//! profiles and evolves its parameters by the metric projection of the
//! kinetic right-hand side onto the family's tangent space. The crate
//! provides the families, the projection, a finite-volume solver for the
//! resulting balance laws, a kinetic reference solver, stability audits and
//! an a posteriori error bound.

// `!(x > 0.0)` also rejects NaN, which is the point of every such check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over several parallel arrays read better than zipped iterators.
#![allow(clippy::needless_range_loop)]

pub mod ansatz;
pub mod error;
pub mod error_estimate;
pub mod kinetic;
pub mod projection;
pub mod quadrature;
pub mod reduced;
pub mod reference;
pub mod scenario;
pub mod stability;

pub use ansatz::{AnsatzPoint, Manifold, TangentBasis};
pub use error::{Error, Result};
pub use error_estimate::ErrorReport;
pub use kinetic::{CollisionKind, CollisionModel, DistributionField, EntropyFunctional, MomentState, SpatialMesh};
pub use projection::{ReducedCoefficients, TangentProjector};
pub use quadrature::{Domain, QuadratureRule};
pub use reduced::{ReducedState, ReducedTrajectory};
pub use reference::{KineticState, KineticTrajectory};
pub use scenario::{AuditReport, InitialCondition, ScenarioConfig};
pub use stability::{GuscReport, HermiteSpace, HyperbolicityReport, SpeedReport, YongReport};
