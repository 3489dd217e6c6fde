//! Dynamic phase-field fracture and damage in 2-D Kelvin-Voigt viscoelastic
//! solids at small strains.
//!
//! The crate provides P1 triangular finite elements, damage-degraded
//! constitutive laws (linear, mode-sensitive, AT2/AT1 phase field), three
//! time discretisations (implicit staggered, implicit monolithic, explicit
//! velocity/proto-stress), a box-constrained QP solver for the damage flow
//! rule, an isochoric plasticity extension, and a discrete energy ledger
//! whose balance identity holds to round-off for the staggered scheme.

pub mod assembly;
pub mod damage;
pub mod energy;
pub mod error;
pub mod expr;
pub mod io;
pub mod material;
pub mod mesh;
pub mod plasticity;
pub mod poly;
pub mod schemes;
pub mod sim;
pub mod sparse;
pub mod tensor;

pub use assembly::{AlphaEval, Constraints, FieldVector, LoadProgram};
pub use damage::{solve_box_qp, DamageSolution, DamageSubproblem};
pub use energy::EnergyLedger;
pub use error::{Error, Result};
pub use material::{FractureMode, LawKind, MaterialLaw, Regime};
pub use mesh::{generate_rect_mesh, BoundaryTag, Mesh2D, TagKind};
pub use plasticity::{PlasticLaw, PlasticState};
pub use schemes::{Scheme, SchemeConfig, SimState};
pub use sparse::SparseOperator;
pub use tensor::{strain_decompose, IsoTensor, StrainSplit, Sym2};
