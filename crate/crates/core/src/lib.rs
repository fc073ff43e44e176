//! Discrete first- and second-order vector calculus on weighted simplicial
//! model spaces: Dirichlet forms, carré du champ, measure-valued divergences,
//! Hessians, covariant and exterior derivatives, Hodge/Bochner Laplacians,
//! Schrödinger semigroups for taming measures, and Ricci/second-fundamental-form
//! measures, all on lowest-order (hat function) discretizations.
//!
//! Functions live on vertices; vector fields, forms and tensors live per cell
//! as constant fiber elements in the cell's metric frame. Meshes are required
//! to be non-obtuse so that the assembled energy form is Markovian.

pub mod curvature;
pub mod dec;
pub mod dirichlet;
pub mod error;
pub mod fields;
pub mod first_order;
pub mod kato;
pub mod linalg;
pub mod mesh;
pub mod randfield;
pub mod second_order;

pub use curvature::{Curvature, RicciReport};
pub use dirichlet::DirichletForm;
pub use error::{Error, Result};
pub use fields::{KForm, OneForm, ScalarField, TensorField2, Variance, VectorField};
pub use first_order::MeasureField;
pub use kato::{FormBound, KatoMeasure, SchrodingerOp};
pub use mesh::{ModelSpace, Shape};
pub use randfield::SmoothFieldGen;
pub use second_order::SecondOrder;
