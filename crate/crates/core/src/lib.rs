//! Numerical verification of integral identities and geometric inequalities
//! on sub-static warped products `ds^2/phi(s) + s^2 g_N`.

pub mod error;
pub mod expr;
pub mod fields;
pub mod geometry;
pub mod inequalities;
pub mod jet;
pub mod quadrature;
pub mod reilly;
pub mod solver;
pub mod surfaces;

pub use error::{Error, Result};
pub use expr::{EvalEnv, FieldExpr};
pub use geometry::{BaseKind, BaseSpace, BoundaryClass, BuiltinName, Point, Profile, WarpedSpace};
pub use inequalities::{
    af_almost_schur, heintze_karcher, minkowski, AlmostSchur, InequalityName, InequalityReport,
    EQUALITY_TOL,
};
pub use quadrature::GridSpec;
pub use reilly::{
    evaluate_general_reilly, evaluate_weighted_reilly, Domain, InnerBoundary, PChoice,
    ReillyBreakdown,
};
pub use solver::{first_eigenvalue, BvpKind, BvpSolution, EigenResult, RadialBvp};
pub use surfaces::RadialGraph;
