//! Sub-static warped products `ds^2/phi + s^2 g_N` and their curvature.

mod audit;
mod base;
mod curvature;
mod profile;
mod space;
mod tensors;

pub use audit::{
    audit_formulas, displayed_q_tangential, displayed_ricci_tangential, AuditReport, AuditRow,
    AuditedQuantity,
};
pub use base::{sphere_area, BaseKind, BaseSpace};
pub use curvature::{
    Curvature, PotentialJet, RadialJets, RicciEigen, SubstaticMargin, WarpedField,
    WarpedWithDerivative, DIVERGENCE_STEP,
};
pub use profile::{bisect, BoundaryClass, LambdaJet, Profile};
pub use space::{BuiltinName, Point, WarpedSpace};
pub use tensors::{
    christoffel_from_jets, covariant_hessian_from_jet, invert, kulkarni_nomizu, raise,
    ricci_from_riemann, riemann_from_christoffel_fd, FdScheme, Frame, Rank, TensorValue,
    WarpedTensor,
};
