//! Volterra solver: frozen-driver solves, the Picard map, certified
//! contraction and interval stitching.

pub mod certificate;
pub mod field;
pub mod frozen;
pub mod picard;
pub mod stitch;

pub use certificate::{build_certificate, CertificateOverrides, ContractionCertificate};
pub use field::{FrozenField, Init};
pub use frozen::{apply_theta, direct_conditional, effective_terminal, solve_frozen_bdsvie, RowTerminal, SolverContext, Window};
pub use picard::{iteration_bound, picard_solve, PicardOptions, SolutionEstimate, StripReport};
pub use stitch::{field_distance, resubstitution_residual, stitched_solve};
