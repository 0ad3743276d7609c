//! Finite-cutoff computations for singular traces of positive compact
//! operators given by their eigenvalue sequences.
//!
//! - [`seqcore`]: eigenvalue families, partial sums `sigma_n`, integral
//!   sequences `S_n`, traces and a small symmetric eigensolver.
//! - [`eccentric`]: the limit-point test for `S_{2n}/S_n` and its witnesses.
//! - [`traces`]: Dixmier- and Varga-type estimates with diagnostics.
//! - [`states`]: window states on the positive integers and structured sets.
//! - [`example4`]: the block operator `A_q` and its Cesàro means.

pub mod eccentric;
mod float_serde;
pub mod error;
pub mod example4;
pub mod seqcore;
pub mod states;
pub mod sum;
pub mod traces;

pub use eccentric::{
    analyze_eccentricity, concavity_interpolation_check, domination_test, doubling_inequality_check,
    extract_pk, growth_bound_check, DominationReport, DoublingInput, EccentricityReport, Verdict, Witness,
};
pub use error::{Error, Result};
pub use example4::{AqParams, Example4Report, Method};
pub use seqcore::{
    cross_ratio, eig_sym_small, make_family, DeclaredClass, DenseMatrix, Family, Index, PartialSumRow,
    PartialSums, SpectralSequence, SummabilityClass, SummabilityInfo,
};
pub use states::{Accessor, FnAccessor, Interval, StateEstimate, StructuredSet, WindowMode, WindowState};
pub use sum::NeumaierSum;
pub use traces::{
    additivity_defect, averaged_operator, dilation_invariance_defect, dixmier_estimate, k_dilation_with_checks,
    varga_estimate, DilationPair, TraceEstimate, TraceMethod,
};
