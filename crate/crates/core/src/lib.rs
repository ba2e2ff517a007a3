//! Total-variation central limit machinery for one-dimensional laws.
//!
//! Laws are [`MixtureDistribution`]s: a finite atomic part plus a density sampled on a
//! uniform grid, together with an accumulated numerical error budget. On top of that the
//! crate provides convolution, distances, the triangular sum laws used as smoothing
//! kernels, the decomposition of a law's two-fold convolution, the shift bound, Stein
//! solutions for the normal, and rate diagnostics for the total-variation CLT.

pub mod convolve;
pub mod decompose;
pub mod dichotomy;
pub mod dist;
pub mod error;
pub mod family;
mod fftconv;
pub mod quad;
pub mod shiftbound;
pub mod special;
pub mod stein;
pub mod triangular;
pub mod tvmetric;

pub use convolve::{convolve_pair, self_convolve, ConvolutionPlan, ConvolveOptions};
pub use dist::{
    affine, classify, moments, standardize, AtomicMeasure, Classification, GridDensity,
    MixtureDistribution, MomentSummary,
};
pub use error::{Error, Result};
pub use family::{make_family, FamilySpec, SamplingOptions};
pub use tvmetric::{kolmogorov_distance, shift_tv, tv_distance, tv_to_matched_normal, DistanceKind, DistanceReport};
pub use triangular::{lemma1_bound, verify_cosine_inequality, TriangularSumLaw};
pub use decompose::{build_certificate, DecompositionCertificate};
pub use shiftbound::{binomial_tail_cdf, lemma3_bound, ShiftBoundBreakdown};
pub use stein::{solve_stein, theorem_bound_rhs, BorelSetSpec, SteinSolution};
pub use dichotomy::{delta_series, fit_rate, Branch, RateFit};
