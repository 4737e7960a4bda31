//! Resolvent machinery on hyperbolic ends: complex-order Bessel kernels, per-mode
//! model resolvents, weighted operator norms, hyperbolic-space wave checks, the
//! parametrix with its Neumann inversion, and metric admissibility checks.

pub mod bessel;
pub mod cross_section;
pub mod error;
pub mod gamma;
pub mod grid;
pub mod hyperbolic_space;
pub mod linalg;
pub mod metric_check;
pub mod mode_resolvent;
pub mod parametrix;
pub mod quadrature;
pub mod weight;
pub mod weighted_operator;

pub use cross_section::{builtin_spectrum, CrossSectionKind, CrossSectionSpectrum, SpectrumEntry};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use grid::{GridFunction, RadialGrid};
pub use metric_check::{ConditionReport, WarpProfile, WarpedMetricFamily};
pub use mode_resolvent::{ModeTable, SpectralPoint};
pub use parametrix::{CertifySettings, CutoffFamily, ParametrixLayout, RegionCertificate};
pub use weight::WeightFunction;
pub use weighted_operator::{FullNorm, NormSample, NormScan, ScanPoint, ScanSettings};
