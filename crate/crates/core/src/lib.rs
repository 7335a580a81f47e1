//! Exact measures, criterion series and Monte-Carlo experiments for
//! multiplicative coprime Diophantine approximation.
//!
//! The numerical kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar for the common cases.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod lab;
pub mod measures;
pub mod overlap;
pub mod psi;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type IntervalUnionF64 = geometry::IntervalUnion<f64>;
pub type IntervalUnionF32 = geometry::IntervalUnion<f32>;
pub type PiecewiseCurveF64 = geometry::PiecewiseCurve<f64>;
pub type PiecewiseCurveF32 = geometry::PiecewiseCurve<f32>;
pub type MeasureResultF64 = measures::MeasureResult<f64>;
pub type MeasureResultF32 = measures::MeasureResult<f32>;
pub type BumpFamilyF64 = overlap::BumpFamily<f64>;
pub type BumpFamilyF32 = overlap::BumpFamily<f32>;
pub type StepSandwichF64 = overlap::StepSandwich<f64>;
pub type StepSandwichF32 = overlap::StepSandwich<f32>;
pub type PairStatsF64 = overlap::PairStats<f64>;
pub type PairStatsF32 = overlap::PairStats<f32>;
