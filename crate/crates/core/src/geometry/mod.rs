//! Coprime residue layers, the coprime distance `‖qx‖′`, its sublevel-set
//! measure, a closed-form piecewise curve integrator, and interval unions on
//! the circle.

mod curve;
mod interval;
mod layer;

pub use curve::{integrate_min_const_recip, Piece, PieceForm, PiecewiseCurve};
pub use interval::{
    interval_union_around_coprime, interval_union_for_layer, union_intersection_measure,
    ArcUnion, IntervalUnion,
};
pub use layer::{
    coprime_distance, coprime_distance_exact, is_coprime, nearest_int_distance,
    sublevel_measure, CoprimeLayer, GapHistogram,
};
