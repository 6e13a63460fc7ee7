//! Float functions routed through `libm` so results do not depend on
//! whether `std` happens to be linked.

pub use libm::{atan2, cos, exp, hypot, log as ln, pow, sin, sqrt};

pub const PI: f64 = core::f64::consts::PI;
