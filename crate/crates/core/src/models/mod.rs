//! Concrete systems: the point detector on a line, the fuzzy clock, and
//! seeded random models used by the checks.

pub mod builtin;
pub mod clock;
pub mod detector;
pub mod testbed;

pub use builtin::{resolve_builtin, BuiltinKind, BuiltinParams, ModelBundle};
pub use clock::{build_clock_model, ClockBoundary, ClockSpec};
pub use detector::{build_detector_model, detection_prob_closed_form, exact_propagate, DetectorSpec, Grid};
