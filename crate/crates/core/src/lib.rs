pub mod cone;
pub mod lyapunov;
pub mod map;
pub mod orbit;
pub mod params;
pub mod periodic;
pub mod report;
pub mod sampling;
pub mod suites;

pub use cone::{Cone, LrvClass};
pub use lyapunov::{ExponentEstimate, NonuniformityProfile, Thresholds};
pub use map::{HorseshoeMap, Jacobian, MapError, Point, RegionId};
pub use orbit::{ExcursionRecord, ReturnRecord};
pub use params::{MapParams, Orientation};
pub use periodic::{Census, Itinerary, PeriodicOrbit};
pub use report::{Certificate, RunConfig};
pub use suites::{Suite, SuiteOutcome, Verdict};
