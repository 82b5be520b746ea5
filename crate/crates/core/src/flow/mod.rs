//! Torus windings, spectral measures and correlation models.

mod correlation;
mod spectral;
mod winding;

pub use correlation::{evaluate_correlation, CorrelationModel, Spike, SpikeProfile};
pub use spectral::{
    correlation_from_spectrum, spectrum_of_observable, AcPart, Atom, FourierSeries, FourierTerm, SpectralModel,
    SPECTRAL_TOL,
};
pub(crate) use winding::arc_kinks;
pub use winding::{
    arc_correlation, arc_overlap, box_overlap, Arithmetic, BoxSet, RigidityTime, TorusWinding, MAX_DENOMINATOR,
};

use crate::error::Result;

/// `x + tα mod 1`.
pub fn evaluate_flow(flow: &TorusWinding, x: &[f64], t: f64) -> Result<Vec<f64>> {
    flow.validate()?;
    if x.len() != flow.dimension() {
        return Err(crate::error::Error::Invalid("point dimension differs from the flow dimension".into()));
    }
    Ok(flow.evaluate(x, t))
}
