//! Closed-form line and via parameters.

use super::CircuitError;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Meters per inch.
pub const INCH: f64 = 0.0254;
/// Meters per mil.
pub const MIL: f64 = 2.54e-5;

/// Inputs of the lumped L/C derivation for one line segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlineDerivation {
    pub z0: f64,
    pub eps_r: f64,
    /// Segment length in meters.
    pub length: f64,
}

impl TlineDerivation {
    pub fn lumped(&self) -> Result<(f64, f64), CircuitError> {
        tline_lc_from_zo(self.z0, self.eps_r, self.length)
    }
}

/// Total series inductance and shunt capacitance of a segment of a line with
/// characteristic impedance `z0` in a dielectric `eps_r`:
/// `C = sqrt(eps_r) / (z0 c) * length`, `L = z0^2 C`.
pub fn tline_lc_from_zo(z0: f64, eps_r: f64, length: f64) -> Result<(f64, f64), CircuitError> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(CircuitError::Domain(alloc::format!(
            "z0 must be positive, got {z0}"
        )));
    }
    if !(eps_r >= 1.0 && eps_r.is_finite()) {
        return Err(CircuitError::Domain(alloc::format!(
            "eps_r must be at least 1, got {eps_r}"
        )));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(CircuitError::Domain(alloc::format!(
            "length must be positive, got {length}"
        )));
    }
    let c_total = libm::sqrt(eps_r) / (z0 * SPEED_OF_LIGHT) * length;
    Ok((z0 * z0 * c_total, c_total))
}

/// Partial self-inductance (H) of a cylindrical via of `length` and
/// `diameter` (both meters): `L[nH] = 5.08 h (ln(4h/d) - 0.75)` with `h`,
/// `d` in inches.
pub fn via_inductance(length: f64, diameter: f64) -> Result<f64, CircuitError> {
    if !(length > 0.0 && diameter > 0.0 && length.is_finite() && diameter.is_finite()) {
        return Err(CircuitError::Domain(
            "via length and diameter must be positive".into(),
        ));
    }
    if diameter >= 4.0 * length {
        return Err(CircuitError::Domain(alloc::format!(
            "via diameter {diameter} m is not below four times its length {length} m"
        )));
    }
    let h = length / INCH;
    let d = diameter / INCH;
    let nh = 5.08 * h * (libm::log(4.0 * h / d) - 0.75);
    if nh <= 0.0 {
        return Err(CircuitError::Domain(alloc::format!(
            "via {h:.4} in x {d:.4} in is too stubby for the thin-wire formula"
        )));
    }
    Ok(nh * 1e-9)
}
