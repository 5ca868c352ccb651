//! State-vector and density-matrix simulation of two-mode cavity QED:
//! Bell-state generation with a V-type three-level atom and CNOT, Hadamard
//! and swap gates driven by a two-level atom.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod metrics;
pub mod noise;
pub mod protocols;
pub mod schedule;

pub use dynamics::{CavityMode, CouplingParams, OperatorMatrix, Propagator};
pub use error::{Error, Result};
pub use hilbert::{make_space, DensityMatrix, FieldState, SpaceDescriptor, StateVector, Subsystem};
pub use noise::DampingParams;
pub use schedule::{run_schedule, Level, PulseSegment, Schedule, Units};

/// Formats `x` with 15 significant digits in the shortest of fixed or
/// exponent notation, like C's `%.15g`.
pub fn format_sig15(x: f64) -> String {
    const DIGITS: i32 = 15;
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::format_sig15;

    #[test]
    fn sig15_matches_printf() {
        assert_eq!(format_sig15(1.0), "1");
        assert_eq!(format_sig15(0.5), "0.5");
        assert_eq!(format_sig15(std::f64::consts::PI), "3.14159265358979");
        assert_eq!(format_sig15(1e-5), "1e-05");
        assert_eq!(format_sig15(123456789012345678.0), "1.23456789012346e+17");
        assert_eq!(format_sig15(-0.000123), "-0.000123");
        assert_eq!(format_sig15(0.0), "0");
        assert_eq!(format_sig15(0.1 + 0.2), "0.3");
    }
}
