//! Conversion factors between clinical, CGS and SI units.

/// Pa per mmHg.
pub const MMHG_TO_PA: f64 = 133.322;
/// dyn/cm² per mmHg.
pub const MMHG_TO_DYN_PER_CM2: f64 = 1333.22;
/// Pa per dyn/cm².
pub const DYN_PER_CM2_TO_PA: f64 = 0.1;
/// m³/s per l/min.
pub const LPM_TO_M3_PER_S: f64 = 1.0 / 60_000.0;
/// cm³/s per l/min.
pub const LPM_TO_CM3_PER_S: f64 = 1000.0 / 60.0;
/// Pa·s/m³ per dyn·s/cm⁵.
pub const CGS_RESISTANCE_TO_SI: f64 = 1e5;
/// m³/Pa per cm⁵/dyn.
pub const CGS_COMPLIANCE_TO_SI: f64 = 1e-5;
/// m³/s per cm³/s.
pub const CM3_PER_S_TO_M3_PER_S: f64 = 1e-6;
/// m² per cm².
pub const CM2_TO_M2: f64 = 1e-4;

pub fn mmhg_to_pa(p: f64) -> f64 {
    p * MMHG_TO_PA
}

pub fn pa_to_mmhg(p: f64) -> f64 {
    p / MMHG_TO_PA
}

pub fn lpm_to_m3s(q: f64) -> f64 {
    q * LPM_TO_M3_PER_S
}

pub fn m3s_to_lpm(q: f64) -> f64 {
    q / LPM_TO_M3_PER_S
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cgs_and_si_pressure_factors_agree() {
        assert!((MMHG_TO_DYN_PER_CM2 * DYN_PER_CM2_TO_PA - MMHG_TO_PA).abs() < 1e-12);
        assert!((LPM_TO_CM3_PER_S * CM3_PER_S_TO_M3_PER_S - LPM_TO_M3_PER_S).abs() < 1e-18);
        // R·C is a time in both systems
        assert!((CGS_RESISTANCE_TO_SI * CGS_COMPLIANCE_TO_SI - 1.0).abs() < 1e-15);
    }
}
