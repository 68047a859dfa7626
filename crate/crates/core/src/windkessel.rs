//! Three-element (RCR) Windkessel outlets and their estimation from
//! catheterisation and echocardiography data.
//!
//! ```text
//!   C dp_p/dt + (p_p - p_d) / R_d = Q
//!   p - p_p = R_p Q
//! ```
//!
//! Estimation works in clinical CGS units (dyn·s/cm⁵, cm⁵/dyn, mmHg, l/min);
//! [`SiWindkessel`] carries the same circuit in SI for the flow solver.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::units::{
    CGS_COMPLIANCE_TO_SI, CGS_RESISTANCE_TO_SI, DYN_PER_CM2_TO_PA, LPM_TO_CM3_PER_S,
    MMHG_TO_DYN_PER_CM2,
};

/// Fraction of each outlet's total resistance assigned to `R_p`.
pub const PROXIMAL_FRACTION: f64 = 0.056;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Configuration {
    Pre,
    Post,
}

/// Haemodynamic measurements of one clinical test. Pressures in mmHg, flows
/// in l/min, stroke volume in ml, pump speed in rpm.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClinicalRecord {
    pub configuration: Configuration,
    #[serde(default)]
    pub pas: Option<f64>,
    #[serde(default)]
    pub pad: Option<f64>,
    pub pam: f64,
    #[serde(default)]
    pub co: Option<f64>,
    #[serde(default)]
    pub sv: Option<f64>,
    #[serde(default)]
    pub pf: Option<f64>,
    #[serde(default)]
    pub omega: Option<f64>,
}

impl ClinicalRecord {
    pub fn pre(pas: f64, pad: f64, pam: f64, co: f64, sv: f64) -> Self {
        ClinicalRecord {
            configuration: Configuration::Pre,
            pas: Some(pas),
            pad: Some(pad),
            pam,
            co: Some(co),
            sv: Some(sv),
            pf: None,
            omega: None,
        }
    }

    pub fn post(pf: f64, omega: f64, pam: f64) -> Self {
        ClinicalRecord {
            configuration: Configuration::Post,
            pas: None,
            pad: None,
            pam,
            co: None,
            sv: None,
            pf: Some(pf),
            omega: Some(omega),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            ("PAS", self.pas),
            ("PAD", self.pad),
            ("PAM", Some(self.pam)),
            ("CO", self.co),
            ("SV", self.sv),
            ("PF", self.pf),
            ("omega", self.omega),
        ];
        for (name, v) in values {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let (Some(pas), Some(pad)) = (self.pas, self.pad) {
            if !(pad <= self.pam && self.pam <= pas) {
                return Err(Error::invalid(format!(
                    "expected PAD <= PAM <= PAS, got {pad} / {} / {pas}",
                    self.pam
                )));
            }
        }
        match self.configuration {
            Configuration::Pre if self.co.is_none() || self.sv.is_none() => {
                Err(Error::invalid("pre-surgery record requires CO and SV"))
            }
            Configuration::Post if self.pf.is_none() => {
                Err(Error::invalid("post-surgery record requires PF"))
            }
            _ => Ok(()),
        }
    }

    /// Mean systemic flow: CO before surgery, PF after (l/min).
    pub fn mean_flow(&self) -> Result<f64> {
        let q = match self.configuration {
            Configuration::Pre => self.co,
            Configuration::Post => self.pf,
        };
        q.ok_or_else(|| Error::invalid("record lacks the mean flow for its configuration"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutletGeometry {
    pub name: String,
    /// Cross-sectional area in cm².
    pub area: f64,
}

impl OutletGeometry {
    pub fn new(name: &str, area: f64) -> Self {
        OutletGeometry {
            name: name.to_string(),
            area,
        }
    }
}

/// One RCR step of the implicit Euler scheme: returns `(p_p^{n+1}, p^{n+1})`.
fn rcr_update(rp: f64, rd: f64, c: f64, p_p: f64, q: f64, dt: f64) -> (f64, f64) {
    let p_next = (c / dt * p_p + q) / (c / dt + 1.0 / rd);
    (p_next, p_next + rp * q)
}

/// RCR outlet in CGS units: resistances in dyn·s/cm⁵, compliance in
/// cm⁵/dyn, pressures in dyn/cm², flow in cm³/s. Distal pressure is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WindkesselOutlet {
    pub name: String,
    pub rp: f64,
    pub rd: f64,
    pub c: f64,
    pub p_proximal: f64,
    pub pressure: f64,
}

impl WindkesselOutlet {
    pub fn new(name: &str, rp: f64, rd: f64, c: f64, p_proximal: f64) -> Result<Self> {
        for (n, v) in [("R_p", rp), ("R_d", rd), ("C", c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{n} must be positive, got {v}")));
            }
        }
        Ok(WindkesselOutlet {
            name: name.to_string(),
            rp,
            rd,
            c,
            p_proximal,
            pressure: p_proximal,
        })
    }

    pub fn p_proximal_mmhg(&self) -> f64 {
        self.p_proximal / MMHG_TO_DYN_PER_CM2
    }

    pub fn pressure_mmhg(&self) -> f64 {
        self.pressure / MMHG_TO_DYN_PER_CM2
    }

    /// Advances the outlet by `dt` seconds under inflow `q` (cm³/s) and
    /// returns the new outlet pressure (dyn/cm²).
    pub fn advance(&mut self, q: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let (pp, p) = rcr_update(self.rp, self.rd, self.c, self.p_proximal, q, dt);
        self.p_proximal = pp;
        self.pressure = p;
        Ok(p)
    }

    pub fn time_constant(&self) -> f64 {
        self.rd * self.c
    }

    pub fn to_si(&self) -> SiWindkessel {
        SiWindkessel {
            name: self.name.clone(),
            rp: self.rp * CGS_RESISTANCE_TO_SI,
            rd: self.rd * CGS_RESISTANCE_TO_SI,
            c: self.c * CGS_COMPLIANCE_TO_SI,
            p_proximal: self.p_proximal * DYN_PER_CM2_TO_PA,
            pressure: self.pressure * DYN_PER_CM2_TO_PA,
        }
    }
}

/// RCR outlet in SI units (Pa·s/m³, m³/Pa, Pa, m³/s) as coupled to the solver.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SiWindkessel {
    pub name: String,
    pub rp: f64,
    pub rd: f64,
    pub c: f64,
    pub p_proximal: f64,
    pub pressure: f64,
}

impl SiWindkessel {
    pub fn new(name: &str, rp: f64, rd: f64, c: f64, p_proximal: f64) -> Result<Self> {
        let cgs = WindkesselOutlet::new(name, rp, rd, c, p_proximal)?;
        Ok(SiWindkessel {
            name: cgs.name,
            rp,
            rd,
            c,
            p_proximal,
            pressure: p_proximal,
        })
    }

    pub fn advance(&mut self, q: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let (pp, p) = rcr_update(self.rp, self.rd, self.c, self.p_proximal, q, dt);
        self.p_proximal = pp;
        self.pressure = p;
        Ok(p)
    }

    /// Puts the circuit at its steady state for a constant flow `q`.
    pub fn set_equilibrium(&mut self, q: f64) {
        self.p_proximal = self.rd * q;
        self.pressure = (self.rp + self.rd) * q;
    }

    pub fn time_constant(&self) -> f64 {
        self.rd * self.c
    }

    pub fn to_cgs(&self) -> WindkesselOutlet {
        WindkesselOutlet {
            name: self.name.clone(),
            rp: self.rp / CGS_RESISTANCE_TO_SI,
            rd: self.rd / CGS_RESISTANCE_TO_SI,
            c: self.c / CGS_COMPLIANCE_TO_SI,
            p_proximal: self.p_proximal / DYN_PER_CM2_TO_PA,
            pressure: self.pressure / DYN_PER_CM2_TO_PA,
        }
    }
}

/// Cardiac period `T = SV / CO` in seconds (SV in ml, CO in l/min).
pub fn cardiac_period(sv: f64, co: f64) -> Result<f64> {
    if !(sv > 0.0 && co > 0.0) {
        return Err(Error::invalid(format!(
            "SV and CO must be positive, got {sv}, {co}"
        )));
    }
    Ok(sv / (co * LPM_TO_CM3_PER_S))
}

/// Systemic vascular resistance `PAM / CO` (pre) or `PAM / PF` (post) in dyn·s/cm⁵.
pub fn systemic_resistance(record: &ClinicalRecord) -> Result<f64> {
    record.validate()?;
    let q = record.mean_flow()?;
    Ok(record.pam * MMHG_TO_DYN_PER_CM2 / (q * LPM_TO_CM3_PER_S))
}

/// Total arterial compliance `SV / (PAS - PAD)` in cm⁵/dyn.
pub fn total_compliance(pas: f64, pad: f64, sv: f64) -> Result<f64> {
    if !(pas > pad) {
        return Err(Error::invalid(format!(
            "PAS ({pas}) must exceed PAD ({pad})"
        )));
    }
    if !(sv > 0.0) {
        return Err(Error::invalid(format!("SV must be positive, got {sv}")));
    }
    Ok(sv / ((pas - pad) * MMHG_TO_DYN_PER_CM2))
}

/// Splits the systemic resistance and total compliance over parallel outlets
/// in proportion to their areas. Proximal pressures start at the record's PAM.
pub fn estimate_outlet_set(
    record: &ClinicalRecord,
    outlets: &[OutletGeometry],
    total_c: f64,
) -> Result<Vec<WindkesselOutlet>> {
    if outlets.is_empty() {
        return Err(Error::invalid("at least one outlet is required"));
    }
    if let Some(o) = outlets.iter().find(|o| !(o.area > 0.0)) {
        return Err(Error::invalid(format!(
            "outlet '{}' has non-positive area",
            o.name
        )));
    }
    if !(total_c > 0.0) {
        return Err(Error::invalid(format!(
            "total compliance must be positive, got {total_c}"
        )));
    }
    let rvs = systemic_resistance(record)?;
    let sum_a: f64 = outlets.iter().map(|o| o.area).sum();
    let p0 = record.pam * MMHG_TO_DYN_PER_CM2;
    outlets
        .iter()
        .map(|o| {
            let r = rvs * sum_a / o.area;
            let rp = PROXIMAL_FRACTION * r;
            WindkesselOutlet::new(&o.name, rp, r - rp, total_c * o.area / sum_a, p0)
        })
        .collect()
}

/// Published measurements and reference results used by `validate`.
pub mod data {
    use super::{ClinicalRecord, OutletGeometry};

    pub fn pre_surgery() -> ClinicalRecord {
        ClinicalRecord::pre(108.0, 66.0, 78.0, 5.63, 55.0)
    }

    pub fn post_surgery_tests() -> [ClinicalRecord; 4] {
        [
            ClinicalRecord::post(4.1, 5400.0, 78.0),
            ClinicalRecord::post(4.2, 5600.0, 90.0),
            ClinicalRecord::post(4.5, 6000.0, 100.0),
            ClinicalRecord::post(5.0, 5600.0, 83.0),
        ]
    }

    /// Inflow section areas (cm²) before and after surgery.
    pub const ASCENDING_AORTA_AREA: f64 = 6.42;
    pub const OUTFLOW_CANNULA_AREA: f64 = 1.3;

    pub fn outlets() -> Vec<OutletGeometry> {
        vec![
            OutletGeometry::new("right_subclavian", 0.156),
            OutletGeometry::new("right_common_carotid", 0.246),
            OutletGeometry::new("left_common_carotid", 0.168),
            OutletGeometry::new("left_subclavian", 0.446),
            OutletGeometry::new("descending_aorta", 3.68),
        ]
    }

    /// Tabulated T [s], RVS [dyn·s/cm⁵] and C [cm⁵/dyn] of the pre-surgery case.
    pub const PRE_PERIOD: f64 = 0.586;
    pub const PRE_RVS: f64 = 1105.0;
    pub const PRE_COMPLIANCE: f64 = 9.85e-4;
    /// Tabulated post-surgery RVS for tests 1-4.
    pub const POST_RVS: [f64; 4] = [1522.0, 1714.0, 1778.0, 1328.0];

    /// Tabulated (R_p, R_d, C) per outlet, in the order of [`outlets`].
    pub const PRE_COEFFICIENTS: [(f64, f64, f64); 5] = [
        (1.84e3, 3.11e4, 3.26e-5),
        (1.23e3, 2.07e4, 5.16e-5),
        (1.78e3, 3.01e4, 3.52e-5),
        (7.09e2, 1.19e4, 9.35e-5),
        (7.8e1, 1.31e3, 7.72e-4),
    ];

    /// Tabulated (R_p, R_d) per post-surgery test and outlet.
    pub const POST_COEFFICIENTS: [[(f64, f64); 5]; 4] = [
        [
            (2.56e3, 4.32e4),
            (1.63e3, 2.74e4),
            (2.38e3, 4e4),
            (8.96e2, 1.51e4),
            (1.08e2, 1.83e3),
        ],
        [
            (2.88e3, 4.86e4),
            (1.83e3, 3.08e4),
            (2.68e3, 4.51e4),
            (1.01e3, 1.7e4),
            (1.22e2, 2.06e3),
        ],
        [
            (2.99e3, 5.05e4),
            (1.9e3, 3.2e4),
            (2.78e3, 4.68e4),
            (1.04e3, 1.76e4),
            (1.27e2, 2.14e3),
        ],
        [
            (2.19e3, 3.68e4),
            (1.39e3, 2.33e4),
            (2.03e3, 3.42e4),
            (7.64e2, 1.29e4),
            (9.25e1, 1.56e3),
        ],
    ];
}

/// Reads an outlet-area table with header `name,area_cm2`.
pub fn read_outlet_areas<R: Read>(reader: R) -> Result<Vec<OutletGeometry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::schema("outlet table", e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["name", "area_cm2"] {
        return Err(Error::schema(
            "outlet table",
            "header must be 'name,area_cm2'",
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::schema("outlet table", e.to_string()))?;
        let area: f64 = rec[1].parse().map_err(|_| {
            Error::schema(
                "outlet table",
                format!("row {}: bad area '{}'", i + 1, &rec[1]),
            )
        })?;
        if !(area > 0.0) {
            return Err(Error::schema(
                "outlet table",
                format!("row {}: area must be positive", i + 1),
            ));
        }
        out.push(OutletGeometry::new(&rec[0], area));
    }
    Ok(out)
}

pub fn read_outlet_areas_file(path: &Path) -> Result<Vec<OutletGeometry>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_outlet_areas(f)
}

/// Coefficient table `name,R_p,R_d,C` in dyn·s/cm⁵ and cm⁵/dyn.
pub fn coefficients_csv(outlets: &[WindkesselOutlet]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record([
        "name",
        "R_p [dyne*s/cm^5]",
        "R_d [dyne*s/cm^5]",
        "C [cm^5/dyne]",
    ]);
    for o in outlets {
        let _ = w.write_record([
            o.name.clone(),
            format!("{:.6e}", o.rp),
            format!("{:.6e}", o.rd),
            format!("{:.6e}", o.c),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn period_examples() {
        assert!((cardiac_period(55.0, 5.63).unwrap() - 0.586).abs() < 5e-4);
        assert!((cardiac_period(60.0, 6.0).unwrap() - 0.6).abs() < 1e-12);
        assert!(cardiac_period(55.0, 0.0).is_err());
    }

    #[test]
    fn compliance_examples() {
        assert!(rel(total_compliance(108.0, 66.0, 55.0).unwrap(), 9.85e-4) < 0.005);
        let expected = 40.0 / (40.0 * 1333.22);
        assert!(rel(total_compliance(100.0, 60.0, 40.0).unwrap(), expected) < 1e-12);
        assert!(total_compliance(66.0, 66.0, 55.0).is_err());
    }

    #[test]
    fn resistance_requires_fields() {
        let mut r = data::pre_surgery();
        r.co = None;
        assert!(systemic_resistance(&r).is_err());
        let mut p = ClinicalRecord::post(4.1, 5400.0, 78.0);
        p.pf = None;
        assert!(systemic_resistance(&p).is_err());
    }

    #[test]
    fn single_outlet_takes_everything() {
        let rec = data::post_surgery_tests()[0].clone();
        let set = estimate_outlet_set(&rec, &[OutletGeometry::new("only", 2.0)], 1e-3).unwrap();
        let rvs = systemic_resistance(&rec).unwrap();
        assert_eq!(set[0].rp + set[0].rd, rvs);
        assert_eq!(set[0].c, 1e-3);
    }

    #[test]
    fn estimator_recombines_in_parallel() {
        let rec = data::pre_surgery();
        let c = total_compliance(108.0, 66.0, 55.0).unwrap();
        let set = estimate_outlet_set(&rec, &data::outlets(), c).unwrap();
        let rvs = systemic_resistance(&rec).unwrap();
        let inv: f64 = set.iter().map(|o| 1.0 / (o.rp + o.rd)).sum();
        assert!(rel(inv, 1.0 / rvs) < 1e-10);
        assert!(rel(set.iter().map(|o| o.c).sum::<f64>(), c) < 1e-10);
        for o in &set {
            assert!((o.rp / (o.rp + o.rd) - PROXIMAL_FRACTION).abs() < 1e-6);
            assert!((o.p_proximal_mmhg() - 78.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_flow_decay_matches_closed_form() {
        let mut o = WindkesselOutlet::new("o", 100.0, 1000.0, 1e-3, 5.0).unwrap();
        let dt = 0.01;
        for n in 1..=50 {
            o.advance(0.0, dt).unwrap();
            let expected = 5.0 * (1.0 + dt / (1000.0 * 1e-3)).powi(-n);
            assert!(rel(o.p_proximal, expected) < 1e-12);
        }
    }

    #[test]
    fn constant_flow_reaches_fixed_point() {
        let mut o = WindkesselOutlet::new("o", 100.0, 1000.0, 1e-3, 0.0).unwrap();
        let dt = 0.01;
        let q = 50.0;
        let steps = (10.0 * o.time_constant() / dt) as usize;
        let mut last = 0.0;
        for _ in 0..steps {
            let pp = o.p_proximal;
            o.advance(q, dt).unwrap();
            assert!(o.p_proximal >= pp);
            last = o.pressure;
        }
        assert!(rel(last, 1100.0 * q) < 1e-3);
    }

    #[test]
    fn small_step_matches_ode_slope() {
        let (rp, rd, c, p0, q) = (100.0, 1000.0, 1e-3, 2000.0, 30.0);
        let mut o = WindkesselOutlet::new("o", rp, rd, c, p0).unwrap();
        let dt = 1e-6;
        o.advance(q, dt).unwrap();
        let slope = (q - p0 / rd) / c;
        assert!(rel((o.p_proximal - p0) / dt, slope) < 1e-4);
    }

    #[test]
    fn si_round_trip_is_lossless() {
        let o = WindkesselOutlet::new("o", 2.56e3, 4.32e4, 3.27e-5, 1e5).unwrap();
        let back = o.to_si().to_cgs();
        for (a, b) in [
            (o.rp, back.rp),
            (o.rd, back.rd),
            (o.c, back.c),
            (o.p_proximal, back.p_proximal),
        ] {
            assert!(rel(a, b) < 1e-12);
        }
        assert!(rel(o.to_si().rp, 2.56e8) < 1e-12);
    }

    #[test]
    fn outlet_table_parsing() {
        let text = "name,area_cm2\nright_subclavian,0.156\ndescending_aorta,3.68\n";
        let o = read_outlet_areas(text.as_bytes()).unwrap();
        assert_eq!(o.len(), 2);
        assert_eq!(o[1].area, 3.68);
        assert!(read_outlet_areas("name,area\nx,1\n".as_bytes()).is_err());
        assert!(read_outlet_areas("name,area_cm2\nx,-1\n".as_bytes()).is_err());
        let csv = coefficients_csv(&estimate_outlet_set(&data::pre_surgery(), &o, 1e-3).unwrap());
        assert_eq!(csv.lines().count(), 3);
    }
}
