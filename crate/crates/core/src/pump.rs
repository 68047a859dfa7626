//! Quadratic LVAD pump characteristic `dP = K_A w² + K_B w PF + K_C PF²`
//! with `w` in rpm, `PF` in l/min and `dP` in mmHg.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpModel {
    pub k_a: f64,
    pub k_b: f64,
    pub k_c: f64,
}

/// Coefficients for the HeartMate 3 centrifugal pump.
pub const HEARTMATE3: PumpModel = PumpModel {
    k_a: 3.45e-6,
    k_b: -5.9e-5,
    k_c: -1.45,
};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PumpCurvePoint {
    #[serde(rename = "omega_rpm")]
    pub omega: f64,
    #[serde(rename = "pf_lpm")]
    pub pf: f64,
    #[serde(rename = "dp_mmHg")]
    pub delta_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpFit {
    pub model: PumpModel,
    /// Root-mean-square residual of the fit [mmHg].
    pub rms: f64,
}

impl PumpModel {
    pub fn new(k_a: f64, k_b: f64, k_c: f64) -> Result<Self> {
        if !(k_a.is_finite() && k_b.is_finite() && k_c.is_finite()) || k_a <= 0.0 {
            return Err(Error::invalid(format!(
                "pump coefficients must be finite with K_A > 0, got ({k_a}, {k_b}, {k_c})"
            )));
        }
        Ok(PumpModel { k_a, k_b, k_c })
    }

    pub fn delta_p(&self, omega: f64, pf: f64) -> f64 {
        self.k_a * omega * omega + self.k_b * omega * pf + self.k_c * pf * pf
    }

    /// d(dP)/d(PF) at fixed speed.
    pub fn slope_pf(&self, omega: f64, pf: f64) -> f64 {
        self.k_b * omega + 2.0 * self.k_c * pf
    }

    /// Pump speed delivering `pf` against the head `delta_p`: the positive
    /// root of the characteristic read as a quadratic in `w`.
    pub fn speed_for(&self, pf: f64, delta_p: f64) -> Result<f64> {
        let a = self.k_a;
        let b = self.k_b * pf;
        let c = self.k_c * pf * pf - delta_p;
        let disc = b * b - 4.0 * a * c;
        if !(disc >= 0.0) || a <= 0.0 {
            return Err(Error::NoSolution(format!(
                "no pump speed gives {delta_p} mmHg at {pf} l/min (discriminant {disc:.3e})"
            )));
        }
        let sq = disc.sqrt();
        // stable form of the larger root
        let q = -0.5 * (b + b.signum() * sq);
        let r1 = q / a;
        let r2 = if q != 0.0 { c / q } else { r1 };
        let root = r1.max(r2);
        if root > 0.0 {
            Ok(root)
        } else {
            Err(Error::NoSolution(format!(
                "no positive pump speed gives {delta_p} mmHg at {pf} l/min"
            )))
        }
    }

    /// Three-row coefficient table (name, value, unit).
    pub fn coefficients_csv(&self) -> String {
        format!(
            "coefficient,value,unit\nK_A,{:e},mmHg/rpm^2\nK_B,{:e},mmHg/(rpm*l/min)\nK_C,{:e},mmHg/(l/min)^2\n",
            self.k_a, self.k_b, self.k_c
        )
    }
}

/// Ordinary least squares over the basis `(w², w PF, PF²)`.
pub fn fit_pump_coefficients(points: &[PumpCurvePoint]) -> Result<PumpFit> {
    if points.len() < 3 {
        return Err(Error::FitFailure(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !(p.omega >= 0.0 && p.pf >= 0.0 && p.delta_p.is_finite()))
    {
        return Err(Error::invalid(
            "pump curve points need omega >= 0 and PF >= 0",
        ));
    }
    let n = points.len();
    let mut a = DMatrix::<f64>::zeros(n, 3);
    let mut y = DVector::<f64>::zeros(n);
    for (i, p) in points.iter().enumerate() {
        a[(i, 0)] = p.omega * p.omega;
        a[(i, 1)] = p.omega * p.pf;
        a[(i, 2)] = p.pf * p.pf;
        y[i] = p.delta_p;
    }
    let scale: Vec<f64> = (0..3).map(|j| a.column(j).norm()).collect();
    if scale.iter().any(|&s| s == 0.0) {
        return Err(Error::FitFailure("design matrix has a zero column".into()));
    }
    for j in 0..3 {
        a.column_mut(j).scale_mut(1.0 / scale[j]);
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 1e-10 * smax {
        return Err(Error::FitFailure(format!(
            "design matrix is rank deficient (condition {:.3e})",
            smax / smin
        )));
    }
    let x = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let model = PumpModel {
        k_a: x[0] / scale[0],
        k_b: x[1] / scale[1],
        k_c: x[2] / scale[2],
    };
    let rms = (points
        .iter()
        .map(|p| (model.delta_p(p.omega, p.pf) - p.delta_p).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(PumpFit { model, rms })
}

pub fn read_pump_curve<R: Read>(reader: R) -> Result<Vec<PumpCurvePoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<PumpCurvePoint>().enumerate() {
        out.push(
            rec.map_err(|e| Error::schema(format!("pump curve row {}", i + 1), e.to_string()))?,
        );
    }
    Ok(out)
}

pub fn read_pump_curve_file(path: &Path) -> Result<Vec<PumpCurvePoint>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_pump_curve(f)
}

pub fn write_pump_curve<W: Write>(writer: W, points: &[PumpCurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)
            .map_err(|e| Error::schema("pump curve", e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<pump curve>", e))?;
    Ok(())
}

/// Sample points along six speed lines of the pump chart, 3000 to 8000 rpm,
/// truncated where the head reaches zero.
pub fn sample_curve_points(model: &PumpModel) -> Vec<PumpCurvePoint> {
    let mut pts = Vec::new();
    for k in 0..6 {
        let omega = 3000.0 + 1000.0 * k as f64;
        for j in 0..=10 {
            let pf = j as f64;
            let dp = model.delta_p(omega, pf);
            if dp < 0.0 {
                break;
            }
            pts.push(PumpCurvePoint {
                omega,
                pf,
                delta_p: dp,
            });
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state() {
        assert_eq!(HEARTMATE3.delta_p(0.0, 0.0), 0.0);
    }

    #[test]
    fn speed_round_trip() {
        for &(pf, dp) in &[(3.0, 75.0), (4.1, 75.0), (5.0, 93.3), (0.0, 40.0)] {
            let w = HEARTMATE3.speed_for(pf, dp).unwrap();
            assert!((HEARTMATE3.delta_p(w, pf) - dp).abs() <= 1e-9 * dp);
        }
    }

    #[test]
    fn no_positive_speed() {
        let m = PumpModel::new(1.0, 0.0, 0.0).unwrap();
        assert!(matches!(m.speed_for(1.0, -5.0), Err(Error::NoSolution(_))));
        assert!(matches!(
            HEARTMATE3.speed_for(10.0, -1e6),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn coefficient_validation() {
        assert!(PumpModel::new(-1.0, 0.0, 0.0).is_err());
        assert!(PumpModel::new(1.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn exact_fit_and_rank_deficiency() {
        let pts = sample_curve_points(&HEARTMATE3);
        let fit = fit_pump_coefficients(&pts).unwrap();
        let m = fit.model;
        assert!((m.k_a - HEARTMATE3.k_a).abs() <= 1e-8 * HEARTMATE3.k_a.abs());
        assert!((m.k_b - HEARTMATE3.k_b).abs() <= 1e-8 * HEARTMATE3.k_b.abs());
        assert!((m.k_c - HEARTMATE3.k_c).abs() <= 1e-8 * HEARTMATE3.k_c.abs());
        assert!(fit.rms < 1e-9);

        let same = vec![
            PumpCurvePoint {
                omega: 5000.0,
                pf: 4.0,
                delta_p: 60.0
            };
            3
        ];
        assert!(matches!(
            fit_pump_coefficients(&same),
            Err(Error::FitFailure(_))
        ));
        assert!(matches!(
            fit_pump_coefficients(&pts[..2]),
            Err(Error::FitFailure(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let pts = sample_curve_points(&HEARTMATE3);
        let mut buf = Vec::new();
        write_pump_curve(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("omega_rpm,pf_lpm,dp_mmHg"));
        assert_eq!(read_pump_curve(&buf[..]).unwrap(), pts);
        assert!(read_pump_curve("omega_rpm,pf_lpm\n1,2\n".as_bytes()).is_err());
    }
}
