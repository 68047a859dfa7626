//! Validation tables, energy curves and timing reports.

use std::fmt::{self, Write as _};

use super::run::fmt_f64;
use crate::error::Result;
use crate::fv::FluidProperties;
use crate::indicators::reynolds_inlet;
use crate::podi::{cumulative_energy, RomModel};
use crate::pump::HEARTMATE3;
use crate::units::lpm_to_m3s;
use crate::windkessel::{
    cardiac_period, data, estimate_outlet_set, systemic_resistance, total_compliance,
};

/// Published pump heads [mmHg] for the four post-surgery tests.
pub const POST_DELTA_P: [f64; 4] = [75.0, 81.3, 93.3, 70.4];
/// Published post-surgery inlet Reynolds numbers.
pub const POST_REYNOLDS: [f64; 4] = [1818.0, 1862.0, 1995.0, 2217.0];
/// Pump speeds bounding the sweep at ΔP = 75 mmHg.
pub const SWEEP_SPEEDS: [(f64, f64); 2] = [(3.0, 5076.0), (5.0, 5720.0)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub table: &'static str,
    pub quantity: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: Tolerance,
}

impl ValidationRow {
    fn new(
        table: &'static str,
        quantity: impl Into<String>,
        expected: f64,
        computed: f64,
        tolerance: Tolerance,
    ) -> Self {
        ValidationRow {
            table,
            quantity: quantity.into(),
            expected,
            computed,
            tolerance,
        }
    }

    pub fn deviation(&self) -> f64 {
        match self.tolerance {
            Tolerance::Relative(_) => (self.computed - self.expected).abs() / self.expected.abs(),
            Tolerance::Absolute(_) => (self.computed - self.expected).abs(),
        }
    }

    pub fn passed(&self) -> bool {
        match self.tolerance {
            Tolerance::Relative(t) | Tolerance::Absolute(t) => self.deviation() <= t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ValidationRow::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationRow> {
        self.rows.iter().filter(|r| !r.passed())
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("table,quantity,expected,computed,deviation,tolerance,kind,pass\n");
        for r in &self.rows {
            let (t, kind) = match r.tolerance {
                Tolerance::Relative(t) => (t, "relative"),
                Tolerance::Absolute(t) => (t, "absolute"),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{kind},{}",
                r.table,
                r.quantity,
                fmt_f64(r.expected),
                fmt_f64(r.computed),
                fmt_f64(r.deviation()),
                t,
                r.passed()
            )
            .unwrap();
        }
        out
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<9}{:<38}{:>13}{:>13}{:>11}  result",
            "table", "quantity", "expected", "computed", "dev"
        )?;
        for r in &self.rows {
            let dev = match r.tolerance {
                Tolerance::Relative(_) => format!("{:.3}%", 100.0 * r.deviation()),
                Tolerance::Absolute(_) => format!("{:.3}", r.deviation()),
            };
            writeln!(
                f,
                "{:<9}{:<38}{:>13.5e}{:>13.5e}{:>11}  {}",
                r.table,
                r.quantity,
                r.expected,
                r.computed,
                dev,
                if r.passed() { "ok" } else { "FAIL" }
            )?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{} of {} checks passed",
            self.rows.len() - failed,
            self.rows.len()
        )
    }
}

/// Reproduces the clinical, pump and Reynolds tables from their inputs.
pub fn validation_report() -> Result<ValidationReport> {
    let rel = Tolerance::Relative(0.02);
    let mut rows = Vec::new();

    for (i, rec) in data::post_surgery_tests().iter().enumerate() {
        let (omega, pf) = (rec.omega.unwrap(), rec.pf.unwrap());
        rows.push(ValidationRow::new(
            "pump head",
            format!("dP test {} (w={omega}, PF={pf})", i + 1),
            POST_DELTA_P[i],
            HEARTMATE3.delta_p(omega, pf),
            Tolerance::Absolute(1.0),
        ));
    }
    for (pf, omega) in SWEEP_SPEEDS {
        rows.push(ValidationRow::new(
            "pump speed",
            format!("w at PF={pf}, dP=75"),
            omega,
            HEARTMATE3.speed_for(pf, 75.0)?,
            Tolerance::Absolute(10.0),
        ));
    }

    let pre = data::pre_surgery();
    let c_total = total_compliance(pre.pas.unwrap(), pre.pad.unwrap(), pre.sv.unwrap())?;
    rows.push(ValidationRow::new(
        "lumped",
        "T pre [s]",
        data::PRE_PERIOD,
        cardiac_period(pre.sv.unwrap(), pre.co.unwrap())?,
        rel,
    ));
    rows.push(ValidationRow::new(
        "lumped",
        "RVS pre",
        data::PRE_RVS,
        systemic_resistance(&pre)?,
        rel,
    ));
    rows.push(ValidationRow::new(
        "lumped",
        "C total",
        data::PRE_COMPLIANCE,
        c_total,
        rel,
    ));

    let outlets = data::outlets();
    let est = estimate_outlet_set(&pre, &outlets, c_total)?;
    for (o, &(rp, rd, c)) in est.iter().zip(&data::PRE_COEFFICIENTS) {
        rows.push(ValidationRow::new(
            "rcr pre",
            format!("R_p pre {}", o.name),
            rp,
            o.rp,
            rel,
        ));
        rows.push(ValidationRow::new(
            "rcr pre",
            format!("R_d pre {}", o.name),
            rd,
            o.rd,
            rel,
        ));
        rows.push(ValidationRow::new(
            "rcr pre",
            format!("C {}", o.name),
            c,
            o.c,
            rel,
        ));
    }
    for (i, rec) in data::post_surgery_tests().iter().enumerate() {
        rows.push(ValidationRow::new(
            "lumped",
            format!("RVS test {}", i + 1),
            data::POST_RVS[i],
            systemic_resistance(rec)?,
            rel,
        ));
        let est = estimate_outlet_set(rec, &outlets, c_total)?;
        for (o, &(rp, rd)) in est.iter().zip(&data::POST_COEFFICIENTS[i]) {
            rows.push(ValidationRow::new(
                "rcr post",
                format!("R_p test {} {}", i + 1, o.name),
                rp,
                o.rp,
                rel,
            ));
            rows.push(ValidationRow::new(
                "rcr post",
                format!("R_d test {} {}", i + 1, o.name),
                rd,
                o.rd,
                rel,
            ));
        }
    }

    let blood = FluidProperties::blood();
    let area = data::OUTFLOW_CANNULA_AREA * 1e-4;
    for (i, rec) in data::post_surgery_tests().iter().enumerate() {
        rows.push(ValidationRow::new(
            "reynolds",
            format!("Re test {}", i + 1),
            POST_REYNOLDS[i],
            reynolds_inlet(lpm_to_m3s(rec.pf.unwrap()), area, &blood)?,
            rel,
        ));
    }
    Ok(ValidationReport { rows })
}

/// `field,mode,singular_value,cumulative_energy` over every model.
pub fn energy_csv(models: &[RomModel]) -> Result<String> {
    let mut out = String::from("field,mode,singular_value,cumulative_energy\n");
    for m in models {
        let sv = &m.basis().singular_values;
        let energy = cumulative_energy(sv)?;
        for (i, (s, e)) in sv.iter().zip(&energy).enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                m.field_name(),
                i + 1,
                fmt_f64(*s),
                fmt_f64(*e)
            )
            .unwrap();
        }
    }
    Ok(out)
}

/// Wall time of one FOM steady solve against one ROM prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub fom_seconds: f64,
    pub rom_seconds: f64,
}

impl TimingReport {
    pub fn speedup(&self) -> f64 {
        self.fom_seconds / self.rom_seconds
    }

    pub fn to_csv(&self) -> String {
        format!(
            "fom_seconds,rom_seconds,speedup\n{},{},{}\n",
            fmt_f64(self.fom_seconds),
            fmt_f64(self.rom_seconds),
            fmt_f64(self.speedup())
        )
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FOM {:.3} s, ROM {:.3e} s, speed-up {:.0}x",
            self.fom_seconds,
            self.rom_seconds,
            self.speedup()
        )
    }
}
