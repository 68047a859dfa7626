//! Parameter sweeps over the pump flow.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::case::PreparedCase;
use super::run::{extract_fields, solve_steady, FIELD_NAMES};
use super::snapshot_db::SnapshotDb;
use crate::error::{Error, Result};
use crate::pump::HEARTMATE3;
use crate::units::lpm_to_m3s;

/// Head at which PF maps to pump speed [mmHg].
pub const SWEEP_DELTA_P: f64 = 75.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub param: String,
    /// PF range [l/min].
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub delta_p: f64,
    /// Extra sample points outside the equispaced set, e.g. held-out references.
    #[serde(default)]
    pub extra: Vec<f64>,
    pub out: PathBuf,
}

impl SweepPlan {
    pub fn new(lo: f64, hi: f64, count: usize, out: impl Into<PathBuf>) -> Result<Self> {
        let plan = SweepPlan {
            param: "PF".into(),
            lo,
            hi,
            count,
            delta_p: SWEEP_DELTA_P,
            extra: Vec::new(),
            out: out.into(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_extra(mut self, extra: &[f64]) -> Result<Self> {
        self.extra = extra.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::invalid(format!(
                "sweep range needs lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.count < 2 {
            return Err(Error::invalid(format!(
                "sweep needs at least 2 points, got {}",
                self.count
            )));
        }
        if !(self.delta_p > 0.0) {
            return Err(Error::invalid(format!(
                "delta_p must be positive, got {}",
                self.delta_p
            )));
        }
        if let Some(x) = self.extra.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::invalid(format!(
                "extra sample {x} must be a positive flow"
            )));
        }
        Ok(())
    }

    /// Equispaced points `lo + (hi - lo) i / (count - 1)`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.count - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / n as f64
                }
            })
            .collect()
    }

    /// Grid points followed by the extra points.
    pub fn points(&self) -> Vec<f64> {
        let mut p = self.grid();
        p.extend(&self.extra);
        p
    }

    pub fn omega(&self, pf: f64) -> Result<f64> {
        HEARTMATE3.speed_for(pf, self.delta_p)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepSummary {
    pub computed: Vec<f64>,
    pub skipped: Vec<f64>,
    pub seconds: f64,
}

/// Runs one steady solve per plan point that the database does not already
/// hold intact, using up to `workers` threads.
///
/// When the template's time step is derived, one step sized for the largest
/// flow of the plan is used for every entry.
pub fn run_sweep(
    plan: &SweepPlan,
    template: &PreparedCase,
    workers: usize,
) -> Result<SweepSummary> {
    plan.validate()?;
    let start = Instant::now();
    let db = SnapshotDb::create_or_open(&plan.out)?;
    let points = plan.points();
    let mut template = template.clone();
    if template.auto_dt {
        let q_max = points.iter().copied().fold(0.0, f64::max);
        template.cfg.dt = template.auto_time_step(lpm_to_m3s(q_max));
    }
    let (mut todo, mut skipped) = (Vec::new(), Vec::new());
    for &p in &points {
        if db.is_complete(p, &FIELD_NAMES) {
            skipped.push(p);
        } else {
            todo.push(p);
        }
    }
    if !skipped.is_empty() {
        info!("skipping {} completed entries", skipped.len());
    }
    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    let workers = workers.clamp(1, todo.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&pf) = todo.get(i) else { break };
                if let Err(e) = sweep_entry(plan, &template, &db, pf) {
                    failures.lock().unwrap().push((pf, e));
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    for (pf, e) in &failures {
        log::error!("sweep entry PF = {pf} failed: {e}");
    }
    if let Some((_, e)) = failures.into_iter().next() {
        return Err(e);
    }
    Ok(SweepSummary {
        computed: todo,
        skipped,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn sweep_entry(plan: &SweepPlan, template: &PreparedCase, db: &SnapshotDb, pf: f64) -> Result<()> {
    let omega = plan.omega(pf)?;
    let case = template.with_constant_inflow(lpm_to_m3s(pf));
    let sol = solve_steady(&case)?;
    info!(
        "PF {pf:.3} l/min (omega {omega:.0} rpm): steady at {:?} s, {:.2} s wall, max CFL {:.2}",
        sol.steady_at,
        sol.seconds,
        sol.max_cfl()
    );
    let fields = extract_fields(&case, &sol.state)?;
    db.insert(pf, omega, sol.seconds, &fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_points_step_two_tenths() {
        let plan = SweepPlan::new(3.0, 5.0, 11, "db").unwrap();
        let g = plan.grid();
        assert_eq!(g.len(), 11);
        for (i, p) in g.iter().enumerate() {
            assert!((p - (3.0 + 0.2 * i as f64)).abs() < 1e-12);
        }
        let fine = SweepPlan::new(3.0, 5.0, 21, "db").unwrap().grid();
        for p in &g {
            assert!(fine.contains(p), "{p} missing from the 21-point grid");
        }
    }

    #[test]
    fn omega_column_matches_pump_speeds() {
        let plan = SweepPlan::new(3.0, 5.0, 2, "db").unwrap();
        assert!((plan.omega(3.0).unwrap() - 5076.0).abs() < 10.0);
        assert!((plan.omega(5.0).unwrap() - 5720.0).abs() < 10.0);
    }

    #[test]
    fn rejects_bad_plans() {
        assert!(SweepPlan::new(5.0, 3.0, 11, "db").is_err());
        assert!(SweepPlan::new(3.0, 5.0, 1, "db").is_err());
        assert!(SweepPlan::new(3.0, 3.0, 4, "db").is_err());
    }
}
