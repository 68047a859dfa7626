//! Full-order runs driven from a prepared case.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use super::case::PreparedCase;
use crate::error::{Error, Result};
use crate::fv::{FlowState, Observer, PressureCondition, Simulation, StepSummary};
use crate::indicators::{pas_pad_pam, wall_shear_stress, PressureSummary, TimeSeries};
use crate::mesh::vtk::{write_patch, write_unstructured_grid, VtkField};
use crate::mesh::{Mesh, PatchKind, Vec3};
use crate::units::{m3s_to_lpm, pa_to_mmhg};

/// Snapshot fields collected by a sweep, in storage order.
pub const FIELD_NAMES: [&str; 5] = ["p", "wss", "u_x", "u_y", "u_z"];

/// One scalar field with the quadrature weights used by the ROM norms.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldData {
    pub name: String,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Cell pressure, velocity components (volume weights) and wall shear stress
/// magnitude over every wall patch (face-area weights).
pub fn extract_fields(case: &PreparedCase, state: &FlowState) -> Result<Vec<FieldData>> {
    let mesh = &case.mesh;
    let volumes = mesh.cell_volumes().to_vec();
    let (mut wss, mut areas) = (Vec::new(), Vec::new());
    for name in case.wall_patches() {
        let f = wall_shear_stress(mesh, state, &case.props, &name)?;
        wss.extend(f.values);
        areas.extend(f.areas);
    }
    let comp = |k: usize| state.u.iter().map(|u| u[k]).collect::<Vec<_>>();
    let mut out = vec![
        FieldData {
            name: "p".into(),
            values: state.p.clone(),
            weights: volumes.clone(),
        },
        FieldData {
            name: "wss".into(),
            values: wss,
            weights: areas,
        },
    ];
    for (k, name) in ["u_x", "u_y", "u_z"].iter().enumerate() {
        out.push(FieldData {
            name: name.to_string(),
            values: comp(k),
            weights: volumes.clone(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub state: FlowState,
    /// Time at which the fixed-pressure phase met the steady criterion.
    pub steady_at: Option<f64>,
    pub summaries: Vec<StepSummary>,
    pub seconds: f64,
}

impl SteadySolution {
    pub fn max_cfl(&self) -> f64 {
        self.summaries.iter().map(|s| s.cfl).fold(0.0, f64::max)
    }
}

/// Steady solve for a constant-inflow case.
///
/// The flow develops against fixed outlet pressures equal to each
/// Windkessel's equilibrium value, then the outlets are switched to the
/// coupled circuits (also at equilibrium) for two steady windows.
pub fn solve_steady(case: &PreparedCase) -> Result<SteadySolution> {
    let start = Instant::now();
    let mut cfg = case.cfg.clone();
    cfg.stop_when_steady = true;
    let mut fixed = case.bcs.clone();
    for c in &mut fixed.conditions {
        if let PressureCondition::Windkessel(w) = &c.pressure {
            c.pressure = PressureCondition::FixedValue(w.pressure);
        }
    }
    let init = FlowState::at_rest(&case.mesh, case.initial_pressure());
    let mut sim = Simulation::new(&case.mesh, fixed, case.props, cfg.clone(), init)?;
    let first = sim.run(&mut [])?;
    if first.steady_at.is_none() {
        warn!(
            "steady criterion not met by t = {:.3} s",
            first.final_state.time
        );
    }
    let mut summaries = first.summaries;
    let mut state = first.final_state;
    if case.bcs.windkessels().next().is_some() {
        cfg.stop_when_steady = false;
        cfg.t_end = state.time + 2.0 * cfg.steady_window.max(cfg.dt);
        let mut sim = Simulation::new(&case.mesh, case.bcs.clone(), case.props, cfg, state)?;
        let second = sim.run(&mut [])?;
        summaries.extend(second.summaries);
        state = second.final_state;
    }
    Ok(SteadySolution {
        state,
        steady_at: first.steady_at,
        summaries,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Round-trip float formatting for CSV output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Probe traces carry 15 significant digits.
fn fmt_probe(x: f64) -> String {
    format!("{x:.14e}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Probe {
    location: Vec3,
    cell: usize,
    trace: String,
}

fn nearest_cell(mesh: &Mesh, x: Vec3) -> usize {
    let c = mesh.cell_centroids();
    (0..c.len())
        .min_by(|&a, &b| {
            (c[a] - x)
                .norm_squared()
                .total_cmp(&(c[b] - x).norm_squared())
        })
        .unwrap_or(0)
}

struct Recorder<'a> {
    case: &'a PreparedCase,
    dir: PathBuf,
    probes: Vec<Probe>,
    times: Vec<f64>,
    p_avg: Vec<f64>,
    summary_csv: String,
}

impl<'a> Recorder<'a> {
    fn new(case: &'a PreparedCase, dir: &Path) -> Self {
        let diam = case.mesh.cell_diameters();
        let probes = case
            .output
            .probes
            .iter()
            .map(|&loc| {
                let x = Vec3::from(loc);
                let cell = nearest_cell(&case.mesh, x);
                if (case.mesh.cell_centroids()[cell] - x).norm() > diam[cell] {
                    warn!("probe at {loc:?} lies outside the mesh; using the nearest cell {cell}");
                }
                Probe {
                    location: x,
                    cell,
                    trace: "time,p,u_x,u_y,u_z\n".into(),
                }
            })
            .collect();
        let mut header =
            String::from("step,time,p_avg,inflow,cfl,continuity_error,pressure_iterations");
        for p in case
            .mesh
            .patches()
            .iter()
            .filter(|p| p.kind == PatchKind::Outlet)
        {
            write!(header, ",q_{0},p_{0}", p.name).unwrap();
        }
        header.push('\n');
        Recorder {
            case,
            dir: dir.to_path_buf(),
            probes,
            times: Vec::new(),
            p_avg: Vec::new(),
            summary_csv: header,
        }
    }

    fn sample_probes(&mut self, state: &FlowState) {
        for p in &mut self.probes {
            let u = state.u[p.cell];
            writeln!(
                p.trace,
                "{},{},{},{},{}",
                fmt_probe(state.time),
                fmt_probe(state.p[p.cell]),
                fmt_probe(u.x),
                fmt_probe(u.y),
                fmt_probe(u.z)
            )
            .unwrap();
        }
    }

    fn write_fields(&self, state: &FlowState, stem: &str) -> Result<()> {
        let mesh = &self.case.mesh;
        write_unstructured_grid(
            mesh,
            &self.dir.join(format!("{stem}.vtk")),
            &[
                VtkField::Scalar("p", &state.p),
                VtkField::Vector("U", &state.u),
            ],
        )?;
        for name in self.case.wall_patches() {
            let (id, _) = mesh.patch(&name).unwrap();
            let wss = wall_shear_stress(mesh, state, &self.case.props, &name)?;
            let vectors = wss.vectors.clone().unwrap_or_default();
            write_patch(
                mesh,
                id,
                &self.dir.join(format!("{stem}_{name}.vtk")),
                &[
                    VtkField::Scalar("wss", &wss.values),
                    VtkField::Vector("wss_vector", &vectors),
                ],
            )?;
        }
        Ok(())
    }
}

impl Observer for Recorder<'_> {
    fn observe(&mut self, _mesh: &Mesh, state: &FlowState, s: &StepSummary) -> Result<()> {
        self.times.push(s.time);
        self.p_avg.push(s.p_avg);
        write!(
            self.summary_csv,
            "{},{},{},{},{},{},{}",
            s.step,
            fmt_f64(s.time),
            fmt_f64(s.p_avg),
            fmt_f64(s.inflow),
            fmt_f64(s.cfl),
            fmt_f64(s.continuity_error),
            s.pressure_iterations
        )
        .unwrap();
        for (q, p) in s.outlet_flows.iter().zip(&s.outlet_pressures) {
            write!(self.summary_csv, ",{},{}", fmt_f64(*q), fmt_f64(*p)).unwrap();
        }
        self.summary_csv.push('\n');
        let probe_every = self.case.output.probe_interval.max(1);
        if s.step % probe_every == 0 {
            self.sample_probes(state);
        }
        let every = self.case.output.write_interval;
        if every > 0 && s.step % every == 0 {
            self.write_fields(state, &format!("fields_{:06}", s.step))?;
        }
        Ok(())
    }
}

/// Result of a full-order run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub steady_at: Option<f64>,
    pub steps: usize,
    pub final_time: f64,
    /// Pressure summary of the volume-averaged pressure [mmHg].
    pub pressures: PressureSummary,
    pub mass_imbalance: Option<f64>,
    pub seconds: f64,
    pub report: String,
}

/// Runs a case to `t_end` (or steady state), writing into `dir`:
/// `summary.csv`, `probe_<i>.csv`, VTK field files and `indicators.csv` /
/// `report.txt`.
pub fn run_case(case: &PreparedCase, dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let start = Instant::now();
    let init = FlowState::at_rest(&case.mesh, case.initial_pressure());
    let mut sim = Simulation::new(
        &case.mesh,
        case.bcs.clone(),
        case.props,
        case.cfg.clone(),
        init,
    )?;
    let mut rec = Recorder::new(case, dir);
    rec.sample_probes(sim.state());
    let report = sim.run(&mut [&mut rec])?;
    let seconds = start.elapsed().as_secs_f64();
    rec.write_fields(&report.final_state, "final")?;
    write_file(&dir.join("summary.csv"), &rec.summary_csv)?;
    for (i, p) in rec.probes.iter().enumerate() {
        write_file(&dir.join(format!("probe_{i}.csv")), &p.trace)?;
    }
    let series = TimeSeries::new(
        rec.times.clone(),
        rec.p_avg.iter().map(|&p| pa_to_mmhg(p)).collect(),
    )?;
    let pulsatile = case
        .period()
        .filter(|&t| series.times().last().copied().unwrap_or(0.0) >= t);
    let pressures = if case.is_pulsatile() && pulsatile.is_some() {
        pas_pad_pam(&series, pulsatile)?
    } else {
        let last = *series.values().last().unwrap();
        PressureSummary {
            pas: last,
            pad: last,
            pam: last,
        }
    };
    let mass = report.mass_imbalance();
    let text = indicator_report(
        case,
        &report.summaries,
        report.steady_at,
        &pressures,
        mass,
        seconds,
    );
    write_file(&dir.join("report.txt"), &text)?;
    write_file(
        &dir.join("indicators.csv"),
        &indicator_csv(case, &pressures),
    )?;
    for (i, p) in rec.probes.iter().enumerate() {
        info!("probe {i} at {:?} -> cell {}", p.location, p.cell);
    }
    Ok(RunOutcome {
        steady_at: report.steady_at,
        steps: report.summaries.len(),
        final_time: report.final_state.time,
        pressures,
        mass_imbalance: mass,
        seconds,
        report: text,
    })
}

fn indicator_csv(case: &PreparedCase, s: &PressureSummary) -> String {
    let mut out = String::from("indicator,numerical_mmHg,experimental_mmHg\n");
    let rec = case.record.as_ref();
    let rows = [
        ("PAS", s.pas, rec.and_then(|r| r.pas)),
        ("PAD", s.pad, rec.and_then(|r| r.pad)),
        ("PAM", s.pam, rec.map(|r| r.pam)),
    ];
    for (name, num, exp) in rows {
        let exp = exp.map(fmt_f64).unwrap_or_default();
        writeln!(out, "{name},{},{exp}", fmt_f64(num)).unwrap();
    }
    out
}

fn indicator_report(
    case: &PreparedCase,
    summaries: &[StepSummary],
    steady_at: Option<f64>,
    s: &PressureSummary,
    mass: Option<f64>,
    seconds: f64,
) -> String {
    let mut out = String::new();
    let last = summaries.last();
    writeln!(out, "steps: {}", summaries.len()).unwrap();
    if let Some(l) = last {
        writeln!(out, "final time: {:.6} s", l.time).unwrap();
        writeln!(out, "inflow: {:.6} l/min", m3s_to_lpm(l.inflow)).unwrap();
    }
    match steady_at {
        Some(t) => writeln!(out, "steady at: {t:.6} s").unwrap(),
        None => writeln!(out, "steady at: not reached").unwrap(),
    }
    if let Some(m) = mass {
        writeln!(out, "mass imbalance: {m:.3e}").unwrap();
    }
    writeln!(
        out,
        "max CFL: {:.3}",
        summaries.iter().map(|s| s.cfl).fold(0.0, f64::max)
    )
    .unwrap();
    writeln!(out, "wall time: {seconds:.2} s").unwrap();
    writeln!(out).unwrap();
    if !case.is_pulsatile() {
        writeln!(out, "steady outflow: PAM = PAS = PAD = {:.2} mmHg", s.pam).unwrap();
        if let Some(r) = &case.record {
            writeln!(out, "PAM (exp/num): {:.2} / {:.2} mmHg", r.pam, s.pam).unwrap();
        }
        return out;
    }
    writeln!(out, "{:<6}{:>10}{:>10}{:>10}", "", "exp", "num", "diff").unwrap();
    let rec = case.record.as_ref();
    for (name, num, exp) in [
        ("PAS", s.pas, rec.and_then(|r| r.pas)),
        ("PAD", s.pad, rec.and_then(|r| r.pad)),
        ("PAM", s.pam, rec.map(|r| r.pam)),
    ] {
        match exp {
            Some(e) => writeln!(out, "{name:<6}{e:>10.2}{num:>10.2}{:>10.2}", num - e).unwrap(),
            None => writeln!(out, "{name:<6}{:>10}{num:>10.2}{:>10}", "-", "-").unwrap(),
        }
    }
    out
}
