use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use lvad_core::io::{
    energy_csv, fmt_f64, run_case, run_sweep, validation_report, CaseFile, SnapshotDb, SweepPlan,
    TimingReport, FIELD_NAMES,
};
use lvad_core::mesh::file::write_mesh;
use lvad_core::mesh::vtk::{write_unstructured_grid, VtkField};
use lvad_core::mesh::{
    generate_bend_mesh, generate_bifurcation_mesh, generate_box_mesh, generate_channel_mesh,
    generate_pipe_mesh, mesh_quality, Mesh, Vec3, NON_ORTHOGONALITY_CAP_DEG,
};
use lvad_core::podi::{evaluate_rom, read_models, train, write_models, InterpolationKind};
use lvad_core::pump::HEARTMATE3;
use lvad_core::windkessel::{coefficients_csv, data, estimate_outlet_set, total_compliance};

#[derive(Parser)]
#[command(
    name = "lvad",
    version,
    about = "Aortic flow solver and reduced-order model toolkit"
)]
struct Cli {
    /// Overrides every output directory.
    #[arg(long, global = true, env = "LVAD_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh file and print its quality summary.
    Mesh(MeshArgs),
    /// Run a full-order case.
    FomRun {
        case: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady solves over an equispaced PF range into a snapshot database.
    Sweep(SweepArgs),
    /// Train one ROM per snapshot field.
    RomTrain(TrainArgs),
    /// Predict fields with a trained model.
    RomEval(EvalArgs),
    /// Reproduce the clinical, pump and Reynolds tables.
    Validate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write validation, coefficient, energy and error tables.
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MeshArgs {
    #[command(subcommand)]
    kind: MeshKind,
    #[arg(long, global = true, default_value = "mesh.mesh")]
    out: PathBuf,
    /// Also write a VTK file next to the mesh.
    #[arg(long, global = true)]
    vtk: bool,
}

#[derive(Subcommand)]
enum MeshKind {
    Pipe {
        #[arg(long)]
        length: f64,
        #[arg(long)]
        diameter: f64,
        #[arg(long, default_value_t = 20)]
        axial: usize,
        #[arg(long, default_value_t = 6)]
        radial: usize,
    },
    Bend {
        #[arg(long)]
        diameter: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 90.0)]
        angle: f64,
        #[arg(long, default_value_t = 20)]
        axial: usize,
        #[arg(long, default_value_t = 6)]
        radial: usize,
    },
    Channel {
        #[arg(long)]
        length: f64,
        #[arg(long)]
        height: f64,
        #[arg(long, default_value_t = 40)]
        nx: usize,
        #[arg(long, default_value_t = 10)]
        ny: usize,
    },
    Box {
        #[arg(long, num_args = 3, value_delimiter = ',')]
        lengths: Vec<f64>,
        #[arg(long, num_args = 3, value_delimiter = ',')]
        counts: Vec<usize>,
    },
    Bifurcation {
        #[arg(long, default_value_t = 0.12)]
        trunk_length: f64,
        #[arg(long, default_value_t = 0.028)]
        trunk_diameter: f64,
        #[arg(long, default_value_t = 0.0129)]
        branch_diameter: f64,
        #[arg(long, default_value_t = 60.0)]
        angle: f64,
        #[arg(long, default_value_t = 3)]
        resolution: usize,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Case file used as the template; its inflow is replaced by each PF.
    case: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    lo: f64,
    #[arg(long, default_value_t = 5.0)]
    hi: f64,
    #[arg(long, default_value_t = 11)]
    count: usize,
    /// Head used to back out the pump speed of each entry [mmHg].
    #[arg(long, default_value_t = 75.0)]
    delta_p: f64,
    /// Additional PF values, e.g. held-out references.
    #[arg(long, value_delimiter = ',')]
    extra: Vec<f64>,
    #[arg(long, default_value = "snapshots")]
    out: PathBuf,
    #[arg(long, env = "LVAD_WORKERS", default_value_t = 1)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Linear,
    RbfThinPlate,
    RbfGaussian,
}

impl From<Kind> for InterpolationKind {
    fn from(k: Kind) -> Self {
        let name = match k {
            Kind::Linear => "linear",
            Kind::RbfThinPlate => "rbf-thin-plate",
            Kind::RbfGaussian => "rbf-gaussian",
        };
        InterpolationKind::parse(name).unwrap()
    }
}

#[derive(Args)]
struct TrainArgs {
    db: PathBuf,
    #[arg(long, default_value_t = 0.999)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "linear")]
    kind: Kind,
    /// Training parameters; all stored ones minus `--exclude` by default.
    #[arg(long, value_delimiter = ',')]
    params: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    fields: Vec<String>,
    /// Use the plain Euclidean inner product for the modes.
    #[arg(long)]
    unweighted: bool,
    #[arg(long, default_value = "rom.bin")]
    out: PathBuf,
    #[arg(long)]
    energy_csv: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    model: PathBuf,
    #[arg(long = "param", required = true, value_delimiter = ',')]
    params: Vec<f64>,
    /// Snapshot database holding FOM references for the error table.
    #[arg(long)]
    db: Option<PathBuf>,
    /// Case whose mesh is used for VTK output of the predicted fields.
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long)]
    allow_extrapolation: bool,
    #[arg(long, default_value = "rom_eval")]
    out: PathBuf,
}

fn out_dir(cli_override: &Option<PathBuf>, local: Option<PathBuf>, default: &Path) -> PathBuf {
    cli_override
        .clone()
        .or(local)
        .unwrap_or_else(|| default.to_path_buf())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn within(params: &[f64], p: f64) -> bool {
    params
        .iter()
        .any(|q| (q - p).abs() <= 1e-9 * p.abs().max(1.0))
}

fn cmd_mesh(args: MeshArgs, output_dir: &Option<PathBuf>) -> Result<()> {
    let mesh: Mesh = match args.kind {
        MeshKind::Pipe {
            length,
            diameter,
            axial,
            radial,
        } => generate_pipe_mesh(length, diameter, axial, radial)?,
        MeshKind::Bend {
            diameter,
            radius,
            angle,
            axial,
            radial,
        } => generate_bend_mesh(diameter, radius, angle, axial, radial)?,
        MeshKind::Channel {
            length,
            height,
            nx,
            ny,
        } => generate_channel_mesh(length, height, nx, ny)?,
        MeshKind::Box { lengths, counts } => generate_box_mesh(
            [lengths[0], lengths[1], lengths[2]],
            [counts[0], counts[1], counts[2]],
        )?,
        MeshKind::Bifurcation {
            trunk_length,
            trunk_diameter,
            branch_diameter,
            angle,
            resolution,
        } => {
            generate_bifurcation_mesh(
                trunk_length,
                trunk_diameter,
                branch_diameter,
                angle,
                resolution,
            )?
            .mesh
        }
    };
    let out = match output_dir {
        Some(d) => {
            create_dir(d)?;
            d.join(args.out.file_name().unwrap_or_default())
        }
        None => args.out,
    };
    write_mesh(&mesh, &out)?;
    if args.vtk {
        write_unstructured_grid(&mesh, &out.with_extension("vtk"), &[])?;
    }
    let q = mesh_quality(&mesh);
    println!("{}", out.display());
    println!("{q}");
    if q.max_non_orthogonality > NON_ORTHOGONALITY_CAP_DEG {
        bail!(
            "max non-orthogonality {:.1} deg exceeds the validity cap of {NON_ORTHOGONALITY_CAP_DEG} deg",
            q.max_non_orthogonality
        );
    }
    Ok(())
}

fn case_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn cmd_fom_run(case_path: &Path, out: Option<PathBuf>, output_dir: &Option<PathBuf>) -> Result<()> {
    let case = CaseFile::load(case_path)?;
    let base = case_base(case_path);
    let prepared = case.prepare(&base)?;
    let dir = out_dir(output_dir, out, &base.join(&case.output.dir));
    info!(
        "{} cells, dt {:.3e} s, t_end {} s",
        prepared.mesh.n_cells(),
        prepared.cfg.dt,
        prepared.cfg.t_end
    );
    let outcome = run_case(&prepared, &dir)?;
    print!("{}", outcome.report);
    println!("outputs in {}", dir.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs, output_dir: &Option<PathBuf>) -> Result<()> {
    let case = CaseFile::load(&args.case)?;
    let prepared = case.prepare(&case_base(&args.case))?;
    let out = out_dir(output_dir, None, &args.out);
    let mut plan = SweepPlan::new(args.lo, args.hi, args.count, out)?.with_extra(&args.extra)?;
    plan.delta_p = args.delta_p;
    plan.validate()?;
    let summary = run_sweep(&plan, &prepared, args.workers)?;
    let db = SnapshotDb::open(&plan.out)?;
    println!("PF,omega");
    for p in db.params() {
        println!("{p},{:.1}", plan.omega(p)?);
    }
    println!(
        "{} computed, {} skipped, {:.1} s",
        summary.computed.len(),
        summary.skipped.len(),
        summary.seconds
    );
    Ok(())
}

fn cmd_rom_train(args: TrainArgs, output_dir: &Option<PathBuf>) -> Result<()> {
    if !(args.threshold > 0.0 && args.threshold <= 1.0) {
        return Err(lvad_core::Error::InvalidArgument(format!(
            "energy threshold must lie in (0, 1], got {}",
            args.threshold
        ))
        .into());
    }
    let db = SnapshotDb::open(&args.db)?;
    let params: Vec<f64> = if args.params.is_empty() {
        db.params()
            .into_iter()
            .filter(|p| !within(&args.exclude, *p))
            .collect()
    } else {
        args.params.clone()
    };
    let fields: Vec<String> = if args.fields.is_empty() {
        FIELD_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        args.fields.clone()
    };
    let mut models = Vec::new();
    for f in &fields {
        let set = db.snapshot_set(f, Some(&params), !args.unweighted)?;
        let m = train(&set, args.threshold, args.kind.into())?;
        info!("{f}: {} modes", m.n_modes());
        println!("{f}: k = {} of {} snapshots", m.n_modes(), params.len());
        models.push(m);
    }
    let (model_path, energy_path) = match output_dir {
        Some(d) => {
            create_dir(d)?;
            (
                d.join(args.out.file_name().unwrap_or_default()),
                args.energy_csv
                    .map(|e| d.join(e.file_name().unwrap_or_default())),
            )
        }
        None => (args.out, args.energy_csv),
    };
    write_models(&model_path, &models)?;
    let energy_path = energy_path.unwrap_or_else(|| model_path.with_extension("energy.csv"));
    write(&energy_path, &energy_csv(&models)?)?;
    println!(
        "model {}; energy curve {}",
        model_path.display(),
        energy_path.display()
    );
    Ok(())
}

fn cmd_rom_eval(args: EvalArgs, output_dir: &Option<PathBuf>) -> Result<()> {
    let models = read_models(&args.model)?;
    let dir = out_dir(output_dir, None, &args.out);
    create_dir(&dir)?;
    let mesh = match &args.case {
        Some(c) => Some(CaseFile::load(c)?.prepare(&case_base(c))?.mesh),
        None => None,
    };
    let mut rom_seconds = Vec::new();
    for &p in &args.params {
        let start = Instant::now();
        let predictions = models
            .iter()
            .map(|m| m.predict(p, args.allow_extrapolation))
            .collect::<lvad_core::Result<Vec<_>>>()?;
        rom_seconds.push(start.elapsed().as_secs_f64());
        for (m, v) in models.iter().zip(&predictions) {
            let text: String = std::iter::once(format!("{}\n", m.field_name()))
                .chain(v.iter().map(|x| format!("{}\n", fmt_f64(*x))))
                .collect();
            write(&dir.join(format!("{}_{p}.csv", m.field_name())), &text)?;
        }
        if let Some(mesh) = &mesh {
            let by_name: HashMap<&str, &Vec<f64>> = models
                .iter()
                .map(|m| m.field_name())
                .zip(&predictions)
                .collect();
            let get = |name: &str| by_name.get(name).copied();
            let mut fields = Vec::new();
            let pressure = get("p").filter(|v| v.len() == mesh.n_cells());
            if let Some(pv) = pressure {
                fields.push(VtkField::Scalar("p", pv));
            }
            let velocity: Option<Vec<Vec3>> = match (get("u_x"), get("u_y"), get("u_z")) {
                (Some(x), Some(y), Some(z)) if x.len() == mesh.n_cells() => {
                    Some((0..x.len()).map(|i| Vec3::new(x[i], y[i], z[i])).collect())
                }
                _ => None,
            };
            if let Some(u) = &velocity {
                fields.push(VtkField::Vector("U", u));
            }
            write_unstructured_grid(mesh, &dir.join(format!("rom_{p}.vtk")), &fields)?;
        }
    }
    let per_eval = rom_seconds.iter().sum::<f64>() / rom_seconds.len() as f64;
    let mut timing = format!("rom_seconds_per_eval,{}\n", fmt_f64(per_eval));
    if let Some(db_path) = &args.db {
        let db = SnapshotDb::open(db_path)?;
        let refs: Vec<f64> = args
            .params
            .iter()
            .copied()
            .filter(|p| within(&db.params(), *p))
            .collect();
        if !refs.is_empty() {
            let table = evaluate_rom(&models, |f, p| db.try_load(p, f), &refs)?;
            let csv = table.to_csv("PF");
            write(&dir.join("errors.csv"), &csv)?;
            print!("{csv}");
        }
        if let Some(fom) = db.mean_fom_seconds() {
            let t = TimingReport {
                fom_seconds: fom,
                rom_seconds: per_eval,
            };
            timing = t.to_csv();
            println!("{t}");
        }
    }
    write(&dir.join("timing.csv"), &timing)?;
    println!("predictions in {}", dir.display());
    Ok(())
}

fn cmd_validate(out: Option<PathBuf>, output_dir: &Option<PathBuf>) -> Result<()> {
    let report = validation_report()?;
    println!("{report}");
    if let Some(dir) = output_dir.clone().or(out) {
        create_dir(&dir)?;
        write(&dir.join("validation.csv"), &report.to_csv())?;
    }
    if !report.passed() {
        bail!(
            "{} validation checks outside tolerance",
            report.failures().count()
        );
    }
    Ok(())
}

fn cmd_report(
    out: Option<PathBuf>,
    db: Option<PathBuf>,
    model: Option<PathBuf>,
    output_dir: &Option<PathBuf>,
) -> Result<()> {
    let dir = out_dir(output_dir, out, Path::new("report"));
    create_dir(&dir)?;
    let validation = validation_report()?;
    write(&dir.join("validation.csv"), &validation.to_csv())?;
    write(&dir.join("validation.txt"), &format!("{validation}\n"))?;
    write(
        &dir.join("pump_coefficients.csv"),
        &HEARTMATE3.coefficients_csv(),
    )?;
    let pre = data::pre_surgery();
    let c = total_compliance(pre.pas.unwrap(), pre.pad.unwrap(), pre.sv.unwrap())?;
    let outlets = data::outlets();
    write(
        &dir.join("windkessel_pre.csv"),
        &coefficients_csv(&estimate_outlet_set(&pre, &outlets, c)?),
    )?;
    for (i, rec) in data::post_surgery_tests().iter().enumerate() {
        write(
            &dir.join(format!("windkessel_post_{}.csv", i + 1)),
            &coefficients_csv(&estimate_outlet_set(rec, &outlets, c)?),
        )?;
    }
    if let Some(model) = &model {
        let models = read_models(model)?;
        write(&dir.join("energy.csv"), &energy_csv(&models)?)?;
        if let Some(db) = &db {
            let db = SnapshotDb::open(db)?;
            let params = db.params();
            let table = evaluate_rom(&models, |f, p| db.try_load(p, f), &params)?;
            write(&dir.join("errors.csv"), &table.to_csv("PF"))?;
        }
    }
    println!("{validation}");
    println!("report in {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let od = cli.output_dir;
    match cli.command {
        Command::Mesh(a) => cmd_mesh(a, &od),
        Command::FomRun { case, out } => cmd_fom_run(&case, out, &od),
        Command::Sweep(a) => cmd_sweep(a, &od),
        Command::RomTrain(a) => cmd_rom_train(a, &od),
        Command::RomEval(a) => cmd_rom_eval(a, &od),
        Command::Validate { out } => cmd_validate(out, &od),
        Command::Report { out, db, model } => cmd_report(out, db, model, &od),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LVAD_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e
                .downcast_ref::<lvad_core::Error>()
                .is_some_and(|e| e.is_usage());
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
