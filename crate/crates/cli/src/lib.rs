//! The `mip` command-line tool: project, correct, metrics, phantom and sweep.

pub mod args;
mod guard;
pub mod manifest;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mip_core::io::container::{encode_provenance, encode_stack};
use mip_core::io::report::{correction_table, score_table};
use mip_core::io::{self, format_sig6, AxisMap, Cell, ReportFormat, Table};
use mip_core::metrics::{aggregate, score_stacks, StackScores};
use mip_core::occlusion::{connected_components, correct_stack, Action, CorrectionReport, OcclusionConfig};
use mip_core::phantom::{generate_with, PhantomSpec};
use mip_core::projection::{project_labels_with, project_stack_with};
use mip_core::{AngularPlan, Execution, Interpolation, MipKind, MipStack, Volume3D};

pub use args::Cli;
use args::{Command, CorrectArgs, FormatArg, MetricsArgs, PhantomArgs, ProjectArgs, SweepArgs, VolumeInput};
pub use guard::OutputGuard;

/// Errors reported with exit status 2.
#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}

/// Files written by a command and its one-line summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let exec = Execution::default();
    mip_core::exec::with_workers(cli.workers, move || match cli.command {
        Command::Project(a) => cmd_project(&a, exec),
        Command::Correct(a) => cmd_correct(&a, exec),
        Command::Metrics(a) => cmd_metrics(&a, exec),
        Command::Phantom(a) => cmd_phantom(&a, exec),
        Command::Sweep(a) => cmd_sweep(&a, exec),
    })
}

fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(UsageError::MissingInput(path.to_path_buf()).into())
    }
}

fn flag<'a>(value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    match value {
        Some(p) => require(p),
        None => Err(UsageError::Invalid(format!("--{name} is required without --manifest")).into()),
    }
}

fn report_format(f: FormatArg) -> (ReportFormat, &'static str) {
    match f {
        FormatArg::Csv => (ReportFormat::Csv, "csv"),
        FormatArg::Json => (ReportFormat::Json, "json"),
    }
}

fn read_labels(path: &Path, axes: AxisMap) -> Result<Volume3D> {
    let (v, _) = io::read_nifti_with(require(path)?, axes).with_context(|| format!("reading {}", path.display()))?;
    v.into_labels()
        .with_context(|| format!("{} is not a binary label volume", path.display()))
}

fn read_pet(path: &Path, axes: AxisMap) -> Result<Volume3D> {
    let (v, _) = io::read_nifti_with(require(path)?, axes).with_context(|| format!("reading {}", path.display()))?;
    let diag = mip_core::validate(&v);
    if diag.non_finite() > 0 {
        bail!(
            "{}: {} NaN and {} infinite voxels",
            path.display(),
            diag.nan_count,
            diag.inf_count
        );
    }
    Ok(v)
}

fn load_phantom(spec_path: &Path, seed: Option<u64>) -> Result<PhantomSpec> {
    let mut spec = io::read_phantom_spec(require(spec_path)?)
        .with_context(|| format!("reading phantom spec {}", spec_path.display()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

/// PET volume and optional labels of a single-case invocation.
fn load_input(input: &VolumeInput, exec: Execution) -> Result<(Volume3D, Option<Volume3D>)> {
    if let Some(spec_path) = &input.phantom {
        let spec = load_phantom(spec_path, input.seed)?;
        let (pet, labels) = generate_with(&spec, exec)?;
        return Ok((pet, Some(labels)));
    }
    let pet = read_pet(flag(&input.pet, "pet")?, input.axis_permute)?;
    let labels = input
        .labels
        .as_deref()
        .map(|p| read_labels(p, input.axis_permute))
        .transpose()?;
    if let Some(l) = &labels {
        if l.dims() != pet.dims() {
            bail!("label volume is {:?} but the PET volume is {:?}", l.dims(), pet.dims());
        }
    }
    Ok((pet, labels))
}

fn case_dir(out: &Path, case: &str, batch: bool) -> PathBuf {
    if batch {
        out.join(case)
    } else {
        out.to_path_buf()
    }
}

// ---------------------------------------------------------------- project

fn project_case(
    pet: &Volume3D,
    labels: Option<&Volume3D>,
    plan: &AngularPlan,
    interp: Interpolation,
    exec: Execution,
    dir: &Path,
    guard: &mut OutputGuard,
) -> Result<String> {
    let t0 = Instant::now();
    let stack = project_stack_with(pet, plan, interp, exec)?;
    let label_stack = labels.map(|l| project_labels_with(l, plan, exec)).transpose()?;
    let wall = t0.elapsed();

    guard.create_dir(dir)?;
    guard.write(dir.join("intensity.mips"), |p| io::write_stack(&stack, p))?;
    let prov = stack.provenance.as_ref().expect("projection keeps provenance");
    guard.write(dir.join("provenance.mips"), |p| io::write_provenance(plan, prov, p))?;
    if let Some(ls) = &label_stack {
        guard.write(dir.join("labels.mips"), |p| io::write_stack(ls, p))?;
    }
    Ok(format!(
        "n={} delta_theta={} canvas={}x{} wall_ms={:.1}",
        plan.n(),
        format_sig6(plan.delta_theta()),
        stack.rows(),
        stack.cols(),
        wall.as_secs_f64() * 1e3
    ))
}

pub fn cmd_project(a: &ProjectArgs, exec: Execution) -> Result<Outcome> {
    let plan = AngularPlan::new(a.n)?;
    let interp = Interpolation::from(a.interp);
    let mut guard = OutputGuard::new();
    let mut lines = Vec::new();
    if let Some(m) = &a.manifest {
        for case in manifest::read(require(m)?, 1, 2)? {
            let pet = read_pet(&case.paths[0], a.input.axis_permute)?;
            let labels = case.paths.get(1).map(|p| read_labels(p, a.input.axis_permute)).transpose()?;
            let dir = case_dir(&a.out, &case.id, true);
            let s = project_case(&pet, labels.as_ref(), &plan, interp, exec, &dir, &mut guard)?;
            lines.push(format!("{}: {s}", case.id));
        }
    } else {
        let (pet, labels) = load_input(&a.input, exec)?;
        lines.push(project_case(&pet, labels.as_ref(), &plan, interp, exec, &a.out, &mut guard)?);
    }
    Ok(Outcome {
        files: guard.commit(),
        summary: lines.join("\n"),
    })
}

// ---------------------------------------------------------------- correct

/// Loads the containers of one case and checks that they describe the same projection.
fn load_correction_inputs(
    intensity: &Path,
    provenance: &Path,
    annotations: &Path,
    labels: &Path,
    axes: AxisMap,
) -> Result<(MipStack, MipStack, Volume3D)> {
    let ctx = |p: &Path| format!("reading {}", p.display());
    let ist = io::read_stack(require(intensity)?).with_context(|| ctx(intensity))?;
    let prov = io::read_provenance(require(provenance)?).with_context(|| ctx(provenance))?;
    let ann = io::read_stack(require(annotations)?).with_context(|| ctx(annotations))?;
    let labels3d = read_labels(labels, axes)?;

    if ist.kind() != MipKind::Intensity {
        bail!("{} holds label images, expected intensities", intensity.display());
    }
    if ann.kind() != MipKind::Label {
        bail!("{} holds intensity images, expected labels", annotations.display());
    }
    if prov.plan != ist.plan || ann.plan != ist.plan {
        bail!(
            "geometry mismatch: intensity has {} angles, provenance {}, annotations {}",
            ist.plan.n(),
            prov.plan.n(),
            ann.plan.n()
        );
    }
    let shape = |s: &MipStack| (s.rows(), s.cols());
    let pshape = (prov.maps[0].rows, prov.maps[0].cols);
    if shape(&ann) != shape(&ist) || pshape != shape(&ist) {
        bail!(
            "geometry mismatch: intensity {:?}, provenance {:?}, annotations {:?}",
            shape(&ist),
            pshape,
            shape(&ann)
        );
    }
    if ist.rows() != labels3d.dims().nz {
        bail!(
            "geometry mismatch: MIPs have {} rows but the label volume has {} slices",
            ist.rows(),
            labels3d.dims().nz
        );
    }
    let ist = MipStack::new(ist.plan, ist.images, Some(prov.maps))?;
    Ok((ist, ann, labels3d))
}

fn action_counts(reports: &[CorrectionReport]) -> [usize; 5] {
    let mut c = [0; 5];
    for d in reports.iter().flat_map(|r| &r.per_mip).flat_map(|m| &m.decisions) {
        let i = match d.action {
            Action::Kept => 0,
            Action::Split => 1,
            Action::RemovedOccluded => 2,
            Action::RemovedLowContrast => 3,
            Action::RemovedSmall => 4,
        };
        c[i] += 1;
    }
    c
}

pub fn cmd_correct(a: &CorrectArgs, exec: Execution) -> Result<Outcome> {
    let cfg = a.occlusion.config()?;
    let cases: Vec<(String, [PathBuf; 4])> = match &a.manifest {
        Some(m) => manifest::read(require(m)?, 4, 4)?
            .into_iter()
            .map(|c| {
                let [i, p, n, l]: [PathBuf; 4] = c.paths.try_into().expect("four paths");
                (c.id, [i, p, n, l])
            })
            .collect(),
        None => vec![(
            a.case_id.clone(),
            [
                flag(&a.intensity, "intensity")?.to_path_buf(),
                flag(&a.provenance, "provenance")?.to_path_buf(),
                flag(&a.annotations, "annotations")?.to_path_buf(),
                flag(&a.labels, "labels")?.to_path_buf(),
            ],
        )],
    };
    let batch = a.manifest.is_some();

    let mut guard = OutputGuard::new();
    guard.create_dir(&a.out)?;
    let mut reports = Vec::new();
    for (id, [i, p, n, l]) in &cases {
        let (ist, ann, labels3d) = load_correction_inputs(i, p, n, l, a.axis_permute)?;
        let (corrected, report) = correct_stack(&ann, &ist, &labels3d, &cfg, exec)?;
        let dir = case_dir(&a.out, id, batch);
        guard.create_dir(&dir)?;
        guard.write(dir.join("corrected.mips"), |p| io::write_stack(&corrected, p))?;
        reports.push((id.clone(), report));
    }

    let mut table = correction_table(&reports)?;
    table.meta("command", "correct").meta("cases", reports.len());
    let (fmt, ext) = report_format(a.format);
    guard.write(a.out.join(format!("correction.{ext}")), |p| io::write_table(&table, p, fmt))?;

    let only: Vec<CorrectionReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    let [kept, split, occluded, low, small] = action_counts(&only);
    let ex = only
        .iter()
        .skip(1)
        .fold(only[0].exclusion, |acc, r| acc.merge(&r.exclusion));
    Ok(Outcome {
        files: guard.commit(),
        summary: format!(
            "cases={} components={} kept={kept} split={split} removed_occluded={occluded} removed_low_contrast={low} \
             removed_small={small} tumors_excluded={}/{} ({}) volume_excluded_fraction={}",
            reports.len(),
            kept + split + occluded + low + small,
            ex.tumors_excluded,
            ex.tumors_total,
            format_sig6(ex.excluded_fraction()),
            format_sig6(ex.volume_excluded_fraction()),
        ),
    })
}

// ---------------------------------------------------------------- metrics

fn summary_table(cases: &[(String, StackScores)]) -> Result<Table> {
    let mut t = Table::new(&["metric", "mean", "std", "n", "undefined"]);
    t.meta("command", "metrics")
        .meta("pooling", "per case: mean over angles; dataset: mean and population std over cases")
        .meta("hausdorff_units", "pixels");
    let dice: Vec<f64> = cases.iter().map(|(_, s)| s.mean_dice).collect();
    let iou: Vec<f64> = cases.iter().map(|(_, s)| s.mean_iou).collect();
    let hd: Vec<f64> = cases.iter().filter_map(|(_, s)| s.mean_hausdorff).collect();
    for (name, vals) in [("dice", &dice), ("iou", &iou)] {
        let a = aggregate(vals)?;
        t.push(vec![name.into(), a.mean.into(), a.std_dev.into(), a.n.into(), 0usize.into()])?;
    }
    let undefined_hd = cases.len() - hd.len();
    match aggregate(&hd) {
        Ok(a) => t.push(vec!["hausdorff".into(), a.mean.into(), a.std_dev.into(), a.n.into(), undefined_hd.into()])?,
        Err(_) => t.push(vec!["hausdorff".into(), Cell::Empty, Cell::Empty, 0usize.into(), undefined_hd.into()])?,
    }
    let per_mip_undefined: usize = cases.iter().map(|(_, s)| s.hausdorff_undefined).sum();
    t.meta("hd_undefined_mips", per_mip_undefined);
    Ok(t)
}

pub fn cmd_metrics(a: &MetricsArgs, _exec: Execution) -> Result<Outcome> {
    let pairs: Vec<(String, PathBuf, PathBuf)> = match &a.manifest {
        Some(m) => manifest::read(require(m)?, 2, 2)?
            .into_iter()
            .map(|c| (c.id, c.paths[0].clone(), c.paths[1].clone()))
            .collect(),
        None => vec![(
            a.case_id.clone(),
            flag(&a.pred, "pred")?.to_path_buf(),
            flag(&a.truth, "truth")?.to_path_buf(),
        )],
    };
    let mut scored = Vec::new();
    for (id, pred, truth) in &pairs {
        let ps = io::read_stack(require(pred)?).with_context(|| format!("reading {}", pred.display()))?;
        let ts = io::read_stack(require(truth)?).with_context(|| format!("reading {}", truth.display()))?;
        for (s, p) in [(&ps, pred), (&ts, truth)] {
            if s.kind() != MipKind::Label {
                bail!("{} holds intensity images, expected labels", p.display());
            }
        }
        let s = score_stacks(&ps, &ts).with_context(|| format!("scoring case {id}"))?;
        scored.push((id.clone(), s));
    }

    let mut scores = score_table(&scored)?;
    scores.meta("command", "metrics");
    let summary = summary_table(&scored)?;
    let (fmt, ext) = report_format(a.format);
    let mut guard = OutputGuard::new();
    guard.create_dir(&a.out)?;
    guard.write(a.out.join(format!("scores.{ext}")), |p| io::write_table(&scores, p, fmt))?;
    guard.write(a.out.join(format!("summary.{ext}")), |p| io::write_table(&summary, p, fmt))?;

    let text: Vec<String> = summary
        .rows
        .iter()
        .map(|r| match (&r[0], &r[1], &r[2]) {
            (Cell::Text(m), Cell::Num(mean), Cell::Num(sd)) => {
                format!("{m}={}±{}", format_sig6(*mean), format_sig6(*sd))
            }
            (Cell::Text(m), _, _) => format!("{m}=undefined"),
            _ => String::new(),
        })
        .collect();
    Ok(Outcome {
        files: guard.commit(),
        summary: format!("cases={} {}", scored.len(), text.join(" ")),
    })
}

// ---------------------------------------------------------------- phantom

pub fn cmd_phantom(a: &PhantomArgs, exec: Execution) -> Result<Outcome> {
    let spec = load_phantom(&a.spec, a.seed)?;
    let (pet, labels) = generate_with(&spec, exec)?;
    let ext = if a.gzip { "nii.gz" } else { "nii" };
    let mut guard = OutputGuard::new();
    guard.create_dir(&a.out)?;
    guard.write(a.out.join(format!("pet.{ext}")), |p| io::write_nifti(&pet, p))?;
    guard.write(a.out.join(format!("labels.{ext}")), |p| io::write_nifti(&labels, p))?;
    let d = spec.dims;
    let lesion_voxels = labels.data().iter().filter(|&&v| v != 0.0).count();
    Ok(Outcome {
        files: guard.commit(),
        summary: format!(
            "dims={}x{}x{} spheres={} lesion_voxels={lesion_voxels} seed={}",
            d.nx,
            d.ny,
            d.nz,
            spec.spheres.len(),
            spec.seed
        ),
    })
}

// ---------------------------------------------------------------- sweep

pub const SWEEP_COLUMNS: [&str; 7] = [
    "n",
    "delta_theta",
    "wall_ms",
    "bytes",
    "components_before",
    "components_after",
    "excluded_tumor_fraction",
];

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn components_after(stack: &MipStack, cfg: &OcclusionConfig) -> usize {
    stack
        .images
        .iter()
        .map(|img| {
            let mask: Vec<bool> = img.data.iter().map(|&v| v != 0.0).collect();
            connected_components(&mask, img.rows, img.cols, cfg.connectivity).count
        })
        .sum()
}

pub fn cmd_sweep(a: &SweepArgs, exec: Execution) -> Result<Outcome> {
    if a.n.is_empty() {
        return Err(UsageError::Invalid("--n needs at least one MIP count".into()).into());
    }
    let mut seen = HashSet::new();
    for &n in &a.n {
        if !seen.insert(n) {
            return Err(UsageError::Invalid(format!("--n lists {n} more than once")).into());
        }
    }
    if a.repeats == 0 {
        return Err(UsageError::Invalid("--repeats must be at least 1".into()).into());
    }
    let cfg = a.occlusion.config()?;
    let interp = Interpolation::from(a.interp);
    let (pet, labels) = load_input(&a.input, exec)?;

    let mut table = Table::new(&SWEEP_COLUMNS);
    table
        .meta("command", "sweep")
        .meta("interp", format!("{:?}", interp).to_lowercase())
        .meta("repeats", a.repeats)
        .meta("wall_ms", "median projection time with provenance over the repeats")
        .meta("bytes", "intensity + provenance (+ label) container sizes")
        .meta("origin_threshold", format_sig6(cfg.origin_threshold))
        .meta("connectivity", cfg.connectivity.count())
        .meta("min_fragment_px", cfg.min_fragment_px)
        .meta("contrast_ratio_min", format_sig6(cfg.contrast_ratio_min))
        .meta("contrast_ring_radius_px", cfg.contrast_ring_radius_px);
    let mut lines = Vec::new();
    for &n in &a.n {
        let plan = AngularPlan::new(n)?;
        let mut times = Vec::with_capacity(a.repeats);
        let mut stack = None;
        for _ in 0..a.repeats {
            let t0 = Instant::now();
            let s = project_stack_with(&pet, &plan, interp, exec)?;
            times.push(t0.elapsed().as_secs_f64() * 1e3);
            stack = Some(s);
        }
        let stack = stack.expect("at least one repeat");
        let wall = median(times);
        let prov = stack.provenance.as_ref().expect("projection keeps provenance");
        let mut bytes = encode_stack(&stack)?.len() + encode_provenance(&plan, prov)?.len();
        let (before, after, excluded) = match &labels {
            Some(l) => {
                let ls = project_labels_with(l, &plan, exec)?;
                bytes += encode_stack(&ls)?.len();
                let (corrected, report) = correct_stack(&ls, &stack, l, &cfg, exec)?;
                (
                    Cell::from(report.components_before()),
                    Cell::from(components_after(&corrected, &cfg)),
                    Cell::from(report.exclusion.excluded_fraction()),
                )
            }
            None => (Cell::Empty, Cell::Empty, Cell::Empty),
        };
        table.push(vec![
            n.into(),
            plan.delta_theta().into(),
            wall.into(),
            bytes.into(),
            before,
            after,
            excluded,
        ])?;
        lines.push(format!("n={n}: {wall:.1} ms"));
    }

    let mut guard = OutputGuard::new();
    guard.create_dir(&a.out)?;
    guard.write(a.out.join("sweep.csv"), |p| io::write_table(&table, p, ReportFormat::Csv))?;
    Ok(Outcome {
        files: guard.commit(),
        summary: lines.join(", "),
    })
}
