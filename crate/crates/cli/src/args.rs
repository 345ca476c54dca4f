use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mip_core::io::AxisMap;
use mip_core::occlusion::{Connectivity, OcclusionConfig};
use mip_core::Interpolation;

#[derive(Debug, Parser)]
#[command(name = "mip", version, about = "Multi-angle MIPs with voxel provenance and annotation occlusion correction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project a PET volume (and optional labels) into an N-angle MIP stack.
    Project(ProjectArgs),
    /// Occlusion-correct projected annotations.
    Correct(CorrectArgs),
    /// Score predicted label MIPs against ground truth.
    Metrics(MetricsArgs),
    /// Generate a phantom PET and label volume from a spec file.
    Phantom(PhantomArgs),
    /// Projection cost and annotation retention over several MIP counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Linear,
    Nearest,
}

impl From<InterpArg> for Interpolation {
    fn from(v: InterpArg) -> Self {
        match v {
            InterpArg::Linear => Interpolation::Linear,
            InterpArg::Nearest => Interpolation::Nearest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FormatArg {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct VolumeInput {
    /// PET volume (.nii or .nii.gz).
    #[arg(long, conflicts_with = "phantom")]
    pub pet: Option<PathBuf>,

    /// Binary lesion label volume (.nii or .nii.gz).
    #[arg(long, conflicts_with = "phantom")]
    pub labels: Option<PathBuf>,

    /// Phantom spec file, generated in memory instead of reading volumes.
    #[arg(long)]
    pub phantom: Option<PathBuf>,

    /// Overrides the phantom spec's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// File axes taken as (x, y, z), e.g. `x,y,z` or `-y,x,z`.
    #[arg(long, default_value = "x,y,z")]
    pub axis_permute: AxisMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConnectivityArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Debug, Clone, Args)]
pub struct OcclusionArgs {
    /// Minimum tumor-origin fraction for a component to be kept intact.
    #[arg(long, default_value_t = 0.75)]
    pub origin_threshold: f64,

    #[arg(long, value_enum, default_value = "8")]
    pub connectivity: ConnectivityArg,

    /// Minimum fragment-to-surrounding intensity ratio.
    #[arg(long, default_value_t = 1.15)]
    pub contrast_ratio: f64,

    /// Width of the surrounding ring in pixels.
    #[arg(long, default_value_t = 3)]
    pub ring_radius: usize,

    /// Fragments with fewer pixels are dropped.
    #[arg(long, default_value_t = 4)]
    pub min_fragment: usize,
}

impl OcclusionArgs {
    pub fn config(&self) -> mip_core::Result<OcclusionConfig> {
        let cfg = OcclusionConfig {
            origin_threshold: self.origin_threshold,
            connectivity: match self.connectivity {
                ConnectivityArg::Four => Connectivity::Four,
                ConnectivityArg::Eight => Connectivity::Eight,
            },
            min_fragment_px: self.min_fragment,
            contrast_ratio_min: self.contrast_ratio,
            contrast_ring_radius_px: self.ring_radius,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub input: VolumeInput,

    /// Number of MIPs over [0°, 180°).
    #[arg(long, default_value_t = 48)]
    pub n: usize,

    #[arg(long, value_enum, default_value_t = InterpArg::Linear)]
    pub interp: InterpArg,

    /// Case list: `case_id pet [labels]` per line; outputs go to `<out>/<case_id>/`.
    #[arg(long, conflicts_with_all = ["pet", "labels", "phantom"])]
    pub manifest: Option<PathBuf>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    /// Intensity MIPS container.
    #[arg(long)]
    pub intensity: Option<PathBuf>,

    /// Provenance MIPS container matching the intensity stack.
    #[arg(long)]
    pub provenance: Option<PathBuf>,

    /// Projected label MIPS container.
    #[arg(long)]
    pub annotations: Option<PathBuf>,

    /// 3D label volume the annotations were projected from.
    #[arg(long)]
    pub labels: Option<PathBuf>,

    #[arg(long, default_value = "x,y,z")]
    pub axis_permute: AxisMap,

    #[command(flatten)]
    pub occlusion: OcclusionArgs,

    #[arg(long, default_value = "case")]
    pub case_id: String,

    /// Case list: `case_id intensity provenance annotations labels` per line.
    #[arg(long, conflicts_with_all = ["intensity", "provenance", "annotations", "labels"])]
    pub manifest: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted label MIPS container.
    #[arg(long)]
    pub pred: Option<PathBuf>,

    /// Ground-truth label MIPS container.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    #[arg(long, default_value = "case")]
    pub case_id: String,

    /// Case list: `case_id pred truth` per line.
    #[arg(long, conflicts_with_all = ["pred", "truth"])]
    pub manifest: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Phantom spec file.
    #[arg(long)]
    pub spec: PathBuf,

    /// Overrides the spec's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Write `.nii.gz` instead of `.nii`.
    #[arg(long)]
    pub gzip: bool,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: VolumeInput,

    /// Comma-separated MIP counts.
    #[arg(long, value_delimiter = ',', default_value = "16,32,48,64,80")]
    pub n: Vec<usize>,

    #[arg(long, value_enum, default_value_t = InterpArg::Linear)]
    pub interp: InterpArg,

    /// Timed repeats per count; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,

    #[command(flatten)]
    pub occlusion: OcclusionArgs,

    #[arg(long)]
    pub out: PathBuf,
}
