use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hoi_points::{EvalSetting, GroupingMode};

#[derive(Debug, Parser)]
#[command(name = "hoipt", version, about = "Interaction-point HOI pipeline: encode, decode, group, loss, eval, synth, bench")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Config file plus per-field overrides; flags win over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Image pixels per grid cell
    #[arg(long, global = true)]
    pub stride: Option<u32>,
    /// Gaussian standard deviation in grid cells
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Peaks kept per image
    #[arg(long, global = true)]
    pub topk: Option<usize>,
    #[arg(long, global = true)]
    pub h_tau: Option<f64>,
    #[arg(long, global = true)]
    pub o_tau: Option<f64>,
    #[arg(long, global = true)]
    pub a_tau: Option<f64>,
    /// Corner-distance ceiling in grid cells
    #[arg(long, global = true)]
    pub d_tau: Option<f64>,
    /// full, angle_only, angle_plus_ratio, box_only or box_plus_corner
    #[arg(long, global = true)]
    pub mode: Option<GroupingMode>,
    /// default or known_object
    #[arg(long, global = true)]
    pub setting: Option<EvalSetting>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-image work (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground-truth triplets -> per-image point, vector and mask tensors
    Encode {
        #[arg(long)]
        gt: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Tensor directory -> interaction candidates
    Decode {
        /// Directory written by `encode` (or a model with the same layout)
        #[arg(long)]
        tensors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Candidates + detections -> scored triplets
    Group {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predicted vs target tensors -> loss report
    Loss {
        #[arg(long)]
        pred_points: PathBuf,
        #[arg(long)]
        target_points: PathBuf,
        #[arg(long)]
        pred_vectors: PathBuf,
        #[arg(long)]
        target_vectors: PathBuf,
        /// Supervision mask written by `encode`
        #[arg(long)]
        mask: PathBuf,
        /// Report path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Triplets + ground truth -> role mAP report
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Report path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded synthetic scenes with ground truth, detections and tensors
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        #[arg(long, default_value_t = 2)]
        humans: usize,
        #[arg(long, default_value_t = 2)]
        objects: usize,
        /// Defaults to the configured action list, or 2
        #[arg(long)]
        actions: Option<usize>,
        #[arg(long, default_value_t = 0)]
        distractors: usize,
    },
    /// Times grouping on a random instance
    Bench {
        #[arg(long, default_value_t = 20)]
        humans: usize,
        #[arg(long, default_value_t = 20)]
        objects: usize,
        #[arg(long, default_value_t = 50)]
        candidates: usize,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Report path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
