use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mgsp", version, about = "Multilayer graph signal processing for multi-frame images")]
pub struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true, env = "MLG_SEED", default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress an RGB image by spectral sampling and report error curves.
    Compress(CompressArgs),
    /// Detect edges with MLG window smoothing and baseline operators.
    Edges(EdgesArgs),
    /// Segment a hyperspectral cube.
    Segment(SegmentArgs),
    /// Inspect MLG spectra.
    Spectra {
        #[command(subcommand)]
        action: SpectraAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum SpectraAction {
    /// Write HOSVD and CP bases, values, core and flattened eigenpairs.
    Dump(DumpArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    BlockWise,
    LayerWise,
    EntityWise,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderingArg {
    CoefficientEnergy,
    SpectralValue,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// RGB image (PNG or PPM).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "mln-eig,mln-hosvd,gft,gft2")]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "1.0,0.75,0.5,0.25")]
    pub fractions: Vec<f64>,
    #[arg(long, value_enum, default_value_t = DirectionArg::BlockWise)]
    pub direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = OrderingArg::CoefficientEnergy)]
    pub ordering: OrderingArg,
    /// Fixed block height P for block-wise sampling (searched when absent).
    #[arg(long)]
    pub block_layers: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub cp_iters: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    C1,
    C2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BorderArg {
    Replicate,
    Zero,
}

#[derive(Debug, Args)]
pub struct EdgesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Window side (odd).
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Kernel whose difference field is written to CSV.
    #[arg(long, value_enum, default_value_t = KernelArg::C1)]
    pub kernel: KernelArg,
    /// `percentile:P`, `fixed:T` or `otsu`.
    #[arg(long, default_value = "percentile:95")]
    pub threshold: String,
    #[arg(long)]
    pub no_dc_normalize: bool,
    #[arg(long, value_enum, default_value_t = BorderArg::Replicate)]
    pub border: BorderArg,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Cube: ENVI header (`.hdr`) or CSV.
    #[arg(long)]
    pub cube: PathBuf,
    /// ENVI binary file when it is not next to the header.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Ground-truth label CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Layer count.
    #[arg(long = "M", default_value_t = 10)]
    pub layers: usize,
    /// Superpixel count.
    #[arg(long = "N", default_value_t = 100)]
    pub superpixels: usize,
    /// Segment count.
    #[arg(long = "Q")]
    pub segments: usize,
    /// Boundary tolerance in pixels.
    #[arg(long, default_value_t = 1)]
    pub tol: usize,
    #[arg(long, default_value_t = 0.1)]
    pub compactness: f64,
    #[arg(long, default_value_t = 8)]
    pub knn: usize,
    #[arg(long)]
    pub sigma_intra: Option<f64>,
    #[arg(long)]
    pub sigma_inter: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RepresentationArg {
    Adjacency,
    Laplacian,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// MLG4 binary dump or `M N` edge list.
    #[arg(long)]
    pub mlg: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Representation used for edge-list input; binary dumps are taken as is.
    #[arg(long, value_enum, default_value_t = RepresentationArg::Adjacency)]
    pub representation: RepresentationArg,
    #[arg(long, default_value_t = 100)]
    pub cp_iters: usize,
}
