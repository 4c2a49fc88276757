//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or container format error,
//! 3 validation failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use lutsr_core::color::{Image, RgbImage};
use lutsr_core::eas::{cached_forward, compress_pack, resample_uniform, DEFAULT_EPSILON};
use lutsr_core::engine::{forward, LutPack};
use lutsr_core::metrics::{receptive_field, storage_report};
use lutsr_core::model::{ModelDescriptor, Variant};
use lutsr_core::reference::make_reference_net;
use lutsr_core::tensor::ImagePlane;
use lutsr_core::transfer::transfer_model;
use serde::Serialize;
use thiserror::Error;

use crate::bench::{bench, random_image};
use crate::degrade::{degrade, Degradation, DegradeError};
use crate::eval::{evaluate, EvalError, Metric};
use crate::imageio::{load_image, save_image, ImageIoError};
use crate::lutpack::{self, LoadError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lutsr", version, about = "Lookup-table image restoration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a seeded reference model and tabulate it into a stride-1 pack.
    Transfer {
        #[arg(long)]
        seed: u64,
        /// S, M, L or custom
        #[arg(long)]
        variant: Variant,
        /// Shift blocks for the custom variant
        #[arg(long)]
        blocks: Option<u8>,
        #[arg(long, default_value_t = 16)]
        channels: u16,
        #[arg(long, default_value_t = 4)]
        scale: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subsample the tables of a stride-1 pack.
    Compress {
        #[arg(long = "in")]
        input: PathBuf,
        /// Error tolerance for the per-table stride search
        #[arg(long, conflicts_with = "uniform")]
        eps: Option<f64>,
        /// Use one fixed stride for every table instead of searching
        #[arg(long)]
        uniform: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Restore an image. RGB inputs are processed per channel.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Interpolate on every lookup instead of reading prebuilt buffers
        #[arg(long)]
        no_cache: bool,
    },
    /// Score restored images against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "psnr,ssim,psnrb")]
        metrics: Vec<Metric>,
        #[arg(long)]
        json: bool,
    },
    /// Produce a degraded copy of an image.
    Degrade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// bicubic:<factor> or gauss:<sigma>
        #[arg(long)]
        mode: Degradation,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the receptive field of a variant.
    Rf {
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        blocks: Option<u8>,
    },
    /// Time the interpolated and cached paths on a random image.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "320x180", value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long, default_value_t = 3)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Describe a pack.
    Inspect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.parse().map_err(|e| format!("bad width: {e}"))?;
    let h: usize = h.parse().map_err(|e| format!("bad height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("size must be non-zero".into());
    }
    Ok((w, h))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Pack(#[from] LoadError),
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Degrade(#[from] DegradeError),
    #[error(transparent)]
    Core(#[from] lutsr_core::Error),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Pack(LoadError::Io { .. }) => EXIT_IO,
            CliError::Pack(LoadError::Format { source, .. }) => {
                if source.is_structural() {
                    EXIT_IO
                } else {
                    EXIT_INVALID
                }
            }
            CliError::Image(_) | CliError::Output(_) => EXIT_IO,
            CliError::Eval(EvalError::Image(_) | EvalError::Io { .. }) => EXIT_IO,
            CliError::Eval(_) => EXIT_INVALID,
            CliError::Degrade(_) | CliError::Core(_) => EXIT_INVALID,
        }
    }
}

fn descriptor(variant: Variant, blocks: Option<u8>, channels: u16, scale: u8) -> Result<ModelDescriptor, CliError> {
    match (variant, blocks) {
        (Variant::Custom, Some(n)) => Ok(ModelDescriptor::custom(variant, n, channels, scale)?),
        (Variant::Custom, None) => Err(CliError::Usage("--variant custom needs --blocks".into())),
        (_, Some(_)) => Err(CliError::Usage("--blocks only applies to --variant custom".into())),
        (_, None) => Ok(ModelDescriptor::new(variant, channels, scale)?),
    }
}

/// Restore one plane, with or without the query buffers.
pub fn restore_plane(pack: &LutPack, img: &ImagePlane, cache: bool) -> lutsr_core::Result<ImagePlane> {
    if cache {
        cached_forward(pack, img)
    } else {
        forward(pack, img)
    }
}

pub fn restore(pack: &LutPack, img: &Image, cache: bool) -> lutsr_core::Result<Image> {
    match img {
        Image::Gray(p) => restore_plane(pack, p, cache).map(Image::Gray),
        Image::Rgb(p) => {
            let [r, g, b] = p.planes();
            let [r, g, b] = [
                restore_plane(pack, &r, cache)?,
                restore_plane(pack, &g, cache)?,
                restore_plane(pack, &b, cache)?,
            ];
            RgbImage::from_planes([&r, &g, &b]).map(Image::Rgb)
        }
    }
}

#[derive(Serialize)]
struct InspectReport {
    variant: String,
    n_blocks: u8,
    channels: u16,
    scale: u8,
    msb_bits: u8,
    lsb_bits: u8,
    index_bits: u8,
    residual_flags: u32,
    shifts: Vec<Vec<(i8, i8)>>,
    eas_epsilon: Option<f32>,
    receptive_field: String,
    tables: usize,
    strides: Vec<(u32, usize)>,
    entry_bytes: usize,
    table_bytes: usize,
    file_bytes: usize,
    stride1_table_bytes: usize,
    ratio: f64,
}

fn inspect(pack: &LutPack) -> InspectReport {
    let d = pack.descriptor();
    let s = storage_report(pack);
    let (w, h) = receptive_field(d);
    InspectReport {
        variant: d.variant.to_string(),
        n_blocks: d.n_blocks,
        channels: d.channels,
        scale: d.scale,
        msb_bits: d.bit_split.msb_bits(),
        lsb_bits: d.bit_split.lsb_bits(),
        index_bits: d.index_bits,
        residual_flags: d.residual_flags,
        shifts: d.shift_tables.iter().map(|t| t.offsets().to_vec()).collect(),
        eas_epsilon: pack.eas_epsilon(),
        receptive_field: format!("{w}x{h}"),
        tables: pack.tables().len(),
        strides: s.stride_histogram(),
        entry_bytes: s.entry_bytes(),
        table_bytes: s.total_bytes(),
        file_bytes: s.total_bytes() + lutpack::overhead_bytes(d),
        stride1_table_bytes: s.dense_total_bytes(),
        ratio: s.ratio(),
    }
}

fn print_inspect(out: &mut dyn Write, r: &InspectReport) -> std::io::Result<()> {
    writeln!(out, "variant          {} ({} shift blocks)", r.variant, r.n_blocks)?;
    writeln!(out, "channels         {}", r.channels)?;
    writeln!(out, "scale            x{}", r.scale)?;
    writeln!(out, "bit split        {}/{}", r.msb_bits, r.lsb_bits)?;
    writeln!(out, "index bits       {}", r.index_bits)?;
    writeln!(out, "residual flags   {:#x}", r.residual_flags)?;
    for (b, s) in r.shifts.iter().enumerate() {
        writeln!(out, "shifts[{b}]        {s:?}")?;
    }
    match r.eas_epsilon {
        Some(e) => writeln!(out, "eas epsilon      {e}")?,
        None => writeln!(out, "eas epsilon      none")?,
    }
    writeln!(out, "receptive field  {}", r.receptive_field)?;
    writeln!(out, "tables           {}", r.tables)?;
    for (s, n) in &r.strides {
        writeln!(out, "  stride {s:<3}     {n}")?;
    }
    writeln!(out, "entry bytes      {}", r.entry_bytes)?;
    writeln!(
        out,
        "table bytes      {} (stride 1: {})",
        r.table_bytes, r.stride1_table_bytes
    )?;
    writeln!(out, "file bytes       {}", r.file_bytes)?;
    writeln!(out, "ratio            {:.4}", r.ratio)
}

fn json(out: &mut dyn Write, v: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, v).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

pub fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Transfer {
            seed,
            variant,
            blocks,
            channels,
            scale,
            out: path,
        } => {
            let d = descriptor(variant, blocks, channels, scale)?;
            let net = make_reference_net(&d, seed)?;
            let pack = transfer_model(&net)?;
            lutpack::save(&pack, &path)?;
            writeln!(
                out,
                "wrote {}: {} tables, reference checksum {:#018x}",
                path.display(),
                pack.tables().len(),
                net.checksum()
            )?;
        }
        Command::Compress {
            input,
            eps,
            uniform,
            out: path,
        } => {
            let pack = lutpack::load(&input)?;
            let packed = match uniform {
                Some(s) => {
                    writeln!(out, "uniform stride {s}")?;
                    resample_uniform(&pack, s)?
                }
                None => {
                    let e = eps.unwrap_or(DEFAULT_EPSILON);
                    if !(e > 0.0 && e.is_finite()) {
                        return Err(CliError::Usage(format!("--eps must be positive, got {e}")));
                    }
                    writeln!(out, "eps {e}")?;
                    compress_pack(&pack, e)?
                }
            };
            let before = storage_report(&pack);
            let after = storage_report(&packed);
            lutpack::save(&packed, &path)?;
            writeln!(
                out,
                "wrote {}: {} -> {} entry bytes, ratio {:.4}",
                path.display(),
                before.entry_bytes(),
                after.entry_bytes(),
                after.total_bytes() as f64 / before.total_bytes() as f64
            )?;
        }
        Command::Infer {
            model,
            input,
            output,
            no_cache,
        } => {
            let pack = lutpack::load(&model)?;
            let img = load_image(&input)?;
            let restored = restore(&pack, &img, !no_cache)?;
            save_image(&restored, &output)?;
        }
        Command::Eval {
            pred,
            gt,
            metrics,
            json: as_json,
        } => {
            if metrics.is_empty() {
                return Err(CliError::Usage("no metrics requested".into()));
            }
            let report = evaluate(&pred, &gt, &metrics)?;
            if as_json {
                json(out, &report)?;
            } else {
                write!(out, "{report}")?;
            }
        }
        Command::Degrade {
            input,
            output,
            mode,
            seed,
        } => {
            let img = load_image(&input)?;
            save_image(&degrade(&img, mode, seed)?, &output)?;
        }
        Command::Rf { variant, blocks } => {
            let d = descriptor(variant, blocks, 1, 1)?;
            let (w, h) = receptive_field(&d);
            writeln!(out, "{w}x{h}")?;
        }
        Command::Bench {
            model,
            size: (w, h),
            iters,
            seed,
            json: as_json,
        } => {
            let pack = lutpack::load(&model)?;
            let report = bench(&pack, &random_image(w, h, seed), iters)?;
            if as_json {
                json(out, &report)?;
            } else {
                writeln!(
                    out,
                    "{}x{} input, {} tables ({} subsampled), best of {}",
                    report.width, report.height, report.tables, report.subsampled_tables, report.iterations
                )?;
                for p in &report.paths {
                    writeln!(out, "{:?}: {:.3} ms", p.path, p.best_ms)?;
                    for (name, ms) in &p.stages_ms {
                        writeln!(out, "  {name:<20} {ms:.3} ms")?;
                    }
                    writeln!(out, "  queries {}  reads {}  arith {}", p.queries, p.reads, p.arith)?;
                }
                writeln!(out, "speedup {:.2}x", report.speedup)?;
            }
        }
        Command::Inspect { model, json: as_json } => {
            let pack = lutpack::load(&model)?;
            let report = inspect(&pack);
            if as_json {
                json(out, &report)?;
            } else {
                print_inspect(out, &report)?;
            }
        }
    }
    Ok(())
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
