//! Command-line front end.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bitstream::{deserialize, serialize};
use crate::code::CompressedImage;
use crate::decoder::{decode, Decoded, Initial, DEFAULT_EPS, DEFAULT_MAX_ITER};
use crate::encoder::{encode_with_stats, EncoderConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{psnr, ratio_for, QualityReport};
use crate::pgm::{check_dimensions, read_image, write_atomic, write_image, GrayImage};
use crate::rifs::{
    connection_matrix, is_irreducible, segmented_orbit, stochastic_uniform, system_params,
    verify_contraction, RifsMap,
};

pub const THREADS_ENV: &str = "RIFS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "rifs", version, about = "Fractal image codec based on recurrent IFS with variable vertical contraction")]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compress a PGM image.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        encoder: EncoderArgs,
    },
    /// Reconstruct a PGM image from a stream.
    Decode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Check the invariants of a stream's maps.
    Verify {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw the attractor of a stream by chaos game or by iteration.
    Render {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = RenderMode::Chaos)]
        mode: RenderMode,
        #[arg(long, default_value_t = 1_000_000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Print `CT,PSNR,CR` for an original, its reconstruction and its stream.
    Report {
        original: PathBuf,
        decoded: PathBuf,
        stream: PathBuf,
        #[command(flatten)]
        encoder: EncoderArgs,
    },
}

#[derive(Args, Clone, Debug)]
pub struct EncoderArgs {
    #[arg(long, default_value_t = 32)]
    pub cell: u32,
    #[arg(long = "domain-factor", default_value_t = 2)]
    pub domain_factor: u32,
    /// Domain lattice stride in pixels (default: the domain side).
    #[arg(long)]
    pub stride: Option<u32>,
    #[arg(long, default_value_t = 8.0)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0.95)]
    pub dmax: f64,
    #[arg(long, default_value_t = 4)]
    pub delta: u32,
    #[arg(long = "max-depth", default_value_t = 3)]
    pub max_depth: u32,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub orientations: bool,
}

impl EncoderArgs {
    pub fn config(&self) -> EncoderConfig {
        EncoderConfig {
            region_cell: self.cell,
            domain_factor: self.domain_factor,
            domain_stride: self.stride,
            tolerance: self.tolerance,
            d_max: self.dmax,
            delta: self.delta,
            max_split_depth: self.max_depth,
            search_orientations: self.orientations,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct DecoderArgs {
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub iters: usize,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    /// Starting buffer: a constant intensity or a PGM path.
    #[arg(long, default_value = "128")]
    pub initial: String,
}

impl DecoderArgs {
    fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::Config("--iters must be at least 1".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config(format!("--eps must be non-negative, got {}", self.eps)));
        }
        Ok(())
    }

    fn initial(&self, width: u32, height: u32) -> Result<Initial> {
        if let Ok(v) = self.initial.parse::<f64>() {
            return Ok(Initial::Flat(v));
        }
        let img = read_image(Path::new(&self.initial))?;
        if (img.width, img.height) != (width, height) {
            return Err(Error::DimensionMismatch(format!(
                "initial buffer is {}x{}, stream is {width}x{height}",
                img.width, img.height
            )));
        }
        Ok(Initial::Buffer(img.to_image()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RenderMode {
    Chaos,
    Dia,
}

/// Configures the global rayon pool from `RIFS_THREADS`, if set.
pub fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    if n == 0 {
        return Err(Error::Config(format!("{THREADS_ENV} must be a positive integer")));
    }
    // A second initialisation in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: CliConfig) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Encode { input, output, encoder } => {
            let out = cmd_encode(&input, &output, &encoder.config())?;
            eprintln!(
                "encoded {}x{}: {} leaves, {} bytes, CR {:.1}:1, CT {:.2}s",
                out.width, out.height, out.leaves, out.bytes, out.report.cr, out.report.encode_seconds
            );
        }
        Command::Decode { input, output, decoder } => {
            let out = cmd_decode(&input, &output, &decoder)?;
            println!("iterations {} last_delta {:.6}", out.iterations, out.last_delta());
        }
        Command::Verify { input, seed } => {
            let report = cmd_verify(&input, seed)?;
            print!("{report}");
            if !report.passed() {
                return Err(Error::Malformed(format!("verification failed: {}", report.failures.join("; "))));
            }
        }
        Command::Render { input, output, mode, points, seed, decoder } => {
            cmd_render(&input, &output, mode, points, seed, &decoder)?;
        }
        Command::Report { original, decoded, stream, encoder } => {
            println!("{}", cmd_report(&original, &decoded, &stream, &encoder.config())?.csv_line());
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EncodeOutcome {
    pub width: u32,
    pub height: u32,
    pub leaves: usize,
    pub bytes: usize,
    pub report: QualityReport,
}

pub fn cmd_encode(input: &Path, output: &Path, config: &EncoderConfig) -> Result<EncodeOutcome> {
    config.validate()?;
    let original = read_image(input)?;
    let image = original.to_image();
    let start = Instant::now();
    let (code, _) = encode_with_stats(&image, config)?;
    let encode_seconds = start.elapsed().as_secs_f64();
    let bytes = serialize(&code)?;
    write_atomic(output, &bytes)?;
    Ok(EncodeOutcome {
        width: code.width,
        height: code.height,
        leaves: code.codes.len(),
        bytes: bytes.len(),
        report: QualityReport {
            psnr: f64::NAN,
            cr: ratio_for(code.width, code.height, bytes.len()),
            encode_seconds,
            decode_seconds: 0.0,
        },
    })
}

pub fn read_code(path: &Path) -> Result<CompressedImage> {
    deserialize(&fs::read(path)?)
}

pub fn cmd_decode(input: &Path, output: &Path, args: &DecoderArgs) -> Result<Decoded> {
    args.validate()?;
    let code = read_code(input)?;
    let initial = args.initial(code.width, code.height)?;
    let out = decode(&code, args.iters, args.eps, &initial)?;
    write_image(output, &GrayImage::new(code.width, code.height, out.to_gray8())?)?;
    Ok(out)
}

/// Outcome of the stream checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub maps: usize,
    pub join_up_max: f64,
    pub field_sup: f64,
    pub d_max: f64,
    pub theta: f64,
    pub a: f64,
    pub l_f: f64,
    pub s: f64,
    pub contraction_max: f64,
    pub connections: usize,
    pub empty_rows: usize,
    pub irreducible: bool,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "maps               {}", self.maps)?;
        writeln!(f, "join-up max error  {:.3e}", self.join_up_max)?;
        writeln!(f, "field sup |d|      {:.4} (d_max {:.2})", self.field_sup, self.d_max)?;
        writeln!(f, "metric             theta {:.4e}, a {:.4}, L_F {:.4}, s {:.4}", self.theta, self.a, self.l_f, self.s)?;
        writeln!(f, "sampled ratio max  {:.6}", self.contraction_max)?;
        writeln!(f, "connections        {} of {} (empty rows {})", self.connections, self.maps * self.maps, self.empty_rows)?;
        writeln!(f, "P irreducible      {}", if self.irreducible { "yes" } else { "no" })?;
        if self.failures.is_empty() {
            writeln!(f, "all checks passed")
        } else {
            for msg in &self.failures {
                writeln!(f, "FAILED: {msg}")?;
            }
            Ok(())
        }
    }
}

pub const JOIN_UP_TOLERANCE: f64 = 1e-9;
const CONTRACTION_TRIALS: usize = 256;

/// Runs every invariant check on an in-memory code. Irreducibility is
/// reported but not required.
pub fn verify_code(code: &CompressedImage, seed: u64) -> VerifyReport {
    let mut report = VerifyReport { d_max: code.params.d_max, ..Default::default() };
    if let Err(e) = code.params.validate() {
        report.failures.push(format!("parameters: {e}"));
    }
    report.field_sup = code.codes.iter().map(|c| c.field.sup_abs()).fold(0.0, f64::max);
    if report.field_sup > code.params.d_max + 1e-12 {
        report
            .failures
            .push(format!("field sample {:.4} exceeds d_max {:.2}", report.field_sup, code.params.d_max));
    }
    let maps = match code.maps() {
        Ok(m) => m,
        Err(e) => {
            report.failures.push(format!("maps: {e}"));
            return report;
        }
    };
    report.maps = maps.len();
    report.join_up_max = maps.iter().map(RifsMap::join_up_error).fold(0.0, f64::max);
    if report.join_up_max > JOIN_UP_TOLERANCE {
        report.failures.push(format!("join-up error {:.3e} exceeds {JOIN_UP_TOLERANCE:e}", report.join_up_max));
    }
    let params = system_params(&maps);
    report.theta = params.theta;
    report.a = params.a;
    report.l_f = params.l_f;
    report.s = params.s;
    report.contraction_max = maps
        .iter()
        .enumerate()
        .map(|(k, m)| verify_contraction(m, params.theta, CONTRACTION_TRIALS, seed.wrapping_add(k as u64)))
        .fold(0.0, f64::max);
    if report.contraction_max >= 1.0 {
        report.failures.push(format!("sampled contraction ratio {:.6} is not below 1", report.contraction_max));
    }
    let c = connection_matrix(&maps);
    report.connections = c.iter().flatten().filter(|&&v| v != 0).count();
    report.empty_rows = c.iter().filter(|row| row.iter().all(|&v| v == 0)).count();
    report.irreducible = match stochastic_uniform(&c) {
        Ok(p) => is_irreducible(&p),
        Err(_) => false,
    };
    report
}

pub fn cmd_verify(input: &Path, seed: u64) -> Result<VerifyReport> {
    Ok(verify_code(&read_code(input)?, seed))
}

pub const CHAOS_BURN_IN: usize = 100;
pub const CHAOS_SEGMENT: usize = 100;

/// Rasterises a chaos-game orbit (see [`segmented_orbit`]): each pixel
/// holds the mean height of the orbit points rounding to it, or 0 if none
/// does. Returns the raster and
/// the per-pixel hit counts.
pub fn chaos_raster(code: &CompressedImage, points: usize, seed: u64) -> Result<(Image, Vec<u32>)> {
    let (w, h) = (code.width, code.height);
    let mut sum = Image::new(w, h, 0.0);
    let mut hits = vec![0u32; w as usize * h as usize];
    if points == 0 {
        return Ok((sum, hits));
    }
    let maps = code.maps()?;
    let orbit = segmented_orbit(&maps, points, CHAOS_BURN_IN, CHAOS_SEGMENT, seed)?;
    for [x, y, z] in orbit {
        let (px, py) = (x.round(), y.round());
        if px < 0.0 || py < 0.0 || px >= f64::from(w) || py >= f64::from(h) {
            continue;
        }
        let i = sum.index(px as u32, py as u32);
        sum.data_mut()[i] += z;
        hits[i] += 1;
    }
    for (v, &n) in sum.data_mut().iter_mut().zip(&hits) {
        if n > 0 {
            *v /= f64::from(n);
        }
    }
    Ok((sum, hits))
}

pub fn cmd_render(
    input: &Path,
    output: &Path,
    mode: RenderMode,
    points: usize,
    seed: u64,
    decoder: &DecoderArgs,
) -> Result<()> {
    match mode {
        RenderMode::Dia => cmd_decode(input, output, decoder).map(|_| ()),
        RenderMode::Chaos => {
            let code = read_code(input)?;
            let (raster, _) = chaos_raster(&code, points, seed)?;
            write_image(output, &GrayImage::from_image(&raster))
        }
    }
}

/// Quality row for an original, its reconstruction and the stream. CT is
/// measured by re-encoding the original with `config`; decode time by
/// decoding the stream with default settings.
pub fn cmd_report(original: &Path, decoded: &Path, stream: &Path, config: &EncoderConfig) -> Result<QualityReport> {
    config.validate()?;
    let a = read_image(original)?;
    let b = read_image(decoded)?;
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::DimensionMismatch(format!(
            "original is {}x{}, decoded is {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let bytes = fs::read(stream)?;
    let code = deserialize(&bytes)?;
    check_dimensions(code.width, code.height)?;
    let start = Instant::now();
    encode_with_stats(&a.to_image(), config)?;
    let encode_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    decode(&code, DEFAULT_MAX_ITER, DEFAULT_EPS, &Initial::default())?;
    let decode_seconds = start.elapsed().as_secs_f64();
    Ok(QualityReport {
        psnr: psnr(&a.pixels, &b.pixels)?,
        cr: ratio_for(code.width, code.height, bytes.len()),
        encode_seconds,
        decode_seconds,
    })
}
