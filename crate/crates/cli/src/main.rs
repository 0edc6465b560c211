use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use krylov_denoise::dibr::{warp_guide, DepthMap, WarpDirection, WarpParams};
use krylov_denoise::filters::{filter_normalized, FilterKind, FilterSpec};
use krylov_denoise::graph::normalized_laplacian;
use krylov_denoise::image::{HoleMask, ImageGray};
use krylov_denoise::oracle::{dense_eig, measure_response};
use krylov_denoise::pipeline::{self, add_gaussian_noise, fmt_db, psnr, NoiseSpec, DEFAULT_PATCH_SIZE};
use krylov_denoise::pnm::{self, Pgm};
use krylov_denoise::scene::{self, SceneMeta};
use krylov_denoise::{build_graph, WeightParams};

/// Largest graph accepted by `spectral-response`.
const RESPONSE_MAX_SIDE: usize = 32;

#[derive(Parser)]
#[command(name = "kdenoise", version, about = "Depth-guided graph denoising of stereo views")]
struct Cli {
    /// Worker threads (0 = all cores). Output does not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic stereo scene: left.pgm, right.pgm, depth.pgm, scene.meta.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Warp the high-quality view into the target view: guide.pgm, mask.pbm.
    Warp {
        /// High-quality source view (PGM).
        #[arg(long)]
        source: PathBuf,
        /// Disparity levels of the target view (8- or 16-bit PGM).
        #[arg(long)]
        depth: PathBuf,
        /// Pixels per depth level. Read from --meta when omitted.
        #[arg(long)]
        scale: Option<f64>,
        /// left_to_right or right_to_left. Read from --meta when omitted.
        #[arg(long)]
        direction: Option<String>,
        /// scene.meta providing scale and direction.
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Denoise a view guided by a warped view: denoised.pgm, report.csv, report.txt.
    Denoise(DenoiseArgs),
    /// PSNR between two PGM images (peak 255), 2 decimals or `inf`.
    Psnr { a: PathBuf, b: PathBuf },
    /// Measured spectral response of a filter on one small patch graph, as CSV.
    SpectralResponse(ResponseArgs),
}

#[derive(Args)]
struct FilterArgs {
    /// jbf, gbjbf, poly, cheb, cg or cg0.
    #[arg(long, default_value = "cg")]
    filter: String,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Stop-band start for cheb.
    #[arg(long, default_value_t = 0.5)]
    l: f64,
    /// Regularization for gbjbf and poly.
    #[arg(long, default_value_t = 2.0)]
    rho: f64,
    /// Range kernel width of the edge weights.
    #[arg(long, default_value_t = 10.0)]
    sigma_r: f64,
    /// Solve gbjbf through the dense eigendecomposition.
    #[arg(long)]
    oracle: bool,
}

impl FilterArgs {
    fn spec(&self) -> Result<(FilterSpec, WeightParams), CliError> {
        let kind: FilterKind = self.filter.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
        let spec = FilterSpec::new(kind)
            .with_k(self.k)
            .with_stop_band(self.l)
            .with_rho(self.rho)
            .with_oracle(self.oracle);
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let weights = WeightParams::new(self.sigma_r, 1.0).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok((spec, weights))
    }
}

#[derive(Args)]
struct DenoiseArgs {
    /// Noisy target view.
    #[arg(long, conflicts_with_all = ["clean", "sigma", "seed"], required_unless_present = "clean")]
    noisy: Option<PathBuf>,
    /// Clean target view; noise is added with --sigma and --seed.
    #[arg(long, requires = "sigma")]
    clean: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Warped guide view.
    #[arg(long)]
    guide: PathBuf,
    /// Hole mask (PBM). No holes when omitted.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    patch: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ResponseArgs {
    #[arg(long)]
    guide: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Probe signal image; the guide itself when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Window `x,y,w,h` cut from all images before building the graph.
    #[arg(long, value_parser = parse_window)]
    crop: Option<(usize, usize, usize, usize)>,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long)]
    out: PathBuf,
}

fn parse_window(s: &str) -> Result<(usize, usize, usize, usize), String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("expected x,y,w,h: {e}"))?;
    match v[..] {
        [x, y, w, h] if w > 0 && h > 0 => Ok((x, y, w, h)),
        _ => Err("expected x,y,w,h with positive w and h".into()),
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<krylov_denoise::Error> for CliError {
    fn from(e: krylov_denoise::Error) -> Self {
        use krylov_denoise::Error as E;
        match e {
            E::InvalidParameter(_) => CliError::Usage(e.to_string()),
            E::DimensionMismatch { .. } | E::Format { .. } | E::Io(_) => CliError::Io(e.to_string()),
            E::DenseLimit { .. } | E::NoConvergence { .. } | E::ZeroSignal => CliError::Numeric(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_pgm(path: &Path) -> Result<Pgm, CliError> {
    pnm::decode_pgm(&read(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_image(path: &Path) -> Result<ImageGray, CliError> {
    Ok(read_pgm(path)?.to_image()?)
}

fn read_mask(path: Option<&Path>, like: &ImageGray) -> Result<HoleMask, CliError> {
    let mask = match path {
        Some(p) => pnm::decode_pbm(&read(p)?).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => HoleMask::empty(like.width(), like.height())?,
    };
    mask.matches(like)?;
    Ok(mask)
}

/// Writes all files through temporaries in the target directory, renaming
/// each into place only after every file has been written.
fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), CliError> {
    let io = |what: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", what.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(dir, e))?;
        tmp.write_all(bytes).map_err(|e| io(tmp.path(), e))?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in staged {
        tmp.persist(&dest).map_err(|e| io(&dest, e.error))?;
    }
    Ok(())
}

fn write_one(path: &Path, bytes: Vec<u8>) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Usage(format!("{}: not a file path", path.display())))?;
    write_all(dir, &[(name, bytes)])
}

fn cmd_synth(out_dir: &Path, seed: u64) -> Result<(), CliError> {
    let s = scene::synthesize(seed);
    let depth = Pgm {
        width: s.meta.width,
        height: s.meta.height,
        maxval: u16::MAX,
        samples: s.depth_levels.clone(),
    };
    write_all(
        out_dir,
        &[
            ("left.pgm", pnm::encode_gray8(&s.left)),
            ("right.pgm", pnm::encode_gray8(&s.right)),
            ("depth.pgm", pnm::encode_pgm(&depth)?),
            ("scene.meta", s.meta.to_text().into_bytes()),
        ],
    )
}

fn cmd_warp(
    source: &Path,
    depth: &Path,
    scale: Option<f64>,
    direction: Option<&str>,
    meta: Option<&Path>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let meta = match meta {
        Some(p) => {
            let text = String::from_utf8(read(p)?).map_err(|_| CliError::Io(format!("{}: not UTF-8", p.display())))?;
            Some(SceneMeta::parse(&text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let scale = scale
        .or(meta.as_ref().map(|m| m.disparity_scale))
        .ok_or_else(|| CliError::Usage("--scale or --meta is required".into()))?;
    let direction = match direction {
        Some(d) => WarpDirection::parse(d).map_err(|e| CliError::Usage(e.to_string()))?,
        None => meta.as_ref().map_or(WarpDirection::LeftToRight, |m| m.direction),
    };
    let params = WarpParams::new(scale, direction).map_err(|e| CliError::Usage(e.to_string()))?;
    let src = read_image(source)?;
    let d = read_pgm(depth)?;
    let depth = DepthMap::from_levels(d.width, d.height, &d.samples)?;
    let r = warp_guide(&src, &depth, &params)?;
    eprintln!(
        "holes: {} out of range, {} occluded; phases 0/.25/.5/.75: {:?}",
        r.stats.out_of_range, r.stats.occluded, r.stats.phase_counts
    );
    write_all(
        out_dir,
        &[
            ("guide.pgm", pnm::encode_gray8(&r.guide)),
            ("mask.pbm", pnm::encode_pbm(&r.mask)),
        ],
    )
}

fn cmd_denoise(a: &DenoiseArgs) -> Result<(), CliError> {
    let (spec, weights) = a.filter.spec()?;
    let guide = read_image(&a.guide)?;
    let mask = read_mask(a.mask.as_deref(), &guide)?;
    let (noisy, clean, noise) = match (&a.noisy, &a.clean) {
        (Some(p), _) => (read_image(p)?, None, None),
        (None, Some(p)) => {
            let clean = read_image(p)?;
            let sigma = a
                .sigma
                .ok_or_else(|| CliError::Usage("--clean requires --sigma".into()))?;
            let noise = NoiseSpec { sigma, seed: a.seed };
            let noisy = add_gaussian_noise(&clean, &noise).map_err(|e| CliError::Usage(e.to_string()))?;
            (noisy, Some(clean), Some(noise))
        }
        (None, None) => return Err(CliError::Usage("--noisy or --clean is required".into())),
    };
    let (out, mut report) = pipeline::denoise(&noisy, &guide, &mask, &spec, &weights, a.patch)?;
    report.noise = noise;
    if let Some(clean) = &clean {
        report.evaluate(clean, &noisy, &out)?;
    }
    eprintln!(
        "{} patches in {:.3} s of filtering",
        report.patch_count,
        report.total_time().as_secs_f64()
    );
    let mut files = vec![
        ("denoised.pgm", pnm::encode_gray8(&out)),
        ("report.csv", report.to_csv().into_bytes()),
        ("report.txt", report.to_text().into_bytes()),
    ];
    if clean.is_some() {
        files.push(("noisy.pgm", pnm::encode_gray8(&noisy)));
    }
    write_all(&a.out_dir, &files)?;
    print!("{}", report.to_text());
    Ok(())
}

fn cmd_psnr(a: &Path, b: &Path) -> Result<(), CliError> {
    let v = psnr(&read_image(a)?, &read_image(b)?, 255.0)?;
    println!("{}", fmt_db(v, 2));
    Ok(())
}

fn cmd_spectral_response(a: &ResponseArgs) -> Result<(), CliError> {
    let (spec, weights) = a.filter.spec()?;
    let mut guide = read_image(&a.guide)?;
    let mut mask = read_mask(a.mask.as_deref(), &guide)?;
    let mut input = match &a.input {
        Some(p) => read_image(p)?,
        None => guide.clone(),
    };
    input.ensure_same_dims(guide.width(), guide.height(), "input vs guide")?;
    if let Some((x, y, w, h)) = a.crop {
        guide = guide.crop(x, y, w, h)?;
        mask = mask.crop(x, y, w, h)?;
        input = input.crop(x, y, w, h)?;
    }
    if guide.width() > RESPONSE_MAX_SIDE || guide.height() > RESPONSE_MAX_SIDE {
        return Err(CliError::Usage(format!(
            "graph is {}x{}; at most {RESPONSE_MAX_SIDE}x{RESPONSE_MAX_SIDE} (use --crop)",
            guide.width(),
            guide.height()
        )));
    }
    let g = build_graph(&guide, &mask, &weights)?;
    let l = normalized_laplacian(&g);
    let eig = dense_eig(&l)?;
    let b = g.normalize_signal(input.samples())?;
    let response = measure_response(|x| filter_normalized(&spec, &l, x), &eig, &b)?;
    write_one(&a.out, response.to_csv().into_bytes())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth { out_dir, seed } => cmd_synth(out_dir, *seed),
        Command::Warp {
            source,
            depth,
            scale,
            direction,
            meta,
            out_dir,
        } => cmd_warp(source, depth, *scale, direction.as_deref(), meta.as_deref(), out_dir),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Psnr { a, b } => cmd_psnr(a, b),
        Command::SpectralResponse(a) => cmd_spectral_response(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdenoise: {e}");
            ExitCode::from(e.code())
        }
    }
}
