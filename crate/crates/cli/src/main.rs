//! `minkvox`: generate voxel volumes, analyze them, run convergence sweeps
//! and estimate fiber orientation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde_json::json;
use clap::{Args, Parser, Subcommand, ValueEnum};
use minkvox_core::analytic::FiberSpec;
use minkvox_core::fiberorient::{orientation_error, structure_tensor_orientation, DEFAULT_MASK_REL};
use minkvox_core::io::{self, load_volume, store_volume, Dtype};
use minkvox_core::minkowski::{analyze, DEFAULT_EPS_REL};
use minkvox_core::study::{convergence_csv, place_fibers, run_convergence, ConvergenceStudy, StudyShape};
use minkvox_core::study::DEFAULT_DISPLACEMENT;
use minkvox_core::vec3::{normalized, Vec3};
use minkvox_core::voxelgrid::{box_lengths, voxelize};
use minkvox_core::{Error, Kernel, Scheme, ShapeSpec, SymTensor3};

const THREADS_VAR: &str = "MINKVOX_THREADS";

#[derive(Parser)]
#[command(name = "minkvox", version, about = "Minkowski tensors of 3D gray-value voxel images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize a test shape and write it as a raw volume with a JSON sidecar.
    Generate(GenerateArgs),
    /// Compute V, S, W, QNT and the eigenvalue ratio of a volume.
    Analyze(AnalyzeArgs),
    /// Sweep resolution, gray-value depth and filter against closed-form values.
    Convergence(ConvergenceArgs),
    /// Estimate the fiber-orientation tensor with the structure-tensor method.
    FiberOrient(FiberOrientArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeKind {
    Ball,
    Cylinder,
    Laminate,
    FiberArray,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyKind {
    Ball,
    Cylinder,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    shape: ShapeKind,
    /// Grid size, `n` or `nx,ny,nz` (ignored for fiber arrays).
    #[arg(long, value_parser = parse_dims)]
    dims: Option<[usize; 3]>,
    /// Voxel edge length in µm.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Gray-value depth p; 1 is binary.
    #[arg(long, default_value_t = 1)]
    depth: u32,
    /// Payload sample type; defaults to the smallest one that holds the depth.
    #[arg(long, value_parser = parse_dtype)]
    dtype: Option<Dtype>,
    /// Shape center `x,y,z` in µm; defaults to the box center.
    #[arg(long, value_parser = parse_vec3)]
    center: Option<Vec3>,
    #[arg(long)]
    diameter: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    /// Cylinder axis `x,y,z`; normalized before use.
    #[arg(long, value_parser = parse_vec3, default_value = "1,0,0")]
    axis: Vec3,
    /// Laminate normal axis: 0, 1 or 2.
    #[arg(long, default_value_t = 2)]
    normal_axis: usize,
    /// Laminate slab `lo,hi` in µm along the normal axis; repeatable.
    #[arg(long = "slab", value_parser = parse_pair)]
    slabs: Vec<(f64, f64)>,
    /// Fiber axes `x,y,z;x,y,z;...`, one fiber per entry.
    #[arg(long, value_delimiter = ';', value_parser = parse_vec3)]
    axes: Vec<Vec3>,
    /// Fiber lattice `cx,cy,cz`; defaults to one row of cells along y.
    #[arg(long, value_parser = parse_dims)]
    cells: Option<[usize; 3]>,
    /// Clearance between neighboring fibers in µm; defaults to one diameter.
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Smoothing kernel: none, ball or gaussian.
    #[arg(long, default_value = "ball")]
    kernel: String,
    /// Kernel width in voxel lengths.
    #[arg(long, default_value_t = 1.2)]
    sigma: f64,
}

impl FilterArgs {
    fn kernel(&self) -> Result<Kernel, Error> {
        Kernel::from_name(&self.kernel, Some(self.sigma))
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    input: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, value_parser = parse_scheme, default_value = "central")]
    scheme: Scheme,
    #[arg(long, default_value_t = DEFAULT_EPS_REL)]
    eps_rel: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long, value_enum, default_value = "ball")]
    shape: StudyKind,
    /// Body diameter D in µm.
    #[arg(long, default_value_t = 16.0)]
    diameter: f64,
    /// Cylinder L/D.
    #[arg(long, default_value_t = 10.0)]
    aspect: f64,
    /// Offset of the body from the box center, `x,y,z` in voxels.
    #[arg(long, value_parser = parse_vec3)]
    displacement: Option<Vec3>,
    /// Resolutions D/h.
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,12,16")]
    resolutions: Vec<f64>,
    /// Gray-value depths p.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    depths: Vec<u32>,
    /// Kernels as `none`, `ball:<sigma>` or `gaussian:<sigma>`.
    #[arg(long, value_delimiter = ',', value_parser = parse_kernel, default_value = "none,ball:1.2")]
    kernels: Vec<Kernel>,
    #[arg(long, value_parser = parse_scheme, default_value = "central")]
    scheme: Scheme,
    #[arg(long, default_value_t = DEFAULT_EPS_REL)]
    eps_rel: f64,
    /// Leave the wall-time column empty so the table is byte-stable.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FiberOrientArgs {
    input: PathBuf,
    /// First smoothing kernel: none, ball or gaussian.
    #[arg(long, default_value = "ball")]
    first_kernel: String,
    #[arg(long, default_value_t = 1.2)]
    sigma: f64,
    /// Second smoothing kernel, applied to the structure tensor.
    #[arg(long, default_value = "gaussian")]
    second_kernel: String,
    /// Width of the second kernel in voxel lengths; required.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_parser = parse_scheme, default_value = "central")]
    scheme: Scheme,
    /// Relative trace threshold of the voxel mask; 0 uses every voxel.
    #[arg(long, default_value_t = DEFAULT_MASK_REL)]
    mask_rel: f64,
    /// Reference tensor `xx,yy,zz,xy,xz,yz` for the orientation error.
    #[arg(long, value_parser = parse_tensor)]
    reference: Option<SymTensor3>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got '{s}'"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    Ok(out)
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    parse_floats::<3>(s)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    parse_floats::<2>(s).map(|[a, b]| (a, b))
}

fn parse_tensor(s: &str) -> Result<SymTensor3, String> {
    parse_floats::<6>(s).map(SymTensor3::from_components)
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> =
        s.split(',').map(|p| p.trim().parse().map_err(|_| format!("'{p}' is not a count"))).collect::<Result<_, _>>()?;
    match parts[..] {
        [n] => Ok([n; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(format!("expected n or nx,ny,nz, got '{s}'")),
    }
}

fn parse_dtype(s: &str) -> Result<Dtype, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn required<T>(value: Option<T>, flag: &str, shape: &str) -> Result<T, Error> {
    value.ok_or_else(|| Error::InvalidParameter(format!("--{flag} is required for {shape}")))
}

fn unit(axis: Vec3) -> Result<Vec3, Error> {
    normalized(axis).ok_or_else(|| Error::InvalidParameter("axis must be nonzero".into()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(a: &GenerateArgs) -> Result<(), Error> {
    let (shape, dims) = match a.shape {
        ShapeKind::FiberArray => {
            if a.axes.is_empty() {
                return Err(Error::InvalidParameter("--axes is required for fiber-array".into()));
            }
            let d = required(a.diameter, "diameter", "fiber-array")?;
            let l = required(a.length, "length", "fiber-array")?;
            let fibers = a.axes.iter().map(|&p| FiberSpec::new(unit(p)?, l, d)).collect::<Result<Vec<_>, _>>()?;
            let cells = a.cells.unwrap_or([1, fibers.len(), 1]);
            place_fibers(&fibers, cells, a.gap.unwrap_or(d), a.spacing)?
        }
        kind => {
            let dims = required(a.dims, "dims", "this shape")?;
            let lengths = box_lengths(dims, a.spacing);
            let center = a.center.unwrap_or(lengths.map(|l| l / 2.0));
            let shape = match kind {
                ShapeKind::Ball => ShapeSpec::ball(center, required(a.diameter, "diameter", "ball")? / 2.0),
                ShapeKind::Cylinder => ShapeSpec::cylinder(
                    center,
                    unit(a.axis)?,
                    required(a.length, "length", "cylinder")?,
                    required(a.diameter, "diameter", "cylinder")?,
                ),
                ShapeKind::Laminate => {
                    if a.slabs.is_empty() {
                        return Err(Error::InvalidParameter("--slab is required for laminate".into()));
                    }
                    ShapeSpec::Laminate { normal_axis: a.normal_axis, slabs: a.slabs.clone() }
                }
                ShapeKind::FiberArray => unreachable!(),
            };
            (shape, dims)
        }
    };
    shape.validate()?;
    shape.check_inside(box_lengths(dims, a.spacing))?;
    let grid = voxelize(&shape, dims, a.spacing, a.depth)?;
    let dtype = a.dtype.unwrap_or_else(|| Dtype::for_depth(grid.depth()));
    store_volume(&grid, &a.out, dtype)?;
    eprintln!(
        "wrote {} ({}x{}x{}, {}, volume fraction {:.6})",
        a.out.display(),
        dims[0],
        dims[1],
        dims[2],
        dtype.name(),
        grid.mean()
    );
    Ok(())
}

fn analyze_cmd(a: &AnalyzeArgs) -> Result<(), Error> {
    let grid = load_volume(&a.input)?;
    let summary = analyze(&grid, &a.filter.kernel()?, a.scheme, a.eps_rel)?;
    if summary.degenerate {
        eprintln!("warning: {} has no interface; QNT and beta are undefined", a.input.display());
    }
    let text = match a.format {
        Format::Json => io::to_json_text(&io::summary_json(&summary)),
        Format::Csv => io::summary_csv(&summary),
    };
    emit(&text, a.out.as_deref())
}

fn convergence_cmd(a: &ConvergenceArgs) -> Result<(), Error> {
    let shape = match a.shape {
        StudyKind::Ball => StudyShape::ball(a.diameter),
        StudyKind::Cylinder => StudyShape::cylinder(a.diameter, a.aspect),
    }
    .with_displacement(a.displacement.unwrap_or(DEFAULT_DISPLACEMENT));
    let rows = run_convergence(&ConvergenceStudy {
        shape,
        resolutions: a.resolutions.clone(),
        depths: a.depths.clone(),
        kernels: a.kernels.clone(),
        scheme: a.scheme,
        eps_rel: a.eps_rel,
        timing: !a.no_timing,
    })?;
    emit(&convergence_csv(&rows), a.out.as_deref())
}

fn fiber_orient_cmd(a: &FiberOrientArgs) -> Result<(), Error> {
    let first = Kernel::from_name(&a.first_kernel, Some(a.sigma))?;
    let second = match a.mu {
        Some(mu) => Kernel::from_name(&a.second_kernel, Some(mu))?,
        None => return Err(Error::MissingSecondFilter),
    };
    let grid = load_volume(&a.input)?;
    let r = structure_tensor_orientation(&grid, &first, &second, a.scheme, a.mask_rel)?;
    let e_a = a.reference.as_ref().map(|rf| orientation_error(&r.a, rf)).transpose()?;
    let text = match a.format {
        Format::Json => {
            let m = &r.metadata;
            let v = orientation_json(&r.a, e_a, &first, &second, m.scheme, m.mask_rel, m.masked_voxels);
            io::to_json_text(&v)
        }
        Format::Csv => {
            let mut cols: Vec<String> = r.a.components().iter().map(|&c| io::fmt_float(c)).collect();
            cols.push(e_a.map(io::fmt_float).unwrap_or_default());
            cols.push(first.to_string());
            cols.push(second.to_string());
            cols.push(a.scheme.name().into());
            cols.push(io::fmt_float(a.mask_rel));
            cols.push(r.metadata.masked_voxels.to_string());
            format!(
                "a_xx,a_yy,a_zz,a_xy,a_xz,a_yz,e_a,first_kernel,second_kernel,scheme,mask_rel,masked_voxels\n{}\n",
                cols.join(",")
            )
        }
    };
    emit(&text, a.out.as_deref())
}

fn orientation_json(
    a: &SymTensor3,
    e_a: Option<f64>,
    first: &Kernel,
    second: &Kernel,
    scheme: Scheme,
    mask_rel: f64,
    masked: usize,
) -> serde_json::Value {
    json!({
        "a": io::tensor_json(a),
        "e_a": e_a,
        "first_kernel": first.to_string(),
        "second_kernel": second.to_string(),
        "scheme": scheme.name(),
        "mask_rel": mask_rel,
        "masked_voxels": masked,
    })
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_VAR} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {n} threads: {e}")))
}

fn run(cli: &Cli) -> Result<(), Error> {
    configure_threads()?;
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Convergence(a) => convergence_cmd(a),
        Command::FiberOrient(a) => fiber_orient_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
