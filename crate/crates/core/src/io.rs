//! Raw volume files with a JSON sidecar, and report emission.
//!
//! A volume is two files: the little-endian payload at `path` and its
//! metadata at `path` + `.json`:
//!
//! ```json
//! {"dims": [64, 64, 64], "spacing_um": 1.0, "depth": 3, "dtype": "u8", "order": "x-fastest"}
//! ```
//!
//! `depth` is a positive integer or `"continuous"`. Integer samples map onto
//! `[0, 1]` by `value / (2^bits - 1)`; with an integer depth the loaded values
//! are snapped back onto the gray-value set of that depth.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::minkowski::MinkowskiSummary;
use crate::tensor::SymTensor3;
use crate::voxelgrid::{check_dims, Depth, VoxelGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    U8,
    U16,
    F32,
}

impl Dtype {
    pub fn name(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::F32 => "f32",
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }

    fn max_int(self) -> Option<f64> {
        match self {
            Dtype::U8 => Some(u8::MAX as f64),
            Dtype::U16 => Some(u16::MAX as f64),
            Dtype::F32 => None,
        }
    }

    /// Smallest dtype that stores every gray value of `depth` recoverably.
    pub fn for_depth(depth: Depth) -> Dtype {
        match depth {
            Depth::Levels(p) if Depth::steps(p) <= u8::MAX as u64 => Dtype::U8,
            Depth::Levels(p) if Depth::steps(p) <= u16::MAX as u64 => Dtype::U16,
            _ => Dtype::F32,
        }
    }
}

impl FromStr for Dtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(Dtype::U8),
            "u16" => Ok(Dtype::U16),
            "f32" => Ok(Dtype::F32),
            other => Err(Error::InvalidParameter(format!("unknown dtype '{other}' (expected u8, u16 or f32)"))),
        }
    }
}

pub fn sidecar_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `grid` as payload plus sidecar.
///
/// Integer dtypes must have enough levels to resolve the grid's depth;
/// continuous grids stored as integers are rounded to the nearest level.
pub fn store_volume(grid: &VoxelGrid, path: &Path, dtype: Dtype) -> Result<()> {
    if let (Depth::Levels(p), Some(max)) = (grid.depth(), dtype.max_int()) {
        if Depth::steps(p) as f64 > max {
            return Err(Error::InvalidParameter(format!(
                "dtype {} has too few levels for depth {p}; use {}",
                dtype.name(),
                Dtype::for_depth(grid.depth()).name()
            )));
        }
    }
    let mut payload = Vec::with_capacity(grid.len() * dtype.bytes());
    for &v in grid.values() {
        match dtype {
            Dtype::U8 => payload.push((v * 255.0).round() as u8),
            Dtype::U16 => payload.extend_from_slice(&((v * 65535.0).round() as u16).to_le_bytes()),
            Dtype::F32 => payload.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    let depth = match grid.depth() {
        Depth::Levels(p) => json!(p),
        Depth::Continuous => json!("continuous"),
    };
    let sidecar = json!({
        "dims": grid.dims(),
        "spacing_um": grid.spacing(),
        "depth": depth,
        "dtype": dtype.name(),
        "order": "x-fastest",
    });
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n";
    fs::write(path, payload).map_err(|e| Error::io(path, e))?;
    let meta = sidecar_path(path);
    fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
}

struct Sidecar {
    dims: [usize; 3],
    spacing: f64,
    depth: Depth,
    dtype: Dtype,
}

fn parse_sidecar(path: &Path, text: &str) -> Result<Sidecar> {
    let bad = |msg: String| Error::format(path, msg);
    let value: Value = serde_json::from_str(text).map_err(|e| bad(format!("malformed JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| bad("sidecar must be a JSON object".into()))?;
    let key = |name: &str| obj.get(name).ok_or_else(|| bad(format!("missing key '{name}'")));

    let dims_v = key("dims")?.as_array().filter(|a| a.len() == 3);
    let dims_v = dims_v.ok_or_else(|| bad("key 'dims' must be an array of three positive integers".into()))?;
    let mut dims = [0usize; 3];
    for (d, v) in dims.iter_mut().zip(dims_v) {
        *d = v
            .as_u64()
            .filter(|&n| n > 0)
            .ok_or_else(|| bad("key 'dims' must be an array of three positive integers".into()))?
            as usize;
    }
    check_dims(dims).map_err(|e| bad(format!("key 'dims': {e}")))?;

    let spacing = key("spacing_um")?
        .as_f64()
        .filter(|h| *h > 0.0 && h.is_finite())
        .ok_or_else(|| bad("key 'spacing_um' must be a positive number".into()))?;

    let depth = match key("depth")? {
        Value::String(s) if s == "continuous" => Depth::Continuous,
        v => match v.as_u64() {
            Some(p) if p >= 1 && p <= u32::MAX as u64 => Depth::Levels(p as u32),
            _ => return Err(bad("key 'depth' must be a positive integer or \"continuous\"".into())),
        },
    };

    let dtype = key("dtype")?
        .as_str()
        .ok_or_else(|| bad("key 'dtype' must be a string".into()))?
        .parse::<Dtype>()
        .map_err(|e| bad(format!("key 'dtype': {e}")))?;

    match key("order")?.as_str() {
        Some("x-fastest") => {}
        _ => return Err(bad("key 'order' must be \"x-fastest\"".into())),
    }
    Ok(Sidecar { dims, spacing, depth, dtype })
}

pub fn load_volume(path: &Path) -> Result<VoxelGrid> {
    let meta = sidecar_path(path);
    let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let sc = parse_sidecar(&meta, &text)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let n = sc.dims[0] * sc.dims[1] * sc.dims[2];
    let expected = n * sc.dtype.bytes();
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("payload length mismatch: expected {expected} bytes, got {}", bytes.len()),
        ));
    }
    let raw: Vec<f64> = match sc.dtype {
        Dtype::U8 => bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        Dtype::U16 => bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as f64 / 65535.0).collect(),
        Dtype::F32 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect(),
    };
    if let Some(i) = raw.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::format(
            path,
            format!("sample {i} at byte offset {} is {} (outside [0, 1])", i * sc.dtype.bytes(), raw[i]),
        ));
    }
    let values = match sc.depth {
        Depth::Levels(p) => raw.into_iter().map(|v| Depth::nearest(p, v)).collect(),
        Depth::Continuous => raw,
    };
    VoxelGrid::new(sc.dims, sc.spacing, values, sc.depth)
}

/// Formats a float with 17 significant digits, which round-trips exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

const TENSOR_SUFFIXES: [&str; 6] = ["xx", "yy", "zz", "xy", "xz", "yz"];

pub fn summary_csv_header() -> String {
    let mut cols = vec!["volume".to_string(), "surface".to_string()];
    cols.extend(TENSOR_SUFFIXES.iter().map(|s| format!("w_{s}")));
    cols.extend(TENSOR_SUFFIXES.iter().map(|s| format!("qnt_{s}")));
    for c in ["beta", "degenerate", "kernel", "sigma", "scheme", "depth", "spacing", "eps_rel"] {
        cols.push(c.to_string());
    }
    cols.join(",")
}

pub fn summary_csv_row(s: &MinkowskiSummary) -> String {
    let mut cols = vec![fmt_float(s.volume), fmt_float(s.surface)];
    cols.extend(s.w.components().map(fmt_float));
    match s.qnt {
        Some(q) => cols.extend(q.components().map(fmt_float)),
        None => cols.extend(std::iter::repeat_n(String::new(), 6)),
    }
    let m = &s.metadata;
    cols.push(s.beta.map(fmt_float).unwrap_or_default());
    cols.push(s.degenerate.to_string());
    cols.push(m.kernel.name().to_string());
    cols.push(m.kernel.sigma().map(fmt_float).unwrap_or_default());
    cols.push(m.scheme.name().to_string());
    cols.push(depth_label(m.depth));
    cols.push(fmt_float(m.spacing));
    cols.push(fmt_float(m.eps_rel));
    cols.join(",")
}

pub fn summary_csv(s: &MinkowskiSummary) -> String {
    format!("{}\n{}\n", summary_csv_header(), summary_csv_row(s))
}

fn depth_label(d: Depth) -> String {
    match d {
        Depth::Levels(p) => p.to_string(),
        Depth::Continuous => "continuous".into(),
    }
}

pub fn tensor_json(t: &SymTensor3) -> Value {
    let mut m = Map::new();
    for (name, c) in TENSOR_SUFFIXES.iter().zip(t.components()) {
        m.insert((*name).into(), json!(c));
    }
    Value::Object(m)
}

/// The analysis report. Numbers use the shortest text that parses back to
/// the same `f64`, so the output is exact and byte-stable.
///
///
/// ```json
/// {"volume": .., "surface": .., "w": {"xx": .., ...}, "qnt": {..} | null,
///  "beta": .. | null, "degenerate": false,
///  "metadata": {"kernel": "ball", "sigma": 1.2, "scheme": "central",
///               "depth": 3 | "continuous", "spacing_um": .., "eps_rel": .., "dims": [..]}}
/// ```
pub fn summary_json(s: &MinkowskiSummary) -> Value {
    let m = &s.metadata;
    let depth = match m.depth {
        Depth::Levels(p) => json!(p),
        Depth::Continuous => json!("continuous"),
    };
    json!({
        "volume": s.volume,
        "surface": s.surface,
        "w": tensor_json(&s.w),
        "qnt": s.qnt.as_ref().map(tensor_json),
        "beta": s.beta,
        "degenerate": s.degenerate,
        "metadata": {
            "kernel": m.kernel.name(),
            "sigma": m.kernel.sigma(),
            "scheme": m.scheme.name(),
            "depth": depth,
            "spacing_um": m.spacing,
            "eps_rel": m.eps_rel,
            "dims": m.dims,
        },
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    let _ = writeln!(s);
    s
}
