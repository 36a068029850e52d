//! CSV file formats for densities, sinograms, feature maps and Gram
//! matrices.
//!
//! Every format is a `#`-prefixed header line carrying `key=value` pairs
//! followed by comma-separated rows. Floats are written in Rust's shortest
//! round-trip form, so files reload bit-exactly and reruns are
//! byte-identical. Parsing is locale independent (decimal point only).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::density::Grid1D;
use crate::kernels::{GramMatrix, KernelSpec};
use crate::radon::{AngleSet, SlicedRepresentation};
use crate::sliced::FeatureVector;
use crate::{Error, Result};

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_header(
    line: &str,
    tag: &str,
    path: &str,
) -> Result<BTreeMap<String, String>> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| parse_err(path, 1, "missing # header"))?
        .trim();
    let mut parts = body.split_whitespace();
    let found = parts.next().unwrap_or("");
    if found != tag {
        return Err(parse_err(
            path,
            1,
            format!("expected header tag {tag}, found {found}"),
        ));
    }
    let mut map = BTreeMap::new();
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| parse_err(path, 1, format!("malformed pair {kv}")))?;
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}

fn header_f64(map: &BTreeMap<String, String>, key: &str, path: &str) -> Result<f64> {
    map.get(key)
        .ok_or_else(|| parse_err(path, 1, format!("missing {key}")))?
        .parse()
        .map_err(|e| parse_err(path, 1, format!("bad {key}: {e}")))
}

fn header_usize(map: &BTreeMap<String, String>, key: &str, path: &str) -> Result<usize> {
    map.get(key)
        .ok_or_else(|| parse_err(path, 1, format!("missing {key}")))?
        .parse()
        .map_err(|e| parse_err(path, 1, format!("bad {key}: {e}")))
}

fn parse_row(line: &str, path: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(path, lineno, format!("bad value {tok:?}: {e}")))
        })
        .collect()
}

fn read_lines<R: Read>(reader: R) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push(line);
        }
    }
    Ok(lines)
}

/// Write a 1D grid of values: `# grid origin=<r> spacing=<r>`, one value per
/// line.
pub fn write_density_1d<W: Write>(w: &mut W, grid: Grid1D, values: &[f64]) -> Result<()> {
    writeln!(w, "# grid origin={} spacing={}", grid.origin, grid.spacing)?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Read a 1D grid of raw nonnegative values.
pub fn read_density_1d<R: Read>(reader: R, path: &str) -> Result<(Grid1D, Vec<f64>)> {
    let lines = read_lines(reader)?;
    let header = parse_header(
        lines.first().ok_or_else(|| parse_err(path, 1, "empty file"))?,
        "grid",
        path,
    )?;
    let origin = header_f64(&header, "origin", path)?;
    let spacing = header_f64(&header, "spacing", path)?;
    let mut values = Vec::with_capacity(lines.len() - 1);
    for (k, line) in lines[1..].iter().enumerate() {
        let row = parse_row(line, path, k + 2)?;
        values.extend(row);
    }
    let grid = Grid1D::new(origin, spacing, values.len())?;
    Ok((grid, values))
}

/// Write a 2D grid: `# grid rows=<n> cols=<n> pixel=<r>`, one row per line.
pub fn write_density_2d<W: Write>(w: &mut W, pixel: f64, values: &Array2<f64>) -> Result<()> {
    let (rows, cols) = values.dim();
    writeln!(w, "# grid rows={rows} cols={cols} pixel={pixel}")?;
    for i in 0..rows {
        let row: Vec<String> = (0..cols).map(|j| format!("{}", values[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a 2D grid of raw nonnegative values.
pub fn read_density_2d<R: Read>(reader: R, path: &str) -> Result<(f64, Array2<f64>)> {
    let lines = read_lines(reader)?;
    let header = parse_header(
        lines.first().ok_or_else(|| parse_err(path, 1, "empty file"))?,
        "grid",
        path,
    )?;
    let rows = header_usize(&header, "rows", path)?;
    let cols = header_usize(&header, "cols", path)?;
    let pixel = header_f64(&header, "pixel", path)?;
    if lines.len() != rows + 1 {
        return Err(parse_err(
            path,
            lines.len(),
            format!("expected {rows} data rows, found {}", lines.len() - 1),
        ));
    }
    let mut values = Array2::zeros((rows, cols));
    for (i, line) in lines[1..].iter().enumerate() {
        let row = parse_row(line, path, i + 2)?;
        if row.len() != cols {
            return Err(parse_err(
                path,
                i + 2,
                format!("expected {cols} columns, found {}", row.len()),
            ));
        }
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok((pixel, values))
}

fn write_stack<W: Write>(
    w: &mut W,
    tag: &str,
    t_grid: Grid1D,
    values: &Array2<f64>,
) -> Result<()> {
    let (l, t) = values.dim();
    writeln!(
        w,
        "# {tag} L={l} T={t} t_origin={} t_spacing={}",
        t_grid.origin, t_grid.spacing
    )?;
    for i in 0..l {
        let row: Vec<String> = (0..t).map(|j| format!("{}", values[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn read_stack<R: Read>(
    reader: R,
    tag: &str,
    path: &str,
) -> Result<(AngleSet, Grid1D, Array2<f64>)> {
    let lines = read_lines(reader)?;
    let header = parse_header(
        lines.first().ok_or_else(|| parse_err(path, 1, "empty file"))?,
        tag,
        path,
    )?;
    let l = header_usize(&header, "L", path)?;
    let t = header_usize(&header, "T", path)?;
    let t_origin = header_f64(&header, "t_origin", path)?;
    let t_spacing = header_f64(&header, "t_spacing", path)?;
    if lines.len() != l + 1 {
        return Err(parse_err(
            path,
            lines.len(),
            format!("expected {l} rows, found {}", lines.len() - 1),
        ));
    }
    let mut values = Array2::zeros((l, t));
    for (i, line) in lines[1..].iter().enumerate() {
        let row = parse_row(line, path, i + 2)?;
        if row.len() != t {
            return Err(parse_err(
                path,
                i + 2,
                format!("expected {t} columns, found {}", row.len()),
            ));
        }
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    let angles = AngleSet::new(l)?;
    let t_grid = Grid1D::new(t_origin, t_spacing, t)?;
    Ok((angles, t_grid, values))
}

/// Write a sinogram: `# sinogram L=<n> T=<n> t_origin=<r> t_spacing=<r>`.
pub fn write_sinogram<W: Write>(w: &mut W, s: &SlicedRepresentation) -> Result<()> {
    write_stack(w, "sinogram", s.t_grid(), s.slices())
}

/// Read a sinogram, reconstructing the equally spaced angle set from `L`.
pub fn read_sinogram<R: Read>(reader: R, path: &str) -> Result<SlicedRepresentation> {
    let (angles, t_grid, values) = read_stack(reader, "sinogram", path)?;
    SlicedRepresentation::new(angles, t_grid, values)
}

/// Write a feature vector with the `# phi` header tag.
pub fn write_feature<W: Write>(w: &mut W, v: &FeatureVector) -> Result<()> {
    write_stack(w, "phi", v.t_grid(), v.values())
}

/// Read a feature vector.
pub fn read_feature<R: Read>(reader: R, path: &str) -> Result<FeatureVector> {
    let (angles, t_grid, values) = read_stack(reader, "phi", path)?;
    FeatureVector::new(angles, t_grid, values)
}

/// Write a Gram matrix:
/// `# gram kind=<k> gamma=<r> degree=<n> offset=<n> min_eig=<r>`.
pub fn write_gram<W: Write>(w: &mut W, g: &GramMatrix) -> Result<()> {
    let spec = g.spec();
    let gamma = spec.gamma().unwrap_or(0.0);
    let (degree, offset) = spec.degree_offset().unwrap_or((0, 0));
    writeln!(
        w,
        "# gram kind={} gamma={gamma} degree={degree} offset={offset} min_eig={}",
        spec.kind(),
        g.min_eigenvalue()
    )?;
    let n = g.n();
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| format!("{}", g.entries()[(i, j)]))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a Gram matrix back, reconstructing its kernel spec from the header.
pub fn read_gram<R: Read>(reader: R, path: &str) -> Result<GramMatrix> {
    let lines = read_lines(reader)?;
    let header = parse_header(
        lines.first().ok_or_else(|| parse_err(path, 1, "empty file"))?,
        "gram",
        path,
    )?;
    let kind = header
        .get("kind")
        .ok_or_else(|| parse_err(path, 1, "missing kind"))?
        .clone();
    let gamma = header_f64(&header, "gamma", path)?;
    let degree = header_usize(&header, "degree", path)? as u32;
    let offset = header_usize(&header, "offset", path)? as u8;
    let spec = match kind.as_str() {
        "sw_gaussian" => KernelSpec::SwGaussian { gamma },
        "sw_poly" => KernelSpec::SwPoly { degree, offset },
        "linear_phi" => KernelSpec::LinearPhi,
        "euclid_rbf" => KernelSpec::EuclidRbf { gamma },
        "euclid_linear" => KernelSpec::EuclidLinear,
        "euclid_poly" => KernelSpec::EuclidPoly { degree, offset },
        other => return Err(parse_err(path, 1, format!("unknown kernel kind {other}"))),
    };
    let n = lines.len() - 1;
    let mut values = Array2::zeros((n, n));
    for (i, line) in lines[1..].iter().enumerate() {
        let row = parse_row(line, path, i + 2)?;
        if row.len() != n {
            return Err(parse_err(
                path,
                i + 2,
                format!("expected {n} columns, found {}", row.len()),
            ));
        }
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    GramMatrix::new(spec, values)
}

/// Convenience: write any of the formats to a file path.
pub fn write_to_path<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    Ok(())
}
