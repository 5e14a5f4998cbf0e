//! CSV and SVG writers. Numbers are printed with a fixed format so identical
//! runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Heatmap;
use crate::Axis;

pub fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// `# axis1=<name> axis2=<name>` followed by `axis1,axis2,density` rows, first axis slowest.
pub fn emit_heatmap_csv(h: &Heatmap, path: &Path) -> Result<()> {
    if h.density.is_empty() || h.coords1.is_empty() || h.coords2.is_empty() {
        return Err(Error::Io("no data".into()));
    }
    if h.density.len() != h.coords1.len() * h.coords2.len() {
        return Err(Error::Io("heatmap shape does not match its coordinates".into()));
    }
    if h.density.iter().any(|d| !d.is_finite()) {
        return Err(Error::Io("non-finite density".into()));
    }
    let mut s = format!("# axis1={} axis2={}\n", h.axes.0, h.axes.1);
    for (i, a) in h.coords1.iter().enumerate() {
        for (j, b) in h.coords2.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", num(*a), num(*b), num(h.at(i, j)));
        }
    }
    write(path, &s)
}

/// Reads back a heatmap written by [`emit_heatmap_csv`].
pub fn read_heatmap_csv(path: &Path) -> Result<Heatmap> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Io("empty file".into()))?;
    let axis = |tag: &str| -> Result<Axis> {
        header
            .split_whitespace()
            .find_map(|w| w.strip_prefix(tag))
            .and_then(Axis::parse)
            .ok_or_else(|| Error::Io(format!("missing {tag} in header")))
    };
    let axes = (axis("axis1=")?, axis("axis2=")?);
    let mut rows = Vec::new();
    for line in lines {
        let v: Vec<f64> = line
            .split(',')
            .map(|t| t.parse::<f64>().map_err(|e| Error::Io(format!("bad number {t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(Error::Io(format!("expected 3 columns, got {}", v.len())));
        }
        rows.push((v[0], v[1], v[2]));
    }
    let n2 = rows.iter().take_while(|r| r.0 == rows[0].0).count().max(1);
    let coords2: Vec<f64> = rows.iter().take(n2).map(|r| r.1).collect();
    let coords1: Vec<f64> = rows.iter().step_by(n2).map(|r| r.0).collect();
    let cell = |c: &[f64]| if c.len() > 1 { c[1] - c[0] } else { 1.0 };
    Ok(Heatmap {
        axes,
        cell: (cell(&coords1), cell(&coords2)),
        coords1,
        coords2,
        density: rows.iter().map(|r| r.2).collect(),
    })
}

/// `p,density` rows.
pub fn emit_marginal_csv(p: &[f64], density: &[f64], path: &Path) -> Result<()> {
    emit_table(&["p", "density"], &[p, density], path)
}

/// Writes equal-length columns under a header row.
pub fn emit_table(header: &[&str], columns: &[&[f64]], path: &Path) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    if rows == 0 {
        return Err(Error::Io("no data".into()));
    }
    if columns.iter().any(|c| c.len() != rows) || columns.len() != header.len() {
        return Err(Error::Io("ragged table".into()));
    }
    let mut s = header.join(",");
    s.push('\n');
    for r in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| num(c[r])).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    write(path, &s)
}

/// A heatmap as an SVG image, downsampled by averaging to at most 128 cells per side.
pub fn emit_heatmap_svg(h: &Heatmap, title: &str, path: &Path) -> Result<()> {
    if h.density.is_empty() {
        return Err(Error::Io("no data".into()));
    }
    let (n1, n2) = (h.coords1.len(), h.coords2.len());
    let (b1, b2) = (n1.div_ceil(128), n2.div_ceil(128));
    let (m1, m2) = (n1.div_ceil(b1), n2.div_ceil(b2));
    let mut cells = vec![0.0; m1 * m2];
    for i in 0..n1 {
        for j in 0..n2 {
            cells[(i / b1) * m2 + j / b2] += h.at(i, j);
        }
    }
    let peak = cells.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let px = 4;
    let (w, ht) = (m2 * px + 80, m1 * px + 60);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{ht}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(s, "<text x=\"40\" y=\"16\">{title}</text>");
    for i in 0..m1 {
        for j in 0..m2 {
            let v = cells[i * m2 + j] / peak;
            if v < 1e-4 {
                continue;
            }
            let (r, g, b) = colormap(v);
            // first axis runs up the page
            let y = 30 + (m1 - 1 - i) * px;
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{y}\" width=\"{px}\" height=\"{px}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>",
                40 + j * px
            );
        }
    }
    let _ = writeln!(
        s,
        "<rect x=\"40\" y=\"30\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        m2 * px,
        m1 * px
    );
    let _ = writeln!(
        s,
        "<text x=\"40\" y=\"{}\">p_{}: {:.3} .. {:.3}</text>",
        ht - 12,
        h.axes.1,
        h.coords2[0],
        h.coords2[n2 - 1]
    );
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{}\" transform=\"rotate(-90 12 {})\">p_{}: {:.3} .. {:.3}</text>",
        30 + m1 * px,
        30 + m1 * px,
        h.axes.0,
        h.coords1[0],
        h.coords1[n1 - 1]
    );
    s.push_str("</svg>\n");
    write(path, &s)
}

/// Dark blue through teal to yellow.
fn colormap(v: f64) -> (u8, u8, u8) {
    let stops = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let v = v.clamp(0.0, 1.0);
    let k = if v < 0.5 { 0 } else { 1 };
    let t = (v - stops[k].0) / (stops[k + 1].0 - stops[k].0);
    let c = |i: usize| (stops[k].1[i] + t * (stops[k + 1].1[i] - stops[k].1[i])).round() as u8;
    (c(0), c(1), c(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> Heatmap {
        Heatmap {
            axes: (Axis::Z, Axis::X),
            coords1: vec![-0.5, 0.5],
            coords2: vec![-0.5, 0.5],
            cell: (1.0, 1.0),
            density: vec![0.25; 4],
        }
    }

    #[test]
    fn two_by_two_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        emit_heatmap_csv(&uniform(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "# axis1=z axis2=x");
        assert_eq!(text.lines().count(), 5);
        let back = read_heatmap_csv(&path).unwrap();
        assert_eq!(back, uniform());
        assert!((back.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_heatmap_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let h = Heatmap { coords1: vec![], coords2: vec![], density: vec![], ..uniform() };
        assert!(matches!(emit_heatmap_csv(&h, &dir.path().join("e.csv")), Err(Error::Io(_))));
        assert!(matches!(emit_marginal_csv(&[], &[], &dir.path().join("m.csv")), Err(Error::Io(_))));
    }

    #[test]
    fn svg_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.svg");
        emit_heatmap_svg(&uniform(), "uniform", &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg") && text.contains("<rect"));
    }
}
