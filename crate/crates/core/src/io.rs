//! Field container files.
//!
//! ```text
//! STMFIELD 1
//! name g
//! half_width 16.0
//! spacing 0.5
//! nodes 65
//! excision 0.0 0.0 0.0 0.5      (or: excision none)
//! components 6
//! byte_order little
//! element f64
//! end
//! <nodes^3 * components little-endian f64, x fastest, components innermost>
//! ```
//! Excised nodes are written as NaN.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Blank, Field};
use crate::grid::{Excision, Grid};

const MAGIC: &str = "STMFIELD 1";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub name: String,
    pub half_width: f64,
    pub spacing: f64,
    pub nodes: usize,
    pub excision: Option<Excision>,
    pub components: usize,
}

impl FieldHeader {
    fn matches(&self, grid: &Grid) -> bool {
        self.half_width.to_bits() == grid.half_width().to_bits()
            && self.spacing.to_bits() == grid.spacing().to_bits()
            && self.nodes == grid.n()
            && self.excision == grid.excision()
    }
}

pub fn write_field<T: Blank>(path: &Path, name: &str, field: &Field<T>) -> Result<()> {
    let grid = field.grid();
    let mut out = std::io::BufWriter::new(File::create(path)?);
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "name {name}")?;
    writeln!(out, "half_width {:?}", grid.half_width())?;
    writeln!(out, "spacing {:?}", grid.spacing())?;
    writeln!(out, "nodes {}", grid.n())?;
    match grid.excision() {
        None => writeln!(out, "excision none")?,
        Some(e) => writeln!(
            out,
            "excision {:?} {:?} {:?} {:?}",
            e.center[0], e.center[1], e.center[2], e.radius
        )?,
    }
    writeln!(out, "components {}", T::COMPONENTS)?;
    writeln!(out, "byte_order little")?;
    writeln!(out, "element f64")?;
    writeln!(out, "end")?;
    let mut buf = Vec::with_capacity(field.values().len() * T::COMPONENTS * 8);
    for v in field.values() {
        for c in v.components() {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse().map_err(|_| format_err(path, format!("bad number '{s}'")))
}

pub fn read_header(path: &Path) -> Result<(FieldHeader, BufReader<File>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    let mut next = |reader: &mut BufReader<File>| -> Result<String> {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(format_err(path, "unexpected end of header"));
        }
        Ok(line.trim_end_matches('\n').to_string())
    };
    if next(&mut reader)? != MAGIC {
        return Err(format_err(path, "missing STMFIELD magic line"));
    }
    let mut name = None;
    let mut half_width = None;
    let mut spacing = None;
    let mut nodes = None;
    let mut excision = None;
    let mut components = None;
    loop {
        let l = next(&mut reader)?;
        if l == "end" {
            break;
        }
        let (key, value) = l.split_once(' ').ok_or_else(|| format_err(path, format!("bad header line '{l}'")))?;
        match key {
            "name" => name = Some(value.to_string()),
            "half_width" => half_width = Some(parse_f64(path, value)?),
            "spacing" => spacing = Some(parse_f64(path, value)?),
            "nodes" => {
                nodes = Some(value.parse().map_err(|_| format_err(path, "bad node count"))?)
            }
            "components" => {
                components = Some(value.parse().map_err(|_| format_err(path, "bad component count"))?)
            }
            "excision" => {
                excision = Some(if value == "none" {
                    None
                } else {
                    let v: Vec<f64> = value
                        .split_whitespace()
                        .map(|s| parse_f64(path, s))
                        .collect::<Result<_>>()?;
                    if v.len() != 4 {
                        return Err(format_err(path, "excision needs center and radius"));
                    }
                    Some(Excision { center: [v[0], v[1], v[2]], radius: v[3] })
                })
            }
            "byte_order" if value != "little" => {
                return Err(format_err(path, format!("unsupported byte order '{value}'")))
            }
            "element" if value != "f64" => {
                return Err(format_err(path, format!("unsupported element type '{value}'")))
            }
            "byte_order" | "element" => {}
            other => return Err(format_err(path, format!("unknown header key '{other}'"))),
        }
    }
    let missing = |k: &str| format_err(path, format!("header is missing '{k}'"));
    Ok((
        FieldHeader {
            name: name.ok_or_else(|| missing("name"))?,
            half_width: half_width.ok_or_else(|| missing("half_width"))?,
            spacing: spacing.ok_or_else(|| missing("spacing"))?,
            nodes: nodes.ok_or_else(|| missing("nodes"))?,
            excision: excision.ok_or_else(|| missing("excision"))?,
            components: components.ok_or_else(|| missing("components"))?,
        },
        reader,
    ))
}

/// Read a field onto `grid`; the header's grid parameters must match.
pub fn read_field<T: Blank>(path: &Path, grid: &Arc<Grid>) -> Result<(FieldHeader, Field<T>)> {
    let (header, mut reader) = read_header(path)?;
    if header.components != T::COMPONENTS {
        return Err(format_err(
            path,
            format!("expected {} components, found {}", T::COMPONENTS, header.components),
        ));
    }
    if !header.matches(grid) {
        return Err(format_err(path, "grid parameters do not match the data set"));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let expected = grid.len() * T::COMPONENTS * 8;
    if bytes.len() != expected {
        return Err(Error::SizeMismatch { path: path.to_path_buf(), expected, found: bytes.len() });
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut comps = vec![0.0; T::COMPONENTS];
    for chunk in bytes.chunks_exact(8 * T::COMPONENTS) {
        for (c, b) in comps.iter_mut().zip(chunk.chunks_exact(8)) {
            *c = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
        }
        values.push(T::from_components(&comps));
    }
    let field = Field::from_values(grid, values)?;
    Ok((header, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ScalarField, Sym3, SymTensorField};

    #[test]
    fn scalar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ex = Excision { center: [0.0; 3], radius: 1.1 };
        let g = Grid::new(3.0, 0.5, Some(ex)).unwrap();
        let f = ScalarField::from_fn(&g, |_, x| x[0].exp() * 0.1 + x[2]);
        let p = dir.path().join("u.stmf");
        write_field(&p, "u", &f).unwrap();
        let (h, back) = read_field::<f64>(&p, &g).unwrap();
        assert_eq!(h.name, "u");
        for idx in g.active_nodes() {
            assert_eq!(f[idx].to_bits(), back[idx].to_bits());
        }
    }

    #[test]
    fn rejects_wrong_component_count() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1.5, 0.5, None).unwrap();
        let t = SymTensorField::constant(&g, Sym3::identity());
        let p = dir.path().join("t.stmf");
        write_field(&p, "t", &t).unwrap();
        assert!(matches!(read_field::<f64>(&p, &g), Err(Error::Format { .. })));
    }
}
