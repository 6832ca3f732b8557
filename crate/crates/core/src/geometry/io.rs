//! Reading and writing point clouds as `.xyz`, `.obj` and `.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_dim, to_coords, vector_from_slice, PointCloud, Vector};
use crate::error::{Error, Result};
use crate::symmetry::SymmetryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xyz,
    Obj,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xyz" | "txt" => Some(Format::Xyz),
            "obj" => Some(Format::Obj),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

/// On-disk JSON layout of a cloud.
#[derive(Debug, Serialize, Deserialize)]
pub struct CloudFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub normals: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub gt_symmetries: Option<Vec<SymmetryRecord>>,
}

impl CloudFile {
    pub fn from_cloud(cloud: &PointCloud) -> Self {
        let dim = cloud.dim();
        CloudFile {
            dim,
            points: cloud.points().iter().map(|p| to_coords(p, dim)).collect(),
            normals: cloud
                .normals()
                .map(|ns| ns.iter().map(|n| to_coords(n, dim)).collect()),
            gt_symmetries: cloud
                .ground_truth()
                .map(|gt| gt.iter().map(|s| s.to_record(dim)).collect()),
        }
    }

    pub fn into_cloud(self) -> Result<PointCloud> {
        check_dim(self.dim)?;
        let dim = self.dim;
        let coords = |rows: &[Vec<f64>]| -> Result<Vec<Vector>> {
            rows.iter()
                .map(|r| {
                    if r.len() != dim {
                        Err(Error::DimensionMismatch {
                            expected: dim,
                            got: r.len(),
                        })
                    } else {
                        Ok(vector_from_slice(r))
                    }
                })
                .collect()
        };
        let mut cloud = PointCloud::new(dim, coords(&self.points)?)?;
        if let Some(ns) = &self.normals {
            cloud = cloud.with_normals(coords(ns)?)?;
        }
        if let Some(gt) = &self.gt_symmetries {
            let syms = gt.iter().map(|r| r.to_symmetry()).collect::<Result<Vec<_>>>()?;
            cloud = cloud.with_ground_truth(syms);
        }
        Ok(cloud)
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_floats(path: &Path, line_no: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| parse_err(path, line_no, format!("not a number: `{f}`")))
        })
        .collect()
}

/// Loads a cloud. `dim` forces the expected dimension; `None` infers it.
pub fn load(path: &Path, format: Format, dim: Option<usize>) -> Result<PointCloud> {
    if let Some(d) = dim {
        check_dim(d)?;
    }
    let text = fs::read_to_string(path)?;
    match format {
        Format::Xyz => parse_xyz(path, &text, dim),
        Format::Obj => parse_obj(path, &text, dim),
        Format::Json => {
            let cloud = serde_json::from_str::<CloudFile>(&text)?.into_cloud()?;
            match dim {
                Some(d) if d != cloud.dim() => Err(Error::DimensionMismatch {
                    expected: d,
                    got: cloud.dim(),
                }),
                _ => Ok(cloud),
            }
        }
    }
}

fn parse_xyz(path: &Path, text: &str, dim: Option<usize>) -> Result<PointCloud> {
    let mut dim = dim;
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let d = *dim.get_or_insert(fields.len());
        if fields.len() != d {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {d} columns, found {}", fields.len()),
            ));
        }
        check_dim(d).map_err(|_| parse_err(path, i + 1, format!("unsupported column count {d}")))?;
        points.push(vector_from_slice(&parse_floats(path, i + 1, &fields)?));
    }
    PointCloud::new(dim.unwrap_or(3), points)
}

/// Resolves a 1-based (or negative, relative) OBJ index.
fn obj_index(path: &Path, line: usize, token: &str, count: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let idx: i64 = head
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad face index `{token}`")))?;
    let resolved = if idx > 0 { idx - 1 } else { count as i64 + idx };
    if idx == 0 || resolved < 0 || resolved as usize >= count {
        return Err(parse_err(path, line, format!("face index {idx} out of range")));
    }
    Ok(resolved as usize)
}

fn parse_obj(path: &Path, text: &str, dim: Option<usize>) -> Result<PointCloud> {
    let mut verts = Vec::new();
    let mut vns = Vec::new();
    let mut faces: Vec<Vec<usize>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "v" => {
                if rest.len() < 3 {
                    return Err(parse_err(path, i + 1, "vertex needs 3 coordinates"));
                }
                // A fourth (w) or colour columns are ignored.
                verts.push(vector_from_slice(&parse_floats(path, i + 1, &rest[..3])?));
            }
            "vn" => {
                if rest.len() != 3 {
                    return Err(parse_err(path, i + 1, "normal needs 3 components"));
                }
                vns.push(vector_from_slice(&parse_floats(path, i + 1, &rest)?));
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(parse_err(path, i + 1, "face needs at least 3 vertices"));
                }
                let face = rest
                    .iter()
                    .map(|t| obj_index(path, i + 1, t, verts.len()))
                    .collect::<Result<Vec<_>>>()?;
                faces.push(face);
            }
            _ => {}
        }
    }
    let dim = dim.unwrap_or(3);
    if dim == 2 {
        if let Some(v) = verts.iter().find(|v| v.z != 0.0) {
            return Err(Error::InvalidConfig(format!(
                "OBJ vertex {v:?} has a z coordinate but dim=2 was requested"
            )));
        }
    }
    let cloud = PointCloud::new(dim, verts)?;
    let normals = if !vns.is_empty() && vns.len() == cloud.len() {
        Some(vns)
    } else if !faces.is_empty() {
        face_normals(cloud.points(), &faces)
    } else {
        None
    };
    match normals {
        Some(ns) if dim == 3 => cloud.with_normals(ns),
        _ => Ok(cloud),
    }
}

/// Area-weighted vertex normals (fan triangulation of polygons). Returns
/// `None` if some vertex touches no face with nonzero area.
pub fn face_normals(verts: &[Vector], faces: &[Vec<usize>]) -> Option<Vec<Vector>> {
    let mut acc = vec![Vector::zeros(); verts.len()];
    for face in faces {
        for w in 1..face.len() - 1 {
            let (a, b, c) = (face[0], face[w], face[w + 1]);
            // |cross| is twice the triangle area.
            let n = (verts[b] - verts[a]).cross(&(verts[c] - verts[a]));
            for v in [a, b, c] {
                acc[v] += n;
            }
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            (len > 0.0).then(|| n / len)
        })
        .collect()
}

pub fn save(cloud: &PointCloud, path: &Path, format: Format) -> Result<()> {
    let dim = cloud.dim();
    let text = match format {
        Format::Xyz => {
            let mut s = String::new();
            for p in cloud.points() {
                let row: Vec<String> = to_coords(p, dim).iter().map(|c| c.to_string()).collect();
                writeln!(s, "{}", row.join(" ")).unwrap();
            }
            s
        }
        Format::Obj => {
            let mut s = String::new();
            for p in cloud.points() {
                writeln!(s, "v {} {} {}", p.x, p.y, p.z).unwrap();
            }
            for n in cloud.normals().unwrap_or(&[]) {
                writeln!(s, "vn {} {} {}", n.x, n.y, n.z).unwrap();
            }
            s
        }
        Format::Json => serde_json::to_string(&CloudFile::from_cloud(cloud))?,
    };
    fs::write(path, text)?;
    Ok(())
}
