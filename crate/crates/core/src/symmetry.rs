use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{reflect_point, to_coords, vector_from_slice, Vector};
use crate::transform::{HoughPlane, Rotation};

/// A candidate symmetry transformation of a shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symmetry {
    Reflection(HoughPlane),
    Translation(Vector),
    Rotation(Rotation),
}

impl Symmetry {
    pub fn apply(&self, p: &Vector) -> Vector {
        match self {
            Symmetry::Reflection(plane) => reflect_point(p, plane),
            Symmetry::Translation(v) => p + v,
            Symmetry::Rotation(r) => r.apply(p),
        }
    }

    pub fn as_plane(&self) -> Option<&HoughPlane> {
        match self {
            Symmetry::Reflection(p) => Some(p),
            _ => None,
        }
    }

    pub fn to_record(&self, dim: usize) -> SymmetryRecord {
        let mut rec = SymmetryRecord::default();
        match self {
            Symmetry::Reflection(p) => {
                rec.normal = Some(to_coords(p.normal(), dim));
                rec.offset = Some(p.offset());
            }
            Symmetry::Translation(v) => {
                rec.kind = Some("translational".into());
                rec.vector = Some(to_coords(v, dim));
            }
            Symmetry::Rotation(r) => {
                rec.kind = Some("rotational".into());
                rec.center = Some(to_coords(&r.center, dim));
                rec.axis = Some(to_coords(&r.axis, 3));
                rec.angle = Some(r.angle);
            }
        }
        rec
    }
}

/// JSON form of a symmetry; reflections omit `kind`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SymmetryRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

fn missing(field: &str) -> Error {
    Error::InvalidConfig(format!("symmetry record missing `{field}`"))
}

impl SymmetryRecord {
    pub fn to_symmetry(&self) -> Result<Symmetry> {
        match self.kind.as_deref().unwrap_or("reflective") {
            "reflective" => {
                let n = self.normal.as_ref().ok_or_else(|| missing("normal"))?;
                let l = self.offset.ok_or_else(|| missing("offset"))?;
                Ok(Symmetry::Reflection(HoughPlane::new(vector_from_slice(n), l)?))
            }
            "translational" => {
                let v = self.vector.as_ref().ok_or_else(|| missing("vector"))?;
                Ok(Symmetry::Translation(vector_from_slice(v)))
            }
            "rotational" => {
                let c = self.center.as_ref().ok_or_else(|| missing("center"))?;
                let axis = self
                    .axis
                    .as_ref()
                    .map(|a| vector_from_slice(a))
                    .unwrap_or_else(Vector::z);
                Ok(Symmetry::Rotation(Rotation {
                    center: vector_from_slice(c),
                    axis: axis.normalize(),
                    angle: self.angle.ok_or_else(|| missing("angle"))?,
                }))
            }
            other => Err(Error::InvalidConfig(format!("unknown symmetry kind `{other}`"))),
        }
    }
}
