//! 3D wireframe object models: edge primitives, visibility, and projection
//! into feature-grid bins.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{BinIndex, GridLayout};
use crate::geometry::{Camera, Frame, Pose};

/// One sampled point of a model edge: 3D location, unit edge direction, and
/// the outward unit normals of the two faces meeting at the edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub p: [f64; 3],
    pub e: [f64; 3],
    pub n1: [f64; 3],
    pub n2: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireframeModel {
    pub class_label: String,
    pub primitives: Vec<Primitive>,
}

pub const UNIT_TOL: f64 = 1e-6;
const MODEL_FORMAT: &str = "wireframe-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ModelFile {
    format: String,
    version: u32,
    class_label: String,
    primitives: Vec<Primitive>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unrecognized model format {0:?} (expected {MODEL_FORMAT:?} v{MODEL_VERSION})")]
    Format(String),
    #[error("model has no primitives")]
    Empty,
    #[error("primitive {index}: field {field} has norm {norm:.6}, expected unit length")]
    NotUnit {
        index: usize,
        field: &'static str,
        norm: f64,
    },
    #[error("model center of mass {0:.3} m away from origin (limit {1:.3})")]
    OffCenter(f64, f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn scale3(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    scale3(v, 1.0 / norm3(v))
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl WireframeModel {
    pub fn new(class_label: impl Into<String>, primitives: Vec<Primitive>) -> Result<Self, ModelError> {
        let m = Self {
            class_label: class_label.into(),
            primitives,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.primitives.is_empty() {
            return Err(ModelError::Empty);
        }
        for (index, pr) in self.primitives.iter().enumerate() {
            for (field, v) in [("e", pr.e), ("n1", pr.n1), ("n2", pr.n2)] {
                let norm = norm3(v);
                if (norm - 1.0).abs() > UNIT_TOL {
                    return Err(ModelError::NotUnit { index, field, norm });
                }
            }
        }
        let com = self.center_of_mass();
        let limit = 0.1 * self.diagonal().max(1e-9);
        let off = norm3(com);
        if off > limit {
            return Err(ModelError::OffCenter(off, limit));
        }
        Ok(())
    }

    pub fn center_of_mass(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for pr in &self.primitives {
            for k in 0..3 {
                c[k] += pr.p[k];
            }
        }
        scale3(c, 1.0 / self.primitives.len() as f64)
    }

    /// Bounding-box diagonal of the primitive points.
    pub fn diagonal(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for pr in &self.primitives {
            for k in 0..3 {
                lo[k] = lo[k].min(pr.p[k]);
                hi[k] = hi[k].max(pr.p[k]);
            }
        }
        norm3(sub3(hi, lo))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            class_label: self.class_label.clone(),
            primitives: self.primitives.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(ModelError::Format(format!("{} v{}", file.format, file.version)));
        }
        let m = Self {
            class_label: file.class_label,
            primitives: file.primitives,
        };
        m.validate()?;
        Ok(m)
    }
}

/// A primitive is visible when at least one of its surface normals faces
/// the camera: dot(n, p - C) strictly negative.
pub fn visibility(prim: &Primitive, frame: &Frame) -> bool {
    frame.normal_visible(prim.p, prim.n1) || frame.normal_visible(prim.p, prim.n2)
}

/// Projects a primitive into a feature-grid bin. `None` when the point is
/// behind the camera, projects off the gridded area, or its edge direction
/// degenerates in the image.
pub fn project_to_bin(
    prim: &Primitive,
    frame: &Frame,
    grid: &GridLayout,
) -> Option<BinIndex> {
    let [x, y] = frame.project(prim.p)?;
    let (u, v) = grid.cell_of_pixel(x, y)?;
    let theta = frame.edge_orientation_deg(prim.p, prim.e)?;
    Some(BinIndex {
        u,
        v,
        w: grid.orient_bin(theta),
    })
}

/// Bins of all visible primitives at a pose, element m aligned with
/// `model.primitives[m]` (`None` = invisible or out of grid).
pub fn visible_bins(
    model: &WireframeModel,
    pose: &Pose,
    cam: &Camera,
    grid: &GridLayout,
) -> Vec<Option<BinIndex>> {
    let frame = Frame::new(pose, cam);
    model
        .primitives
        .iter()
        .map(|pr| {
            if visibility(pr, &frame) {
                project_to_bin(pr, &frame, grid)
            } else {
                None
            }
        })
        .collect()
}

struct EdgeSpec {
    a: [f64; 3],
    b: [f64; 3],
    n1: [f64; 3],
    n2: [f64; 3],
}

/// Samples `per_edge` primitives at even spacing along each edge and
/// recenters the whole set at its center of mass.
fn sample_edges(specs: &[EdgeSpec], per_edge: usize, label: &str) -> WireframeModel {
    assert!(per_edge >= 1);
    let mut prims = Vec::with_capacity(specs.len() * per_edge);
    for s in specs {
        let e = normalize3(sub3(s.b, s.a));
        for k in 0..per_edge {
            let t = (k as f64 + 0.5) / per_edge as f64;
            let p = [
                s.a[0] + t * (s.b[0] - s.a[0]),
                s.a[1] + t * (s.b[1] - s.a[1]),
                s.a[2] + t * (s.b[2] - s.a[2]),
            ];
            prims.push(Primitive {
                p,
                e,
                n1: normalize3(s.n1),
                n2: normalize3(s.n2),
            });
        }
    }
    let mut model = WireframeModel {
        class_label: label.to_string(),
        primitives: prims,
    };
    let com = model.center_of_mass();
    for pr in &mut model.primitives {
        pr.p = sub3(pr.p, com);
    }
    model.validate().expect("generated model is valid");
    model
}

/// Twelve edges of an axis-aligned box (length along x, width along y,
/// height along z), sampled at `per_edge` primitives each.
pub fn gen_box(length: f64, width: f64, height: f64, per_edge: usize) -> WireframeModel {
    let (hx, hy, hz) = (length / 2.0, width / 2.0, height / 2.0);
    let mut specs = Vec::with_capacity(12);
    // edges along x: fixed (y, z) signs; faces: (0, sy, 0) and (0, 0, sz)
    for sy in [-1.0, 1.0] {
        for sz in [-1.0, 1.0] {
            specs.push(EdgeSpec {
                a: [-hx, sy * hy, sz * hz],
                b: [hx, sy * hy, sz * hz],
                n1: [0.0, sy, 0.0],
                n2: [0.0, 0.0, sz],
            });
        }
    }
    for sx in [-1.0, 1.0] {
        for sz in [-1.0, 1.0] {
            specs.push(EdgeSpec {
                a: [sx * hx, -hy, sz * hz],
                b: [sx * hx, hy, sz * hz],
                n1: [sx, 0.0, 0.0],
                n2: [0.0, 0.0, sz],
            });
        }
    }
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            specs.push(EdgeSpec {
                a: [sx * hx, sy * hy, -hz],
                b: [sx * hx, sy * hy, hz],
                n1: [sx, 0.0, 0.0],
                n2: [0.0, sy, 0.0],
            });
        }
    }
    sample_edges(&specs, per_edge, "car")
}

/// Box car dimensions used throughout the synthetic suite.
pub fn gen_default_box() -> WireframeModel {
    gen_box(4.0, 1.8, 1.5, 10)
}

/// Default car model: the sedan, whose rear-set cabin makes azimuth
/// identifiable (a bare cuboid looks the same rotated 180 degrees).
pub fn gen_default_sedan() -> WireframeModel {
    gen_sedan(5)
}

/// Sedan-like model: body box plus a tapered cabin on top. 24 edges.
pub fn gen_sedan(per_edge: usize) -> WireframeModel {
    let (hx, hy) = (2.1, 0.9);
    let (z0, z1, z2) = (-0.75, 0.0, 0.55); // body bottom/top, roof
    let cy = 0.78; // cabin half-width
    let (xb_r, xb_f) = (-1.25, 0.95); // cabin base rear/front
    let (xr_r, xr_f) = (-0.85, 0.45); // roof rear/front

    let mut specs = Vec::new();
    // body box edges (12), as in gen_box but offset in z
    for sy in [-1.0, 1.0] {
        for (z, nz) in [(z0, -1.0), (z1, 1.0)] {
            specs.push(EdgeSpec {
                a: [-hx, sy * hy, z],
                b: [hx, sy * hy, z],
                n1: [0.0, sy, 0.0],
                n2: [0.0, 0.0, nz],
            });
        }
    }
    for sx in [-1.0, 1.0] {
        for (z, nz) in [(z0, -1.0), (z1, 1.0)] {
            specs.push(EdgeSpec {
                a: [sx * hx, -hy, z],
                b: [sx * hx, hy, z],
                n1: [sx, 0.0, 0.0],
                n2: [0.0, 0.0, nz],
            });
        }
    }
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            specs.push(EdgeSpec {
                a: [sx * hx, sy * hy, z0],
                b: [sx * hx, sy * hy, z1],
                n1: [sx, 0.0, 0.0],
                n2: [0.0, sy, 0.0],
            });
        }
    }

    // cabin faces: windshield (front, slanted), rear window, vertical sides,
    // roof; the cabin base sits on the body top plane (normal +z there)
    let windshield = normalize3([z2 - z1, 0.0, xb_f - xr_f]);
    let rear = normalize3([-(z2 - z1), 0.0, -(xb_r - xr_r)]);
    // base edges (4): adjacent to body top and each cabin face
    specs.push(EdgeSpec {
        a: [xb_f, -cy, z1],
        b: [xb_f, cy, z1],
        n1: [0.0, 0.0, 1.0],
        n2: windshield,
    });
    specs.push(EdgeSpec {
        a: [xb_r, -cy, z1],
        b: [xb_r, cy, z1],
        n1: [0.0, 0.0, 1.0],
        n2: rear,
    });
    for sy in [-1.0, 1.0] {
        specs.push(EdgeSpec {
            a: [xb_r, sy * cy, z1],
            b: [xb_f, sy * cy, z1],
            n1: [0.0, 0.0, 1.0],
            n2: [0.0, sy, 0.0],
        });
    }
    // roof edges (4)
    specs.push(EdgeSpec {
        a: [xr_f, -cy, z2],
        b: [xr_f, cy, z2],
        n1: [0.0, 0.0, 1.0],
        n2: windshield,
    });
    specs.push(EdgeSpec {
        a: [xr_r, -cy, z2],
        b: [xr_r, cy, z2],
        n1: [0.0, 0.0, 1.0],
        n2: rear,
    });
    for sy in [-1.0, 1.0] {
        specs.push(EdgeSpec {
            a: [xr_r, sy * cy, z2],
            b: [xr_f, sy * cy, z2],
            n1: [0.0, 0.0, 1.0],
            n2: [0.0, sy, 0.0],
        });
    }
    // pillars (4): windshield/rear meets the cabin sides
    for sy in [-1.0, 1.0] {
        specs.push(EdgeSpec {
            a: [xb_f, sy * cy, z1],
            b: [xr_f, sy * cy, z2],
            n1: windshield,
            n2: [0.0, sy, 0.0],
        });
        specs.push(EdgeSpec {
            a: [xb_r, sy * cy, z1],
            b: [xr_r, sy * cy, z2],
            n1: rear,
            n2: [0.0, sy, 0.0],
        });
    }

    sample_edges(&specs, per_edge, "car")
}
