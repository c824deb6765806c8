//! Masked Cartesian grid over a bounding box.
//!
//! Layout conventions used throughout the crate:
//! * cell `(i, j)` has index `j * nx + i` and center `origin + ((i + 1/2) h, (j + 1/2) h)`;
//! * vertex `(i, j)` has index `j * (nx + 1) + i` and sits at `origin + (i h, j h)`;
//! * x-face `(i, j)` is the vertical face at `x = i h` between cells `(i-1, j)` and `(i, j)`;
//!   its index is `j * (nx + 1) + i`. It carries the x-component of vector fields;
//! * y-face `(i, j)` is the horizontal face at `y = j h` between cells `(i, j-1)` and `(i, j)`;
//!   its index is `n_xfaces + j * nx + i`. It carries the y-component.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub origin: [f64; 2],
    pub lengths: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Rectangle { center: [f64; 2], size: [f64; 2] },
    Disk { center: [f64; 2], radius: f64 },
    /// Disk with a concentric circular hole; the hole becomes hole 0.
    Annulus {
        center: [f64; 2],
        inner_radius: f64,
        outer_radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HoleShape {
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { center: [f64; 2], size: [f64; 2] },
}

impl HoleShape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            HoleShape::Disk { center, radius } => dist(p, center) < radius,
            HoleShape::Rectangle { center, size } => in_rect(p, center, size),
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match *self {
            HoleShape::Disk { center, .. } | HoleShape::Rectangle { center, .. } => center,
        }
    }

    fn exact_area(&self) -> f64 {
        match *self {
            HoleShape::Disk { radius, .. } => PI * radius * radius,
            HoleShape::Rectangle { size, .. } => size[0] * size[1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Defaults to the bounding box of the outer shape.
    #[serde(default)]
    pub bounding_box: Option<BoundingBox>,
    pub shape: Shape,
    #[serde(default)]
    pub holes: Vec<HoleShape>,
    /// Cells along the longer side of the bounding box.
    pub resolution: usize,
}

impl DomainSpec {
    pub fn unit_square(resolution: usize) -> Self {
        Self {
            bounding_box: None,
            shape: Shape::Rectangle {
                center: [0.5, 0.5],
                size: [1.0, 1.0],
            },
            holes: vec![],
            resolution,
        }
    }

    pub fn disk(center: [f64; 2], radius: f64, resolution: usize) -> Self {
        Self {
            bounding_box: None,
            shape: Shape::Disk { center, radius },
            holes: vec![],
            resolution,
        }
    }

    pub fn annulus(inner_radius: f64, outer_radius: f64, resolution: usize) -> Self {
        Self {
            bounding_box: None,
            shape: Shape::Annulus {
                center: [0.0, 0.0],
                inner_radius,
                outer_radius,
            },
            holes: vec![],
            resolution,
        }
    }

    /// Outer disk of radius `outer_radius` at the origin with one disk hole.
    pub fn disk_with_hole(outer_radius: f64, hole_center: [f64; 2], hole_radius: f64, resolution: usize) -> Self {
        Self {
            bounding_box: None,
            shape: Shape::Disk {
                center: [0.0, 0.0],
                radius: outer_radius,
            },
            holes: vec![HoleShape::Disk {
                center: hole_center,
                radius: hole_radius,
            }],
            resolution,
        }
    }

    fn all_holes(&self) -> Vec<HoleShape> {
        let mut holes = Vec::new();
        if let Shape::Annulus {
            center, inner_radius, ..
        } = self.shape
        {
            holes.push(HoleShape::Disk {
                center,
                radius: inner_radius,
            });
        }
        holes.extend(self.holes.iter().cloned());
        holes
    }

    fn shape_box(&self) -> BoundingBox {
        let (c, half) = match self.shape {
            Shape::Rectangle { center, size } => (center, [size[0] / 2.0, size[1] / 2.0]),
            Shape::Disk { center, radius } => (center, [radius, radius]),
            Shape::Annulus {
                center,
                outer_radius,
                ..
            } => (center, [outer_radius, outer_radius]),
        };
        BoundingBox {
            origin: [c[0] - half[0], c[1] - half[1]],
            lengths: [2.0 * half[0], 2.0 * half[1]],
        }
    }

    fn outer_contains(&self, p: [f64; 2]) -> bool {
        match self.shape {
            Shape::Rectangle { center, size } => in_rect(p, center, size),
            Shape::Disk { center, radius } => dist(p, center) < radius,
            Shape::Annulus {
                center,
                outer_radius,
                ..
            } => dist(p, center) < outer_radius,
        }
    }

    /// Exact (continuum) area of Ω.
    pub fn exact_area(&self) -> f64 {
        let outer = match self.shape {
            Shape::Rectangle { size, .. } => size[0] * size[1],
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Annulus { outer_radius, .. } => PI * outer_radius * outer_radius,
        };
        outer - self.all_holes().iter().map(|h| h.exact_area()).sum::<f64>()
    }

    fn check_geometry(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{what} must be positive, got {v}")))
            }
        };
        match self.shape {
            Shape::Rectangle { size, .. } => {
                positive(size[0], "rectangle width")?;
                positive(size[1], "rectangle height")?;
            }
            Shape::Disk { radius, .. } => positive(radius, "disk radius")?,
            Shape::Annulus {
                inner_radius,
                outer_radius,
                ..
            } => {
                positive(inner_radius, "annulus inner radius")?;
                positive(outer_radius - inner_radius, "annulus width")?;
            }
        }
        if self.resolution < 8 {
            return Err(Error::Domain(format!(
                "grid resolution {} is below the minimum of 8",
                self.resolution
            )));
        }
        let holes = self.all_holes();
        for (k, hole) in holes.iter().enumerate() {
            match *hole {
                HoleShape::Disk { radius, .. } => positive(radius, "hole radius")?,
                HoleShape::Rectangle { size, .. } => {
                    positive(size[0], "hole width")?;
                    positive(size[1], "hole height")?;
                }
            }
            if !self.hole_strictly_inside(hole) {
                return Err(Error::Domain(format!(
                    "hole {k} touches or crosses the outer boundary"
                )));
            }
            for (l, other) in holes.iter().enumerate().take(k) {
                if holes_meet(hole, other) {
                    return Err(Error::Domain(format!("holes {l} and {k} overlap or touch")));
                }
            }
        }
        if let Some(bb) = self.bounding_box {
            positive(bb.lengths[0], "bounding box width")?;
            positive(bb.lengths[1], "bounding box height")?;
            let sb = self.shape_box();
            let tol = 1e-12 * (bb.lengths[0] + bb.lengths[1]);
            if sb.origin[0] < bb.origin[0] - tol
                || sb.origin[1] < bb.origin[1] - tol
                || sb.origin[0] + sb.lengths[0] > bb.origin[0] + bb.lengths[0] + tol
                || sb.origin[1] + sb.lengths[1] > bb.origin[1] + bb.lengths[1] + tol
            {
                return Err(Error::Domain("bounding box does not contain the outer shape".into()));
            }
        }
        Ok(())
    }

    fn hole_strictly_inside(&self, hole: &HoleShape) -> bool {
        match (&self.shape, hole) {
            (Shape::Disk { center, radius }, HoleShape::Disk { center: c, radius: r })
            | (
                Shape::Annulus {
                    center,
                    outer_radius: radius,
                    ..
                },
                HoleShape::Disk { center: c, radius: r },
            ) => dist(*center, *c) + r < *radius,
            (Shape::Disk { center, radius }, HoleShape::Rectangle { center: c, size })
            | (
                Shape::Annulus {
                    center,
                    outer_radius: radius,
                    ..
                },
                HoleShape::Rectangle { center: c, size },
            ) => rect_corners(*c, *size)
                .iter()
                .all(|&p| dist(p, *center) < *radius),
            (Shape::Rectangle { center, size }, HoleShape::Disk { center: c, radius: r }) => {
                (0..2).all(|d| (c[d] - center[d]).abs() + r < size[d] / 2.0)
            }
            (Shape::Rectangle { center, size }, HoleShape::Rectangle { center: c, size: s }) => {
                (0..2).all(|d| (c[d] - center[d]).abs() + s[d] / 2.0 < size[d] / 2.0)
            }
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn in_rect(p: [f64; 2], c: [f64; 2], s: [f64; 2]) -> bool {
    (p[0] - c[0]).abs() < s[0] / 2.0 && (p[1] - c[1]).abs() < s[1] / 2.0
}

fn rect_corners(c: [f64; 2], s: [f64; 2]) -> [[f64; 2]; 4] {
    let (hx, hy) = (s[0] / 2.0, s[1] / 2.0);
    [
        [c[0] - hx, c[1] - hy],
        [c[0] + hx, c[1] - hy],
        [c[0] + hx, c[1] + hy],
        [c[0] - hx, c[1] + hy],
    ]
}

fn rect_point_distance(c: [f64; 2], s: [f64; 2], p: [f64; 2]) -> f64 {
    let dx = ((p[0] - c[0]).abs() - s[0] / 2.0).max(0.0);
    let dy = ((p[1] - c[1]).abs() - s[1] / 2.0).max(0.0);
    dx.hypot(dy)
}

fn holes_meet(a: &HoleShape, b: &HoleShape) -> bool {
    match (a, b) {
        (HoleShape::Disk { center: c1, radius: r1 }, HoleShape::Disk { center: c2, radius: r2 }) => {
            dist(*c1, *c2) <= r1 + r2
        }
        (HoleShape::Disk { center, radius }, HoleShape::Rectangle { center: c, size })
        | (HoleShape::Rectangle { center: c, size }, HoleShape::Disk { center, radius }) => {
            rect_point_distance(*c, *size, *center) <= *radius
        }
        (HoleShape::Rectangle { center: c1, size: s1 }, HoleShape::Rectangle { center: c2, size: s2 }) => {
            (0..2).all(|d| (c1[d] - c2[d]).abs() <= (s1[d] + s2[d]) / 2.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellLabel {
    Omega,
    Hole(usize),
    Exterior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryId {
    Outer,
    Hole(usize),
}

impl std::fmt::Display for BoundaryId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryId::Outer => write!(f, "outer"),
            BoundaryId::Hole(k) => write!(f, "hole_{k}"),
        }
    }
}

/// Classification of grid vertices by the four cells around them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexClass {
    /// all four cells in Ω
    OmegaInterior,
    /// all four cells in Ω̃, at least one in the given hole
    Hole(usize),
    /// touches the exterior or the edge of the grid
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Omega,
    OmegaTilde,
    Hole(usize),
}

/// Unit outward normal of an axis-aligned boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normal {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Normal {
    pub fn vector(self) -> [f64; 2] {
        match self {
            Normal::PlusX => [1.0, 0.0],
            Normal::MinusX => [-1.0, 0.0],
            Normal::PlusY => [0.0, 1.0],
            Normal::MinusY => [0.0, -1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub face: usize,
    pub normal: Normal,
    pub boundary: BoundaryId,
}

/// Link between two neighbouring Ω cells, oriented in the +x or +y direction.
/// `tail`/`head` are compact Ω indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub face: usize,
    pub tail: usize,
    pub head: usize,
}

#[derive(Clone, Debug)]
pub struct Domain {
    spec: DomainSpec,
    holes: Vec<HoleShape>,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    labels: Vec<CellLabel>,
    omega_cells: Vec<usize>,
    omega_index: Vec<usize>,
    vertex_class: Vec<VertexClass>,
    interior_vertices: Vec<usize>,
    interior_index: Vec<usize>,
    edges: Vec<Edge>,
    edge_index: Vec<usize>,
    boundary_faces: Vec<BoundaryFace>,
}

pub const NONE: usize = usize::MAX;

impl Domain {
    pub fn build(spec: &DomainSpec) -> Result<Self> {
        spec.check_geometry()?;
        let bb = spec.bounding_box.unwrap_or_else(|| spec.shape_box());
        let h = bb.lengths[0].max(bb.lengths[1]) / spec.resolution as f64;
        let nx = ((bb.lengths[0] / h) - 1e-9).ceil().max(1.0) as usize;
        let ny = ((bb.lengths[1] / h) - 1e-9).ceil().max(1.0) as usize;
        let holes = spec.all_holes();
        let origin = bb.origin;
        let mut labels = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let p = [
                    origin[0] + (i as f64 + 0.5) * h,
                    origin[1] + (j as f64 + 0.5) * h,
                ];
                let label = if !spec.outer_contains(p) {
                    CellLabel::Exterior
                } else if let Some(k) = holes.iter().position(|hs| hs.contains(p)) {
                    CellLabel::Hole(k)
                } else {
                    CellLabel::Omega
                };
                labels.push(label);
            }
        }
        let mut omega_cells = Vec::new();
        let mut omega_index = vec![NONE; nx * ny];
        for (c, l) in labels.iter().enumerate() {
            if *l == CellLabel::Omega {
                omega_index[c] = omega_cells.len();
                omega_cells.push(c);
            }
        }
        let mut d = Domain {
            spec: spec.clone(),
            holes,
            nx,
            ny,
            h,
            origin,
            labels,
            omega_cells,
            omega_index,
            vertex_class: Vec::new(),
            interior_vertices: Vec::new(),
            interior_index: Vec::new(),
            edges: Vec::new(),
            edge_index: Vec::new(),
            boundary_faces: Vec::new(),
        };
        d.classify_vertices();
        d.collect_edges();
        d.boundary_faces = d.region_boundary_faces(Region::Omega);
        d.validate_topology()?;
        Ok(d)
    }

    fn classify_vertices(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        let mut classes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let mut class = VertexClass::OmegaInterior;
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let label = if i >= di && j >= dj && i - di < nx && j - dj < ny {
                        self.label(i - di, j - dj)
                    } else {
                        CellLabel::Exterior
                    };
                    match label {
                        CellLabel::Exterior => {
                            class = VertexClass::Boundary;
                            break;
                        }
                        CellLabel::Hole(k) => {
                            if class == VertexClass::OmegaInterior {
                                class = VertexClass::Hole(k);
                            }
                        }
                        CellLabel::Omega => {}
                    }
                }
                classes.push(class);
            }
        }
        self.vertex_class = classes;
        self.interior_index = vec![NONE; self.vertex_class.len()];
        self.interior_vertices.clear();
        for (v, c) in self.vertex_class.iter().enumerate() {
            if *c != VertexClass::Boundary {
                self.interior_index[v] = self.interior_vertices.len();
                self.interior_vertices.push(v);
            }
        }
    }

    fn collect_edges(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        let mut edges = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                let t = self.omega_index[c];
                if t == NONE {
                    continue;
                }
                if i + 1 < nx {
                    let hd = self.omega_index[c + 1];
                    if hd != NONE {
                        edges.push(Edge {
                            face: self.xface(i + 1, j),
                            tail: t,
                            head: hd,
                        });
                    }
                }
                if j + 1 < ny {
                    let hd = self.omega_index[c + nx];
                    if hd != NONE {
                        edges.push(Edge {
                            face: self.yface(i, j + 1),
                            tail: t,
                            head: hd,
                        });
                    }
                }
            }
        }
        self.edge_index = vec![NONE; self.n_faces()];
        for (k, e) in edges.iter().enumerate() {
            self.edge_index[e.face] = k;
        }
        self.edges = edges;
    }

    fn validate_topology(&self) -> Result<()> {
        if self.omega_cells.is_empty() {
            return Err(Error::Domain("no grid cell lies in the domain".into()));
        }
        let (nx, ny) = (self.nx, self.ny);
        for (k, _) in self.holes.iter().enumerate() {
            let cells: Vec<usize> = (0..nx * ny)
                .filter(|&c| self.labels[c] == CellLabel::Hole(k))
                .collect();
            if cells.is_empty() {
                return Err(Error::Domain(format!(
                    "hole {k} is not resolved by the grid (increase the resolution)"
                )));
            }
            for &c in &cells {
                let (i, j) = (c % nx, c / nx);
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        let label = if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                            CellLabel::Exterior
                        } else {
                            self.label(a as usize, b as usize)
                        };
                        match label {
                            CellLabel::Omega => {}
                            CellLabel::Hole(l) if l == k => {}
                            CellLabel::Hole(l) => {
                                return Err(Error::Domain(format!(
                                    "holes {k} and {l} touch at grid resolution"
                                )))
                            }
                            CellLabel::Exterior => {
                                return Err(Error::Domain(format!(
                                    "hole {k} touches the outer boundary at grid resolution"
                                )))
                            }
                        }
                    }
                }
            }
        }
        let omega = self.region_mask(Region::Omega);
        let b = betti(nx, ny, &omega);
        if b.0 != 1 {
            return Err(Error::Domain(format!(
                "domain cells form {} connected components",
                b.0
            )));
        }
        if b.1 != self.holes.len() {
            return Err(Error::Domain(format!(
                "first Betti number {} differs from the hole count {}",
                b.1,
                self.holes.len()
            )));
        }
        let filled = betti(nx, ny, &self.region_mask(Region::OmegaTilde));
        if filled != (1, 0) {
            return Err(Error::Domain(format!(
                "filled domain is not simply connected (Betti numbers {filled:?})"
            )));
        }
        for k in 0..self.holes.len() {
            let w = self.hole_loop_winding(k)?;
            if w != 1 {
                return Err(Error::Domain(format!(
                    "boundary loop of hole {k} has winding number {w}"
                )));
            }
        }
        Ok(())
    }

    /// Winding number of the boundary face loop of hole `k` around its center.
    /// Fails unless the faces form a single closed loop.
    pub fn hole_loop_winding(&self, k: usize) -> Result<i64> {
        let faces: Vec<&BoundaryFace> = self
            .boundary_faces
            .iter()
            .filter(|f| f.boundary == BoundaryId::Hole(k))
            .collect();
        if faces.is_empty() {
            return Err(Error::Domain(format!("hole {k} has no boundary faces")));
        }
        // oriented segments with the hole on the left
        let mut next: HashMap<usize, usize> = HashMap::new();
        let mut segs = Vec::with_capacity(faces.len());
        for f in &faces {
            let (a, b) = self.face_endpoints(f.face);
            // the hole lies along +normal; positive orientation of the hole's boundary
            // has tangent rot90(-normal)
            let n = f.normal.vector();
            let t = [n[1], -n[0]];
            let pa = self.vertex_position(a);
            let pb = self.vertex_position(b);
            let along = (pb[0] - pa[0]) * t[0] + (pb[1] - pa[1]) * t[1];
            let (s, e) = if along > 0.0 { (a, b) } else { (b, a) };
            if next.insert(s, e).is_some() {
                return Err(Error::Domain(format!(
                    "boundary of hole {k} is pinched at a vertex"
                )));
            }
            segs.push((s, e));
        }
        let start = segs[0].0;
        let mut v = start;
        let c = self.holes[k].center();
        let mut angle = 0.0;
        for step in 0..=segs.len() {
            let Some(&w) = next.get(&v) else {
                return Err(Error::Domain(format!("boundary of hole {k} is not closed")));
            };
            let p = self.vertex_position(v);
            let q = self.vertex_position(w);
            let a1 = (p[1] - c[1]).atan2(p[0] - c[0]);
            let a2 = (q[1] - c[1]).atan2(q[0] - c[0]);
            let mut da = a2 - a1;
            while da > PI {
                da -= 2.0 * PI;
            }
            while da < -PI {
                da += 2.0 * PI;
            }
            angle += da;
            v = w;
            if v == start {
                if step + 1 != segs.len() {
                    return Err(Error::Domain(format!(
                        "boundary of hole {k} consists of several loops"
                    )));
                }
                return Ok((angle / (2.0 * PI)).round() as i64);
            }
        }
        Err(Error::Domain(format!("boundary of hole {k} is not closed")))
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn holes(&self) -> &[HoleShape] {
        &self.holes
    }

    pub fn hole_count(&self) -> usize {
        self.holes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_vertices(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_faces(&self) -> usize {
        self.n_xfaces() + self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn vertex(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        self.n_xfaces() + j * self.nx + i
    }

    /// `(is_xface, i, j)` of a unified face index.
    #[inline]
    pub fn face_coords(&self, f: usize) -> (bool, usize, usize) {
        let nxf = self.n_xfaces();
        if f < nxf {
            (true, f % (self.nx + 1), f / (self.nx + 1))
        } else {
            let g = f - nxf;
            (false, g % self.nx, g / self.nx)
        }
    }

    /// The two cells on either side of a face, lower/left first (`None` off grid).
    pub fn face_cells(&self, f: usize) -> (Option<usize>, Option<usize>) {
        let (is_x, i, j) = self.face_coords(f);
        if is_x {
            let lo = (i > 0).then(|| self.cell(i - 1, j));
            let hi = (i < self.nx).then(|| self.cell(i, j));
            (lo, hi)
        } else {
            let lo = (j > 0).then(|| self.cell(i, j - 1));
            let hi = (j < self.ny).then(|| self.cell(i, j));
            (lo, hi)
        }
    }

    /// End vertices of a face, lower/left first.
    pub fn face_endpoints(&self, f: usize) -> (usize, usize) {
        let (is_x, i, j) = self.face_coords(f);
        if is_x {
            (self.vertex(i, j), self.vertex(i, j + 1))
        } else {
            (self.vertex(i, j), self.vertex(i + 1, j))
        }
    }

    pub fn face_midpoint(&self, f: usize) -> [f64; 2] {
        let (is_x, i, j) = self.face_coords(f);
        let h = self.h;
        if is_x {
            [self.origin[0] + i as f64 * h, self.origin[1] + (j as f64 + 0.5) * h]
        } else {
            [self.origin[0] + (i as f64 + 0.5) * h, self.origin[1] + j as f64 * h]
        }
    }

    #[inline]
    pub fn label(&self, i: usize, j: usize) -> CellLabel {
        self.labels[j * self.nx + i]
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = (c % self.nx, c / self.nx);
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    pub fn vertex_position(&self, v: usize) -> [f64; 2] {
        let (i, j) = (v % (self.nx + 1), v / (self.nx + 1));
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    /// Grid indices of the Ω cells, in the order used by [`crate::calculus::ComplexField`].
    pub fn omega_cells(&self) -> &[usize] {
        &self.omega_cells
    }

    pub fn n_omega(&self) -> usize {
        self.omega_cells.len()
    }

    /// Compact Ω index of grid cell `c`, or [`NONE`].
    #[inline]
    pub fn omega_index(&self, c: usize) -> usize {
        self.omega_index[c]
    }

    pub fn omega_center(&self, k: usize) -> [f64; 2] {
        self.cell_center(self.omega_cells[k])
    }

    pub fn vertex_class(&self, v: usize) -> VertexClass {
        self.vertex_class[v]
    }

    /// Vertices whose four surrounding cells all lie in Ω̃, in grid order.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior_vertices
    }

    #[inline]
    pub fn interior_index(&self, v: usize) -> usize {
        self.interior_index[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Index into [`Domain::edges`] of the link crossing face `f`, or [`NONE`].
    #[inline]
    pub fn edge_at_face(&self, f: usize) -> usize {
        self.edge_index[f]
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn boundary_ids(&self) -> Vec<BoundaryId> {
        let mut ids: Vec<BoundaryId> = self.boundary_faces.iter().map(|f| f.boundary).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Quadrature weight of every grid cell.
    pub fn cell_weight(&self) -> f64 {
        self.h * self.h
    }

    pub fn in_region(&self, c: usize, region: Region) -> bool {
        match (region, self.labels[c]) {
            (Region::Omega, CellLabel::Omega) => true,
            (Region::OmegaTilde, CellLabel::Omega | CellLabel::Hole(_)) => true,
            (Region::Hole(k), CellLabel::Hole(l)) => k == l,
            _ => false,
        }
    }

    pub fn region_mask(&self, region: Region) -> Vec<bool> {
        (0..self.n_cells()).map(|c| self.in_region(c, region)).collect()
    }

    pub fn area(&self, region: Region) -> Result<f64> {
        if let Region::Hole(k) = region {
            if k >= self.holes.len() {
                return Err(Error::Invalid(format!("unknown hole id {k}")));
            }
        }
        let count = (0..self.n_cells()).filter(|&c| self.in_region(c, region)).count();
        Ok(count as f64 * self.cell_weight())
    }

    /// Faces separating a region cell from a non-region cell, with outward normals.
    pub fn region_boundary_faces(&self, region: Region) -> Vec<BoundaryFace> {
        let mut out = Vec::new();
        for f in 0..self.n_faces() {
            let (lo, hi) = self.face_cells(f);
            let inside = |c: Option<usize>| c.is_some_and(|c| self.in_region(c, region));
            let (a, b) = (inside(lo), inside(hi));
            if a == b {
                continue;
            }
            let (is_x, _, _) = self.face_coords(f);
            let (normal, other) = match (is_x, a) {
                (true, true) => (Normal::PlusX, hi),
                (true, false) => (Normal::MinusX, lo),
                (false, true) => (Normal::PlusY, hi),
                (false, false) => (Normal::MinusY, lo),
            };
            let boundary = match other.map(|c| self.labels[c]) {
                Some(CellLabel::Hole(k)) if region == Region::Omega => BoundaryId::Hole(k),
                _ => BoundaryId::Outer,
            };
            out.push(BoundaryFace {
                face: f,
                normal,
                boundary,
            });
        }
        out
    }

    /// Betti numbers `(b0, b1)` of the cubical complex spanned by the region's cells.
    pub fn betti(&self, region: Region) -> (usize, usize) {
        betti(self.nx, self.ny, &self.region_mask(region))
    }
}

/// Betti numbers `(b0, b1)` of the cubical complex of a cell set: cells are
/// vertices, 4-adjacent pairs are edges, fully occupied 2x2 blocks are squares.
pub fn betti(nx: usize, ny: usize, mask: &[bool]) -> (usize, usize) {
    let at = |i: usize, j: usize| mask[j * nx + i];
    let mut v = 0i64;
    let mut e = 0i64;
    let mut f = 0i64;
    for j in 0..ny {
        for i in 0..nx {
            if !at(i, j) {
                continue;
            }
            v += 1;
            if i + 1 < nx && at(i + 1, j) {
                e += 1;
            }
            if j + 1 < ny && at(i, j + 1) {
                e += 1;
            }
            if i + 1 < nx && j + 1 < ny && at(i + 1, j) && at(i, j + 1) && at(i + 1, j + 1) {
                f += 1;
            }
        }
    }
    let b0 = components(nx, ny, mask, false).1 as i64;
    let b1 = b0 - (v - e + f);
    (b0 as usize, b1.max(0) as usize)
}

/// Connected components of a cell set (4- or 8-connectivity).
/// Returns per-cell component ids ([`NONE`] outside the set) and the count.
pub fn components(nx: usize, ny: usize, mask: &[bool], diagonal: bool) -> (Vec<usize>, usize) {
    let mut comp = vec![NONE; nx * ny];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..nx * ny {
        if !mask[start] || comp[start] != NONE {
            continue;
        }
        comp[start] = count;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            let (i, j) = ((c % nx) as i64, (c / nx) as i64);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if (di == 0 && dj == 0) || (!diagonal && di != 0 && dj != 0) {
                        continue;
                    }
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    let n = b as usize * nx + a as usize;
                    if mask[n] && comp[n] == NONE {
                        comp[n] = count;
                        queue.push_back(n);
                    }
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_area_is_exact() {
        let d = Domain::build(&DomainSpec::unit_square(32)).unwrap();
        assert_eq!(d.n_omega(), 32 * 32);
        assert!((d.area(Region::Omega).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(d.betti(Region::Omega), (1, 0));
        assert_eq!(d.boundary_ids(), vec![BoundaryId::Outer]);
    }

    #[test]
    fn square_with_square_hole() {
        let spec = DomainSpec {
            bounding_box: None,
            shape: Shape::Rectangle {
                center: [0.0, 0.0],
                size: [2.0, 2.0],
            },
            holes: vec![HoleShape::Rectangle {
                center: [0.0, 0.0],
                size: [0.5, 0.5],
            }],
            resolution: 32,
        };
        let d = Domain::build(&spec).unwrap();
        assert_eq!(d.hole_count(), 1);
        assert_eq!(d.boundary_ids(), vec![BoundaryId::Outer, BoundaryId::Hole(0)]);
        assert_eq!(d.betti(Region::Omega), (1, 1));
        assert_eq!(d.betti(Region::OmegaTilde), (1, 0));
        assert!((d.area(Region::Hole(0)).unwrap() - 0.25).abs() < 1e-14);
        assert_eq!(d.hole_loop_winding(0).unwrap(), 1);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Domain::build(&DomainSpec::unit_square(4)).is_err());
        // hole crossing the outer boundary
        assert!(Domain::build(&DomainSpec::disk_with_hole(1.0, [0.8, 0.0], 0.3, 32)).is_err());
        let two = DomainSpec {
            holes: vec![
                HoleShape::Disk { center: [0.3, 0.0], radius: 0.2 },
                HoleShape::Disk { center: [0.0, 0.0], radius: 0.2 },
            ],
            ..DomainSpec::disk([0.0, 0.0], 1.0, 32)
        };
        assert!(matches!(Domain::build(&two), Err(Error::Domain(_))));
        // resolution too coarse to separate hole and boundary
        assert!(Domain::build(&DomainSpec::disk_with_hole(1.0, [0.7, 0.0], 0.28, 8)).is_err());
    }

    #[test]
    fn annulus_topology() {
        let d = Domain::build(&DomainSpec::annulus(0.3, 1.0, 64)).unwrap();
        assert_eq!(d.betti(Region::Omega), (1, 1));
        assert_eq!(d.betti(Region::OmegaTilde), (1, 0));
        let faces = d.boundary_faces();
        assert!(faces.iter().any(|f| f.boundary == BoundaryId::Hole(0)));
        // every Ω boundary face separates exactly one Ω cell from a non-Ω cell
        for bf in faces {
            let (a, b) = d.face_cells(bf.face);
            let ina = a.is_some_and(|c| d.in_region(c, Region::Omega));
            let inb = b.is_some_and(|c| d.in_region(c, Region::Omega));
            assert!(ina ^ inb);
        }
    }
}
