//! Weighted simplicial model spaces: construction of the reference shapes,
//! uniform refinement, the line-oriented mesh text format, and the geometric
//! data (cell frames, metrics, lumped interior and boundary masses) every
//! other module builds on.
//!
//! Functions live on vertices. Each cell carries the frame spanned by its
//! edge vectors `e_a = p_a - p_0` (vertices sorted by index), the Gram matrix
//! of that frame as cell metric, and the cell average of `e^{-2w}` as weight
//! factor. The interior measure is `m = e^{-2w} vol`, lumped to vertices; the
//! boundary measure `s = e^{-2w} surf` is lumped to boundary vertices, half of
//! each facet per endpoint in dimension two.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

const MAX_DIHEDRAL_COS_SLACK: f64 = 1e-12;

/// The built-in model shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Interval,
    Rectangle,
    Disk,
    Annulus,
    Sphere,
    Hemisphere,
    /// Flat square torus; not part of the file format shapes but needed for
    /// boundaryless flat checks.
    Torus,
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(Shape::Interval),
            "rectangle" => Ok(Shape::Rectangle),
            "disk" => Ok(Shape::Disk),
            "annulus" => Ok(Shape::Annulus),
            "sphere" => Ok(Shape::Sphere),
            "hemisphere" => Ok(Shape::Hemisphere),
            "torus" => Ok(Shape::Torus),
            other => Err(Error::UnsupportedShape(other.to_string())),
        }
    }
}

/// A boundary facet with outward orientation: in dimension one a single
/// vertex, in dimension two an ordered edge (a, b) whose owning cell lies to
/// the left of a→b.
#[derive(Debug, Clone)]
pub struct BoundaryFacet {
    pub vertices: Vec<u32>,
    pub cell: u32,
}

/// Weight function descriptors evaluable at vertices.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFn {
    Zero,
    /// w(p) = c0 + sum_i c[i] * p[i]
    Affine(Vec<f64>, f64),
    /// w(p) = c * |p|^2
    RadialSquare(f64),
}

impl WeightFn {
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            WeightFn::Zero => 0.0,
            WeightFn::Affine(c, c0) => {
                c0 + c.iter().zip(p).map(|(a, x)| a * x).sum::<f64>()
            }
            WeightFn::RadialSquare(c) => c * p.iter().map(|x| x * x).sum::<f64>(),
        }
    }
}

/// A weighted simplicial model space of topological dimension one or two.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    pub dim: usize,
    pub embed_dim: usize,
    pub shape: Option<Shape>,
    /// Vertex coordinates, `embed_dim` per vertex.
    pub vertices: Vec<f64>,
    /// Cell vertex indices, `dim + 1` per cell, sorted ascending.
    pub cells: Vec<u32>,
    pub boundary_facets: Vec<BoundaryFacet>,
    /// Per-vertex weight w; the measures carry the factor e^{-2w}.
    pub weight_w: Vec<f64>,
    /// Periods of a flat torus (empty otherwise).
    pub periods: Vec<f64>,

    // derived geometry
    /// Edge frames, `embed_dim * dim` per cell, column a = p_a - p_0.
    pub frames: Vec<f64>,
    /// Cell metrics (Gram matrices), `dim*dim` per cell.
    pub cell_metric: Vec<f64>,
    pub cell_metric_inv: Vec<f64>,
    /// Unweighted simplex volumes.
    pub cell_volume: Vec<f64>,
    /// Cell averages of e^{-2w}.
    pub cell_weight: Vec<f64>,
    /// Lumped interior masses m_i (strictly positive).
    pub interior_mass: Vec<f64>,
    /// Lumped boundary masses s_i (zero at interior vertices).
    pub boundary_mass: Vec<f64>,
    pub is_boundary: Vec<bool>,
    pub boundary_vertices: Vec<u32>,
    /// Cells adjacent to each vertex together with the lumping weight
    /// |c| e^{-2w(v)} / (dim+1).
    pub vertex_cells: Vec<Vec<(u32, f64)>>,
    /// Vertex values of the coordinate-like functions whose gradients span
    /// every tangent fiber (ambient coordinates, or trigonometric coordinates
    /// on the torus).
    pub coord_fields: Vec<Vec<f64>>,
    pub space_id: u64,
}

impl ModelSpace {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len() / self.embed_dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn cell(&self, c: usize) -> &[u32] {
        &self.cells[c * (self.dim + 1)..(c + 1) * (self.dim + 1)]
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.vertices[v * self.embed_dim..(v + 1) * self.embed_dim]
    }

    pub fn metric(&self, c: usize) -> &[f64] {
        &self.cell_metric[c * self.dim * self.dim..(c + 1) * self.dim * self.dim]
    }

    pub fn metric_inv(&self, c: usize) -> &[f64] {
        &self.cell_metric_inv[c * self.dim * self.dim..(c + 1) * self.dim * self.dim]
    }

    pub fn frame(&self, c: usize) -> &[f64] {
        &self.frames[c * self.embed_dim * self.dim..(c + 1) * self.embed_dim * self.dim]
    }

    pub fn total_interior_mass(&self) -> f64 {
        self.interior_mass.iter().sum()
    }

    pub fn total_boundary_mass(&self) -> f64 {
        self.boundary_mass.iter().sum()
    }

    /// Mesh size: the longest edge over all cells.
    pub fn mesh_size(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in 0..self.n_cells() {
            let g = self.metric(c);
            for a in 0..self.dim {
                h = h.max(g[a * self.dim + a].sqrt());
            }
            if self.dim == 2 {
                // third edge p2 - p1
                let e = g[0] + g[3] - 2.0 * g[1];
                h = h.max(e.max(0.0).sqrt());
            }
        }
        h
    }

    /// Displacement p_b - p_a, unwrapped by minimum image on a torus.
    fn delta(&self, a: usize, b: usize) -> Vec<f64> {
        let pa = self.vertex(a);
        let pb = self.vertex(b);
        let mut d: Vec<f64> = pb.iter().zip(pa).map(|(x, y)| x - y).collect();
        if !self.periods.is_empty() {
            for (k, &period) in self.periods.iter().enumerate() {
                if d[k] > 0.5 * period {
                    d[k] -= period;
                } else if d[k] < -0.5 * period {
                    d[k] += period;
                }
            }
        }
        d
    }

    /// Construct a model space from raw data, deriving all geometry and
    /// checking every type invariant.
    pub fn from_raw(
        dim: usize,
        embed_dim: usize,
        shape: Option<Shape>,
        vertices: Vec<f64>,
        mut cells: Vec<u32>,
        boundary: Option<Vec<Vec<u32>>>,
        weight_w: Vec<f64>,
        periods: Vec<f64>,
    ) -> Result<ModelSpace> {
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidSize(format!("dimension {dim} not supported")));
        }
        let nv = vertices.len() / embed_dim;
        if vertices.len() % embed_dim != 0 {
            return Err(Error::InvalidSize("ragged vertex coordinates".into()));
        }
        if weight_w.len() != nv {
            return Err(Error::InvalidSize("weight length != vertex count".into()));
        }
        if cells.len() % (dim + 1) != 0 {
            return Err(Error::InvalidSize("ragged cell list".into()));
        }
        for chunk in cells.chunks_mut(dim + 1) {
            chunk.sort_unstable();
            if chunk.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invariant {
                    invariant: "simplex-vertices-distinct",
                    msg: format!("degenerate cell {chunk:?}"),
                });
            }
            if chunk[dim] as usize >= nv {
                return Err(Error::Parse {
                    line: 0,
                    msg: "vertex index out of range".into(),
                });
            }
        }

        let mut space = ModelSpace {
            dim,
            embed_dim,
            shape,
            vertices,
            cells,
            boundary_facets: Vec::new(),
            weight_w,
            periods,
            frames: Vec::new(),
            cell_metric: Vec::new(),
            cell_metric_inv: Vec::new(),
            cell_volume: Vec::new(),
            cell_weight: Vec::new(),
            interior_mass: Vec::new(),
            boundary_mass: Vec::new(),
            is_boundary: Vec::new(),
            boundary_vertices: Vec::new(),
            vertex_cells: Vec::new(),
            coord_fields: Vec::new(),
            space_id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
        };
        space.extract_boundary(boundary)?;
        space.build_geometry()?;
        space.build_coord_fields();
        Ok(space)
    }

    /// Facet incidence: every boundary facet belongs to exactly one cell,
    /// every interior facet to exactly two.
    fn extract_boundary(&mut self, declared: Option<Vec<Vec<u32>>>) -> Result<()> {
        let d = self.dim;
        let mut facet_cells: HashMap<Vec<u32>, Vec<u32>> = HashMap::new();
        for c in 0..self.n_cells() {
            let cell = self.cell(c).to_vec();
            for skip in 0..=d {
                let mut f: Vec<u32> = cell
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, v)| *v)
                    .collect();
                f.sort_unstable();
                facet_cells.entry(f).or_default().push(c as u32);
            }
        }
        let mut computed: Vec<BoundaryFacet> = Vec::new();
        for (f, cs) in facet_cells.iter() {
            match cs.len() {
                1 => computed.push(BoundaryFacet { vertices: f.clone(), cell: cs[0] }),
                2 => {}
                n => {
                    return Err(Error::Invariant {
                        invariant: "facet-incidence",
                        msg: format!("facet {f:?} belongs to {n} cells"),
                    })
                }
            }
        }
        computed.sort_by(|a, b| a.vertices.cmp(&b.vertices));

        if let Some(listed) = declared {
            let mut keys: Vec<Vec<u32>> = listed
                .iter()
                .map(|f| {
                    let mut k = f.clone();
                    k.sort_unstable();
                    k
                })
                .collect();
            keys.sort();
            let computed_keys: Vec<Vec<u32>> =
                computed.iter().map(|f| f.vertices.clone()).collect();
            if keys != computed_keys {
                return Err(Error::Invariant {
                    invariant: "facet-incidence",
                    msg: "declared boundary does not match facet incidence".into(),
                });
            }
        }
        // orient 2d facets so that the owning cell lies on the left of a→b
        if d == 2 {
            for f in computed.iter_mut() {
                let (a, b) = (f.vertices[0] as usize, f.vertices[1] as usize);
                let cell = self.cell(f.cell as usize);
                let opp = *cell.iter().find(|v| **v as usize != a && **v as usize != b).unwrap()
                    as usize;
                let e = self.delta(a, b);
                let w = self.delta(a, opp);
                // cross product z-component in the facet plane
                let cross = e[0] * w[1] - e[1] * w[0];
                let oriented = if self.embed_dim == 3 {
                    // boundary facets of embedded surfaces: orient by the
                    // projection to the plane spanned with the opposite vertex
                    cross
                } else {
                    cross
                };
                if oriented < 0.0 {
                    f.vertices.swap(0, 1);
                }
            }
        }
        self.boundary_facets = computed;
        Ok(())
    }

    fn build_geometry(&mut self) -> Result<()> {
        let d = self.dim;
        let nv = self.n_vertices();
        let nc = self.n_cells();
        self.frames = vec![0.0; nc * self.embed_dim * d];
        self.cell_metric = vec![0.0; nc * d * d];
        self.cell_metric_inv = vec![0.0; nc * d * d];
        self.cell_volume = vec![0.0; nc];
        self.cell_weight = vec![0.0; nc];
        self.interior_mass = vec![0.0; nv];
        self.boundary_mass = vec![0.0; nv];
        self.vertex_cells = vec![Vec::new(); nv];

        let ew: Vec<f64> = self.weight_w.iter().map(|w| (-2.0 * w).exp()).collect();

        for c in 0..nc {
            let cell = self.cell(c).to_vec();
            let base = cell[0] as usize;
            for a in 0..d {
                let e = self.delta(base, cell[a + 1] as usize);
                for k in 0..self.embed_dim {
                    self.frames[c * self.embed_dim * d + k * d + a] = e[k];
                }
            }
            // Gram matrix
            let mut g = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    let mut acc = 0.0;
                    for k in 0..self.embed_dim {
                        acc += self.frames[c * self.embed_dim * d + k * d + a]
                            * self.frames[c * self.embed_dim * d + k * d + b];
                    }
                    g[a * d + b] = acc;
                }
            }
            let det = match d {
                1 => g[0],
                _ => g[0] * g[3] - g[1] * g[2],
            };
            if det <= 0.0 {
                return Err(Error::Invariant {
                    invariant: "metric-positive-definite",
                    msg: format!("cell {c} has degenerate metric"),
                });
            }
            let ginv = match d {
                1 => vec![1.0 / g[0]],
                _ => vec![g[3] / det, -g[1] / det, -g[2] / det, g[0] / det],
            };
            let vol = det.sqrt() / factorial(d);
            let wavg = cell.iter().map(|&v| ew[v as usize]).sum::<f64>() / (d as f64 + 1.0);
            self.cell_metric[c * d * d..(c + 1) * d * d].copy_from_slice(&g);
            self.cell_metric_inv[c * d * d..(c + 1) * d * d].copy_from_slice(&ginv);
            self.cell_volume[c] = vol;
            self.cell_weight[c] = wavg;
            self.check_non_obtuse(c, &g)?;
            for &v in cell.iter() {
                let lump = vol * ew[v as usize] / (d as f64 + 1.0);
                self.interior_mass[v as usize] += lump;
                self.vertex_cells[v as usize].push((c as u32, lump));
            }
        }

        self.is_boundary = vec![false; nv];
        for f in &self.boundary_facets {
            let fw: f64 =
                f.vertices.iter().map(|&v| ew[v as usize]).sum::<f64>() / f.vertices.len() as f64;
            let len = if d == 1 {
                1.0
            } else {
                let e = self.delta(f.vertices[0] as usize, f.vertices[1] as usize);
                e.iter().map(|x| x * x).sum::<f64>().sqrt()
            };
            for &v in &f.vertices {
                self.is_boundary[v as usize] = true;
                self.boundary_mass[v as usize] += fw * len / f.vertices.len() as f64;
            }
        }
        self.boundary_vertices = (0..nv as u32).filter(|&v| self.is_boundary[v as usize]).collect();

        for (i, &m) in self.interior_mass.iter().enumerate() {
            if !(m > 0.0) {
                return Err(Error::Invariant {
                    invariant: "mass-positive",
                    msg: format!("vertex {i} has nonpositive interior mass"),
                });
            }
        }
        for &v in &self.boundary_vertices {
            if !(self.boundary_mass[v as usize] > 0.0) {
                return Err(Error::Invariant {
                    invariant: "mass-positive",
                    msg: format!("boundary vertex {v} has nonpositive boundary mass"),
                });
            }
        }
        Ok(())
    }

    /// All simplex angles must stay at or below a right angle so that the
    /// assembled stiffness matrix has nonpositive off-diagonal entries.
    fn check_non_obtuse(&self, c: usize, g: &[f64]) -> Result<()> {
        if self.dim == 1 {
            return Ok(());
        }
        // Edge vectors in barycentric frame: e1, e2, e2 - e1. Angle at p0 is
        // between e1 and e2; at p1 between -e1 and e2 - e1; at p2 between -e2
        // and e1 - e2. Obtuse iff some inner product of the adjacent edge pair
        // is negative.
        let ip0 = g[1]; // <e1, e2>
        let ip1 = g[0] - g[1]; // <-e1, e2 - e1> = g11 - g12
        let ip2 = g[3] - g[1]; // <-e2, e1 - e2> = g22 - g12
        let scale = g[0].max(g[3]);
        for (ip, vtx) in [(ip0, 0), (ip1, 1), (ip2, 2)] {
            if ip < -MAX_DIHEDRAL_COS_SLACK * scale {
                return Err(Error::Invariant {
                    invariant: "non-obtuse",
                    msg: format!("cell {c} has an obtuse angle at local vertex {vtx}"),
                });
            }
        }
        Ok(())
    }

    fn build_coord_fields(&mut self) {
        let nv = self.n_vertices();
        let mut fields = Vec::new();
        if self.periods.is_empty() {
            for k in 0..self.embed_dim {
                fields.push((0..nv).map(|v| self.vertex(v)[k]).collect());
            }
        } else {
            // trigonometric coordinates are single-valued on the torus
            for k in 0..self.dim {
                let omega = 2.0 * std::f64::consts::PI / self.periods[k];
                fields.push((0..nv).map(|v| (omega * self.vertex(v)[k]).cos()).collect());
                fields.push((0..nv).map(|v| (omega * self.vertex(v)[k]).sin()).collect());
            }
        }
        self.coord_fields = fields;
    }

    // ------------------------------------------------------------------
    // shape constructors
    // ------------------------------------------------------------------

    /// Build one of the reference shapes at the given refinement level.
    pub fn build(
        shape: Shape,
        size_params: &[f64],
        refinement: usize,
        weight: &WeightFn,
    ) -> Result<ModelSpace> {
        if size_params.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidSize("size parameters must be positive".into()));
        }
        let mut space = match shape {
            Shape::Interval => Self::base_interval(size_params)?,
            Shape::Rectangle => Self::base_rectangle(size_params)?,
            Shape::Disk => Self::base_disk(size_params)?,
            Shape::Annulus => Self::base_annulus(size_params)?,
            Shape::Sphere => Self::base_sphere(size_params)?,
            Shape::Hemisphere => Self::base_hemisphere(size_params)?,
            Shape::Torus => Self::base_torus(size_params)?,
        };
        for _ in 0..refinement {
            space = space.refine()?;
        }
        space = space.with_weight(weight)?;
        Ok(space)
    }

    /// Re-evaluate the weight function at the vertices.
    pub fn with_weight(mut self, weight: &WeightFn) -> Result<ModelSpace> {
        let nv = self.n_vertices();
        let w: Vec<f64> = (0..nv).map(|v| weight.eval(self.vertex(v))).collect();
        self.weight_w = w;
        self.build_geometry()?;
        Ok(self)
    }

    fn base_interval(params: &[f64]) -> Result<ModelSpace> {
        let len = *params.first().ok_or_else(|| Error::InvalidSize("interval needs a length".into()))?;
        let n = 2usize;
        let vertices: Vec<f64> = (0..=n).map(|i| len * i as f64 / n as f64).collect();
        let cells: Vec<u32> = (0..n as u32).flat_map(|i| [i, i + 1]).collect();
        ModelSpace::from_raw(1, 1, Some(Shape::Interval), vertices, cells, None, vec![0.0; n + 1], vec![])
    }

    fn base_rectangle(params: &[f64]) -> Result<ModelSpace> {
        let (a, b) = match params {
            [a] => (*a, *a),
            [a, b, ..] => (*a, *b),
            _ => return Err(Error::InvalidSize("rectangle needs side lengths".into())),
        };
        let (nx, ny) = (2usize, 2usize);
        let mut vertices = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(a * i as f64 / nx as f64);
                vertices.push(b * j as f64 / ny as f64);
            }
        }
        let idx = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                cells.extend_from_slice(&[idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
                cells.extend_from_slice(&[idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        let nv = (nx + 1) * (ny + 1);
        ModelSpace::from_raw(2, 2, Some(Shape::Rectangle), vertices, cells, None, vec![0.0; nv], vec![])
    }

    fn base_disk(params: &[f64]) -> Result<ModelSpace> {
        let r = *params.first().ok_or_else(|| Error::InvalidSize("disk needs a radius".into()))?;
        let n = 6usize;
        let mut vertices = vec![0.0, 0.0];
        for k in 0..n {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            vertices.push(r * t.cos());
            vertices.push(r * t.sin());
        }
        let mut cells = Vec::new();
        for k in 0..n {
            cells.extend_from_slice(&[0, (k + 1) as u32, ((k + 1) % n + 1) as u32]);
        }
        ModelSpace::from_raw(2, 2, Some(Shape::Disk), vertices, cells, None, vec![0.0; n + 1], vec![])
    }

    fn base_annulus(params: &[f64]) -> Result<ModelSpace> {
        let (r0, r1) = match params {
            [r0, r1, ..] if r0 < r1 => (*r0, *r1),
            [r1] => (0.5 * r1, *r1),
            _ => return Err(Error::InvalidSize("annulus needs radii r0 < r1".into())),
        };
        // Shifted-row pattern: outer vertices sit over inner edge midpoints,
        // which keeps every triangle acute for moderate radius ratios.
        let n = 8usize; // sectors
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let mut vertices = Vec::new();
        for k in 0..n {
            let t = step * k as f64;
            vertices.push(r0 * t.cos());
            vertices.push(r0 * t.sin());
        }
        for k in 0..n {
            let t = step * (k as f64 + 0.5);
            vertices.push(r1 * t.cos());
            vertices.push(r1 * t.sin());
        }
        let inner = |k: usize| (k % n) as u32;
        let outer = |k: usize| (n + k % n) as u32;
        let mut cells = Vec::new();
        for k in 0..n {
            cells.extend_from_slice(&[inner(k), inner(k + 1), outer(k)]);
            cells.extend_from_slice(&[outer(k + n - 1), outer(k), inner(k)]);
        }
        ModelSpace::from_raw(2, 2, Some(Shape::Annulus), vertices, cells, None, vec![0.0; 2 * n], vec![])
    }

    fn base_sphere(params: &[f64]) -> Result<ModelSpace> {
        let r = *params.first().ok_or_else(|| Error::InvalidSize("sphere needs a radius".into()))?;
        let (vertices, cells) = icosahedron(r);
        let nv = vertices.len() / 3;
        ModelSpace::from_raw(2, 3, Some(Shape::Sphere), vertices, cells, None, vec![0.0; nv], vec![])
    }

    fn base_hemisphere(params: &[f64]) -> Result<ModelSpace> {
        let r = *params.first().ok_or_else(|| Error::InvalidSize("hemisphere needs a radius".into()))?;
        // upper half of an octahedron, apex plus equatorial square
        let n = 8usize;
        let mut vertices = vec![0.0, 0.0, r];
        for k in 0..n {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            vertices.extend_from_slice(&[r * t.cos(), r * t.sin(), 0.0]);
        }
        let mut cells = Vec::new();
        for k in 0..n as u32 {
            let a = k + 1;
            let b = (k as usize + 1) % n;
            cells.extend_from_slice(&[0, a, b as u32 + 1]);
        }
        ModelSpace::from_raw(2, 3, Some(Shape::Hemisphere), vertices, cells, None, vec![0.0; n + 1], vec![])
    }

    fn base_torus(params: &[f64]) -> Result<ModelSpace> {
        let (lx, ly) = match params {
            [l] => (*l, *l),
            [lx, ly, ..] => (*lx, *ly),
            _ => return Err(Error::InvalidSize("torus needs side lengths".into())),
        };
        let n = 4usize;
        let mut vertices = Vec::new();
        for j in 0..n {
            for i in 0..n {
                vertices.push(lx * i as f64 / n as f64);
                vertices.push(ly * j as f64 / n as f64);
            }
        }
        let idx = |i: usize, j: usize| ((j % n) * n + (i % n)) as u32;
        let mut cells = Vec::new();
        for j in 0..n {
            for i in 0..n {
                cells.extend_from_slice(&[idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
                cells.extend_from_slice(&[idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        ModelSpace::from_raw(2, 2, Some(Shape::Torus), vertices, cells, None, vec![0.0; n * n], vec![lx, ly])
    }

    /// Uniform refinement: every edge is bisected, cells split into 2^dim
    /// children. Midpoints of curved-boundary / spherical edges are projected
    /// back onto the model surface. Interior mass totals change by O(h^2).
    pub fn refine(&self) -> Result<ModelSpace> {
        let d = self.dim;
        let mut vertices = self.vertices.clone();
        let mut edge_mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut cells = Vec::new();
        let sphere_like = matches!(self.shape, Some(Shape::Sphere) | Some(Shape::Hemisphere));
        let radius = if sphere_like || matches!(self.shape, Some(Shape::Disk) | Some(Shape::Annulus))
        {
            self.shape_radius()
        } else {
            0.0
        };

        let mut boundary_edge: HashMap<(u32, u32), ()> = HashMap::new();
        for f in &self.boundary_facets {
            if d == 2 {
                let mut k = [f.vertices[0], f.vertices[1]];
                k.sort_unstable();
                boundary_edge.insert((k[0], k[1]), ());
            }
        }

        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<f64>| -> u32 {
            let key = if a < b { (a, b) } else { (b, a) };
            if let Some(&m) = edge_mid.get(&key) {
                return m;
            }
            let da = self.delta(a as usize, b as usize);
            let pa = self.vertex(a as usize);
            let mut p: Vec<f64> = pa.iter().zip(&da).map(|(x, dx)| x + 0.5 * dx).collect();
            match self.shape {
                Some(Shape::Sphere) | Some(Shape::Hemisphere) => {
                    // project to the sphere; equatorial edges stay on z = 0
                    let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                    for x in p.iter_mut() {
                        *x *= radius / norm;
                    }
                }
                Some(Shape::Disk) => {
                    if boundary_edge.contains_key(&key) {
                        let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
                        p[0] *= radius / norm;
                        p[1] *= radius / norm;
                    }
                }
                Some(Shape::Annulus) => {
                    if boundary_edge.contains_key(&key) {
                        // keep the vertex on its own circle
                        let ra = self.vertex(a as usize);
                        let target = (ra[0] * ra[0] + ra[1] * ra[1]).sqrt();
                        let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
                        p[0] *= target / norm;
                        p[1] *= target / norm;
                    }
                }
                Some(Shape::Torus) => {
                    for (k, &period) in self.periods.iter().enumerate() {
                        p[k] = p[k].rem_euclid(period);
                    }
                }
                _ => {}
            }
            let id = (verts.len() / self.embed_dim) as u32;
            verts.extend_from_slice(&p);
            edge_mid.insert(key, id);
            id
        };

        for c in 0..self.n_cells() {
            let cell = self.cell(c).to_vec();
            if d == 1 {
                let m = midpoint(cell[0], cell[1], &mut vertices);
                cells.extend_from_slice(&[cell[0], m]);
                cells.extend_from_slice(&[m, cell[1]]);
            } else {
                let (a, b, cc) = (cell[0], cell[1], cell[2]);
                let mab = midpoint(a, b, &mut vertices);
                let mbc = midpoint(b, cc, &mut vertices);
                let mac = midpoint(a, cc, &mut vertices);
                cells.extend_from_slice(&[a, mab, mac]);
                cells.extend_from_slice(&[b, mab, mbc]);
                cells.extend_from_slice(&[cc, mac, mbc]);
                cells.extend_from_slice(&[mab, mbc, mac]);
            }
        }
        let new_nv = vertices.len() / self.embed_dim;
        let mut weight = self.weight_w.clone();
        weight.resize(new_nv, 0.0);
        // re-evaluated by with_weight for built shapes; interpolate otherwise
        for (key, &mid) in edge_mid.iter() {
            weight[mid as usize] =
                0.5 * (self.weight_w[key.0 as usize] + self.weight_w[key.1 as usize]);
        }
        ModelSpace::from_raw(
            d,
            self.embed_dim,
            self.shape,
            vertices,
            cells,
            None,
            weight,
            self.periods.clone(),
        )
    }

    fn shape_radius(&self) -> f64 {
        // outer radius of the model, taken from the vertex farthest from the origin
        let mut r: f64 = 0.0;
        for v in 0..self.n_vertices() {
            let p = self.vertex(v);
            r = r.max(p.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
        r
    }

    // ------------------------------------------------------------------
    // text format
    // ------------------------------------------------------------------

    /// Serialize in the line-oriented mesh text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "tamedmesh 1 {}", self.dim).unwrap();
        writeln!(out, "vertices {}", self.n_vertices()).unwrap();
        for v in 0..self.n_vertices() {
            let p = self.vertex(v);
            let coords: Vec<String> = p.iter().map(|x| format!("{x:.17}")).collect();
            writeln!(out, "{}", coords.join(" ")).unwrap();
        }
        writeln!(out, "cells {}", self.n_cells()).unwrap();
        for c in 0..self.n_cells() {
            let idx: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", idx.join(" ")).unwrap();
        }
        writeln!(out, "boundary {}", self.boundary_facets.len()).unwrap();
        for f in &self.boundary_facets {
            let idx: Vec<String> = f.vertices.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", idx.join(" ")).unwrap();
        }
        if self.weight_w.iter().any(|&w| w != 0.0) {
            writeln!(out, "weight").unwrap();
            for w in &self.weight_w {
                writeln!(out, "{w:.17}").unwrap();
            }
        }
        if !self.periods.is_empty() {
            let p: Vec<String> = self.periods.iter().map(|x| format!("{x:.17}")).collect();
            writeln!(out, "periodic {}", p.join(" ")).unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Parse the mesh text format; errors carry 1-based line numbers.
    pub fn from_text(text: &str) -> Result<ModelSpace> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 0, msg: "empty file".into() })?;
        let htok: Vec<&str> = header.split_whitespace().collect();
        if htok.len() != 3 || htok[0] != "tamedmesh" || htok[1] != "1" {
            return Err(Error::Parse { line: hline, msg: "expected header `tamedmesh 1 <dim>`".into() });
        }
        let dim: usize = htok[2]
            .parse()
            .map_err(|_| Error::Parse { line: hline, msg: "bad dimension".into() })?;

        let expect_section = |tok: Option<(usize, &str)>, name: &str| -> Result<(usize, usize)> {
            let (ln, l) = tok.ok_or_else(|| Error::Parse { line: 0, msg: format!("missing `{name}` section") })?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 2 || t[0] != name {
                return Err(Error::Parse { line: ln, msg: format!("expected `{name} <n>`") });
            }
            let n = t[1]
                .parse()
                .map_err(|_| Error::Parse { line: ln, msg: format!("bad count in `{name}`") })?;
            Ok((ln, n))
        };

        let (_, nv) = expect_section(lines.next(), "vertices")?;
        let mut vertices: Vec<f64> = Vec::new();
        let mut embed_dim = 0usize;
        for _ in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| Error::Parse { line: 0, msg: "unexpected end of vertex list".into() })?;
            let coords: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse { line: ln, msg: "bad coordinate".into() }))
                .collect::<Result<_>>()?;
            if embed_dim == 0 {
                embed_dim = coords.len();
                if embed_dim < dim || embed_dim > 3 {
                    return Err(Error::Parse { line: ln, msg: "bad coordinate count".into() });
                }
            } else if coords.len() != embed_dim {
                return Err(Error::Parse { line: ln, msg: "inconsistent coordinate count".into() });
            }
            vertices.extend_from_slice(&coords);
        }

        let (_, ncell) = expect_section(lines.next(), "cells")?;
        let mut cells: Vec<u32> = Vec::new();
        for _ in 0..ncell {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| Error::Parse { line: 0, msg: "unexpected end of cell list".into() })?;
            let idx: Vec<u32> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse { line: ln, msg: "bad cell index".into() }))
                .collect::<Result<_>>()?;
            if idx.len() != dim + 1 {
                return Err(Error::Parse { line: ln, msg: format!("cell needs {} vertices", dim + 1) });
            }
            if idx.iter().any(|&v| v as usize >= nv) {
                return Err(Error::Parse { line: ln, msg: "vertex index out of range".into() });
            }
            cells.extend_from_slice(&idx);
        }

        let (_, nb) = expect_section(lines.next(), "boundary")?;
        let mut boundary: Vec<Vec<u32>> = Vec::new();
        for _ in 0..nb {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| Error::Parse { line: 0, msg: "unexpected end of boundary list".into() })?;
            let idx: Vec<u32> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse { line: ln, msg: "bad facet index".into() }))
                .collect::<Result<_>>()?;
            if idx.len() != dim {
                return Err(Error::Parse { line: ln, msg: format!("facet needs {dim} vertices") });
            }
            if idx.iter().any(|&v| v as usize >= nv) {
                return Err(Error::Parse { line: ln, msg: "vertex index out of range".into() });
            }
            boundary.push(idx);
        }

        let mut weight = vec![0.0; nv];
        let mut periods = vec![];
        while let Some((ln, l)) = lines.next() {
            let t: Vec<&str> = l.split_whitespace().collect();
            match t[0] {
                "weight" => {
                    for w in weight.iter_mut().take(nv) {
                        let (wln, wl) = lines
                            .next()
                            .ok_or_else(|| Error::Parse { line: ln, msg: "truncated weight section".into() })?;
                        *w = wl
                            .trim()
                            .parse()
                            .map_err(|_| Error::Parse { line: wln, msg: "bad weight value".into() })?;
                    }
                }
                "periodic" => {
                    periods = t[1..]
                        .iter()
                        .map(|x| x.parse().map_err(|_| Error::Parse { line: ln, msg: "bad period".into() }))
                        .collect::<Result<_>>()?;
                }
                other => {
                    return Err(Error::Parse { line: ln, msg: format!("unknown section `{other}`") })
                }
            }
        }

        ModelSpace::from_raw(dim, embed_dim, None, vertices, cells, Some(boundary), weight, periods)
    }

    pub fn load(path: &Path) -> Result<ModelSpace> {
        let text = std::fs::read_to_string(path)?;
        ModelSpace::from_text(&text)
    }
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|v| v as f64).product::<f64>().max(1.0)
}

fn icosahedron(r: f64) -> (Vec<f64>, Vec<u32>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw: [[f64; 3]; 12] = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut vertices = Vec::new();
    for p in raw {
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        vertices.extend_from_slice(&[r * p[0] / norm, r * p[1] / norm, r * p[2] / norm]);
    }
    let faces: [[u32; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces.iter().flatten().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn interval_unit_mass_and_boundary() {
        let s = ModelSpace::build(Shape::Interval, &[1.0], 0, &WeightFn::Zero).unwrap();
        assert_eq!(s.dim, 1);
        assert_abs_diff_eq!(s.total_interior_mass(), 1.0, epsilon = 1e-14);
        assert_eq!(s.boundary_vertices.len(), 2);
        assert_abs_diff_eq!(s.total_boundary_mass(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn disk_boundary_mass_approaches_circumference() {
        // circumference oracle 2πR
        let mut prev_err = f64::INFINITY;
        for level in 2..5 {
            let s = ModelSpace::build(Shape::Disk, &[1.0], level, &WeightFn::Zero).unwrap();
            let err = (s.total_boundary_mass() - 2.0 * PI).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 2e-3);
    }

    #[test]
    fn disk_interior_mass_second_order() {
        // area oracle πR²; observed order ≥ 1.9 across one refinement
        let errs: Vec<f64> = (2..6)
            .map(|l| {
                let s = ModelSpace::build(Shape::Disk, &[1.0], l, &WeightFn::Zero).unwrap();
                (s.total_interior_mass() - PI).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "observed order {order}");
        }
    }

    #[test]
    fn sphere_has_no_boundary_and_area_4pi() {
        let s = ModelSpace::build(Shape::Sphere, &[1.0], 3, &WeightFn::Zero).unwrap();
        assert!(s.boundary_facets.is_empty());
        let err = (s.total_interior_mass() - 4.0 * PI).abs();
        assert!(err < 0.1, "area error {err}");
        let finer = ModelSpace::build(Shape::Sphere, &[1.0], 4, &WeightFn::Zero).unwrap();
        assert!((finer.total_interior_mass() - 4.0 * PI).abs() < err / 3.5);
    }

    #[test]
    fn refinement_doubles_interval_cells() {
        let s = ModelSpace::build(Shape::Interval, &[1.0], 0, &WeightFn::Zero).unwrap();
        let r = s.refine().unwrap();
        assert_eq!(r.n_cells(), 2 * s.n_cells());
        assert_abs_diff_eq!(r.total_interior_mass(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn all_shapes_pass_invariants_across_levels() {
        for shape in [
            Shape::Interval,
            Shape::Rectangle,
            Shape::Disk,
            Shape::Annulus,
            Shape::Sphere,
            Shape::Hemisphere,
            Shape::Torus,
        ] {
            for level in 0..3 {
                let s = ModelSpace::build(shape, &[1.0], level, &WeightFn::Zero)
                    .unwrap_or_else(|e| panic!("{shape:?} level {level}: {e}"));
                assert!(s.interior_mass.iter().all(|&m| m > 0.0));
            }
        }
    }

    #[test]
    fn weighted_interval_mass_matches_quadrature() {
        // m = ∫ e^{-2w} with w = x on [0,1]: (1 - e^{-2})/2
        let w = WeightFn::Affine(vec![1.0], 0.0);
        let s = ModelSpace::build(Shape::Interval, &[1.0], 6, &w).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert_abs_diff_eq!(s.total_interior_mass(), exact, epsilon = 1e-4);
    }

    #[test]
    fn text_roundtrip_square() {
        let s = ModelSpace::build(Shape::Rectangle, &[1.0], 1, &WeightFn::Zero).unwrap();
        let text = s.to_text();
        let r = ModelSpace::from_text(&text).unwrap();
        assert_eq!(r.n_vertices(), s.n_vertices());
        assert_eq!(r.n_cells(), s.n_cells());
        assert_eq!(r.boundary_facets.len(), s.boundary_facets.len());
        assert_abs_diff_eq!(r.total_interior_mass(), s.total_interior_mass(), epsilon = 1e-14);
    }

    #[test]
    fn minimal_two_triangle_square_parses() {
        let text = "# minimal square\ntamedmesh 1 2\nvertices 4\n0 0\n1 0\n0 1\n1 1\ncells 2\n0 1 2\n1 3 2\nboundary 4\n0 1\n1 3\n3 2\n2 0\n";
        let s = ModelSpace::from_text(text).unwrap();
        assert_eq!(s.n_vertices(), 4);
        assert_eq!(s.n_cells(), 2);
        assert_eq!(s.boundary_facets.len(), 4);
        assert_abs_diff_eq!(s.total_interior_mass(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn dangling_cell_index_is_reported() {
        let text = "tamedmesh 1 2\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n0 1 7\nboundary 0\n";
        let err = ModelSpace::from_text(text).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn obtuse_triangle_is_rejected_by_name() {
        let text = "tamedmesh 1 2\nvertices 3\n0 0\n4 0\n2 0.2\ncells 1\n0 1 2\nboundary 3\n0 1\n1 2\n2 0\n";
        let err = ModelSpace::from_text(text).unwrap_err();
        assert!(err.to_string().contains("non-obtuse"), "{err}");
    }

    #[test]
    fn torus_has_no_boundary_and_exact_area() {
        let s = ModelSpace::build(Shape::Torus, &[1.0], 2, &WeightFn::Zero).unwrap();
        assert!(s.boundary_facets.is_empty());
        assert_abs_diff_eq!(s.total_interior_mass(), 1.0, epsilon = 1e-12);
        assert_eq!(s.coord_fields.len(), 4);
    }

    #[test]
    fn annulus_boundary_masses_match_circles() {
        let s = ModelSpace::build(Shape::Annulus, &[0.5, 1.0], 4, &WeightFn::Zero).unwrap();
        let total = s.total_boundary_mass();
        assert!((total - 3.0 * PI).abs() < 2e-2, "boundary {total}");
    }
}
