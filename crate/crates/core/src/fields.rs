//! The discrete field algebra: scalar fields on vertices; vector fields,
//! 1-forms, rank-2 tensors and k-forms as constant fiber elements per cell,
//! expressed in the cell's edge frame. Pointwise operations (musical
//! isomorphisms, Hilbert–Schmidt products, traces, wedge products, the
//! pointwise Hino index) are exact per-cell linear algebra.

use crate::error::{Error, Result};
use crate::mesh::ModelSpace;

/// Per-vertex scalar field.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub space_tag: u64,
    pub values: Vec<f64>,
}

/// Per-cell vector field, components w.r.t. the cell frame (upper indices).
#[derive(Debug, Clone)]
pub struct VectorField {
    pub space_tag: u64,
    /// dim components per cell.
    pub components: Vec<f64>,
}

/// Per-cell 1-form, components w.r.t. the chart covector basis (lower
/// indices). May carry an edge-cochain representation when it was produced
/// by an exact exterior-calculus operation.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub space_tag: u64,
    pub components: Vec<f64>,
    pub cochain: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Covariant,
    Contravariant,
}

/// Per-cell rank-2 tensor field, dim×dim matrix per cell.
#[derive(Debug, Clone)]
pub struct TensorField2 {
    pub space_tag: u64,
    pub variance: Variance,
    pub components: Vec<f64>,
}

/// Per-cell k-form. Degree 0 is stored on vertices (as a `ScalarField`
/// elsewhere); degrees ≥ 1 live per cell. For k = dim there is one component
/// per cell (the coefficient w.r.t. the metric volume form); for k > dim the
/// module is zero.
#[derive(Debug, Clone)]
pub struct KForm {
    pub space_tag: u64,
    pub degree: usize,
    /// binom(dim, k) components per cell.
    pub components: Vec<f64>,
    pub cochain: Option<Vec<f64>>,
}

impl ScalarField {
    pub fn new(space: &ModelSpace, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), space.n_vertices());
        ScalarField { space_tag: space.space_id, values }
    }

    pub fn constant(space: &ModelSpace, value: f64) -> Self {
        ScalarField { space_tag: space.space_id, values: vec![value; space.n_vertices()] }
    }

    pub fn from_fn(space: &ModelSpace, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..space.n_vertices()).map(|v| f(space.vertex(v))).collect();
        ScalarField { space_tag: space.space_id, values }
    }

    pub fn check_space(&self, space: &ModelSpace) -> Result<()> {
        if self.space_tag != space.space_id {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    /// Value at the cell barycenter (plain vertex average).
    pub fn cell_average(&self, space: &ModelSpace, c: usize) -> f64 {
        let cell = space.cell(c);
        cell.iter().map(|&v| self.values[v as usize]).sum::<f64>() / cell.len() as f64
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// ∫ f dm with lumped masses.
    pub fn integral(&self, space: &ModelSpace) -> f64 {
        self.values.iter().zip(&space.interior_mass).map(|(f, m)| f * m).sum()
    }

    /// L²(m) inner product.
    pub fn l2_inner(&self, space: &ModelSpace, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(&space.interior_mass)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }
}

/// Mass-weighted average of a per-cell scalar onto vertices.
pub fn cell_to_vertex(space: &ModelSpace, cellvals: &[f64]) -> ScalarField {
    let mut out = vec![0.0; space.n_vertices()];
    for (v, cells) in space.vertex_cells.iter().enumerate() {
        let mut acc = 0.0;
        for &(c, lump) in cells {
            acc += lump * cellvals[c as usize];
        }
        out[v] = acc / space.interior_mass[v];
    }
    ScalarField { space_tag: space.space_id, values: out }
}

/// Plain vertex average of a vertex scalar onto cells.
pub fn vertex_to_cell(space: &ModelSpace, f: &ScalarField) -> Vec<f64> {
    (0..space.n_cells()).map(|c| f.cell_average(space, c)).collect()
}

/// Vertex values of ⟨X, Y⟩ through ambient-vector recovery: the cell vectors
/// are pushed to the embedding, mass-averaged per vertex, and paired there.
/// Unlike averaging the cellwise inner products, this kills the quadratic
/// noise bias of the piecewise gradients, which second-order operators would
/// otherwise amplify on curved meshes.
pub fn recovered_inner(space: &ModelSpace, x: &VectorField, y: &VectorField) -> ScalarField {
    let d = space.dim;
    let ed = space.embed_dim;
    let push = |field: &VectorField| -> Vec<f64> {
        let mut out = vec![0.0; space.n_vertices() * ed];
        for (v, cells) in space.vertex_cells.iter().enumerate() {
            for &(c, lump) in cells {
                let c = c as usize;
                let fr = space.frame(c);
                let comp = field.comp(d, c);
                for k in 0..ed {
                    let amb: f64 = (0..d).map(|a| fr[k * d + a] * comp[a]).sum();
                    out[v * ed + k] += lump * amb;
                }
            }
            for k in 0..ed {
                out[v * ed + k] /= space.interior_mass[v];
            }
        }
        out
    };
    let gx = push(x);
    let gy = push(y);
    let values = (0..space.n_vertices())
        .map(|v| (0..ed).map(|k| gx[v * ed + k] * gy[v * ed + k]).sum())
        .collect();
    ScalarField { space_tag: space.space_id, values }
}

impl VectorField {
    pub fn zero(space: &ModelSpace) -> Self {
        VectorField { space_tag: space.space_id, components: vec![0.0; space.n_cells() * space.dim] }
    }

    pub fn comp(&self, dim: usize, c: usize) -> &[f64] {
        &self.components[c * dim..(c + 1) * dim]
    }

    /// Pointwise norm |X| per cell, |X|² = Xᵀ g X.
    pub fn norm_cells(&self, space: &ModelSpace) -> Vec<f64> {
        let d = space.dim;
        (0..space.n_cells())
            .map(|c| {
                let g = space.metric(c);
                let x = self.comp(d, c);
                quad_form(g, x, x, d).max(0.0).sqrt()
            })
            .collect()
    }

    /// ⟨X, Y⟩ per cell.
    pub fn inner_cells(&self, space: &ModelSpace, other: &VectorField) -> Vec<f64> {
        let d = space.dim;
        (0..space.n_cells())
            .map(|c| quad_form(space.metric(c), self.comp(d, c), other.comp(d, c), d))
            .collect()
    }

    /// L²(m) inner product ∫⟨X,Y⟩ dm.
    pub fn l2_inner(&self, space: &ModelSpace, other: &VectorField) -> f64 {
        self.inner_cells(space, other)
            .iter()
            .enumerate()
            .map(|(c, v)| v * space.cell_volume[c] * space.cell_weight[c])
            .sum()
    }

    /// Lower the index: X ↦ X♭ = g X.
    pub fn flat(&self, space: &ModelSpace) -> OneForm {
        let d = space.dim;
        let mut comps = vec![0.0; self.components.len()];
        for c in 0..space.n_cells() {
            let g = space.metric(c);
            let x = self.comp(d, c);
            for i in 0..d {
                comps[c * d + i] = (0..d).map(|j| g[i * d + j] * x[j]).sum();
            }
        }
        OneForm { space_tag: self.space_tag, components: comps, cochain: None }
    }
}

impl OneForm {
    pub fn zero(space: &ModelSpace) -> Self {
        OneForm {
            space_tag: space.space_id,
            components: vec![0.0; space.n_cells() * space.dim],
            cochain: None,
        }
    }

    pub fn comp(&self, dim: usize, c: usize) -> &[f64] {
        &self.components[c * dim..(c + 1) * dim]
    }

    /// Raise the index: ω ↦ ω♯ = g⁻¹ ω.
    pub fn sharp(&self, space: &ModelSpace) -> VectorField {
        let d = space.dim;
        let mut comps = vec![0.0; self.components.len()];
        for c in 0..space.n_cells() {
            let gi = space.metric_inv(c);
            let w = self.comp(d, c);
            for i in 0..d {
                comps[c * d + i] = (0..d).map(|j| gi[i * d + j] * w[j]).sum();
            }
        }
        VectorField { space_tag: self.space_tag, components: comps }
    }

    /// Pointwise norm |ω| per cell via the inverse metric.
    pub fn norm_cells(&self, space: &ModelSpace) -> Vec<f64> {
        let d = space.dim;
        (0..space.n_cells())
            .map(|c| {
                let w = self.comp(d, c);
                quad_form(space.metric_inv(c), w, w, d).max(0.0).sqrt()
            })
            .collect()
    }

    /// ⟨ω, η⟩ per cell via the inverse metric.
    pub fn inner_cells(&self, space: &ModelSpace, other: &OneForm) -> Vec<f64> {
        let d = space.dim;
        (0..space.n_cells())
            .map(|c| quad_form(space.metric_inv(c), self.comp(d, c), other.comp(d, c), d))
            .collect()
    }

    pub fn l2_inner(&self, space: &ModelSpace, other: &OneForm) -> f64 {
        self.inner_cells(space, other)
            .iter()
            .enumerate()
            .map(|(c, v)| v * space.cell_volume[c] * space.cell_weight[c])
            .sum()
    }

    /// Pairing ω(X) per cell (no metric involved).
    pub fn pair_cells(&self, space: &ModelSpace, x: &VectorField) -> Vec<f64> {
        let d = space.dim;
        (0..space.n_cells())
            .map(|c| {
                self.comp(d, c).iter().zip(x.comp(d, c)).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn as_kform(&self) -> KForm {
        KForm {
            space_tag: self.space_tag,
            degree: 1,
            components: self.components.clone(),
            cochain: self.cochain.clone(),
        }
    }
}

impl TensorField2 {
    pub fn zero(space: &ModelSpace, variance: Variance) -> Self {
        TensorField2 {
            space_tag: space.space_id,
            variance,
            components: vec![0.0; space.n_cells() * space.dim * space.dim],
        }
    }

    pub fn comp(&self, dim: usize, c: usize) -> &[f64] {
        &self.components[c * dim * dim..(c + 1) * dim * dim]
    }

    /// Pointwise Hilbert–Schmidt inner product A : B per cell.
    pub fn hs_inner_cells(&self, space: &ModelSpace, other: &TensorField2) -> Result<Vec<f64>> {
        if self.variance != other.variance {
            return Err(Error::VarianceMismatch);
        }
        let d = space.dim;
        let mut out = vec![0.0; space.n_cells()];
        for c in 0..space.n_cells() {
            let raise = match self.variance {
                Variance::Covariant => space.metric_inv(c),
                Variance::Contravariant => space.metric(c),
            };
            let a = self.comp(d, c);
            let b = other.comp(d, c);
            // A : B = g^{ik} g^{jl} A_{ij} B_{kl}
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            acc += raise[i * d + k] * raise[j * d + l] * a[i * d + j] * b[k * d + l];
                        }
                    }
                }
            }
            out[c] = acc;
        }
        Ok(out)
    }

    pub fn hs_norm_cells(&self, space: &ModelSpace) -> Vec<f64> {
        self.hs_inner_cells(space, self)
            .expect("same variance")
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect()
    }

    pub fn l2_hs_inner(&self, space: &ModelSpace, other: &TensorField2) -> Result<f64> {
        Ok(self
            .hs_inner_cells(space, other)?
            .iter()
            .enumerate()
            .map(|(c, v)| v * space.cell_volume[c] * space.cell_weight[c])
            .sum())
    }

    pub fn transpose(&self, space: &ModelSpace) -> TensorField2 {
        let d = space.dim;
        let mut comps = self.components.clone();
        for c in 0..space.n_cells() {
            for i in 0..d {
                for j in 0..i {
                    comps.swap(c * d * d + i * d + j, c * d * d + j * d + i);
                }
            }
        }
        TensorField2 { space_tag: self.space_tag, variance: self.variance, components: comps }
    }

    pub fn sym(&self, space: &ModelSpace) -> TensorField2 {
        let t = self.transpose(space);
        let comps = self
            .components
            .iter()
            .zip(&t.components)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        TensorField2 { space_tag: self.space_tag, variance: self.variance, components: comps }
    }

    pub fn asym(&self, space: &ModelSpace) -> TensorField2 {
        let t = self.transpose(space);
        let comps = self
            .components
            .iter()
            .zip(&t.components)
            .map(|(a, b)| 0.5 * (a - b))
            .collect();
        TensorField2 { space_tag: self.space_tag, variance: self.variance, components: comps }
    }

    /// Pointwise trace: g^{ij} A_{ij} for covariant, g_{ij} A^{ij} for
    /// contravariant tensors.
    pub fn trace_cells(&self, space: &ModelSpace) -> Vec<f64> {
        let d = space.dim;
        (0..space.n_cells())
            .map(|c| {
                let raise = match self.variance {
                    Variance::Covariant => space.metric_inv(c),
                    Variance::Contravariant => space.metric(c),
                };
                let a = self.comp(d, c);
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += raise[i * d + j] * a[i * d + j];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Tensor product X ⊗ Y as a contravariant rank-2 tensor.
pub fn tensor_product(space: &ModelSpace, x: &VectorField, y: &VectorField) -> TensorField2 {
    let d = space.dim;
    let mut comps = vec![0.0; space.n_cells() * d * d];
    for c in 0..space.n_cells() {
        let xv = x.comp(d, c);
        let yv = y.comp(d, c);
        for i in 0..d {
            for j in 0..d {
                comps[c * d * d + i * d + j] = xv[i] * yv[j];
            }
        }
    }
    TensorField2 { space_tag: space.space_id, variance: Variance::Contravariant, components: comps }
}

/// Tensor product ω ⊗ η as a covariant rank-2 tensor.
pub fn tensor_product_forms(space: &ModelSpace, a: &OneForm, b: &OneForm) -> TensorField2 {
    let d = space.dim;
    let mut comps = vec![0.0; space.n_cells() * d * d];
    for c in 0..space.n_cells() {
        let av = a.comp(d, c);
        let bv = b.comp(d, c);
        for i in 0..d {
            for j in 0..d {
                comps[c * d * d + i * d + j] = av[i] * bv[j];
            }
        }
    }
    TensorField2 { space_tag: space.space_id, variance: Variance::Covariant, components: comps }
}

impl KForm {
    pub fn n_components(dim: usize, degree: usize) -> usize {
        if degree > dim {
            0
        } else {
            // binom(dim, degree) for dim ≤ 2
            match (dim, degree) {
                (_, 0) => 1,
                (d, k) if k == d => 1,
                (2, 1) => 2,
                _ => 1,
            }
        }
    }

    pub fn zero(space: &ModelSpace, degree: usize) -> Self {
        let n = Self::n_components(space.dim, degree);
        KForm {
            space_tag: space.space_id,
            degree,
            components: vec![0.0; space.n_cells() * n],
            cochain: None,
        }
    }

    /// Pointwise scalar product per cell: Gram determinant convention.
    pub fn inner_cells(&self, space: &ModelSpace, other: &KForm) -> Vec<f64> {
        assert_eq!(self.degree, other.degree);
        let d = space.dim;
        match self.degree {
            0 => self.components.iter().zip(&other.components).map(|(a, b)| a * b).collect(),
            1 => {
                let a = OneForm { space_tag: self.space_tag, components: self.components.clone(), cochain: None };
                let b = OneForm { space_tag: other.space_tag, components: other.components.clone(), cochain: None };
                a.inner_cells(space, &b)
            }
            k if k == d => {
                // coefficients w.r.t. the metric volume form
                self.components.iter().zip(&other.components).map(|(a, b)| a * b).collect()
            }
            _ => vec![0.0; space.n_cells()],
        }
    }

    pub fn norm_cells(&self, space: &ModelSpace) -> Vec<f64> {
        self.inner_cells(space, self).iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn l2_inner(&self, space: &ModelSpace, other: &KForm) -> f64 {
        self.inner_cells(space, other)
            .iter()
            .enumerate()
            .map(|(c, v)| v * space.cell_volume[c] * space.cell_weight[c])
            .sum()
    }

    pub fn as_one_form(&self) -> OneForm {
        assert_eq!(self.degree, 1);
        OneForm {
            space_tag: self.space_tag,
            components: self.components.clone(),
            cochain: self.cochain.clone(),
        }
    }
}

/// Wedge product of cellwise forms; bilinear and graded-anticommutative.
/// Degrees summing beyond the dimension yield the zero module.
pub fn wedge(space: &ModelSpace, a: &KForm, b: &KForm) -> KForm {
    let d = space.dim;
    let k = a.degree + b.degree;
    if k > d {
        log::warn!("wedge degree overflow {} + {} > {}", a.degree, b.degree, d);
        return KForm::zero(space, k.min(d + 1));
    }
    match (a.degree, b.degree) {
        (0, _) | (_, 0) => {
            // multiplication by a cellwise function (degree-0 cell values)
            let (f, omega) = if a.degree == 0 { (a, b) } else { (b, a) };
            let n = KForm::n_components(d, omega.degree);
            let mut comps = vec![0.0; space.n_cells() * n];
            for c in 0..space.n_cells() {
                for i in 0..n {
                    comps[c * n + i] = f.components[c] * omega.components[c * n + i];
                }
            }
            KForm { space_tag: space.space_id, degree: omega.degree, components: comps, cochain: None }
        }
        (1, 1) => {
            // coefficient w.r.t. the metric volume form: (a1 b2 - a2 b1)/√det g
            let mut comps = vec![0.0; space.n_cells()];
            for c in 0..space.n_cells() {
                let av = &a.components[c * d..c * d + d];
                let bv = &b.components[c * d..c * d + d];
                let g = space.metric(c);
                let det = (g[0] * g[3] - g[1] * g[2]).sqrt();
                comps[c] = (av[0] * bv[1] - av[1] * bv[0]) / det;
            }
            KForm { space_tag: space.space_id, degree: 2, components: comps, cochain: None }
        }
        _ => KForm::zero(space, k),
    }
}

/// Pointwise rank of the Gram matrix [Γ(f_i, f_j)] per cell, with a rank
/// tolerance relative to the largest singular value.
pub fn hino_index(space: &ModelSpace, gradients: &[OneForm]) -> Vec<usize> {
    let d = space.dim;
    let n = gradients.len();
    let mut out = vec![0usize; space.n_cells()];
    for c in 0..space.n_cells() {
        let gi = space.metric_inv(c);
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] =
                    quad_form(gi, gradients[i].comp(d, c), gradients[j].comp(d, c), d);
            }
        }
        out[c] = sym_rank(&mut gram, n, 1e-10);
    }
    out
}

/// Rank of a symmetric PSD matrix by Jacobi-free pivoted elimination with a
/// relative tolerance.
fn sym_rank(a: &mut [f64], n: usize, rel_tol: f64) -> usize {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let mut rank = 0;
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        // pick the largest remaining diagonal pivot
        let (pos, &piv_idx) = active
            .iter()
            .enumerate()
            .max_by(|x, y| a[x.1 * n + x.1].partial_cmp(&a[y.1 * n + y.1]).unwrap())
            .unwrap();
        let piv = a[piv_idx * n + piv_idx];
        if piv <= tol {
            break;
        }
        rank += 1;
        active.remove(pos);
        for &i in &active {
            for &j in &active {
                a[i * n + j] -= a[i * n + piv_idx] * a[piv_idx * n + j] / piv;
            }
        }
    }
    rank
}

pub(crate) fn quad_form(g: &[f64], x: &[f64], y: &[f64], d: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += g[i * d + j] * x[i] * y[j];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Shape, WeightFn};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn disk() -> ModelSpace {
        ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::Zero).unwrap()
    }

    #[test]
    fn musical_round_trip_is_identity() {
        let s = ModelSpace::build(Shape::Sphere, &[1.0], 2, &WeightFn::Zero).unwrap();
        let d = s.dim;
        let mut x = VectorField::zero(&s);
        for c in 0..s.n_cells() {
            x.components[c * d] = (c as f64 * 0.37).sin();
            x.components[c * d + 1] = (c as f64 * 0.91).cos();
        }
        let back = x.flat(&s).sharp(&s);
        for (a, b) in x.components.iter().zip(&back.components) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
        // musical maps are isometries
        let nx = x.norm_cells(&s);
        let nf = x.flat(&s).norm_cells(&s);
        for (a, b) in nx.iter().zip(&nf) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn trace_of_identity_is_dim() {
        let s = disk();
        let d = s.dim;
        let mut t = TensorField2::zero(&s, Variance::Covariant);
        for c in 0..s.n_cells() {
            let g = s.metric(c);
            for i in 0..d * d {
                t.components[c * d * d + i] = g[i];
            }
        }
        // the metric itself is the identity endomorphism
        for v in t.trace_cells(&s) {
            assert_abs_diff_eq!(v, d as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn hs_decomposition_is_orthogonal() {
        let s = disk();
        let d = s.dim;
        let mut t = TensorField2::zero(&s, Variance::Covariant);
        for (i, v) in t.components.iter_mut().enumerate() {
            *v = ((i * 2654435761) % 1000) as f64 / 500.0 - 1.0;
        }
        let sym = t.sym(&s);
        let asym = t.asym(&s);
        let total = t.hs_inner_cells(&s, &t).unwrap();
        let syms = sym.hs_inner_cells(&s, &sym).unwrap();
        let asyms = asym.hs_inner_cells(&s, &asym).unwrap();
        for c in 0..s.n_cells() {
            assert_abs_diff_eq!(total[c], syms[c] + asyms[c], epsilon = 1e-12);
        }
        let _ = d;
    }

    #[test]
    fn transpose_of_tensor_product_swaps_factors() {
        let s = disk();
        let d = s.dim;
        let mut x = VectorField::zero(&s);
        let mut y = VectorField::zero(&s);
        for c in 0..s.n_cells() {
            x.components[c * d] = 1.0 + c as f64;
            y.components[c * d + 1] = 2.0 - c as f64;
        }
        let xy = tensor_product(&s, &x, &y).transpose(&s);
        let yx = tensor_product(&s, &y, &x);
        for (a, b) in xy.components.iter().zip(&yx.components) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        // tr(X ⊗ Y) = ⟨X, Y⟩
        let tr = tensor_product(&s, &x, &y).trace_cells(&s);
        let ip = x.inner_cells(&s, &y);
        for (a, b) in tr.iter().zip(&ip) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn wedge_antisymmetry() {
        let s = disk();
        let d = s.dim;
        let mut a = KForm::zero(&s, 1);
        let mut b = KForm::zero(&s, 1);
        for c in 0..s.n_cells() {
            a.components[c * d] = (c as f64).sin() + 1.5;
            a.components[c * d + 1] = 0.3;
            b.components[c * d] = -0.7;
            b.components[c * d + 1] = (c as f64).cos();
        }
        let ab = wedge(&s, &a, &b);
        let ba = wedge(&s, &b, &a);
        for (x, y) in ab.components.iter().zip(&ba.components) {
            assert_abs_diff_eq!(*x, -*y, epsilon = 1e-13);
        }
        let aa = wedge(&s, &a, &a);
        for v in aa.components {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
        }
    }

    proptest! {
        #[test]
        fn pointwise_cauchy_schwarz(seed in 0u64..200) {
            let s = disk();
            let d = s.dim;
            let mut x = VectorField::zero(&s);
            let mut y = VectorField::zero(&s);
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state as f64 / u64::MAX as f64) * 2.0 - 1.0
            };
            for c in 0..s.n_cells() {
                for i in 0..d {
                    x.components[c*d+i] = next();
                    y.components[c*d+i] = next();
                }
            }
            let ip = x.inner_cells(&s, &y);
            let nx = x.norm_cells(&s);
            let ny = y.norm_cells(&s);
            for c in 0..s.n_cells() {
                prop_assert!(ip[c].abs() <= nx[c]*ny[c] + 1e-12);
            }
        }

        #[test]
        fn zeroing_cells_is_local(cut in 1usize..20) {
            let s = disk();
            let d = s.dim;
            let mut x = VectorField::zero(&s);
            for c in 0..s.n_cells() {
                for i in 0..d {
                    x.components[c*d+i] = (c + i) as f64;
                }
            }
            for c in 0..s.n_cells().min(cut) {
                for i in 0..d {
                    x.components[c*d+i] = 0.0;
                }
            }
            let norms = x.norm_cells(&s);
            for c in 0..s.n_cells().min(cut) {
                prop_assert_eq!(norms[c], 0.0);
            }
        }
    }
}
