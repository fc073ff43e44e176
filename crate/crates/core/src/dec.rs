//! Edge-cochain exterior calculus with Whitney mass matrices.
//!
//! Two parallel 1-form representations coexist: the per-cell constant
//! covectors of [`crate::fields::OneForm`] used by all pointwise algebra, and
//! the edge cochains of this module, on which the coboundaries are purely
//! combinatorial so that d∘d = 0 holds exactly. The de Rham map (edge
//! integrals, averaged between adjacent cells) and the Whitney barycenter
//! view convert between the two; identities mixing both representations hold
//! up to refinement-vanishing residuals only.
//!
//! Inner products of cochains use Whitney interpolation masses: M₀ is the
//! lumped vertex mass, M₁ the Whitney 1-form Gram matrix, M₂ the inverse
//! metric areas. With these choices the cochain energy reproduces the
//! Dirichlet stiffness exactly: D₀ᵀ M₁ D₀ = K, hence the degree-zero Hodge
//! Laplacian equals -Δ to rounding. The codifferential is the mass adjoint of
//! d with no boundary constraint, which realizes absolute boundary conditions
//! variationally; kernels of the degree-one Laplacian therefore compute de
//! Rham cohomology.

use crate::error::{Error, Result};
use crate::fields::{OneForm, ScalarField};
use crate::linalg::{cg, eigh_gen_spd, smallest_eigs_gen, Csr, GenEig};
use crate::mesh::ModelSpace;
use once_cell::sync::OnceCell;
use std::collections::HashMap;

pub struct DecComplex<'a> {
    pub space: &'a ModelSpace,
    /// Global edges (a, b) with a < b.
    pub edges: Vec<(u32, u32)>,
    pub edge_index: HashMap<(u32, u32), u32>,
    /// Local edges of each cell: global edge ids for (0,1), (0,2), (1,2) in
    /// 2d, or the single (0,1) edge in 1d.
    pub cell_edges: Vec<u32>,
    pub d0: Csr,
    pub d1: Csr,
    pub m1: Csr,
    /// Diagonal Whitney mass of top-degree cochains (2d only).
    pub m2: Vec<f64>,
    m1_diag: Vec<f64>,
    hodge1: OnceCell<GenEig>,
}

impl<'a> DecComplex<'a> {
    pub fn new(space: &'a ModelSpace) -> DecComplex<'a> {
        let d = space.dim;
        let local_pairs: &[(usize, usize)] = if d == 1 { &[(0, 1)] } else { &[(0, 1), (0, 2), (1, 2)] };
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let mut edge_index: HashMap<(u32, u32), u32> = HashMap::new();
        let mut cell_edges = vec![0u32; space.n_cells() * local_pairs.len()];
        for c in 0..space.n_cells() {
            let cell = space.cell(c);
            for (le, &(p, q)) in local_pairs.iter().enumerate() {
                let key = (cell[p], cell[q]); // cells are sorted, so p < q globally
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    (edges.len() - 1) as u32
                });
                cell_edges[c * local_pairs.len() + le] = id;
            }
        }
        let ne = edges.len();
        let nv = space.n_vertices();

        let mut d0_t = Vec::with_capacity(2 * ne);
        for (e, &(a, b)) in edges.iter().enumerate() {
            d0_t.push((e, a as usize, -1.0));
            d0_t.push((e, b as usize, 1.0));
        }
        let d0 = Csr::from_triplets(ne, nv, &d0_t);

        let (d1, m2) = if d == 2 {
            let mut d1_t = Vec::with_capacity(3 * space.n_cells());
            let mut m2 = vec![0.0; space.n_cells()];
            for c in 0..space.n_cells() {
                let le = &cell_edges[c * 3..c * 3 + 3];
                // (d1 c)_t = c_(1,2) - c_(0,2) + c_(0,1)
                d1_t.push((c, le[2] as usize, 1.0));
                d1_t.push((c, le[1] as usize, -1.0));
                d1_t.push((c, le[0] as usize, 1.0));
                m2[c] = space.cell_weight[c] / space.cell_volume[c];
            }
            (Csr::from_triplets(space.n_cells(), ne, &d1_t), m2)
        } else {
            (Csr::from_triplets(0, ne, &[]), Vec::new())
        };

        let m1 = Self::whitney_mass(space, &edges, &cell_edges, local_pairs);
        let m1_diag = m1.diagonal();
        DecComplex { space, edges, edge_index, cell_edges, d0, d1, m1, m2, m1_diag, hodge1: OnceCell::new() }
    }

    fn whitney_mass(
        space: &ModelSpace,
        edges: &[(u32, u32)],
        cell_edges: &[u32],
        local_pairs: &[(usize, usize)],
    ) -> Csr {
        let d = space.dim;
        let ne = edges.len();
        let nle = local_pairs.len();
        let mut triplets = Vec::with_capacity(space.n_cells() * nle * nle);
        for c in 0..space.n_cells() {
            let gi = space.metric_inv(c);
            let vol = space.cell_volume[c];
            let w = space.cell_weight[c];
            // pairwise products of hat differentials: dλ_0 = -Σ e^a, dλ_a = e^a
            let mut dl = vec![0.0; (d + 1) * d];
            for a in 0..d {
                dl[(a + 1) * d + a] = 1.0;
                dl[a] = -1.0;
            }
            let mut cmat = vec![0.0; (d + 1) * (d + 1)];
            for p in 0..=d {
                for q in 0..=d {
                    let mut acc = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            acc += gi[i * d + j] * dl[p * d + i] * dl[q * d + j];
                        }
                    }
                    cmat[p * (d + 1) + q] = acc;
                }
            }
            // ∫ λ_a λ_b = |c| (1 + δ_ab) / ((d+1)(d+2))
            let lam = |a: usize, b: usize| -> f64 {
                vol * (1.0 + if a == b { 1.0 } else { 0.0 })
                    / ((d as f64 + 1.0) * (d as f64 + 2.0))
            };
            let cc = |p: usize, q: usize| cmat[p * (d + 1) + q];
            for (i, &(p, q)) in local_pairs.iter().enumerate() {
                for (j, &(r, s)) in local_pairs.iter().enumerate() {
                    let val = lam(p, r) * cc(q, s) - lam(p, s) * cc(q, r) - lam(q, r) * cc(p, s)
                        + lam(q, s) * cc(p, r);
                    triplets.push((
                        cell_edges[c * nle + i] as usize,
                        cell_edges[c * nle + j] as usize,
                        w * val,
                    ));
                }
            }
        }
        Csr::from_triplets(ne, ne, &triplets)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Coboundary of a vertex field; exact integrals of its differential.
    pub fn d0_apply(&self, f: &[f64]) -> Vec<f64> {
        self.d0.matvec_owned(f)
    }

    pub fn d1_apply(&self, c: &[f64]) -> Vec<f64> {
        self.d1.matvec_owned(c)
    }

    /// δ on 1-cochains: M₀⁻¹ D₀ᵀ M₁, a vertex field.
    pub fn delta1_apply(&self, c: &[f64]) -> Vec<f64> {
        let m1c = self.m1.matvec_owned(c);
        let mut out = self.d0.tr_matvec_owned(&m1c);
        for (v, m) in out.iter_mut().zip(&self.space.interior_mass) {
            *v /= m;
        }
        out
    }

    /// δ on top-degree cochains: M₁⁻¹ D₁ᵀ M₂, solved by CG in M₁.
    pub fn delta2_apply(&self, t: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = t.iter().zip(&self.m2).map(|(a, b)| a * b).collect();
        let rhs = self.d1.tr_matvec_owned(&scaled);
        self.m1_solve(&rhs)
    }

    pub fn m1_solve(&self, rhs: &[f64]) -> Vec<f64> {
        cg(
            |x, y| self.m1.matvec(x, y),
            &self.m1_diag,
            rhs,
            1e-13,
            4 * (self.n_edges() as f64).sqrt() as usize + 200,
        )
    }

    /// Degree-one Hodge Laplacian □₁ = d₀ δ₁ + δ₂ d₁ on cochains.
    pub fn hodge1_apply(&self, c: &[f64]) -> Vec<f64> {
        let mut out = self.d0_apply(&self.delta1_apply(c));
        if !self.m2.is_empty() {
            let dd = self.delta2_apply(&self.d1_apply(c));
            for (a, b) in out.iter_mut().zip(&dd) {
                *a += b;
            }
        }
        out
    }

    /// The symmetric form A₁c = M₁D₀M₀⁻¹D₀ᵀM₁c + D₁ᵀM₂D₁c, so that
    /// ηᵀ(A₁c) = ⟨dη, dc⟩ + ⟨δη, δc⟩ for arbitrary cochains.
    pub fn a1_apply(&self, c: &[f64]) -> Vec<f64> {
        let delta = self.delta1_apply(c);
        let mut out = self.m1.matvec_owned(&self.d0_apply(&delta));
        if !self.m2.is_empty() {
            let mut dd = self.d1_apply(c);
            for (v, m) in dd.iter_mut().zip(&self.m2) {
                *v *= m;
            }
            let second = self.d1.tr_matvec_owned(&dd);
            for (a, b) in out.iter_mut().zip(&second) {
                *a += b;
            }
        }
        out
    }

    /// The symmetric pencil matrix A₁ = M₁D₀M₀⁻¹D₀ᵀM₁ + D₁ᵀM₂D₁ of □₁.
    pub fn a1_csr(&self) -> Csr {
        let ne = self.n_edges();
        let nv = self.space.n_vertices();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        // columns of M₁D₀ per vertex, then rank-1 accumulation scaled by 1/m_v
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
        for e in 0..ne {
            for k in self.m1.indptr[e]..self.m1.indptr[e + 1] {
                let ep = self.m1.indices[k];
                let w = self.m1.data[k];
                let (a, b) = self.edges[ep];
                cols[a as usize].push((e, -w));
                cols[b as usize].push((e, w));
            }
        }
        for v in 0..nv {
            let mut col = cols[v].clone();
            col.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for (e, w) in col {
                if let Some(last) = merged.last_mut() {
                    if last.0 == e {
                        last.1 += w;
                        continue;
                    }
                }
                merged.push((e, w));
            }
            let inv_m = 1.0 / self.space.interior_mass[v];
            for &(ei, wi) in &merged {
                for &(ej, wj) in &merged {
                    triplets.push((ei, ej, wi * wj * inv_m));
                }
            }
        }
        if !self.m2.is_empty() {
            for t in 0..self.space.n_cells() {
                let row: Vec<(usize, f64)> = (self.d1.indptr[t]..self.d1.indptr[t + 1])
                    .map(|k| (self.d1.indices[k], self.d1.data[k]))
                    .collect();
                for &(ei, wi) in &row {
                    for &(ej, wj) in &row {
                        triplets.push((ei, ej, wi * wj * self.m2[t]));
                    }
                }
            }
        }
        Csr::from_triplets(ne, ne, &triplets)
    }

    /// Cached dense eigendecomposition of (A₁, M₁); backs heat flows on
    /// 1-forms and spectral-bottom checks.
    pub fn hodge1_eig(&self) -> Result<&GenEig> {
        self.hodge1
            .get_or_try_init(|| eigh_gen_spd(&self.a1_csr().to_dense(), &self.m1.to_dense()))
    }

    /// Heat flow on 1-cochains: exp(-□₁ t).
    pub fn heat_flow_1(&self, c: &[f64], t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.hodge1_eig()?.apply_exp(t, c))
    }

    // ------------------------------------------------------------------
    // representation changes
    // ------------------------------------------------------------------

    /// De Rham map: edge integrals of a cellwise 1-form, averaged over the
    /// cells sharing each edge.
    pub fn de_rham(&self, omega: &OneForm) -> Vec<f64> {
        let d = self.space.dim;
        let local_pairs: &[(usize, usize)] = if d == 1 { &[(0, 1)] } else { &[(0, 1), (0, 2), (1, 2)] };
        let nle = local_pairs.len();
        let mut acc = vec![0.0; self.n_edges()];
        let mut cnt = vec![0u32; self.n_edges()];
        for c in 0..self.space.n_cells() {
            let comps = omega.comp(d, c);
            for (le, &(p, q)) in local_pairs.iter().enumerate() {
                // chart coordinates: u(p_0) = 0, u(p_a) = unit vector e_a
                let mut val = 0.0;
                for (i, comp) in comps.iter().enumerate() {
                    let up = if p == i + 1 { 1.0 } else { 0.0 };
                    let uq = if q == i + 1 { 1.0 } else { 0.0 };
                    val += comp * (uq - up);
                }
                let e = self.cell_edges[c * nle + le] as usize;
                acc[e] += val;
                cnt[e] += 1;
            }
        }
        for e in 0..self.n_edges() {
            acc[e] /= cnt[e].max(1) as f64;
        }
        acc
    }

    /// Whitney barycenter view of a cochain: the interpolant evaluated at the
    /// cell barycenter, one constant covector per cell.
    pub fn whitney_view(&self, c: &[f64]) -> OneForm {
        let d = self.space.dim;
        let local_pairs: &[(usize, usize)] = if d == 1 { &[(0, 1)] } else { &[(0, 1), (0, 2), (1, 2)] };
        let nle = local_pairs.len();
        let mut comps = vec![0.0; self.space.n_cells() * d];
        for cell in 0..self.space.n_cells() {
            for (le, &(p, q)) in local_pairs.iter().enumerate() {
                let val = c[self.cell_edges[cell * nle + le] as usize] / (d as f64 + 1.0);
                // dλ_q - dλ_p in chart components
                for i in 0..d {
                    let dq = if q == i + 1 { 1.0 } else if q == 0 { -1.0 } else { 0.0 };
                    let dp = if p == i + 1 { 1.0 } else if p == 0 { -1.0 } else { 0.0 };
                    comps[cell * d + i] += val * (dq - dp);
                }
            }
        }
        OneForm { space_tag: self.space.space_id, components: comps, cochain: Some(c.to_vec()) }
    }

    /// Cochain of a cellwise top-degree coefficient field (w.r.t. the metric
    /// volume form): integrals over cells.
    pub fn two_form_to_cochain(&self, rho: &[f64]) -> Vec<f64> {
        rho.iter().zip(&self.space.cell_volume).map(|(r, v)| r * v).collect()
    }

    pub fn cochain_to_two_form(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.space.cell_volume).map(|(x, v)| x / v).collect()
    }

    /// Exact cochain of g·df: edgewise ∫ g df with the trapezoid value of g,
    /// the exact integral for hat interpolants.
    pub fn cochain_of_g_df(&self, g: &ScalarField, f: &ScalarField) -> Vec<f64> {
        self.edges
            .iter()
            .map(|&(a, b)| {
                let ga = g.values[a as usize];
                let gb = g.values[b as usize];
                0.5 * (ga + gb) * (f.values[b as usize] - f.values[a as usize])
            })
            .collect()
    }

    /// L² inner product of 1-cochains through M₁.
    pub fn inner_1(&self, a: &[f64], b: &[f64]) -> f64 {
        let mb = self.m1.matvec_owned(b);
        a.iter().zip(&mb).map(|(x, y)| x * y).sum()
    }

    /// L² inner product of top-degree cochains through M₂.
    pub fn inner_2(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.m2).map(|((x, y), m)| x * y * m).sum()
    }

    /// Kernel of □₁ with the relative eigenvalue threshold
    /// 1e-8 · (first nonzero eigenvalue): (dimension, basis, first nonzero).
    pub fn harmonic_1(&self) -> Result<(usize, Vec<Vec<f64>>, f64)> {
        let ne = self.n_edges();
        let want = 8.min(ne);
        let (vals, vecs): (Vec<f64>, Vec<Vec<f64>>) = if ne <= 900 {
            let eig = self.hodge1_eig()?;
            let vals = eig.vals.iter().take(want).copied().collect();
            let vecs = (0..want).map(|k| eig.vecs.column(k).to_vec()).collect();
            (vals, vecs)
        } else {
            let a1 = self.a1_csr();
            let scale = a1.diagonal().iter().sum::<f64>() / ne as f64;
            let eig = smallest_eigs_gen(&a1, &self.m1, want, 1e-3 * scale, 12)?;
            let vals = eig.vals.to_vec();
            let vecs = (0..want).map(|k| eig.vecs.column(k).to_vec()).collect();
            (vals, vecs)
        };
        classify_kernel(&vals).map(|(dim, fnz)| {
            let basis: Vec<Vec<f64>> = vecs.into_iter().take(dim).collect();
            (dim, basis, fnz)
        })
    }
}

/// Split an ascending eigenvalue list into kernel and rest with the threshold
/// 1e-8 times the first nonzero eigenvalue; ambiguous gaps are errors.
pub fn classify_kernel(vals: &[f64]) -> Result<(usize, f64)> {
    let top = *vals.last().ok_or_else(|| Error::Inconclusive("empty spectrum".into()))?;
    if !(top > 0.0) {
        return Err(Error::Inconclusive("no positive eigenvalue among candidates".into()));
    }
    // the first eigenvalue clearly separated from the top is "nonzero"
    let fnz = vals
        .iter()
        .copied()
        .find(|&lam| lam > 1e-8 * top)
        .ok_or_else(|| Error::Inconclusive("all computed eigenvalues are near zero".into()))?;
    let tau = 1e-8 * fnz;
    let dim = vals.iter().filter(|&&lam| lam.abs() <= tau).count();
    if vals.iter().any(|&lam| lam.abs() > 0.1 * tau && lam <= 10.0 * tau) {
        return Err(Error::Inconclusive(format!(
            "eigenvalue within 10x of kernel threshold {tau:.3e}"
        )));
    }
    Ok((dim, fnz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::DirichletForm;
    use crate::first_order::differential;
    use crate::mesh::{Shape, WeightFn};
    use approx::assert_abs_diff_eq;

    #[test]
    fn coboundary_squares_to_zero_combinatorially() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::Zero).unwrap();
        let dec = DecComplex::new(&s);
        let f: Vec<f64> = (0..s.n_vertices()).map(|v| (v as f64 * 0.7).sin()).collect();
        let ddf = dec.d1_apply(&dec.d0_apply(&f));
        for v in ddf {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn whitney_energy_reproduces_stiffness() {
        // D₀ᵀ M₁ D₀ = K exactly, for flat and curved weighted meshes
        for shape in [Shape::Interval, Shape::Disk, Shape::Sphere, Shape::Torus] {
            let s = ModelSpace::build(shape, &[1.0], 1, &WeightFn::RadialSquare(0.1)).unwrap();
            let form = DirichletForm::assemble(&s).unwrap();
            let dec = DecComplex::new(&s);
            let mut state = 5u64;
            for _ in 0..10 {
                let f: Vec<f64> = (0..s.n_vertices())
                    .map(|_| {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                        ((state >> 12) as f64 / (1u64 << 52) as f64) - 1.0
                    })
                    .collect();
                let c = dec.d0_apply(&f);
                let via_whitney = dec.inner_1(&c, &c);
                let sf = ScalarField { space_tag: s.space_id, values: f };
                let via_stiffness = form.energy(&sf, &sf);
                assert!(
                    (via_whitney - via_stiffness).abs() <= 1e-12 * via_stiffness.max(1.0),
                    "{shape:?}: {via_whitney} vs {via_stiffness}"
                );
            }
        }
    }

    #[test]
    fn de_rham_of_exact_differential_is_coboundary() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::Zero).unwrap();
        let dec = DecComplex::new(&s);
        let f = ScalarField::from_fn(&s, |p| p[0] * p[0] - 0.5 * p[1]);
        let df = differential(&s, &f).unwrap();
        let r = dec.de_rham(&df);
        let d0f = dec.d0_apply(&f.values);
        for (a, b) in r.iter().zip(&d0f) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn hodge0_equals_minus_laplacian() {
        let s = ModelSpace::build(Shape::Annulus, &[0.5, 1.0], 1, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let dec = DecComplex::new(&s);
        let f = ScalarField::from_fn(&s, |p| p[0] + p[1] * p[1]);
        let hodge0 = dec.delta1_apply(&dec.d0_apply(&f.values));
        let lap = form.laplacian(&f).unwrap();
        for (a, b) in hodge0.iter().zip(&lap.values) {
            assert!((a + b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn adjointness_of_d_and_delta_on_cochains() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::Zero).unwrap();
        let dec = DecComplex::new(&s);
        let mut state = 17u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(7);
            ((state >> 12) as f64 / (1u64 << 52) as f64) - 1.0
        };
        let f: Vec<f64> = (0..s.n_vertices()).map(|_| rnd()).collect();
        let c: Vec<f64> = (0..dec.n_edges()).map(|_| rnd()).collect();
        let lhs = dec.inner_1(&dec.d0_apply(&f), &c);
        let delta_c = dec.delta1_apply(&c);
        let rhs: f64 = f
            .iter()
            .zip(&delta_c)
            .zip(&s.interior_mass)
            .map(|((a, b), m)| a * b * m)
            .sum();
        assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0));
        let t: Vec<f64> = (0..s.n_cells()).map(|_| rnd()).collect();
        let lhs = dec.inner_2(&dec.d1_apply(&c), &t);
        let rhs = dec.inner_1(&c, &dec.delta2_apply(&t));
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn whitney_view_of_gradient_recovers_cellwise_differential() {
        let s = ModelSpace::build(Shape::Sphere, &[1.0], 2, &WeightFn::Zero).unwrap();
        let dec = DecComplex::new(&s);
        let f = ScalarField::from_fn(&s, |p| p[2]);
        let df = differential(&s, &f).unwrap();
        let view = dec.whitney_view(&dec.d0_apply(&f.values));
        for (a, b) in view.components.iter().zip(&df.components) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn harmonic_one_forms_count_betti_numbers() {
        let cases: Vec<(Shape, Vec<f64>, usize)> = vec![
            (Shape::Disk, vec![1.0], 0),
            (Shape::Annulus, vec![0.5, 1.0], 1),
            (Shape::Sphere, vec![1.0], 0),
            (Shape::Torus, vec![1.0], 2),
        ];
        for (shape, params, b1) in cases {
            for level in 1..3 {
                let s = ModelSpace::build(shape, &params, level, &WeightFn::Zero).unwrap();
                let dec = DecComplex::new(&s);
                let (dim, basis, fnz) = dec.harmonic_1().unwrap();
                assert_eq!(dim, b1, "{shape:?} level {level}: fnz {fnz}");
                assert_eq!(basis.len(), b1);
            }
        }
    }

    #[test]
    fn commutation_heat_flow_with_differential() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let dec = DecComplex::new(&s);
        let f = ScalarField::from_fn(&s, |p| (2.0 * p[0]).sin() + p[1]);
        let t = 0.15;
        let lhs = dec.heat_flow_1(&dec.d0_apply(&f.values), t).unwrap();
        let ptf = form.heat_flow(&f, t).unwrap();
        let rhs = dec.d0_apply(&ptf.values);
        let scale = rhs.iter().fold(1e-30f64, |a, v| a.max(v.abs()));
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn kernel_classifier_flags_ambiguity() {
        assert_eq!(classify_kernel(&[1e-14, 1e-13, 0.5, 0.7]).unwrap().0, 2);
        assert_eq!(classify_kernel(&[0.3, 0.5]).unwrap().0, 0);
        assert!(classify_kernel(&[1e-9, 0.5, 0.7]).is_err());
    }
}
