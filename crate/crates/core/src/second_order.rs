//! Second-order calculus: Hessians via the three-term carré-du-champ
//! expression, covariant derivatives and directional derivatives, Lie
//! brackets, exterior derivative and codifferential, Hodge and Bochner
//! Laplacians, and the associated heat flows and harmonic spaces.
//!
//! Hessians and covariant derivatives are extracted cellwise by evaluating
//! the defining identities on the model's coordinate fields (ambient
//! coordinates, or torus harmonics) and solving a small least-squares system
//! per cell; gradients of the coordinate fields span every tangent fiber, so
//! the extraction is well-posed. Both Laplacians are positive semidefinite
//! here; the associated flows are exp(-t·op).

use crate::dec::DecComplex;
use crate::dirichlet::{chart_differential, DirichletForm};
use crate::error::{Error, Result};
use crate::fields::{
    cell_to_vertex, quad_form, KForm, OneForm, ScalarField, TensorField2, Variance, VectorField,
};
use crate::first_order::differential;
use crate::linalg::{eigh_gen_spd, Csr, GenEig};
use ndarray::Array2;
use once_cell::sync::OnceCell;

pub struct SecondOrder<'a> {
    pub form: &'a DirichletForm<'a>,
    pub dec: DecComplex<'a>,
    /// Coordinate fields ξ^A as vertex fields.
    coords: Vec<ScalarField>,
    /// Cellwise gradients ∇ξ^A.
    grad_coords: Vec<VectorField>,
    /// Vertex fields Γ(ξ^A, ξ^B).
    gamma_coords: Vec<Vec<ScalarField>>,
    /// Per-cell pseudo-inverse P = (VᵀV)⁻¹Vᵀ of the coordinate-gradient
    /// matrix V (rows = frame components of ∇ξ^A), d × A per cell.
    lsq: Vec<f64>,
    coord_hessians: OnceCell<Vec<TensorField2>>,
    nabla: OnceCell<Csr>,
    bochner_eig: OnceCell<GenEig>,
}

impl<'a> SecondOrder<'a> {
    pub fn new(form: &'a DirichletForm<'a>) -> Result<SecondOrder<'a>> {
        let space = form.space;
        let d = space.dim;
        let dec = DecComplex::new(space);
        let coords: Vec<ScalarField> = space
            .coord_fields
            .iter()
            .map(|vals| ScalarField { space_tag: space.space_id, values: vals.clone() })
            .collect();
        let grad_coords: Vec<VectorField> = coords
            .iter()
            .map(|f| Ok(differential(space, f)?.sharp(space)))
            .collect::<Result<_>>()?;
        let na = coords.len();
        let mut gamma_coords = Vec::with_capacity(na);
        for a in 0..na {
            let mut row = Vec::with_capacity(na);
            for b in 0..na {
                row.push(form.carre_du_champ(&coords[a], &coords[b])?);
            }
            gamma_coords.push(row);
        }
        // per-cell least-squares extraction operator
        let mut lsq = vec![0.0; space.n_cells() * d * na];
        for c in 0..space.n_cells() {
            // V: na × d
            let mut v = vec![0.0; na * d];
            for a in 0..na {
                v[a * d..(a + 1) * d].copy_from_slice(grad_coords[a].comp(d, c));
            }
            // VᵀV (d×d) inverse
            let mut vtv = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    vtv[i * d + j] = (0..na).map(|a| v[a * d + i] * v[a * d + j]).sum();
                }
            }
            let inv = match d {
                1 => vec![1.0 / vtv[0]],
                _ => {
                    let det = vtv[0] * vtv[3] - vtv[1] * vtv[2];
                    if det.abs() < 1e-14 {
                        return Err(Error::Eigensolver(format!(
                            "coordinate gradients degenerate on cell {c}"
                        )));
                    }
                    vec![vtv[3] / det, -vtv[1] / det, -vtv[2] / det, vtv[0] / det]
                }
            };
            // P = inv · Vᵀ : d × na
            for i in 0..d {
                for a in 0..na {
                    lsq[c * d * na + i * na + a] =
                        (0..d).map(|j| inv[i * d + j] * v[a * d + j]).sum();
                }
            }
        }
        Ok(SecondOrder {
            form,
            dec,
            coords,
            grad_coords,
            gamma_coords,
            lsq,
            coord_hessians: OnceCell::new(),
            nabla: OnceCell::new(),
            bochner_eig: OnceCell::new(),
        })
    }

    pub fn space(&self) -> &'a crate::mesh::ModelSpace {
        self.form.space
    }

    fn n_coords(&self) -> usize {
        self.coords.len()
    }

    /// Recover the covariant cell tensor H from its evaluations
    /// M_AB = H(∇ξ^A, ∇ξ^B): H = P M Pᵀ.
    fn extract_tensor(&self, c: usize, m: &[f64]) -> Vec<f64> {
        let d = self.space().dim;
        let na = self.n_coords();
        let p = &self.lsq[c * d * na..(c + 1) * d * na];
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for a in 0..na {
                    for b in 0..na {
                        acc += p[i * na + a] * m[a * na + b] * p[j * na + b];
                    }
                }
                out[i * d + j] = acc;
            }
        }
        out
    }

    /// Hessian of a vertex field as a covariant cell tensor, by the
    /// three-term expression 2 Hess f(∇g₁,∇g₂) = ⟨∇g₁,∇Γ(f,g₂)⟩ +
    /// ⟨∇g₂,∇Γ(f,g₁)⟩ - ⟨∇f,∇Γ(g₁,g₂)⟩ evaluated on coordinate fields.
    pub fn hessian(&self, f: &ScalarField) -> Result<TensorField2> {
        f.check_space(self.space())?;
        let space = self.space();
        let d = space.dim;
        let na = self.n_coords();
        let q: Vec<ScalarField> = (0..na)
            .map(|a| self.form.carre_du_champ(f, &self.coords[a]))
            .collect::<Result<_>>()?;
        let mut out = TensorField2::zero(space, Variance::Covariant);
        let mut m = vec![0.0; na * na];
        for c in 0..space.n_cells() {
            let df = chart_differential(space, c, &f.values);
            for a in 0..na {
                for b in 0..na {
                    let dq_b = chart_differential(space, c, &q[b].values);
                    let dq_a = chart_differential(space, c, &q[a].values);
                    let dgam = chart_differential(space, c, &self.gamma_coords[a][b].values);
                    let va = self.grad_coords[a].comp(d, c);
                    let vb = self.grad_coords[b].comp(d, c);
                    let t1 = pair(&dq_b, va);
                    let t2 = pair(&dq_a, vb);
                    let gradf = sharp_cell(space, c, &df);
                    let t3 = pair(&dgam, &gradf);
                    m[a * na + b] = 0.5 * (t1 + t2 - t3);
                }
            }
            let h = self.extract_tensor(c, &m);
            out.components[c * d * d..(c + 1) * d * d].copy_from_slice(&h);
        }
        Ok(out)
    }

    /// Hessians of the coordinate fields themselves (zero on flat models).
    pub fn coord_hessians(&self) -> Result<&Vec<TensorField2>> {
        self.coord_hessians.get_or_try_init(|| {
            self.coords.iter().map(|xi| self.hessian(xi)).collect::<Result<Vec<_>>>()
        })
    }

    /// Covariant derivative ∇X as a covariant cell tensor T with
    /// T(Z, Y) = ⟨∇_Z X, Y⟩, from ∇X : (∇ξ^A ⊗ ∇ξ^B) =
    /// ⟨∇ξ^A, ∇⟨X,∇ξ^B⟩⟩ - Hess ξ^B(X, ∇ξ^A).
    pub fn covariant_derivative(&self, x: &VectorField) -> Result<TensorField2> {
        let space = self.space();
        let d = space.dim;
        let na = self.n_coords();
        let hess_xi = self.coord_hessians()?;
        // vertex fields ⟨X, ∇ξ^B⟩
        let q: Vec<ScalarField> = (0..na)
            .map(|b| cell_to_vertex(space, &x.inner_cells(space, &self.grad_coords[b])))
            .collect();
        let mut out = TensorField2::zero(space, Variance::Covariant);
        let mut m = vec![0.0; na * na];
        for c in 0..space.n_cells() {
            let xc = x.comp(d, c);
            for b in 0..na {
                let dq = chart_differential(space, c, &q[b].values);
                let hb = hess_xi[b].comp(d, c);
                for a in 0..na {
                    let va = self.grad_coords[a].comp(d, c);
                    let mut corr = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            corr += xc[i] * hb[i * d + j] * va[j];
                        }
                    }
                    m[a * na + b] = pair(&dq, va) - corr;
                }
            }
            let t = self.extract_tensor(c, &m);
            out.components[c * d * d..(c + 1) * d * d].copy_from_slice(&t);
        }
        Ok(out)
    }

    /// Directional derivative ∇_Z X from a precomputed covariant derivative.
    pub fn directional(&self, nabla_x: &TensorField2, z: &VectorField) -> VectorField {
        let space = self.space();
        let d = space.dim;
        let mut out = VectorField::zero(space);
        for c in 0..space.n_cells() {
            let t = nabla_x.comp(d, c);
            let zc = z.comp(d, c);
            let gi = space.metric_inv(c);
            // covector (Tᵀ z)_j = Σ_i z^i T_ij, then raise
            let mut cov = vec![0.0; d];
            for j in 0..d {
                cov[j] = (0..d).map(|i| zc[i] * t[i * d + j]).sum();
            }
            for i in 0..d {
                out.components[c * d + i] = (0..d).map(|j| gi[i * d + j] * cov[j]).sum();
            }
        }
        out
    }

    /// Lie bracket [X, Y] = ∇_X Y - ∇_Y X.
    pub fn lie_bracket(&self, x: &VectorField, y: &VectorField) -> Result<VectorField> {
        let nx = self.covariant_derivative(x)?;
        let ny = self.covariant_derivative(y)?;
        let a = self.directional(&ny, x);
        let b = self.directional(&nx, y);
        let mut out = a;
        for (v, w) in out.components.iter_mut().zip(&b.components) {
            *v -= w;
        }
        Ok(out)
    }

    // ------------------------------------------------------------------
    // exterior calculus on k-forms
    // ------------------------------------------------------------------

    /// d on a vertex field: exact cellwise differential with its coboundary
    /// cochain attached.
    pub fn d0(&self, f: &ScalarField) -> Result<OneForm> {
        f.check_space(self.space())?;
        let mut df = differential(self.space(), f)?;
        df.cochain = Some(self.dec.d0_apply(&f.values));
        Ok(df)
    }

    fn cochain_of(&self, omega: &OneForm) -> Vec<f64> {
        match &omega.cochain {
            Some(c) => c.clone(),
            None => self.dec.de_rham(omega),
        }
    }

    /// Exterior derivative of a k-form. The combinatorial coboundary acts on
    /// the cochain representation, so d∘d = 0 exactly.
    pub fn exterior_derivative(&self, omega: &KForm) -> Result<KForm> {
        let space = self.space();
        let d = space.dim;
        match omega.degree {
            1 if d == 2 => {
                let c = match &omega.cochain {
                    Some(c) => c.clone(),
                    None => self.dec.de_rham(&omega.as_one_form()),
                };
                let c2 = self.dec.d1_apply(&c);
                let comps = self.dec.cochain_to_two_form(&c2);
                Ok(KForm { space_tag: space.space_id, degree: 2, components: comps, cochain: Some(c2) })
            }
            k if k >= d => Ok(KForm::zero(space, (k + 1).min(d + 1))),
            _ => Err(Error::OutOfRange(format!(
                "exterior derivative of degree {} not supported here",
                omega.degree
            ))),
        }
    }

    /// Codifferential: the mass adjoint of d. Degree 1 lands in vertex
    /// fields; degree 2 (2d) in 1-forms carrying their cochain.
    pub fn codifferential_1(&self, omega: &OneForm) -> ScalarField {
        let c = self.cochain_of(omega);
        ScalarField { space_tag: self.space().space_id, values: self.dec.delta1_apply(&c) }
    }

    pub fn codifferential_2(&self, omega: &KForm) -> Result<OneForm> {
        if omega.degree != 2 || self.space().dim != 2 {
            return Err(Error::OutOfRange("codifferential_2 needs a top-degree 2d form".into()));
        }
        let c2 = match &omega.cochain {
            Some(c) => c.clone(),
            None => self.dec.two_form_to_cochain(&omega.components),
        };
        let c1 = self.dec.delta2_apply(&c2);
        Ok(self.dec.whitney_view(&c1))
    }

    /// Hodge Laplacian on 1-forms (cochain route), returned with both
    /// representations.
    pub fn hodge1(&self, omega: &OneForm) -> OneForm {
        let c = self.cochain_of(omega);
        let out = self.dec.hodge1_apply(&c);
        self.dec.whitney_view(&out)
    }

    /// □₁ X♭ raised back to a vector field.
    pub fn hodge_of_flat(&self, x: &VectorField) -> VectorField {
        let flat = x.flat(self.space());
        self.hodge1(&flat).sharp(self.space())
    }

    /// Heat flow on 1-forms H_t = exp(-□₁ t).
    pub fn heat_flow_form(&self, omega: &OneForm, t: f64) -> Result<OneForm> {
        let c = self.cochain_of(omega);
        let out = self.dec.heat_flow_1(&c, t)?;
        Ok(self.dec.whitney_view(&out))
    }

    // ------------------------------------------------------------------
    // Bochner (connection) Laplacian
    // ------------------------------------------------------------------

    /// The covariant derivative as a sparse operator from vector dofs to
    /// covariant tensor dofs, assembled by applying it to basis fields.
    pub fn nabla_operator(&self) -> Result<&Csr> {
        self.nabla.get_or_try_init(|| {
            let space = self.space();
            let d = space.dim;
            let n_in = space.n_cells() * d;
            let n_out = space.n_cells() * d * d;
            let mut triplets = Vec::new();
            let mut basis = VectorField::zero(space);
            for dof in 0..n_in {
                basis.components[dof] = 1.0;
                let t = self.covariant_derivative(&basis)?;
                basis.components[dof] = 0.0;
                for (row, &v) in t.components.iter().enumerate() {
                    if v != 0.0 {
                        triplets.push((row, dof, v));
                    }
                }
            }
            Ok(Csr::from_triplets(n_out, n_in, &triplets))
        })
    }

    fn tensor_mass_apply(&self, t: &[f64]) -> Vec<f64> {
        let space = self.space();
        let d = space.dim;
        let mut out = vec![0.0; t.len()];
        for c in 0..space.n_cells() {
            let gi = space.metric_inv(c);
            let scale = space.cell_volume[c] * space.cell_weight[c];
            for i in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    for k in 0..d {
                        for l in 0..d {
                            acc += gi[i * d + k] * gi[j * d + l] * t[c * d * d + k * d + l];
                        }
                    }
                    out[c * d * d + i * d + j] = scale * acc;
                }
            }
        }
        out
    }

    /// Bochner Laplacian □ = ∇*∇ applied to a vector field (positive
    /// semidefinite sign convention).
    pub fn bochner(&self, x: &VectorField) -> Result<VectorField> {
        let space = self.space();
        let d = space.dim;
        let nabla = self.nabla_operator()?;
        let t = nabla.matvec_owned(&x.components);
        let mt = self.tensor_mass_apply(&t);
        let rhs = nabla.tr_matvec_owned(&mt);
        // block mass solve: (vol w G)⁻¹
        let mut out = VectorField::zero(space);
        for c in 0..space.n_cells() {
            let gi = space.metric_inv(c);
            let scale = 1.0 / (space.cell_volume[c] * space.cell_weight[c]);
            for i in 0..d {
                out.components[c * d + i] =
                    scale * (0..d).map(|j| gi[i * d + j] * rhs[c * d + j]).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// Covariant energy E_cov(X) = ∫ |∇X|²_HS dm.
    pub fn covariant_energy(&self, x: &VectorField) -> Result<f64> {
        let t = self.covariant_derivative(x)?;
        t.l2_hs_inner(self.space(), &t)
    }

    /// Eigendecomposition of the Bochner pencil (∇ᵀ𝕋∇, 𝕄), cached.
    pub fn bochner_eig(&self) -> Result<&GenEig> {
        self.bochner_eig.get_or_try_init(|| {
            let space = self.space();
            let d = space.dim;
            let n = space.n_cells() * d;
            let nabla = self.nabla_operator()?;
            let mut a = Array2::zeros((n, n));
            let mut basis = vec![0.0; n];
            for dof in 0..n {
                basis[dof] = 1.0;
                let t = nabla.matvec_owned(&basis);
                let mt = self.tensor_mass_apply(&t);
                let col = nabla.tr_matvec_owned(&mt);
                basis[dof] = 0.0;
                for (r, &v) in col.iter().enumerate() {
                    a[[r, dof]] = v;
                }
            }
            let mut m = Array2::zeros((n, n));
            for c in 0..space.n_cells() {
                let g = space.metric(c);
                let scale = space.cell_volume[c] * space.cell_weight[c];
                for i in 0..d {
                    for j in 0..d {
                        m[[c * d + i, c * d + j]] = scale * g[i * d + j];
                    }
                }
            }
            eigh_gen_spd(&a, &m)
        })
    }

    /// Heat flow on vector fields H^∇_t = exp(-□ t).
    pub fn heat_flow_vector(&self, x: &VectorField, t: f64) -> Result<VectorField> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let eig = self.bochner_eig()?;
        let comps = eig.apply_exp(t, &x.components);
        Ok(VectorField { space_tag: x.space_tag, components: comps })
    }

    /// Spectral bottoms: (inf σ(-Δ), inf σ(□_Bochner), inf σ(□₁)).
    pub fn spectral_bottoms(&self) -> Result<(f64, f64, f64)> {
        let scalar = self.form.spectral()?.vals[0];
        let bochner = self.bochner_eig()?.vals[0];
        let hodge1 = self.dec.hodge1_eig()?.vals[0];
        Ok((scalar, bochner, hodge1))
    }

    /// Dimension of the space of harmonic k-forms (kernel of □_k with the
    /// relative spectral threshold).
    pub fn de_rham_dim(&self, k: usize) -> Result<usize> {
        let space = self.space();
        match k {
            0 => {
                let eig = self.form.spectral()?;
                let vals: Vec<f64> = eig.vals.iter().take(8).copied().collect();
                Ok(crate::dec::classify_kernel(&vals)?.0)
            }
            1 => Ok(self.dec.harmonic_1()?.0),
            2 if space.dim == 2 => {
                // □₂ pencil: A₂ = M₂D₁M₁⁻¹D₁ᵀM₂ over the diagonal mass M₂
                let nt = space.n_cells();
                if nt > 1400 {
                    return Err(Error::OutOfRange(
                        "degree-2 harmonic computation limited to coarse meshes".into(),
                    ));
                }
                let mut a = Array2::zeros((nt, nt));
                let mut basis = vec![0.0; nt];
                for t in 0..nt {
                    basis[t] = 1.0;
                    let col = {
                        let d1t = self.dec.delta2_apply(&basis);
                        let mut v = self.dec.d1_apply(&d1t);
                        for (x, m) in v.iter_mut().zip(&self.dec.m2) {
                            *x *= m;
                        }
                        v
                    };
                    basis[t] = 0.0;
                    for (r, &v) in col.iter().enumerate() {
                        a[[r, t]] = v;
                    }
                }
                let m: Vec<f64> = self.dec.m2.clone();
                let eig = crate::linalg::eigh_gen_diag(&a, &m)?;
                let vals: Vec<f64> = eig.vals.iter().take(8).copied().collect();
                Ok(crate::dec::classify_kernel(&vals)?.0)
            }
            _ => Ok(0),
        }
    }

    /// Basis of harmonic 1-forms in the cellwise representation.
    pub fn harmonic_forms_1(&self) -> Result<Vec<OneForm>> {
        let (_, basis, _) = self.dec.harmonic_1()?;
        Ok(basis.iter().map(|c| self.dec.whitney_view(c)).collect())
    }
}

fn pair(cov: &[f64], vec: &[f64]) -> f64 {
    cov.iter().zip(vec).map(|(a, b)| a * b).sum()
}

fn sharp_cell(space: &crate::mesh::ModelSpace, c: usize, cov: &[f64]) -> Vec<f64> {
    let d = space.dim;
    let gi = space.metric_inv(c);
    (0..d).map(|i| (0..d).map(|j| gi[i * d + j] * cov[j]).sum()).collect()
}

/// Multiply a vector field by the cell averages of a vertex function.
pub fn scale_by_function(
    space: &crate::mesh::ModelSpace,
    g: &ScalarField,
    x: &VectorField,
) -> VectorField {
    let d = space.dim;
    let mut out = VectorField::zero(space);
    for c in 0..space.n_cells() {
        let gc = g.cell_average(space, c);
        for i in 0..d {
            out.components[c * d + i] = gc * x.components[c * d + i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::first_order::{gradient, l2_divergence};
    use crate::mesh::{ModelSpace, Shape, WeightFn};
    use crate::randfield::SmoothFieldGen;
    use approx::assert_abs_diff_eq;

    fn setup(shape: Shape, params: &[f64], level: usize) -> (ModelSpace, ()) {
        (ModelSpace::build(shape, params, level, &WeightFn::Zero).unwrap(), ())
    }

    #[test]
    fn hessian_of_affine_vanishes_and_is_symmetric() {
        let (s, _) = setup(Shape::Rectangle, &[1.0, 1.0], 2);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let f = ScalarField::from_fn(&s, |p| 2.0 * p[0] - 3.0 * p[1] + 1.0);
        let h = so.hessian(&f).unwrap();
        assert!(h.components.iter().all(|v| v.abs() < 1e-10), "affine Hessian nonzero");
        let g = ScalarField::from_fn(&s, |p| (p[0] * 2.0).sin() * p[1]);
        let hg = so.hessian(&g).unwrap();
        let ht = hg.transpose(&s);
        for (a, b) in hg.components.iter().zip(&ht.components) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn hessian_of_quadratic_on_interval() {
        // f = x²: Hess f = 2 dx⊗dx away from the boundary, O(h) overall
        let mut errs = Vec::new();
        for level in 3..6 {
            let (s, _) = setup(Shape::Interval, &[1.0], level);
            let form = DirichletForm::assemble(&s).unwrap();
            let so = SecondOrder::new(&form).unwrap();
            let f = ScalarField::from_fn(&s, |p| p[0] * p[0]);
            let h = so.hessian(&f).unwrap();
            // interior cells only: those whose vertices are interior
            let mut l1 = 0.0;
            let mut mass = 0.0;
            for c in 0..s.n_cells() {
                let cell = s.cell(c);
                if cell.iter().any(|&v| s.is_boundary[v as usize]) {
                    continue;
                }
                let g = s.metric(c);
                // covariant component vs 2·g (since dx⊗dx pulled to frame is g·..·g)
                let frame_len2 = g[0];
                let w = s.cell_volume[c];
                l1 += (h.components[c] / frame_len2 - 2.0).abs() * w;
                mass += w;
            }
            errs.push(l1 / mass);
        }
        // exact on uniform interior patches
        assert!(errs.last().unwrap() < &1e-10, "{errs:?}");
    }

    #[test]
    fn hessian_trace_approaches_laplacian() {
        let mut errs = Vec::new();
        for level in 2..5 {
            let (s, _) = setup(Shape::Rectangle, &[1.0, 1.0], level);
            let form = DirichletForm::assemble(&s).unwrap();
            let so = SecondOrder::new(&form).unwrap();
            let f = ScalarField::from_fn(&s, |p| (1.3 * p[0]).sin() * (0.9 * p[1]).cos());
            let h = so.hessian(&f).unwrap();
            let tr = cell_to_vertex(&s, &h.trace_cells(&s));
            let lap = form.laplacian(&f).unwrap();
            // interior identity: at boundary vertices the weak Neumann
            // Laplacian carries the flux term and is not pointwise Δf
            let mut l1 = 0.0;
            for v in 0..s.n_vertices() {
                if !s.is_boundary[v] {
                    l1 += (tr.values[v] - lap.values[v]).abs() * s.interior_mass[v];
                }
            }
            errs.push(l1);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 0.8, "orders from {errs:?}");
        }
    }

    #[test]
    fn covariant_derivative_of_affine_gradient_vanishes() {
        let (s, _) = setup(Shape::Interval, &[1.0], 3);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let f = ScalarField::from_fn(&s, |p| 3.0 * p[0] - 1.0);
        let x = gradient(&s, &f).unwrap();
        let t = so.covariant_derivative(&x).unwrap();
        assert!(t.components.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn product_structure_of_covariant_derivative() {
        // ∇(g ∇f) = ∇g ⊗ ∇f + g (Hess f)♯ as a refinement-vanishing residual
        let mut errs = Vec::new();
        for level in 1..4 {
            let (s, _) = setup(Shape::Rectangle, &[1.0, 1.0], level);
            let form = DirichletForm::assemble(&s).unwrap();
            let so = SecondOrder::new(&form).unwrap();
            let g = ScalarField::from_fn(&s, |p| p[0] + 0.5 * p[1] * p[1]);
            let f = ScalarField::from_fn(&s, |p| (p[0] * 1.1).sin() + p[1]);
            let x = scale_by_function(&s, &g, &gradient(&s, &f).unwrap());
            let lhs = so.covariant_derivative(&x).unwrap();
            // rhs in covariant components: dg⊗df + ḡ Hess f
            let dg = differential(&s, &g).unwrap();
            let df = differential(&s, &f).unwrap();
            let mut rhs = crate::fields::tensor_product_forms(&s, &dg, &df);
            let hess = so.hessian(&f).unwrap();
            let d = s.dim;
            for c in 0..s.n_cells() {
                let gc = g.cell_average(&s, c);
                for i in 0..d * d {
                    rhs.components[c * d * d + i] += gc * hess.components[c * d * d + i];
                }
            }
            let mut diff = lhs.clone();
            for (a, b) in diff.components.iter_mut().zip(&rhs.components) {
                *a -= b;
            }
            let l1: f64 = diff
                .hs_norm_cells(&s)
                .iter()
                .enumerate()
                .map(|(c, v)| v * s.cell_volume[c])
                .sum();
            errs.push(l1);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 0.8, "orders from {errs:?}");
        }
    }

    #[test]
    fn metric_compatibility_residual_vanishes() {
        let mut errs = Vec::new();
        for level in 3..6 {
            let (s, _) = setup(Shape::Disk, &[1.0], level);
            let form = DirichletForm::assemble(&s).unwrap();
            let so = SecondOrder::new(&form).unwrap();
            let mut gen = SmoothFieldGen::new(11);
            let x = gen.vector(&s);
            let y = gen.vector(&s);
            let z = gen.vector(&s);
            let nx = so.covariant_derivative(&x).unwrap();
            let ny = so.covariant_derivative(&y).unwrap();
            let ip = cell_to_vertex(&s, &x.inner_cells(&s, &y));
            let dip = differential(&s, &ip).unwrap();
            let term1 = dip.pair_cells(&s, &z);
            let zx = so.directional(&nx, &z);
            let zy = so.directional(&ny, &z);
            let term2 = zx.inner_cells(&s, &y);
            let term3 = x.inner_cells(&s, &zy);
            let mut l1 = 0.0;
            for c in 0..s.n_cells() {
                l1 += (term1[c] - term2[c] - term3[c]).abs() * s.cell_volume[c];
            }
            errs.push(l1);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 0.8, "orders from {errs:?}");
        }
    }

    #[test]
    fn kato_inequality_on_smooth_fields() {
        let (s, _) = setup(Shape::Disk, &[1.0], 3);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let mut gen = SmoothFieldGen::new(3);
        let h = s.mesh_size();
        for _ in 0..20 {
            let x = gen.vector(&s);
            let norm = cell_to_vertex(&s, &x.norm_cells(&s));
            let dn = differential(&s, &norm).unwrap();
            let lhs = dn.norm_cells(&s);
            let rhs = so.covariant_derivative(&x).unwrap().hs_norm_cells(&s);
            let scale = rhs.iter().fold(1.0f64, |a, v| a.max(*v));
            for c in 0..s.n_cells() {
                assert!(
                    lhs[c] <= rhs[c] + 2.0 * h * scale,
                    "Kato violated: {} > {} (h = {h})",
                    lhs[c],
                    rhs[c]
                );
            }
        }
    }

    #[test]
    fn lie_bracket_coordinate_fields() {
        let (s, _) = setup(Shape::Rectangle, &[1.0, 1.0], 3);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        // constant frames commute
        let ex = gradient(&s, &ScalarField::from_fn(&s, |p| p[0])).unwrap();
        let ey = gradient(&s, &ScalarField::from_fn(&s, |p| p[1])).unwrap();
        let b = so.lie_bracket(&ex, &ey).unwrap();
        assert!(b.norm_cells(&s).iter().all(|v| *v < 1e-10));
        // [x ∂_y, ∂_x] = -∂_y up to O(h)
        let xf = ScalarField::from_fn(&s, |p| p[0]);
        let x_dy = scale_by_function(&s, &xf, &ey);
        let br = so.lie_bracket(&x_dy, &ex).unwrap();
        let mut l1 = 0.0;
        let mut mass = 0.0;
        for c in 0..s.n_cells() {
            let d = s.dim;
            let diff = [
                br.components[c * d] - (-ey.components[c * d]),
                br.components[c * d + 1] - (-ey.components[c * d + 1]),
            ];
            let cell_interior = s.cell(c).iter().all(|&v| !s.is_boundary[v as usize]);
            if cell_interior {
                l1 += (diff[0].powi(2) + diff[1].powi(2)).sqrt() * s.cell_volume[c];
                mass += s.cell_volume[c];
            }
        }
        assert!(l1 / mass < 0.1, "bracket residual {}", l1 / mass);
        // [X, X] = 0 exactly
        let self_br = so.lie_bracket(&x_dy, &x_dy).unwrap();
        assert!(self_br.norm_cells(&s).iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn torsion_identity_residual_decreases() {
        let mut errs = Vec::new();
        for level in 2..5 {
            let (s, _) = setup(Shape::Disk, &[1.0], level);
            let form = DirichletForm::assemble(&s).unwrap();
            let so = SecondOrder::new(&form).unwrap();
            let mut gen = SmoothFieldGen::new(5);
            let x = gen.vector(&s);
            let y = gen.vector(&s);
            let f = gen.scalar(&s);
            let df = differential(&s, &f).unwrap();
            // X(Yf) - Y(Xf) = df([X,Y])
            let yf = cell_to_vertex(&s, &df.pair_cells(&s, &y));
            let xf = cell_to_vertex(&s, &df.pair_cells(&s, &x));
            let dyf = differential(&s, &yf).unwrap();
            let dxf = differential(&s, &xf).unwrap();
            let lhs1 = dyf.pair_cells(&s, &x);
            let lhs2 = dxf.pair_cells(&s, &y);
            let bracket = so.lie_bracket(&x, &y).unwrap();
            let rhs = df.pair_cells(&s, &bracket);
            let mut l1 = 0.0;
            for c in 0..s.n_cells() {
                l1 += (lhs1[c] - lhs2[c] - rhs[c]).abs() * s.cell_volume[c];
            }
            errs.push(l1);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 0.8, "orders from {errs:?}");
        }
    }

    #[test]
    fn d_squared_zero_exactly() {
        let (s, _) = setup(Shape::Disk, &[1.0], 2);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let f = ScalarField::from_fn(&s, |p| (3.0 * p[0]).sin() + p[1] * p[1]);
        let df = so.d0(&f).unwrap();
        let ddf = so.exterior_derivative(&df.as_kform()).unwrap();
        let scale = f.linf().max(1.0);
        assert!(ddf.cochain.unwrap().iter().all(|v| v.abs() < 1e-14 * scale));
        // and for a generic 1-form via its de Rham cochain, d(dω) = 0
        let mut gen = SmoothFieldGen::new(1);
        let omega = gen.one_form(&s, &so.dec);
        let domega = so.exterior_derivative(&omega.as_kform()).unwrap();
        let ddomega = so.exterior_derivative(&domega).unwrap();
        assert!(ddomega.components.is_empty() || ddomega.components.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn codifferential_is_minus_divergence_for_gradients() {
        let (s, _) = setup(Shape::Annulus, &[0.5, 1.0], 2);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let f = ScalarField::from_fn(&s, |p| p[0] * p[1]);
        let df = so.d0(&f).unwrap();
        let delta = so.codifferential_1(&df);
        let div = l2_divergence(&s, &df.sharp(&s));
        for (a, b) in delta.values.iter().zip(&div.values) {
            assert!((a + b).abs() <= 1e-11 * (1.0 + b.abs()), "{a} vs {}", -b);
        }
    }

    #[test]
    fn codifferential_product_oracle() {
        // δ(g df) ≈ -⟨∇g, ∇f⟩ - g Δf, refinement-vanishing
        let mut errs = Vec::new();
        for level in 1..4 {
            let (s, _) = setup(Shape::Disk, &[1.0], level);
            let form = DirichletForm::assemble(&s).unwrap();
            let so = SecondOrder::new(&form).unwrap();
            let g = ScalarField::from_fn(&s, |p| p[0] + 0.7);
            let f = ScalarField::from_fn(&s, |p| (1.4 * p[1]).sin() + p[0]);
            let cochain = so.dec.cochain_of_g_df(&g, &f);
            let gdf = so.dec.whitney_view(&cochain);
            let delta = so.codifferential_1(&gdf);
            let gamma = form.carre_du_champ(&g, &f).unwrap();
            let lap = form.laplacian(&f).unwrap();
            let mut l1 = 0.0;
            for v in 0..s.n_vertices() {
                let oracle = -gamma.values[v] - g.values[v] * lap.values[v];
                l1 += (delta.values[v] - oracle).abs() * s.interior_mass[v];
            }
            errs.push(l1);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 0.9, "orders from {errs:?}");
        }
    }

    #[test]
    fn adjointness_between_d_and_delta_via_forms() {
        let (s, _) = setup(Shape::Disk, &[1.0], 2);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let mut gen = SmoothFieldGen::new(9);
        let f = gen.scalar(&s);
        let omega = gen.one_form(&s, &so.dec);
        // ⟨df, ω⟩ = ⟨f, δω⟩
        let df = so.d0(&f).unwrap();
        let lhs = so.dec.inner_1(df.cochain.as_ref().unwrap(), omega.cochain.as_ref().unwrap());
        let delta = so.codifferential_1(&omega);
        let rhs = f.l2_inner(&s, &delta);
        assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0));
        // ⟨dω, τ⟩ = ⟨ω, δτ⟩ for a top form τ
        let tau = gen.k_form(&s, &so.dec, 2);
        let domega = so.exterior_derivative(&omega.as_kform()).unwrap();
        let tau_cochain = so.dec.two_form_to_cochain(&tau.components);
        let lhs = so.dec.inner_2(domega.cochain.as_ref().unwrap(), &tau_cochain);
        let delta_tau = so.codifferential_2(&tau).unwrap();
        let rhs = so.dec.inner_1(omega.cochain.as_ref().unwrap(), delta_tau.cochain.as_ref().unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn hodge_laplacian_on_test_forms_oracle() {
        // □(g df) + g dΔf + Δg df + 2 Hess f(∇g, ·) → 0 under refinement
        let mut errs = Vec::new();
        for level in 1..4 {
            let (s, _) = setup(Shape::Rectangle, &[1.0, 1.0], level);
            let form = DirichletForm::assemble(&s).unwrap();
            let so = SecondOrder::new(&form).unwrap();
            let g = ScalarField::from_fn(&s, |p| p[1] + 0.3 * p[0]);
            let f = ScalarField::from_fn(&s, |p| (1.2 * p[0]).cos() + 0.5 * p[1] * p[1]);
            let cochain = so.dec.cochain_of_g_df(&g, &f);
            let gdf = so.dec.whitney_view(&cochain);
            let hodge = so.hodge1(&gdf);
            let lapf = form.laplacian(&f).unwrap();
            let lapg = form.laplacian(&g).unwrap();
            let d_lapf = differential(&s, &lapf).unwrap();
            let df = differential(&s, &f).unwrap();
            let hess = so.hessian(&f).unwrap();
            let grad_g = gradient(&s, &g).unwrap();
            let d = s.dim;
            let mut l1 = 0.0;
            for c in 0..s.n_cells() {
                let gc = g.cell_average(&s, c);
                let lgc = lapg.cell_average(&s, c);
                // Hess f(∇g, ·) as covector: (Hf)_{ij} (∇g)^i
                let h = hess.comp(d, c);
                let gg = grad_g.comp(d, c);
                for i in 0..d {
                    let hcov: f64 = (0..d).map(|k| gg[k] * h[k * d + i]).sum();
                    let resid = hodge.components[c * d + i]
                        + gc * d_lapf.components[c * d + i]
                        + lgc * df.components[c * d + i]
                        + 2.0 * hcov;
                    l1 += resid.abs() * s.cell_volume[c];
                }
            }
            errs.push(l1);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 0.8, "orders from {errs:?}");
        }
    }

    #[test]
    fn heat_flow_commutation_and_domination() {
        let (s, _) = setup(Shape::Disk, &[1.0], 2);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let f = ScalarField::from_fn(&s, |p| (2.2 * p[0]).sin() - p[1]);
        let t = 0.1;
        // H_t df = d P_t f
        let df = so.d0(&f).unwrap();
        let lhs = so.heat_flow_form(&df, t).unwrap();
        let ptf = form.heat_flow(&f, t).unwrap();
        let rhs = so.d0(&ptf).unwrap();
        let scale = rhs.norm_cells(&s).iter().fold(1e-30f64, |a, v| a.max(*v));
        for (a, b) in lhs.components.iter().zip(&rhs.components) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
        // |H^∇_t X| ≤ P_t |X| + O(h)
        let mut gen = SmoothFieldGen::new(21);
        let x = gen.vector(&s);
        let hx = so.heat_flow_vector(&x, t).unwrap();
        let lhs_n = hx.norm_cells(&s);
        let norm_x = cell_to_vertex(&s, &x.norm_cells(&s));
        let pt_norm = form.heat_flow(&norm_x, t).unwrap();
        let h = s.mesh_size();
        let scale = norm_x.linf().max(1.0);
        for c in 0..s.n_cells() {
            let rhs_c = pt_norm.cell_average(&s, c);
            assert!(lhs_n[c] <= rhs_c + 3.0 * h * scale, "{} vs {}", lhs_n[c], rhs_c);
        }
    }

    #[test]
    fn spectral_bottom_inequality_scalar_vs_bochner() {
        let (s, _) = setup(Shape::Sphere, &[1.0], 1);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let (scalar, bochner, _hodge) = so.spectral_bottoms().unwrap();
        assert!(scalar <= bochner + 1e-9, "{scalar} vs {bochner}");
    }

    #[test]
    fn betti_numbers_de_rham_dims() {
        let (s, _) = setup(Shape::Annulus, &[0.5, 1.0], 2);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        assert_eq!(so.de_rham_dim(0).unwrap(), 1);
        assert_eq!(so.de_rham_dim(1).unwrap(), 1);
        assert_eq!(so.de_rham_dim(2).unwrap(), 0);
        let (t, _) = setup(Shape::Torus, &[1.0], 1);
        let form_t = DirichletForm::assemble(&t).unwrap();
        let so_t = SecondOrder::new(&form_t).unwrap();
        assert_eq!(so_t.de_rham_dim(0).unwrap(), 1);
        assert_eq!(so_t.de_rham_dim(1).unwrap(), 2);
        assert_eq!(so_t.de_rham_dim(2).unwrap(), 1);
    }

    #[test]
    fn bochner_is_selfadjoint_and_psd() {
        let (s, _) = setup(Shape::Disk, &[1.0], 1);
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let mut gen = SmoothFieldGen::new(2);
        let x = gen.vector(&s);
        let y = gen.vector(&s);
        let bx = so.bochner(&x).unwrap();
        let by = so.bochner(&y).unwrap();
        let a = bx.l2_inner(&s, &y);
        let b = x.l2_inner(&s, &by);
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        let e = so.bochner(&x).unwrap().l2_inner(&s, &x);
        assert!(e >= -1e-10);
        // ⟨□X, X⟩ = E_cov(X)
        let ecov = so.covariant_energy(&x).unwrap();
        assert!((e - ecov).abs() <= 1e-9 * ecov.max(1.0), "{e} vs {ecov}");
    }
}
