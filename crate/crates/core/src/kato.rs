//! Taming measures κ = k·m + l·s, the perturbed energy form, Schrödinger
//! operators and semigroups, Kato-constant profiles and form-boundedness
//! constants.
//!
//! Boundary parts are lumped to vertex densities w.r.t. m before entering
//! generators, so all operators act on one vertex space; the interior/boundary
//! distinction survives in measure reporting. The implemented clock follows
//! P^{qκ}_t = exp(t(Δ - q V_κ)) and the Kato profile
//! K(t) = max_x ∫₀^{2t} (P_s ρ)(x) ds with ρ the vertex density of 2|κ|,
//! pinned by the constant-density identity K(t) = 4ct for k ≡ c.

use crate::dirichlet::DirichletForm;
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg::{eigh_gen_diag, GenEig};
use crate::mesh::ModelSpace;
use once_cell::sync::OnceCell;

/// A signed taming measure κ = k·m + l·s.
#[derive(Debug, Clone)]
pub struct KatoMeasure {
    pub space_tag: u64,
    /// Interior density k w.r.t. m, one value per vertex.
    pub interior_density_k: Vec<f64>,
    /// Boundary density l w.r.t. s, indexed like `boundary_vertices`.
    pub boundary_density_l: Vec<f64>,
}

/// Form-boundedness certificate: ⟨|κ| | f²⟩ ≤ ρ′ E(f) + α′ ‖f‖².
#[derive(Debug, Clone, Copy)]
pub struct FormBound {
    pub rho_prime: f64,
    pub alpha_prime: f64,
}

impl KatoMeasure {
    pub fn zero(space: &ModelSpace) -> Self {
        KatoMeasure {
            space_tag: space.space_id,
            interior_density_k: vec![0.0; space.n_vertices()],
            boundary_density_l: vec![0.0; space.boundary_vertices.len()],
        }
    }

    pub fn from_constants(space: &ModelSpace, k: f64, l: f64) -> Self {
        KatoMeasure {
            space_tag: space.space_id,
            interior_density_k: vec![k; space.n_vertices()],
            boundary_density_l: vec![l; space.boundary_vertices.len()],
        }
    }

    pub fn from_fns(
        space: &ModelSpace,
        k: impl Fn(&[f64]) -> f64,
        l: impl Fn(&[f64]) -> f64,
    ) -> Self {
        KatoMeasure {
            space_tag: space.space_id,
            interior_density_k: (0..space.n_vertices()).map(|v| k(space.vertex(v))).collect(),
            boundary_density_l: space
                .boundary_vertices
                .iter()
                .map(|&v| l(space.vertex(v as usize)))
                .collect(),
        }
    }

    pub fn check_space(&self, space: &ModelSpace) -> Result<()> {
        if self.space_tag != space.space_id {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    /// Lumped vertex masses of κ: k_i m_i + l_i s_i per vertex.
    pub fn vertex_masses(&self, space: &ModelSpace) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .interior_density_k
            .iter()
            .zip(&space.interior_mass)
            .map(|(k, m)| k * m)
            .collect();
        for (idx, &v) in space.boundary_vertices.iter().enumerate() {
            out[v as usize] += self.boundary_density_l[idx] * space.boundary_mass[v as usize];
        }
        out
    }

    /// Vertex density of κ w.r.t. m (boundary parts lumped through m).
    pub fn vertex_density(&self, space: &ModelSpace) -> Vec<f64> {
        self.vertex_masses(space)
            .iter()
            .zip(&space.interior_mass)
            .map(|(mass, m)| mass / m)
            .collect()
    }

    pub fn abs(&self) -> KatoMeasure {
        KatoMeasure {
            space_tag: self.space_tag,
            interior_density_k: self.interior_density_k.iter().map(|v| v.abs()).collect(),
            boundary_density_l: self.boundary_density_l.iter().map(|v| v.abs()).collect(),
        }
    }

    /// Negative part κ⁻ of the Jordan decomposition (a nonnegative measure).
    pub fn negative_part(&self) -> KatoMeasure {
        KatoMeasure {
            space_tag: self.space_tag,
            interior_density_k: self.interior_density_k.iter().map(|v| (-v).max(0.0)).collect(),
            boundary_density_l: self.boundary_density_l.iter().map(|v| (-v).max(0.0)).collect(),
        }
    }

    /// Total variation ‖κ‖ = ∫|k| dm + ∫|l| ds.
    pub fn tv(&self, space: &ModelSpace) -> f64 {
        let mut tv: f64 = self
            .interior_density_k
            .iter()
            .zip(&space.interior_mass)
            .map(|(k, m)| k.abs() * m)
            .sum();
        for (idx, &v) in space.boundary_vertices.iter().enumerate() {
            tv += self.boundary_density_l[idx].abs() * space.boundary_mass[v as usize];
        }
        tv
    }

    /// Pairing ⟨κ | f⟩ = ∫ f k dm + ∫ f l ds.
    pub fn pair(&self, space: &ModelSpace, f: &ScalarField) -> Result<f64> {
        self.check_space(space)?;
        f.check_space(space)?;
        Ok(self
            .vertex_masses(space)
            .iter()
            .zip(&f.values)
            .map(|(mass, fv)| mass * fv)
            .sum())
    }

    /// ⟨κ | f²⟩, the quadratic-form pairing.
    pub fn pair_sq(&self, space: &ModelSpace, f: &ScalarField) -> Result<f64> {
        self.check_space(space)?;
        f.check_space(space)?;
        Ok(self
            .vertex_masses(space)
            .iter()
            .zip(&f.values)
            .map(|(mass, fv)| mass * fv * fv)
            .sum())
    }
}

/// Schrödinger operator Δ^{qκ} = Δ - q·V_κ with the κ potential lumped to a
/// vertex multiplication operator V_κ = M⁻¹ (κ-masses).
pub struct SchrodingerOp<'a> {
    pub form: &'a DirichletForm<'a>,
    pub kappa: KatoMeasure,
    pub q: f64,
    /// Potential as vertex density w.r.t. m.
    pub potential: Vec<f64>,
    spectral: OnceCell<GenEig>,
}

impl<'a> SchrodingerOp<'a> {
    pub fn new(form: &'a DirichletForm<'a>, kappa: &KatoMeasure, q: f64) -> Result<Self> {
        kappa.check_space(form.space)?;
        if !(1.0..=2.0).contains(&q) {
            return Err(Error::OutOfRange(format!("q = {q} outside [1, 2]")));
        }
        let potential = kappa.vertex_density(form.space);
        Ok(SchrodingerOp { form, kappa: kappa.clone(), q, potential, spectral: OnceCell::new() })
    }

    /// Apply Δ^{qκ} f = Δf - q V_κ f.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        let mut lap = self.form.laplacian(f)?;
        for (v, val) in lap.values.iter_mut().enumerate() {
            *val -= self.q * self.potential[v] * f.values[v];
        }
        Ok(lap)
    }

    /// Perturbed energy E^{qκ}(f, g) = E(f, g) + q ⟨κ | fg⟩; symmetric w.r.t.
    /// the mass inner product by construction.
    pub fn energy(&self, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        let masses = self.kappa.vertex_masses(self.form.space);
        let pairing: f64 = masses
            .iter()
            .zip(&f.values)
            .zip(&g.values)
            .map(|((mass, a), b)| mass * a * b)
            .sum();
        Ok(self.form.energy(f, g) + self.q * pairing)
    }

    /// Generalized eigendecomposition of (K + q diag(κ-masses), M), cached.
    pub fn spectral(&self) -> Result<&GenEig> {
        self.spectral.get_or_try_init(|| {
            let mut a = self.form.stiffness.to_dense();
            let masses = self.kappa.vertex_masses(self.form.space);
            for v in 0..a.nrows() {
                a[[v, v]] += self.q * masses[v];
            }
            eigh_gen_diag(&a, &self.form.space.interior_mass)
        })
    }

    /// Ascending eigenvalues of -Δ^{qκ}.
    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        let eig = self.spectral()?;
        Ok(eig.vals.iter().take(count).copied().collect())
    }

    /// Feynman–Kac semigroup P^{qκ}_t f = exp(t Δ^{qκ}) f.
    pub fn semigroup(&self, f: &ScalarField, t: f64) -> Result<ScalarField> {
        f.check_space(self.form.space)?;
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let vals = self.spectral()?.apply_exp(t, &f.values);
        Ok(ScalarField { space_tag: f.space_tag, values: vals })
    }
}

/// Kato-constant profile K(t) = max_x ∫₀^{2t} (P_s ρ)(x) ds with ρ the vertex
/// density of 2|κ|, by composite trapezoid quadrature on ≥ 64 substeps.
pub fn kato_constant(
    form: &DirichletForm,
    kappa: &KatoMeasure,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    kappa.check_space(form.space)?;
    if t_grid.iter().any(|&t| t <= 0.0) {
        return Err(Error::OutOfRange("kato profile needs t > 0".into()));
    }
    let rho_vals: Vec<f64> = kappa.abs().vertex_density(form.space).iter().map(|v| 2.0 * v).collect();
    let rho = ScalarField { space_tag: form.space.space_id, values: rho_vals };
    let nv = form.n_vertices();
    let substeps = 64usize;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let h = 2.0 * t / substeps as f64;
        let mut acc = vec![0.0; nv];
        for step in 0..=substeps {
            let s = h * step as f64;
            let ps = form.heat_flow(&rho, s)?;
            let w = if step == 0 || step == substeps { 0.5 } else { 1.0 };
            for v in 0..nv {
                acc[v] += w * h * ps.values[v];
            }
        }
        out.push(acc.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)));
    }
    Ok(out)
}

/// Smallest α′ with ⟨|κ| | f²⟩ ≤ ρ′ E(f) + α′ ‖f‖²: the top generalized
/// eigenvalue of (diag(|κ|-masses) - ρ′ K, M).
pub fn fit_form_bound(form: &DirichletForm, kappa: &KatoMeasure, rho_prime: f64) -> Result<FormBound> {
    kappa.check_space(form.space)?;
    if !(rho_prime > 0.0 && rho_prime < 1.0) {
        return Err(Error::OutOfRange(format!("ρ' = {rho_prime} outside (0, 1)")));
    }
    let masses = kappa.abs().vertex_masses(form.space);
    let mut a = form.stiffness.to_dense();
    a.mapv_inplace(|v| -rho_prime * v);
    for v in 0..a.nrows() {
        a[[v, v]] += masses[v];
    }
    let eig = eigh_gen_diag(&a, &form.space.interior_mass)?;
    let alpha = eig.vals[eig.vals.len() - 1];
    Ok(FormBound { rho_prime, alpha_prime: alpha })
}
