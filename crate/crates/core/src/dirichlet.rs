//! Dirichlet form assembly: energy (stiffness) operator with nonpositive
//! off-diagonal entries, lumped mass, carré du champ, Neumann Laplacian,
//! heat semigroup and spectrum.
//!
//! Everything downstream relies on the exact chain
//! `E(f,g) = ∫ Γ(f,g) dm = -∫ g Δf dm` holding to machine precision, which
//! the lumped-mass construction guarantees by design.

use crate::error::{Error, Result};
use crate::fields::{cell_to_vertex, ScalarField};
use crate::linalg::{eigh_gen_diag, expm, Csr, GenEig};
use crate::mesh::ModelSpace;
use ndarray::{Array1, Array2};
use once_cell::sync::OnceCell;

/// Vertex count above which the heat flow falls back to scaling-and-squaring
/// instead of a full eigendecomposition.
pub const DEFAULT_SPECTRAL_CROSSOVER: usize = 4000;

/// Assembled Dirichlet form over a model space.
pub struct DirichletForm<'a> {
    pub space: &'a ModelSpace,
    /// Symmetric positive semidefinite stiffness with the constants in its
    /// kernel; off-diagonal entries are ≤ 0 on non-obtuse meshes.
    pub stiffness: Csr,
    /// Crossover vertex count for the spectral heat-flow path.
    pub spectral_crossover: usize,
    spectral: OnceCell<GenEig>,
}

impl<'a> DirichletForm<'a> {
    /// Assemble stiffness from the cellwise exact gradients of hat functions.
    pub fn assemble(space: &'a ModelSpace) -> Result<DirichletForm<'a>> {
        let d = space.dim;
        let nv = space.n_vertices();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(space.n_cells() * (d + 1) * (d + 1));
        for c in 0..space.n_cells() {
            let cell = space.cell(c);
            let gi = space.metric_inv(c);
            let scale = space.cell_volume[c] * space.cell_weight[c];
            // chart differentials of the hat functions: dλ_a = e^a (a ≥ 1),
            // dλ_0 = -Σ_a e^a
            let mut dl = vec![0.0; (d + 1) * d];
            for a in 0..d {
                dl[(a + 1) * d + a] = 1.0;
                dl[a] = -1.0;
            }
            for p in 0..=d {
                for q in 0..=d {
                    let mut acc = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            acc += gi[i * d + j] * dl[p * d + i] * dl[q * d + j];
                        }
                    }
                    triplets.push((cell[p] as usize, cell[q] as usize, scale * acc));
                }
            }
        }
        let stiffness = Csr::from_triplets(nv, nv, &triplets);
        // Markovianity: off-diagonal entries must be ≤ 0
        for r in 0..nv {
            for k in stiffness.indptr[r]..stiffness.indptr[r + 1] {
                let cidx = stiffness.indices[k];
                if cidx != r && stiffness.data[k] > 1e-12 {
                    return Err(Error::Invariant {
                        invariant: "markovian-stiffness",
                        msg: format!("positive off-diagonal at ({r},{cidx})"),
                    });
                }
            }
        }
        Ok(DirichletForm { space, stiffness, spectral_crossover: DEFAULT_SPECTRAL_CROSSOVER, spectral: OnceCell::new() })
    }

    pub fn n_vertices(&self) -> usize {
        self.space.n_vertices()
    }

    /// Energy E(f, g) = fᵀ K g.
    pub fn energy(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        let kg = self.stiffness.matvec_owned(&g.values);
        f.values.iter().zip(&kg).map(|(a, b)| a * b).sum()
    }

    /// Cellwise carré du champ Γ(f, g) = ⟨∇f, ∇g⟩ per cell (exact for the
    /// hat interpolants).
    pub fn carre_cells(&self, f: &ScalarField, g: &ScalarField) -> Result<Vec<f64>> {
        f.check_space(self.space)?;
        g.check_space(self.space)?;
        let s = self.space;
        let d = s.dim;
        let mut out = vec![0.0; s.n_cells()];
        for c in 0..s.n_cells() {
            let df = chart_differential(s, c, &f.values);
            let dg = chart_differential(s, c, &g.values);
            out[c] = crate::fields::quad_form(s.metric_inv(c), &df, &dg, d);
        }
        Ok(out)
    }

    /// Carré du champ as a vertex field (mass-averaged), so that
    /// ∫ Γ(f,g) dm = E(f,g) exactly.
    pub fn carre_du_champ(&self, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
        Ok(cell_to_vertex(self.space, &self.carre_cells(f, g)?))
    }

    /// Neumann Laplacian Δf = -M⁻¹ K f.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        f.check_space(self.space)?;
        let kf = self.stiffness.matvec_owned(&f.values);
        let vals = kf
            .iter()
            .zip(&self.space.interior_mass)
            .map(|(v, m)| -v / m)
            .collect();
        Ok(ScalarField { space_tag: f.space_tag, values: vals })
    }

    /// Generalized eigendecomposition of (K, M), cached.
    pub fn spectral(&self) -> Result<&GenEig> {
        self.spectral.get_or_try_init(|| {
            eigh_gen_diag(&self.stiffness.to_dense(), &self.space.interior_mass)
        })
    }

    /// Heat flow P_t f = e^{tΔ} f. Spectral for small problems, scaling and
    /// squaring beyond the crossover.
    pub fn heat_flow(&self, f: &ScalarField, t: f64) -> Result<ScalarField> {
        f.check_space(self.space)?;
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        let vals = if self.n_vertices() <= self.spectral_crossover {
            self.spectral()?.apply_exp(t, &f.values)
        } else {
            // exp(-t M^{-1/2} K M^{-1/2}) in the symmetrized frame
            let n = self.n_vertices();
            let s: Vec<f64> = self.space.interior_mass.iter().map(|m| m.sqrt()).collect();
            let mut a = self.stiffness.to_dense();
            for i in 0..n {
                for j in 0..n {
                    a[[i, j] ] *= -t / (s[i] * s[j]);
                }
            }
            let e = expm(&a);
            let scaled: Vec<f64> = f.values.iter().zip(&s).map(|(v, si)| v * si).collect();
            let y = e.dot(&Array1::from(scaled));
            y.iter().zip(&s).map(|(v, si)| v / si).collect()
        };
        Ok(ScalarField { space_tag: f.space_tag, values: vals })
    }

    /// Ascending generalized eigenvalues with eigenfields.
    pub fn spectrum(&self, count: usize) -> Result<(Vec<f64>, Vec<ScalarField>)> {
        if count > self.n_vertices() {
            return Err(Error::OutOfRange(format!(
                "requested {count} eigenvalues of a {}-dimensional operator",
                self.n_vertices()
            )));
        }
        let eig = self.spectral()?;
        let vals = eig.vals.iter().take(count).copied().collect();
        let fields = (0..count)
            .map(|k| ScalarField {
                space_tag: self.space.space_id,
                values: eig.vecs.column(k).to_vec(),
            })
            .collect();
        Ok((vals, fields))
    }

    pub fn stiffness_dense(&self) -> Array2<f64> {
        self.stiffness.to_dense()
    }
}

/// Chart components of the differential of the hat interpolant of `values`
/// on cell `c`: (df)_a = f(p_a) - f(p_0).
pub fn chart_differential(space: &ModelSpace, c: usize, values: &[f64]) -> Vec<f64> {
    let cell = space.cell(c);
    let f0 = values[cell[0] as usize];
    (1..=space.dim).map(|a| values[cell[a] as usize] - f0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Shape, WeightFn};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn interval(level: usize) -> ModelSpace {
        ModelSpace::build(Shape::Interval, &[1.0], level, &WeightFn::Zero).unwrap()
    }

    #[test]
    fn two_cell_interval_stiffness_matches_hand_assembly() {
        // h = 1/2: K = [[2,-2,0],[-2,4,-2],[0,-2,2]]
        let s = interval(0);
        let form = DirichletForm::assemble(&s).unwrap();
        let k = form.stiffness_dense();
        let expected = [[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0], [0.0, -2.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k[[i, j]], expected[i][j], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn constants_have_zero_energy_everywhere() {
        for shape in [Shape::Interval, Shape::Disk, Shape::Sphere, Shape::Annulus] {
            let s = ModelSpace::build(shape, &[1.0], 1, &WeightFn::Zero).unwrap();
            let form = DirichletForm::assemble(&s).unwrap();
            let one = ScalarField::constant(&s, 1.0);
            assert!(form.energy(&one, &one).abs() < 1e-12);
            let lap = form.laplacian(&one).unwrap();
            assert!(lap.linf() < 1e-12);
        }
    }

    #[test]
    fn energy_is_positive_semidefinite_on_random_fields() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let mut state = 12345u64;
        for _ in 0..100 {
            let f = ScalarField::new(
                &s,
                (0..s.n_vertices())
                    .map(|_| {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                        ((state >> 12) as f64 / (1u64 << 52) as f64) - 1.0
                    })
                    .collect(),
            );
            assert!(form.energy(&f, &f) >= -1e-12);
        }
    }

    #[test]
    fn exact_identity_energy_gamma_laplacian() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::RadialSquare(0.3)).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let f = ScalarField::from_fn(&s, |p| (p[0] * 2.1).sin() + p[1]);
        let g = ScalarField::from_fn(&s, |p| p[0] * p[1] + 0.5 * p[1]);
        let e = form.energy(&f, &g);
        let gamma = form.carre_du_champ(&f, &g).unwrap();
        let int_gamma = gamma.integral(&s);
        let lap = form.laplacian(&f).unwrap();
        let minus_glap = -g.l2_inner(&s, &lap);
        let scale = e.abs().max(1.0);
        assert!((e - int_gamma).abs() <= 1e-12 * scale);
        assert!((e - minus_glap).abs() <= 1e-12 * scale);
    }

    #[test]
    fn gamma_of_linear_function_is_one_inside() {
        let s = interval(4);
        let form = DirichletForm::assemble(&s).unwrap();
        let f = ScalarField::from_fn(&s, |p| p[0]);
        let gamma = form.carre_du_champ(&f, &f).unwrap();
        for v in 0..s.n_vertices() {
            assert_abs_diff_eq!(gamma.values[v], 1.0, epsilon = 1e-12);
        }
        let one = ScalarField::constant(&s, 1.0);
        let gzero = form.carre_du_champ(&one, &f).unwrap();
        assert!(gzero.linf() < 1e-13);
    }

    #[test]
    fn laplacian_of_neumann_eigenfunction() {
        // f = cos(πx): Δf = -π² f with O(h²) interior residual
        let mut errs = Vec::new();
        for level in 3..6 {
            let s = interval(level);
            let form = DirichletForm::assemble(&s).unwrap();
            let f = ScalarField::from_fn(&s, |p| (PI * p[0]).cos());
            let lap = form.laplacian(&f).unwrap();
            let mut worst: f64 = 0.0;
            for v in 0..s.n_vertices() {
                if s.is_boundary[v] {
                    continue;
                }
                worst = worst.max((lap.values[v] + PI * PI * f.values[v]).abs());
            }
            errs.push(worst);
        }
        assert!(errs[0] < 0.1);
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "order {}", (w[0] / w[1]).log2());
        }
    }

    #[test]
    fn neumann_laplacian_integrates_to_zero() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let f = ScalarField::from_fn(&s, |p| p[0].powi(3) - p[1]);
        let lap = form.laplacian(&f).unwrap();
        assert!(lap.integral(&s).abs() < 1e-12);
    }

    #[test]
    fn heat_flow_semigroup_and_positivity() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 1, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let one = ScalarField::constant(&s, 1.0);
        let pt_one = form.heat_flow(&one, 0.7).unwrap();
        for v in &pt_one.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-10);
        }
        let f = ScalarField::from_fn(&s, |p| (1.0 - p[0].abs()).max(0.0));
        let a = form.heat_flow(&form.heat_flow(&f, 0.2).unwrap(), 0.3).unwrap();
        let b = form.heat_flow(&f, 0.5).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
        let pos = form.heat_flow(&f, 0.05).unwrap();
        assert!(pos.values.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn heat_flow_a_priori_energy_bound() {
        let s = ModelSpace::build(Shape::Disk, &[1.0], 2, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let f = ScalarField::from_fn(&s, |p| (7.0 * p[0]).sin() * (5.0 * p[1]).cos());
        let norm2 = f.l2_inner(&s, &f);
        for &t in &[0.01, 0.1, 1.0] {
            let pf = form.heat_flow(&f, t).unwrap();
            let e = form.energy(&pf, &pf);
            assert!(e <= norm2 / (2.0 * t) + 1e-12, "t={t}: E={e}");
        }
    }

    #[test]
    fn expm_path_matches_spectral_path() {
        let s = interval(3);
        let mut form = DirichletForm::assemble(&s).unwrap();
        let f = ScalarField::from_fn(&s, |p| (PI * p[0]).cos() + 0.3 * (2.0 * PI * p[0]).cos());
        let spectral = form.heat_flow(&f, 0.37).unwrap();
        form.spectral_crossover = 0; // force the Padé fallback
        let pade = form.heat_flow(&f, 0.37).unwrap();
        for (a, b) in spectral.values.iter().zip(&pade.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn interval_spectrum_converges_to_neumann_eigenvalues() {
        let mut errs = Vec::new();
        for level in 3..6 {
            let s = interval(level);
            let form = DirichletForm::assemble(&s).unwrap();
            let (vals, fields) = form.spectrum(4).unwrap();
            assert!(vals[0].abs() < 1e-10);
            let spread = fields[0]
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            assert!((spread.1 - spread.0).abs() < 1e-8, "first eigenfield constant");
            let mut worst: f64 = 0.0;
            for k in 1..4 {
                let exact = (PI * k as f64).powi(2);
                worst = worst.max((vals[k] - exact).abs() / exact);
            }
            errs.push(worst);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.85, "order {}", (w[0] / w[1]).log2());
        }
    }

    #[test]
    fn sphere_lambda1_is_two_with_multiplicity_three() {
        let s = ModelSpace::build(Shape::Sphere, &[1.0], 3, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let (vals, _) = form.spectrum(5).unwrap();
        assert!(vals[0].abs() < 1e-9);
        for k in 1..4 {
            assert!((vals[k] - 2.0).abs() < 0.02, "λ_{k} = {}", vals[k]);
        }
        assert!(vals[4] > 4.0, "next cluster ℓ=2 starts at {}", vals[4]);
    }

    #[test]
    fn space_mismatch_is_rejected() {
        let s1 = interval(1);
        let s2 = interval(1);
        let form = DirichletForm::assemble(&s1).unwrap();
        let f = ScalarField::constant(&s2, 1.0);
        assert!(matches!(form.laplacian(&f), Err(Error::SpaceMismatch)));
    }
}
