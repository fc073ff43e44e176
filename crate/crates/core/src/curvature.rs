//! Curvature of tamed model spaces: the measure-valued Γ₂ operator, the
//! κ-Ricci measure and its Lebesgue split into interior Ricci density and
//! boundary second fundamental form, the N-Ricci tensor, the vector
//! q-Bochner inequality, the self-improvement inequality and the trace /
//! dimension bounds.
//!
//! The Ricci measure is assembled from the weak Bochner formula
//! Ric(X,Y) = ½ DIV∇⟨X,Y⟩ + [½⟨X,(□₁Y♭)♯⟩ + ½⟨Y,(□₁X♭)♯⟩ - ∇X:∇Y]·m,
//! with the Hodge term taken from the cochain operator, whose weak form
//! carries the boundary fluxes; at boundary vertices those contributions are
//! concentrated onto the s-part of the measure, which is what turns the
//! decomposition into ric·m + II·s.

use crate::dirichlet::DirichletForm;
use crate::error::{Error, Result};
use crate::fields::{cell_to_vertex, tensor_product, ScalarField, VectorField};
use crate::first_order::{gradient, l2_divergence, measure_divergence, MeasureField};
use crate::kato::KatoMeasure;
use crate::mesh::ModelSpace;
use crate::second_order::SecondOrder;
use serde::Serialize;
use std::collections::BTreeMap;

/// Curvature calculator over an assembled second-order structure.
pub struct Curvature<'a, 'b> {
    pub so: &'b SecondOrder<'a>,
}

/// Report of a Ricci-measure evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct RicciReport {
    /// Interior Ricci density w.r.t. m (zero at boundary vertices).
    pub ric_interior: Vec<f64>,
    /// Second-fundamental-form density w.r.t. s on boundary vertices.
    pub ii_boundary: Vec<f64>,
    pub tv_norm: f64,
    pub residuals: BTreeMap<String, f64>,
    pub mesh_size: f64,
}

impl RicciReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable report")
    }
}

/// Outcome of a pointwise inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct SlackReport {
    /// Worst (most negative) interior slack.
    pub interior_min: f64,
    /// Worst boundary slack, when a boundary exists.
    pub boundary_min: Option<f64>,
    /// Scale of the quantities entering the inequality.
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceDimReport {
    /// Worst slack of |A|² - (tr A)²/N over cells.
    pub trace_slack_min: f64,
    pub max_pointwise_rank: usize,
    pub rank_bound_violated: bool,
    /// L¹ residual of tr Hess h - Δh over interior vertices (N = dim only).
    pub trace_identity_l1: Option<f64>,
}

impl<'a, 'b> Curvature<'a, 'b> {
    pub fn new(so: &'b SecondOrder<'a>) -> Self {
        Curvature { so }
    }

    fn space(&self) -> &'a ModelSpace {
        self.so.space()
    }

    fn form(&self) -> &'a DirichletForm<'a> {
        self.so.form
    }

    /// Polarized Γ₂ measure:
    /// Γ₂^{2κ}(u,v) = ½ DIV∇Γ(u,v) - ½[Γ(u,Δv) + Γ(v,Δu)]·m - Γ(u,v)·κ.
    ///
    /// The vertex field feeding the measure-valued Laplacian is recovered
    /// from ambient-averaged gradients; the plain cell average of Γ carries a
    /// quadratic interpolation bias whose weak Laplacian does not vanish
    /// under refinement on curved meshes.
    pub fn gamma2_pair(
        &self,
        u: &ScalarField,
        v: &ScalarField,
        kappa: &KatoMeasure,
    ) -> Result<MeasureField> {
        let space = self.space();
        let form = self.form();
        let gamma_uv = form.carre_du_champ(u, v)?;
        let recovered =
            crate::fields::recovered_inner(space, &gradient(space, u)?, &gradient(space, v)?);
        let mut out = measure_divergence(space, &gradient(space, &recovered)?);
        out.axpy(space, &out.clone(), -0.5); // scale by 1/2

        let lap_u = form.laplacian(u)?;
        let lap_v = form.laplacian(v)?;
        let g1 = form.carre_du_champ(u, &lap_v)?;
        let g2 = form.carre_du_champ(v, &lap_u)?;
        let mixed: Vec<f64> =
            g1.values.iter().zip(&g2.values).map(|(a, b)| -0.5 * (a + b)).collect();
        out.add_interior_field(space, &mixed, 1.0);

        // -Γ(u,v)·κ split into its interior and boundary parts
        let k_density: Vec<f64> = kappa
            .interior_density_k
            .iter()
            .zip(&gamma_uv.values)
            .map(|(k, g)| -k * g)
            .collect();
        out.add_interior_field(space, &k_density, 1.0);
        let l_density: Vec<f64> = space
            .boundary_vertices
            .iter()
            .enumerate()
            .map(|(idx, &bv)| -kappa.boundary_density_l[idx] * gamma_uv.values[bv as usize])
            .collect();
        out.add_boundary_field(space, &l_density, 1.0);
        Ok(out)
    }

    /// Γ₂^{2κ}(f) = Γ₂^{2κ}(f, f).
    pub fn gamma2(&self, f: &ScalarField, kappa: &KatoMeasure) -> Result<MeasureField> {
        self.gamma2_pair(f, f, kappa)
    }

    /// Pointwise Bochner check: γ₂^{2κ}(f) ≥ |Hess f|²_HS as densities; the
    /// boundary part of Γ₂ must be (almost) nonnegative on tamed models.
    pub fn bochner_check(&self, f: &ScalarField, kappa: &KatoMeasure) -> Result<SlackReport> {
        let space = self.space();
        let g2 = self.gamma2(f, kappa)?;
        let hess = self.so.hessian(f)?;
        let hs2_cells: Vec<f64> =
            hess.hs_inner_cells(space, &hess)?.iter().map(|v| v.max(0.0)).collect();
        let hs2 = cell_to_vertex(space, &hs2_cells);
        let mut interior_min = f64::INFINITY;
        let mut scale: f64 = 1.0;
        for v in 0..space.n_vertices() {
            if !space.is_boundary[v] {
                interior_min = interior_min.min(g2.interior[v] - hs2.values[v]);
                scale = scale.max(g2.interior[v].abs()).max(hs2.values[v]);
            }
        }
        let boundary_min = if g2.boundary.is_empty() {
            None
        } else {
            Some(g2.boundary.iter().fold(f64::INFINITY, |a, &b| a.min(b)))
        };
        Ok(SlackReport { interior_min, boundary_min, scale })
    }

    /// Pre-Hessian H[f](a, b) as a vertex field, built from nested carré du
    /// champ operators only.
    pub fn pre_hessian(
        &self,
        f: &ScalarField,
        a: &ScalarField,
        b: &ScalarField,
    ) -> Result<ScalarField> {
        let form = self.form();
        let gfb = form.carre_du_champ(f, b)?;
        let gfa = form.carre_du_champ(f, a)?;
        let gab = form.carre_du_champ(a, b)?;
        let t1 = form.carre_du_champ(a, &gfb)?;
        let t2 = form.carre_du_champ(b, &gfa)?;
        let t3 = form.carre_du_champ(f, &gab)?;
        let values = (0..t1.values.len())
            .map(|v| 0.5 * (t1.values[v] + t2.values[v] - t3.values[v]))
            .collect();
        Ok(ScalarField { space_tag: f.space_tag, values })
    }

    /// Self-improvement inequality with N' = ∞: vertexwise
    /// [Σ_{ij} Γ(f_i,h_j)Γ(g_i,h_j) + g_i H[f_i](h_j,h_j)]²
    ///   ≤ ρ₁[f,g] · Σ_{jj'} Γ(h_j,h_j')².
    /// Returns the slack ρ₁·gram - mixed² (interior minimum) and the minimum
    /// of the singular part of μ₁ (boundary).
    pub fn self_improvement_check(
        &self,
        fs: &[ScalarField],
        gs: &[ScalarField],
        hs: &[ScalarField],
        kappa: &KatoMeasure,
    ) -> Result<SlackReport> {
        if fs.len() != gs.len() {
            return Err(Error::OutOfRange("f and g lists must have equal length".into()));
        }
        let space = self.space();
        let form = self.form();
        let nv = space.n_vertices();
        let n = fs.len();
        let m = hs.len();

        let mut rho1 = vec![0.0; nv];
        let mut mu1_boundary = vec![0.0; space.boundary_vertices.len()];
        for i in 0..n {
            for ip in 0..n {
                let g2 = self.gamma2_pair(&fs[i], &fs[ip], kappa)?;
                let h_term = self.pre_hessian(&fs[i], &fs[ip], &gs[ip])?;
                let gamma_ff = form.carre_du_champ(&fs[i], &fs[ip])?;
                let gamma_gg = form.carre_du_champ(&gs[i], &gs[ip])?;
                let gamma_fg = form.carre_du_champ(&fs[i], &gs[ip])?;
                let gamma_gf = form.carre_du_champ(&gs[i], &fs[ip])?;
                for v in 0..nv {
                    rho1[v] += gs[i].values[v] * gs[ip].values[v] * g2.interior[v]
                        + 2.0 * gs[i].values[v] * h_term.values[v]
                        + 0.5
                            * (gamma_ff.values[v] * gamma_gg.values[v]
                                + gamma_fg.values[v] * gamma_gf.values[v]);
                }
                for (idx, &bv) in space.boundary_vertices.iter().enumerate() {
                    mu1_boundary[idx] += gs[i].values[bv as usize]
                        * gs[ip].values[bv as usize]
                        * g2.boundary[idx];
                }
            }
        }

        let mut mixed = vec![0.0; nv];
        for i in 0..n {
            for h in hs.iter() {
                let gfh = form.carre_du_champ(&fs[i], h)?;
                let ggh = form.carre_du_champ(&gs[i], h)?;
                let hfh = self.pre_hessian(&fs[i], h, h)?;
                for v in 0..nv {
                    mixed[v] += gfh.values[v] * ggh.values[v] + gs[i].values[v] * hfh.values[v];
                }
            }
        }

        let mut gram = vec![0.0; nv];
        for j in 0..m {
            for jp in 0..m {
                let g = form.carre_du_champ(&hs[j], &hs[jp])?;
                for v in 0..nv {
                    gram[v] += g.values[v] * g.values[v];
                }
            }
        }

        let mut interior_min = f64::INFINITY;
        let mut scale: f64 = 1.0;
        for v in 0..nv {
            if !space.is_boundary[v] {
                let slack = rho1[v] * gram[v] - mixed[v] * mixed[v];
                interior_min = interior_min.min(slack);
                scale = scale.max(mixed[v] * mixed[v]).max((rho1[v] * gram[v]).abs());
            }
        }
        let boundary_min = if mu1_boundary.is_empty() {
            None
        } else {
            Some(mu1_boundary.iter().fold(f64::INFINITY, |a, &b| a.min(b)))
        };
        Ok(SlackReport { interior_min, boundary_min, scale })
    }

    /// Trace inequality |Σ ∇h_j⊗∇h_j|² ≥ (tr Σ ∇h_j⊗∇h_j)²/N, the pointwise
    /// rank bound ≤ ⌊N⌋, and for N = dim the residual tr Hess h ≈ Δh.
    pub fn trace_dimension_check(&self, hs: &[ScalarField], n_dim: f64) -> Result<TraceDimReport> {
        let space = self.space();
        if n_dim < space.dim as f64 {
            log::warn!("dimension bound N = {n_dim} below mesh dimension {}", space.dim);
        }
        let mut a =
            crate::fields::TensorField2::zero(space, crate::fields::Variance::Contravariant);
        let mut grads = Vec::new();
        for h in hs {
            let g = gradient(space, h)?;
            let t = tensor_product(space, &g, &g);
            for (x, y) in a.components.iter_mut().zip(&t.components) {
                *x += y;
            }
            grads.push(crate::first_order::differential(space, h)?);
        }
        let hs2 = a.hs_inner_cells(space, &a)?;
        let tr = a.trace_cells(space);
        let mut slack_min = f64::INFINITY;
        for c in 0..space.n_cells() {
            slack_min = slack_min.min(hs2[c] - tr[c] * tr[c] / n_dim);
        }
        let ranks = crate::fields::hino_index(space, &grads);
        let max_rank = ranks.iter().copied().max().unwrap_or(0);
        let rank_bound_violated = (max_rank as f64) > n_dim.floor() + 0.5;

        let trace_identity_l1 = if (n_dim - space.dim as f64).abs() < 1e-12 {
            let mut l1 = 0.0;
            for h in hs {
                let hess = self.so.hessian(h)?;
                let tr_h = cell_to_vertex(space, &hess.trace_cells(space));
                let lap = self.form().laplacian(h)?;
                for v in 0..space.n_vertices() {
                    if !space.is_boundary[v] {
                        l1 += (tr_h.values[v] - lap.values[v]).abs() * space.interior_mass[v];
                    }
                }
            }
            Some(l1)
        } else {
            None
        };
        Ok(TraceDimReport {
            trace_slack_min: slack_min,
            max_pointwise_rank: max_rank,
            rank_bound_violated,
            trace_identity_l1,
        })
    }

    /// The drift-free Ricci measure Ric(X, Y) with its reports. The interior
    /// density is the Ricci curvature `ric`, the boundary density the second
    /// fundamental form `II`.
    pub fn ricci_measure(
        &self,
        x: &VectorField,
        y: &VectorField,
        kappa: &KatoMeasure,
    ) -> Result<RicciReport> {
        let space = self.space();
        let d = space.dim;
        let u = crate::fields::recovered_inner(space, x, y);
        let nv = space.n_vertices();

        // ½ DIV∇⟨X,Y⟩ as vertex masses
        let b = crate::first_order::pairing_masses(space, &gradient(space, &u)?);
        let mut masses: Vec<f64> = b.iter().map(|v| -0.5 * v).collect();

        // Hodge part, weakly: mass_j = ½[E₁(X♭, φ_j Y♭) + E₁(Y♭, φ_j X♭)]
        // with the hat-cut cochain (φ_j ω)_e = ½ ω_e on edges at j.
        let dec = &self.so.dec;
        let cx = dec.de_rham(&x.flat(space));
        let cy = dec.de_rham(&y.flat(space));
        let wx = dec.a1_apply(&cx);
        let wy = dec.a1_apply(&cy);
        for (e, &(a, bb)) in dec.edges.iter().enumerate() {
            let val = 0.25 * (cy[e] * wx[e] + cx[e] * wy[e]);
            masses[a as usize] += val;
            masses[bb as usize] += val;
        }

        // covariant part, weakly: ∫ ∇X : ∇(φ_j Y) dm with the exact Leibniz
        // split ∇(φ_j Y) = dφ_j ⊗ Y♭ + φ̄_j ∇Y, symmetrized in X and Y.
        let nx = self.so.covariant_derivative(x)?;
        let ny = self.so.covariant_derivative(y)?;
        let hs = nx.hs_inner_cells(space, &ny)?;
        for c in 0..space.n_cells() {
            let cell = space.cell(c);
            let scale = space.cell_volume[c] * space.cell_weight[c];
            let gi = space.metric_inv(c);
            let tx = nx.comp(d, c);
            let ty = ny.comp(d, c);
            let xc = x.comp(d, c);
            let yc = y.comp(d, c);
            for (local, &vid) in cell.iter().enumerate() {
                // chart covector of the hat at `local`
                let mut dphi = vec![0.0; d];
                if local == 0 {
                    dphi.iter_mut().for_each(|v| *v = -1.0);
                } else {
                    dphi[local - 1] = 1.0;
                }
                // (dφ)♯ components
                let mut dphi_sharp = vec![0.0; d];
                for i in 0..d {
                    dphi_sharp[i] = (0..d).map(|j| gi[i * d + j] * dphi[j]).sum();
                }
                // ∇X : (dφ ⊗ Y♭) = (dφ♯)^i (∇X)_{ij} Y^j, plus the X↔Y term
                let mut rank1 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        rank1 += dphi_sharp[i] * (tx[i * d + j] * yc[j] + ty[i * d + j] * xc[j]);
                    }
                }
                masses[vid as usize] -=
                    scale * (0.5 * rank1 + hs[c] / (d as f64 + 1.0));
            }
        }

        let ric = MeasureField::from_vertex_masses(space, &masses);
        let mut residuals = BTreeMap::new();

        // global identity for the κ-corrected measure:
        // Ric^κ(X,Y)[M] = ∫[⟨dX♭,dY♭⟩ + δX♭ δY♭] dm - ∫ ∇X:∇Y dm - ⟨κ|⟨X,Y⟩⟩
        let contravariant_pairing = |a: &[f64], bb: &[f64]| -> f64 {
            let exterior = if space.dim == 2 {
                dec.inner_2(&dec.d1_apply(a), &dec.d1_apply(bb))
            } else {
                0.0
            };
            let da = dec.delta1_apply(a);
            let db = dec.delta1_apply(bb);
            let codiff: f64 = da
                .iter()
                .zip(&db)
                .zip(&space.interior_mass)
                .map(|((p, q), m)| p * q * m)
                .sum();
            exterior + codiff
        };
        let con_energy = contravariant_pairing(&cx, &cy);
        let cov_energy: f64 = hs
            .iter()
            .enumerate()
            .map(|(c, v)| v * space.cell_volume[c] * space.cell_weight[c])
            .sum();
        let kappa_pair = kappa.pair(space, &u)?;
        let lhs_total = ric.total(space) - kappa_pair;
        let rhs_total = con_energy - cov_energy - kappa_pair;
        let scale = con_energy.abs() + cov_energy.abs() + kappa_pair.abs() + 1e-30;
        residuals.insert("global_identity".to_string(), (lhs_total - rhs_total).abs() / scale);
        let _ = nv;

        // TV bound of Ric^κ
        let mut ric_kappa = ric.clone();
        let k_density: Vec<f64> =
            kappa.interior_density_k.iter().zip(&u.values).map(|(k, uv)| -k * uv).collect();
        ric_kappa.add_interior_field(space, &k_density, 1.0);
        let l_density: Vec<f64> = space
            .boundary_vertices
            .iter()
            .enumerate()
            .map(|(idx, &bv)| -kappa.boundary_density_l[idx] * u.values[bv as usize])
            .collect();
        ric_kappa.add_boundary_field(space, &l_density, 1.0);
        let nx2 =
            cell_to_vertex(space, &x.norm_cells(space).iter().map(|v| v * v).collect::<Vec<_>>());
        let ny2 =
            cell_to_vertex(space, &y.norm_cells(space).iter().map(|v| v * v).collect::<Vec<_>>());
        let ex = contravariant_pairing(&cx, &cx) + kappa.pair(space, &nx2)?;
        let ey = contravariant_pairing(&cy, &cy) + kappa.pair(space, &ny2)?;
        let bound = (ex.max(0.0) * ey.max(0.0)).sqrt();
        residuals.insert("tv_bound_slack".to_string(), bound - ric_kappa.tv);

        // lower bound slack for the quadratic case X = Y
        if x.components == y.components {
            let mut interior_min = f64::INFINITY;
            for v in 0..space.n_vertices() {
                if !space.is_boundary[v] {
                    interior_min = interior_min
                        .min(ric.interior[v] - kappa.interior_density_k[v] * u.values[v]);
                }
            }
            residuals.insert("lower_bound_interior".to_string(), interior_min);
            if !space.boundary_vertices.is_empty() {
                let mut boundary_min = f64::INFINITY;
                for (idx, &bv) in space.boundary_vertices.iter().enumerate() {
                    boundary_min = boundary_min.min(
                        ric.boundary[idx] - kappa.boundary_density_l[idx] * u.values[bv as usize],
                    );
                }
                residuals.insert("lower_bound_boundary".to_string(), boundary_min);
            }
        }

        Ok(RicciReport {
            ric_interior: ric.interior.clone(),
            ii_boundary: ric.boundary.clone(),
            tv_norm: ric.tv,
            residuals,
            mesh_size: space.mesh_size(),
        })
    }

    /// N-Ricci tensor Ric_N = Ric - R_N·m with
    /// R_N = (tr∇X - div X)(tr∇Y - div Y)/(N - dim_loc); dim_loc is the
    /// pointwise rank of the input-field Gram matrix.
    pub fn n_ricci(
        &self,
        x: &VectorField,
        y: &VectorField,
        kappa: &KatoMeasure,
        n_dim: f64,
    ) -> Result<RicciReport> {
        let space = self.space();
        let mut report = self.ricci_measure(x, y, kappa)?;
        if !n_dim.is_finite() {
            report.residuals.insert("r_n_l1".into(), 0.0);
            return Ok(report);
        }
        let nx = self.so.covariant_derivative(x)?;
        let ny = self.so.covariant_derivative(y)?;
        let defect = |t: &crate::fields::TensorField2, z: &VectorField| -> Vec<f64> {
            let tr = cell_to_vertex(space, &t.trace_cells(space));
            let div = l2_divergence(space, z);
            tr.values.iter().zip(&div.values).map(|(a, b)| a - b).collect()
        };
        let dx = defect(&nx, x);
        let dy = defect(&ny, y);
        // pointwise rank of the {X, Y} Gram matrix, lifted to vertices
        let flats = [x.flat(space), y.flat(space)];
        let ranks = crate::fields::hino_index(space, &flats);
        let mut vertex_rank = vec![0usize; space.n_vertices()];
        for c in 0..space.n_cells() {
            for &v in space.cell(c) {
                vertex_rank[v as usize] = vertex_rank[v as usize].max(ranks[c]);
            }
        }
        let scale_x = x.norm_cells(space).iter().fold(0.0f64, |a, v| a.max(*v));
        let mut r_n = vec![0.0; space.n_vertices()];
        for v in 0..space.n_vertices() {
            let gap = n_dim - vertex_rank[v] as f64;
            let num = dx[v] * dy[v];
            if gap.abs() < 1e-9 {
                if num.abs() > 1e-9 * scale_x.max(1.0) {
                    return Err(Error::DimensionSingular(format!(
                        "N = {n_dim} equals the pointwise dimension at vertex {v} with defect {num:.3e}"
                    )));
                }
            } else {
                r_n[v] = num / gap;
            }
        }
        let r_n_l1: f64 =
            r_n.iter().enumerate().map(|(v, r)| r.abs() * space.interior_mass[v]).sum();
        report.residuals.insert("r_n_l1".into(), r_n_l1);
        // subtract R_N·m from the measure
        let mut mf = MeasureField {
            space_tag: space.space_id,
            interior: report.ric_interior.clone(),
            boundary: report.ii_boundary.clone(),
            tv: 0.0,
        };
        let neg: Vec<f64> = r_n.iter().map(|v| -v).collect();
        mf.add_interior_field(space, &neg, 1.0);
        report.ric_interior = mf.interior;
        report.ii_boundary = mf.boundary;
        report.tv_norm = mf.tv;

        if x.components == y.components {
            let u = cell_to_vertex(space, &x.inner_cells(space, y));
            let mut interior_min = f64::INFINITY;
            for v in 0..space.n_vertices() {
                if !space.is_boundary[v] {
                    interior_min = interior_min
                        .min(report.ric_interior[v] - kappa.interior_density_k[v] * u.values[v]);
                }
            }
            report.residuals.insert("n_lower_bound_interior".into(), interior_min);
            // second bound as a pointwise slack density:
            // |∇X|² + R_N - (div X)²/N ≥ 0
            let hs = nx.hs_inner_cells(space, &nx)?;
            let hs_v = cell_to_vertex(space, &hs);
            let div = l2_divergence(space, x);
            let mut min_slack = f64::INFINITY;
            for v in 0..space.n_vertices() {
                if !space.is_boundary[v] {
                    min_slack = min_slack
                        .min(hs_v.values[v] + r_n[v] - div.values[v] * div.values[v] / n_dim);
                }
            }
            report.residuals.insert("dimensional_bochner_slack".into(), min_slack);
        }
        Ok(report)
    }

    /// Vector q-Bochner inequality: the measure
    /// Δ^{qκ}(|X|^q)/q + |X|^{q-2}⟨X,(□₁X♭)♯⟩·m must be almost nonnegative.
    /// Uses the smooth truncation (r + ε)^{q/2} - ε^{q/2} at ε = 1e-8.
    pub fn vector_q_bochner(
        &self,
        x: &VectorField,
        kappa: &KatoMeasure,
        q: f64,
    ) -> Result<SlackReport> {
        if !(1.0..=2.0).contains(&q) {
            return Err(Error::OutOfRange(format!("q = {q} outside [1, 2]")));
        }
        let eps = 1e-8;
        let space = self.space();
        let norm2_cells: Vec<f64> = x.norm_cells(space).iter().map(|v| v * v).collect();
        let norm2 = cell_to_vertex(space, &norm2_cells);
        let u = ScalarField {
            space_tag: space.space_id,
            values: norm2
                .values
                .iter()
                .map(|r| (r + eps).powf(0.5 * q) - eps.powf(0.5 * q))
                .collect(),
        };
        // (1/q)·[DIV∇u - q·u·κ]
        let mut total = measure_divergence(space, &gradient(space, &u)?);
        let inv_q = 1.0 / q;
        total.axpy(space, &total.clone(), inv_q - 1.0);
        let k_density: Vec<f64> =
            kappa.interior_density_k.iter().zip(&u.values).map(|(k, uv)| -k * uv).collect();
        total.add_interior_field(space, &k_density, 1.0);
        let l_density: Vec<f64> = space
            .boundary_vertices
            .iter()
            .enumerate()
            .map(|(idx, &bv)| -kappa.boundary_density_l[idx] * u.values[bv as usize])
            .collect();
        total.add_boundary_field(space, &l_density, 1.0);

        // |X|^{q-2} ⟨X, (□₁X♭)♯⟩ as an m-density
        let hx = self.so.hodge_of_flat(x);
        let xhx = x.inner_cells(space, &hx);
        let weighted: Vec<f64> = (0..space.n_cells())
            .map(|c| (norm2_cells[c] + eps).powf(0.5 * q - 1.0) * xhx[c])
            .collect();
        let wv = cell_to_vertex(space, &weighted);
        total.add_interior_field(space, &wv.values, 1.0);

        let mut interior_min = f64::INFINITY;
        let mut scale: f64 = 1.0;
        for v in 0..space.n_vertices() {
            if !space.is_boundary[v] {
                interior_min = interior_min.min(total.interior[v]);
                scale = scale.max(total.interior[v].abs());
            }
        }
        let boundary_min = if total.boundary.is_empty() {
            None
        } else {
            Some(total.boundary.iter().fold(f64::INFINITY, |a, &b| a.min(b)))
        };
        Ok(SlackReport { interior_min, boundary_min, scale })
    }

    /// Weitzenböck residual ‖ric(X,Y) - ⟨Y, (□₁X♭)♯ - □X⟩‖ in L¹ over
    /// interior vertices (□ is the nonnegative Bochner Laplacian here, hence
    /// the relative minus sign).
    pub fn weitzenboeck_residual(
        &self,
        x: &VectorField,
        y: &VectorField,
        kappa: &KatoMeasure,
    ) -> Result<f64> {
        let space = self.space();
        let report = self.ricci_measure(x, y, kappa)?;
        let hx = self.so.hodge_of_flat(x);
        let bx = self.so.bochner(x)?;
        let yh = y.inner_cells(space, &hx);
        let yb = y.inner_cells(space, &bx);
        let w = cell_to_vertex(
            space,
            &(0..space.n_cells()).map(|c| yh[c] - yb[c]).collect::<Vec<_>>(),
        );
        let mut l1 = 0.0;
        for v in 0..space.n_vertices() {
            if !space.is_boundary[v] {
                l1 += (report.ric_interior[v] - w.values[v]).abs() * space.interior_mass[v];
            }
        }
        Ok(l1)
    }
}
