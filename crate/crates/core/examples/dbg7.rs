use tamedcalc_core::dirichlet::DirichletForm;
use tamedcalc_core::fields::{cell_to_vertex, ScalarField};
use tamedcalc_core::first_order::{gradient, measure_divergence};
use tamedcalc_core::mesh::{ModelSpace, Shape, WeightFn};
use tamedcalc_core::second_order::SecondOrder;

fn l1(s: &ModelSpace, a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut mass = 0.0;
    for v in 0..s.n_vertices() {
        acc += (a[v] - b[v]).abs() * s.interior_mass[v];
        mass += s.interior_mass[v];
    }
    acc / mass
}

fn main() {
    println!("== sphere components, f = z ==");
    for level in 1..4 {
        let s = ModelSpace::build(Shape::Sphere, &[1.0], level, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let f = ScalarField::from_fn(&s, |p| p[2] / (p[0]*p[0]+p[1]*p[1]+p[2]*p[2]).sqrt());
        let z: Vec<f64> = (0..s.n_vertices()).map(|v| {
            let p = s.vertex(v); p[2] / (p[0]*p[0]+p[1]*p[1]+p[2]*p[2]).sqrt()
        }).collect();
        // (i) Gamma(z) vs 1 - z^2
        let gam = form.carre_du_champ(&f, &f).unwrap();
        let exact_g: Vec<f64> = z.iter().map(|z| 1.0 - z * z).collect();
        let e1 = l1(&s, &gam.values, &exact_g);
        // (ii) Δz vs -2z
        let lap = form.laplacian(&f).unwrap();
        let exact_l: Vec<f64> = z.iter().map(|z| -2.0 * z).collect();
        let e2 = l1(&s, &lap.values, &exact_l);
        // (iii) interior density of DIV∇Γ(z) vs Δ(1-z²) = 6z²-2
        let dv = measure_divergence(&s, &gradient(&s, &gam).unwrap());
        let exact_d: Vec<f64> = z.iter().map(|z| 6.0 * z * z - 2.0).collect();
        let e3 = l1(&s, &dv.interior, &exact_d);
        // (iv) |Hess z|² vs 2z⁴... Hess z = -z g ⇒ |Hess|² = 2z²
        let hess = so.hessian(&f).unwrap();
        let hs2 = cell_to_vertex(&s, &hess.hs_inner_cells(&s, &hess).unwrap());
        let exact_h: Vec<f64> = z.iter().map(|z| 2.0 * z * z).collect();
        let e4 = l1(&s, &hs2.values, &exact_h);
        // (v) Γ(z, Δz) vs -2(1-z²)
        let gzl = form.carre_du_champ(&f, &lap).unwrap();
        let exact_gl: Vec<f64> = z.iter().map(|z| -2.0 * (1.0 - z * z)).collect();
        let e5 = l1(&s, &gzl.values, &exact_gl);
        // (vi) hodge of flat: □₁ dz = d(-Δ)z = 2 dz ⇒ (□₁ z♭)♯ = 2∇z: ⟨∇z, ·⟩ = 2Γ(z)
        let x = gradient(&s, &f).unwrap();
        let hx = so.hodge_of_flat(&x);
        let xhx = cell_to_vertex(&s, &x.inner_cells(&s, &hx));
        let exact_hf: Vec<f64> = z.iter().map(|z| 2.0 * (1.0 - z * z)).collect();
        let e6 = l1(&s, &xhx.values, &exact_hf);
        // (vii) |∇∇z|²: ∇(∇z) = (Hess z)♯: |∇X|² = 2z²
        let nx = so.covariant_derivative(&x).unwrap();
        let nx2 = cell_to_vertex(&s, &nx.hs_inner_cells(&s, &nx).unwrap());
        let e7 = l1(&s, &nx2.values, &exact_h);
        println!("L{level}: Γ {e1:.4} Δ {e2:.4} DIVΓ {e3:.4}|H|² {e4:.4} Γ(f,Δf) {e5:.4} X□X {e6:.4} |∇X|² {e7:.4}");
    }
    println!("== torus components, f = sin(2πx) ==");
    for level in 0..3 {
        let s = ModelSpace::build(Shape::Torus, &[1.0], level, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let w = 2.0 * std::f64::consts::PI;
        let f = ScalarField::from_fn(&s, |p| (w * p[0]).sin());
        let x = gradient(&s, &f).unwrap();
        let hx = so.hodge_of_flat(&x);
        let xhx = cell_to_vertex(&s, &x.inner_cells(&s, &hx));
        // □₁ df = -dΔf = w² df: ⟨∇f, (□₁df)♯⟩ = w² Γ(f) = w⁴ cos²
        let exact: Vec<f64> = (0..s.n_vertices()).map(|v| {
            let p = s.vertex(v); w.powi(4) * (w * p[0]).cos().powi(2)
        }).collect();
        let e6 = l1(&s, &xhx.values, &exact);
        let bx = so.bochner(&x).unwrap();
        let xbx = cell_to_vertex(&s, &x.inner_cells(&s, &bx));
        // □X = ∇*∇∇f: flat: = -Δ∇f → ⟨∇f, □∇f⟩ = w²Γ(f)·w²... = same w⁴cos²
        let e8 = l1(&s, &xbx.values, &exact);
        println!("L{level}: X□₁X {e6:.4} X∇*∇X {e8:.4} (scale ~{:.0})", w.powi(4));
    }
}
