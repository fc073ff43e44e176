use tamedcalc_core::curvature::Curvature;
use tamedcalc_core::dirichlet::DirichletForm;
use tamedcalc_core::fields::{cell_to_vertex, ScalarField, VectorField};
use tamedcalc_core::first_order::{gradient, normal_component};
use tamedcalc_core::kato::KatoMeasure;
use tamedcalc_core::mesh::{ModelSpace, Shape, WeightFn};
use tamedcalc_core::randfield::SmoothFieldGen;
use tamedcalc_core::second_order::SecondOrder;

fn tangential_disk_field(s: &ModelSpace) -> VectorField {
    let d = s.dim;
    let mut x = VectorField::zero(s);
    for c in 0..s.n_cells() {
        let cell = s.cell(c);
        let (mut bx, mut by) = (0.0, 0.0);
        for &v in cell {
            bx += s.vertex(v as usize)[0] / 3.0;
            by += s.vertex(v as usize)[1] / 3.0;
        }
        let r = (bx * bx + by * by).sqrt();
        let cart = [-(3.0 - 2.0 * r) * by, (3.0 - 2.0 * r) * bx];
        let fr = s.frame(c);
        let det = fr[0] * fr[3] - fr[1] * fr[2];
        x.components[c * d] = (cart[0] * fr[3] - cart[1] * fr[1]) / det;
        x.components[c * d + 1] = (-cart[0] * fr[2] + cart[1] * fr[0]) / det;
    }
    x
}

fn main() {
    println!("== disk II ==");
    for level in 2..5 {
        let s = ModelSpace::build(Shape::Disk, &[1.0], level, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let curv = Curvature::new(&so);
        let x = tangential_disk_field(&s);
        let report = curv.ricci_measure(&x, &x, &KatoMeasure::zero(&s)).unwrap();
        let mut worst: f64 = 0.0; let mut mean = 0.0;
        for b in &report.ii_boundary { worst = worst.max((b - 1.0).abs()); mean += b / report.ii_boundary.len() as f64; }
        let norm2 = cell_to_vertex(&s, &x.norm_cells(&s).iter().map(|v| 0.5 * v * v).collect::<Vec<_>>());
        let n = normal_component(&s, &gradient(&s, &norm2).unwrap());
        let mut cross_sample = vec![];
        for b in n.boundary.iter().take(4) { cross_sample.push(-b); }
        println!("L{level}: II worst {worst:.4} mean {mean:.4}; -nX samples {cross_sample:?}");
    }
    println!("== sphere bochner gap / ric ==");
    for level in 1..4 {
        let s = ModelSpace::build(Shape::Sphere, &[1.0], level, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let curv = Curvature::new(&so);
        let f = ScalarField::from_fn(&s, |p| p[2]);
        let g2 = curv.gamma2(&f, &KatoMeasure::zero(&s)).unwrap();
        let hess = so.hessian(&f).unwrap();
        let hs2 = cell_to_vertex(&s, &hess.hs_inner_cells(&s, &hess).unwrap());
        let gamma = form.carre_du_champ(&f, &f).unwrap();
        let mut l1 = 0.0; let mut mass = 0.0;
        for v in 0..s.n_vertices() {
            l1 += (g2.interior[v] - hs2.values[v] - gamma.values[v]).abs() * s.interior_mass[v];
            mass += s.interior_mass[v];
        }
        let fq = ScalarField::from_fn(&s, |p| p[0] + 0.5 * p[2]);
        let xq = gradient(&s, &fq).unwrap();
        let rep = curv.ricci_measure(&xq, &xq, &KatoMeasure::zero(&s)).unwrap();
        let norm2 = cell_to_vertex(&s, &xq.norm_cells(&s).iter().map(|v| v * v).collect::<Vec<_>>());
        let mut rl1 = 0.0;
        for v in 0..s.n_vertices() {
            rl1 += (rep.ric_interior[v] - norm2.values[v]).abs() * s.interior_mass[v];
        }
        println!("L{level}: bochner-gap l1/mass {:.4}  ric l1/mass {:.4}", l1 / mass, rl1 / mass);
    }
    println!("== torus weitzenboeck ==");
    for level in 0..3 {
        let s = ModelSpace::build(Shape::Torus, &[1.0], level, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let curv = Curvature::new(&so);
        let mut gen = SmoothFieldGen::new(6);
        let x = gen.vector(&s);
        let y = gen.vector(&s);
        let r = curv.weitzenboeck_residual(&x, &y, &KatoMeasure::zero(&s)).unwrap();
        println!("L{level}: weitz {r:.5}");
    }
    println!("== flat rect ric with rough bump ==");
    for level in 2..5 {
        let s = ModelSpace::build(Shape::Rectangle, &[1.0, 1.0], level, &WeightFn::Zero).unwrap();
        let form = DirichletForm::assemble(&s).unwrap();
        let so = SecondOrder::new(&form).unwrap();
        let curv = Curvature::new(&so);
        let g = ScalarField::from_fn(&s, |p| {
            let dx = (p[0] - 0.5).abs() / 0.35;
            let dy = (p[1] - 0.5).abs() / 0.35;
            if dx < 1.0 && dy < 1.0 {
                ((std::f64::consts::PI * dx / 2.0).cos() * (std::f64::consts::PI * dy / 2.0).cos()).powi(2)
            } else { 0.0 }
        });
        let f = ScalarField::from_fn(&s, |p| p[0] + 0.5 * p[1]);
        let x = tamedcalc_core::second_order::scale_by_function(&s, &g, &gradient(&s, &f).unwrap());
        let report = curv.ricci_measure(&x, &x, &KatoMeasure::zero(&s)).unwrap();
        let mut l1 = 0.0;
        for v in 0..s.n_vertices() { l1 += report.ric_interior[v].abs() * s.interior_mass[v]; }
        let ii_max = report.ii_boundary.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        println!("L{level}: ric l1 {l1:.4} ii_max {ii_max:.2e} glob {:.2e}", report.residuals["global_identity"]);
    }
}
