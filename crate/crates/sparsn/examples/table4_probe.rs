use sparsn::domains::PatchKind;
use sparsn::ordinates::build_sn;
use sparsn::postprocess::weighted_relative_error;
use sparsn::problems::example7;

fn main() {
    // Table 9: circle, N=2, k=0..3: 5.8510e-1, 6.1678e-2, 9.3273e-3, 5.5965e-4
    let paper = [5.8510e-1, 6.1678e-2, 9.3273e-3, 5.5965e-4];
    for (center, radius) in [([1.0f64, 1.0f64], 1.0f64), ([0.5, 0.5], 0.5)] {
        println!("center {center:?} radius {radius}:");
        for k in 0..=3usize {
            let p = example7(radius, center).unwrap();
            let dom = p.build_domain(k, 2).unwrap();
            let exact = p.exact.unwrap();
            // global projection: per-patch L2 projections
            let mut coeffs = vec![0.0; dom.n_dofs];
            for patch in &dom.patches {
                match &patch.kind {
                    PatchKind::Box(s) => {
                        for (i, v) in s
                            .project_l2(|x| exact.eval(x, &[0.0; 3]), k + 3)
                            .unwrap()
                            .iter()
                            .enumerate()
                        {
                            coeffs[patch.dof_offset + i] = *v;
                        }
                    }
                    PatchKind::Triangle(t) => {
                        for (i, v) in t
                            .project(|x, y| exact.eval(&[x, y, 0.0], &[0.0; 3]), k + 3)
                            .iter()
                            .enumerate()
                        {
                            coeffs[patch.dof_offset + i] = *v;
                        }
                    }
                }
            }
            let set = build_sn(2).unwrap();
            let iterates = vec![coeffs; set.len()];
            let norms = weighted_relative_error(&dom, &set, &iterates, &exact).unwrap();
            println!(
                "  k={k}: proj_rel={:.4e} paper={:.4e} ratio={:.3}",
                norms.relative,
                paper[k],
                norms.relative / paper[k]
            );
        }
    }
}
