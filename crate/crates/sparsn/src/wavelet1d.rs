//! Orthonormal piecewise-polynomial bases on [0, 1]: scaled Legendre scaling
//! functions per dyadic cell, Alpert-style multiwavelets spanning the detail
//! spaces, and the orthogonal transfer between the hierarchical basis and the
//! elementwise Legendre basis of the finest level.
//!
//! Conventions fixed here and relied on everywhere else:
//! - cells are half-open, `I_n^j = (j 2^-n, (j+1) 2^-n]`, with `x = 0`
//!   attached to the first cell so evaluation is total on [0, 1];
//! - level 0 holds the k+1 scaling functions, level n >= 1 holds the
//!   wavelets on the 2^(n-1) cells of level n-1;
//! - the local basis on any interval is the L^2-orthonormalized shifted
//!   Legendre family, so all transfers are orthogonal maps.

use crate::error::{Error, Result};
use crate::gauss::{gauss_on, ortho_legendre01, ortho_legendre01_deriv};

/// Rank guard for the Gram-Schmidt pivots in the wavelet construction.
const GS_PIVOT_TOL: f64 = 1e-10;

/// A piecewise polynomial on [0, 1] stored as local orthonormal Legendre
/// coefficients per interval.
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    /// Strictly increasing, first = 0, last = 1.
    pub breakpoints: Vec<f64>,
    /// One coefficient vector of length k+1 per interval.
    pub coeffs: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn degree(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    fn interval_of(&self, x: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        if x <= self.breakpoints[1] {
            return Some(0);
        }
        // breakpoint lists are tiny (2-3 intervals); linear scan
        for i in 1..self.coeffs.len() {
            if x > self.breakpoints[i] && x <= self.breakpoints[i + 1] {
                return Some(i);
            }
        }
        None
    }

    /// Evaluate at `x` in [0, 1] with the half-open cell convention.
    pub fn eval(&self, x: f64) -> f64 {
        let Some(i) = self.interval_of(x) else {
            return 0.0;
        };
        let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let t = (x - a) / (b - a);
        let scale = 1.0 / (b - a).sqrt();
        self.coeffs[i]
            .iter()
            .enumerate()
            .map(|(p, c)| c * scale * ortho_legendre01(p, t))
            .sum()
    }

    /// One-sided derivative at `x` (from within the owning interval).
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let Some(i) = self.interval_of(x) else {
            return 0.0;
        };
        let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let t = (x - a) / (b - a);
        let scale = 1.0 / (b - a).sqrt() / (b - a);
        self.coeffs[i]
            .iter()
            .enumerate()
            .map(|(p, c)| c * scale * ortho_legendre01_deriv(p, t))
            .sum()
    }
}

/// The k+1 mother wavelets on breakpoints {0, 1/2, 1}: an orthonormal basis
/// of the complement of P_k[0,1] inside the two-cell piecewise space, with
/// k+1 vanishing moments each.
#[derive(Debug, Clone)]
pub struct MotherWaveletSet {
    pub degree: usize,
    pub wavelets: Vec<PiecewisePoly>,
}

impl MotherWaveletSet {
    /// Value of wavelet (level n >= 1, cell j, index i) at `x`, i.e. the
    /// dyadic dilate `2^((n-1)/2) psi_i(2^(n-1) x - j)`, zero outside its
    /// support cell.
    pub fn dilated(&self, n: usize, j: usize, i: usize, x: f64) -> f64 {
        debug_assert!(n >= 1);
        if cell_of(x, n - 1) != j {
            return 0.0;
        }
        let scale = (2.0f64).powi(n as i32 - 1);
        let y = scale * x - j as f64;
        scale.sqrt() * self.wavelets[i].eval(y.clamp(0.0, 1.0))
    }

    /// One-sided derivative of the dilate.
    pub fn dilated_deriv(&self, n: usize, j: usize, i: usize, x: f64) -> f64 {
        debug_assert!(n >= 1);
        if cell_of(x, n - 1) != j {
            return 0.0;
        }
        let scale = (2.0f64).powi(n as i32 - 1);
        let y = scale * x - j as f64;
        scale * scale.sqrt() * self.wavelets[i].eval_deriv(y.clamp(0.0, 1.0))
    }
}

/// Cell index of `x` on the uniform level-`m` grid (2^m cells), half-open
/// cells with x = 0 attached to cell 0.
pub fn cell_of(x: f64, m: usize) -> usize {
    let n_cells = 1usize << m;
    let scaled = x * n_cells as f64;
    let c = scaled.ceil() as isize - 1;
    c.clamp(0, n_cells as isize - 1) as usize
}

/// Number of wavelet cells on level n: 1 for n = 0, else 2^(n-1).
pub fn wavelet_cells(n: usize) -> usize {
    if n == 0 {
        1
    } else {
        1 << (n - 1)
    }
}

/// Dimension of the 1-D hierarchical space up to level `n_max`.
pub fn hier_dim(k: usize, n_max: usize) -> usize {
    (k + 1) << n_max
}

/// Offset of level `n` inside the flat hierarchical index range.
pub fn level_offset(k: usize, n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (k + 1) << (n - 1)
    }
}

/// Decompose a flat hierarchical index into (level, cell, poly).
pub fn split_index(k: usize, h: usize) -> (usize, usize, usize) {
    let kp = k + 1;
    if h < kp {
        return (0, 0, h);
    }
    let mut n = 1;
    while level_offset(k, n + 1) <= h {
        n += 1;
    }
    let rel = h - level_offset(k, n);
    (n, rel / kp, rel % kp)
}

/// The level of a flat hierarchical index.
pub fn level_of(k: usize, h: usize) -> usize {
    split_index(k, h).0
}

/// L^2-orthonormal polynomial basis (degree <= k) on cell `I_n^j`: shifted,
/// scaled Legendre polynomials supported on that cell.
pub fn scaling_basis(k: usize, n: usize, j: usize) -> Result<Vec<PiecewisePoly>> {
    let n_cells = 1usize << n;
    if j >= n_cells {
        return Err(Error::InvalidArgument(format!(
            "cell index {j} out of range for level {n} (must be < {n_cells})"
        )));
    }
    let a = j as f64 / n_cells as f64;
    let b = (j + 1) as f64 / n_cells as f64;
    let mut breakpoints = vec![0.0];
    if a > 0.0 {
        breakpoints.push(a);
    }
    breakpoints.push(b);
    if b < 1.0 {
        breakpoints.push(1.0);
    }
    let cell_idx = usize::from(a > 0.0);
    let n_intervals = breakpoints.len() - 1;
    Ok((0..=k)
        .map(|p| {
            let mut coeffs = vec![vec![0.0; k + 1]; n_intervals];
            coeffs[cell_idx][p] = 1.0;
            PiecewisePoly {
                breakpoints: breakpoints.clone(),
                coeffs,
            }
        })
        .collect())
}

/// Build the mother wavelets for degree `k`.
///
/// Seeds are `x^(k+1+i)` flipped in sign on the right half cell, projected
/// into the two-cell space, orthogonalized against P_k[0,1] and then among
/// themselves (modified Gram-Schmidt, run twice). Signs are normalized so
/// each wavelet is positive at x -> 0+, falling back to a positive one-sided
/// slope when the value vanishes there.
pub fn build_mother_wavelets(k: usize) -> Result<MotherWaveletSet> {
    let kp = k + 1;
    let dim = 2 * kp; // two-cell space coordinates, index (c, p) -> c*kp + p
    let quad = gauss_on(2 * k + 2, 0.0, 1.0);

    // local orthonormal basis on half cell c: sqrt(2) L~_p(2x - c)
    let basis = |c: usize, p: usize, x: f64| -> f64 {
        (2.0f64).sqrt() * ortho_legendre01(p, 2.0 * x - c as f64)
    };

    // coordinates of the P_k[0,1] basis inside the two-cell space
    let mut coarse = vec![vec![0.0; dim]; kp];
    for (q, col) in coarse.iter_mut().enumerate() {
        for c in 0..2 {
            let (xs, ws) = gauss_on(k + 1, 0.5 * c as f64, 0.5 * (c + 1) as f64);
            for p in 0..kp {
                col[c * kp + p] = xs
                    .iter()
                    .zip(&ws)
                    .map(|(x, w)| w * basis(c, p, *x) * ortho_legendre01(q, *x))
                    .sum();
            }
        }
    }

    // seed coordinates
    let mut seeds = vec![vec![0.0; dim]; kp];
    for (i, col) in seeds.iter_mut().enumerate() {
        let deg = (k + 1 + i) as i32;
        for c in 0..2 {
            let sign = if c == 0 { 1.0 } else { -1.0 };
            let (lo, hi) = (0.5 * c as f64, 0.5 * (c + 1) as f64);
            // sub-rule exact for degree k + (2k+1)
            let _ = &quad;
            let (xs, ws) = gauss_on(2 * k + 2, lo, hi);
            for p in 0..kp {
                col[c * kp + p] = xs
                    .iter()
                    .zip(&ws)
                    .map(|(x, w)| w * basis(c, p, *x) * sign * x.powi(deg))
                    .sum();
            }
        }
    }

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    let mut wavelets_coords: Vec<Vec<f64>> = Vec::with_capacity(kp);
    for (i, seed) in seeds.iter().enumerate() {
        let seed_norm = dot(seed, seed).sqrt();
        let mut w = seed.clone();
        for _pass in 0..2 {
            for col in &coarse {
                let proj = dot(&w, col);
                for (wv, cv) in w.iter_mut().zip(col) {
                    *wv -= proj * cv;
                }
            }
            for prev in &wavelets_coords {
                let proj = dot(&w, prev);
                for (wv, pv) in w.iter_mut().zip(prev) {
                    *wv -= proj * pv;
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm < GS_PIVOT_TOL * seed_norm.max(1e-300) {
            return Err(Error::Internal(format!(
                "Gram-Schmidt breakdown while building mother wavelets: \
                 pivot {norm:.3e} for seed {i} at degree {k}"
            )));
        }
        for wv in w.iter_mut() {
            *wv /= norm;
        }
        wavelets_coords.push(w);
    }

    // sign normalization: positive value (else positive slope) at x -> 0+
    let wavelets = wavelets_coords
        .into_iter()
        .map(|coords| {
            let mut pp = PiecewisePoly {
                breakpoints: vec![0.0, 0.5, 1.0],
                coeffs: vec![coords[0..kp].to_vec(), coords[kp..].to_vec()],
            };
            let v0 = pp.eval(0.0);
            let flip = if v0.abs() > 1e-8 {
                v0 < 0.0
            } else {
                pp.eval_deriv(0.0) < 0.0
            };
            if flip {
                for cell in pp.coeffs.iter_mut() {
                    for c in cell.iter_mut() {
                        *c = -*c;
                    }
                }
            }
            pp
        })
        .collect();

    Ok(MotherWaveletSet {
        degree: k,
        wavelets,
    })
}

/// Value of wavelet (k, level n >= 1, cell j, index i) at x.
///
/// Convenience wrapper that builds the mother set; hot paths hold a
/// [`MotherWaveletSet`] and call [`MotherWaveletSet::dilated`] directly.
pub fn wavelet_at(k: usize, n: usize, j: usize, i: usize, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "evaluation point {x} outside [0, 1]"
        )));
    }
    if n < 1 || j >= wavelet_cells(n) || i > k {
        return Err(Error::InvalidArgument(format!(
            "invalid wavelet index (n={n}, j={j}, i={i}) for degree {k}"
        )));
    }
    Ok(build_mother_wavelets(k)?.dilated(n, j, i, x))
}

/// Sparse orthogonal map from hierarchical coefficients (levels 0..N) to
/// elementwise Legendre coefficients on the 2^N cells of the finest level.
///
/// Stored by columns: column h lists the fine coefficients of hierarchical
/// function h; each wavelet overlaps exactly its one dyadic support block.
#[derive(Debug, Clone)]
pub struct Transfer1D {
    pub n_level: usize,
    pub degree: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Transfer1D {
    pub fn dim(&self) -> usize {
        hier_dim(self.degree, self.n_level)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Rows and values of column `h`.
    pub fn column(&self, h: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.col_ptr[h], self.col_ptr[h + 1]);
        (&self.row_idx[lo..hi], &self.values[lo..hi])
    }

    /// Hierarchical -> elementwise: y = T c.
    pub fn apply(&self, hier: &[f64]) -> Vec<f64> {
        let mut fine = vec![0.0; self.dim()];
        for (h, c) in hier.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let (rows, vals) = self.column(h);
            for (r, v) in rows.iter().zip(vals) {
                fine[*r] += c * v;
            }
        }
        fine
    }

    /// Elementwise -> hierarchical: c = T^t y (inverse, by orthogonality).
    pub fn apply_transpose(&self, fine: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|h| {
                let (rows, vals) = self.column(h);
                rows.iter().zip(vals).map(|(r, v)| fine[*r] * v).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for h in 0..d {
            let (rows, vals) = self.column(h);
            for (r, v) in rows.iter().zip(vals) {
                m[*r][h] = *v;
            }
        }
        m
    }
}

/// Build the hierarchical-to-elementwise transfer for `N` levels, degree `k`.
pub fn build_transfer(n_level: usize, k: usize) -> Result<Transfer1D> {
    let kp = k + 1;
    let n_cells = 1usize << n_level;
    let mothers = build_mother_wavelets(k)?;
    let mut col_ptr = vec![0usize];
    let mut row_idx = Vec::new();
    let mut values = Vec::new();

    fn push_entries(
        f: &dyn Fn(f64) -> f64,
        cells: std::ops::Range<usize>,
        n_cells: usize,
        kp: usize,
        row_idx: &mut Vec<usize>,
        values: &mut Vec<f64>,
    ) {
        for c in cells {
            let (lo, hi) = (c as f64 / n_cells as f64, (c + 1) as f64 / n_cells as f64);
            let (xs, ws) = gauss_on(kp, lo, hi);
            let scale = (n_cells as f64).sqrt();
            for p in 0..kp {
                let coeff: f64 = xs
                    .iter()
                    .zip(&ws)
                    .map(|(x, w)| {
                        let t = (x - lo) / (hi - lo);
                        w * scale * ortho_legendre01(p, t) * f(*x)
                    })
                    .sum();
                row_idx.push(c * kp + p);
                values.push(coeff);
            }
        }
    }

    // level 0: global Legendre polynomials cover every fine cell
    for q in 0..kp {
        let f = move |x: f64| ortho_legendre01(q, x);
        push_entries(&f, 0..n_cells, n_cells, kp, &mut row_idx, &mut values);
        col_ptr.push(row_idx.len());
    }
    // levels 1..N: each wavelet covers its dyadic support block
    for n in 1..=n_level {
        let span = n_cells >> (n - 1);
        for j in 0..wavelet_cells(n) {
            for i in 0..kp {
                let m = &mothers;
                let f = move |x: f64| m.dilated(n, j, i, x);
                push_entries(&f, j * span..(j + 1) * span, n_cells, kp, &mut row_idx, &mut values);
                col_ptr.push(row_idx.len());
            }
        }
    }

    Ok(Transfer1D {
        n_level,
        degree: k,
        col_ptr,
        row_idx,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::gauss_on;

    fn l2_dot(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, pts_per_cell: usize, cells: usize) -> f64 {
        let mut acc = 0.0;
        for c in 0..cells {
            let (xs, ws) = gauss_on(pts_per_cell, c as f64 / cells as f64, (c + 1) as f64 / cells as f64);
            for (x, w) in xs.iter().zip(&ws) {
                acc += w * f(*x) * g(*x);
            }
        }
        acc
    }

    #[test]
    fn scaling_basis_constant() {
        let b = scaling_basis(0, 0, 0).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].eval(0.3) - 1.0).abs() < 1e-14);
        assert!((b[0].eval(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scaling_basis_linear_pair() {
        let b = scaling_basis(1, 0, 0).unwrap();
        for &x in &[0.1, 0.5, 0.93] {
            assert!((b[0].eval(x) - 1.0).abs() < 1e-13);
            assert!((b[1].eval(x) - 3.0f64.sqrt() * (2.0 * x - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn scaling_basis_half_cell() {
        let b = scaling_basis(0, 1, 1).unwrap();
        assert!((b[0].eval(0.75) - 2.0f64.sqrt()).abs() < 1e-14);
        assert_eq!(b[0].eval(0.25), 0.0);
        // norm check: integral of 2 over (1/2, 1] is 1
        let n2 = l2_dot(&|x| b[0].eval(x), &|x| b[0].eval(x), 2, 2);
        assert!((n2 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scaling_basis_rejects_bad_cell() {
        assert!(scaling_basis(1, 1, 2).is_err());
    }

    #[test]
    fn haar_mother_wavelet() {
        let m = build_mother_wavelets(0).unwrap();
        assert_eq!(m.wavelets.len(), 1);
        assert!((m.wavelets[0].eval(0.25) - 1.0).abs() < 1e-13);
        assert!((m.wavelets[0].eval(0.75) + 1.0).abs() < 1e-13);
        let mean = l2_dot(&|x| m.wavelets[0].eval(x), &|_| 1.0, 2, 2);
        assert!(mean.abs() < 1e-13);
    }

    #[test]
    fn mother_wavelets_orthonormal_with_vanishing_moments() {
        for k in 0..=4 {
            let m = build_mother_wavelets(k).unwrap();
            for i in 0..=k {
                for j in 0..=k {
                    let d = l2_dot(
                        &|x| m.wavelets[i].eval(x),
                        &|x| m.wavelets[j].eval(x),
                        k + 2,
                        2,
                    );
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-12, "k={k} i={i} j={j}: {d}");
                }
                // vanishing moments against 1, x, ..., x^k
                for q in 0..=k {
                    let mom = l2_dot(&|x| m.wavelets[i].eval(x), &|x| x.powi(q as i32), k + 2, 2);
                    assert!(mom.abs() < 1e-12, "k={k} i={i} moment {q}: {mom}");
                }
            }
        }
    }

    #[test]
    fn wavelet_at_matches_spec_examples() {
        assert!((wavelet_at(0, 1, 0, 0, 0.25).unwrap() - 1.0).abs() < 1e-13);
        assert!((wavelet_at(0, 2, 1, 0, 0.6).unwrap() - 2.0f64.sqrt()).abs() < 1e-13);
        // outside the support cell
        assert_eq!(wavelet_at(0, 2, 1, 0, 0.3).unwrap(), 0.0);
        assert_eq!(wavelet_at(0, 2, 1, 0, 0.5).unwrap(), 0.0); // left endpoint belongs to cell 0
        assert!(wavelet_at(0, 1, 0, 0, 1.5).is_err());
    }

    #[test]
    fn transfer_identity_at_level_zero() {
        for k in 0..=3 {
            let t = build_transfer(0, k).unwrap();
            let dense = t.to_dense();
            for r in 0..=k {
                for c in 0..=k {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((dense[r][c] - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn transfer_level_one_haar() {
        let t = build_transfer(1, 0).unwrap();
        let d = t.to_dense();
        let s = 0.5f64.sqrt();
        assert!((d[0][0] - s).abs() < 1e-13);
        assert!((d[1][0] - s).abs() < 1e-13);
        assert!((d[0][1] - s).abs() < 1e-13);
        assert!((d[1][1] + s).abs() < 1e-13);
    }

    #[test]
    fn transfer_is_orthogonal() {
        for (k, n) in [(0usize, 5usize), (2, 4), (4, 3)] {
            let t = build_transfer(n, k).unwrap();
            let dense = t.to_dense();
            let dim = t.dim();
            for a in 0..dim {
                for b in 0..dim {
                    let dot: f64 = (0..dim).map(|r| dense[r][a] * dense[r][b]).sum();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-12, "k={k} N={n} ({a},{b}): {dot}");
                }
            }
        }
    }

    #[test]
    fn hierarchical_basis_orthonormal_by_quadrature() {
        // Gram matrix of all 1-D hierarchical functions up to level N via
        // Gauss rules exact for degree 2k, for k <= 4, N <= 5 (spot pairs to
        // keep runtime sane; full Gram for small cases).
        for (k, n_max) in [(0usize, 5usize), (1, 4), (2, 3), (3, 3), (4, 5)] {
            let mothers = build_mother_wavelets(k).unwrap();
            let eval = |h: usize, x: f64| -> f64 {
                let (n, j, p) = split_index(k, h);
                if n == 0 {
                    ortho_legendre01(p, x)
                } else {
                    mothers.dilated(n, j, p, x)
                }
            };
            let dim = hier_dim(k, n_max);
            let cells = 1usize << n_max;
            for a in 0..dim {
                for b in a..dim {
                    let d = l2_dot(&|x| eval(a, x), &|x| eval(b, x), k + 1, cells);
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-12, "k={k} N={n_max} ({a},{b}): {d}");
                }
            }
        }
    }

    #[test]
    fn nestedness_round_trip() {
        // every level-(n-1) scaling function is exactly representable on the
        // level-n elementwise basis
        let k = 2;
        for n in 1..=3usize {
            let coarse = scaling_basis(k, n - 1, 0).unwrap();
            for f in &coarse {
                let cells = 1usize << n;
                // project onto level-n elementwise basis, then compare pointwise
                let mut coeffs = vec![vec![0.0; k + 1]; cells];
                for (c, block) in coeffs.iter_mut().enumerate() {
                    let (lo, hi) = (c as f64 / cells as f64, (c + 1) as f64 / cells as f64);
                    let (xs, ws) = gauss_on(k + 1, lo, hi);
                    for (p, cf) in block.iter_mut().enumerate() {
                        *cf = xs
                            .iter()
                            .zip(&ws)
                            .map(|(x, w)| {
                                let t = (x - lo) / (hi - lo);
                                w * (cells as f64).sqrt() * ortho_legendre01(p, t) * f.eval(*x)
                            })
                            .sum();
                    }
                }
                for s in 1..40 {
                    let x = s as f64 / 40.0;
                    let c = cell_of(x, n);
                    let (lo, hi) = (c as f64 / cells as f64, (c + 1) as f64 / cells as f64);
                    let t = (x - lo) / (hi - lo);
                    let v: f64 = coeffs[c]
                        .iter()
                        .enumerate()
                        .map(|(p, cf)| cf * (cells as f64).sqrt() * ortho_legendre01(p, t))
                        .sum();
                    assert!((v - f.eval(x)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transfer_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for (k, n) in [(1usize, 4usize), (3, 3)] {
            let t = build_transfer(n, k).unwrap();
            let c: Vec<f64> = (0..t.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = t.apply_transpose(&t.apply(&c));
            for (a, b) in c.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transfer_nnz_is_linear_per_level() {
        let (k, n) = (2usize, 6usize);
        let t = build_transfer(n, k).unwrap();
        // (k+1) values per covered cell, one dyadic block per wavelet
        let kp = k + 1;
        let cells = 1usize << n;
        let mut expect = kp * cells * kp; // level 0
        for lev in 1..=n {
            expect += wavelet_cells(lev) * kp * (cells >> (lev - 1)) * kp;
        }
        assert_eq!(t.nnz(), expect);
    }
}
