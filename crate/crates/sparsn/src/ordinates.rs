//! Level-symmetric S_n discrete-ordinate sets on the unit sphere.
//!
//! First-octant abscissae and weights are embedded as a static table
//! (`data/lq_octant.txt`) and expanded to the full sphere by the eight sign
//! combinations. Weights sum to 4*pi, matching the quadrature's role as an
//! approximation of the surface integral over S^2.

use crate::error::{Error, Result};

const OCTANT_TABLE: &str = include_str!("data/lq_octant.txt");

pub const SUPPORTED_ORDERS: [usize; 6] = [2, 4, 6, 8, 10, 12];

/// Discrete-ordinate set: L = n(n+2) unit directions with positive weights,
/// closed under sign flips of each coordinate.
#[derive(Debug, Clone)]
pub struct OrdinateSet {
    pub order: usize,
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl OrdinateSet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Quadrature of a function over S^2: sum of w_l F(omega^l).
    pub fn sphere_quad<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64; 3]) -> f64,
    {
        let mut acc = 0.0;
        for (dir, w) in self.directions.iter().zip(&self.weights) {
            let v = f(dir);
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite integrand value {v} at direction {dir:?}"
                )));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// Parse the first-octant rows for order `n` from the embedded table.
fn octant_rows(n: usize) -> Result<Vec<([f64; 3], f64)>> {
    let mut rows = Vec::new();
    let mut in_section = false;
    for line in OCTANT_TABLE.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n ") {
            in_section = rest.trim().parse::<usize>().map_err(|e| {
                Error::Internal(format!("bad header in ordinate table: {e}"))
            })? == n;
            continue;
        }
        if in_section {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Internal(format!("bad row in ordinate table: {e}")))?;
            if vals.len() != 4 {
                return Err(Error::Internal(format!(
                    "ordinate table row has {} fields, expected 4",
                    vals.len()
                )));
            }
            rows.push(([vals[0], vals[1], vals[2]], vals[3]));
        }
    }
    if rows.is_empty() {
        return Err(Error::Internal(format!(
            "no ordinate data found for n = {n}"
        )));
    }
    Ok(rows)
}

/// Expand first-octant rows by the eight sign combinations.
fn expand_octants(rows: &[([f64; 3], f64)]) -> (Vec<[f64; 3]>, Vec<f64>) {
    let mut directions = Vec::with_capacity(rows.len() * 8);
    let mut weights = Vec::with_capacity(rows.len() * 8);
    for sz in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sx in [1.0, -1.0] {
                for (d, w) in rows {
                    directions.push([sx * d[0], sy * d[1], sz * d[2]]);
                    weights.push(*w);
                }
            }
        }
    }
    (directions, weights)
}

/// Build the S_n set for a supported even order.
pub fn build_sn(n: usize) -> Result<OrdinateSet> {
    if !SUPPORTED_ORDERS.contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "unsupported ordinate order n = {n}; supported: {SUPPORTED_ORDERS:?}"
        )));
    }
    let rows = octant_rows(n)?;
    let (directions, weights) = expand_octants(&rows);
    let set = OrdinateSet {
        order: n,
        directions,
        weights,
    };
    debug_assert_eq!(set.len(), n * (n + 2));
    Ok(set)
}

/// Load a custom first-octant table (same format as the embedded file, no
/// `n` headers: one `s1 s2 s3 w` row per line) and expand by symmetry.
pub fn load_octant_file(path: &str) -> Result<OrdinateSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut order = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n ") {
            order = rest
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("bad order header in {path}: {e}")))?;
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Data(format!("bad ordinate row in {path}: {e}")))?;
        if vals.len() != 4 {
            return Err(Error::Data(format!(
                "ordinate row in {path} has {} fields, expected 4",
                vals.len()
            )));
        }
        rows.push(([vals[0], vals[1], vals[2]], vals[3]));
    }
    let (directions, weights) = expand_octants(&rows);
    Ok(OrdinateSet {
        order,
        directions,
        weights,
    })
}

/// Exact integral of the monomial s1^a s2^b s3^c over S^2.
pub fn exact_sphere_moment(a: u32, b: u32, c: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    fn double_factorial(mut k: i64) -> f64 {
        let mut r = 1.0;
        while k > 1 {
            r *= k as f64;
            k -= 2;
        }
        r
    }
    4.0 * std::f64::consts::PI
        * double_factorial(a as i64 - 1)
        * double_factorial(b as i64 - 1)
        * double_factorial(c as i64 - 1)
        / double_factorial((a + b + c + 1) as i64)
}

/// Moment-validation report: worst absolute quadrature error over all
/// monomials of total degree <= `degree`.
#[derive(Debug, Clone)]
pub struct PrecisionReport {
    pub degree: usize,
    pub max_error: f64,
    /// Exponents (a, b, c) where the maximum occurred.
    pub worst_monomial: (u32, u32, u32),
}

/// Compare quadrature against exact sphere integrals for all monomials of
/// total degree up to `degree` (capped at 8 by contract).
pub fn validate_precision(set: &OrdinateSet, degree: usize) -> Result<PrecisionReport> {
    if degree > 8 {
        return Err(Error::InvalidArgument(format!(
            "moment validation degree {degree} exceeds the supported cap 8"
        )));
    }
    let mut max_error = 0.0f64;
    let mut worst = (0, 0, 0);
    for a in 0..=degree as u32 {
        for b in 0..=(degree as u32 - a) {
            for c in 0..=(degree as u32 - a - b) {
                let q = set.sphere_quad(|d| {
                    d[0].powi(a as i32) * d[1].powi(b as i32) * d[2].powi(c as i32)
                })?;
                let err = (q - exact_sphere_moment(a, b, c)).abs();
                if err > max_error {
                    max_error = err;
                    worst = (a, b, c);
                }
            }
        }
    }
    Ok(PrecisionReport {
        degree,
        max_error,
        worst_monomial: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn s2_matches_published_values() {
        let set = build_sn(2).unwrap();
        assert_eq!(set.len(), 8);
        let mu = 0.5773502691896257;
        for d in &set.directions {
            for c in d {
                assert!((c.abs() - mu).abs() < 1e-15);
            }
        }
        for w in &set.weights {
            assert!((w - 1.5707963267948966).abs() < 1e-15);
        }
        let total: f64 = set.weights.iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn counts_and_weight_sums() {
        for n in SUPPORTED_ORDERS {
            let set = build_sn(n).unwrap();
            assert_eq!(set.len(), n * (n + 2), "n={n}");
            let total: f64 = set.weights.iter().sum();
            assert!((total - 4.0 * PI).abs() < 1e-10, "n={n}: {total}");
            for d in &set.directions {
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                assert!((norm - 1.0).abs() < 1e-13);
            }
            for w in &set.weights {
                assert!(*w > 0.0);
            }
        }
    }

    #[test]
    fn rejects_unsupported_order() {
        assert!(build_sn(3).is_err());
        assert!(build_sn(14).is_err());
    }

    #[test]
    fn sphere_quad_basics() {
        let set = build_sn(2).unwrap();
        assert!((set.sphere_quad(|_| 1.0).unwrap() - 4.0 * PI).abs() < 1e-10);
        for i in 0..3 {
            assert!(set.sphere_quad(|d| d[i]).unwrap().abs() < 1e-12);
            let q = set.sphere_quad(|d| d[i] * d[i]).unwrap();
            assert!((q - 4.0 * PI / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn s2_fails_at_degree_four() {
        // s1^4 moment: quadrature 4pi/9 vs exact 4pi/5
        let set = build_sn(2).unwrap();
        let q = set.sphere_quad(|d| d[0].powi(4)).unwrap();
        assert!((q - 4.0 * PI / 9.0).abs() < 1e-12);
        let report = validate_precision(&set, 4).unwrap();
        assert!(report.max_error > 1e-2);
    }

    #[test]
    fn moment_tests_pass_at_design_order() {
        for n in SUPPORTED_ORDERS {
            let set = build_sn(n).unwrap();
            let report = validate_precision(&set, n.min(8)).unwrap();
            assert!(
                report.max_error < 1e-9,
                "n={n}: max error {} at {:?}",
                report.max_error,
                report.worst_monomial
            );
        }
    }

    #[test]
    fn odd_and_cross_moments_vanish() {
        for n in SUPPORTED_ORDERS {
            let set = build_sn(n).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        let q = set.sphere_quad(|d| d[i] * d[j]).unwrap();
                        assert!(q.abs() < 1e-12);
                    }
                }
                let q3 = set.sphere_quad(|d| d[i].powi(3)).unwrap();
                assert!(q3.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sign_maps_permute_the_set() {
        for n in [2usize, 6] {
            let set = build_sn(n).unwrap();
            for flip in 1..8usize {
                let signs = [
                    if flip & 1 != 0 { -1.0 } else { 1.0 },
                    if flip & 2 != 0 { -1.0 } else { 1.0 },
                    if flip & 4 != 0 { -1.0 } else { 1.0 },
                ];
                for (d, w) in set.directions.iter().zip(&set.weights) {
                    let mapped = [signs[0] * d[0], signs[1] * d[1], signs[2] * d[2]];
                    let found = set
                        .directions
                        .iter()
                        .zip(&set.weights)
                        .any(|(e, wv)| {
                            (e[0] - mapped[0]).abs() < 1e-14
                                && (e[1] - mapped[1]).abs() < 1e-14
                                && (e[2] - mapped[2]).abs() < 1e-14
                                && (w - wv).abs() < 1e-14
                        });
                    assert!(found, "n={n}: image of {d:?} under {signs:?} missing");
                }
            }
        }
    }

    #[test]
    fn validate_precision_rejects_large_degree() {
        let set = build_sn(2).unwrap();
        assert!(validate_precision(&set, 9).is_err());
    }
}
