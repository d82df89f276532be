//! Catalog of executable problem setups: coefficients, phase kernel, source,
//! inflow data and (where available) the exact solution, for the unit cube,
//! unit square, L-shape and circle geometries.
//!
//! Manufactured sources are derived from the exact solutions; a high-order
//! spherical quadrature oracle verifies the residual of the transport
//! equation at random phase-space samples.

use crate::domains::{make_circle, make_lshape, make_unit_box, Domain};
use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;
use crate::scattering::PhaseFunction;
use crate::sparse_space::MAX_DIM;

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Cube,
    Square,
    LShape,
    Circle {
        radius: f64,
        center: [f64; 2],
        inner_half_width: Option<f64>,
    },
}

impl Geometry {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Cube => 3,
            _ => 2,
        }
    }
}

/// Closed-form exact solutions used by the catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactSolution {
    /// sin(pi x1) sin(pi x2) sin(pi x3), independent of direction.
    SinProduct3,
    /// amp * s3 * sin(pi x1) sin(pi x2) sin(pi x3).
    OmegaWeightedSin3 { amp: f64 },
    /// sin(pi x1) sin(pi x2), independent of direction and of x3.
    SinProduct2,
}

impl ExactSolution {
    pub fn eval(&self, x: &[f64; MAX_DIM], omega: &[f64; 3]) -> f64 {
        match self {
            ExactSolution::SinProduct3 => {
                (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
            }
            ExactSolution::OmegaWeightedSin3 { amp } => {
                amp * omega[2] * (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
            }
            ExactSolution::SinProduct2 => (PI * x[0]).sin() * (PI * x[1]).sin(),
        }
    }

    fn gradient(&self, x: &[f64; MAX_DIM], omega: &[f64; 3]) -> [f64; 3] {
        let (s1, c1) = ((PI * x[0]).sin(), (PI * x[0]).cos());
        let (s2, c2) = ((PI * x[1]).sin(), (PI * x[1]).cos());
        let (s3, c3) = ((PI * x[2]).sin(), (PI * x[2]).cos());
        match self {
            ExactSolution::SinProduct3 => {
                [PI * c1 * s2 * s3, PI * s1 * c2 * s3, PI * s1 * s2 * c3]
            }
            ExactSolution::OmegaWeightedSin3 { amp } => [
                amp * omega[2] * PI * c1 * s2 * s3,
                amp * omega[2] * PI * s1 * c2 * s3,
                amp * omega[2] * PI * s1 * s2 * c3,
            ],
            ExactSolution::SinProduct2 => [PI * c1 * s2, PI * s1 * c2, 0.0],
        }
    }
}

/// Axis-aligned source region; the x3 extent is ignored for 2-D problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl BoxRegion {
    pub fn contains(&self, x: &[f64; MAX_DIM], d: usize) -> bool {
        (0..d).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }
}

/// Source term f(x, omega).
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    /// Manufactured for an angle-independent exact solution with isotropic
    /// scattering: f = omega . grad u + (sigma_t - sigma_s) u.
    ManufacturedIsotropic,
    /// Manufactured for u = amp * s3 * Phi(x): the scattering integral acts
    /// on s3 as multiplication by the kernel's first moment c1, giving
    /// f = omega . grad u + (sigma_t - c1 sigma_s) u.
    ManufacturedFirstMoment { moment1: f64 },
    /// Sum of unit isotropic sources over box regions; overlaps add.
    UniformBoxes(Vec<BoxRegion>),
}

/// A full problem description.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub geometry: Geometry,
    pub sigma_t: f64,
    pub sigma_s: f64,
    pub phase: PhaseFunction,
    pub source: SourceTerm,
    pub exact: Option<ExactSolution>,
    /// Inflow value used when no exact solution drives the boundary.
    pub inflow_const: f64,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn source_at(&self, x: &[f64; MAX_DIM], omega: &[f64; 3]) -> f64 {
        match &self.source {
            SourceTerm::ManufacturedIsotropic => {
                let u = self.exact.expect("manufactured source needs an exact solution");
                let g = u.gradient(x, omega);
                let adv: f64 = (0..3).map(|a| omega[a] * g[a]).sum();
                adv + (self.sigma_t - self.sigma_s) * u.eval(x, omega)
            }
            SourceTerm::ManufacturedFirstMoment { moment1 } => {
                let u = self.exact.expect("manufactured source needs an exact solution");
                let g = u.gradient(x, omega);
                let adv: f64 = (0..3).map(|a| omega[a] * g[a]).sum();
                adv + (self.sigma_t - moment1 * self.sigma_s) * u.eval(x, omega)
            }
            SourceTerm::UniformBoxes(regions) => regions
                .iter()
                .filter(|r| r.contains(x, self.dim()))
                .count() as f64,
        }
    }

    /// Inflow boundary data: sampled from the exact solution when present,
    /// vacuum otherwise.
    pub fn inflow_at(&self, x: &[f64; MAX_DIM], omega: &[f64; 3]) -> f64 {
        match self.exact {
            Some(u) => u.eval(x, omega),
            None => self.inflow_const,
        }
    }

    pub fn build_domain(&self, k: usize, n_max: usize) -> Result<Domain> {
        match &self.geometry {
            Geometry::Cube => make_unit_box(3, k, n_max),
            Geometry::Square => make_unit_box(2, k, n_max),
            Geometry::LShape => make_lshape(k, n_max),
            Geometry::Circle {
                radius,
                center,
                inner_half_width,
            } => make_circle(k, n_max, *radius, *center, *inner_half_width),
        }
    }
}

/// Unit cube, sigma_t = 2, sigma_s = 1, isotropic scattering,
/// u = sin(pi x1) sin(pi x2) sin(pi x3).
pub fn example1() -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: "example1".into(),
        geometry: Geometry::Cube,
        sigma_t: 2.0,
        sigma_s: 1.0,
        phase: PhaseFunction::isotropic()?,
        source: SourceTerm::ManufacturedIsotropic,
        exact: Some(ExactSolution::SinProduct3),
        inflow_const: 0.0,
    })
}

/// Unit cube, sigma_t = 3, sigma_s = 1, Henyey-Greenstein kernel,
/// u = 10 s3 sin(pi x1) sin(pi x2) sin(pi x3).
pub fn example2(eta: f64) -> Result<ProblemSpec> {
    let phase = PhaseFunction::henyey_greenstein(eta)?;
    let moment1 = phase.first_moment()?;
    Ok(ProblemSpec {
        name: format!("example2(eta={eta})"),
        geometry: Geometry::Cube,
        sigma_t: 3.0,
        sigma_s: 1.0,
        phase,
        source: SourceTerm::ManufacturedFirstMoment { moment1 },
        exact: Some(ExactSolution::OmegaWeightedSin3 { amp: 10.0 }),
        inflow_const: 0.0,
    })
}

/// Same as example2 with the simplified approximate Mie kernel; the source
/// coefficient is re-derived from the SAM first moment.
pub fn example3(eta: f64) -> Result<ProblemSpec> {
    let phase = PhaseFunction::sam(eta)?;
    let moment1 = phase.first_moment()?;
    Ok(ProblemSpec {
        name: format!("example3(eta={eta})"),
        geometry: Geometry::Cube,
        sigma_t: 3.0,
        sigma_s: 1.0,
        phase,
        source: SourceTerm::ManufacturedFirstMoment { moment1 },
        exact: Some(ExactSolution::OmegaWeightedSin3 { amp: 10.0 }),
        inflow_const: 0.0,
    })
}

/// Unit cube with a uniform isotropic source in [0, 0.2]^3, vacuum
/// boundaries, sigma_t = 1, sigma_s = 0.4.
pub fn example4() -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: "example4".into(),
        geometry: Geometry::Cube,
        sigma_t: 1.0,
        sigma_s: 0.4,
        phase: PhaseFunction::isotropic()?,
        source: SourceTerm::UniformBoxes(vec![BoxRegion {
            lo: [0.0; 3],
            hi: [0.2, 0.2, 0.2],
        }]),
        exact: None,
        inflow_const: 0.0,
    })
}

/// Unit square (x,y-geometry) analogue of example4; the source layout is a
/// list of rectangles so the figure variants are expressible in config.
pub fn example5(sources: Option<Vec<BoxRegion>>) -> Result<ProblemSpec> {
    let sources = sources.unwrap_or_else(|| {
        vec![BoxRegion {
            lo: [0.0; 3],
            hi: [0.2, 0.2, 0.0],
        }]
    });
    Ok(ProblemSpec {
        name: "example5".into(),
        geometry: Geometry::Square,
        sigma_t: 1.0,
        sigma_s: 0.4,
        phase: PhaseFunction::isotropic()?,
        source: SourceTerm::UniformBoxes(sources),
        exact: None,
        inflow_const: 0.0,
    })
}

/// L-shaped domain, parameters of example1, u = sin(pi x1) sin(pi x2).
pub fn example6() -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: "example6".into(),
        geometry: Geometry::LShape,
        sigma_t: 2.0,
        sigma_s: 1.0,
        phase: PhaseFunction::isotropic()?,
        source: SourceTerm::ManufacturedIsotropic,
        exact: Some(ExactSolution::SinProduct2),
        inflow_const: 0.0,
    })
}

/// Circular domain (polygon approximation), parameters and solution of
/// example6; the polygon boundary data comes from the exact solution.
pub fn example7(radius: f64, center: [f64; 2]) -> Result<ProblemSpec> {
    Ok(ProblemSpec {
        name: "example7".into(),
        geometry: Geometry::Circle {
            radius,
            center,
            inner_half_width: None,
        },
        sigma_t: 2.0,
        sigma_s: 1.0,
        phase: PhaseFunction::isotropic()?,
        source: SourceTerm::ManufacturedIsotropic,
        exact: Some(ExactSolution::SinProduct2),
        inflow_const: 0.0,
    })
}

/// High-order quadrature of the scattering integral
/// (S u)(x, omega) = int g(omega . w) u(x, w) dsigma(w),
/// rotating the pole onto `omega` and tensorizing Gauss-Legendre in the
/// cosine with a uniform rule in the azimuth.
pub fn scattering_oracle<F>(
    phase: &PhaseFunction,
    omega: &[f64; 3],
    u: F,
    n_cos: usize,
    n_azi: usize,
) -> Result<f64>
where
    F: Fn(&[f64; 3]) -> f64,
{
    // orthonormal triad (e1, e2, omega)
    let pick = if omega[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let mut e1 = [
        pick[1] * omega[2] - pick[2] * omega[1],
        pick[2] * omega[0] - pick[0] * omega[2],
        pick[0] * omega[1] - pick[1] * omega[0],
    ];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for v in e1.iter_mut() {
        *v /= n1;
    }
    let e2 = [
        omega[1] * e1[2] - omega[2] * e1[1],
        omega[2] * e1[0] - omega[0] * e1[2],
        omega[0] * e1[1] - omega[1] * e1[0],
    ];

    let (ts, ws) = gauss_legendre(n_cos);
    let dphi = 2.0 * PI / n_azi as f64;
    let mut acc = 0.0;
    for (t, wt) in ts.iter().zip(&ws) {
        let g = phase.eval(*t)?;
        let r = (1.0 - t * t).max(0.0).sqrt();
        for a in 0..n_azi {
            let phi = dphi * (a as f64 + 0.5);
            let (cp, sp) = (phi.cos(), phi.sin());
            let w = [
                r * (cp * e1[0] + sp * e2[0]) + t * omega[0],
                r * (cp * e1[1] + sp * e2[1]) + t * omega[1],
                r * (cp * e1[2] + sp * e2[2]) + t * omega[2],
            ];
            acc += wt * dphi * g * u(&w);
        }
    }
    Ok(acc)
}

/// Maximum transport-equation residual of the manufactured solution at
/// `n_samples` random phase-space points, using the scattering oracle.
pub fn manufactured_residual(problem: &ProblemSpec, n_samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let exact = problem
        .exact
        .ok_or_else(|| Error::InvalidArgument("problem has no exact solution".into()))?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let d = problem.dim();
    let mut worst = 0.0f64;
    for _ in 0..n_samples {
        // a random interior point of the bounding region of the geometry
        let x = match &problem.geometry {
            Geometry::Cube | Geometry::Square => {
                let mut x = [0.0; MAX_DIM];
                for a in 0..d {
                    x[a] = rng.gen_range(0.05..0.95);
                }
                x
            }
            Geometry::LShape => {
                // one of the three unit squares
                let corners = [[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]];
                let c = corners[rng.gen_range(0..3)];
                [
                    c[0] + rng.gen_range(0.05..0.95),
                    c[1] + rng.gen_range(0.05..0.95),
                    0.0,
                ]
            }
            Geometry::Circle { radius, center, .. } => {
                let rr = radius * rng.gen_range(0.0..0.7f64).sqrt();
                let th = rng.gen_range(0.0..2.0 * PI);
                [center[0] + rr * th.cos(), center[1] + rr * th.sin(), 0.0]
            }
        };
        // random direction
        let omega = loop {
            let v: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 0.1 && n <= 1.0 {
                break [v[0] / n, v[1] / n, v[2] / n];
            }
        };

        let g = exact.gradient(&x, &omega);
        let adv: f64 = (0..3).map(|a| omega[a] * g[a]).sum();
        let su = scattering_oracle(&problem.phase, &omega, |w| exact.eval(&x, w), 400, 32)?;
        let res = adv + problem.sigma_t * exact.eval(&x, &omega) - problem.sigma_s * su
            - problem.source_at(&x, &omega);
        worst = worst.max(res.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_basics() {
        let p = example1().unwrap();
        let u = p.exact.unwrap();
        let center = [0.5, 0.5, 0.5];
        for omega in [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0]] {
            assert!((u.eval(&center, &omega) - 1.0).abs() < 1e-15);
        }
        // alpha vanishes on the boundary
        for x in [[0.0, 0.3, 0.7], [1.0, 0.2, 0.2], [0.3, 1.0, 0.5]] {
            assert!(p.inflow_at(&x, &[1.0, 0.0, 0.0]).abs() < 1e-13);
        }
    }

    #[test]
    fn example1_residual_vanishes() {
        let p = example1().unwrap();
        let r = manufactured_residual(&p, 100, 7).unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn example2_residual_and_moment() {
        let p = example2(0.1).unwrap();
        if let SourceTerm::ManufacturedFirstMoment { moment1 } = p.source {
            assert!((moment1 - 0.1).abs() < 1e-10);
        } else {
            panic!("wrong source kind");
        }
        let r = manufactured_residual(&p, 60, 11).unwrap();
        assert!(r < 1e-8, "residual {r}");
        // u at omega = (0,0,1), center = 10
        let u = p.exact.unwrap();
        assert!((u.eval(&[0.5, 0.5, 0.5], &[0.0, 0.0, 1.0]) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn example2_strong_anisotropy_residual() {
        let p = example2(0.9).unwrap();
        let r = manufactured_residual(&p, 40, 3).unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn example3_sam_moment_closed_form() {
        let p = example3(0.5).unwrap();
        if let SourceTerm::ManufacturedFirstMoment { moment1 } = p.source {
            // n_p = 2 -> c1 = n_p / (n_p + 2) = 0.5
            assert!((moment1 - 0.5).abs() < 1e-10);
        } else {
            panic!("wrong source kind");
        }
        let r = manufactured_residual(&p, 60, 5).unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn example3_eta09_normalization() {
        let p = example3(0.9).unwrap();
        assert!((p.phase.normalization().unwrap() - 1.0).abs() < 1e-10);
        let r = manufactured_residual(&p, 40, 9).unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn example4_source_volume() {
        let p = example4().unwrap();
        // integral of f over the cube = 0.2^3
        let q = 40;
        let mut acc = 0.0;
        for i in 0..q {
            for j in 0..q {
                for l in 0..q {
                    let x = [
                        (i as f64 + 0.5) / q as f64,
                        (j as f64 + 0.5) / q as f64,
                        (l as f64 + 0.5) / q as f64,
                    ];
                    acc += p.source_at(&x, &[1.0, 0.0, 0.0]) / (q * q * q) as f64;
                }
            }
        }
        assert!((acc - 0.008).abs() < 1e-12);
        assert!(p.exact.is_none());
        assert_eq!(p.inflow_at(&[0.0, 0.5, 0.5], &[1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn example5_overlapping_sources_add() {
        let r1 = BoxRegion { lo: [0.0; 3], hi: [0.5, 0.5, 0.0] };
        let r2 = BoxRegion { lo: [0.25, 0.25, 0.0], hi: [0.75, 0.75, 0.0] };
        let p = example5(Some(vec![r1, r2])).unwrap();
        assert_eq!(p.source_at(&[0.3, 0.3, 0.0], &[1.0, 0.0, 0.0]), 2.0);
        assert_eq!(p.source_at(&[0.1, 0.1, 0.0], &[1.0, 0.0, 0.0]), 1.0);
        assert_eq!(p.source_at(&[0.9, 0.9, 0.0], &[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(p.dim(), 2);
    }

    #[test]
    fn example6_vanishing_on_lattice_lines() {
        let p = example6().unwrap();
        let u = p.exact.unwrap();
        for t in [0.0f64, 1.0, 2.0] {
            for s in [0.3f64, 0.7, 1.9] {
                assert!(u.eval(&[t, s, 0.0], &[1.0, 0.0, 0.0]).abs() < 1e-12);
                assert!(u.eval(&[s, t, 0.0], &[1.0, 0.0, 0.0]).abs() < 1e-12);
            }
        }
        let r = manufactured_residual(&p, 60, 17).unwrap();
        assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn example7_polygon_inflow_from_exact() {
        let p = example7(1.0, [1.0, 1.0]).unwrap();
        let u = p.exact.unwrap();
        // boundary data equals the exact solution wherever sampled
        let x = [1.0 + 0.7, 1.0 + 0.1, 0.0];
        assert_eq!(p.inflow_at(&x, &[0.5, 0.5, 0.0]), u.eval(&x, &[0.5, 0.5, 0.0]));
        let r = manufactured_residual(&p, 60, 23).unwrap();
        assert!(r < 1e-8, "residual {r}");
        let dom = p.build_domain(1, 2).unwrap();
        assert_eq!(dom.patches.len(), 9);
    }

    #[test]
    fn oracle_reproduces_hg_first_moment() {
        // S applied to w -> w3 must return eta * omega3
        let pf = PhaseFunction::henyey_greenstein(0.9).unwrap();
        for omega in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [-0.3, 0.4, 0.866025403784439]] {
            let su = scattering_oracle(&pf, &omega, |w| w[2], 400, 32).unwrap();
            assert!(
                (su - 0.9 * omega[2]).abs() < 1e-9,
                "omega {omega:?}: {su} vs {}",
                0.9 * omega[2]
            );
        }
    }
}
