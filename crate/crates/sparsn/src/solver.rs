//! Block Gauss-Seidel (source iteration) and Jacobi solvers for the coupled
//! direction system, with one cached sparse LU factorization per direction
//! block. The blocks are sweep-invariant, so factorizations are reused
//! across all sweeps.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;

use crate::assembly::BlockSystem;
use crate::error::{Error, Result};

/// Iteration variant for the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariant {
    GaussSeidel,
    Jacobi,
}

/// Reusable per-direction solve handles.
pub struct BlockFactors {
    lus: Vec<faer::sparse::linalg::solvers::Lu<usize, f64>>,
    dim: usize,
}

impl BlockFactors {
    pub fn solve_block(&self, l: usize, rhs: &[f64]) -> Vec<f64> {
        let mut mat = Mat::<f64>::zeros(self.dim, 1);
        for (i, v) in rhs.iter().enumerate() {
            mat[(i, 0)] = *v;
        }
        let x = self.lus[l].solve(&mat);
        (0..self.dim).map(|i| x[(i, 0)]).collect()
    }
}

/// Factor every direction block; fails on singular or near-singular blocks,
/// which signals a stabilization/assumption misconfiguration.
pub fn factor_blocks(system: &BlockSystem) -> Result<BlockFactors> {
    let dim = system.dim;
    let mut lus = Vec::with_capacity(system.n_dirs);
    for (l, block) in system.blocks.iter().enumerate() {
        let triplets: Vec<Triplet<usize, usize, f64>> = block
            .triplets
            .iter()
            .map(|(r, c, v)| Triplet::new(*r, *c, *v))
            .collect();
        let mat = SparseColMat::try_new_from_triplets(dim, dim, &triplets)
            .map_err(|e| Error::Solver(format!("block {l}: cannot build sparse matrix: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::Solver(format!("block {l}: LU factorization failed: {e:?}")))?;
        lus.push(lu);
    }
    let factors = BlockFactors { lus, dim };

    // probe each factorization against a fixed vector; a wild residual means
    // a numerically singular block that slipped through pivoting
    for (l, block) in system.blocks.iter().enumerate() {
        let probe: Vec<f64> = (0..dim).map(|i| 1.0 + (i % 7) as f64 * 0.25).collect();
        let rhs = block.matvec(&probe);
        let x = factors.solve_block(l, &rhs);
        let scale = probe.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = x
            .iter()
            .zip(&probe)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if !err.is_finite() || err > 1e-6 * scale {
            return Err(Error::Solver(format!(
                "block {l} is numerically singular (probe error {err:.3e}); \
                 check theta0 and the well-posedness margin"
            )));
        }
    }
    Ok(factors)
}

/// Convergence record of one solve.
#[derive(Debug, Clone)]
pub struct SweepStats {
    pub converged: bool,
    pub sweeps: usize,
    pub final_change: f64,
    /// Relative true residual of the coupled system at the returned iterate.
    pub final_residual: f64,
    /// Relative change per sweep.
    pub history: Vec<f64>,
}

fn norm2_all(vs: &[Vec<f64>]) -> f64 {
    vs.iter()
        .flat_map(|v| v.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

fn check_finite(vs: &[Vec<f64>], sweep: usize) -> Result<()> {
    for v in vs {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Solver(format!(
                "non-finite iterate detected in sweep {sweep}"
            )));
        }
    }
    Ok(())
}

fn relative_residual(system: &BlockSystem, iterates: &[Vec<f64>]) -> f64 {
    let res = system.residual_norm(iterates);
    let scale = system.load_norm();
    if scale > 0.0 {
        res / scale
    } else {
        res
    }
}

/// Whether the direction blocks are actually coupled.
fn is_decoupled(system: &BlockSystem) -> bool {
    if system.sigma_s == 0.0 {
        return true;
    }
    system
        .kernel
        .g
        .iter()
        .enumerate()
        .all(|(l, row)| row.iter().enumerate().all(|(i, g)| i == l || *g == 0.0))
}

/// Solve the coupled system by sweeping over directions.
///
/// Gauss-Seidel uses the latest iterates inside a sweep (sequential over l);
/// Jacobi uses the previous sweep throughout and solves directions in
/// parallel, bitwise deterministic across thread counts. Stops when the
/// relative change of the concatenated coefficients drops below `tol`.
pub fn sweep_solve(
    system: &BlockSystem,
    factors: &BlockFactors,
    variant: SweepVariant,
    tol: f64,
    max_sweeps: usize,
) -> Result<(Vec<Vec<f64>>, SweepStats)> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    let l_count = system.n_dirs;
    let mut u: Vec<Vec<f64>> = vec![vec![0.0; system.dim]; l_count];

    if is_decoupled(system) {
        for l in 0..l_count {
            u[l] = factors.solve_block(l, &system.loads[l]);
        }
        check_finite(&u, 1)?;
        let residual = relative_residual(system, &u);
        return Ok((
            u,
            SweepStats {
                converged: true,
                sweeps: 1,
                final_change: 0.0,
                final_residual: residual,
                history: vec![0.0],
            },
        ));
    }

    let mut history = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    for sweep in 1..=max_sweeps {
        sweeps = sweep;
        let prev = u.clone();
        match variant {
            SweepVariant::GaussSeidel => {
                for l in 0..l_count {
                    let rhs = system.coupling_rhs(l, &u);
                    u[l] = factors.solve_block(l, &rhs);
                }
            }
            SweepVariant::Jacobi => {
                u = (0..l_count)
                    .into_par_iter()
                    .map(|l| {
                        let rhs = system.coupling_rhs(l, &prev);
                        factors.solve_block(l, &rhs)
                    })
                    .collect();
            }
        }
        check_finite(&u, sweep)?;
        let diff: f64 = u
            .iter()
            .zip(&prev)
            .flat_map(|(a, b)| a.iter().zip(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let change = diff / norm2_all(&u).max(1e-300);
        history.push(change);
        if change < tol {
            converged = true;
            break;
        }
    }

    let final_change = history.last().copied().unwrap_or(0.0);
    let final_residual = relative_residual(system, &u);
    Ok((
        u,
        SweepStats {
            converged,
            sweeps,
            final_change,
            final_residual,
            history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{build_system, default_theta0, DirBlock};
    use crate::domains::make_unit_box;
    use crate::ordinates::build_sn;
    use crate::scattering::{build_kernel, KernelMatrix, PhaseFunction};
    use crate::sparse_space::MAX_DIM;

    fn zero(_: &[f64; MAX_DIM], _: &[f64; 3]) -> f64 {
        0.0
    }

    fn toy_system(sigma_s: f64) -> BlockSystem {
        let dom = make_unit_box(2, 1, 2).unwrap();
        let set = build_sn(2).unwrap();
        let pf = PhaseFunction::isotropic().unwrap();
        let (kernel, _) = build_kernel(&pf, &set, sigma_s.max(1e-12), 2.0).unwrap();
        let src = |x: &[f64; MAX_DIM], d: &[f64; 3]| {
            (std::f64::consts::PI * x[0]).sin() * (1.0 + 0.5 * d[0])
        };
        build_system(
            &dom,
            &set,
            &kernel,
            2.0,
            sigma_s,
            &src,
            &zero,
            default_theta0(2, 1),
        )
        .unwrap()
    }

    #[test]
    fn identity_block_solve_returns_rhs() {
        let dim = 5;
        let triplets: Vec<(usize, usize, f64)> = (0..dim).map(|i| (i, i, 1.0)).collect();
        let system = BlockSystem {
            dim,
            n_dirs: 1,
            theta0: 0.0,
            sigma_t: 1.0,
            sigma_s: 0.0,
            kernel: KernelMatrix {
                g: vec![vec![0.0]],
                row_sums: vec![0.0],
                m: 0.0,
            },
            blocks: vec![DirBlock::from_raw(dim, triplets)],
            loads: vec![vec![2.0, -1.0, 0.5, 3.0, 0.0]],
        };
        let factors = factor_blocks(&system).unwrap();
        let (u, stats) = sweep_solve(&system, &factors, SweepVariant::GaussSeidel, 1e-10, 50).unwrap();
        assert_eq!(stats.sweeps, 1);
        assert!(stats.converged);
        for (a, b) in u[0].iter().zip(&system.loads[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_system_converges_in_one_sweep() {
        let system = toy_system(0.0);
        let factors = factor_blocks(&system).unwrap();
        let (_, stats) = sweep_solve(&system, &factors, SweepVariant::GaussSeidel, 1e-10, 500).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.sweeps, 1);
        assert!(stats.final_residual < 1e-8);
        let (_, stats_j) = sweep_solve(&system, &factors, SweepVariant::Jacobi, 1e-10, 500).unwrap();
        assert_eq!(stats_j.sweeps, 1);
    }

    #[test]
    fn zero_rhs_yields_zero_solution() {
        let dom = make_unit_box(2, 0, 1).unwrap();
        let set = build_sn(2).unwrap();
        let pf = PhaseFunction::isotropic().unwrap();
        let (kernel, _) = build_kernel(&pf, &set, 1.0, 2.0).unwrap();
        let system =
            build_system(&dom, &set, &kernel, 2.0, 1.0, &zero, &zero, 10.0).unwrap();
        let factors = factor_blocks(&system).unwrap();
        let (u, stats) = sweep_solve(&system, &factors, SweepVariant::GaussSeidel, 1e-10, 500).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.sweeps, 1);
        assert!(u.iter().flat_map(|v| v.iter()).all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn gauss_seidel_and_jacobi_share_fixed_point() {
        let system = toy_system(1.0);
        let factors = factor_blocks(&system).unwrap();
        let tol = 1e-11;
        let (ug, sg) = sweep_solve(&system, &factors, SweepVariant::GaussSeidel, tol, 500).unwrap();
        let (uj, sj) = sweep_solve(&system, &factors, SweepVariant::Jacobi, tol, 500).unwrap();
        assert!(sg.converged && sj.converged);
        assert!(sj.sweeps >= sg.sweeps, "jacobi {} gs {}", sj.sweeps, sg.sweeps);
        let diff: f64 = ug
            .iter()
            .zip(&uj)
            .flat_map(|(a, b)| a.iter().zip(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let scale = norm2_all(&ug).max(1e-300);
        assert!(diff / scale < 10.0 * tol, "fixed points differ: {}", diff / scale);
        assert!(sg.final_residual < 100.0 * tol);
        assert!(sj.final_residual < 100.0 * tol);
    }

    #[test]
    fn determinism_bitwise() {
        let system = toy_system(1.0);
        let factors = factor_blocks(&system).unwrap();
        let (u1, _) = sweep_solve(&system, &factors, SweepVariant::GaussSeidel, 1e-10, 500).unwrap();
        let (u2, _) = sweep_solve(&system, &factors, SweepVariant::GaussSeidel, 1e-10, 500).unwrap();
        for (a, b) in u1.iter().zip(&u2) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn singular_block_is_reported() {
        let dim = 3;
        // zero row -> singular
        let triplets = vec![(0usize, 0usize, 1.0), (1, 1, 1.0)];
        let system = BlockSystem {
            dim,
            n_dirs: 1,
            theta0: 0.0,
            sigma_t: 1.0,
            sigma_s: 0.0,
            kernel: KernelMatrix {
                g: vec![vec![0.0]],
                row_sums: vec![0.0],
                m: 0.0,
            },
            blocks: vec![DirBlock::from_raw(dim, triplets)],
            loads: vec![vec![1.0; dim]],
        };
        let out = factor_blocks(&system);
        assert!(out.is_err(), "expected singular-block error");
        if let Err(e) = out {
            assert_eq!(e.exit_code(), 3);
        }
    }
}
