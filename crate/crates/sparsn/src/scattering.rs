//! Phase functions and the discrete scattering kernel.
//!
//! The kernel matrix G[l][i] = w_i g(omega^l . omega^i) realizes the
//! quadrature approximation of the scattering integral; its maximum row sum
//! m drives the discrete well-posedness condition sigma_t - m sigma_s > 0.

use crate::error::{Error, Result};
use crate::gauss::adaptive_quad;
use crate::ordinates::OrdinateSet;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Scattering phase function g(t), t = cosine of the scattering angle,
/// normalized so the integral of g over the sphere is 1.
#[derive(Debug, Clone)]
pub enum PhaseFunction {
    Isotropic,
    /// Henyey-Greenstein with anisotropy factor eta in (-1, 1).
    HenyeyGreenstein { eta: f64 },
    /// Simplified approximate Mie: g(t) = K_S (1+t)^n_p with
    /// n_p = 2 eta / (1 - eta), K_S = (n_p + 1) / (2 pi 2^(n_p+1)).
    /// Forward-peaked model; eta in [0, 1).
    Sam { eta: f64 },
    /// Tabulated g(t), linearly interpolated; nodes strictly increasing,
    /// covering [-1, 1].
    Table { ts: Vec<f64>, gs: Vec<f64> },
}

impl PhaseFunction {
    pub fn isotropic() -> Result<Self> {
        Self::validated(PhaseFunction::Isotropic)
    }

    pub fn henyey_greenstein(eta: f64) -> Result<Self> {
        if !(-1.0 < eta && eta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Henyey-Greenstein anisotropy factor must lie in (-1, 1), got {eta}"
            )));
        }
        Self::validated(PhaseFunction::HenyeyGreenstein { eta })
    }

    pub fn sam(eta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::InvalidArgument(format!(
                "SAM anisotropy factor must lie in [0, 1), got {eta}"
            )));
        }
        Self::validated(PhaseFunction::Sam { eta })
    }

    pub fn from_table(ts: Vec<f64>, gs: Vec<f64>) -> Result<Self> {
        if ts.len() != gs.len() || ts.len() < 2 {
            return Err(Error::Data("phase table needs >= 2 (t, g) rows".into()));
        }
        if !ts.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Data("phase table abscissae must be strictly increasing".into()));
        }
        if (ts[0] - -1.0).abs() > 1e-12 || (ts[ts.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::Data("phase table must cover [-1, 1]".into()));
        }
        if gs.iter().any(|g| *g < 0.0 || !g.is_finite()) {
            return Err(Error::Data("phase table values must be finite and nonnegative".into()));
        }
        Self::validated(PhaseFunction::Table { ts, gs })
    }

    /// Load a two-column (t, g) text file.
    pub fn from_table_file(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut ts = Vec::new();
        let mut gs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let t: f64 = it
                .next()
                .ok_or_else(|| Error::Data(format!("short row in {path}")))?
                .parse()
                .map_err(|e| Error::Data(format!("bad value in {path}: {e}")))?;
            let g: f64 = it
                .next()
                .ok_or_else(|| Error::Data(format!("short row in {path}")))?
                .parse()
                .map_err(|e| Error::Data(format!("bad value in {path}: {e}")))?;
            ts.push(t);
            gs.push(g);
        }
        Self::from_table(ts, gs)
    }

    fn validated(pf: PhaseFunction) -> Result<PhaseFunction> {
        let norm = pf.normalization()?;
        let tol = match pf {
            // linear interpolation cannot be expected at analytic accuracy
            PhaseFunction::Table { .. } => 1e-6,
            _ => 1e-10,
        };
        if (norm - 1.0).abs() > tol {
            return Err(Error::Data(format!(
                "phase function normalization 2*pi*int g dt = {norm:.12} deviates from 1 beyond {tol:e}"
            )));
        }
        Ok(pf)
    }

    /// Numerical normalization 2 pi * integral of g over [-1, 1].
    pub fn normalization(&self) -> Result<f64> {
        let val = 2.0
            * std::f64::consts::PI
            * adaptive_quad(&|t| self.eval_unchecked(t), -1.0, 1.0, 1e-13);
        if !val.is_finite() {
            return Err(Error::Data("non-finite phase normalization integral".into()));
        }
        Ok(val)
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        match self {
            PhaseFunction::Isotropic => 1.0 / FOUR_PI,
            PhaseFunction::HenyeyGreenstein { eta } => {
                let denom = 1.0 + eta * eta - 2.0 * eta * t;
                (1.0 - eta * eta) / (FOUR_PI * denom.powf(1.5))
            }
            PhaseFunction::Sam { eta } => {
                let np = 2.0 * eta / (1.0 - eta);
                let ks = (np + 1.0) / (2.0 * std::f64::consts::PI * 2.0f64.powf(np + 1.0));
                ks * (1.0 + t).powf(np)
            }
            PhaseFunction::Table { ts, gs } => {
                let t = t.clamp(ts[0], ts[ts.len() - 1]);
                let i = ts.partition_point(|v| *v <= t).clamp(1, ts.len() - 1);
                let (t0, t1) = (ts[i - 1], ts[i]);
                let s = (t - t0) / (t1 - t0);
                gs[i - 1] * (1.0 - s) + gs[i] * s
            }
        }
    }

    /// Evaluate g at a scattering cosine.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "scattering cosine {t} outside [-1, 1]"
            )));
        }
        let t = t.clamp(-1.0, 1.0);
        if let PhaseFunction::HenyeyGreenstein { eta } = self {
            let denom = 1.0 + eta * eta - 2.0 * eta * t;
            if denom < 1e-14 {
                return Err(Error::Data(format!(
                    "Henyey-Greenstein denominator underflow: eta = {eta}, t = {t}"
                )));
            }
        }
        Ok(self.eval_unchecked(t))
    }

    /// First angular moment 2 pi * integral of t g(t) dt; the eigenvalue of
    /// the scattering operator on degree-1 spherical harmonics.
    pub fn first_moment(&self) -> Result<f64> {
        let val = 2.0
            * std::f64::consts::PI
            * adaptive_quad(&|t| t * self.eval_unchecked(t), -1.0, 1.0, 1e-13);
        if !val.is_finite() {
            return Err(Error::Data("non-finite phase first-moment integral".into()));
        }
        Ok(val)
    }
}

/// Discrete scattering kernel for one ordinate set.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    /// g_matrix[l][i] = w_i g(omega^l . omega^i).
    pub g: Vec<Vec<f64>>,
    pub row_sums: Vec<f64>,
    /// Maximum row sum; the m(x) of the well-posedness condition for
    /// x-independent kernels.
    pub m: f64,
}

/// Outcome of the discrete well-posedness check sigma_t - m sigma_s > 0.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionReport {
    pub m: f64,
    pub margin: f64,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.margin > 0.0
    }
}

/// The quantity m = max_i sum_l w_l g(omega^l . omega^i) for a kernel and
/// ordinate set, without any cross-section validation.
pub fn kernel_m(pf: &PhaseFunction, set: &OrdinateSet) -> Result<f64> {
    let mut m = f64::NEG_INFINITY;
    for di in &set.directions {
        let mut acc = 0.0;
        for (dl, w) in set.directions.iter().zip(&set.weights) {
            let t = dl[0] * di[0] + dl[1] * di[1] + dl[2] * di[2];
            acc += w * pf.eval(t)?;
        }
        m = m.max(acc);
    }
    Ok(m)
}

/// Assemble the kernel matrix and evaluate the well-posedness margin without
/// failing on violation.
pub fn build_kernel_unchecked(
    pf: &PhaseFunction,
    set: &OrdinateSet,
    sigma_s: f64,
    sigma_t: f64,
) -> Result<(KernelMatrix, AssumptionReport)> {
    if sigma_s < 0.0 {
        return Err(Error::Config(format!("sigma_s must be nonnegative, got {sigma_s}")));
    }
    if sigma_t < sigma_s {
        return Err(Error::Config(format!(
            "sigma_t = {sigma_t} must dominate sigma_s = {sigma_s}"
        )));
    }
    let l = set.len();
    let mut g = vec![vec![0.0; l]; l];
    for (li, row) in g.iter_mut().enumerate() {
        let dl = set.directions[li];
        for (i, entry) in row.iter_mut().enumerate() {
            let di = set.directions[i];
            let t = dl[0] * di[0] + dl[1] * di[1] + dl[2] * di[2];
            *entry = set.weights[i] * pf.eval(t)?;
        }
    }
    let row_sums: Vec<f64> = g.iter().map(|row| row.iter().sum()).collect();
    let m = row_sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let margin = sigma_t - m * sigma_s;
    Ok((KernelMatrix { g, row_sums, m }, AssumptionReport { m, margin }))
}

/// Assemble the kernel matrix, failing if the well-posedness assumption is
/// violated (use [`build_kernel_unchecked`] to proceed anyway).
pub fn build_kernel(
    pf: &PhaseFunction,
    set: &OrdinateSet,
    sigma_s: f64,
    sigma_t: f64,
) -> Result<(KernelMatrix, AssumptionReport)> {
    let (kernel, report) = build_kernel_unchecked(pf, set, sigma_s, sigma_t)?;
    if !report.holds() {
        return Err(Error::AssumptionViolated {
            margin: report.margin,
            location: "constant coefficients (uniform in space)".into(),
        });
    }
    Ok((kernel, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordinates::build_sn;

    #[test]
    fn phase_values_match_closed_forms() {
        let hg0 = PhaseFunction::henyey_greenstein(0.0).unwrap();
        for &t in &[-1.0, -0.3, 0.0, 0.9, 1.0] {
            assert!((hg0.eval(t).unwrap() - 0.07957747154594767).abs() < 1e-15);
        }
        let hg = PhaseFunction::henyey_greenstein(0.5).unwrap();
        assert!((hg.eval(1.0).unwrap() - 0.75 / (FOUR_PI * 0.125)).abs() < 1e-12);
        let sam = PhaseFunction::sam(0.5).unwrap();
        // n_p = 2, K_S = 3/(16 pi), g(1) = 3/(4 pi)
        assert!((sam.eval(1.0).unwrap() - 3.0 / FOUR_PI).abs() < 1e-12);
        assert!((sam.eval(-1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_out_of_range_cosine() {
        let pf = PhaseFunction::isotropic().unwrap();
        assert!(pf.eval(1.0 + 1e-9).is_err());
        assert!(pf.eval(1.0 + 1e-13).is_ok());
    }

    #[test]
    fn normalization_holds_for_parameter_sweep() {
        for eta in [0.0, 0.1, -0.1, 0.5, -0.5, 0.9] {
            let hg = PhaseFunction::henyey_greenstein(eta).unwrap();
            assert!((hg.normalization().unwrap() - 1.0).abs() < 1e-10, "HG eta={eta}");
        }
        for eta in [0.0, 0.1, 0.5, 0.9] {
            let sam = PhaseFunction::sam(eta).unwrap();
            assert!((sam.normalization().unwrap() - 1.0).abs() < 1e-10, "SAM eta={eta}");
        }
    }

    #[test]
    fn hg_first_moment_equals_eta() {
        for eta in [0.0, 0.1, 0.5, 0.9] {
            let hg = PhaseFunction::henyey_greenstein(eta).unwrap();
            assert!((hg.first_moment().unwrap() - eta).abs() < 1e-10, "eta={eta}");
        }
    }

    #[test]
    fn sam_first_moment_matches_closed_form() {
        // for (1+t)^n kernels the first moment is n/(n+2)
        for eta in [0.1, 0.5, 0.9] {
            let np = 2.0 * eta / (1.0 - eta);
            let sam = PhaseFunction::sam(eta).unwrap();
            assert!(
                (sam.first_moment().unwrap() - np / (np + 2.0)).abs() < 1e-10,
                "eta={eta}"
            );
        }
    }

    #[test]
    fn hg_forward_peak_monotone_in_eta() {
        let mut prev = 0.0;
        let mut eta = 0.0;
        while eta <= 0.95 {
            let g1 = PhaseFunction::henyey_greenstein(eta).unwrap().eval(1.0).unwrap();
            assert!(g1 > prev - 1e-15, "eta={eta}");
            prev = g1;
            eta += 0.05;
        }
    }

    #[test]
    fn isotropic_kernel_has_unit_rows() {
        let set = build_sn(2).unwrap();
        let pf = PhaseFunction::isotropic().unwrap();
        let (kernel, report) = build_kernel(&pf, &set, 1.0, 2.0).unwrap();
        for rs in &kernel.row_sums {
            assert!((rs - 1.0).abs() < 1e-10);
        }
        assert!((report.m - 1.0).abs() < 1e-10);
        assert!((report.margin - 1.0).abs() < 1e-9);
        // eta = 0: G symmetric
        for l in 0..set.len() {
            for i in 0..set.len() {
                assert!((kernel.g[l][i] - kernel.g[i][l]).abs() < 1e-14);
            }
        }
        // entries nonnegative
        assert!(kernel.g.iter().flatten().all(|v| *v >= 0.0));
    }

    #[test]
    fn row_sums_match_quadrature_of_kernel() {
        let set = build_sn(4).unwrap();
        let pf = PhaseFunction::henyey_greenstein(0.3).unwrap();
        let (kernel, _) = build_kernel_unchecked(&pf, &set, 0.4, 1.0).unwrap();
        for (l, dl) in set.directions.iter().enumerate() {
            let quad = set
                .sphere_quad(|d| {
                    pf.eval(d[0] * dl[0] + d[1] * dl[1] + d[2] * dl[2]).unwrap()
                })
                .unwrap();
            assert!((kernel.row_sums[l] - quad).abs() < 1e-12);
        }
    }

    #[test]
    fn strong_forward_peak_violates_assumption_on_s2() {
        let set = build_sn(2).unwrap();
        let pf = PhaseFunction::henyey_greenstein(0.9).unwrap();
        let (_, report) = build_kernel_unchecked(&pf, &set, 1.0, 3.0).unwrap();
        assert!(report.m > 1.0, "under-resolved forward peak should inflate m");
        assert!(!report.holds());
        let err = build_kernel(&pf, &set, 1.0, 3.0).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn sam_peak_is_milder_than_hg_on_s2() {
        let set = build_sn(2).unwrap();
        let sam = PhaseFunction::sam(0.9).unwrap();
        let (_, rep_sam) = build_kernel_unchecked(&sam, &set, 1.0, 3.0).unwrap();
        let hg = PhaseFunction::henyey_greenstein(0.9).unwrap();
        let (_, rep_hg) = build_kernel_unchecked(&hg, &set, 1.0, 3.0).unwrap();
        assert!(rep_sam.m < rep_hg.m);
        assert!(rep_sam.holds());
    }

    #[test]
    fn invalid_cross_sections_rejected() {
        let set = build_sn(2).unwrap();
        let pf = PhaseFunction::isotropic().unwrap();
        assert!(build_kernel(&pf, &set, -1.0, 2.0).is_err());
        assert!(build_kernel(&pf, &set, 2.0, 1.0).is_err());
    }

    #[test]
    fn tabulated_phase_function_round_trips() {
        // tabulate the isotropic kernel; linear interpolation is exact
        let ts: Vec<f64> = (0..=20).map(|i| -1.0 + i as f64 / 10.0).collect();
        let gs = vec![1.0 / FOUR_PI; 21];
        let pf = PhaseFunction::from_table(ts, gs).unwrap();
        assert!((pf.eval(0.37).unwrap() - 1.0 / FOUR_PI).abs() < 1e-14);
    }
}
