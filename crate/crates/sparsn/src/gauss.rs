//! Gauss-Legendre quadrature and Legendre polynomial helpers.
//!
//! Everything in this crate integrates piecewise polynomials, so the rules
//! here are used with orders chosen for exactness: an `n`-point rule is exact
//! for polynomials of degree `2n - 1`.

/// Legendre polynomial P_n(x) on [-1, 1] together with its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for m in 1..n {
        let p_next = ((2 * m + 1) as f64 * x * p - m as f64 * p_prev) / (m + 1) as f64;
        p_prev = p;
        p = p_next;
    }
    // derivative from the standard identity (1-x^2) P_n' = n (P_{n-1} - x P_n)
    let dp = if (1.0 - x * x).abs() > 1e-14 {
        n as f64 * (p_prev - x * p) / (1.0 - x * x)
    } else {
        let sign = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 + 1) };
        sign * n as f64 * (n + 1) as f64 / 2.0
    };
    (p, dp)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration from the Chebyshev initial guess; accurate to machine
/// precision for the orders used here (n <= 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        weights[i] = w;
        nodes[n - 1 - i] = x.abs();
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `n`-point Gauss rule mapped to [a, b].
pub fn gauss_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Orthonormal Legendre polynomial on [0, 1]:
/// `L~_p(t) = sqrt(2p+1) P_p(2t-1)`, so that integral of L~_p L~_q over [0,1]
/// is delta_pq.
pub fn ortho_legendre01(p: usize, t: f64) -> f64 {
    let (v, _) = legendre(p, 2.0 * t - 1.0);
    ((2 * p + 1) as f64).sqrt() * v
}

/// Derivative of the orthonormal Legendre polynomial on [0, 1].
pub fn ortho_legendre01_deriv(p: usize, t: f64) -> f64 {
    let (_, dv) = legendre(p, 2.0 * t - 1.0);
    2.0 * ((2 * p + 1) as f64).sqrt() * dv
}

/// Adaptive Simpson quadrature with absolute tolerance.
///
/// Used only for non-polynomial integrands (phase-function normalization);
/// everything polynomial goes through fixed Gauss rules.
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}
