//! Generalized sine/cosine pair for the homogeneous oscillator
//! `x'' = -x^(2n+1)`.
//!
//! `(C, S)` is the solution of
//!
//! ```text
//! C' = S,    S' = -C^(2n+1),    (C(0), S(0)) = (1, 0)
//! ```
//!
//! with minimal period `T0`. Along this orbit the first integral
//! `(n+1) S^2 + C^(2n+2) = 1` holds, `C` is even, `S` is odd, and both flip
//! sign under a half-period shift. For `n = 0` the pair reduces to
//! `(cos, -sin)` with `T0 = 2*pi`.
//!
//! Values are tabulated over one quarter period and extended everywhere by
//! the symmetries, so the stored range is exactly the monotone branch of `C`.

use crate::error::{Error, Result};
use crate::ode::{refine_root, Dop853, OdeOptions};
use crate::quad;

/// Interpolation window size (degree-7 local Lagrange on uniform nodes).
const STENCIL: usize = 8;

/// Tabulated `(C, S)` over `[0, T0/4]` with symmetry-based evaluation on all
/// of the real line.
#[derive(Debug, Clone)]
pub struct GenTrigTable {
    n: u32,
    t0: f64,
    quarter: f64,
    step: f64,
    c: Vec<f64>,
    s: Vec<f64>,
}

/// Minimal period of `(C, S)`, computed two independent ways.
///
/// * Quadrature of the period integral
///   `T0 = 4 sqrt(n+1) * int_0^1 (1 - u^(2n+2))^(-1/2) du`,
///   desingularized at `u = 1` by the substitution `u = 1 - s^2` which turns
///   the integrand into the smooth `2 / sqrt(sum_{j<2n+2} (1-s^2)^j)`.
/// * Event detection: the integrated orbit's first return to `(1, 0)`,
///   located as the second zero crossing of `S`.
///
/// The two must agree within `tol`; the quadrature value is returned.
pub fn compute_period(n: u32, tol: f64) -> Result<f64> {
    if !(tol > 1e-14 && tol < 1e-6) {
        return Err(Error::Domain(format!(
            "period tolerance {tol:e} outside (1e-14, 1e-6)"
        )));
    }
    let quadrature = period_by_quadrature(n)?;
    let event = period_by_first_return(n)?;
    let diff = (quadrature - event).abs();
    if diff > tol {
        return Err(Error::Consistency(format!(
            "period mismatch for n = {n}: quadrature {quadrature:.17e} vs first return {event:.17e} (|diff| = {diff:e} > tol {tol:e})"
        )));
    }
    Ok(quadrature)
}

/// Both period routes: `(quadrature, first_return)`, without the agreement
/// check. Used for reporting the cross-check itself.
pub fn period_routes(n: u32) -> Result<(f64, f64)> {
    Ok((period_by_quadrature(n)?, period_by_first_return(n)?))
}

fn period_by_quadrature(n: u32) -> Result<f64> {
    let m = 2 * n as i32 + 2;
    let integrand = |s: f64| {
        let u = 1.0 - s * s;
        // (1 - u^m) / (1 - u) evaluated by Horner.
        let mut g = 0.0;
        for _ in 0..m {
            g = g * u + 1.0;
        }
        2.0 / g.sqrt()
    };
    let coarse = quad::integrate(integrand, 0.0, 1.0, 64);
    let fine = quad::integrate(integrand, 0.0, 1.0, 96);
    if (coarse - fine).abs() > 1e-13 * fine.abs() {
        return Err(Error::QuadratureNonConvergent(format!(
            "period integral for n = {n}: 64-node {coarse:e} vs 96-node {fine:e}"
        )));
    }
    Ok(4.0 * ((n + 1) as f64).sqrt() * fine)
}

fn cs_rhs(n: u32) -> impl Fn(f64, &[f64; 2], &mut [f64; 2]) {
    let p = 2 * n as i32 + 1;
    move |_t, y, dydt| {
        dydt[0] = y[1];
        dydt[1] = -y[0].powi(p);
    }
}

fn period_by_first_return(n: u32) -> Result<f64> {
    let f = cs_rhs(n);
    let opts = OdeOptions {
        rtol: 1e-13,
        atol: 1e-14,
        ..Default::default()
    };
    let mut solver = Dop853::new(&f, 0.0, [1.0, 0.0], opts);
    // S starts at 0 moving negative; its zeros are at multiples of T0/2.
    // Count sign changes of S and refine the second one.
    let mut crossings = 0;
    let mut s_prev = 0.0_f64;
    let t_cap = 40.0 * ((n + 1) as f64).sqrt();
    while solver.t() < t_cap {
        solver.step(&f, f64::INFINITY)?;
        let s_now = solver.y()[1];
        if s_prev != 0.0 && s_prev * s_now <= 0.0 {
            crossings += 1;
            if crossings == 2 {
                let p = 2 * n as i32 + 1;
                let g = |t: f64| {
                    let y = solver.dense(t);
                    (y[1], -y[0].powi(p))
                };
                let root = refine_root(g, solver.t_old(), solver.t(), s_prev, s_now, 1e-14)?;
                let y = solver.dense(root);
                if (y[0] - 1.0).abs() > 1e-9 {
                    return Err(Error::Consistency(format!(
                        "first return for n = {n} landed at C = {:.17e}, expected 1",
                        y[0]
                    )));
                }
                return Ok(root);
            }
        }
        if s_now != 0.0 {
            s_prev = s_now;
        }
    }
    Err(Error::Integration(format!(
        "no first return detected for n = {n} within t = {t_cap}"
    )))
}

/// Build the quarter-period table with `m` uniform intervals.
///
/// Node states come from node-to-node high-accuracy integration. The
/// endpoint values `C(0) = 1`, `S(0) = 0`, and `C(T0/4) = 0` are pinned to
/// their exact values after verifying the integrated values agree within
/// `tol`, so downstream symmetry reductions land exactly on the impact locus.
pub fn build_table(n: u32, m: usize, tol: f64) -> Result<GenTrigTable> {
    if m < 256 {
        return Err(Error::Domain(format!("node count {m} below minimum 256")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("invalid table tolerance {tol:e}")));
    }
    let t0 = compute_period(n, 1e-11)?;
    let quarter = t0 / 4.0;
    let step = quarter / m as f64;

    let f = cs_rhs(n);
    let opts = OdeOptions {
        rtol: 1e-13,
        atol: 1e-14,
        dense: false,
        ..Default::default()
    };
    let mut solver = Dop853::new(&f, 0.0, [1.0, 0.0], opts);
    let mut c = Vec::with_capacity(m + 1);
    let mut s = Vec::with_capacity(m + 1);
    c.push(1.0);
    s.push(0.0);
    for j in 1..=m {
        solver.integrate_to(&f, step * j as f64)?;
        let y = solver.y();
        c.push(y[0]);
        s.push(y[1]);
    }
    if c[m].abs() > tol {
        return Err(Error::Consistency(format!(
            "C(T0/4) = {:e} not within {tol:e} of zero",
            c[m]
        )));
    }
    c[m] = 0.0;

    let table = GenTrigTable {
        n,
        t0,
        quarter,
        step,
        c,
        s,
    };
    table.check_invariants(tol)?;
    Ok(table)
}

impl GenTrigTable {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Minimal period `T0`.
    pub fn period(&self) -> f64 {
        self.t0
    }

    pub fn node_count(&self) -> usize {
        self.c.len() - 1
    }

    /// Node time, `C`, `S`, and conservation defect at node `j`.
    pub fn node(&self, j: usize) -> (f64, f64, f64, f64) {
        let t = self.step * j as f64;
        let (c, s) = (self.c[j], self.s[j]);
        (t, c, s, self.defect(c, s))
    }

    fn defect(&self, c: f64, s: f64) -> f64 {
        (self.n as f64 + 1.0) * s * s + c.powi(2 * self.n as i32 + 2) - 1.0
    }

    fn check_invariants(&self, tol: f64) -> Result<()> {
        let m = self.node_count();
        for j in 0..=m {
            let (_, c, s, defect) = self.node(j);
            if defect.abs() > tol {
                return Err(Error::Consistency(format!(
                    "conservation defect {defect:e} at node {j} exceeds {tol:e}"
                )));
            }
            if j > 0 && c >= self.c[j - 1] {
                return Err(Error::Consistency(format!(
                    "C not strictly decreasing at node {j}"
                )));
            }
            let _ = s;
        }
        Ok(())
    }

    /// `(C(t), S(t))` for any finite `t` via symmetry reduction to the
    /// tabulated quarter period.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        debug_assert!(t.is_finite());
        let mut u = t.rem_euclid(self.t0);
        let mut sign_c = 1.0;
        let mut sign_s = 1.0;
        let half = 0.5 * self.t0;
        if u >= half {
            // C(t + T0/2) = -C(t), S(t + T0/2) = -S(t).
            u -= half;
            sign_c = -sign_c;
            sign_s = -sign_s;
        }
        if u > self.quarter {
            // C(T0/2 - u) = -C(u), S(T0/2 - u) = S(u).
            u = half - u;
            sign_c = -sign_c;
        }
        let u = u.clamp(0.0, self.quarter);
        let (c, s) = self.interpolate(u);
        (sign_c * c, sign_s * s)
    }

    /// Degree-7 local Lagrange interpolation on the uniform quarter-period
    /// grid; the window is clamped at the ends.
    fn interpolate(&self, u: f64) -> (f64, f64) {
        let m = self.node_count();
        let pos = u / self.step;
        let j0 = (pos as isize - (STENCIL as isize / 2 - 1))
            .clamp(0, m as isize + 1 - STENCIL as isize) as usize;
        let mut cw = 0.0;
        let mut sw = 0.0;
        for i in 0..STENCIL {
            let ji = j0 + i;
            let ti = self.step * ji as f64;
            let mut basis = 1.0;
            for k in 0..STENCIL {
                if k != i {
                    let tk = self.step * (j0 + k) as f64;
                    basis *= (u - tk) / (ti - tk);
                }
            }
            cw += basis * self.c[ji];
            sw += basis * self.s[ji];
        }
        (cw, sw)
    }

    /// CSV dump of the table nodes (`t,C,S,defect`), one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,C,S,defect\n");
        for j in 0..=self.node_count() {
            let (t, c, s, defect) = self.node(j);
            out.push_str(&format!("{t},{c},{s},{defect}\n"));
        }
        out
    }
}

/// Free-function form of [`GenTrigTable::eval`].
pub fn eval_cs(table: &GenTrigTable, t: f64) -> (f64, f64) {
    table.eval(t)
}
