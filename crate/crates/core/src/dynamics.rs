//! Potential specification and the Hamiltonians of the half-line system.
//!
//! The potential is `x^(2n+2)/(2n+2) + sum_i p_i(t) x^(i+1)/(i+1)` with each
//! coefficient `p_i` a 1-periodic trigonometric polynomial. Restricting to
//! trigonometric polynomials keeps the coefficients exactly periodic and
//! arbitrarily smooth while staying configurable from plain numbers.

use crate::error::{Error, Result};
use crate::gentrig::{build_table, GenTrigTable};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Truncated Fourier series with period 1:
/// `a0 + sum_k a_k cos(2 pi k t) + b_k sin(2 pi k t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub a0: f64,
    /// `(a_k, b_k)` for `k = 1..`.
    #[serde(default)]
    pub harmonics: Vec<(f64, f64)>,
}

impl FourierSeries {
    pub fn zero() -> Self {
        Self {
            a0: 0.0,
            harmonics: Vec::new(),
        }
    }

    pub fn constant(a0: f64) -> Self {
        Self {
            a0,
            harmonics: Vec::new(),
        }
    }

    /// Single-harmonic series `a1 cos(2 pi t) + b1 sin(2 pi t)`.
    pub fn harmonic(a1: f64, b1: f64) -> Self {
        Self {
            a0: 0.0,
            harmonics: vec![(a1, b1)],
        }
    }

    /// Evaluate at `t`. The argument is reduced modulo 1 first, so large
    /// times do not lose precision inside the trig calls.
    pub fn eval(&self, t: f64) -> f64 {
        let tf = t.rem_euclid(1.0);
        let mut acc = self.a0;
        for (k, &(a, b)) in self.harmonics.iter().enumerate() {
            let arg = TAU * (k as f64 + 1.0) * tf;
            let (s, c) = arg.sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    /// Derivative with respect to `t`.
    pub fn deriv(&self, t: f64) -> f64 {
        let tf = t.rem_euclid(1.0);
        let mut acc = 0.0;
        for (k, &(a, b)) in self.harmonics.iter().enumerate() {
            let omega = TAU * (k as f64 + 1.0);
            let (s, c) = (omega * tf).sin_cos();
            acc += omega * (b * c - a * s);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.a0 == 0.0 && self.harmonics.iter().all(|&(a, b)| a == 0.0 && b == 0.0)
    }

    /// Crude uniform bound `|a0| + sum (|a_k| + |b_k|)`.
    pub fn sup_bound(&self) -> f64 {
        self.a0.abs()
            + self
                .harmonics
                .iter()
                .map(|(a, b)| a.abs() + b.abs())
                .sum::<f64>()
    }

    fn is_finite(&self) -> bool {
        self.a0.is_finite()
            && self
                .harmonics
                .iter()
                .all(|(a, b)| a.is_finite() && b.is_finite())
    }
}

/// Degree parameter `n` and the `2n+1` periodic coefficients `p_0 .. p_2n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSpec {
    n: u32,
    coeffs: Vec<FourierSeries>,
}

impl PotentialSpec {
    /// `coeffs` must hold exactly `2n + 1` series with finite coefficients.
    pub fn new(n: u32, coeffs: Vec<FourierSeries>) -> Result<Self> {
        let expected = 2 * n as usize + 1;
        if coeffs.len() != expected {
            return Err(Error::Domain(format!(
                "expected {expected} coefficient series for n = {n}, got {}",
                coeffs.len()
            )));
        }
        if !coeffs.iter().all(FourierSeries::is_finite) {
            return Err(Error::Domain("non-finite Fourier coefficient".into()));
        }
        Ok(Self { n, coeffs })
    }

    /// The homogeneous oscillator: all `p_i = 0`.
    pub fn unperturbed(n: u32) -> Self {
        Self {
            n,
            coeffs: vec![FourierSeries::zero(); 2 * n as usize + 1],
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn coeff(&self, i: usize) -> &FourierSeries {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[FourierSeries] {
        &self.coeffs
    }

    pub fn is_unperturbed(&self) -> bool {
        self.coeffs.iter().all(FourierSeries::is_zero)
    }

    /// `max_i sup |p_i|` (crude bound).
    pub fn sup_bound(&self) -> f64 {
        self.coeffs
            .iter()
            .map(FourierSeries::sup_bound)
            .fold(0.0, f64::max)
    }
}

/// Constants derived from `n` and the period `T0`.
///
/// `alpha = 1/(n+2)` and `beta = (n+1)/(n+2)` are the amplitude/velocity
/// scaling exponents of the homogeneous flow. The action normalization is
/// `a = 1/(alpha T0)`, the unique choice that gives the action-angle chart a
/// unit Jacobian (checked in closed form for the harmonic case), and
/// `d = (2a)^(2 beta) / (2n+2)` is the leading coefficient of the folded
/// Hamiltonian.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub d: f64,
}

impl DerivedConstants {
    pub fn new(n: u32, t0: f64) -> Self {
        let alpha = 1.0 / (n as f64 + 2.0);
        let beta = 1.0 - alpha;
        let a = 1.0 / (alpha * t0);
        let d = (2.0 * a).powf(2.0 * beta) / (2.0 * n as f64 + 2.0);
        Self { alpha, beta, a, d }
    }
}

/// Right-hand side force `-x^(2n+1) - sum_i p_i(t) x^i`.
///
/// The polynomial part is evaluated with a Horner recurrence. The formula is
/// a smooth function of `x` on all of the real line; the physical contract
/// is `x >= 0`, but trial evaluations slightly below the barrier during
/// event bracketing are well-defined.
pub fn force(spec: &PotentialSpec, x: f64, t: f64) -> f64 {
    let mut poly = 0.0;
    for series in spec.coeffs.iter().rev() {
        poly = poly * x + series.eval(t);
    }
    -x.powi(2 * spec.n as i32 + 1) - poly
}

/// Full Hamiltonian `y^2/2 + x^(2n+2)/(2n+2) + sum_i p_i(t) x^(i+1)/(i+1)`.
pub fn hamiltonian(spec: &PotentialSpec, x: f64, y: f64, t: f64) -> f64 {
    let two_n2 = 2.0 * spec.n as f64 + 2.0;
    let mut potential = 0.0;
    // Horner in x for sum_i p_i(t) x^(i+1) / (i+1), factored as
    // x * (q_0 + x * (q_1 + ...)) with q_i = p_i(t)/(i+1).
    for (i, series) in spec.coeffs.iter().enumerate().rev() {
        potential = potential * x + series.eval(t) / (i as f64 + 1.0);
    }
    potential *= x;
    0.5 * y * y + x.powi(2 * spec.n as i32 + 2) / two_n2 + potential
}

/// Unperturbed energy `y^2/2 + x^(2n+2)/(2n+2)`.
pub fn h0(n: u32, x: f64, y: f64) -> f64 {
    0.5 * y * y + x.powi(2 * n as i32 + 2) / (2.0 * n as f64 + 2.0)
}

/// Position factor of the folded angle: `C((frac(phi)/2 - 1/4) T0)`.
///
/// Zero exactly at integer `phi` (the impact locus), positive in between, and
/// 1-periodic by the fractional-part reduction; for the harmonic case it is
/// `sin(pi frac(phi))`.
pub fn folded_c(table: &GenTrigTable, phi: f64) -> f64 {
    let frac = phi - phi.floor();
    let (c, _) = table.eval((0.5 * frac - 0.25) * table.period());
    c
}

/// Folded Hamiltonian
/// `H3(rho, phi, t) = d rho^(2 beta) + sum_i p_i(t) (2 a rho)^(alpha (i+1)) cphi^(i+1) / (i+1)`
/// with `cphi = C((frac(phi)/2 - 1/4) T0)`.
///
/// Periodic in `phi` with period 1 and right-continuous at integers; the
/// perturbation part vanishes on the impact locus `phi` integer.
pub fn h3(
    spec: &PotentialSpec,
    consts: &DerivedConstants,
    table: &GenTrigTable,
    rho: f64,
    phi: f64,
    t: f64,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("h3 requires rho > 0, got {rho:e}")));
    }
    Ok(h3_parts(spec, consts, rho, folded_c(table, phi), t).0)
}

/// d H3 / d rho, analytic.
pub fn dh3_drho(
    spec: &PotentialSpec,
    consts: &DerivedConstants,
    table: &GenTrigTable,
    rho: f64,
    phi: f64,
    t: f64,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "dh3_drho requires rho > 0, got {rho:e}"
        )));
    }
    Ok(h3_parts(spec, consts, rho, folded_c(table, phi), t).1)
}

/// d H3 / d t, analytic (term-wise derivative of the Fourier coefficients).
pub fn dh3_dt(
    spec: &PotentialSpec,
    consts: &DerivedConstants,
    table: &GenTrigTable,
    rho: f64,
    phi: f64,
    t: f64,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "dh3_dt requires rho > 0, got {rho:e}"
        )));
    }
    let cphi = folded_c(table, phi);
    let two_a_rho = 2.0 * consts.a * rho;
    let mut acc = 0.0;
    let mut cpow = cphi;
    for (i, series) in spec.coeffs.iter().enumerate() {
        let e = consts.alpha * (i as f64 + 1.0);
        acc += series.deriv(t) * two_a_rho.powf(e) * cpow / (i as f64 + 1.0);
        cpow *= cphi;
    }
    Ok(acc)
}

/// `(H3, dH3/drho)` with the folded-angle factor already evaluated.
pub(crate) fn h3_parts(
    spec: &PotentialSpec,
    consts: &DerivedConstants,
    rho: f64,
    cphi: f64,
    t: f64,
) -> (f64, f64) {
    let two_beta = 2.0 * consts.beta;
    let lead = consts.d * rho.powf(two_beta);
    let dlead = two_beta * consts.d * rho.powf(two_beta - 1.0);
    let mut value = lead;
    let mut dvalue = dlead;
    if cphi != 0.0 {
        let two_a = 2.0 * consts.a;
        let mut cpow = cphi;
        for (i, series) in spec.coeffs.iter().enumerate() {
            if !series.is_zero() {
                let p = series.eval(t);
                let e = consts.alpha * (i as f64 + 1.0);
                let term = p * (two_a).powf(e) * rho.powf(e) * cpow;
                value += term / (i as f64 + 1.0);
                dvalue += consts.alpha * p * two_a.powf(e) * rho.powf(e - 1.0) * cpow;
            }
            cpow *= cphi;
        }
    }
    (value, dvalue)
}

/// One potential together with its generalized-trig table and derived
/// constants, the bundle every transform consumes.
#[derive(Debug, Clone)]
pub struct System {
    pub spec: PotentialSpec,
    pub consts: DerivedConstants,
    pub table: GenTrigTable,
}

impl System {
    /// Build the table at `nodes` intervals with node tolerance `tol`.
    pub fn new(spec: PotentialSpec, nodes: usize, tol: f64) -> Result<Self> {
        let table = build_table(spec.n(), nodes, tol)?;
        let consts = DerivedConstants::new(spec.n(), table.period());
        Ok(Self {
            spec,
            consts,
            table,
        })
    }

    /// Default table resolution (1024 nodes, 1e-9 node tolerance).
    pub fn with_default_table(spec: PotentialSpec) -> Result<Self> {
        Self::new(spec, 1024, 1e-9)
    }

    pub fn n(&self) -> u32 {
        self.spec.n()
    }

    pub fn h3(&self, rho: f64, phi: f64, t: f64) -> Result<f64> {
        h3(&self.spec, &self.consts, &self.table, rho, phi, t)
    }

    pub fn dh3_drho(&self, rho: f64, phi: f64, t: f64) -> Result<f64> {
        dh3_drho(&self.spec, &self.consts, &self.table, rho, phi, t)
    }

    pub fn dh3_dt(&self, rho: f64, phi: f64, t: f64) -> Result<f64> {
        dh3_dt(&self.spec, &self.consts, &self.table, rho, phi, t)
    }
}
