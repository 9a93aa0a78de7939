//! The coordinate pipeline from the physical half-plane to near-integrable
//! twist coordinates.
//!
//! Three charts compose:
//!
//! 1. **Action-angle** `psi1`: `(lambda, angle) -> (x, y)` built on the
//!    generalized trig pair, with `x = (a lambda)^alpha C(angle T0)` and
//!    `y = (a lambda)^beta S(angle T0)`. With `a = 1/(alpha T0)` the chart
//!    has Jacobian determinant of magnitude one (orientation-reversing with
//!    this sign convention).
//! 2. **Impact folding** `psi2`: `(rho, phi) -> (lambda, angle)` with
//!    `lambda = 2 rho`, `angle = phi/2 - 1/4 (mod 1)`. Integer `phi` lands
//!    exactly on the impact locus `x = 0`, each unit interval of `phi` covers
//!    one barrier-to-barrier flight, and the area factor is one.
//! 3. **Time-energy exchange** `to_exchanged`: energy becomes the action
//!    (`I = H3`), old time the angle (`theta = t mod 1`), old angle the new
//!    time (`tau = phi`). Inverting requires solving `H3(rho, tau, theta) = I`
//!    for `rho`, which is where the implicit radius defect
//!    `R = d^(-1/(2 beta)) I^(1/(2 beta)) - rho` lives.
//!
//! Finite-difference estimators for the mixed partial derivatives of `R`
//! feed the direct twist-map backend and the decay-law measurements.

use crate::dynamics::{folded_c, h3_parts, System};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Action-angle coordinates of the full-plane homogeneous flow.
/// `angle` is stored in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionAngle {
    pub lambda: f64,
    pub angle: f64,
}

/// Folded (half-plane) coordinates. The lift of `phi` counts impacts through
/// its integer part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactCoords {
    pub rho: f64,
    pub phi: f64,
}

/// Time-energy-exchanged coordinates: `energy` plays the action, `theta`
/// (old time mod 1) the angle, `tau` (old angle) the new time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangedCoords {
    pub energy: f64,
    pub theta: f64,
    pub tau: f64,
}

/// Scaled annulus coordinates `I = upsilon / epsilon` with
/// `upsilon` in `[1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledCoords {
    pub upsilon: f64,
    pub epsilon: f64,
}

impl ScaledCoords {
    pub fn energy(&self) -> f64 {
        self.upsilon / self.epsilon
    }
}

/// Action-angle chart: `(lambda, angle) -> (x, y)`.
pub fn psi1(sys: &System, aa: ActionAngle) -> Result<(f64, f64)> {
    if !(aa.lambda > 0.0) {
        return Err(Error::Domain(format!(
            "psi1 requires lambda > 0, got {:e}",
            aa.lambda
        )));
    }
    let consts = &sys.consts;
    let al = consts.a * aa.lambda;
    let (c, s) = sys.table.eval(aa.angle * sys.table.period());
    Ok((al.powf(consts.alpha) * c, al.powf(consts.beta) * s))
}

/// Inverse action-angle chart.
///
/// The action comes from the conserved energy,
/// `a lambda = ((2n+2) H0)^(1/(2 beta))`; the angle from inverting the
/// monotone branch of `C` on the quarter determined by the signs of `(x, y)`,
/// bisection first, then Newton polish through `C' = S`.
pub fn psi1_inv(sys: &System, x: f64, y: f64) -> Result<ActionAngle> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::Domain("psi1_inv undefined at the origin".into()));
    }
    let consts = &sys.consts;
    let n = sys.n() as f64;
    let e = crate::dynamics::h0(sys.n(), x, y);
    let al = ((2.0 * n + 2.0) * e).powf(1.0 / (2.0 * consts.beta));
    let lambda = al / consts.a;
    let amp_x = al.powf(consts.alpha);
    let amp_y = al.powf(consts.beta);
    let cx = (x / amp_x).clamp(-1.0, 1.0);
    let sy = y / amp_y;

    let t0 = sys.table.period();
    let quarter = t0 / 4.0;
    // Quarter selection: S <= 0 on (0, T0/2), C >= 0 on [0, T0/4] and
    // [3T0/4, T0]; C is strictly monotone on each quarter.
    let (lo, hi) = match (sy <= 0.0, cx >= 0.0) {
        (true, true) => (0.0, quarter),
        (true, false) => (quarter, 2.0 * quarter),
        (false, false) => (2.0 * quarter, 3.0 * quarter),
        (false, true) => (3.0 * quarter, 4.0 * quarter),
    };
    let mut a = lo;
    let mut b = hi;
    let mut fa = sys.table.eval(a).0 - cx;
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        let fm = sys.table.eval(mid).0 - cx;
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
        if b - a < 1e-12 * t0 {
            break;
        }
    }
    let mut u = 0.5 * (a + b);
    // Newton refinement on whichever component has the larger derivative.
    for _ in 0..4 {
        let (c, s) = sys.table.eval(u);
        let dc = s; // C' = S
        let ds = -c.powi(2 * sys.n() as i32 + 1); // S' = -C^(2n+1)
        let (f, df) = if dc.abs() >= ds.abs() {
            (c - cx, dc)
        } else {
            (s - sy, ds)
        };
        if df != 0.0 {
            let step = f / df;
            if step.abs() < 0.25 * t0 {
                u -= step;
            }
        }
    }
    Ok(ActionAngle {
        lambda,
        angle: (u / t0).rem_euclid(1.0),
    })
}

/// Impact folding: `(rho, phi) -> (lambda, angle)` with `lambda = 2 rho`,
/// `angle = phi/2 - 1/4 (mod 1)`.
pub fn psi2(ic: ImpactCoords) -> Result<ActionAngle> {
    if !(ic.rho > 0.0) {
        return Err(Error::Domain(format!(
            "psi2 requires rho > 0, got {:e}",
            ic.rho
        )));
    }
    Ok(ActionAngle {
        lambda: 2.0 * ic.rho,
        angle: (0.5 * ic.phi - 0.25).rem_euclid(1.0),
    })
}

/// Inverse impact folding. Only the half-plane `x >= 0`, i.e. angles in
/// `[3/4, 1) U [0, 1/4]`, is in the image of `psi2`; the returned `phi` is
/// the representative in `[0, 1]`.
pub fn psi2_inv(aa: ActionAngle) -> Result<ImpactCoords> {
    if !(aa.lambda > 0.0) {
        return Err(Error::Domain(format!(
            "psi2_inv requires lambda > 0, got {:e}",
            aa.lambda
        )));
    }
    let mut shifted = aa.angle.rem_euclid(1.0);
    if shifted >= 0.75 {
        shifted -= 1.0;
    }
    if shifted > 0.25 + 1e-12 {
        return Err(Error::Domain(format!(
            "angle {:e} corresponds to x < 0, outside the folded half-plane",
            aa.angle
        )));
    }
    Ok(ImpactCoords {
        rho: 0.5 * aa.lambda,
        phi: (2.0 * shifted + 0.5).clamp(0.0, 1.0),
    })
}

/// Solution of the implicit radius equation `H3(rho, tau, theta) = I`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RhoSolution {
    pub rho: f64,
    /// `R = d^(-1/(2 beta)) I^(1/(2 beta)) - rho`, the deviation from the
    /// unperturbed radius.
    pub defect: f64,
}

/// Solve `H3(rho, tau, theta) = I` for `rho`.
///
/// Safeguarded Newton with the analytic radial derivative, seeded at the
/// unperturbed radius `d^(-1/(2 beta)) I^(1/(2 beta))` and bracketed by
/// `[seed/2, 2 seed]`; bisection absorbs any step that leaves the bracket.
/// The residual is driven to machine level and verified against the
/// `1e-10 * I` contract.
pub fn solve_rho(sys: &System, i_energy: f64, theta: f64, tau: f64) -> Result<RhoSolution> {
    if !(i_energy > 0.0 && i_energy.is_finite()) {
        return Err(Error::Domain(format!(
            "solve_rho requires positive energy, got {i_energy:e}"
        )));
    }
    let consts = &sys.consts;
    let inv_2beta = 1.0 / (2.0 * consts.beta);
    let seed = consts.d.powf(-inv_2beta) * i_energy.powf(inv_2beta);
    let cphi = folded_c(&sys.table, tau);

    if cphi == 0.0 || sys.spec.is_unperturbed() {
        // Perturbation absent: the seed is exact.
        return Ok(RhoSolution {
            rho: seed,
            defect: 0.0,
        });
    }

    let eval = |rho: f64| h3_parts(&sys.spec, consts, rho, cphi, theta);

    let (mut a, mut b) = (0.5 * seed, 2.0 * seed);
    let fa = eval(a).0 - i_energy;
    let fb = eval(b).0 - i_energy;
    if !(fa < 0.0 && fb > 0.0) {
        return Err(Error::OutOfRegime(format!(
            "no bracket for I = {i_energy:e} at (theta, tau) = ({theta}, {tau}): \
             H3 - I = {fa:e} at rho = {a:e}, {fb:e} at rho = {b:e}"
        )));
    }

    let mut rho = seed;
    for _ in 0..60 {
        let (h, dh) = eval(rho);
        let f = h - i_energy;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            a = rho;
        } else {
            b = rho;
        }
        let newton = rho - f / dh;
        let next = if dh > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - rho).abs() <= 4.0 * f64::EPSILON * rho {
            rho = next;
            break;
        }
        rho = next;
    }
    let (h, dh) = eval(rho);
    if (h - i_energy).abs() > 1e-10 * i_energy {
        return Err(Error::RootSolve(format!(
            "solve_rho residual {:e} exceeds 1e-10 * I at I = {i_energy:e}",
            (h - i_energy).abs()
        )));
    }
    if dh <= 0.0 {
        return Err(Error::OutOfRegime(format!(
            "dH3/drho = {dh:e} <= 0 at the solution; I = {i_energy:e} below the regime"
        )));
    }
    Ok(RhoSolution {
        rho,
        defect: seed - rho,
    })
}

/// `R(I, theta, tau)` alone.
pub fn radius_defect(sys: &System, i_energy: f64, theta: f64, tau: f64) -> Result<f64> {
    Ok(solve_rho(sys, i_energy, theta, tau)?.defect)
}

/// Exchange time and angle: `(rho, phi, t) -> (I, theta, tau)`.
pub fn to_exchanged(sys: &System, ic: ImpactCoords, t: f64) -> Result<ExchangedCoords> {
    let energy = sys.h3(ic.rho, ic.phi, t)?;
    Ok(ExchangedCoords {
        energy,
        theta: t.rem_euclid(1.0),
        tau: ic.phi,
    })
}

/// Invert the exchange by solving the implicit radius equation.
pub fn from_exchanged(sys: &System, ec: ExchangedCoords) -> Result<(ImpactCoords, f64)> {
    let sol = solve_rho(sys, ec.energy, ec.theta, ec.tau)?;
    Ok((
        ImpactCoords {
            rho: sol.rho,
            phi: ec.tau,
        },
        ec.theta,
    ))
}

/// Analytic `dR/dtheta` through implicit differentiation of
/// `H3(rho, tau, theta) = I`:
/// `dR/dtheta = (dH3/dt) / (dH3/drho)` at the solution radius.
pub fn dr_dtheta_implicit(sys: &System, i_energy: f64, theta: f64, tau: f64) -> Result<f64> {
    let rho = solve_rho(sys, i_energy, theta, tau)?.rho;
    let num = sys.dh3_dt(rho, tau, theta)?;
    let den = sys.dh3_drho(rho, tau, theta)?;
    Ok(num / den)
}

/// Analytic `dR/dI`:
/// `(1/(2 beta)) d^(-1/(2 beta)) I^(1/(2 beta) - 1) - 1 / (dH3/drho)`.
pub fn dr_di_implicit(sys: &System, i_energy: f64, theta: f64, tau: f64) -> Result<f64> {
    let rho = solve_rho(sys, i_energy, theta, tau)?.rho;
    let den = sys.dh3_drho(rho, tau, theta)?;
    let consts = &sys.consts;
    let inv_2beta = 1.0 / (2.0 * consts.beta);
    Ok(inv_2beta * consts.d.powf(-inv_2beta) * i_energy.powf(inv_2beta - 1.0) - 1.0 / den)
}

/// Finite-difference step policy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FdOptions {
    /// Base relative step; the energy step is `I * delta`, the angle step
    /// `delta`, both widened for higher-order stencils.
    pub delta: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self { delta: 1e-3 }
    }
}

/// A finite-difference derivative estimate with its extrapolation error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    /// Richardson disagreement `|A(h) - A(h/2)| / 3`.
    pub error_estimate: f64,
    /// Set when the two extrapolation levels disagree badly, indicating step
    /// underflow or cancellation.
    pub accuracy_warning: bool,
}

/// Central finite-difference estimate of `D_I^j D_theta^k R` with one
/// Richardson extrapolation level.
///
/// Steps are relative in `I` and absolute in `theta`, widened by
/// `10^((j+k-2)/3)` for total order above two so the stencil amplitude stays
/// clear of the root-solve noise floor. `tau` is held fixed and should not
/// be an integer (the defect is not smooth in `tau` there).
pub fn fd_partial_r(
    sys: &System,
    i_energy: f64,
    theta: f64,
    tau: f64,
    j: u32,
    k: u32,
    fd: &FdOptions,
) -> Result<FdEstimate> {
    if j + k > 5 {
        return Err(Error::Domain(format!(
            "finite differences support total order <= 5, got j + k = {}",
            j + k
        )));
    }
    if j + k == 0 {
        let value = radius_defect(sys, i_energy, theta, tau)?;
        return Ok(FdEstimate {
            value,
            error_estimate: 0.0,
            accuracy_warning: false,
        });
    }
    let order = (j + k) as i32;
    let widen = 10.0f64.powf(((order - 2).max(0) as f64) / 3.0);
    let h_i = i_energy * fd.delta * widen;
    let h_th = fd.delta * widen;

    let coarse = fd_stencil(sys, i_energy, theta, tau, j, k, h_i, h_th)?;
    let fine = fd_stencil(sys, i_energy, theta, tau, j, k, 0.5 * h_i, 0.5 * h_th)?;
    let value = (4.0 * fine - coarse) / 3.0;
    let error_estimate = (fine - coarse).abs() / 3.0;
    let accuracy_warning = error_estimate > 0.1 * value.abs() + 1e-14;
    Ok(FdEstimate {
        value,
        error_estimate,
        accuracy_warning,
    })
}

/// Iterated central stencil: the tensor product of binomial differences in
/// each variable, `O(h^2)` accurate.
#[allow(clippy::too_many_arguments)]
fn fd_stencil(
    sys: &System,
    i_energy: f64,
    theta: f64,
    tau: f64,
    j: u32,
    k: u32,
    h_i: f64,
    h_th: f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for a in 0..=j {
        let wa = binomial(j, a) * if a % 2 == 0 { 1.0 } else { -1.0 };
        let di = (j as f64 / 2.0 - a as f64) * h_i;
        for b in 0..=k {
            let wb = binomial(k, b) * if b % 2 == 0 { 1.0 } else { -1.0 };
            let dth = (k as f64 / 2.0 - b as f64) * h_th;
            let r = radius_defect(sys, i_energy + di, theta + dth, tau)?;
            acc += wa * wb * r;
        }
    }
    Ok(acc / (h_i.powi(j as i32) * h_th.powi(k as i32)))
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}
