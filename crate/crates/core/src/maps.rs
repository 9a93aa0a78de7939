//! Poincaré/twist-map construction, perturbation extraction, rotation
//! numbers, scaling fits, and boundedness experiments.
//!
//! The annulus map under study advances the exchanged coordinates by one
//! unit of the new time `tau`, i.e. one barrier-to-barrier flight:
//!
//! ```text
//! upsilon_1 = upsilon_0 + f1(upsilon_0, theta_0)
//! theta_1   = theta_0 + twist_term(upsilon_0, eps) + f2(upsilon_0, theta_0)
//! ```
//!
//! Two backends realize it. PHYSICAL integrates the half-line system between
//! impacts and transforms the endpoints; it is the ground truth. DIRECT
//! integrates the scaled exchanged equations with finite-difference
//! derivatives of the radius defect on the right-hand side; it cross-checks
//! the whole transformation chain.

use crate::dynamics::{hamiltonian, PotentialSpec, System};
use crate::error::{Error, Result};
use crate::impact::{propagate, successor, Event, IntegratorOptions, PhaseState, StopCondition};
use crate::ode::{Dop853, OdeOptions};
use crate::transforms::{
    fd_partial_r, psi1_inv, psi2_inv, solve_rho, to_exchanged, FdOptions, ImpactCoords,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::TAU;

/// Which realization of the Poincaré map to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Impact-to-impact integration of the physical system, transformed.
    Physical,
    /// Integration of the scaled exchanged equations over one unit of `tau`,
    /// with finite-difference derivatives of the radius defect.
    Direct,
}

/// One evaluation of the scaled Poincaré map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TwistSample {
    pub upsilon0: f64,
    pub theta0: f64,
    pub epsilon: f64,
    pub upsilon1: f64,
    /// Lifted angle after one flight (not reduced mod 1).
    pub theta1: f64,
    pub f1: f64,
    pub f2: f64,
    pub twist_term: f64,
}

/// Shared configuration for map evaluations.
#[derive(Debug, Clone)]
pub struct MapContext<'a> {
    pub sys: &'a System,
    pub opts: IntegratorOptions,
    /// Smallest exchanged energy admitted; below it the implicit radius
    /// equation is not guaranteed solvable.
    pub i_min: f64,
    pub fd: FdOptions,
    /// Flight-time cap for the successor map, as a multiple of the
    /// unperturbed flight time at the same energy.
    pub escape_factor: f64,
}

impl<'a> MapContext<'a> {
    pub fn new(sys: &'a System) -> Self {
        Self {
            sys,
            opts: IntegratorOptions {
                rel_tol: 1e-12,
                abs_tol: 1e-13,
                ..Default::default()
            },
            i_min: 10.0,
            fd: FdOptions::default(),
            escape_factor: 10.0,
        }
    }
}

/// The integrable angle advance
/// `(1/(2 beta)) d^(-1/(2 beta)) eps^(1 - 1/(2 beta)) upsilon^(1/(2 beta) - 1)`.
///
/// Physically this is the unperturbed flight time between impacts at energy
/// `I = upsilon / eps`; since `1/(2 beta) - 1 < 0` it decreases in
/// `upsilon`, which is the twist condition.
pub fn twist_term(sys: &System, upsilon0: f64, epsilon: f64) -> f64 {
    let b2 = 2.0 * sys.consts.beta;
    let inv = 1.0 / b2;
    inv * sys.consts.d.powf(-inv) * epsilon.powf(1.0 - inv) * upsilon0.powf(inv - 1.0)
}

/// Unperturbed flight time between impacts at exchanged energy `I`
/// (the derivative of the unperturbed radius with respect to energy).
pub fn unperturbed_flight_time(sys: &System, i_energy: f64) -> f64 {
    let inv = 1.0 / (2.0 * sys.consts.beta);
    inv * sys.consts.d.powf(-inv) * i_energy.powf(inv - 1.0)
}

/// Outgoing impact state realizing `(I, theta)` at `tau = 0`.
///
/// The radius comes from the implicit equation (exact at integer `tau`,
/// where the perturbation vanishes); the impact locus fixes `x = 0` and the
/// outgoing speed follows from `I = v^2 / 2` on the barrier.
pub fn impact_state_for(sys: &System, i_energy: f64, theta: f64) -> Result<PhaseState> {
    let sol = solve_rho(sys, i_energy, theta, 0.0)?;
    let consts = &sys.consts;
    let n1 = sys.n() as f64 + 1.0;
    let v = (2.0 * consts.a * sol.rho).powf(consts.beta) / n1.sqrt();
    debug_assert!((v - (2.0 * i_energy).sqrt()).abs() <= 1e-9 * v);
    Ok(PhaseState::new(0.0, v, theta))
}

/// Evaluate the scaled Poincaré map once.
///
/// Preconditions: `upsilon0` in `[1, 2]`, `epsilon > 0`, and
/// `upsilon0 / epsilon >= ctx.i_min`.
pub fn exchanged_poincare(
    ctx: &MapContext,
    upsilon0: f64,
    theta0: f64,
    epsilon: f64,
    backend: Backend,
) -> Result<TwistSample> {
    if !(1.0..=2.0).contains(&upsilon0) {
        return Err(Error::Domain(format!(
            "upsilon0 = {upsilon0} outside the annulus [1, 2]"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon:e}"
        )));
    }
    let i0 = upsilon0 / epsilon;
    if i0 < ctx.i_min {
        return Err(Error::OutOfRegime(format!(
            "I = upsilon0/epsilon = {i0:e} below I_min = {:e}",
            ctx.i_min
        )));
    }
    let (upsilon1, theta1) = match backend {
        Backend::Physical => physical_map(ctx, i0, theta0, epsilon)?,
        Backend::Direct => direct_map(ctx, upsilon0, theta0, epsilon)?,
    };
    let tw = twist_term(ctx.sys, upsilon0, epsilon);
    Ok(TwistSample {
        upsilon0,
        theta0,
        epsilon,
        upsilon1,
        theta1,
        f1: upsilon1 - upsilon0,
        f2: theta1 - theta0 - tw,
        twist_term: tw,
    })
}

fn physical_map(ctx: &MapContext, i0: f64, theta0: f64, epsilon: f64) -> Result<(f64, f64)> {
    let sys = ctx.sys;
    let state = impact_state_for(sys, i0, theta0)?;
    let cap = ctx.escape_factor * unperturbed_flight_time(sys, i0);
    let (next, flight) = successor(&sys.spec, state, &ctx.opts, cap)?;
    // Transform the next impact state back through the chart pipeline; on
    // the barrier this reduces to I = v^2 / 2, which the charts reproduce.
    let aa = psi1_inv(sys, 0.0, next.v)?;
    let ic = psi2_inv(aa)?;
    let ec = to_exchanged(
        sys,
        ImpactCoords {
            rho: ic.rho,
            phi: 1.0,
        },
        next.t,
    )?;
    Ok((epsilon * ec.energy, theta0 + flight))
}

fn direct_map(ctx: &MapContext, upsilon0: f64, theta0: f64, epsilon: f64) -> Result<(f64, f64)> {
    let sys = ctx.sys;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let rhs = |tau: f64, y: &[f64; 2], dydt: &mut [f64; 2]| {
        if failure.borrow().is_some() {
            dydt[0] = 0.0;
            dydt[1] = 0.0;
            return;
        }
        let i_energy = y[0] / epsilon;
        let dth = fd_partial_r(sys, i_energy, y[1], tau, 0, 1, &ctx.fd);
        let di = fd_partial_r(sys, i_energy, y[1], tau, 1, 0, &ctx.fd);
        match (dth, di) {
            (Ok(dth), Ok(di)) => {
                dydt[0] = epsilon * dth.value;
                dydt[1] = unperturbed_flight_time(sys, i_energy) - di.value;
            }
            (a, b) => {
                *failure.borrow_mut() = Some(a.err().or(b.err()).unwrap());
                dydt[0] = 0.0;
                dydt[1] = 0.0;
            }
        }
    };
    let opts = OdeOptions {
        rtol: 1e-10,
        atol: 1e-12,
        dense: false,
        ..Default::default()
    };
    let mut solver = Dop853::new(&rhs, 0.0, [upsilon0, theta0], opts);
    solver.integrate_to(&rhs, 1.0)?;
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    let y = solver.y();
    Ok((y[0], y[1]))
}

/// Run both backends and fail if they disagree beyond `1e-4`; the physical
/// sample is returned on success together with the observed deviation.
pub fn exchanged_poincare_checked(
    ctx: &MapContext,
    upsilon0: f64,
    theta0: f64,
    epsilon: f64,
) -> Result<(TwistSample, f64)> {
    let phys = exchanged_poincare(ctx, upsilon0, theta0, epsilon, Backend::Physical)?;
    let direct = exchanged_poincare(ctx, upsilon0, theta0, epsilon, Backend::Direct)?;
    let dev = (phys.upsilon1 - direct.upsilon1)
        .abs()
        .max((phys.theta1 - direct.theta1).abs());
    if dev > 1e-4 {
        return Err(Error::BackendMismatch(format!(
            "physical vs direct deviation {dev:e} at (upsilon0, theta0, eps) = \
             ({upsilon0}, {theta0}, {epsilon:e})"
        )));
    }
    Ok((phys, dev))
}

/// Least-squares power-law fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Slope of `log |value|` against `log abscissa`.
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Decades spanned by the abscissa grid.
    pub decades: f64,
}

/// Fit `log y = exponent * log x + intercept` over `(x, y)` samples.
///
/// Requires at least 8 points spanning at least 3 decades in `x`, all with
/// positive `y`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 8 {
        return Err(Error::DegenerateGrid(format!(
            "power-law fit needs >= 8 points, got {}",
            points.len()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::DegenerateGrid(format!(
                "nonpositive sample ({x:e}, {y:e}) in power-law fit"
            )));
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let decades = (hi / lo).log10();
    if decades < 3.0 {
        return Err(Error::DegenerateGrid(format!(
            "abscissa grid spans {decades:.2} decades, need >= 3"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(ScalingFit {
        exponent,
        intercept,
        r_squared,
        points: points.len(),
        decades,
    })
}

/// `sup_(theta, tau) |D_I^j D_theta^k R|` per energy, for the decay-law fit.
pub fn r_decay_samples(
    sys: &System,
    energies: &[f64],
    j: u32,
    k: u32,
    thetas: &[f64],
    taus: &[f64],
    fd: &FdOptions,
) -> Result<Vec<(f64, f64)>> {
    energies
        .par_iter()
        .map(|&i_energy| {
            let mut sup = 0.0_f64;
            for &theta in thetas {
                for &tau in taus {
                    let est = fd_partial_r(sys, i_energy, theta, tau, j, k, fd)?;
                    sup = sup.max(est.value.abs());
                }
            }
            Ok((i_energy, sup))
        })
        .collect()
}

/// Which twist-map residual a scaling sweep measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualKind {
    F1,
    F2,
}

/// `sup_(upsilon0, theta0) |f|` per epsilon, from the physical backend.
pub fn residual_samples(
    ctx: &MapContext,
    epsilons: &[f64],
    upsilons: &[f64],
    thetas: &[f64],
    which: ResidualKind,
) -> Result<Vec<(f64, f64)>> {
    let grid: Vec<(f64, f64)> = upsilons
        .iter()
        .flat_map(|&u| thetas.iter().map(move |&th| (u, th)))
        .collect();
    epsilons
        .par_iter()
        .map(|&eps| {
            let sup = grid
                .par_iter()
                .map(|&(u, th)| {
                    let s = exchanged_poincare(ctx, u, th, eps, Backend::Physical)?;
                    Ok(match which {
                        ResidualKind::F1 => s.f1.abs(),
                        ResidualKind::F2 => s.f2.abs(),
                    })
                })
                .try_reduce(|| 0.0, |a: f64, b: f64| Ok(a.max(b)))?;
            Ok((eps, sup))
        })
        .collect()
}

/// Birkhoff rotation-number estimate from a lifted angle sequence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub value: f64,
    /// Difference between the full-sequence average and the last-quarter
    /// average.
    pub error_estimate: f64,
}

/// `(theta_N - theta_0) / N` on a continuous lift.
pub fn rotation_number(lift: &[f64]) -> Result<RotationEstimate> {
    if lift.len() < 8 {
        return Err(Error::DegenerateGrid(format!(
            "rotation number needs >= 8 lift samples, got {}",
            lift.len()
        )));
    }
    let n = lift.len() - 1;
    let value = (lift[n] - lift[0]) / n as f64;
    let q = n - n / 4;
    let tail = (lift[n] - lift[q]) / (n - q) as f64;
    Ok(RotationEstimate {
        value,
        error_estimate: (value - tail).abs(),
    })
}

/// One impact of a successor-map orbit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrbitPoint {
    /// Impact time (lift).
    pub t: f64,
    /// Impact time mod 1.
    pub theta: f64,
    /// Outgoing speed.
    pub speed: f64,
    /// Exchanged energy `v^2 / 2`.
    pub energy: f64,
    /// Flight time from the previous impact (zero for the initial point).
    pub flight: f64,
}

/// Iterate the successor map `iterates` times from `(I0, theta0)`.
///
/// Returns the collected impacts and, when the orbit escapes or integration
/// fails early, the error alongside the partial record.
pub fn successor_orbit(
    ctx: &MapContext,
    i0: f64,
    theta0: f64,
    iterates: usize,
) -> (Vec<OrbitPoint>, Option<Error>) {
    let mut points = Vec::with_capacity(iterates + 1);
    let state = match impact_state_for(ctx.sys, i0, theta0) {
        Ok(s) => s,
        Err(e) => return (points, Some(e)),
    };
    points.push(OrbitPoint {
        t: state.t,
        theta: state.t.rem_euclid(1.0),
        speed: state.v,
        energy: 0.5 * state.v * state.v,
        flight: 0.0,
    });
    let mut current = state;
    for _ in 0..iterates {
        let energy = 0.5 * current.v * current.v;
        let cap = ctx.escape_factor * unperturbed_flight_time(ctx.sys, energy);
        match successor(&ctx.sys.spec, current, &ctx.opts, cap) {
            Ok((next, flight)) => {
                points.push(OrbitPoint {
                    t: next.t,
                    theta: next.t.rem_euclid(1.0),
                    speed: next.v,
                    energy: 0.5 * next.v * next.v,
                    flight,
                });
                current = next;
            }
            Err(e) => return (points, Some(e)),
        }
    }
    (points, None)
}

/// Fourier graph fitted to successor-orbit points, with held-out validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircleFit {
    pub harmonics: usize,
    /// Max residual over the points used for the fit.
    pub fit_residual: f64,
    /// Max residual over the held-out points.
    pub validation_residual: f64,
    pub coefficients: Vec<f64>,
}

impl CircleFit {
    /// Evaluate the fitted graph at angle `theta`.
    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = self.coefficients[0];
        for m in 1..=self.harmonics {
            let arg = TAU * m as f64 * theta;
            v += self.coefficients[2 * m - 1] * arg.cos();
            v += self.coefficients[2 * m] * arg.sin();
        }
        v
    }
}

/// Fit `value = g(theta)` as a truncated Fourier graph on the first
/// `fit_count` points and validate on the remainder.
///
/// An orbit lying on an invariant circle of the successor map produces a
/// small validation residual; a chaotic or resonant orbit does not.
pub fn fit_invariant_circle(
    points: &[(f64, f64)],
    harmonics: usize,
    fit_count: usize,
) -> Result<CircleFit> {
    let cols = 2 * harmonics + 1;
    if fit_count < 2 * cols || points.len() <= fit_count {
        return Err(Error::DegenerateGrid(format!(
            "need > {fit_count} points with fit_count >= {} for {harmonics} harmonics",
            2 * cols
        )));
    }
    let rows = fit_count;
    let mut design = nalgebra::DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = nalgebra::DVector::<f64>::zeros(rows);
    for (r, &(theta, value)) in points[..fit_count].iter().enumerate() {
        design[(r, 0)] = 1.0;
        for m in 1..=harmonics {
            let arg = TAU * m as f64 * theta;
            design[(r, 2 * m - 1)] = arg.cos();
            design[(r, 2 * m)] = arg.sin();
        }
        rhs[r] = value;
    }
    let svd = design.svd(true, true);
    let solution = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::DegenerateGrid(format!("least squares failed: {e}")))?;
    let fit = CircleFit {
        harmonics,
        fit_residual: 0.0,
        validation_residual: 0.0,
        coefficients: solution.iter().copied().collect(),
    };
    let mut fit_residual = 0.0_f64;
    for &(theta, value) in &points[..fit_count] {
        fit_residual = fit_residual.max((value - fit.eval(theta)).abs());
    }
    let mut validation_residual = 0.0_f64;
    for &(theta, value) in &points[fit_count..] {
        validation_residual = validation_residual.max((value - fit.eval(theta)).abs());
    }
    Ok(CircleFit {
        fit_residual,
        validation_residual,
        ..fit
    })
}

/// Check the intersection-property proxy: map an embedded circle
/// `upsilon = g(theta)` and report whether its image crosses the original
/// graph (a sign change of `upsilon_image - g(theta_image)`).
pub fn circle_image_crosses(
    ctx: &MapContext,
    epsilon: f64,
    g: impl Fn(f64) -> f64,
    samples: usize,
) -> Result<bool> {
    let mut signs = Vec::with_capacity(samples);
    for m in 0..samples {
        let theta = m as f64 / samples as f64;
        let s = exchanged_poincare(ctx, g(theta), theta, epsilon, Backend::Physical)?;
        let defect = s.upsilon1 - g(s.theta1.rem_euclid(1.0));
        signs.push(defect);
    }
    Ok(signs.iter().any(|&d| d <= 0.0) && signs.iter().any(|&d| d >= 0.0))
}

/// Boundedness-sweep configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepOptions {
    pub horizon: f64,
    /// Checkpoint count; must be a positive multiple of 10 so that the
    /// `M(T) / M(T/10)` ratio lands on grid points.
    pub checkpoints: usize,
    /// Growth-ratio threshold above which an initial condition is flagged.
    pub ratio_threshold: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            horizon: 1e3,
            checkpoints: 10,
            ratio_threshold: 1.5,
        }
    }
}

/// Per-initial-condition sweep record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IcRecord {
    pub initial: PhaseState,
    pub checkpoint_times: Vec<f64>,
    /// Running `sup |x| + |v|` at each checkpoint.
    pub sup_amplitude: Vec<f64>,
    /// Hamiltonian at each checkpoint (the energy envelope).
    pub energy: Vec<f64>,
    /// Cumulative impact count at each checkpoint.
    pub impact_counts: Vec<u64>,
    /// `M(T) / M(T/10)`.
    pub ratio: f64,
    pub flagged: bool,
    pub error: Option<String>,
}

/// Integrate every initial condition to the horizon, recording amplitude
/// envelopes; failures are recorded per IC without aborting the sweep.
pub fn boundedness_sweep(
    spec: &PotentialSpec,
    ics: &[PhaseState],
    sweep: &SweepOptions,
    opts: &IntegratorOptions,
) -> Result<Vec<IcRecord>> {
    if sweep.checkpoints == 0 || !sweep.checkpoints.is_multiple_of(10) {
        return Err(Error::Domain(format!(
            "checkpoint count {} must be a positive multiple of 10",
            sweep.checkpoints
        )));
    }
    if !(sweep.horizon > 0.0) {
        return Err(Error::Domain("sweep horizon must be positive".into()));
    }
    Ok(ics
        .par_iter()
        .map(|&ic| sweep_one(spec, ic, sweep, opts))
        .collect())
}

fn sweep_one(
    spec: &PotentialSpec,
    ic: PhaseState,
    sweep: &SweepOptions,
    opts: &IntegratorOptions,
) -> IcRecord {
    let k = sweep.checkpoints;
    let checkpoint_times: Vec<f64> = (1..=k)
        .map(|i| ic.t + sweep.horizon * i as f64 / k as f64)
        .collect();
    let mut sup_amplitude = Vec::with_capacity(k);
    let mut energy = Vec::with_capacity(k);
    let mut impact_counts = Vec::with_capacity(k);
    let mut running_sup = ic.amplitude();
    let mut impacts: u64 = 0;
    let mut next_cp = 0usize;

    let result = propagate(
        spec,
        ic,
        StopCondition::AtTime(ic.t + sweep.horizon),
        opts,
        &mut |event| match event {
            Event::Segment { t0, t1, dense } => {
                for i in 1..=4 {
                    let t = t0 + (t1 - t0) * i as f64 / 4.0;
                    let y = dense(t);
                    running_sup = running_sup.max(y[0].abs() + y[1].abs());
                }
                while next_cp < k && checkpoint_times[next_cp] <= t1 {
                    let tc = checkpoint_times[next_cp];
                    let y = if tc >= t0 { dense(tc) } else { dense(t0) };
                    sup_amplitude.push(running_sup);
                    energy.push(hamiltonian(spec, y[0].max(0.0), y[1], tc));
                    impact_counts.push(impacts);
                    next_cp += 1;
                }
            }
            Event::Impact { speed, .. } => {
                impacts += 1;
                running_sup = running_sup.max(speed);
            }
        },
    );

    let error = result.err().map(|e| e.to_string());
    // Pad checkpoints not reached (on error) with the last observed values.
    while sup_amplitude.len() < k {
        sup_amplitude.push(running_sup);
        energy.push(f64::NAN);
        impact_counts.push(impacts);
    }
    let m_t10 = sup_amplitude[k / 10 - 1];
    let m_t = sup_amplitude[k - 1];
    let ratio = m_t / m_t10;
    IcRecord {
        initial: ic,
        checkpoint_times,
        sup_amplitude,
        energy,
        impact_counts,
        ratio,
        flagged: ratio > sweep.ratio_threshold || error.is_some(),
        error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FourierSeries;
    use std::sync::OnceLock;

    fn sys_test() -> &'static System {
        static SYS: OnceLock<System> = OnceLock::new();
        SYS.get_or_init(|| {
            let spec = PotentialSpec::new(
                1,
                vec![
                    FourierSeries::harmonic(0.15, 0.1),
                    FourierSeries::harmonic(0.1, 0.0),
                    FourierSeries::harmonic(0.05, 0.03),
                ],
            )
            .unwrap();
            System::new(spec, 1024, 1e-9).unwrap()
        })
    }

    fn sys_free() -> &'static System {
        static SYS: OnceLock<System> = OnceLock::new();
        SYS.get_or_init(|| System::new(PotentialSpec::unperturbed(1), 1024, 1e-9).unwrap())
    }

    #[test]
    fn twist_term_closed_form_n1() {
        // For n = 1, beta = 2/3: (3/4) d^(-3/4) eps^(1/4) upsilon^(-1/4).
        let sys = sys_free();
        let d = sys.consts.d;
        for (u, e) in [(1.0f64, 1e-3f64), (1.7, 2e-4)] {
            let expected = 0.75 * d.powf(-0.75) * e.powf(0.25) * u.powf(-0.25);
            let got = twist_term(sys, u, e);
            assert!((got - expected).abs() < 1e-14 * expected);
        }
    }

    #[test]
    fn twist_term_monotone_decreasing_in_upsilon() {
        let sys = sys_free();
        let eps = 1e-3;
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let u = 1.0 + 0.1 * k as f64;
            let tw = twist_term(sys, u, eps);
            assert!(tw < prev);
            prev = tw;
        }
    }

    #[test]
    fn unperturbed_map_reproduces_twist_term_exactly() {
        let sys = sys_free();
        let ctx = MapContext::new(sys);
        let s = exchanged_poincare(&ctx, 1.3, 0.2, 1e-3, Backend::Physical).unwrap();
        assert!(s.f1.abs() < 1e-10, "f1 = {:e}", s.f1);
        assert!(s.f2.abs() < 1e-8, "f2 = {:e}", s.f2);
        // The angle advance is the physical flight time.
        let flight_oracle = {
            // T0 * c^(-n) / 2 at amplitude c = ((2n+2) I)^(1/(2n+2)).
            let i0 = 1.3 / 1e-3;
            let c = (4.0f64 * i0).powf(0.25);
            sys.table.period() / (2.0 * c)
        };
        assert!(
            (s.theta1 - s.theta0 - flight_oracle).abs() < 1e-8,
            "flight {:e} vs oracle {flight_oracle:e}",
            s.theta1 - s.theta0
        );
    }

    #[test]
    fn physical_and_direct_backends_agree() {
        let sys = sys_test();
        let ctx = MapContext::new(sys);
        let (sample, dev) = exchanged_poincare_checked(&ctx, 1.5, 0.35, 1e-3).unwrap();
        assert!(dev < 1e-6, "backend deviation {dev:e}");
        assert!(sample.f1.abs() < 0.5);
    }

    #[test]
    fn residuals_periodic_in_theta() {
        let sys = sys_test();
        let ctx = MapContext::new(sys);
        let a = exchanged_poincare(&ctx, 1.2, 0.25, 1e-3, Backend::Physical).unwrap();
        let b = exchanged_poincare(&ctx, 1.2, 1.25, 1e-3, Backend::Physical).unwrap();
        assert!((a.f1 - b.f1).abs() < 1e-8);
        assert!((a.f2 - b.f2).abs() < 1e-8);
    }

    #[test]
    fn out_of_regime_and_domain_errors() {
        let sys = sys_test();
        let ctx = MapContext::new(sys);
        assert!(matches!(
            exchanged_poincare(&ctx, 1.0, 0.0, 0.5, Backend::Physical),
            Err(Error::OutOfRegime(_))
        ));
        assert!(exchanged_poincare(&ctx, 2.5, 0.0, 1e-3, Backend::Physical).is_err());
    }

    #[test]
    fn fit_scaling_recovers_exact_power_law() {
        let points: Vec<(f64, f64)> = (0..10)
            .map(|k| {
                let x = 10f64.powf(-5.0 + 0.4 * k as f64);
                (x, 3.0 * x.sqrt())
            })
            .collect();
        let fit = fit_scaling(&points).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_scaling_rejects_degenerate_grids() {
        let few: Vec<(f64, f64)> = (0..5).map(|k| (10f64.powi(k), 1.0)).collect();
        assert!(fit_scaling(&few).is_err());
        let narrow: Vec<(f64, f64)> = (0..10).map(|k| (1.0 + k as f64, 1.0)).collect();
        assert!(fit_scaling(&narrow).is_err());
    }

    #[test]
    fn rotation_number_of_rigid_rotation() {
        let omega = 0.381_966_011_250_105;
        let lift: Vec<f64> = (0..=1000).map(|k| 0.2 + omega * k as f64).collect();
        let est = rotation_number(&lift).unwrap();
        assert!((est.value - omega).abs() < 1e-12);
        assert!(est.error_estimate < 1e-12);
    }

    #[test]
    fn rotation_number_of_unperturbed_twist_map() {
        let sys = sys_free();
        let ctx = MapContext::new(sys);
        let (u0, eps) = (1.4f64, 1e-3f64);
        let i0 = u0 / eps;
        let (orbit, err) = successor_orbit(&ctx, i0, 0.0, 1000);
        assert!(err.is_none(), "{err:?}");
        let lift: Vec<f64> = orbit.iter().map(|p| p.t).collect();
        let est = rotation_number(&lift).unwrap();
        let expected = twist_term(sys, u0, eps);
        assert!(
            (est.value - expected).abs() < 1e-9,
            "rotation {:e} vs twist {:e}",
            est.value,
            expected
        );
    }

    #[test]
    fn invariant_circle_fit_on_integrable_orbit() {
        // Unperturbed orbits live on exact circles I = const; the fitted
        // graph is flat and validation residuals vanish.
        let sys = sys_free();
        let ctx = MapContext::new(sys);
        let (orbit, err) = successor_orbit(&ctx, 1500.0, 0.1, 400);
        assert!(err.is_none());
        let points: Vec<(f64, f64)> = orbit.iter().map(|p| (p.theta, p.energy / 1500.0)).collect();
        let fit = fit_invariant_circle(&points, 6, 200).unwrap();
        assert!(
            fit.validation_residual < 1e-9,
            "residual {:e}",
            fit.validation_residual
        );
    }

    #[test]
    fn intersection_property_proxy_holds() {
        let sys = sys_test();
        let ctx = MapContext::new(sys);
        let g = |theta: f64| 1.5 + 0.3 * (TAU * theta).sin();
        assert!(circle_image_crosses(&ctx, 1e-3, g, 24).unwrap());
    }

    #[test]
    fn successor_map_preserves_area_in_time_energy_chart() {
        // On the impact section the canonical pair is (impact time, energy):
        // the exchanged flow is Hamiltonian in tau, so the section-to-section
        // map has unit Jacobian. The folded angle itself is frozen at
        // integers on the section, so (theta, E) is the nondegenerate chart.
        let sys = sys_test();
        let ctx = MapContext::new(sys);
        let map = |t0: f64, e0: f64| {
            let state = PhaseState::new(0.0, (2.0 * e0).sqrt(), t0);
            let cap = ctx.escape_factor * unperturbed_flight_time(sys, e0);
            let (next, _) = successor(&sys.spec, state, &ctx.opts, cap).unwrap();
            (next.t, 0.5 * next.v * next.v)
        };
        for (t0, e0) in [(0.2, 500.0), (0.7, 2000.0)] {
            let (ht, he) = (1e-6, 1e-5 * e0);
            let (tp, ep) = map(t0 + ht, e0);
            let (tm, em) = map(t0 - ht, e0);
            let (tq, eq) = map(t0, e0 + he);
            let (tr, er) = map(t0, e0 - he);
            let det = ((tp - tm) / (2.0 * ht)) * ((eq - er) / (2.0 * he))
                - ((tq - tr) / (2.0 * he)) * ((ep - em) / (2.0 * ht));
            assert!(
                (det.abs() - 1.0).abs() < 1e-5,
                "|det| = {:e} at (t0, E0) = ({t0}, {e0})",
                det.abs()
            );
        }
    }

    #[test]
    fn sweep_unperturbed_amplitude_constant() {
        let spec = PotentialSpec::unperturbed(1);
        let ics = vec![
            PhaseState::new(1.0, 0.0, 0.0),
            PhaseState::new(2.0, 1.0, 0.0),
        ];
        let records = boundedness_sweep(
            &spec,
            &ics,
            &SweepOptions {
                horizon: 50.0,
                ..Default::default()
            },
            &IntegratorOptions::default(),
        )
        .unwrap();
        for rec in &records {
            assert!(rec.error.is_none());
            assert!(!rec.flagged, "ratio {}", rec.ratio);
            assert!((rec.ratio - 1.0).abs() < 1e-6);
            assert!(rec.impact_counts.last().unwrap() > &0);
        }
    }

    #[test]
    fn sweep_records_errors_without_aborting() {
        let spec = PotentialSpec::unperturbed(1);
        let ics = vec![
            PhaseState::new(1.0, 0.0, 0.0),
            PhaseState::new(0.0, 1e-14, 0.0), // degenerate contact
        ];
        let records = boundedness_sweep(
            &spec,
            &ics,
            &SweepOptions {
                horizon: 10.0,
                ..Default::default()
            },
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert!(records[0].error.is_none());
        assert!(records[1].error.is_some());
        assert!(records[1].flagged);
    }
}
