//! Experiment configuration: a single JSON document holding the potential,
//! integrator settings, and one experiment description.

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the
// out-of-domain sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use impactor::dynamics::{FourierSeries, PotentialSpec};
use impactor::impact::IntegratorOptions;
use impactor::maps::Backend;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub potential: PotentialConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub table: TableConfig,
    /// Admit the harmonic validation case `n = 0`, which is outside the
    /// degree range the analysis covers.
    #[serde(default)]
    pub allow_harmonic_n0: bool,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub n: u32,
    /// Exactly `2n + 1` Fourier series, lowest degree first.
    pub coeffs: Vec<FourierSeries>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub event_tol: f64,
    pub max_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-12,
            event_tol: 1e-12,
            max_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn options(&self) -> IntegratorOptions {
        IntegratorOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            event_tol: self.event_tol,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableConfig {
    pub nodes: usize,
    pub tol: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            nodes: 1024,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Tabulate the generalized trig pair and report conservation defects
    /// and the two period routes.
    GentrigCheck,
    /// Integrate one orbit and dump the sampled trace.
    Orbit {
        /// `[x, v, t]`.
        initial: [f64; 3],
        t_end: f64,
        #[serde(default)]
        sample_dt: Option<f64>,
    },
    /// Iterate the successor map from an outgoing impact state.
    Successor {
        initial_energy: f64,
        #[serde(default)]
        theta0: f64,
        iterates: usize,
    },
    /// Evaluate the scaled Poincaré map on a grid.
    Poincare {
        epsilons: Vec<f64>,
        upsilon0s: Vec<f64>,
        theta0s: Vec<f64>,
        #[serde(default = "default_backends")]
        backends: Vec<Backend>,
    },
    /// Measure a decay law and fit its exponent.
    Scaling {
        which: ScalingWhich,
        /// Epsilon grid for the residual laws.
        #[serde(default)]
        epsilons: Vec<f64>,
        /// Energy grid for the radius-defect law.
        #[serde(default)]
        energies: Vec<f64>,
        #[serde(default)]
        j: u32,
        #[serde(default)]
        k: u32,
        #[serde(default = "default_upsilons")]
        upsilon0s: Vec<f64>,
        #[serde(default = "default_thetas")]
        theta0s: Vec<f64>,
        #[serde(default = "default_taus")]
        taus: Vec<f64>,
    },
    /// Long-horizon boundedness sweep over initial conditions.
    Sweep {
        /// Turning-point initial conditions at these unperturbed energies.
        #[serde(default)]
        ic_energies: Vec<f64>,
        /// Additional randomly sampled initial conditions (seeded).
        #[serde(default)]
        random_ics: Option<RandomIcs>,
        horizon: f64,
        #[serde(default = "default_ratio_threshold")]
        ratio_threshold: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingWhich {
    RDecay,
    F1,
    F2,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomIcs {
    pub count: usize,
    pub energy_min: f64,
    pub energy_max: f64,
}

fn default_backends() -> Vec<Backend> {
    vec![Backend::Physical, Backend::Direct]
}

fn default_upsilons() -> Vec<f64> {
    vec![1.0, 1.5, 2.0]
}

fn default_thetas() -> Vec<f64> {
    vec![0.1, 0.35, 0.6, 0.85]
}

fn default_taus() -> Vec<f64> {
    vec![0.13, 0.37, 0.61]
}

fn default_ratio_threshold() -> f64 {
    1.5
}

impl ExperimentConfig {
    /// Check every invariant that can be checked without running; returns
    /// a list of human-readable violations (empty when well-formed).
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.potential.n == 0 && !self.allow_harmonic_n0 {
            v.push(
                "potential.n = 0 is the harmonic validation case; set allow_harmonic_n0 = true"
                    .to_string(),
            );
        }
        let expected = 2 * self.potential.n as usize + 1;
        if self.potential.coeffs.len() != expected {
            v.push(format!(
                "potential.coeffs must hold {expected} series for n = {}, found {}",
                self.potential.n,
                self.potential.coeffs.len()
            ));
        }
        if self.potential.coeffs.len() == expected {
            if let Err(e) = PotentialSpec::new(self.potential.n, self.potential.coeffs.clone()) {
                v.push(format!("potential is malformed: {e}"));
            }
        }
        for (name, value) in [
            ("integrator.rel_tol", self.integrator.rel_tol),
            ("integrator.abs_tol", self.integrator.abs_tol),
            ("integrator.event_tol", self.integrator.event_tol),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                v.push(format!("{name} must be positive and finite, got {value:e}"));
            }
        }
        if let Some(ms) = self.integrator.max_step {
            if !(ms > 0.0) {
                v.push(format!("integrator.max_step must be positive, got {ms:e}"));
            }
        }
        if self.table.nodes < 256 {
            v.push(format!(
                "table.nodes must be >= 256, got {}",
                self.table.nodes
            ));
        }
        if !(self.table.tol > 0.0) {
            v.push(format!(
                "table.tol must be positive, got {:e}",
                self.table.tol
            ));
        }
        self.validate_experiment(&mut v);
        v
    }

    fn validate_experiment(&self, v: &mut Vec<String>) {
        match &self.experiment {
            Experiment::GentrigCheck => {}
            Experiment::Orbit {
                initial,
                t_end,
                sample_dt,
            } => {
                let [x, vel, t] = initial;
                if *x < 0.0 {
                    v.push(format!("orbit initial position {x} below the barrier"));
                }
                if *x == 0.0 && *vel <= 0.0 {
                    v.push("orbit initial state on the barrier needs outgoing velocity".into());
                }
                if t_end <= t {
                    v.push(format!("orbit t_end {t_end} not after start time {t}"));
                }
                if let Some(dt) = sample_dt {
                    if !(*dt > 0.0) {
                        v.push(format!("orbit sample_dt must be positive, got {dt}"));
                    }
                }
            }
            Experiment::Successor {
                initial_energy,
                iterates,
                ..
            } => {
                if !(*initial_energy > 0.0) {
                    v.push(format!(
                        "successor initial_energy must be positive, got {initial_energy}"
                    ));
                }
                if *iterates == 0 {
                    v.push("successor iterates must be at least 1".into());
                }
            }
            Experiment::Poincare {
                epsilons,
                upsilon0s,
                theta0s,
                backends,
            } => {
                if epsilons.is_empty() {
                    v.push("poincare epsilon grid is empty".into());
                }
                if upsilon0s.is_empty() {
                    v.push("poincare upsilon0 grid is empty".into());
                }
                if theta0s.is_empty() {
                    v.push("poincare theta0 grid is empty".into());
                }
                if backends.is_empty() {
                    v.push("poincare backend list is empty".into());
                }
                for &e in epsilons {
                    if !(e > 0.0) {
                        v.push(format!("poincare epsilon {e} must be positive"));
                    }
                }
                for &u in upsilon0s {
                    if !(1.0..=2.0).contains(&u) {
                        v.push(format!("poincare upsilon0 {u} outside [1, 2]"));
                    }
                }
            }
            Experiment::Scaling {
                which,
                epsilons,
                energies,
                j,
                k,
                upsilon0s,
                theta0s,
                taus,
            } => match which {
                ScalingWhich::RDecay => {
                    if energies.is_empty() {
                        v.push("scaling r-decay needs a non-empty energy grid".into());
                    }
                    if j + k > 5 {
                        v.push(format!(
                            "scaling derivative order j + k = {} exceeds 5",
                            j + k
                        ));
                    }
                    if taus.is_empty() || theta0s.is_empty() {
                        v.push("scaling r-decay needs theta and tau sample grids".into());
                    }
                }
                ScalingWhich::F1 | ScalingWhich::F2 => {
                    if epsilons.is_empty() {
                        v.push("scaling residual laws need a non-empty epsilon grid".into());
                    }
                    if upsilon0s.is_empty() || theta0s.is_empty() {
                        v.push("scaling residual laws need upsilon0 and theta0 grids".into());
                    }
                }
            },
            Experiment::Sweep {
                ic_energies,
                random_ics,
                horizon,
                ratio_threshold,
            } => {
                let random_count = random_ics.map_or(0, |r| r.count);
                if ic_energies.is_empty() && random_count == 0 {
                    v.push("sweep needs ic_energies or random_ics".into());
                }
                if let Some(r) = random_ics {
                    if !(r.energy_min > 0.0 && r.energy_max > r.energy_min) {
                        v.push(format!(
                            "sweep random_ics energy range [{}, {}] is invalid",
                            r.energy_min, r.energy_max
                        ));
                    }
                }
                if !(*horizon > 0.0) {
                    v.push(format!("sweep horizon {horizon} must be positive"));
                }
                if !(*ratio_threshold > 0.0) {
                    v.push(format!(
                        "sweep ratio_threshold {ratio_threshold} must be positive"
                    ));
                }
            }
        }
    }

    pub fn spec(&self) -> anyhow::Result<PotentialSpec> {
        Ok(PotentialSpec::new(
            self.potential.n,
            self.potential.coeffs.clone(),
        )?)
    }
}
