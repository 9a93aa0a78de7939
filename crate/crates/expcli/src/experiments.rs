//! Experiment dispatch: each experiment produces a deterministic set of
//! named artifacts (CSV data, SVG plots) plus summary lines for the console.
//!
//! Determinism contract: all floating-point values are written in Rust's
//! shortest round-trip decimal form, samples are computed independently and
//! aggregated in input order, and no wall-clock data enters the artifacts.
//! Identical configs therefore reproduce identical bytes regardless of the
//! worker-pool size.

use crate::config::{Experiment, ExperimentConfig, ScalingWhich};
use crate::svg::Plot;
use anyhow::{bail, Context, Result};
use impactor::dynamics::System;
use impactor::gentrig::period_routes;
use impactor::impact::{integrate, trace_to_csv, IntegratorOptions, PhaseState};
use impactor::maps::{
    boundedness_sweep, exchanged_poincare, fit_scaling, r_decay_samples, residual_samples,
    successor_orbit, Backend, MapContext, ResidualKind, ScalingFit, SweepOptions,
};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

/// A named output file.
pub struct Artifact {
    pub name: String,
    pub content: String,
}

pub struct RunOutcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Vec<String>,
}

pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    let spec = config.spec()?;
    let sys = System::new(spec, config.table.nodes, config.table.tol)
        .context("building the generalized trig table")?;
    let opts = config.integrator.options();
    match &config.experiment {
        Experiment::GentrigCheck => gentrig_check(&sys),
        Experiment::Orbit {
            initial,
            t_end,
            sample_dt,
        } => orbit(&sys, &opts, *initial, *t_end, *sample_dt),
        Experiment::Successor {
            initial_energy,
            theta0,
            iterates,
        } => successor_experiment(&sys, &opts, *initial_energy, *theta0, *iterates),
        Experiment::Poincare {
            epsilons,
            upsilon0s,
            theta0s,
            backends,
        } => poincare(&sys, &opts, epsilons, upsilon0s, theta0s, backends),
        Experiment::Scaling {
            which,
            epsilons,
            energies,
            j,
            k,
            upsilon0s,
            theta0s,
            taus,
        } => scaling(
            &sys, &opts, *which, epsilons, energies, *j, *k, upsilon0s, theta0s, taus,
        ),
        Experiment::Sweep {
            ic_energies,
            random_ics,
            horizon,
            ratio_threshold,
        } => sweep(
            &sys,
            &opts,
            ic_energies,
            *random_ics,
            *horizon,
            *ratio_threshold,
            seed,
        ),
    }
}

fn gentrig_check(sys: &System) -> Result<RunOutcome> {
    let table = &sys.table;
    let n = sys.n();
    let (quad, event) = period_routes(n)?;
    let mut max_defect = 0.0_f64;
    for j in 0..=table.node_count() {
        let (_, _, _, defect) = table.node(j);
        max_defect = max_defect.max(defect.abs());
    }
    let (c_quarter, _) = table.eval(table.period() / 4.0);

    let mut summary_csv = String::from(
        "n,t0_quadrature,t0_first_return,route_difference,max_node_defect,c_quarter\n",
    );
    writeln!(
        summary_csv,
        "{n},{quad},{event},{},{max_defect},{c_quarter}",
        (quad - event).abs()
    )?;

    let curve: Vec<(f64, f64)> = (0..=720)
        .map(|k| table.eval(k as f64 * table.period() / 720.0))
        .collect();
    let svg = Plot::new(&format!("Generalized trig orbit, n = {n}"), "C", "S")
        .line("(C, S) over one period", curve)
        .render();

    Ok(RunOutcome {
        artifacts: vec![
            Artifact {
                name: "gentrig_nodes.csv".into(),
                content: table.to_csv(),
            },
            Artifact {
                name: "gentrig_summary.csv".into(),
                content: summary_csv,
            },
            Artifact {
                name: "gentrig_orbit.svg".into(),
                content: svg,
            },
        ],
        summary: vec![
            format!("period: quadrature {quad:.15} vs first return {event:.15}"),
            format!("max node defect {max_defect:.3e}, C(T0/4) = {c_quarter:.3e}"),
        ],
    })
}

fn orbit(
    sys: &System,
    opts: &IntegratorOptions,
    initial: [f64; 3],
    t_end: f64,
    sample_dt: Option<f64>,
) -> Result<RunOutcome> {
    let [x, v, t] = initial;
    let opts = IntegratorOptions {
        sample_dt: Some(sample_dt.unwrap_or((t_end - t) / 2000.0)),
        ..*opts
    };
    let trace = integrate(&sys.spec, PhaseState::new(x, v, t), t_end, &opts)?;
    let portrait: Vec<(f64, f64)> = trace.samples.iter().map(|s| (s.x, s.v)).collect();
    let svg = Plot::new("Phase portrait", "x", "v")
        .line("orbit", portrait)
        .render();
    let summary = vec![
        format!(
            "{} impacts over [{t}, {t_end}], sup |x|+|v| = {:.6}",
            trace.impacts.len(),
            trace.diagnostics.max_amplitude
        ),
        match trace.diagnostics.energy_drift {
            Some(d) => format!("unperturbed energy drift {d:.3e}"),
            None => "perturbed potential: energy not conserved".into(),
        },
    ];
    Ok(RunOutcome {
        artifacts: vec![
            Artifact {
                name: "orbit.csv".into(),
                content: trace_to_csv(&trace),
            },
            Artifact {
                name: "phase_portrait.svg".into(),
                content: svg,
            },
        ],
        summary,
    })
}

fn successor_experiment(
    sys: &System,
    opts: &IntegratorOptions,
    initial_energy: f64,
    theta0: f64,
    iterates: usize,
) -> Result<RunOutcome> {
    let ctx = MapContext {
        opts: *opts,
        ..MapContext::new(sys)
    };
    let (orbit, err) = successor_orbit(&ctx, initial_energy, theta0, iterates);
    let mut csv = String::from("iterate,t,theta,speed,energy,flight\n");
    for (i, p) in orbit.iter().enumerate() {
        writeln!(
            csv,
            "{i},{},{},{},{},{}",
            p.t, p.theta, p.speed, p.energy, p.flight
        )?;
    }
    let section: Vec<(f64, f64)> = orbit.iter().map(|p| (p.theta, p.energy)).collect();
    let svg = Plot::new("Successor-map section", "impact time mod 1", "energy")
        .scatter("orbit", section)
        .render();
    let mut summary = vec![format!(
        "{} impacts collected from I0 = {initial_energy}, theta0 = {theta0}",
        orbit.len() - 1
    )];
    if let Some(e) = err {
        summary.push(format!("orbit terminated early: {e}"));
    }
    Ok(RunOutcome {
        artifacts: vec![
            Artifact {
                name: "successor.csv".into(),
                content: csv,
            },
            Artifact {
                name: "successor_section.svg".into(),
                content: svg,
            },
        ],
        summary,
    })
}

fn poincare(
    sys: &System,
    opts: &IntegratorOptions,
    epsilons: &[f64],
    upsilon0s: &[f64],
    theta0s: &[f64],
    backends: &[Backend],
) -> Result<RunOutcome> {
    let ctx = MapContext {
        opts: *opts,
        ..MapContext::new(sys)
    };
    let grid: Vec<(f64, f64, f64, Backend)> = epsilons
        .iter()
        .flat_map(|&e| {
            upsilon0s.iter().flat_map(move |&u| {
                theta0s
                    .iter()
                    .flat_map(move |&th| backends.iter().map(move |&b| (e, u, th, b)))
            })
        })
        .collect();
    let rows: Vec<_> = grid
        .par_iter()
        .map(|&(eps, u0, th0, backend)| {
            let s = exchanged_poincare(&ctx, u0, th0, eps, backend)?;
            Ok((backend, s))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv =
        String::from("epsilon,upsilon0,theta0,backend,upsilon1,theta1,f1,f2,twist_term\n");
    for (backend, s) in &rows {
        let b = match backend {
            Backend::Physical => "physical",
            Backend::Direct => "direct",
        };
        writeln!(
            csv,
            "{},{},{},{b},{},{},{},{},{}",
            s.epsilon, s.upsilon0, s.theta0, s.upsilon1, s.theta1, s.f1, s.f2, s.twist_term
        )?;
    }
    let image: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(b, _)| *b == Backend::Physical || backends == [Backend::Direct])
        .map(|(_, s)| (s.theta1.rem_euclid(1.0), s.upsilon1))
        .collect();
    let svg = Plot::new("Poincare-map image", "theta1 mod 1", "upsilon1")
        .scatter("mapped grid", image)
        .render();
    let max_f1 = rows.iter().map(|(_, s)| s.f1.abs()).fold(0.0, f64::max);
    let max_f2 = rows.iter().map(|(_, s)| s.f2.abs()).fold(0.0, f64::max);
    Ok(RunOutcome {
        artifacts: vec![
            Artifact {
                name: "poincare.csv".into(),
                content: csv,
            },
            Artifact {
                name: "poincare_image.svg".into(),
                content: svg,
            },
        ],
        summary: vec![format!(
            "{} map evaluations; sup |f1| = {max_f1:.3e}, sup |f2| = {max_f2:.3e}",
            rows.len()
        )],
    })
}

#[allow(clippy::too_many_arguments)]
fn scaling(
    sys: &System,
    opts: &IntegratorOptions,
    which: ScalingWhich,
    epsilons: &[f64],
    energies: &[f64],
    j: u32,
    k: u32,
    upsilon0s: &[f64],
    theta0s: &[f64],
    taus: &[f64],
) -> Result<RunOutcome> {
    let ctx = MapContext {
        opts: *opts,
        ..MapContext::new(sys)
    };
    let (label, abscissa_name, samples): (String, &str, Vec<(f64, f64)>) = match which {
        ScalingWhich::RDecay => (
            format!("|D_I^{j} D_theta^{k} R|"),
            "I",
            r_decay_samples(sys, energies, j, k, theta0s, taus, &ctx.fd)?,
        ),
        ScalingWhich::F1 => (
            "sup |f1|".into(),
            "epsilon",
            residual_samples(&ctx, epsilons, upsilon0s, theta0s, ResidualKind::F1)?,
        ),
        ScalingWhich::F2 => (
            "sup |f2|".into(),
            "epsilon",
            residual_samples(&ctx, epsilons, upsilon0s, theta0s, ResidualKind::F2)?,
        ),
    };
    let fit: ScalingFit = fit_scaling(&samples)?;

    let mut samples_csv = format!("{abscissa_name},value\n");
    for (x, y) in &samples {
        writeln!(samples_csv, "{x},{y}")?;
    }
    let mut fit_csv = String::from("which,j,k,slope,intercept,r_squared,points,decades\n");
    let which_name = match which {
        ScalingWhich::RDecay => "r-decay",
        ScalingWhich::F1 => "f1",
        ScalingWhich::F2 => "f2",
    };
    writeln!(
        fit_csv,
        "{which_name},{j},{k},{},{},{},{},{}",
        fit.exponent, fit.intercept, fit.r_squared, fit.points, fit.decades
    )?;

    let fit_line: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(x, _)| (x, (fit.intercept + fit.exponent * x.ln()).exp()))
        .collect();
    let svg = Plot::new(
        &format!("{label} vs {abscissa_name} (slope {:.3})", fit.exponent),
        abscissa_name,
        &label,
    )
    .log_log()
    .scatter("measured", samples.clone())
    .line("power-law fit", fit_line)
    .render();

    Ok(RunOutcome {
        artifacts: vec![
            Artifact {
                name: "scaling_samples.csv".into(),
                content: samples_csv,
            },
            Artifact {
                name: "scaling_fit.csv".into(),
                content: fit_csv,
            },
            Artifact {
                name: "scaling.svg".into(),
                content: svg,
            },
        ],
        summary: vec![format!(
            "{label}: slope {:.4}, r^2 {:.5} over {} points spanning {:.2} decades",
            fit.exponent, fit.r_squared, fit.points, fit.decades
        )],
    })
}

fn sweep(
    sys: &System,
    opts: &IntegratorOptions,
    ic_energies: &[f64],
    random_ics: Option<crate::config::RandomIcs>,
    horizon: f64,
    ratio_threshold: f64,
    seed: u64,
) -> Result<RunOutcome> {
    let n = sys.n();
    let amplitude_for = |e: f64| ((2.0 * n as f64 + 2.0) * e).powf(1.0 / (2.0 * n as f64 + 2.0));
    let mut ics: Vec<PhaseState> = ic_energies
        .iter()
        .map(|&e| PhaseState::new(amplitude_for(e), 0.0, 0.0))
        .collect();
    if let Some(r) = random_ics {
        // Seeded sampling: log-uniform energy, uniform start phase.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log_e = Uniform::new(r.energy_min.ln(), r.energy_max.ln());
        let phase = Uniform::new(0.0, 1.0);
        for _ in 0..r.count {
            let e = log_e.sample(&mut rng).exp();
            let t0 = phase.sample(&mut rng);
            ics.push(PhaseState::new(amplitude_for(e), 0.0, t0));
        }
    }
    if ics.is_empty() {
        bail!("sweep produced no initial conditions");
    }
    let sweep_opts = SweepOptions {
        horizon,
        ratio_threshold,
        ..Default::default()
    };
    let records = boundedness_sweep(&sys.spec, &ics, &sweep_opts, opts)?;

    let mut csv = String::from("ic_index,x0,v0,t0,m_t10,m_t,ratio,impacts,flagged,error\n");
    let mut envelope = String::from("ic_index,t,sup_amplitude,energy,impacts\n");
    let mut flagged = 0usize;
    for (i, rec) in records.iter().enumerate() {
        let k = rec.sup_amplitude.len();
        writeln!(
            csv,
            "{i},{},{},{},{},{},{},{},{},{}",
            rec.initial.x,
            rec.initial.v,
            rec.initial.t,
            rec.sup_amplitude[k / 10 - 1],
            rec.sup_amplitude[k - 1],
            rec.ratio,
            rec.impact_counts[k - 1],
            rec.flagged,
            rec.error.as_deref().unwrap_or("")
        )?;
        for (j, &t) in rec.checkpoint_times.iter().enumerate() {
            writeln!(
                envelope,
                "{i},{t},{},{},{}",
                rec.sup_amplitude[j], rec.energy[j], rec.impact_counts[j]
            )?;
        }
        if rec.flagged {
            flagged += 1;
        }
    }

    let mut plot = Plot::new("Amplitude envelopes", "t", "sup |x| + |v|");
    for (i, rec) in records.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rec
            .checkpoint_times
            .iter()
            .zip(&rec.sup_amplitude)
            .map(|(&t, &m)| (t, m))
            .collect();
        plot = plot.line(&format!("IC {i}"), pts);
    }
    let worst = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(RunOutcome {
        artifacts: vec![
            Artifact {
                name: "sweep.csv".into(),
                content: csv,
            },
            Artifact {
                name: "sweep_envelope.csv".into(),
                content: envelope,
            },
            Artifact {
                name: "sweep.svg".into(),
                content: plot.render(),
            },
        ],
        summary: vec![format!(
            "{} initial conditions to horizon {horizon}: max M(T)/M(T/10) = {worst:.4}, \
             {flagged} flagged (threshold {ratio_threshold})",
            records.len()
        )],
    })
}
