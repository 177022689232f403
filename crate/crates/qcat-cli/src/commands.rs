//! Subcommand implementations: each produces CSV datasets plus a
//! deterministic `summary.json`, then a `manifest.json` with checksums.

use std::f64::consts::PI;

use serde::Serialize;

use qcat::classical::{fixed_points, portrait_dataset, ClassicalState, FixedPointRecord};
use qcat::optimize::{optimize_with, OptimizationResult};
use qcat::protocols::{
    decoherence_series, dft_amplitudes, harmonic_ratio_map, run_n2_sampled, run_n4,
    sensitivity_scan, tau_scaling_with, N2Params, N4Config, ProtocolResult,
};
use qcat::spin::{
    cat_target, coherent_spin_state, fundamental_frequency_5half, n4_target, CatBound, State,
};
use qcat::wigner::{wigner_map, WignerMap};

use crate::config::{RunConfig, WignerState};
use crate::output::{row, OutputWriter};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Single-pulse cat generation and stabilization run.
    SimulateN2,
    /// Three-pulse four-component cat run (I = 5/2, eta = 1).
    SimulateN4,
    /// Optimize (t_R, theta_R, varphi) for the configured spin and bound.
    Optimize,
    /// One optimization per biaxiality value in eta_grid.
    SweepEta,
    /// Fidelity under +/-5% and +/-10% parameter deviations.
    Sensitivity,
    /// Classical phase portrait and fixed points.
    Portrait,
    /// Wigner map of a configurable state.
    Wigner,
    /// Second-harmonic content over initial coherent-state locations.
    HarmonicMap,
    /// Protocol runs across the configured dephasing rates.
    Decoherence,
    /// Fidelity-decay time constants and their spin scaling.
    DecayScan,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateN2 => "simulate-n2",
            Command::SimulateN4 => "simulate-n4",
            Command::Optimize => "optimize",
            Command::SweepEta => "sweep-eta",
            Command::Sensitivity => "sensitivity",
            Command::Portrait => "portrait",
            Command::Wigner => "wigner",
            Command::HarmonicMap => "harmonic-map",
            Command::Decoherence => "decoherence",
            Command::DecayScan => "decay-scan",
        }
    }
}

fn map_err(e: qcat::QcatError) -> CliError {
    match e {
        qcat::QcatError::Convergence { .. } => CliError::Numerical(e.to_string()),
        other => CliError::Io(other.to_string()),
    }
}

/// Resolves protocol parameters: optimizer output unless every override is
/// supplied, with individual overrides replacing optimizer values.
fn resolve_params(config: &RunConfig, bound: CatBound) -> Result<(N2Params, Option<OptimizationResult>), CliError> {
    let all_given = config.t_r.is_some() && config.theta_r.is_some() && config.varphi.is_some();
    if all_given {
        return Ok((
            N2Params::new(
                config.t_r.unwrap(),
                config.theta_r.unwrap(),
                config.varphi.unwrap(),
            ),
            None,
        ));
    }
    let opt = optimize_with(config.spin(), config.eta, bound, config.optimizer_config())
        .map_err(map_err)?;
    let mut params = N2Params::from(&opt);
    if let Some(v) = config.t_r {
        params.t_r = v;
    }
    if let Some(v) = config.theta_r {
        params.theta_r = v;
    }
    if let Some(v) = config.varphi {
        params.varphi = v;
    }
    Ok((params, Some(opt)))
}

fn write_wigner_csv(
    out: &mut OutputWriter,
    name: &str,
    map: &WignerMap,
) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(map.theta_grid.len() * map.phi_grid.len());
    for (i, &theta) in map.theta_grid.iter().enumerate() {
        for (j, &phi) in map.phi_grid.iter().enumerate() {
            rows.push(row(&[theta, phi, map.values[(i, j)]]));
        }
    }
    out.csv(name, "theta,phi,w", rows)
}

fn post_pulse_stats(result: &ProtocolResult, from: f64) -> (f64, f64, f64) {
    let post: Vec<f64> = result
        .times
        .iter()
        .zip(&result.fidelity)
        .filter(|(t, _)| **t >= from)
        .map(|(_, f)| *f)
        .collect();
    let max = post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = post.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = post.iter().sum::<f64>() / post.len() as f64;
    (max, min, mean)
}

pub fn execute(command: Command, config: &RunConfig) -> Result<(), CliError> {
    let dir = config.out.clone();
    let (mut out, started) = OutputWriter::create(&dir)?;
    match command {
        Command::Optimize => cmd_optimize(config, &mut out)?,
        Command::SimulateN2 => cmd_simulate_n2(config, &mut out)?,
        Command::SimulateN4 => cmd_simulate_n4(config, &mut out)?,
        Command::SweepEta => cmd_sweep_eta(config, &mut out)?,
        Command::Sensitivity => cmd_sensitivity(config, &mut out)?,
        Command::Portrait => cmd_portrait(config, &mut out)?,
        Command::Wigner => cmd_wigner(config, &mut out)?,
        Command::HarmonicMap => cmd_harmonic_map(config, &mut out)?,
        Command::Decoherence => cmd_decoherence(config, &mut out)?,
        Command::DecayScan => cmd_decay_scan(config, &mut out)?,
    }
    out.finish(command.name(), config, started)
}

fn cmd_optimize(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        result: OptimizationResult,
    }
    let result = optimize_with(
        config.spin(),
        config.eta,
        config.bound.to_cat_bound(),
        config.optimizer_config(),
    )
    .map_err(map_err)?;
    out.json("summary.json", &Summary { config, result })
}

fn cmd_simulate_n2(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    let bound = config.bound.to_cat_bound();
    let (params, opt) = resolve_params(config, bound)?;
    let gamma = (config.gamma > 0.0).then_some(config.gamma);
    let result = run_n2_sampled(
        config.spin(),
        config.eta,
        bound,
        &params,
        gamma,
        config.n2_samples,
    )
    .map_err(map_err)?;

    let rows = (0..result.times.len())
        .map(|j| row(&[result.times[j], result.fidelity[j], result.rqfi[j]]));
    out.csv("fidelity.csv", "t,fidelity,rqfi", rows)?;

    let mut min_wigner_final = f64::NAN;
    if let Some(snaps) = &result.snapshots {
        for snap in snaps {
            let map = wigner_map(&snap.rho, config.wigner_n_theta, config.wigner_n_phi)
                .map_err(map_err)?;
            if snap.label == "final" {
                min_wigner_final = map.min_value();
            }
            write_wigner_csv(out, &format!("wigner_{}.csv", snap.label), &map)?;
        }
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        params: N2Params,
        optimizer: Option<OptimizationResult>,
        pulse_times: Vec<f64>,
        rqfi_direction: [f64; 3],
        post_pulse_fidelity_max: f64,
        post_pulse_fidelity_min: f64,
        post_pulse_fidelity_mean: f64,
        min_wigner_final: f64,
    }
    let (max, min, mean) = post_pulse_stats(&result, params.t_r);
    out.json(
        "summary.json",
        &Summary {
            config,
            params,
            optimizer: opt,
            pulse_times: result.pulse_times.clone(),
            rqfi_direction: result.rqfi_direction,
            post_pulse_fidelity_max: max,
            post_pulse_fidelity_min: min,
            post_pulse_fidelity_mean: mean,
            min_wigner_final,
        },
    )
}

fn cmd_simulate_n4(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    if config.twice_i != 5 || config.eta != 1.0 {
        return Err(CliError::Usage(
            "simulate-n4 is validated for twice_i = 5 and eta = 1 only".into(),
        ));
    }
    let n2 = if config.t_r.is_some() && config.theta_r.is_some() && config.varphi.is_some() {
        Some(N2Params::new(
            config.t_r.unwrap(),
            config.theta_r.unwrap(),
            config.varphi.unwrap(),
        ))
    } else {
        None
    };
    let n4_config = N4Config {
        n2,
        ..N4Config::default()
    };
    let outcome = run_n4(&n4_config).map_err(map_err)?;
    let protocol = &outcome.protocol;
    let rotating = protocol.fidelity_rotating.as_ref().expect("set by run_n4");
    let rows = (0..protocol.times.len()).map(|j| {
        row(&[
            protocol.times[j],
            protocol.fidelity[j],
            rotating[j],
            protocol.rqfi[j],
        ])
    });
    out.csv("n4_fidelity.csv", "t,fidelity_fixed,fidelity_rotating,rqfi", rows)?;

    let n_post = n4_config.periods * n4_config.samples_per_period;
    let post = &protocol.fidelity[protocol.fidelity.len() - n_post..];
    let amps = dft_amplitudes(post);
    let window = n4_config.periods as f64 * 2.0 * PI / fundamental_frequency_5half();
    let spectrum_rows = amps
        .iter()
        .enumerate()
        .map(|(k, a)| row(&[k as f64, 2.0 * PI * k as f64 / window, *a]));
    out.csv("spectrum.csv", "bin,omega,amplitude", spectrum_rows)?;
    let dominant = (1..amps.len())
        .max_by(|a, b| amps[*a].partial_cmp(&amps[*b]).unwrap())
        .unwrap();

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        pulses: Vec<qcat::PulseEvent>,
        x_cat_fidelity: f64,
        template_fidelity: f64,
        dominant_bin: usize,
        dominant_omega: f64,
        rotor_omega: f64,
    }
    out.json(
        "summary.json",
        &Summary {
            config,
            pulses: outcome.pulses.clone(),
            x_cat_fidelity: outcome.x_cat_fidelity,
            template_fidelity: outcome.template_fidelity,
            dominant_bin: dominant,
            dominant_omega: 2.0 * PI * dominant as f64 / window,
            rotor_omega: qcat::spin::n4_rotor_frequency(),
        },
    )
}

fn cmd_sweep_eta(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    let mut results = Vec::new();
    for &eta in &config.eta_grid {
        results.push(
            optimize_with(
                config.spin(),
                eta,
                config.bound.to_cat_bound(),
                config.optimizer_config(),
            )
            .map_err(map_err)?,
        );
    }
    let rows = results.iter().map(|r| {
        row(&[
            r.eta,
            r.t_r,
            r.theta_r,
            r.varphi,
            r.score.f_max,
            r.score.f_ripple,
        ])
    });
    out.csv("sweep.csv", "eta,t_r,theta_r,varphi,f_max,f_ripple", rows)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        results: Vec<OptimizationResult>,
    }
    out.json("summary.json", &Summary { config, results })
}

fn cmd_sensitivity(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    let bound = config.bound.to_cat_bound();
    let (params, opt) = resolve_params(config, bound)?;
    let report =
        sensitivity_scan(config.spin(), config.eta, bound, &params).map_err(map_err)?;

    let mut rows = Vec::new();
    for r in &report.rows {
        let label = format!("{:?}", r.parameter);
        for (t, f) in report.times.iter().zip(&r.fidelity) {
            rows.push(format!("{label},{},{t},{f}", r.deviation));
        }
    }
    out.csv("sensitivity.csv", "parameter,deviation,t,fidelity", rows)?;

    #[derive(Serialize)]
    struct RowSummary {
        parameter: String,
        deviation: f64,
        mean_post_pulse: f64,
        ripple_post_pulse: f64,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        params: N2Params,
        optimizer: Option<OptimizationResult>,
        rows: Vec<RowSummary>,
    }
    out.json(
        "summary.json",
        &Summary {
            config,
            params,
            optimizer: opt,
            rows: report
                .rows
                .iter()
                .map(|r| RowSummary {
                    parameter: format!("{:?}", r.parameter),
                    deviation: r.deviation,
                    mean_post_pulse: r.mean_post_pulse,
                    ripple_post_pulse: r.ripple_post_pulse,
                })
                .collect(),
        },
    )
}

fn cmd_portrait(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    let mut seeds = Vec::new();
    for ip in 0..config.portrait_seeds_p {
        let p = -1.0 + 2.0 * (ip as f64 + 1.0) / (config.portrait_seeds_p as f64 + 1.0);
        for iphi in 0..config.portrait_seeds_phi {
            let phi = 2.0 * PI * iphi as f64 / config.portrait_seeds_phi as f64;
            seeds.push(ClassicalState { phi, p_phi: p });
        }
    }
    let spin_value = config.twice_i as f64 / 2.0;
    let data = portrait_dataset(
        config.eta,
        spin_value,
        &seeds,
        config.portrait_t_end,
        config.portrait_dt,
    )
    .map_err(map_err)?;
    let rows = data
        .iter()
        .map(|s| format!("{},{},{},{},{}", s.trajectory_id, s.t, s.phi, s.p_phi, s.speed));
    out.csv("portrait.csv", "trajectory_id,t,phi,p_phi,speed", rows)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        fixed_points: Vec<FixedPointRecord>,
        trajectories: usize,
        samples_per_trajectory: usize,
    }
    out.json(
        "summary.json",
        &Summary {
            config,
            fixed_points: fixed_points(config.eta),
            trajectories: seeds.len(),
            samples_per_trajectory: data.len() / seeds.len(),
        },
    )
}

fn cmd_wigner(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    let spin = config.spin();
    let state: State = match config.wigner_state {
        WignerState::Css => coherent_spin_state(spin, config.wigner_theta, config.wigner_phi),
        WignerState::CatPolar => cat_target(spin, CatBound::Polar, config.varphi.unwrap_or(0.0)),
        WignerState::CatEquator => {
            cat_target(spin, CatBound::Equator, config.varphi.unwrap_or(0.0))
        }
        WignerState::CatX => cat_target(spin, CatBound::XAxis, config.varphi.unwrap_or(0.0)),
        WignerState::N4 => n4_target(spin, config.rotor_phase),
    };
    let map = wigner_map(
        &state.to_density(),
        config.wigner_n_theta,
        config.wigner_n_phi,
    )
    .map_err(map_err)?;
    write_wigner_csv(out, "wigner.csv", &map)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        integral: f64,
        min_value: f64,
        max_value: f64,
    }
    out.json(
        "summary.json",
        &Summary {
            config,
            integral: map.integral(),
            min_value: map.min_value(),
            max_value: map.max_value(),
        },
    )
}

fn cmd_harmonic_map(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    if config.twice_i != 5 {
        return Err(CliError::Usage(
            "harmonic-map is defined on the strictly periodic I = 5/2 spectrum \
             (set twice_i = 5)"
                .into(),
        ));
    }
    let map = harmonic_ratio_map(
        config.spin(),
        config.map_n_theta,
        config.map_n_phi,
        config.map_periods,
    )
    .map_err(map_err)?;
    let mut rows = Vec::new();
    let mut finite_min = f64::INFINITY;
    let mut finite_max = f64::NEG_INFINITY;
    for (i, &theta) in map.theta_grid.iter().enumerate() {
        for (j, &phi) in map.phi_grid.iter().enumerate() {
            let v = map.ratios[i][j].as_f64();
            if v.is_finite() {
                finite_min = finite_min.min(v);
                finite_max = finite_max.max(v);
            }
            rows.push(format!("{theta},{phi},{v}"));
        }
    }
    out.csv("harmonic.csv", "theta,phi,ratio", rows)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        finite_min: f64,
        finite_max: f64,
    }
    out.json(
        "summary.json",
        &Summary {
            config,
            finite_min,
            finite_max,
        },
    )
}

fn cmd_decoherence(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    let bound = config.bound.to_cat_bound();
    let (params, opt) = resolve_params(config, bound)?;
    let runs = decoherence_series(
        config.spin(),
        config.eta,
        bound,
        &params,
        &config.gamma_list,
    )
    .map_err(map_err)?;

    #[derive(Serialize)]
    struct GammaSummary {
        gamma: f64,
        fidelity_csv: String,
        wigner_csv: String,
        post_pulse_fidelity_mean: f64,
        min_wigner_final: f64,
    }
    let mut gammas = Vec::new();
    for (gamma, result) in &runs {
        let tag = format!("{gamma:e}");
        let fname = format!("fidelity_g{tag}.csv");
        let rows = (0..result.times.len())
            .map(|j| row(&[result.times[j], result.fidelity[j], result.rqfi[j]]));
        out.csv(&fname, "t,fidelity,rqfi", rows)?;
        let final_snap = result
            .snapshots
            .as_ref()
            .and_then(|s| s.iter().find(|sn| sn.label == "final"))
            .expect("final snapshot present");
        let map = wigner_map(&final_snap.rho, config.wigner_n_theta, config.wigner_n_phi)
            .map_err(map_err)?;
        let wname = format!("wigner_final_g{tag}.csv");
        write_wigner_csv(out, &wname, &map)?;
        let (_, _, mean) = post_pulse_stats(result, params.t_r);
        gammas.push(GammaSummary {
            gamma: *gamma,
            fidelity_csv: fname,
            wigner_csv: wname,
            post_pulse_fidelity_mean: mean,
            min_wigner_final: map.min_value(),
        });
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        params: N2Params,
        optimizer: Option<OptimizationResult>,
        runs: Vec<GammaSummary>,
    }
    out.json(
        "summary.json",
        &Summary {
            config,
            params,
            optimizer: opt,
            runs: gammas,
        },
    )
}

fn cmd_decay_scan(config: &RunConfig, out: &mut OutputWriter) -> Result<(), CliError> {
    if config.gamma <= 0.0 {
        return Err(CliError::Usage(
            "decay-scan needs a positive dephasing rate, e.g. --gamma 1e-2".into(),
        ));
    }
    let scaling = tau_scaling_with(
        &config.i_list,
        config.eta,
        config.gamma,
        config.optimizer_config(),
    )
    .map_err(map_err)?;
    let rows = scaling.points.iter().map(|p| {
        row(&[
            p.twice_i as f64,
            p.tau,
            p.gamma_tau,
            p.fit.f0,
            p.fit.f_sat,
            p.fit.residual,
            p.t_r,
            p.theta_r,
        ])
    });
    out.csv(
        "tau.csv",
        "twice_i,tau,gamma_tau,f0,f_sat,residual,t_r,theta_r",
        rows,
    )?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        scaling: qcat::protocols::TauScaling,
    }
    out.json("summary.json", &Summary { config, scaling })
}

