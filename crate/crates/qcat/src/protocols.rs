//! End-to-end protocol runs: two-component cat generation and stabilization,
//! the three-pulse four-component extension, parameter-sensitivity scans,
//! harmonic-content maps, dephasing series, and fidelity-decay fitting.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    evolve_lindblad, evolve_pure, qi_hamiltonian, DephasingConfig, HamiltonianSpec,
    LindbladPropagator, PulseSchedule, Propagator,
};
use crate::error::{QcatError, Result};
use crate::linalg::{CVec, HermitianEigen};
use crate::measures::{fidelity, fidelity_mixed, normalized_rqfi, normalized_rqfi_mixed};
use crate::optimize::{optimize, OptimizationResult, OptimizerConfig};
use crate::spin::{
    cat_target, coherent_spin_state, fundamental_frequency_5half, n4_rotor_frequency, n4_target,
    rotation_operator, CatBound, DensityMatrix, PulseEvent, Spin, State,
};

/// Parameters of the single-pulse protocol, including the prepared initial
/// coherent state (nominally at theta = pi/2, phi = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct N2Params {
    pub t_r: f64,
    pub theta_r: f64,
    pub varphi: f64,
    pub theta_css: f64,
    pub phi_css: f64,
}

impl N2Params {
    pub fn new(t_r: f64, theta_r: f64, varphi: f64) -> Self {
        Self {
            t_r,
            theta_r,
            varphi,
            theta_css: PI / 2.0,
            phi_css: 0.0,
        }
    }
}

impl From<&OptimizationResult> for N2Params {
    fn from(opt: &OptimizationResult) -> Self {
        Self::new(opt.t_r, opt.theta_r, opt.varphi)
    }
}

/// A labeled state snapshot taken during a protocol run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub label: String,
    pub time: f64,
    pub rho: DensityMatrix,
}

/// Time series produced by a protocol run. All series share the length of
/// `times`.
#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub rqfi: Vec<f64>,
    pub pulse_times: Vec<f64>,
    /// Fidelity against the rotating four-component target (three-pulse runs
    /// only).
    pub fidelity_rotating: Option<Vec<f64>>,
    pub snapshots: Option<Vec<Snapshot>>,
    /// Axis along which the normalized rQFI was measured.
    pub rqfi_direction: [f64; 3],
}

fn rqfi_axis(bound: CatBound) -> [f64; 3] {
    match bound {
        CatBound::Polar => [0.0, 0.0, 1.0],
        CatBound::Equator => [0.0, 1.0, 0.0],
        CatBound::XAxis => [1.0, 0.0, 0.0],
    }
}

pub const N2_DEFAULT_SAMPLES: usize = 1201;

/// Runs the single-pulse protocol: prepare the initial coherent state, evolve
/// freely to t_R, rotate about +x by theta_R, and sample fidelity against the
/// bound's cat target plus normalized rQFI along the bound axis over
/// [0, 10 t_R]. `gamma = None` (or 0) selects exact unitary evolution;
/// positive rates integrate the master equation.
pub fn run_n2(
    spin: Spin,
    eta: f64,
    bound: CatBound,
    params: &N2Params,
    gamma: Option<f64>,
) -> Result<ProtocolResult> {
    run_n2_sampled(spin, eta, bound, params, gamma, N2_DEFAULT_SAMPLES)
}

/// [`run_n2`] with an explicit sample count over the [0, 10 t_R] span.
pub fn run_n2_sampled(
    spin: Spin,
    eta: f64,
    bound: CatBound,
    params: &N2Params,
    gamma: Option<f64>,
    samples: usize,
) -> Result<ProtocolResult> {
    if params.t_r <= 0.0 {
        return Err(QcatError::InvalidArgument(format!(
            "pulse instant must be positive, got {}",
            params.t_r
        )));
    }
    if samples < 2 {
        return Err(QcatError::InvalidArgument("need at least 2 samples".into()));
    }
    let spec = HamiltonianSpec::new(spin, eta)?;
    let psi0 = coherent_spin_state(spin, params.theta_css, params.phi_css);
    let target = cat_target(spin, bound, params.varphi);
    let axis = rqfi_axis(bound);
    let span = 10.0 * params.t_r;
    let times: Vec<f64> = (0..samples)
        .map(|j| span * j as f64 / (samples - 1) as f64)
        .collect();
    let schedule = PulseSchedule::single_x(params.t_r, params.theta_r)?;
    let gamma = gamma.unwrap_or(0.0);

    let (fidelity_series, rqfi_series, snapshots) = if gamma > 0.0 {
        let config = DephasingConfig::new(gamma)?;
        let rho0 = psi0.to_density();
        let rhos = evolve_lindblad(&rho0, &spec, &config, &schedule, &times)?;
        let fid: Vec<f64> = rhos
            .iter()
            .map(|r| fidelity_mixed(&target, r))
            .collect::<Result<_>>()?;
        let rq: Vec<f64> = rhos.iter().map(|r| normalized_rqfi_mixed(r, axis)).collect();
        // pre-pulse snapshot needs a pulse-free pass up to t_R
        let pre = evolve_lindblad(&rho0, &spec, &config, &PulseSchedule::empty(), &[params.t_r])?
            .pop()
            .expect("one sample requested");
        let rot = rotation_operator(spin, [1.0, 0.0, 0.0], params.theta_r)?;
        let post = pre.conjugate(&rot);
        let snaps = vec![
            Snapshot {
                label: "initial".into(),
                time: 0.0,
                rho: rho0,
            },
            Snapshot {
                label: "pre_pulse".into(),
                time: params.t_r,
                rho: pre,
            },
            Snapshot {
                label: "post_pulse".into(),
                time: params.t_r,
                rho: post,
            },
            Snapshot {
                label: "final".into(),
                time: span,
                rho: rhos.last().expect("nonempty grid").clone(),
            },
        ];
        (fid, rq, snaps)
    } else {
        let states = evolve_pure(&psi0, &spec, &schedule, &times)?;
        let fid: Vec<f64> = states
            .iter()
            .map(|s| fidelity(&target, s))
            .collect::<Result<_>>()?;
        let rq: Vec<f64> = states.iter().map(|s| normalized_rqfi(s, axis)).collect();
        let prop = Propagator::for_spec(&spec);
        let pre = prop.apply(&psi0, params.t_r);
        let rot = rotation_operator(spin, [1.0, 0.0, 0.0], params.theta_r)?;
        let post = pre.apply(&rot);
        let snaps = vec![
            Snapshot {
                label: "initial".into(),
                time: 0.0,
                rho: psi0.to_density(),
            },
            Snapshot {
                label: "pre_pulse".into(),
                time: params.t_r,
                rho: pre.to_density(),
            },
            Snapshot {
                label: "post_pulse".into(),
                time: params.t_r,
                rho: post.to_density(),
            },
            Snapshot {
                label: "final".into(),
                time: span,
                rho: states.last().expect("nonempty grid").to_density(),
            },
        ];
        (fid, rq, snaps)
    };

    Ok(ProtocolResult {
        times,
        fidelity: fidelity_series,
        rqfi: rqfi_series,
        pulse_times: vec![params.t_r],
        fidelity_rotating: None,
        snapshots: Some(snapshots),
        rqfi_direction: axis,
    })
}

/// Configuration of the three-pulse four-component protocol.
#[derive(Debug, Clone)]
pub struct N4Config {
    pub spin: Spin,
    pub eta: f64,
    /// First-pulse parameters; `None` runs the polar-bound optimizer.
    pub n2: Option<N2Params>,
    /// Third pulse as (delay after pulse 2, angle); `None` optimizes both.
    pub pulse3: Option<(f64, f64)>,
    /// Observation window after pulse 3, in fundamental periods.
    pub periods: usize,
    pub samples_per_period: usize,
}

impl Default for N4Config {
    fn default() -> Self {
        Self {
            spin: Spin::from_twice(5).expect("5/2 in range"),
            eta: 1.0,
            n2: None,
            pulse3: None,
            periods: 8,
            samples_per_period: 128,
        }
    }
}

/// Outcome of the three-pulse protocol.
#[derive(Debug, Clone)]
pub struct N4Outcome {
    pub protocol: ProtocolResult,
    pub pulses: Vec<PulseEvent>,
    /// Fidelity to the restored two-component x-axis cat right after pulse 2.
    pub x_cat_fidelity: f64,
    /// Window-maximum fidelity to the fixed four-component template after
    /// pulse 3.
    pub template_fidelity: f64,
}

/// Fast fidelity scorer in the eigenbasis of a fixed Hamiltonian.
struct FidelityTrace {
    values: Vec<f64>,
    row: CVec,
}

impl FidelityTrace {
    fn new(eigen: &HermitianEigen, target: &State) -> Self {
        Self {
            values: eigen.values.iter().cloned().collect(),
            row: (eigen.vectors.adjoint() * target.amplitudes()).map(|z| z.conj()),
        }
    }

    /// |<target| exp(-iHt) |psi>| with `coeffs` the state in the eigenbasis.
    fn at(&self, coeffs: &CVec, t: f64) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..coeffs.len() {
            acc += self.row[k] * coeffs[k] * (-C64::i() * self.values[k] * t).exp();
        }
        acc.norm()
    }
}

fn golden_max_scalar(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..50 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        if (hi - lo).abs() < 1e-12 {
            break;
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Runs the three-pulse protocol that splits a restored x-axis cat into the
/// four-component target.
///
/// Pulse 1 applies the polar-bound single-pulse parameters. Pulse 2 fires at
/// the best polar-cat-fidelity instant within one fundamental period after
/// pulse 1 and rotates by -pi/2 about +y, which maps the polar components
/// onto the +/-x axis and restores an even x-axis cat. Pulse 3 (delay and
/// angle searched on a grid, then refined) rotates about +x and splits the
/// two legs cross-wise onto the poles and the +/-y axis. Fidelity is traced
/// against the fixed template `n4_target(pi)` and against the rotating
/// target with rotor phase pi + omega_2 (t - t_3).
pub fn run_n4(config: &N4Config) -> Result<N4Outcome> {
    let spin = config.spin;
    let spec = HamiltonianSpec::new(spin, config.eta)?;
    let h = qi_hamiltonian(&spec);
    let eigen = HermitianEigen::new(&h)?;
    let period = 2.0 * PI / fundamental_frequency_5half();

    let n2 = match config.n2 {
        Some(p) => p,
        None => N2Params::from(&optimize(spin, config.eta, CatBound::Polar)?),
    };

    // pulse 1: free evolution then the x rotation
    let psi0 = coherent_spin_state(spin, n2.theta_css, n2.phi_css);
    let rot1 = rotation_operator(spin, [1.0, 0.0, 0.0], n2.theta_r)?;
    let psi1 = State::try_new(eigen.evolve(psi0.amplitudes(), n2.t_r))
        .expect("unitary")
        .apply(&rot1);

    // pulse 2 instant: best polar-cat fidelity within one period
    let polar_cat = cat_target(spin, CatBound::Polar, n2.varphi);
    let trace1 = FidelityTrace::new(&eigen, &polar_cat);
    let c1 = eigen.vectors.adjoint() * psi1.amplitudes();
    let scan = 2048;
    let mut best = (f64::NEG_INFINITY, 0.0f64);
    for j in 0..=scan {
        let tau = period * j as f64 / scan as f64;
        let f = trace1.at(&c1, tau);
        if f > best.0 {
            best = (f, tau);
        }
    }
    let dt_scan = period / scan as f64;
    let (tau2, _) = golden_max_scalar(
        (best.1 - dt_scan).max(0.0),
        best.1 + dt_scan,
        |tau| trace1.at(&c1, tau),
    );
    let t2 = n2.t_r + tau2;

    let rot2 = rotation_operator(spin, [0.0, 1.0, 0.0], -PI / 2.0)?;
    let psi2 = State::try_new(eigen.evolve(psi1.amplitudes(), tau2))
        .expect("unitary")
        .apply(&rot2);
    let x_cat = cat_target(spin, CatBound::XAxis, 0.0);
    let x_cat_fidelity = fidelity(&x_cat, &psi2)?;

    // pulse 3: maximize the window-best fidelity to the fixed template
    let template = n4_target(spin, PI);
    let trace_fixed = FidelityTrace::new(&eigen, &template);
    let c2 = eigen.vectors.adjoint() * psi2.amplitudes();
    let window_probe = 48;
    let ix_eigen = HermitianEigen::new(&crate::spin::SpinOps::new(spin).ix)?;
    let mix = eigen.vectors.adjoint() * &ix_eigen.vectors;
    let mix_adj = mix.adjoint();
    let objective = |dt3: f64, angle: f64| -> f64 {
        let d = c2.len();
        let evolved = CVec::from_fn(d, |k, _| c2[k] * (-C64::i() * eigen.values[k] * dt3).exp());
        let in_x = &mix_adj * evolved;
        let rotated = CVec::from_fn(d, |k, _| {
            in_x[k] * (-C64::i() * ix_eigen.values[k] * angle).exp()
        });
        let c3 = &mix * rotated;
        (0..window_probe)
            .map(|j| trace_fixed.at(&c3, period * j as f64 / window_probe as f64))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let (dt3, angle3) = match config.pulse3 {
        Some(p) => p,
        None => {
            let mut best = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
            let grid: Vec<(usize, usize)> = (1..=140usize)
                .flat_map(|i| (0..61usize).map(move |j| (i, j)))
                .collect();
            let scores: Vec<f64> = grid
                .par_iter()
                .map(|&(i, j)| objective(0.005 * i as f64, -PI / 2.0 + PI * j as f64 / 60.0))
                .collect();
            for (&(i, j), &s) in grid.iter().zip(&scores) {
                if s > best.0 {
                    best = (s, 0.005 * i as f64, -PI / 2.0 + PI * j as f64 / 60.0);
                }
            }
            // refine both coordinates
            let (_, mut dt3, mut a3) = best;
            for _ in 0..4 {
                let a_now = a3;
                (dt3, _) = golden_max_scalar((dt3 - 0.005).max(1e-6), dt3 + 0.005, |x| {
                    objective(x, a_now)
                });
                let dt_now = dt3;
                (a3, _) = golden_max_scalar(a3 - PI / 60.0, a3 + PI / 60.0, |x| {
                    objective(dt_now, x)
                });
            }
            (dt3, a3)
        }
    };
    let t3 = t2 + dt3;

    let rot3 = rotation_operator(spin, [1.0, 0.0, 0.0], angle3)?;
    let psi3 = State::try_new(eigen.evolve(psi2.amplitudes(), dt3))
        .expect("unitary")
        .apply(&rot3);
    let c3 = eigen.vectors.adjoint() * psi3.amplitudes();

    // sampled trace: pre-pulse segment on the same spacing, then an exact
    // integer number of fundamental periods after pulse 3 for leakage-free
    // spectra
    let n_post = config.periods * config.samples_per_period;
    let dt_out = config.periods as f64 * period / n_post as f64;
    let n_pre = (t3 / dt_out).floor() as usize;
    let omega2 = n4_rotor_frequency();

    let mut times = Vec::with_capacity(n_pre + n_post);
    let mut fid_fixed = Vec::with_capacity(n_pre + n_post);
    let mut fid_rot = Vec::with_capacity(n_pre + n_post);
    let mut rqfi_series = Vec::with_capacity(n_pre + n_post);

    let schedule = PulseSchedule::new(vec![
        PulseEvent::x(n2.t_r, n2.theta_r)?,
        PulseEvent::new(t2, [0.0, 1.0, 0.0], -PI / 2.0)?,
        PulseEvent::x(t3, angle3)?,
    ])?;
    let pre_times: Vec<f64> = (0..n_pre).map(|j| j as f64 * dt_out).collect();
    let pre_states = evolve_pure(&psi0, &spec, &schedule, &pre_times)?;
    let z_axis = [0.0, 0.0, 1.0];
    for (j, st) in pre_states.iter().enumerate() {
        let t = pre_times[j];
        times.push(t);
        fid_fixed.push(fidelity(&template, st)?);
        let rotor = n4_target(spin, PI + omega2 * (t - t3));
        fid_rot.push(fidelity(&rotor, st)?);
        rqfi_series.push(normalized_rqfi(st, z_axis));
    }
    for j in 0..n_post {
        let tau = j as f64 * dt_out;
        let t = t3 + tau;
        let d = c3.len();
        let coeffs = CVec::from_fn(d, |k, _| c3[k] * (-C64::i() * eigen.values[k] * tau).exp());
        let st = State::try_new(&eigen.vectors * &coeffs).expect("unitary");
        times.push(t);
        fid_fixed.push(trace_fixed.at(&c3, tau));
        let rotor = n4_target(spin, PI + omega2 * tau);
        fid_rot.push(fidelity(&rotor, &st)?);
        rqfi_series.push(normalized_rqfi(&st, z_axis));
    }

    let template_fidelity = fid_fixed[n_pre..]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(N4Outcome {
        protocol: ProtocolResult {
            times,
            fidelity: fid_fixed,
            rqfi: rqfi_series,
            pulse_times: vec![n2.t_r, t2, t3],
            fidelity_rotating: Some(fid_rot),
            snapshots: None,
            rqfi_direction: z_axis,
        },
        pulses: schedule.events().to_vec(),
        x_cat_fidelity,
        template_fidelity,
    })
}

/// Magnitudes of the discrete Fourier amplitudes |A_k| of a real series for
/// k = 0 ..= N/2, with A_k = (1/N) sum_j f_j exp(-2 pi i j k / N).
pub fn dft_amplitudes(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut out = Vec::with_capacity(n / 2 + 1);
    for k in 0..=(n / 2) {
        let mut acc = C64::new(0.0, 0.0);
        for (j, &f) in samples.iter().enumerate() {
            let angle = -2.0 * PI * (j * k % n) as f64 / n as f64;
            acc += C64::from_polar(f, angle);
        }
        out.push(acc.norm() / n as f64);
    }
    out
}

/// Second-harmonic-to-fundamental content of a fidelity series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicRatio {
    Finite(f64),
    /// Fundamental amplitude below threshold: pure frequency doubling.
    FundamentalAbsent,
    /// Both bins below threshold.
    Undefined,
}

impl HarmonicRatio {
    /// CSV encoding: a number, `inf`, or `nan`.
    pub fn as_f64(&self) -> f64 {
        match self {
            HarmonicRatio::Finite(v) => *v,
            HarmonicRatio::FundamentalAbsent => f64::INFINITY,
            HarmonicRatio::Undefined => f64::NAN,
        }
    }
}

const HARMONIC_AMPLITUDE_FLOOR: f64 = 1e-12;
const HARMONIC_SAMPLES_PER_PERIOD: usize = 64;

/// Ratio |A(2 w1)| / |A(w1)| of the fidelity-to-initial series of a freely
/// evolving coherent state under the fully biaxial I = 5/2 Hamiltonian,
/// sampled over an exact integer number of fundamental periods (leakage-free
/// bins). Defined for the strictly periodic I = 5/2, eta = 1 spectrum.
pub fn harmonic_ratio(
    spin: Spin,
    css_grid: &[(f64, f64)],
    periods: usize,
) -> Result<Vec<HarmonicRatio>> {
    if spin.twice() != 5 {
        return Err(QcatError::InvalidArgument(
            "harmonic ratio is defined on the strictly periodic I = 5/2 spectrum".into(),
        ));
    }
    if periods < 8 {
        return Err(QcatError::InvalidArgument(format!(
            "need at least 8 fundamental periods, got {periods}"
        )));
    }
    let spec = HamiltonianSpec::new(spin, 1.0)?;
    let eigen = HermitianEigen::new(&qi_hamiltonian(&spec))?;
    let t1 = 2.0 * PI / fundamental_frequency_5half();
    let n = periods * HARMONIC_SAMPLES_PER_PERIOD;

    let out: Vec<HarmonicRatio> = css_grid
        .par_iter()
        .map(|&(theta, phi)| {
            let psi = coherent_spin_state(spin, theta, phi);
            let c = eigen.vectors.adjoint() * psi.amplitudes();
            let weights: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
            let series: Vec<f64> = (0..n)
                .map(|j| {
                    let t = periods as f64 * t1 * j as f64 / n as f64;
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, w) in weights.iter().enumerate() {
                        acc += C64::from_polar(*w, -eigen.values[k] * t);
                    }
                    acc.norm()
                })
                .collect();
            let a1 = dft_bin(&series, periods);
            let a2 = dft_bin(&series, 2 * periods);
            if a1 < HARMONIC_AMPLITUDE_FLOOR && a2 < HARMONIC_AMPLITUDE_FLOOR {
                HarmonicRatio::Undefined
            } else if a1 < HARMONIC_AMPLITUDE_FLOOR {
                HarmonicRatio::FundamentalAbsent
            } else {
                HarmonicRatio::Finite(a2 / a1)
            }
        })
        .collect();
    Ok(out)
}

fn dft_bin(samples: &[f64], k: usize) -> f64 {
    let n = samples.len();
    let mut acc = C64::new(0.0, 0.0);
    for (j, &f) in samples.iter().enumerate() {
        let angle = -2.0 * PI * (j * k % n) as f64 / n as f64;
        acc += C64::from_polar(f, angle);
    }
    acc.norm() / n as f64
}

/// Harmonic-content map over a (theta, phi) grid of initial coherent states.
#[derive(Debug, Clone)]
pub struct HarmonicMap {
    pub theta_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    /// Row-major: `ratios[i][j]` for theta_grid[i], phi_grid[j].
    pub ratios: Vec<Vec<HarmonicRatio>>,
}

/// [`harmonic_ratio`] evaluated on a uniform grid, theta in [0, pi], phi in
/// [0, 2 pi).
pub fn harmonic_ratio_map(
    spin: Spin,
    n_theta: usize,
    n_phi: usize,
    periods: usize,
) -> Result<HarmonicMap> {
    if n_theta < 2 || n_phi < 2 {
        return Err(QcatError::InvalidArgument(format!(
            "harmonic map grid must be at least 2x2, got {n_theta}x{n_phi}"
        )));
    }
    let theta_grid: Vec<f64> = (0..n_theta)
        .map(|i| PI * i as f64 / (n_theta - 1) as f64)
        .collect();
    let phi_grid: Vec<f64> = (0..n_phi)
        .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
        .collect();
    let mut points = Vec::with_capacity(n_theta * n_phi);
    for &theta in &theta_grid {
        for &phi in &phi_grid {
            points.push((theta, phi));
        }
    }
    let flat = harmonic_ratio(spin, &points, periods)?;
    let ratios = flat.chunks(n_phi).map(|row| row.to_vec()).collect();
    Ok(HarmonicMap {
        theta_grid,
        phi_grid,
        ratios,
    })
}

/// Which protocol parameter a sensitivity row perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviatedParameter {
    Baseline,
    PulseInstant,
    PulseAngle,
    InitialPolarAngle,
    InitialAzimuthalAngle,
}

/// One perturbed rerun of the single-pulse protocol.
#[derive(Debug, Clone)]
pub struct SensitivityRow {
    pub parameter: DeviatedParameter,
    /// Signed fractional deviation (multiplicative for pulse parameters,
    /// additive in units of pi/2 for the preparation angles).
    pub deviation: f64,
    pub fidelity: Vec<f64>,
    pub mean_post_pulse: f64,
    pub ripple_post_pulse: f64,
}

/// Sensitivity of the stabilized fidelity to off-optimal parameters.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub times: Vec<f64>,
    pub rows: Vec<SensitivityRow>,
    pub baseline: N2Params,
    pub bound: CatBound,
    pub eta: f64,
    pub twice_i: u32,
}

/// Reruns the single-pulse protocol under +/-5% and +/-10% deviations of the
/// pulse instant and angle (multiplicative) and of the initial-state
/// preparation angles (additive offsets of the same fractions of pi/2). The
/// target cat keeps the baseline phase throughout. Post-pulse statistics are
/// taken over the window where the deviated run has already pulsed.
pub fn sensitivity_scan(
    spin: Spin,
    eta: f64,
    bound: CatBound,
    baseline: &N2Params,
) -> Result<SensitivityReport> {
    let fractions = [0.05, -0.05, 0.10, -0.10];
    let mut cases = vec![(DeviatedParameter::Baseline, 0.0)];
    for parameter in [
        DeviatedParameter::PulseInstant,
        DeviatedParameter::PulseAngle,
        DeviatedParameter::InitialPolarAngle,
        DeviatedParameter::InitialAzimuthalAngle,
    ] {
        for f in fractions {
            cases.push((parameter, f));
        }
    }

    let reference = run_n2(spin, eta, bound, baseline, None)?;
    let times = reference.times.clone();
    let mut rows = Vec::with_capacity(cases.len());
    for (parameter, deviation) in cases {
        let mut p = *baseline;
        match parameter {
            DeviatedParameter::Baseline => {}
            DeviatedParameter::PulseInstant => p.t_r *= 1.0 + deviation,
            DeviatedParameter::PulseAngle => p.theta_r *= 1.0 + deviation,
            DeviatedParameter::InitialPolarAngle => p.theta_css += deviation * PI / 2.0,
            DeviatedParameter::InitialAzimuthalAngle => p.phi_css += deviation * PI / 2.0,
        }
        let fid = if parameter == DeviatedParameter::Baseline {
            reference.fidelity.clone()
        } else {
            run_on_grid(spin, eta, bound, &p, baseline.varphi, &times)?
        };
        let window_start = baseline.t_r.max(p.t_r);
        let post: Vec<f64> = times
            .iter()
            .zip(&fid)
            .filter(|(t, _)| **t >= window_start)
            .map(|(_, f)| *f)
            .collect();
        let mean = post.iter().sum::<f64>() / post.len() as f64;
        let max = post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = post.iter().cloned().fold(f64::INFINITY, f64::min);
        rows.push(SensitivityRow {
            parameter,
            deviation,
            fidelity: fid,
            mean_post_pulse: mean,
            ripple_post_pulse: (max - min) / 2.0,
        });
    }
    Ok(SensitivityReport {
        times,
        rows,
        baseline: *baseline,
        bound,
        eta,
        twice_i: spin.twice(),
    })
}

fn run_on_grid(
    spin: Spin,
    eta: f64,
    bound: CatBound,
    params: &N2Params,
    target_varphi: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    let spec = HamiltonianSpec::new(spin, eta)?;
    let psi0 = coherent_spin_state(spin, params.theta_css, params.phi_css);
    let schedule = PulseSchedule::single_x(params.t_r, params.theta_r)?;
    let target = cat_target(spin, bound, target_varphi);
    let states = evolve_pure(&psi0, &spec, &schedule, times)?;
    states.iter().map(|s| fidelity(&target, s)).collect()
}

/// One [`run_n2`] per dephasing rate (zero rates use the unitary path).
pub fn decoherence_series(
    spin: Spin,
    eta: f64,
    bound: CatBound,
    params: &N2Params,
    gamma_list: &[f64],
) -> Result<Vec<(f64, ProtocolResult)>> {
    gamma_list
        .iter()
        .map(|&g| {
            let gamma = if g > 0.0 { Some(g) } else { None };
            Ok((g, run_n2(spin, eta, bound, params, gamma)?))
        })
        .collect()
}

/// Result of fitting F(t) = F0 exp(-t/tau) + F_sat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub f0: f64,
    pub tau: f64,
    pub f_sat: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// The grid scan ended on a boundary: the series does not decay on the
    /// scanned scale and `tau` is not trustworthy.
    pub at_boundary: bool,
}

/// Fits a saturating exponential by scanning tau on a log grid (linear least
/// squares gives F0 and F_sat in closed form at each tau) and refining the
/// best interior grid point by golden section.
pub fn fit_decay(times: &[f64], fidelity_series: &[f64]) -> Result<DecayFit> {
    if times.len() != fidelity_series.len() {
        return Err(QcatError::DimensionMismatch {
            expected: times.len(),
            got: fidelity_series.len(),
        });
    }
    if times.len() < 10 {
        return Err(QcatError::InvalidArgument(format!(
            "need at least 10 samples to fit a decay, got {}",
            times.len()
        )));
    }
    let span = times.last().unwrap() - times.first().unwrap();
    if span <= 0.0 {
        return Err(QcatError::InvalidArgument("times must span an interval".into()));
    }

    let sse = |tau: f64| -> (f64, f64, f64) {
        // least squares for (f0, fsat) in f = f0 * exp(-t/tau) + fsat
        let n = times.len() as f64;
        let mut sx = 0.0;
        let mut sxx = 0.0;
        let mut sy = 0.0;
        let mut sxy = 0.0;
        for (t, f) in times.iter().zip(fidelity_series) {
            let x = (-t / tau).exp();
            sx += x;
            sxx += x * x;
            sy += f;
            sxy += x * f;
        }
        let det = sxx * n - sx * sx;
        if det.abs() < 1e-14 {
            return (f64::INFINITY, 0.0, sy / n);
        }
        let f0 = (sxy * n - sx * sy) / det;
        let fsat = (sxx * sy - sx * sxy) / det;
        let mut err = 0.0;
        for (t, f) in times.iter().zip(fidelity_series) {
            let r = f0 * (-t / tau).exp() + fsat - f;
            err += r * r;
        }
        (err, f0, fsat)
    };

    let grid_n = 241;
    let log_lo = (span / 300.0).ln();
    let log_hi = (span * 30.0).ln();
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..grid_n {
        let tau = (log_lo + (log_hi - log_lo) * i as f64 / (grid_n - 1) as f64).exp();
        let (err, _, _) = sse(tau);
        if err < best.0 {
            best = (err, i);
        }
    }
    // a series the exponential does not actually improve on (relative to the
    // best constant fit) carries no decay information
    let mean = fidelity_series.iter().sum::<f64>() / times.len() as f64;
    let sse_const: f64 = fidelity_series.iter().map(|f| (f - mean) * (f - mean)).sum();
    let no_improvement = sse_const - best.0 < 1e-12 * (1.0 + sse_const);
    let at_boundary = best.1 == 0 || best.1 == grid_n - 1 || no_improvement;
    let mut tau = (log_lo + (log_hi - log_lo) * best.1 as f64 / (grid_n - 1) as f64).exp();
    if !at_boundary {
        let step = (log_hi - log_lo) / (grid_n - 1) as f64;
        let (log_tau, _) = golden_max_scalar(tau.ln() - step, tau.ln() + step, |lt| {
            -sse(lt.exp()).0
        });
        tau = log_tau.exp();
    }
    let (err, f0, f_sat) = sse(tau);
    Ok(DecayFit {
        f0,
        tau,
        f_sat,
        residual: (err / times.len() as f64).sqrt(),
        at_boundary,
    })
}

/// One decay measurement of the scaling study.
#[derive(Debug, Clone, Serialize)]
pub struct TauScalingPoint {
    pub twice_i: u32,
    pub tau: f64,
    pub gamma_tau: f64,
    pub fit: DecayFit,
    pub t_r: f64,
    pub theta_r: f64,
}

/// Fidelity-decay scaling with the spin quantum number.
#[derive(Debug, Clone, Serialize)]
pub struct TauScaling {
    /// Slope of log(1/tau) regressed on log(2I).
    pub exponent: f64,
    pub points: Vec<TauScalingPoint>,
    pub excluded: Vec<(u32, String)>,
    pub eta: f64,
    pub gamma: f64,
}

/// For each spin, optimizes the polar-bound protocol, applies dephasing with
/// rate `gamma` after the pulse, samples the cat fidelity through the exact
/// Liouvillian stepper until it has visibly saturated (or t = 10/gamma), fits
/// the saturating exponential, and regresses log(1/tau) on log(2I).
pub fn tau_scaling(twice_i_list: &[u32], eta: f64, gamma: f64) -> Result<TauScaling> {
    tau_scaling_with(twice_i_list, eta, gamma, OptimizerConfig::default())
}

pub fn tau_scaling_with(
    twice_i_list: &[u32],
    eta: f64,
    gamma: f64,
    optimizer: OptimizerConfig,
) -> Result<TauScaling> {
    let mut unique = twice_i_list.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() < 4 {
        return Err(QcatError::InvalidArgument(format!(
            "need at least 4 distinct spins, got {}",
            unique.len()
        )));
    }
    if gamma <= 0.0 {
        return Err(QcatError::InvalidArgument(
            "decay scaling needs a positive dephasing rate".into(),
        ));
    }

    let horizon = 10.0 / gamma;
    let dt_out = (horizon / 40_000.0).max(0.05);
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for &twice_i in &unique {
        let spin = Spin::from_twice(twice_i)?;
        let opt = crate::optimize::optimize_with(spin, eta, CatBound::Polar, optimizer)?;
        let params = N2Params::from(&opt);
        let spec = HamiltonianSpec::new(spin, eta)?;
        let prop = Propagator::for_spec(&spec);
        let psi0 = coherent_spin_state(spin, params.theta_css, params.phi_css);
        let rot = rotation_operator(spin, [1.0, 0.0, 0.0], params.theta_r)?;
        let post = prop.apply(&psi0, params.t_r).apply(&rot);
        let target = cat_target(spin, CatBound::Polar, params.varphi);

        let stepper =
            LindbladPropagator::new(&spec, &DephasingConfig::new(gamma)?, dt_out)?;
        let mut v = crate::dynamics::vec_density(&post.to_density());
        let mut series = Vec::new();
        let chunk = 200usize;
        'outer: loop {
            for _ in 0..chunk {
                let rho = crate::dynamics::unvec_density(&v, spin.dim());
                series.push(fidelity_mixed(&target, &rho)?);
                if (series.len() - 1) as f64 * dt_out >= horizon {
                    break 'outer;
                }
                v = stepper.advance(&v);
            }
            // saturation probe: stop sampling once the recent envelope has
            // closed most of the gap to the tail estimate
            let n = series.len();
            if n < 400 {
                continue;
            }
            let tail = &series[n - n / 10..];
            let f_sat = tail.iter().sum::<f64>() / tail.len() as f64;
            let f0 = series[0] - f_sat;
            let recent = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if f0 > 0.0 && recent - f_sat < 0.05 * f0 {
                break;
            }
        }
        // the fit window ends where the fidelity first closes 90% of the gap
        // to saturation; beyond that the series only probes slower residual
        // relaxation of the populations
        let tail = &series[series.len() - series.len() / 10..];
        let f_sat_est = tail.iter().sum::<f64>() / tail.len() as f64;
        let f0_est = series[0] - f_sat_est;
        let cut = if f0_est > 0.0 {
            series
                .iter()
                .position(|f| f - f_sat_est <= 0.1 * f0_est)
                .unwrap_or(series.len())
                .max(30)
                .min(series.len())
        } else {
            series.len()
        };
        let series = &series[..cut];
        let times: Vec<f64> = (0..series.len()).map(|j| j as f64 * dt_out).collect();
        let fit = fit_decay(&times, series)?;
        if fit.at_boundary {
            excluded.push((twice_i, format!("decay fit hit the tau grid boundary (tau = {:.3e})", fit.tau)));
            continue;
        }
        points.push(TauScalingPoint {
            twice_i,
            tau: fit.tau,
            gamma_tau: gamma * fit.tau,
            fit,
            t_r: params.t_r,
            theta_r: params.theta_r,
        });
    }

    if points.len() < 2 {
        return Err(QcatError::Convergence {
            details: "fewer than two usable decay fits for the scaling regression".into(),
        });
    }
    // slope of log(1/tau) on log(2I)
    let xs: Vec<f64> = points.iter().map(|p| (p.twice_i as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (1.0 / p.tau).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(TauScaling {
        exponent: sxy / sxx,
        points,
        excluded,
        eta,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spin(t: u32) -> Spin {
        Spin::from_twice(t).unwrap()
    }

    fn reference_params() -> N2Params {
        // near-optimal polar-bound operating point for I = 5/2, eta = 1
        N2Params::new(0.175, PI / 4.0, 0.0)
    }

    #[test]
    fn n2_series_are_consistent() {
        let r = run_n2(spin(5), 1.0, CatBound::Polar, &reference_params(), None).unwrap();
        assert_eq!(r.times.len(), r.fidelity.len());
        assert_eq!(r.times.len(), r.rqfi.len());
        assert!(r.fidelity.iter().all(|f| (0.0..=1.0 + 1e-12).contains(f)));
        assert!(r.rqfi.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        assert_eq!(r.pulse_times, vec![0.175]);
        let snaps = r.snapshots.as_ref().unwrap();
        assert_eq!(snaps.len(), 4);
        assert_eq!(snaps[0].label, "initial");
        // post-pulse plateau is high while the initial overlap is small
        assert!(r.fidelity[0] < 0.3);
        let max_post = r
            .fidelity
            .iter()
            .zip(&r.times)
            .filter(|(_, t)| **t >= 0.175)
            .map(|(f, _)| *f)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_post > 0.9, "max post-pulse fidelity {max_post}");
    }

    #[test]
    fn n2_grid_density_does_not_change_shared_samples() {
        let p = reference_params();
        let coarse = run_n2_sampled(spin(5), 1.0, CatBound::Polar, &p, None, 401).unwrap();
        let fine = run_n2_sampled(spin(5), 1.0, CatBound::Polar, &p, None, 801).unwrap();
        for j in 0..coarse.times.len() {
            assert_abs_diff_eq!(coarse.times[j], fine.times[2 * j], epsilon = 0.0);
            assert_abs_diff_eq!(
                coarse.fidelity[j],
                fine.fidelity[2 * j],
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn rqfi_ripple_exceeds_fidelity_ripple_on_stabilized_run() {
        let r = run_n2(spin(5), 1.0, CatBound::Polar, &reference_params(), None).unwrap();
        let post: Vec<(f64, f64)> = r
            .times
            .iter()
            .zip(r.fidelity.iter().zip(&r.rqfi))
            .filter(|(t, _)| **t >= 0.175)
            .map(|(_, (f, q))| (*f, *q))
            .collect();
        let (fmax, fmin) = post
            .iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), (f, _)| {
                (a.max(*f), b.min(*f))
            });
        let (qmax, qmin) = post
            .iter()
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), (_, q)| {
                (a.max(*q), b.min(*q))
            });
        assert!(
            qmax - qmin > fmax - fmin,
            "rqfi swing {} vs fidelity swing {}",
            qmax - qmin,
            fmax - fmin
        );
    }

    #[test]
    fn four_component_protocol_reaches_the_template() {
        let config = N4Config {
            n2: Some(N2Params::new(0.175, 0.8377580409572781, 0.0)), // 48 deg twin
            ..N4Config::default()
        };
        let out = run_n4(&config).unwrap();
        assert!(out.x_cat_fidelity > 0.95, "x-cat {}", out.x_cat_fidelity);
        assert!(out.template_fidelity > 0.95, "template {}", out.template_fidelity);

        // near-full swing against the fixed template, strongly suppressed
        // variation against the rotating target
        let n_post = 8 * 128;
        let post = &out.protocol.fidelity[out.protocol.fidelity.len() - n_post..];
        let swing = post.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - post.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(swing > 0.9, "swing {swing}");
        let rot = out.protocol.fidelity_rotating.as_ref().unwrap();
        let rot_post = &rot[rot.len() - n_post..];
        let pp = rot_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - rot_post.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(pp < 0.2 * swing, "rotating pp {pp} vs swing {swing}");

        // dominant nonzero bin sits at the second harmonic of the fundamental
        let amps = dft_amplitudes(post);
        let dominant = (1..amps.len())
            .max_by(|a, b| amps[*a].partial_cmp(&amps[*b]).unwrap())
            .unwrap();
        assert_eq!(dominant, 16, "expected the 2 w1 bin (16), got {dominant}");
    }

    #[test]
    fn harmonic_ratio_values() {
        let s = spin(5);
        let ratios = harmonic_ratio(
            s,
            &[
                (0.0, 0.0),            // |Z>
                (PI / 2.0, PI / 2.0),  // |Y>
                (PI / 2.0, 0.0),       // |X>
            ],
            8,
        )
        .unwrap();
        // the countertwisting axes give near-unity ratios; the saddle gives a
        // pure fundamental
        match ratios[0] {
            HarmonicRatio::Finite(v) => assert!((v - 1.0).abs() < 0.05, "Z ratio {v}"),
            other => panic!("unexpected {other:?}"),
        }
        match ratios[1] {
            HarmonicRatio::Finite(v) => assert!((v - 1.0).abs() < 0.05, "Y ratio {v}"),
            other => panic!("unexpected {other:?}"),
        }
        match ratios[2] {
            HarmonicRatio::Finite(v) => assert!(v < 1e-10, "X ratio {v}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn harmonic_map_symmetric_under_half_turn() {
        let s = spin(5);
        let pts: Vec<(f64, f64)> = vec![(0.8, 0.3), (0.8, 0.3 + PI), (1.9, 2.0), (1.9, 2.0 + PI)];
        let r = harmonic_ratio(s, &pts, 8).unwrap();
        for pair in r.chunks(2) {
            match (pair[0], pair[1]) {
                (HarmonicRatio::Finite(a), HarmonicRatio::Finite(b)) => {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-9);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn harmonic_ratio_rejects_other_spins_and_short_windows() {
        assert!(harmonic_ratio(spin(4), &[(0.0, 0.0)], 8).is_err());
        assert!(harmonic_ratio(spin(5), &[(0.0, 0.0)], 4).is_err());
    }

    #[test]
    fn sensitivity_baseline_row_matches_direct_run() {
        let s = spin(3);
        let params = N2Params::new(0.4, 0.6, 0.0);
        let report = sensitivity_scan(s, 0.3, CatBound::Polar, &params).unwrap();
        assert_eq!(report.rows.len(), 17);
        let direct = run_n2(s, 0.3, CatBound::Polar, &params, None).unwrap();
        let baseline = &report.rows[0];
        assert_eq!(baseline.parameter, DeviatedParameter::Baseline);
        for (a, b) in baseline.fidelity.iter().zip(&direct.fidelity) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn decoherence_series_monotone_in_gamma() {
        let p = reference_params();
        let series =
            decoherence_series(spin(5), 1.0, CatBound::Polar, &p, &[0.0, 1e-3, 1e-2]).unwrap();
        let f0 = &series[0].1.fidelity;
        let f1 = &series[1].1.fidelity;
        let f2 = &series[2].1.fidelity;
        for j in 0..f0.len() {
            assert!(f1[j] <= f0[j] + 1e-6, "j={j}: {} vs {}", f1[j], f0[j]);
            assert!(f2[j] <= f1[j] + 1e-6, "j={j}: {} vs {}", f2[j], f1[j]);
        }
    }

    #[test]
    fn decay_fit_recovers_exact_generator() {
        let times: Vec<f64> = (0..200).map(|k| 0.1 * k as f64).collect();
        let series: Vec<f64> = times.iter().map(|t| 0.5 * (-t / 3.0).exp() + 0.4).collect();
        let fit = fit_decay(&times, &series).unwrap();
        assert!(!fit.at_boundary);
        assert_abs_diff_eq!(fit.f0, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.tau, 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.f_sat, 0.4, epsilon = 1e-6);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn decay_fit_tolerates_oscillatory_ripple() {
        let times: Vec<f64> = (0..400).map(|k| 0.05 * k as f64).collect();
        let series: Vec<f64> = times
            .iter()
            .map(|t| 0.3 * (-t / 2.0).exp() + 0.65 + 0.02 * (22.0 * t).sin() * (-t / 2.0).exp())
            .collect();
        let fit = fit_decay(&times, &series).unwrap();
        assert!((fit.tau - 2.0).abs() / 2.0 < 0.05, "tau {}", fit.tau);
    }

    #[test]
    fn decay_fit_flags_constant_series() {
        let times: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
        let series = vec![0.7; 50];
        let fit = fit_decay(&times, &series).unwrap();
        assert!(fit.at_boundary);
    }

    #[test]
    fn decay_fit_validates_input() {
        assert!(fit_decay(&[0.0, 1.0], &[1.0, 0.5]).is_err());
        let times: Vec<f64> = (0..12).map(|k| k as f64).collect();
        assert!(fit_decay(&times, &times[..10].to_vec()).is_err());
    }

    #[test]
    fn tau_scaling_needs_enough_spins() {
        assert!(tau_scaling(&[2, 3, 4], 1.0, 1e-2).is_err());
        assert!(tau_scaling(&[2, 3, 4, 5], 1.0, 0.0).is_err());
    }
}
