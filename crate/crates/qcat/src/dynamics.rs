//! Unitary and dissipative time evolution under the quadrupole interaction.
//!
//! The Hamiltonian in simulation units (hbar = 1, f_Q = 1, omega_Q = 2*pi) is
//!
//! ```text
//! H = (2*pi/6) * [ 3 Iz^2 - I(I+1) * casimir_toggle + eta (Ix^2 - Iy^2) ]
//! ```
//!
//! The Casimir term is proportional to the identity, so including or dropping
//! it only changes states by a global phase. Free evolution is computed
//! exactly through the eigendecomposition of H (dimensions never exceed 10);
//! dephasing is integrated with a fixed-step RK4 scheme under automatic step
//! halving, or stepped exactly through the exponential of the Liouvillian.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::error::{QcatError, Result};
use crate::linalg::{self, CMat, CVec, HermitianEigen};
use crate::spin::{DensityMatrix, PulseEvent, Spin, SpinOps, State};

/// Parameters of the quadrupole Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSpec {
    pub spin: Spin,
    /// Biaxiality of the field gradient, in [0, 1].
    pub eta: f64,
    /// Whether to keep the I(I+1) identity shift.
    pub include_casimir: bool,
}

impl HamiltonianSpec {
    pub fn new(spin: Spin, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(QcatError::InvalidArgument(format!(
                "eta must lie in [0, 1], got {eta}"
            )));
        }
        Ok(Self {
            spin,
            eta,
            include_casimir: true,
        })
    }

    pub fn without_casimir(mut self) -> Self {
        self.include_casimir = false;
        self
    }
}

/// The quadrupole Hamiltonian for the given parameters.
pub fn qi_hamiltonian(spec: &HamiltonianSpec) -> CMat {
    let ops = SpinOps::new(spec.spin);
    let mut h = &ops.iz * &ops.iz * C64::new(3.0, 0.0);
    if spec.include_casimir {
        h -= &ops.casimir;
    }
    h += (&ops.ix * &ops.ix - &ops.iy * &ops.iy) * C64::new(spec.eta, 0.0);
    h * C64::new(TAU / 6.0, 0.0)
}

/// The fully biaxial Hamiltonian reduced to (omega_Q/3)(Iz^2 - Iy^2).
///
/// For eta = 1 the Casimir-subtracted form collapses to this expression:
/// 3 Iz^2 - I^2 + Ix^2 - Iy^2 = 2 (Iz^2 - Iy^2).
pub fn eta1_reduced_hamiltonian(spin: Spin) -> CMat {
    let ops = SpinOps::new(spin);
    (&ops.iz * &ops.iz - &ops.iy * &ops.iy) * C64::new(TAU / 3.0, 0.0)
}

/// Cached eigendecomposition of a Hamiltonian, giving exact propagators at
/// arbitrary times.
#[derive(Debug, Clone)]
pub struct Propagator {
    eigen: HermitianEigen,
}

impl Propagator {
    pub fn new(h: &CMat) -> Result<Self> {
        Ok(Self {
            eigen: HermitianEigen::new(h)?,
        })
    }

    pub fn for_spec(spec: &HamiltonianSpec) -> Self {
        Self::new(&qi_hamiltonian(spec)).expect("qi_hamiltonian is Hermitian")
    }

    /// U(t) = exp(-i H t).
    pub fn at(&self, t: f64) -> CMat {
        self.eigen.unitary_at(t)
    }

    /// U(t) |psi>.
    pub fn apply(&self, psi: &State, t: f64) -> State {
        State::try_new(self.eigen.evolve(psi.amplitudes(), t))
            .expect("unitary evolution preserves the norm")
    }

    /// Eigenvalues of the underlying Hamiltonian (angular frequencies).
    pub fn frequencies(&self) -> &nalgebra::DVector<f64> {
        &self.eigen.values
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }
}

/// exp(-i h t) for a Hermitian matrix; errors on non-Hermitian input.
pub fn propagator(h: &CMat, t: f64) -> Result<CMat> {
    Ok(Propagator::new(h)?.at(t))
}

/// Closed-form propagator of the I = 5/2 reduced biaxial Hamiltonian:
///
/// ```text
/// U(t) = [cos(w1 t) - 1]/w1^2 * H1^2 - i sin(w1 t)/w1 * H1 + 1
/// ```
///
/// with H1 = (omega_Q/3)(Iz^2 - Iy^2) and w1 = 2*sqrt(7)*omega_Q/3. The form
/// follows from the spectrum {0, 0, +w1, +w1, -w1, -w1}.
pub fn closed_form_u_5half(t: f64) -> CMat {
    let spin = Spin::from_twice(5).expect("5/2 in supported range");
    let h1 = eta1_reduced_hamiltonian(spin);
    let w1 = crate::spin::fundamental_frequency_5half();
    let h1_sq = &h1 * &h1;
    let cos_coeff = ((w1 * t).cos() - 1.0) / (w1 * w1);
    let sin_coeff = (w1 * t).sin() / w1;
    h1_sq * C64::new(cos_coeff, 0.0) + h1 * C64::new(0.0, -sin_coeff) + CMat::identity(6, 6)
}

/// An ordered sequence of instantaneous pulses with strictly increasing times.
#[derive(Debug, Clone, Default)]
pub struct PulseSchedule {
    events: Vec<PulseEvent>,
}

impl PulseSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(events: Vec<PulseEvent>) -> Result<Self> {
        for pair in events.windows(2) {
            if pair[1].time <= pair[0].time {
                return Err(QcatError::UnorderedPulses);
            }
        }
        Ok(Self { events })
    }

    pub fn single_x(time: f64, angle: f64) -> Result<Self> {
        Ok(Self {
            events: vec![PulseEvent::x(time, angle)?],
        })
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(QcatError::UnsortedGrid);
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(QcatError::UnsortedGrid);
    }
    Ok(())
}

fn pulse_operators(spin: Spin, schedule: &PulseSchedule) -> Result<Vec<CMat>> {
    schedule
        .events()
        .iter()
        .map(|e| crate::spin::rotation_operator(spin, e.axis, e.angle))
        .collect()
}

/// Piecewise-exact evolution of a pure state: free propagation between
/// pulses, instantaneous rotations at pulse times. A pulse that coincides
/// with a requested sample time is applied before the sample is emitted.
pub fn evolve_pure(
    psi0: &State,
    spec: &HamiltonianSpec,
    schedule: &PulseSchedule,
    t_grid: &[f64],
) -> Result<Vec<State>> {
    check_grid(t_grid)?;
    if psi0.dim() != spec.spin.dim() {
        return Err(QcatError::DimensionMismatch {
            expected: spec.spin.dim(),
            got: psi0.dim(),
        });
    }
    let prop = Propagator::for_spec(spec);
    let rotations = pulse_operators(spec.spin, schedule)?;

    let mut out = Vec::with_capacity(t_grid.len());
    let mut current = psi0.clone();
    let mut t_ref = 0.0;
    let mut next_pulse = 0;
    for &t in t_grid {
        while next_pulse < rotations.len() && schedule.events()[next_pulse].time <= t {
            let pt = schedule.events()[next_pulse].time;
            current = prop.apply(&current, pt - t_ref).apply(&rotations[next_pulse]);
            t_ref = pt;
            next_pulse += 1;
        }
        out.push(prop.apply(&current, t - t_ref));
    }
    Ok(out)
}

/// Phase-flip dephasing with rate gamma (in units of f_Q).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingConfig {
    pub gamma: f64,
}

impl DephasingConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma < 0.0 || !gamma.is_finite() {
            return Err(QcatError::InvalidArgument(format!(
                "dephasing rate must be finite and nonnegative, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }
}

/// Lindblad operators of the spin-I phase-flip channel:
///
/// ```text
/// L_m = sqrt( C(2I, m) * ((1 - e^-gamma)/2)^m * ((1 + e^-gamma)/2)^(2I-m) ) * Iz^m
/// ```
///
/// for m = 1..2I. In the weak-damping limit the m = 1 operator dominates and
/// the set reduces to sqrt(gamma I) Iz.
pub fn lindblad_operators(spin: Spin, config: &DephasingConfig) -> Vec<CMat> {
    let two_i = spin.twice();
    let p = (1.0 - (-config.gamma).exp()) / 2.0;
    let q = (1.0 + (-config.gamma).exp()) / 2.0;
    let ops = SpinOps::new(spin);
    let mut out = Vec::with_capacity(two_i as usize);
    let mut iz_power = ops.iz.clone();
    for m in 1..=two_i {
        let coeff = (binomial(two_i, m) * p.powi(m as i32) * q.powi((two_i - m) as i32)).sqrt();
        out.push(&iz_power * C64::new(coeff, 0.0));
        if m < two_i {
            iz_power = &iz_power * &ops.iz;
        }
    }
    out
}

fn binomial(n: u32, k: u32) -> f64 {
    // exact in u128 for the n <= 9 needed here
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for j in 0..k.min(n - k) {
        num *= (n - j) as u128;
        den *= (j + 1) as u128;
    }
    (num / den) as f64
}

struct LindbladRhs {
    h: CMat,
    ls: Vec<CMat>,
    ldl_half: CMat, // (1/2) sum_m L_m† L_m
}

impl LindbladRhs {
    fn new(h: CMat, ls: Vec<CMat>) -> Self {
        let d = h.nrows();
        let mut ldl = CMat::zeros(d, d);
        for l in &ls {
            ldl += l.adjoint() * l;
        }
        Self {
            h,
            ls,
            ldl_half: ldl.scale(0.5),
        }
    }

    fn eval(&self, rho: &CMat) -> CMat {
        let mut drho = (&self.h * rho - rho * &self.h) * C64::new(0.0, -1.0);
        for l in &self.ls {
            drho += l * rho * l.adjoint();
        }
        drho -= &self.ldl_half * rho;
        drho -= rho * &self.ldl_half;
        drho
    }

    fn rk4_step(&self, rho: &CMat, dt: f64) -> CMat {
        let k1 = self.eval(rho);
        let k2 = self.eval(&(rho + k1.scale(dt / 2.0)));
        let k3 = self.eval(&(rho + k2.scale(dt / 2.0)));
        let k4 = self.eval(&(rho + k3.scale(dt)));
        rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0)
    }
}

fn inf_norm(m: &CMat) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn lindblad_pass(
    rhs: &LindbladRhs,
    rho0: &CMat,
    rotations: &[CMat],
    schedule: &PulseSchedule,
    t_grid: &[f64],
    h_step: f64,
) -> Vec<CMat> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut rho = rho0.clone();
    let mut t_ref = 0.0;
    let mut next_pulse = 0;

    let advance = |rho: &mut CMat, from: f64, to: f64| {
        let span = to - from;
        if span <= 0.0 {
            return;
        }
        let n = (span / h_step).ceil().max(1.0) as usize;
        let dt = span / n as f64;
        for _ in 0..n {
            *rho = rhs.rk4_step(rho, dt);
        }
    };

    for &t in t_grid {
        while next_pulse < rotations.len() && schedule.events()[next_pulse].time <= t {
            let pt = schedule.events()[next_pulse].time;
            advance(&mut rho, t_ref, pt);
            let r = &rotations[next_pulse];
            rho = r * &rho * r.adjoint();
            t_ref = pt;
            next_pulse += 1;
        }
        let mut sample = rho.clone();
        advance(&mut sample, t_ref, t);
        // keep integrating from the last sample rather than from t_ref so the
        // work grows linearly in the grid length
        rho = sample.clone();
        t_ref = t;
        out.push(sample);
    }
    out
}

/// Integrates the Lindblad master equation
/// `drho/dt = -i[H, rho] + sum_m (L_m rho L_m† - {L_m† L_m, rho}/2)`
/// over `t_grid`, applying pulses as `rho -> R rho R†`.
///
/// A fixed-step fourth-order scheme is refined by step halving until every
/// emitted sample changes by less than 1e-8 (max over matrix entries, which
/// bounds the change of any fidelity computed from the sample).
pub fn evolve_lindblad(
    rho0: &DensityMatrix,
    spec: &HamiltonianSpec,
    config: &DephasingConfig,
    schedule: &PulseSchedule,
    t_grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    check_grid(t_grid)?;
    if rho0.dim() != spec.spin.dim() {
        return Err(QcatError::DimensionMismatch {
            expected: spec.spin.dim(),
            got: rho0.dim(),
        });
    }
    let h = qi_hamiltonian(spec);
    let ls = lindblad_operators(spec.spin, config);
    let rotations = pulse_operators(spec.spin, schedule)?;
    let rhs = LindbladRhs::new(h, ls);

    let scale = inf_norm(&rhs.h) + inf_norm(&rhs.ldl_half) + 1.0;
    let mut h_step = 0.25 / scale;
    let mut previous = lindblad_pass(&rhs, rho0.entries(), &rotations, schedule, t_grid, h_step);
    for _ in 0..16 {
        h_step /= 2.0;
        let refined = lindblad_pass(&rhs, rho0.entries(), &rotations, schedule, t_grid, h_step);
        let worst = previous
            .iter()
            .zip(&refined)
            .map(|(a, b)| linalg::max_abs_diff(a, b))
            .fold(0.0, f64::max);
        previous = refined;
        if worst < 1e-8 {
            return Ok(previous
                .into_iter()
                .map(DensityMatrix::from_entries_unchecked)
                .collect());
        }
    }
    Err(QcatError::Convergence {
        details: format!(
            "step halving stalled at h = {h_step:.3e} without samples settling below 1e-8"
        ),
    })
}

/// Column-major vectorization of a density matrix.
pub fn vec_density(rho: &DensityMatrix) -> CVec {
    CVec::from_column_slice(rho.entries().as_slice())
}

/// Inverse of [`vec_density`].
pub fn unvec_density(v: &CVec, dim: usize) -> DensityMatrix {
    DensityMatrix::from_entries_unchecked(CMat::from_column_slice(dim, dim, v.as_slice()))
}

/// The Liouvillian superoperator of H and a Lindblad-operator set, acting on
/// column-major vectorized density matrices.
pub fn liouvillian(h: &CMat, ls: &[CMat]) -> CMat {
    let d = h.nrows();
    let id = CMat::identity(d, d);
    let mut sup = (id.kronecker(h) - h.transpose().kronecker(&id)) * C64::new(0.0, -1.0);
    for l in ls {
        let ldl = l.adjoint() * l;
        sup += l.conjugate().kronecker(l);
        sup -= id.kronecker(&ldl).scale(0.5);
        sup -= ldl.transpose().kronecker(&id).scale(0.5);
    }
    sup
}

/// Exact fixed-increment stepper for the Lindblad equation, built from the
/// matrix exponential of the Liouvillian. Suited to long-horizon dephasing
/// runs where an ODE integrator would need millions of steps.
#[derive(Debug, Clone)]
pub struct LindbladPropagator {
    step: CMat,
    dt: f64,
    dim: usize,
}

impl LindbladPropagator {
    pub fn new(spec: &HamiltonianSpec, config: &DephasingConfig, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(QcatError::InvalidArgument(format!(
                "step must be positive, got {dt}"
            )));
        }
        let h = qi_hamiltonian(spec);
        let ls = lindblad_operators(spec.spin, config);
        let sup = liouvillian(&h, &ls) * C64::new(dt, 0.0);
        Ok(Self {
            step: sup.exp(),
            dt,
            dim: spec.spin.dim(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Advances a vectorized density matrix by one increment.
    pub fn advance(&self, v: &CVec) -> CVec {
        &self.step * v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{cat_target, coherent_spin_state, dicke_state, CatBound};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn spin(t: u32) -> Spin {
        Spin::from_twice(t).unwrap()
    }

    fn spec(t: u32, eta: f64) -> HamiltonianSpec {
        HamiltonianSpec::new(spin(t), eta).unwrap()
    }

    #[test]
    fn eta_validation() {
        assert!(HamiltonianSpec::new(spin(5), 1.5).is_err());
        assert!(HamiltonianSpec::new(spin(5), -0.1).is_err());
    }

    #[test]
    fn eta1_hamiltonian_reduces_to_biaxial_form() {
        // 3 Iz^2 + Ix^2 - Iy^2 = I(I+1) + 2 (Iz^2 - Iy^2), so the
        // Casimir-subtracted eta = 1 Hamiltonian is exactly the reduced form.
        let s = spin(5);
        let full = qi_hamiltonian(&spec(5, 1.0));
        let reduced = eta1_reduced_hamiltonian(s);
        assert!(linalg::max_abs_diff(&full, &reduced) < 1e-12);

        let no_casimir = qi_hamiltonian(&spec(5, 1.0).without_casimir());
        let ops = SpinOps::new(s);
        let shift = &ops.casimir * C64::new(TAU / 6.0, 0.0);
        assert!(linalg::max_abs_diff(&no_casimir, &(reduced + shift)) < 1e-12);
    }

    #[test]
    fn eta0_hamiltonian_commutes_with_iz() {
        let h = qi_hamiltonian(&spec(7, 0.0));
        let ops = SpinOps::new(spin(7));
        let comm = &h * &ops.iz - &ops.iz * &h;
        assert!(inf_norm(&comm) < 1e-12);
        // |I, +/-I> are eigenstates: H|psi> is proportional to |psi>
        for twice_m in [7i32, -7] {
            let psi = dicke_state(spin(7), twice_m).unwrap();
            let image = &h * psi.amplitudes();
            let lambda = psi.amplitudes().dotc(&image);
            let residual = image - psi.amplitudes() * lambda;
            assert!(residual.norm() < 1e-12);
        }
    }

    #[test]
    fn biaxial_5half_spectrum_has_double_degeneracy() {
        let h1 = eta1_reduced_hamiltonian(spin(5));
        let scaled = &h1 * C64::new(3.0 / TAU, 0.0); // (3/omega_Q) H1
        let eig = HermitianEigen::new(&scaled).unwrap();
        let mut vals: Vec<f64> = eig.values.iter().cloned().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = 2.0 * 7.0f64.sqrt();
        let expect = [-r, -r, 0.0, 0.0, r, r];
        for (got, want) in vals.iter().zip(expect) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-9);
        }
    }

    #[test]
    fn propagator_identity_group_unitarity() {
        let h = qi_hamiltonian(&spec(5, 0.6));
        let prop = Propagator::new(&h).unwrap();
        assert!(linalg::max_abs_diff(&prop.at(0.0), &CMat::identity(6, 6)) < 1e-12);
        let u1 = prop.at(0.31);
        let u2 = prop.at(1.18);
        let u12 = prop.at(0.31 + 1.18);
        assert!(linalg::max_abs_diff(&(&u1 * &u2), &u12) < 1e-11);
        assert!(linalg::unitarity_error(&u1) < 1e-11);
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let mut h = qi_hamiltonian(&spec(2, 0.5));
        h[(0, 1)] += C64::new(0.1, 0.0);
        assert!(Propagator::new(&h).is_err());
    }

    #[test]
    fn eigendecomposition_reconstructs_hamiltonian() {
        let h = qi_hamiltonian(&spec(9, 0.37));
        let eig = HermitianEigen::new(&h).unwrap();
        assert!(linalg::max_abs_diff(&eig.reconstruct(), &h) < 1e-12);
    }

    #[test]
    fn closed_form_matches_numeric_propagator() {
        let h1 = eta1_reduced_hamiltonian(spin(5));
        let prop = Propagator::new(&h1).unwrap();
        assert!(linalg::max_abs_diff(&closed_form_u_5half(0.0), &CMat::identity(6, 6)) < 1e-14);
        for k in 0..100 {
            let t = 0.1 * k as f64;
            let err = linalg::max_abs_diff(&closed_form_u_5half(t), &prop.at(t));
            assert!(err < 1e-10, "t = {t}: {err:e}");
        }
    }

    #[test]
    fn closed_form_returns_to_identity_after_one_period() {
        let w1 = crate::spin::fundamental_frequency_5half();
        let u = closed_form_u_5half(TAU / w1);
        assert!(linalg::max_abs_diff(&u, &CMat::identity(6, 6)) < 1e-10);
        // half period: U = 1 - (2/w1^2) H1^2 checked against the oracle
        let h1 = eta1_reduced_hamiltonian(spin(5));
        let expect = CMat::identity(6, 6) - (&h1 * &h1).scale(2.0 / (w1 * w1));
        assert!(linalg::max_abs_diff(&closed_form_u_5half(PI / w1), &expect) < 1e-10);
        let prop = Propagator::new(&h1).unwrap();
        assert!(linalg::max_abs_diff(&closed_form_u_5half(PI / w1), &prop.at(PI / w1)) < 1e-10);
    }

    #[test]
    fn stationary_state_stays_put() {
        let sp = spec(5, 0.0);
        let psi0 = dicke_state(spin(5), 5).unwrap();
        let grid: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
        let states = evolve_pure(&psi0, &sp, &PulseSchedule::empty(), &grid).unwrap();
        for s in &states {
            assert_abs_diff_eq!(s.inner(&psi0).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_angle_pulse_is_free_evolution() {
        let sp = spec(5, 0.8);
        let psi0 = coherent_spin_state(spin(5), PI / 2.0, 0.0);
        let grid: Vec<f64> = (0..40).map(|k| 0.05 * k as f64).collect();
        let free = evolve_pure(&psi0, &sp, &PulseSchedule::empty(), &grid).unwrap();
        let with_null_pulse = evolve_pure(
            &psi0,
            &sp,
            &PulseSchedule::single_x(0.52, 0.0).unwrap(),
            &grid,
        )
        .unwrap();
        for (a, b) in free.iter().zip(&with_null_pulse) {
            assert_abs_diff_eq!(a.inner(b).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn evolve_requires_sorted_grid() {
        let sp = spec(2, 0.5);
        let psi0 = dicke_state(spin(2), 2).unwrap();
        let err = evolve_pure(&psi0, &sp, &PulseSchedule::empty(), &[0.2, 0.1]);
        assert!(err.is_err());
        let err = evolve_pure(&psi0, &sp, &PulseSchedule::empty(), &[-0.1, 0.2]);
        assert!(err.is_err());
    }

    #[test]
    fn pulse_schedule_requires_increasing_times() {
        let e1 = PulseEvent::x(0.5, 1.0).unwrap();
        let e2 = PulseEvent::x(0.5, 0.5).unwrap();
        assert!(PulseSchedule::new(vec![e1, e2]).is_err());
    }

    #[test]
    fn fidelity_from_plus_x_is_periodic_under_biaxial_coupling() {
        let sp = spec(5, 1.0);
        let psi0 = coherent_spin_state(spin(5), PI / 2.0, 0.0);
        let t1 = TAU / crate::spin::fundamental_frequency_5half();
        let grid: Vec<f64> = (0..30).map(|k| 0.03 * k as f64).collect();
        let shifted: Vec<f64> = grid.iter().map(|t| t + t1).collect();
        let a = evolve_pure(&psi0, &sp, &PulseSchedule::empty(), &grid).unwrap();
        let b = evolve_pure(&psi0, &sp, &PulseSchedule::empty(), &shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(
                psi0.inner(x).norm(),
                psi0.inner(y).norm(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn casimir_toggle_only_changes_global_phase() {
        let with = spec(7, 0.42);
        let without = with.without_casimir();
        let psi0 = coherent_spin_state(spin(7), PI / 2.0, 0.3);
        let grid: Vec<f64> = (0..25).map(|k| 0.07 * k as f64).collect();
        let a = evolve_pure(&psi0, &with, &PulseSchedule::empty(), &grid).unwrap();
        let b = evolve_pure(&psi0, &without, &PulseSchedule::empty(), &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x.inner(y).norm(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn lindblad_operators_vanish_at_zero_rate() {
        let ls = lindblad_operators(spin(5), &DephasingConfig::new(0.0).unwrap());
        assert_eq!(ls.len(), 5);
        for l in &ls {
            assert!(inf_norm(l) < 1e-300);
        }
    }

    #[test]
    fn weak_damping_reduces_to_single_operator() {
        let gamma = 1e-6;
        let s = spin(2);
        let ls = lindblad_operators(s, &DephasingConfig::new(gamma).unwrap());
        let ops = SpinOps::new(s);
        let expect = &ops.iz * C64::new((gamma * s.value()).sqrt(), 0.0);
        let rel = linalg::max_abs_diff(&ls[0], &expect) / inf_norm(&expect);
        assert!(rel < 10.0 * gamma, "relative error {rel:e}");
    }

    #[test]
    fn lindblad_coefficients_match_exact_binomials() {
        // independent oracle: integer binomials evaluated in exact arithmetic
        let gamma = 0.01;
        let s = spin(3);
        let ls = lindblad_operators(s, &DephasingConfig::new(gamma).unwrap());
        assert_eq!(ls.len(), 3);
        let p = (1.0 - (-gamma as f64).exp()) / 2.0;
        let q = (1.0 + (-gamma as f64).exp()) / 2.0;
        let binoms = [3.0, 3.0, 1.0]; // C(3,1), C(3,2), C(3,3)
        for (m, l) in ls.iter().enumerate() {
            let k = m + 1;
            let coeff = (binoms[m] * p.powi(k as i32) * q.powi(3 - k as i32)).sqrt();
            // L_m = coeff * Iz^m; check the top-left entry Iz^m[(0,0)] = (3/2)^m
            let want = coeff * 1.5f64.powi(k as i32);
            assert_abs_diff_eq!(l[(0, 0)].re, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn lindblad_zero_rate_matches_pure_evolution() {
        let sp = spec(3, 0.7);
        let psi0 = coherent_spin_state(spin(3), PI / 2.0, 0.0);
        let grid: Vec<f64> = (0..12).map(|k| 0.1 * k as f64).collect();
        let schedule = PulseSchedule::single_x(0.35, PI / 4.0).unwrap();
        let pure = evolve_pure(&psi0, &sp, &schedule, &grid).unwrap();
        let mixed = evolve_lindblad(
            &psi0.to_density(),
            &sp,
            &DephasingConfig::new(0.0).unwrap(),
            &schedule,
            &grid,
        )
        .unwrap();
        for (psi, rho) in pure.iter().zip(&mixed) {
            let err = linalg::max_abs_diff(rho.entries(), psi.to_density().entries());
            assert!(err < 1e-9, "{err:e}");
        }
    }

    #[test]
    fn lindblad_preserves_trace_and_hermiticity() {
        let sp = spec(5, 1.0);
        let psi0 = coherent_spin_state(spin(5), PI / 2.0, 0.0);
        let grid: Vec<f64> = (0..20).map(|k| 0.1 * k as f64).collect();
        let out = evolve_lindblad(
            &psi0.to_density(),
            &sp,
            &DephasingConfig::new(1e-3).unwrap(),
            &PulseSchedule::single_x(0.18, PI / 4.0).unwrap(),
            &grid,
        )
        .unwrap();
        for rho in &out {
            let tr = rho.trace();
            assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-9);
            assert!(tr.im.abs() < 1e-9);
            assert!(linalg::hermiticity_error(rho.entries()) < 1e-9);
            let min_eig = HermitianEigen::new(rho.entries()).unwrap().values.min();
            assert!(min_eig > -1e-7);
        }
    }

    #[test]
    fn purity_is_monotone_without_pulses() {
        let sp = spec(5, 0.5);
        let psi0 = coherent_spin_state(spin(5), PI / 2.0, 0.0);
        let grid: Vec<f64> = (0..40).map(|k| 0.05 * k as f64).collect();
        let out = evolve_lindblad(
            &psi0.to_density(),
            &sp,
            &DephasingConfig::new(1e-2).unwrap(),
            &PulseSchedule::empty(),
            &grid,
        )
        .unwrap();
        let purities: Vec<f64> = out.iter().map(|r| r.purity()).collect();
        for pair in purities.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "purity rose: {pair:?}");
        }
    }

    #[test]
    fn exponential_stepper_matches_rk4_integrator() {
        let sp = spec(5, 1.0);
        let config = DephasingConfig::new(1e-2).unwrap();
        let psi0 = coherent_spin_state(spin(5), PI / 2.0, 0.0);
        let rho0 = psi0.to_density();
        let dt = 0.1;
        let grid: Vec<f64> = (0..=15).map(|k| dt * k as f64).collect();
        let rk4 = evolve_lindblad(&rho0, &sp, &config, &PulseSchedule::empty(), &grid).unwrap();

        let stepper = LindbladPropagator::new(&sp, &config, dt).unwrap();
        let mut v = vec_density(&rho0);
        for (k, reference) in rk4.iter().enumerate() {
            if k > 0 {
                v = stepper.advance(&v);
            }
            let rho = unvec_density(&v, 6);
            let err = linalg::max_abs_diff(rho.entries(), reference.entries());
            assert!(err < 1e-8, "step {k}: {err:e}");
        }
    }

    #[test]
    fn weak_damping_preserves_closed_system_fidelity_trace() {
        // gamma = 1e-4 should be nearly indistinguishable from gamma = 0 over
        // a ten-pulse-window horizon
        let sp = spec(5, 1.0);
        let t_r = 0.175;
        let psi0 = coherent_spin_state(spin(5), PI / 2.0, 0.0);
        let schedule = PulseSchedule::single_x(t_r, PI / 4.0).unwrap();
        let grid: Vec<f64> = (0..=60).map(|k| 10.0 * t_r * k as f64 / 60.0).collect();
        let target = cat_target(spin(5), CatBound::Polar, 0.0);

        let pure = evolve_pure(&psi0, &sp, &schedule, &grid).unwrap();
        let damped = evolve_lindblad(
            &psi0.to_density(),
            &sp,
            &DephasingConfig::new(1e-4).unwrap(),
            &schedule,
            &grid,
        )
        .unwrap();
        for (psi, rho) in pure.iter().zip(&damped) {
            let f_pure = crate::measures::fidelity(&target, psi).unwrap();
            let f_mixed = crate::measures::fidelity_mixed(&target, rho).unwrap();
            assert!((f_pure - f_mixed).abs() < 1e-2);
        }
    }
}
