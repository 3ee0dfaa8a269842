//! Exact propagation of the qubit and its bath through repeated pulse cycles,
//! magnetization trajectories and derived metrics.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HamiltonianParts;
use crate::opcore::{embed_spin_op, HermitianEigen, Operator, SpinAxis, UnitaryEigen, C64, I};
use crate::seq::{PulseSequence, SequenceElement};
use crate::tol;

/// Density matrix on system (x) bath.
#[derive(Clone, Debug)]
pub struct QuantumState {
    rho: Operator,
}

impl QuantumState {
    pub fn new(rho: Operator) -> Result<Self> {
        if !rho.is_hermitian(tol::HERMITICITY) {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol::TRACE {
            return Err(Error::invalid(format!("density matrix trace {tr} is not 1")));
        }
        let min = HermitianEigen::new(&rho)?
            .values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -tol::POSITIVITY {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min}")));
        }
        Ok(QuantumState { rho })
    }

    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    /// Unnormalized Bloch vector `Tr(rho 2 S_a)`.
    pub fn magnetization(&self) -> [f64; 3] {
        let n = self.rho.dim().trailing_zeros() as usize;
        let mut m = [0.0; 3];
        for (k, axis) in SpinAxis::ALL.into_iter().enumerate() {
            let o = embed_spin_op(0, axis, n).expect("state dimension is a power of two");
            m[k] = 2.0 * trace_product(self.rho.matrix(), o.matrix()).re;
        }
        m
    }
}

/// `I / D + S_dir (x) I_B / 2^K`: qubit polarized along `direction`, bath maximally mixed.
pub fn prepare_state(parts: &HamiltonianParts, direction: SpinAxis) -> Result<QuantumState> {
    let n = parts.n_sites();
    let dim = parts.dim();
    let bath = (dim / 2) as f64;
    let rho = Operator::identity(dim).scale(1.0 / dim as f64) + embed_spin_op(0, direction, n)?.scale(1.0 / bath);
    QuantumState::new(rho)
}

/// Where a trajectory is sampled. A sample landing exactly on a pulse is taken
/// after the pulse. The `t = 0` sample is always included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplePoints {
    CycleBoundaries,
    /// Midpoints between consecutive pulses of the pulse train.
    WindowCenters,
    /// Immediately after every pulse.
    EveryPulse,
    /// Every `dt`; `dt` must divide the cycle time.
    Uniform {
        dt: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
    pub mz: Vec<f64>,
    pub sample_points: SamplePoints,
    pub cycle_time: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| (self.mx[i].powi(2) + self.my[i].powi(2) + self.mz[i].powi(2)).sqrt())
            .collect()
    }

    pub fn transverse(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mx[i].hypot(self.my[i])).collect()
    }
}

fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    // Tr(AB) = sum_ij A_ij B_ji
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `exp(-i (1+eps) pi S_phi)` restricted to the system qubit, row-major 2x2.
fn pulse_2x2(phase: f64, epsilon: f64) -> [C64; 4] {
    let half = (1.0 + epsilon) * PI / 2.0;
    let (c, s) = (half.cos(), half.sin());
    // -i s (cos phi sigma_x + sin phi sigma_y)
    let off_up = C64::new(0.0, -s) * C64::from_polar(1.0, -phase);
    let off_dn = C64::new(0.0, -s) * C64::from_polar(1.0, phase);
    [C64::new(c, 0.0), off_up, off_dn, C64::new(c, 0.0)]
}

/// `(R (x) I_B) M` without forming the full pulse matrix.
fn pulse_left(r: &[C64; 4], m: &Operator) -> Operator {
    let d = m.dim();
    let h = d / 2;
    let src = m.matrix();
    let mut out = DMatrix::<C64>::zeros(d, d);
    for col in 0..d {
        for row in 0..h {
            let top = src[(row, col)];
            let bot = src[(row + h, col)];
            out[(row, col)] = r[0] * top + r[1] * bot;
            out[(row + h, col)] = r[2] * top + r[3] * bot;
        }
    }
    Operator::from_matrix(out).expect("square")
}

/// Element propagators for one Hamiltonian, with delay exponentials cached.
struct Stepper {
    eig: HermitianEigen,
    cache: HashMap<u64, Operator>,
    epsilon: f64,
}

impl Stepper {
    fn new(parts: &HamiltonianParts, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::arg("epsilon must be finite"));
        }
        Ok(Stepper {
            eig: HermitianEigen::new(&parts.h_total)?,
            cache: HashMap::new(),
            epsilon,
        })
    }

    fn delay(&mut self, d: f64) -> &Operator {
        let eig = &self.eig;
        self.cache.entry(d.to_bits()).or_insert_with(|| eig.propagator(d))
    }

    /// Element propagator applied on the left of `m`.
    fn apply(&mut self, e: &SequenceElement, m: &Operator) -> Operator {
        match *e {
            SequenceElement::Delay(0.0) => m.clone(),
            SequenceElement::Delay(d) => self.delay(d) * m,
            SequenceElement::Pulse { phase } => pulse_left(&pulse_2x2(phase, self.epsilon), m),
        }
    }
}

/// Exact propagator of one cycle: delays `exp(-i H t)` and pulses
/// `exp(-i (1+eps) pi S_phi)` multiplied in time order.
pub fn cycle_propagator(s: &PulseSequence, parts: &HamiltonianParts, epsilon: f64) -> Result<Operator> {
    if s.is_empty() {
        return Err(Error::arg("sequence is empty"));
    }
    let mut st = Stepper::new(parts, epsilon)?;
    let mut u = Operator::identity(parts.dim());
    for e in s.elements() {
        u = st.apply(e, &u);
    }
    check_unitary(&u)?;
    Ok(u)
}

fn check_unitary(u: &Operator) -> Result<()> {
    let defect = u.unitarity_defect();
    if defect > tol::UNITARITY {
        return Err(Error::Numerical(format!("propagator unitarity defect {defect:e}")));
    }
    Ok(())
}

/// Point inside a cycle: after the first `elem` elements plus `delta` of free evolution.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Checkpoint {
    elem: usize,
    delta: f64,
}

struct Sample {
    cycle: usize,
    checkpoint: usize,
    time: f64,
}

struct Plan {
    checkpoints: Vec<Checkpoint>,
    samples: Vec<Sample>,
    warnings: Vec<String>,
}

impl Plan {
    fn add(&mut self, cycle: usize, cp: Checkpoint, time: f64) {
        let idx = match self.checkpoints.iter().position(|c| *c == cp) {
            Some(i) => i,
            None => {
                self.checkpoints.push(cp);
                self.checkpoints.len() - 1
            }
        };
        self.samples.push(Sample {
            cycle,
            checkpoint: idx,
            time,
        });
    }
}

/// Start times of every element within the cycle, plus the cycle end.
fn element_times(s: &PulseSequence) -> Vec<f64> {
    let mut t = 0.0;
    let mut out = Vec::with_capacity(s.elements().len() + 1);
    out.push(0.0);
    for e in s.elements() {
        t += e.duration();
        out.push(t);
    }
    out
}

/// Checkpoint for an offset into the cycle, after any pulse sitting exactly there.
fn locate(times: &[f64], offset: f64, eps: f64) -> Checkpoint {
    let elem = times.iter().rposition(|&t| t <= offset + eps).unwrap_or(0);
    Checkpoint {
        elem,
        delta: (offset - times[elem]).max(0.0),
    }
}

fn plan(s: &PulseSequence, n_cycles: usize, points: &SamplePoints) -> Result<Plan> {
    let tc = s.cycle_time();
    let eps = tol::TIME * tc.max(1.0);
    let times = element_times(s);
    let origin = Checkpoint { elem: 0, delta: 0.0 };
    let mut p = Plan {
        checkpoints: Vec::new(),
        samples: Vec::new(),
        warnings: Vec::new(),
    };
    p.add(0, origin, 0.0);
    let pulse_idx: Vec<usize> = s
        .elements()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_pulse())
        .map(|(i, _)| i)
        .collect();
    match points {
        SamplePoints::CycleBoundaries => {
            for c in 1..=n_cycles {
                p.add(c, origin, c as f64 * tc);
            }
        }
        SamplePoints::EveryPulse => {
            if pulse_idx.is_empty() {
                p.warnings.push("sequence has no pulses; only t = 0 sampled".into());
            }
            for c in 0..n_cycles {
                for &i in &pulse_idx {
                    let t = c as f64 * tc + times[i + 1];
                    p.add(
                        c,
                        Checkpoint {
                            elem: i + 1,
                            delta: 0.0,
                        },
                        t,
                    );
                }
            }
        }
        SamplePoints::WindowCenters => {
            if tc <= 0.0 {
                return Err(Error::arg("window-centre sampling needs a positive cycle time"));
            }
            let train: Vec<f64> = (0..n_cycles)
                .flat_map(|c| pulse_idx.iter().map(move |&i| (c, i)))
                .map(|(c, i)| c as f64 * tc + times[i])
                .collect();
            if train.len() < 2 {
                p.warnings.push("fewer than two pulses; no window centres".into());
            }
            let mut skipped = 0;
            for w in train.windows(2) {
                if w[1] - w[0] <= eps {
                    skipped += 1;
                    continue;
                }
                let mid = 0.5 * (w[0] + w[1]);
                let mut c = (mid / tc).floor() as usize;
                let mut off = mid - c as f64 * tc;
                if off >= tc - eps {
                    c += 1;
                    off = 0.0;
                }
                p.add(c, locate(&times, off, eps), mid);
            }
            if skipped > 0 {
                p.warnings.push(format!("skipped {skipped} zero-gap windows"));
            }
        }
        SamplePoints::Uniform { dt } => {
            let dt = *dt;
            if !(dt > 0.0 && dt.is_finite()) || tc <= 0.0 {
                return Err(Error::arg("uniform sampling needs dt > 0 and a positive cycle time"));
            }
            let per = (tc / dt).round();
            if per < 1.0 || (per * dt - tc).abs() > tol::TIME * tc {
                return Err(Error::arg(format!("dt = {dt} does not divide the cycle time {tc}")));
            }
            let per = per as usize;
            for k in 1..=n_cycles * per {
                let (c, r) = (k / per, k % per);
                let off = r as f64 * dt;
                p.add(c, locate(&times, off, eps), c as f64 * tc + off);
            }
        }
    }
    Ok(p)
}

/// Partial propagators `W` for each checkpoint and the full cycle propagator.
fn checkpoint_propagators(
    s: &PulseSequence,
    st: &mut Stepper,
    dim: usize,
    checkpoints: &[Checkpoint],
) -> (Vec<Operator>, Operator) {
    let mut out: Vec<Option<Operator>> = vec![None; checkpoints.len()];
    let mut w = Operator::identity(dim);
    let n = s.elements().len();
    for j in 0..=n {
        for (k, cp) in checkpoints.iter().enumerate() {
            if cp.elem == j {
                out[k] = Some(if cp.delta > 0.0 {
                    st.delay(cp.delta) * &w
                } else {
                    w.clone()
                });
            }
        }
        if j < n {
            w = st.apply(&s.elements()[j], &w);
        }
    }
    (
        out.into_iter().map(|o| o.expect("every checkpoint visited")).collect(),
        w,
    )
}

fn observables(n_sites: usize) -> Result<[Operator; 3]> {
    Ok([
        embed_spin_op(0, SpinAxis::X, n_sites)?.scale(2.0),
        embed_spin_op(0, SpinAxis::Y, n_sites)?.scale(2.0),
        embed_spin_op(0, SpinAxis::Z, n_sites)?.scale(2.0),
    ])
}

fn finish(raw: Vec<[f64; 3]>, plan: Plan, points: &SamplePoints, tc: f64, extra_warnings: Vec<String>) -> Trajectory {
    let m0 = raw[0];
    let mut norm = m0[0].hypot(m0[1]);
    if norm <= 1e-12 {
        norm = (m0[0].powi(2) + m0[1].powi(2) + m0[2].powi(2)).sqrt();
    }
    if norm <= 1e-12 {
        norm = 1.0;
    }
    let mut warnings = plan.warnings;
    warnings.extend(extra_warnings);
    Trajectory {
        times: plan.samples.iter().map(|s| s.time).collect(),
        mx: raw.iter().map(|m| m[0] / norm).collect(),
        my: raw.iter().map(|m| m[1] / norm).collect(),
        mz: raw.iter().map(|m| m[2] / norm).collect(),
        sample_points: points.clone(),
        cycle_time: tc,
        warnings,
    }
}

fn check_inputs(parts: &HamiltonianParts, rho0: &QuantumState, n_cycles: usize) -> Result<()> {
    if n_cycles == 0 {
        return Err(Error::arg("n_cycles must be >= 1"));
    }
    if rho0.rho().dim() != parts.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.rho().dim(),
            right: parts.dim(),
        });
    }
    Ok(())
}

/// Magnetization trajectory over `n_cycles` cycles, normalized so the
/// initial transverse magnetization is 1.
///
/// Cycle powers are evaluated in the eigenbasis of the cycle propagator, so the
/// cost per sample does not grow with the cycle index. If that decomposition
/// cannot be verified the state is stepped cycle by cycle instead.
pub fn evolve(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    rho0: &QuantumState,
    n_cycles: usize,
    points: &SamplePoints,
) -> Result<Trajectory> {
    check_inputs(parts, rho0, n_cycles)?;
    if s.is_empty() {
        return Err(Error::arg("sequence is empty"));
    }
    let plan = plan(s, n_cycles, points)?;
    let mut st = Stepper::new(parts, epsilon)?;
    let (ws, u) = checkpoint_propagators(s, &mut st, parts.dim(), &plan.checkpoints);
    check_unitary(&u)?;
    let obs = observables(parts.n_sites())?;
    // O_k = W_k^dagger (2 S_a) W_k
    let per_cp: Vec<[Operator; 3]> = ws
        .iter()
        .map(|w| [obs[0].conjugate_by(w), obs[1].conjugate_by(w), obs[2].conjugate_by(w)])
        .collect();

    let mut notes = Vec::new();
    let raw = match UnitaryEigen::new(&u) {
        Ok(eig) => spectral_samples(&eig, rho0.rho(), &per_cp, &plan.samples),
        Err(e) => {
            notes.push(format!("spectral propagation unavailable ({e}); stepped directly"));
            stepped_samples(&u, rho0.rho(), &per_cp, &plan.samples)
        }
    };
    Ok(finish(raw, plan, points, s.cycle_time(), notes))
}

/// State after `n_cycles` full cycles, taking the `n`-th power of the cycle
/// propagator through its eigendecomposition.
pub fn evolve_state(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    rho0: &QuantumState,
    n_cycles: usize,
) -> Result<QuantumState> {
    check_inputs(parts, rho0, n_cycles.max(1))?;
    let u = cycle_propagator(s, parts, epsilon)?;
    let un = match UnitaryEigen::new(&u) {
        Ok(eig) => eig.apply(|th| C64::from_polar(1.0, n_cycles as f64 * th)),
        Err(_) => {
            let mut acc = Operator::identity(u.dim());
            for _ in 0..n_cycles {
                acc = &u * &acc;
            }
            acc
        }
    };
    let rho = &(&un * rho0.rho()) * &un.dagger();
    QuantumState::new(rho.hermitian_part())
}

fn spectral_samples(eig: &UnitaryEigen, rho: &Operator, per_cp: &[[Operator; 3]], samples: &[Sample]) -> Vec<[f64; 3]> {
    let d = eig.dim();
    let rho_t = eig.to_eigenbasis(rho);
    // M_ab = rho~_ab O~_ba so that <O>(c) = sum_ab p_a M_ab conj(p_b), p_a = e^{i c theta_a}
    let mats: Vec<[DMatrix<C64>; 3]> = per_cp
        .iter()
        .map(|ops| {
            let f = |o: &Operator| {
                let ot = eig.to_eigenbasis(o);
                DMatrix::from_fn(d, d, |a, b| rho_t[(a, b)] * ot[(b, a)])
            };
            [f(&ops[0]), f(&ops[1]), f(&ops[2])]
        })
        .collect();
    let mut phases = vec![C64::new(0.0, 0.0); d];
    let mut last_cycle = usize::MAX;
    samples
        .iter()
        .map(|smp| {
            if smp.cycle != last_cycle {
                for (p, &th) in phases.iter_mut().zip(eig.phases.iter()) {
                    *p = C64::from_polar(1.0, smp.cycle as f64 * th);
                }
                last_cycle = smp.cycle;
            }
            let m = &mats[smp.checkpoint];
            let mut out = [0.0; 3];
            for (k, mk) in m.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..d {
                    let mut col = C64::new(0.0, 0.0);
                    for a in 0..d {
                        col += phases[a] * mk[(a, b)];
                    }
                    acc += col * phases[b].conj();
                }
                out[k] = acc.re;
            }
            out
        })
        .collect()
}

fn stepped_samples(u: &Operator, rho: &Operator, per_cp: &[[Operator; 3]], samples: &[Sample]) -> Vec<[f64; 3]> {
    let mut cur = rho.clone();
    let mut cycle = 0;
    samples
        .iter()
        .map(|smp| {
            while cycle < smp.cycle {
                cur = &(u * &cur) * &u.dagger();
                cycle += 1;
            }
            let ops = &per_cp[smp.checkpoint];
            [
                trace_product(cur.matrix(), ops[0].matrix()).re,
                trace_product(cur.matrix(), ops[1].matrix()).re,
                trace_product(cur.matrix(), ops[2].matrix()).re,
            ]
        })
        .collect()
}

/// Reference propagation that applies every element of every cycle to the
/// state in turn. Slower than [`evolve`]; used to cross-check it.
pub fn evolve_direct(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    rho0: &QuantumState,
    n_cycles: usize,
    points: &SamplePoints,
) -> Result<Trajectory> {
    check_inputs(parts, rho0, n_cycles)?;
    if s.is_empty() {
        return Err(Error::arg("sequence is empty"));
    }
    let plan = plan(s, n_cycles, points)?;
    let mut st = Stepper::new(parts, epsilon)?;
    let obs = observables(parts.n_sites())?;
    let measure = |rho: &Operator| {
        [
            trace_product(rho.matrix(), obs[0].matrix()).re,
            trace_product(rho.matrix(), obs[1].matrix()).re,
            trace_product(rho.matrix(), obs[2].matrix()).re,
        ]
    };
    // state at every (cycle, checkpoint) reached in time order
    let mut wanted: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, smp) in plan.samples.iter().enumerate() {
        wanted.insert((smp.cycle, smp.checkpoint), i);
    }
    let mut raw = vec![[0.0; 3]; plan.samples.len()];
    let mut rho = rho0.rho().clone();
    let n = s.elements().len();
    let max_cycle = plan.samples.iter().map(|s| s.cycle).max().unwrap_or(0);
    for c in 0..=max_cycle {
        for j in 0..=n {
            for (k, cp) in plan.checkpoints.iter().enumerate() {
                if cp.elem != j {
                    continue;
                }
                if let Some(&i) = wanted.get(&(c, k)) {
                    let r = if cp.delta > 0.0 {
                        let w = st.delay(cp.delta).clone();
                        &(&w * &rho) * &w.dagger()
                    } else {
                        rho.clone()
                    };
                    raw[i] = measure(&r);
                }
            }
            if j < n {
                let e = s.elements()[j];
                let left = st.apply(&e, &rho);
                rho = st.apply(&e, &left.dagger()).dagger();
            }
        }
    }
    Ok(finish(raw, plan, points, s.cycle_time(), Vec::new()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    My,
    /// Bloch-vector length `sqrt(Mx^2 + My^2 + Mz^2)`.
    Total,
}

/// Time at which the channel first drops below `1/e`, linearly interpolated.
pub fn decay_time(traj: &Trajectory, channel: Channel) -> Result<f64> {
    let signal = match channel {
        Channel::My => traj.my.clone(),
        Channel::Total => traj.total(),
    };
    let first = *signal.first().ok_or_else(|| Error::arg("empty trajectory"))?;
    if (first - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("signal starts at {first}, not 1")));
    }
    let target = (-1.0f64).exp();
    for i in 1..signal.len() {
        if signal[i] < target {
            let (t0, t1) = (traj.times[i - 1], traj.times[i]);
            let (s0, s1) = (signal[i - 1], signal[i]);
            return Ok(t0 + (s0 - target) / (s0 - s1) * (t1 - t0));
        }
    }
    Err(Error::NotDecayed {
        last: *signal.last().unwrap_or(&first),
    })
}

/// Mean rotation per pulse of the transverse magnetization about z, positive
/// from +y towards -x. Uses cycle-boundary samples while the transverse
/// magnitude stays above 0.1.
pub fn precession_angle(traj: &Trajectory, n_pulses_per_cycle: usize) -> Result<f64> {
    if n_pulses_per_cycle == 0 {
        return Err(Error::arg("pulses per cycle must be >= 1"));
    }
    let tc = traj.cycle_time;
    let eps = tol::TIME * tc.max(1.0);
    let mut k = Vec::new();
    let mut theta: Vec<f64> = Vec::new();
    for i in 0..traj.len() {
        let c = (traj.times[i] / tc).round();
        if (traj.times[i] - c * tc).abs() > eps {
            continue;
        }
        if traj.mx[i].hypot(traj.my[i]) <= 0.1 {
            break;
        }
        let raw = (-traj.mx[i]).atan2(traj.my[i]);
        let th = match theta.last() {
            Some(&prev) => prev + (raw - prev + PI).rem_euclid(2.0 * PI) - PI,
            None => raw,
        };
        k.push(c);
        theta.push(th);
    }
    if k.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} cycle-boundary samples with transverse signal above 0.1",
            k.len()
        )));
    }
    let n = k.len() as f64;
    let mk = k.iter().sum::<f64>() / n;
    let mt = theta.iter().sum::<f64>() / n;
    let sxx: f64 = k.iter().map(|x| (x - mk).powi(2)).sum();
    let sxy: f64 = k.iter().zip(&theta).map(|(x, y)| (x - mk) * (y - mt)).sum();
    Ok(sxy / sxx / n_pulses_per_cycle as f64)
}

/// Qubit process matrix in the Pauli basis `{I, X, Y, Z}` after `n_cycles`,
/// with the bath starting maximally mixed and traced out.
pub fn process_matrix(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    n_cycles: usize,
) -> Result<[[C64; 4]; 4]> {
    let u = cycle_propagator(s, parts, epsilon)?;
    let mut series = ChannelSeries::new(parts)?;
    for _ in 0..n_cycles {
        series.step(&u);
    }
    Ok(chi_from_images(&series.images()))
}

/// `Re chi_00`: overlap with the identity channel.
pub fn process_fidelity(s: &PulseSequence, parts: &HamiltonianParts, epsilon: f64, n_cycles: usize) -> Result<f64> {
    Ok(process_matrix(s, parts, epsilon, n_cycles)?[0][0].re)
}

/// `(time, fidelity)` after `0, 1, ..., n_cycles` cycles.
pub fn fidelity_series(
    s: &PulseSequence,
    parts: &HamiltonianParts,
    epsilon: f64,
    n_cycles: usize,
) -> Result<Vec<(f64, f64)>> {
    let u = cycle_propagator(s, parts, epsilon)?;
    let tc = s.cycle_time();
    let mut series = ChannelSeries::new(parts)?;
    let mut out = vec![(0.0, chi_from_images(&series.images())[0][0].re)];
    for c in 1..=n_cycles {
        series.step(&u);
        out.push((c as f64 * tc, chi_from_images(&series.images())[0][0].re));
    }
    Ok(out)
}

fn pauli_2x2() -> [[C64; 4]; 4] {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), I);
    [[o, z, z, o], [z, o, o, z], [z, -i, i, z], [o, z, z, -o]]
}

/// Evolved inputs `U^n (P (x) I_B / 2^K) U^n^dagger` for `P = X, Y, Z`.
struct ChannelSeries {
    ops: [Operator; 3],
}

impl ChannelSeries {
    fn new(parts: &HamiltonianParts) -> Result<Self> {
        let n = parts.n_sites();
        let bath = (parts.dim() / 2) as f64;
        let f = |a| -> Result<Operator> { Ok(embed_spin_op(0, a, n)?.scale(2.0 / bath)) };
        Ok(ChannelSeries {
            ops: [f(SpinAxis::X)?, f(SpinAxis::Y)?, f(SpinAxis::Z)?],
        })
    }

    fn step(&mut self, u: &Operator) {
        let ud = u.dagger();
        for op in self.ops.iter_mut() {
            *op = &(u * &*op) * &ud;
        }
    }

    /// `E(P)` for `P = I, X, Y, Z`, row-major 2x2.
    fn images(&self) -> [[C64; 4]; 4] {
        let mut out = [[C64::new(0.0, 0.0); 4]; 4];
        out[0] = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ];
        for (k, op) in self.ops.iter().enumerate() {
            out[k + 1] = partial_trace_bath(op);
        }
        out
    }
}

fn partial_trace_bath(op: &Operator) -> [C64; 4] {
    let h = op.dim() / 2;
    let m = op.matrix();
    let mut r = [C64::new(0.0, 0.0); 4];
    for i in 0..h {
        r[0] += m[(i, i)];
        r[1] += m[(i, i + h)];
        r[2] += m[(i + h, i)];
        r[3] += m[(i + h, i + h)];
    }
    r
}

/// Process matrix from the images of the four Pauli matrices.
fn chi_from_images(images: &[[C64; 4]; 4]) -> [[C64; 4]; 4] {
    let p = pauli_2x2();
    // Column-stacked superoperator: S[:, i + 2j] = vec(E(|i><j|)),
    // |i><j| = sum_m (P_m)_{ji} / 2 P_m.
    let mut sup = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            let mut e = [C64::new(0.0, 0.0); 4];
            for m in 0..4 {
                let c = p[m][j * 2 + i] * 0.5;
                for k in 0..4 {
                    e[k] += c * images[m][k];
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    sup[r + 2 * c][i + 2 * j] = e[r * 2 + c];
                }
            }
        }
    }
    // chi_mn = Tr((conj(P_n) (x) P_m)^dagger S) / 4
    let mut chi = [[C64::new(0.0, 0.0); 4]; 4];
    for m in 0..4 {
        for n in 0..4 {
            let mut acc = C64::new(0.0, 0.0);
            for c1 in 0..2 {
                for r1 in 0..2 {
                    for c2 in 0..2 {
                        for r2 in 0..2 {
                            // (conj(P_n) (x) P_m)[(c1, r1), (c2, r2)]
                            let k = p[n][c1 * 2 + c2].conj() * p[m][r1 * 2 + r2];
                            acc += k.conj() * sup[c1 * 2 + r1][c2 * 2 + r2];
                        }
                    }
                }
            }
            chi[m][n] = acc * 0.25;
        }
    }
    chi
}
