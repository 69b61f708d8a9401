//! Periodic `N x N` FPUT lattice: force laws, right-hand sides in
//! displacement and strain form, velocity-Verlet integration and the energy
//! and compatibility diagnostics.
//!
//! Site `(m, n)` lives at index `m * N + n`; `m` runs along x. The x-bond
//! `(m, n) -> (m + 1, n)` and the y-bond `(m, n) -> (m, n + 1)` both carry
//! the index of their left/lower site, so the strain `u[m, n]` is the
//! elongation of x-bond `(m, n)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::max_abs;

pub const MIN_SIDE: usize = 8;
/// Largest admissible Verlet step; the linear stability limit is `2 / (2 sqrt 2)`.
pub const DT_MAX: f64 = 0.5;
pub const OVERFLOW_GUARD: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("operation requires {expected:?} form, state is {found:?}")]
    FormMismatch { expected: Form, found: Form },
    #[error("unstable step at t = {time}: |value| exceeded {guard:e}")]
    UnstableStep { time: f64, guard: f64 },
    #[error("invalid time step {0}: must satisfy 0 < |dt| <= {DT_MAX}")]
    InvalidStep(f64),
    #[error("lattice side {0} is below the minimum of {MIN_SIDE}")]
    SideTooSmall(usize),
    #[error("array of length {len} does not match side {side}")]
    ShapeMismatch { side: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Displacement,
    Strain,
}

/// Lattice positions and velocities. Displacement form stores one field
/// (`q`, `w = dq/dt`); strain form stores two (`u`, `v` and their rates).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    form: Form,
    side: usize,
    pub time: f64,
    pos: Vec<Vec<f64>>,
    vel: Vec<Vec<f64>>,
}

impl LatticeState {
    pub fn zeros(form: Form, side: usize) -> Result<Self, LatticeError> {
        if side < MIN_SIDE {
            return Err(LatticeError::SideTooSmall(side));
        }
        let count = match form {
            Form::Displacement => 1,
            Form::Strain => 2,
        };
        Ok(Self {
            form,
            side,
            time: 0.0,
            pos: vec![vec![0.0; side * side]; count],
            vel: vec![vec![0.0; side * side]; count],
        })
    }

    fn check(side: usize, arrays: &[&Vec<f64>]) -> Result<(), LatticeError> {
        if side < MIN_SIDE {
            return Err(LatticeError::SideTooSmall(side));
        }
        for a in arrays {
            if a.len() != side * side {
                return Err(LatticeError::ShapeMismatch { side, len: a.len() });
            }
        }
        Ok(())
    }

    pub fn displacement(side: usize, q: Vec<f64>, w: Vec<f64>) -> Result<Self, LatticeError> {
        Self::check(side, &[&q, &w])?;
        Ok(Self {
            form: Form::Displacement,
            side,
            time: 0.0,
            pos: vec![q],
            vel: vec![w],
        })
    }

    pub fn strain(
        side: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        ut: Vec<f64>,
        vt: Vec<f64>,
    ) -> Result<Self, LatticeError> {
        Self::check(side, &[&u, &v, &ut, &vt])?;
        Ok(Self {
            form: Form::Strain,
            side,
            time: 0.0,
            pos: vec![u, v],
            vel: vec![ut, vt],
        })
    }

    /// Strain state `u = q(m+1,n) - q`, `v = q(m,n+1) - q` of a displacement state.
    pub fn to_strain(&self) -> Result<Self, LatticeError> {
        self.expect(Form::Displacement)?;
        let n = self.side;
        let (dx_q, dy_q) = forward_differences(&self.pos[0], n);
        let (dx_w, dy_w) = forward_differences(&self.vel[0], n);
        let mut s = Self::strain(n, dx_q, dy_q, dx_w, dy_w)?;
        s.time = self.time;
        Ok(s)
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.pos
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.vel
    }

    pub fn positions_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.pos
    }

    pub fn velocities_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.vel
    }

    pub fn expect(&self, form: Form) -> Result<(), LatticeError> {
        if self.form == form {
            Ok(())
        } else {
            Err(LatticeError::FormMismatch {
                expected: form,
                found: self.form,
            })
        }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.pos.iter().map(|p| max_abs(p)).fold(0.0, f64::max)
    }

    /// Periodic shift by `(dm, dn)` sites: `out[m, n] = self[m - dm, n - dn]`.
    pub fn shifted(&self, dm: usize, dn: usize) -> Self {
        let n = self.side;
        let shift = |a: &Vec<f64>| {
            let mut out = vec![0.0; n * n];
            for m in 0..n {
                for j in 0..n {
                    out[((m + dm) % n) * n + (j + dn) % n] = a[m * n + j];
                }
            }
            out
        };
        Self {
            form: self.form,
            side: n,
            time: self.time,
            pos: self.pos.iter().map(shift).collect(),
            vel: self.vel.iter().map(shift).collect(),
        }
    }
}

/// `(q(m+1,n) - q(m,n), q(m,n+1) - q(m,n))` with periodic wrap.
pub fn forward_differences(q: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dx = vec![0.0; n * n];
    let mut dy = vec![0.0; n * n];
    for m in 0..n {
        let mp = (m + 1) % n;
        for j in 0..n {
            let jp = (j + 1) % n;
            dx[m * n + j] = q[mp * n + j] - q[m * n + j];
            dy[m * n + j] = q[m * n + jp] - q[m * n + j];
        }
    }
    (dx, dy)
}

/// Per-bond perturbation coefficients of the perturbed force law
/// `W'(u) = u + alpha eps^3 u + beta eps^2 u^2 - u^3 + gamma eps u^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondPerturbation {
    pub eps: f64,
    pub alpha_x: Vec<f64>,
    pub alpha_y: Vec<f64>,
    pub beta_x: Vec<f64>,
    pub beta_y: Vec<f64>,
    pub gamma_x: Vec<f64>,
    pub gamma_y: Vec<f64>,
}

impl BondPerturbation {
    pub fn zeros(side: usize, eps: f64) -> Self {
        let z = vec![0.0; side * side];
        Self {
            eps,
            alpha_x: z.clone(),
            alpha_y: z.clone(),
            beta_x: z.clone(),
            beta_y: z.clone(),
            gamma_x: z.clone(),
            gamma_y: z,
        }
    }

    /// Coefficients drawn uniformly from `[-bound, bound]` with a seeded RNG.
    pub fn sample(side: usize, eps: f64, bound: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<f64> {
            (0..side * side)
                .map(|_| {
                    if bound > 0.0 {
                        rng.random_range(-bound..=bound)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        Self {
            eps,
            alpha_x: draw(),
            alpha_y: draw(),
            beta_x: draw(),
            beta_y: draw(),
            gamma_x: draw(),
            gamma_y: draw(),
        }
    }

    pub fn max_coefficient(&self) -> f64 {
        [
            &self.alpha_x,
            &self.alpha_y,
            &self.beta_x,
            &self.beta_y,
            &self.gamma_x,
            &self.gamma_y,
        ]
        .iter()
        .map(|a| max_abs(a))
        .fold(0.0, f64::max)
    }
}

/// Interaction force between neighbouring sites.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceLaw {
    /// `W'(u) = u - u^3`.
    Cubic,
    /// `W'(u) = u`.
    Linear,
    Perturbed(Box<BondPerturbation>),
}

#[derive(Clone, Copy)]
enum Direction {
    X,
    Y,
}

impl ForceLaw {
    #[inline]
    fn bond_force(&self, dir: Direction, idx: usize, u: f64) -> f64 {
        match self {
            ForceLaw::Cubic => u - u * u * u,
            ForceLaw::Linear => u,
            ForceLaw::Perturbed(p) => {
                let (a, b, g) = match dir {
                    Direction::X => (p.alpha_x[idx], p.beta_x[idx], p.gamma_x[idx]),
                    Direction::Y => (p.alpha_y[idx], p.beta_y[idx], p.gamma_y[idx]),
                };
                let e = p.eps;
                let u3 = u * u * u;
                (u + a * (e * e * e) * u + b * (e * e) * (u * u)) - u3 + g * e * u3
            }
        }
    }

    /// Bond potential `W` with `W(0) = 0`.
    fn bond_energy(&self, dir: Direction, idx: usize, u: f64) -> f64 {
        let u2 = u * u;
        match self {
            ForceLaw::Cubic => 0.5 * u2 - 0.25 * u2 * u2,
            ForceLaw::Linear => 0.5 * u2,
            ForceLaw::Perturbed(p) => {
                let (a, b, g) = match dir {
                    Direction::X => (p.alpha_x[idx], p.beta_x[idx], p.gamma_x[idx]),
                    Direction::Y => (p.alpha_y[idx], p.beta_y[idx], p.gamma_y[idx]),
                };
                let e = p.eps;
                0.5 * u2 * (1.0 + a * e * e * e) + b * e * e * u2 * u / 3.0
                    + 0.25 * u2 * u2 * (g * e - 1.0)
            }
        }
    }

    fn check_side(&self, side: usize) {
        if let ForceLaw::Perturbed(p) = self {
            assert_eq!(p.alpha_x.len(), side * side, "perturbation arrays do not match lattice");
        }
    }
}

/// Evaluate `W'` on every x-bond and y-bond strain.
fn bond_forces(force: &ForceLaw, sx: &[f64], sy: &[f64], fx: &mut [f64], fy: &mut [f64]) {
    fx.par_iter_mut()
        .zip(fy.par_iter_mut())
        .enumerate()
        .with_min_len(4096)
        .for_each(|(i, (ox, oy))| {
            *ox = force.bond_force(Direction::X, i, sx[i]);
            *oy = force.bond_force(Direction::Y, i, sy[i]);
        });
}

/// Reusable buffers for right-hand-side evaluation.
#[derive(Debug, Clone, Default)]
pub struct RhsScratch {
    sx: Vec<f64>,
    sy: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl RhsScratch {
    fn resize(&mut self, len: usize) {
        for b in [&mut self.sx, &mut self.sy, &mut self.fx, &mut self.fy] {
            b.resize(len, 0.0);
        }
    }
}

fn displacement_accel(
    q: &[f64],
    n: usize,
    force: &ForceLaw,
    out: &mut [f64],
    s: &mut RhsScratch,
) {
    s.resize(n * n);
    s.sx.par_chunks_mut(n)
        .zip(s.sy.par_chunks_mut(n))
        .enumerate()
        .for_each(|(m, (rx, ry))| {
            let mp = (m + 1) % n;
            for j in 0..n {
                let c = q[m * n + j];
                rx[j] = q[mp * n + j] - c;
                ry[j] = q[m * n + (j + 1) % n] - c;
            }
        });
    bond_forces(force, &s.sx, &s.sy, &mut s.fx, &mut s.fy);
    let (fx, fy) = (&s.fx, &s.fy);
    out.par_chunks_mut(n).enumerate().for_each(|(m, row)| {
        let mm = (m + n - 1) % n;
        for j in 0..n {
            let jm = (j + n - 1) % n;
            row[j] = fx[m * n + j] - fx[mm * n + j] + fy[m * n + j] - fy[m * n + jm];
        }
    });
}

fn strain_accel(
    u: &[f64],
    v: &[f64],
    n: usize,
    force: &ForceLaw,
    out_u: &mut [f64],
    out_v: &mut [f64],
    s: &mut RhsScratch,
) {
    s.resize(n * n);
    bond_forces(force, u, v, &mut s.fx, &mut s.fy);
    let (f, g) = (&s.fx, &s.fy);
    out_u
        .par_chunks_mut(n)
        .zip(out_v.par_chunks_mut(n))
        .enumerate()
        .for_each(|(m, (ru, rv))| {
            let mp = (m + 1) % n;
            let mm = (m + n - 1) % n;
            for j in 0..n {
                let jp = (j + 1) % n;
                let jm = (j + n - 1) % n;
                let at = |a: &[f64], r: usize, c: usize| a[r * n + c];
                ru[j] = at(f, mp, j) - 2.0 * at(f, m, j) + at(f, mm, j) + at(g, mp, j)
                    - at(g, mp, jm)
                    - at(g, m, j)
                    + at(g, m, jm);
                rv[j] = at(g, m, jp) - 2.0 * at(g, m, j) + at(g, m, jm) + at(f, m, jp)
                    - at(f, mm, jp)
                    - at(f, m, j)
                    + at(f, mm, j);
            }
        });
}

/// Accelerations for the current positions of `state`, whatever its form.
pub fn accelerations(state: &LatticeState, force: &ForceLaw) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; state.side * state.side]; state.pos.len()];
    accelerations_into(state, force, &mut out, &mut RhsScratch::default());
    out
}

fn accelerations_into(
    state: &LatticeState,
    force: &ForceLaw,
    out: &mut [Vec<f64>],
    scratch: &mut RhsScratch,
) {
    force.check_side(state.side);
    let n = state.side;
    match state.form {
        Form::Displacement => displacement_accel(&state.pos[0], n, force, &mut out[0], scratch),
        Form::Strain => {
            let (a, b) = out.split_at_mut(1);
            strain_accel(&state.pos[0], &state.pos[1], n, force, &mut a[0], &mut b[0], scratch)
        }
    }
}

pub fn rhs_displacement(state: &LatticeState, force: &ForceLaw) -> Result<Vec<f64>, LatticeError> {
    state.expect(Form::Displacement)?;
    Ok(accelerations(state, force).remove(0))
}

pub fn rhs_strain(
    state: &LatticeState,
    force: &ForceLaw,
) -> Result<(Vec<f64>, Vec<f64>), LatticeError> {
    state.expect(Form::Strain)?;
    let mut acc = accelerations(state, force);
    let av = acc.pop().unwrap();
    let au = acc.pop().unwrap();
    Ok((au, av))
}

/// Velocity-Verlet stepper that carries the acceleration of the current
/// positions from one step to the next, so each step costs one force
/// evaluation.
#[derive(Debug, Clone, Default)]
pub struct Verlet {
    acc: Option<Vec<Vec<f64>>>,
    scratch: RhsScratch,
}

impl Verlet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drop the cached acceleration; required after editing the state by hand.
    pub fn reset(&mut self) {
        self.acc = None;
    }

    pub fn step(
        &mut self,
        state: &mut LatticeState,
        force: &ForceLaw,
        dt: f64,
    ) -> Result<(), LatticeError> {
        if !(dt != 0.0 && dt.abs() <= DT_MAX && dt.is_finite()) {
            return Err(LatticeError::InvalidStep(dt));
        }
        let len = state.side * state.side;
        let mut acc = match self.acc.take() {
            Some(a) if a.len() == state.pos.len() && a[0].len() == len => a,
            _ => {
                let mut a = vec![vec![0.0; len]; state.pos.len()];
                accelerations_into(state, force, &mut a, &mut self.scratch);
                a
            }
        };
        let half = 0.5 * dt;
        for ((p, v), a) in state.pos.iter_mut().zip(state.vel.iter_mut()).zip(&acc) {
            p.par_iter_mut()
                .zip(v.par_iter_mut())
                .zip(a.par_iter())
                .with_min_len(4096)
                .for_each(|((p, v), a)| {
                    *v += half * a;
                    *p += dt * *v;
                });
        }
        accelerations_into(state, force, &mut acc, &mut self.scratch);
        for (v, a) in state.vel.iter_mut().zip(&acc) {
            v.par_iter_mut()
                .zip(a.par_iter())
                .with_min_len(4096)
                .for_each(|(v, a)| *v += half * a);
        }
        state.time += dt;
        self.acc = Some(acc);
        let big = state
            .pos
            .iter()
            .chain(&state.vel)
            .any(|a| a.iter().any(|x| !(x.abs() <= OVERFLOW_GUARD)));
        if big {
            self.acc = None;
            return Err(LatticeError::UnstableStep {
                time: state.time,
                guard: OVERFLOW_GUARD,
            });
        }
        Ok(())
    }

    /// Advance exactly by `duration` using equal steps no longer than `dt`.
    pub fn advance(
        &mut self,
        state: &mut LatticeState,
        force: &ForceLaw,
        duration: f64,
        dt: f64,
    ) -> Result<usize, LatticeError> {
        if duration <= 0.0 {
            return Ok(0);
        }
        let steps = (duration / dt - 1e-9).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        let t_end = state.time + duration;
        for _ in 0..steps {
            self.step(state, force, h)?;
        }
        state.time = t_end;
        Ok(steps)
    }
}

/// One velocity-Verlet step without cached state.
pub fn verlet_step(
    state: &LatticeState,
    force: &ForceLaw,
    dt: f64,
) -> Result<LatticeState, LatticeError> {
    let mut next = state.clone();
    Verlet::new().step(&mut next, force, dt)?;
    Ok(next)
}

/// Total energy `sum w^2/2 + sum_bonds W(strain)`.
pub fn energy(state: &LatticeState, force: &ForceLaw) -> Result<f64, LatticeError> {
    state.expect(Form::Displacement)?;
    let n = state.side;
    let q = &state.pos[0];
    let w = &state.vel[0];
    // Per-row partial sums, reduced in a fixed order for reproducibility.
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|m| {
            let mp = (m + 1) % n;
            let mut acc = 0.0;
            for j in 0..n {
                let i = m * n + j;
                let sx = q[mp * n + j] - q[i];
                let sy = q[m * n + (j + 1) % n] - q[i];
                acc += 0.5 * w[i] * w[i]
                    + force.bond_energy(Direction::X, i, sx)
                    + force.bond_energy(Direction::Y, i, sy);
            }
            acc
        })
        .collect();
    Ok(rows.iter().sum())
}

/// `max |u(m,n+1) - u(m,n) - v(m+1,n) + v(m,n)|` plus the same for the rates.
pub fn compatibility_defect(state: &LatticeState) -> Result<f64, LatticeError> {
    state.expect(Form::Strain)?;
    let n = state.side;
    let defect = |u: &[f64], v: &[f64]| -> f64 {
        (0..n)
            .into_par_iter()
            .map(|m| {
                let mp = (m + 1) % n;
                let mut worst = 0.0_f64;
                for j in 0..n {
                    let jp = (j + 1) % n;
                    let d = u[m * n + jp] - u[m * n + j] - v[mp * n + j] + v[m * n + j];
                    worst = worst.max(d.abs());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    };
    Ok(defect(&state.pos[0], &state.pos[1]) + defect(&state.vel[0], &state.vel[1]))
}

/// One row of the lattice diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeDiagnostics {
    pub t: f64,
    pub energy: Option<f64>,
    pub compat_defect: Option<f64>,
    pub max_amp: f64,
}

impl LatticeDiagnostics {
    pub fn measure(state: &LatticeState, force: &ForceLaw) -> Self {
        Self {
            t: state.time,
            energy: energy(state, force).ok(),
            compat_defect: compatibility_defect(state).ok(),
            max_amp: state.max_amplitude(),
        }
    }

    pub const CSV_HEADER: &'static str = "t,energy,compat_defect,max_amp";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.t,
            opt_csv(self.energy),
            opt_csv(self.compat_defect),
            self.max_amp
        )
    }
}

pub(crate) fn opt_csv(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(n: usize, delta: f64) -> LatticeState {
        let mut q = vec![0.0; n * n];
        q[0] = delta;
        LatticeState::displacement(n, q, vec![0.0; n * n]).unwrap()
    }

    fn pseudo_random(len: usize, seed: u64, scale: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-scale..scale)).collect()
    }

    #[test]
    fn zero_and_constant_fields_have_no_force() {
        let n = 8;
        let s = LatticeState::zeros(Form::Displacement, n).unwrap();
        assert!(rhs_displacement(&s, &ForceLaw::Cubic).unwrap().iter().all(|&a| a == 0.0));
        let c = LatticeState::displacement(n, vec![0.3; n * n], vec![0.0; n * n]).unwrap();
        assert!(rhs_displacement(&c, &ForceLaw::Cubic).unwrap().iter().all(|&a| a == 0.0));
        let z = LatticeState::zeros(Form::Strain, n).unwrap();
        let (a, b) = rhs_strain(&z, &ForceLaw::Cubic).unwrap();
        assert!(a.iter().chain(&b).all(|&x| x == 0.0));
    }

    #[test]
    fn single_site_bump_accelerations() {
        let n = 8;
        let d = 0.1;
        let acc = rhs_displacement(&bump(n, d), &ForceLaw::Cubic).unwrap();
        assert!((acc[0] - (-4.0 * d + 4.0 * d * d * d)).abs() < 1e-15);
        assert!((acc[0] + 0.396).abs() < 1e-15);
        // (1, 0) is m = 1, n = 0.
        assert!((acc[n] - 0.099).abs() < 1e-15);
        assert!((acc[1] - 0.099).abs() < 1e-15);
        assert!((acc[(n - 1) * n] - 0.099).abs() < 1e-15);
    }

    #[test]
    fn form_mismatch_is_reported() {
        let s = LatticeState::zeros(Form::Strain, 8).unwrap();
        assert!(matches!(
            rhs_displacement(&s, &ForceLaw::Cubic),
            Err(LatticeError::FormMismatch { .. })
        ));
        assert!(energy(&s, &ForceLaw::Cubic).is_err());
        let d = LatticeState::zeros(Form::Displacement, 8).unwrap();
        assert!(compatibility_defect(&d).is_err());
        assert!(rhs_strain(&d, &ForceLaw::Cubic).is_err());
        assert!(LatticeState::zeros(Form::Strain, 4).is_err());
    }

    /// Differencing the displacement accelerations reproduces the strain
    /// right-hand side.
    #[test]
    fn strain_rhs_is_differenced_displacement_rhs() {
        let n = 12;
        let q = pseudo_random(n * n, 3, 0.3);
        let disp = LatticeState::displacement(n, q, vec![0.0; n * n]).unwrap();
        let strain = disp.to_strain().unwrap();
        let acc_q = rhs_displacement(&disp, &ForceLaw::Cubic).unwrap();
        let (dx, dy) = forward_differences(&acc_q, n);
        let (au, av) = rhs_strain(&strain, &ForceLaw::Cubic).unwrap();
        for i in 0..n * n {
            assert!((dx[i] - au[i]).abs() < 1e-14);
            assert!((dy[i] - av[i]).abs() < 1e-14);
        }
        let strain_bump = bump(n, 0.1).to_strain().unwrap();
        let (au, _) = rhs_strain(&strain_bump, &ForceLaw::Cubic).unwrap();
        let (dx, _) = forward_differences(&rhs_displacement(&bump(n, 0.1), &ForceLaw::Cubic).unwrap(), n);
        assert!(au.iter().zip(&dx).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn zero_state_steps_to_zero_state() {
        let s = LatticeState::zeros(Form::Displacement, 8).unwrap();
        let next = verlet_step(&s, &ForceLaw::Cubic, 0.1).unwrap();
        assert!(next.positions()[0].iter().all(|&x| x == 0.0));
        assert!((next.time - 0.1).abs() < 1e-15);
        assert!(verlet_step(&s, &ForceLaw::Cubic, 0.6).is_err());
        assert!(verlet_step(&s, &ForceLaw::Cubic, 0.0).is_err());
    }

    #[test]
    fn verlet_is_reversible() {
        let n = 16;
        let s = LatticeState::displacement(n, pseudo_random(n * n, 1, 0.2), pseudo_random(n * n, 2, 0.2))
            .unwrap();
        let back = verlet_step(&verlet_step(&s, &ForceLaw::Cubic, 0.05).unwrap(), &ForceLaw::Cubic, -0.05)
            .unwrap();
        for (a, b) in back.positions()[0].iter().zip(&s.positions()[0]) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in back.velocities()[0].iter().zip(&s.velocities()[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_step_is_detected() {
        let n = 8;
        let mut q = vec![0.0; n * n];
        q[0] = 5e5;
        let s = LatticeState::displacement(n, q, vec![0.0; n * n]).unwrap();
        assert!(matches!(
            verlet_step(&s, &ForceLaw::Cubic, 0.1),
            Err(LatticeError::UnstableStep { .. })
        ));
    }

    #[test]
    fn energy_examples() {
        let n = 8;
        let s = LatticeState::zeros(Form::Displacement, n).unwrap();
        assert_eq!(energy(&s, &ForceLaw::Cubic).unwrap(), 0.0);
        // q = 0.1 on the row m = 1 stretches exactly the n x-bonds (0, j) -> (1, j)
        // by +0.1 and the n x-bonds (1, j) -> (2, j) by -0.1.
        let mut q = vec![0.0; n * n];
        for j in 0..n {
            q[n + j] = 0.1;
        }
        let s = LatticeState::displacement(n, q, vec![0.0; n * n]).unwrap();
        let per_bond = 0.1f64.powi(2) / 2.0 - 0.1f64.powi(4) / 4.0;
        assert!((per_bond - 0.004975).abs() < 1e-15);
        let e = energy(&s, &ForceLaw::Cubic).unwrap();
        assert!((e - 2.0 * n as f64 * per_bond).abs() < 1e-15);
    }

    #[test]
    fn compatibility_defect_examples() {
        let n = 10;
        let disp = LatticeState::displacement(n, pseudo_random(n * n, 5, 1.0), pseudo_random(n * n, 6, 1.0))
            .unwrap();
        assert!(compatibility_defect(&disp.to_strain().unwrap()).unwrap() < 1e-14);
        let u = pseudo_random(n * n, 7, 1.0);
        let s = LatticeState::strain(n, u, vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]).unwrap();
        assert!(compatibility_defect(&s).unwrap() > 0.1);
    }

    #[test]
    fn zero_perturbation_matches_baseline_exactly() {
        let n = 12;
        let s = LatticeState::displacement(n, pseudo_random(n * n, 9, 0.4), pseudo_random(n * n, 10, 0.4))
            .unwrap();
        let p = ForceLaw::Perturbed(Box::new(BondPerturbation::zeros(n, 0.1)));
        let a = verlet_step(&s, &ForceLaw::Cubic, 0.05).unwrap();
        let b = verlet_step(&s, &p, 0.05).unwrap();
        assert_eq!(a, b);
        assert_eq!(energy(&s, &ForceLaw::Cubic).unwrap(), energy(&s, &p).unwrap());
    }

    #[test]
    fn sampled_perturbation_respects_bound_and_seed() {
        let a = BondPerturbation::sample(16, 0.1, 0.7, 42);
        let b = BondPerturbation::sample(16, 0.1, 0.7, 42);
        assert_eq!(a, b);
        assert!(a.max_coefficient() <= 0.7);
        assert!(a.max_coefficient() > 0.5);
    }

    #[test]
    fn translation_commutes_with_step() {
        let n = 12;
        let s = LatticeState::strain(
            n,
            pseudo_random(n * n, 11, 0.3),
            pseudo_random(n * n, 12, 0.3),
            pseudo_random(n * n, 13, 0.3),
            pseudo_random(n * n, 14, 0.3),
        )
        .unwrap();
        let a = verlet_step(&s, &ForceLaw::Cubic, 0.1).unwrap().shifted(1, 0);
        let b = verlet_step(&s.shifted(1, 0), &ForceLaw::Cubic, 0.1).unwrap();
        assert_eq!(a, b);
    }
}
