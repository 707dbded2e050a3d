//! Planar two-body system: a head body and a tail body joined by a torsional
//! pin joint. The joint angle `x` is the shape variable and the head
//! orientation `q` is the group variable.
//!
//! The joint is driven by an open-loop periodic torque. The control input `u`
//! stretches the tail span to `(1 + u) * d2_bar`, which enters the inertia
//! coefficients quasi-statically (no length-rate terms).

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub m1: f64,
    pub m2: f64,
    pub i1: f64,
    pub i2: f64,
    pub d1: f64,
    /// Nominal tail span.
    pub d2_bar: f64,
    /// Torsional spring coefficient.
    pub kappa: f64,
    /// Viscous friction coefficient.
    pub b: f64,
    pub tau0: f64,
    pub omega0: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 0.5,
            i1: 2.0 / 3.0,
            i2: 1.0 / 6.0,
            d1: 1.0,
            d2_bar: 1.0,
            kappa: 2.0,
            b: 0.1,
            tau0: 1.0,
            omega0: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("i1", self.i1),
            ("i2", self.i2),
            ("d1", self.d1),
            ("d2_bar", self.d2_bar),
            ("kappa", self.kappa),
            ("b", self.b),
            ("tau0", self.tau0),
            ("omega0", self.omega0),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("physical.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Forcing period `2π/ω0`.
    pub fn period(&self) -> f64 {
        TAU / self.omega0
    }
}

/// Inertia coefficients derived from [`PhysicalParams`] at a given tail span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxParams {
    pub m_tilde: f64,
    pub i1_tilde: f64,
    pub i2_tilde: f64,
    pub lambda: f64,
}

impl AuxParams {
    pub fn a1(&self, x: f64) -> f64 {
        self.i1_tilde + self.lambda * x.cos()
    }

    pub fn a2(&self, x: f64) -> f64 {
        self.i2_tilde + self.lambda * x.cos()
    }

    pub fn delta(&self, x: f64) -> f64 {
        let c = x.cos();
        self.i1_tilde * self.i2_tilde - self.lambda * self.lambda * c * c
    }
}

pub fn aux_params(p: &PhysicalParams, u: f64) -> Result<AuxParams> {
    let stretch = 1.0 + u;
    if !(stretch > 0.0) {
        return Err(Error::NonPositiveTail(u));
    }
    let d2 = stretch * p.d2_bar;
    let m_tilde = p.m1 * p.m2 / (p.m1 + p.m2);
    Ok(AuxParams {
        m_tilde,
        i1_tilde: p.i1 + m_tilde * p.d1 * p.d1,
        i2_tilde: p.i2 + m_tilde * d2 * d2,
        lambda: m_tilde * p.d1 * d2,
    })
}

pub fn torque(t: f64, p: &PhysicalParams) -> f64 {
    p.tau0 * (p.omega0 * t).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimState {
    /// Relative joint angle.
    pub x: f64,
    pub x_dot: f64,
    /// Head orientation, unwrapped.
    pub q: f64,
    pub t: f64,
}

impl SimState {
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.x_dot.is_finite() && self.q.is_finite() && self.t.is_finite()
    }
}

fn shape_accel_aux(x: f64, x_dot: f64, tau: f64, aux: &AuxParams, p: &PhysicalParams) -> Result<f64> {
    let delta = aux.delta(x);
    if !(delta > 0.0) {
        return Err(Error::NonPhysical { what: "Delta(x)", value: delta, x });
    }
    let (a1, a2) = (aux.a1(x), aux.a2(x));
    let sum = a1 + a2;
    let centripetal = -aux.lambda * x.sin() * (a1 * a2 / sum) * x_dot * x_dot;
    Ok((centripetal + sum * (tau - p.kappa * x - p.b * x_dot)) / delta)
}

fn group_rate_aux(x: f64, x_dot: f64, aux: &AuxParams) -> Result<f64> {
    let c = x.cos();
    let denom = aux.i1_tilde + aux.i2_tilde + 2.0 * aux.lambda * c;
    if !(denom > 0.0) {
        return Err(Error::NonPhysical { what: "group-rate denominator", value: denom, x });
    }
    Ok((aux.i2_tilde + aux.lambda * c) / denom * x_dot)
}

/// Joint angular acceleration `ẍ` under torque `tau` and control `u`.
pub fn shape_accel(s: &SimState, tau: f64, u: f64, p: &PhysicalParams) -> Result<f64> {
    let aux = aux_params(p, u)?;
    shape_accel_aux(s.x, s.x_dot, tau, &aux, p)
}

/// Head rotation rate `q̇`.
pub fn group_rate(s: &SimState, u: f64, p: &PhysicalParams) -> Result<f64> {
    let aux = aux_params(p, u)?;
    group_rate_aux(s.x, s.x_dot, &aux)
}

/// Time derivative of `(x, ẋ, q)` at time `t`.
fn derivative(t: f64, y: [f64; 3], aux: &AuxParams, p: &PhysicalParams) -> Result<[f64; 3]> {
    let [x, x_dot, _] = y;
    Ok([x_dot, shape_accel_aux(x, x_dot, torque(t, p), aux, p)?, group_rate_aux(x, x_dot, aux)?])
}

fn axpy(y: [f64; 3], h: f64, k: [f64; 3]) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// One classical RK4 step with `u` held constant over the step.
pub fn step(s: &SimState, u: f64, p: &PhysicalParams, dt: f64) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let aux = aux_params(p, u)?;
    let y = [s.x, s.x_dot, s.q];
    let half = 0.5 * dt;
    let k1 = derivative(s.t, y, &aux, p)?;
    let k2 = derivative(s.t + half, axpy(y, half, k1), &aux, p)?;
    let k3 = derivative(s.t + half, axpy(y, half, k2), &aux, p)?;
    let k4 = derivative(s.t + dt, axpy(y, dt, k3), &aux, p)?;
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = SimState { x: out[0], x_dot: out[1], q: out[2], t: s.t + dt };
    if !next.is_finite() {
        return Err(Error::NonFiniteState { t: next.t });
    }
    Ok(next)
}

/// Black-box stepper wrapping [`step`]; the learner sees only `x` (through the
/// sensor) and `q`.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: PhysicalParams,
    dt: f64,
    state: SimState,
}

impl Simulator {
    pub fn new(params: PhysicalParams, dt: f64) -> Self {
        Self { params, dt, state: SimState::default() }
    }

    pub fn with_state(mut self, state: SimState) -> Self {
        self.state = state;
        self
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn advance(&mut self, u: f64) -> Result<&SimState> {
        self.state = step(&self.state, u, &self.params, self.dt)?;
        Ok(&self.state)
    }
}

/// Uniformly sampled state history.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<SimState>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 * self.dt
    }
}

/// Open-loop run with `u ≡ 0` from the resting state, `periods` forcing periods
/// long. The initial state is included as the first sample.
pub fn simulate_open_loop(p: &PhysicalParams, dt: f64, periods: f64) -> Result<Trajectory> {
    let steps = (periods * p.period() / dt).round() as usize;
    let mut sim = Simulator::new(*p, dt);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(*sim.state());
    for _ in 0..steps {
        samples.push(*sim.advance(0.0)?);
    }
    Ok(Trajectory { dt, samples })
}
