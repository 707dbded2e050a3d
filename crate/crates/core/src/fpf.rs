//! Coupled-oscillator feedback particle filter for the phase.
//!
//! Each particle is a phase oscillator with its own fixed frequency. The
//! innovation is fed back through a gain `v(θ)` obtained from a Galerkin
//! solve of the weak-form Poisson equation on the basis `{sin θ, cos θ}`,
//! with expectations replaced by ensemble averages.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::phase::{wrap_phase, PhaseModel};

/// Below this `|det A|` the ensemble is treated as synchronized and the gain
/// is set to zero for the step.
pub const DEGENERATE_DET: f64 = 1e-10;

/// Resultant lengths below this leave the circular mean undefined.
pub const MIN_RESULTANT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorEnsemble {
    theta: Vec<f64>,
    omega: Vec<f64>,
}

impl OscillatorEnsemble {
    /// Phases uniform on `[0, 2π)`, frequencies uniform on `[ω0 − δ, ω0 + δ]`.
    pub fn init<R: Rng + ?Sized>(n: usize, omega0: f64, delta: f64, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 particles, got {n}")));
        }
        if !(delta >= 0.0) {
            return Err(Error::Config(format!("frequency half-width must be non-negative, got {delta}")));
        }
        let theta = (0..n).map(|_| wrap_phase(rng.gen::<f64>() * TAU)).collect();
        let omega =
            (0..n).map(|_| if delta > 0.0 { rng.gen_range(omega0 - delta..=omega0 + delta) } else { omega0 }).collect();
        Ok(Self { theta, omega })
    }

    /// Builds an ensemble from explicit phases (wrapped) and frequencies.
    pub fn from_parts(theta: Vec<f64>, omega: Vec<f64>) -> Self {
        assert_eq!(theta.len(), omega.len(), "phase and frequency counts differ");
        Self { theta: theta.into_iter().map(wrap_phase).collect(), omega }
    }

    /// Evenly spaced phases `2πi/N`, all at frequency `omega0`.
    pub fn uniform_grid(n: usize, omega0: f64) -> Self {
        let theta = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        Self { theta, omega: vec![omega0; n] }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn harmonics(&self) -> Harmonics {
        Harmonics::from_trig(&trig(&self.theta))
    }

    pub fn estimate(&self) -> PhaseEstimate {
        self.harmonics().estimate()
    }
}

/// Ensemble averages of the first two Fourier modes. The Q-function and the
/// policies depend on the particles only through these four numbers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Harmonics {
    pub cos1: f64,
    pub sin1: f64,
    pub cos2: f64,
    pub sin2: f64,
}

impl Harmonics {
    /// Moments of a point mass at `theta`.
    pub fn point(theta: f64) -> Self {
        Self::from_trig(&[theta.sin_cos()])
    }

    fn from_trig(sc: &[(f64, f64)]) -> Self {
        let n = sc.len() as f64;
        let mut h = Harmonics::default();
        for &(s, c) in sc {
            h.cos1 += c;
            h.sin1 += s;
            h.cos2 += c * c - s * s;
            h.sin2 += 2.0 * s * c;
        }
        h.cos1 /= n;
        h.sin1 /= n;
        h.cos2 /= n;
        h.sin2 /= n;
        h
    }

    pub fn estimate(&self) -> PhaseEstimate {
        let resultant = self.cos1.hypot(self.sin1);
        let mean = (resultant >= MIN_RESULTANT).then(|| wrap_phase(self.sin1.atan2(self.cos1)));
        PhaseEstimate { mean, resultant }
    }
}

/// Circular mean and resultant length of the particle phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    /// `None` when the resultant length is too small to define a direction.
    pub mean: Option<f64>,
    pub resultant: f64,
}

pub fn phase_estimate(ens: &OscillatorEnsemble) -> PhaseEstimate {
    ens.estimate()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSolution {
    pub kappa1: f64,
    pub kappa2: f64,
    /// Ensemble mean of the sensor function.
    pub h_mean: f64,
    pub degenerate: bool,
}

impl GainSolution {
    pub fn v(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.v_trig(s, c)
    }

    #[inline]
    fn v_trig(&self, s: f64, c: f64) -> f64 {
        self.kappa1 * c - self.kappa2 * s
    }
}

fn trig(theta: &[f64]) -> Vec<(f64, f64)> {
    theta.iter().map(|t| t.sin_cos()).collect()
}

/// Galerkin solve with `ψ₁ = sin`, `ψ₂ = cos`:
/// `A_lk = ⟨ψ_l′ ψ_k′⟩`, `b_l = ⟨(h − ĥ) ψ_l⟩`, `v = κ₁ cos − κ₂ sin`.
fn solve_gain(sc: &[(f64, f64)], hv: &[f64]) -> GainSolution {
    let n = sc.len() as f64;
    let h_mean = hv.iter().sum::<f64>() / n;
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&(s, c), &h) in sc.iter().zip(hv) {
        let dh = h - h_mean;
        a11 += c * c;
        a12 -= c * s;
        a22 += s * s;
        b1 += dh * s;
        b2 += dh * c;
    }
    let (a11, a12, a22, b1, b2) = (a11 / n, a12 / n, a22 / n, b1 / n, b2 / n);
    let det = a11 * a22 - a12 * a12;
    if det.abs() < DEGENERATE_DET {
        return GainSolution { kappa1: 0.0, kappa2: 0.0, h_mean, degenerate: true };
    }
    GainSolution { kappa1: (a22 * b1 - a12 * b2) / det, kappa2: (a11 * b2 - a12 * b1) / det, h_mean, degenerate: false }
}

/// Gain function for the current ensemble and sensor model `h`.
pub fn gain(ens: &OscillatorEnsemble, h: impl Fn(f64) -> f64) -> GainSolution {
    let sc = trig(&ens.theta);
    let hv: Vec<f64> = ens.theta.iter().map(|&t| h(t)).collect();
    solve_gain(&sc, &hv)
}

#[allow(clippy::too_many_arguments)]
fn apply_update(
    theta: &mut [f64],
    omega: &[f64],
    sc: &[(f64, f64)],
    hv: &[f64],
    g: &GainSolution,
    dz: f64,
    dt: f64,
    sigma_w: f64,
) -> Result<()> {
    let inv_var = 1.0 / (sigma_w * sigma_w);
    for (i, th) in theta.iter_mut().enumerate() {
        let (s, c) = sc[i];
        let innovation = dz - 0.5 * (hv[i] + g.h_mean) * dt;
        let next = *th + omega[i] * dt + g.v_trig(s, c) * inv_var * innovation;
        if !next.is_finite() {
            return Err(Error::NonFiniteParticle { index: i });
        }
        *th = wrap_phase(next);
    }
    Ok(())
}

/// One filter step with a gain computed from the pre-update ensemble.
///
/// The control-dependent drift of the phase is not modeled.
pub fn fpf_step(
    ens: &mut OscillatorEnsemble,
    g: &GainSolution,
    h: impl Fn(f64) -> f64,
    dz: f64,
    dt: f64,
    sigma_w: f64,
) -> Result<()> {
    let sc = trig(&ens.theta);
    let hv: Vec<f64> = ens.theta.iter().map(|&t| h(t)).collect();
    apply_update(&mut ens.theta, &ens.omega, &sc, &hv, g, dz, dt, sigma_w)
}

/// Filter state for a run: the ensemble plus cached per-particle trig values
/// so each step evaluates `sin_cos` once per particle.
#[derive(Debug, Clone)]
pub struct FeedbackParticleFilter {
    ens: OscillatorEnsemble,
    model: PhaseModel,
    sigma_w: f64,
    dt: f64,
    sc: Vec<(f64, f64)>,
    hv: Vec<f64>,
    degenerate_steps: usize,
}

impl FeedbackParticleFilter {
    pub fn new(ens: OscillatorEnsemble, model: PhaseModel, sigma_w: f64, dt: f64) -> Self {
        let mut f = Self { ens, model, sigma_w, dt, sc: Vec::new(), hv: Vec::new(), degenerate_steps: 0 };
        f.refresh();
        f
    }

    fn refresh(&mut self) {
        self.sc.clear();
        self.sc.extend(self.ens.theta.iter().map(|t| t.sin_cos()));
        self.hv.clear();
        self.hv.extend(self.sc.iter().map(|&(s, _)| self.model.r * s));
    }

    pub fn ensemble(&self) -> &OscillatorEnsemble {
        &self.ens
    }

    pub fn model(&self) -> &PhaseModel {
        &self.model
    }

    pub fn harmonics(&self) -> Harmonics {
        Harmonics::from_trig(&self.sc)
    }

    pub fn degenerate_steps(&self) -> usize {
        self.degenerate_steps
    }

    /// Processes one observation increment; returns the gain that was used.
    pub fn update(&mut self, dz: f64) -> Result<GainSolution> {
        let g = solve_gain(&self.sc, &self.hv);
        if g.degenerate {
            self.degenerate_steps += 1;
        }
        apply_update(&mut self.ens.theta, &self.ens.omega, &self.sc, &self.hv, &g, dz, self.dt, self.sigma_w)?;
        self.refresh();
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn init_is_near_uniform() {
        let ens = OscillatorEnsemble::init(1000, 1.0, 0.12, &mut stream(5, Stream::ParticleInit)).unwrap();
        assert_eq!(ens.len(), 1000);
        assert!(ens.estimate().resultant < 0.1);
        assert!(ens.theta().iter().all(|t| (0.0..TAU).contains(t)));
        assert!(ens.omega().iter().all(|w| (0.88..=1.12).contains(w)));
    }

    #[test]
    fn init_without_heterogeneity() {
        let ens = OscillatorEnsemble::init(50, 1.3, 0.0, &mut stream(5, Stream::ParticleInit)).unwrap();
        assert!(ens.omega().iter().all(|&w| w == 1.3));
    }

    #[test]
    fn init_is_seeded() {
        let a = OscillatorEnsemble::init(100, 1.0, 0.12, &mut stream(8, Stream::ParticleInit)).unwrap();
        let b = OscillatorEnsemble::init(100, 1.0, 0.12, &mut stream(8, Stream::ParticleInit)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_rejects_single_particle() {
        assert!(OscillatorEnsemble::init(1, 1.0, 0.1, &mut stream(1, Stream::ParticleInit)).is_err());
    }

    #[test]
    fn gain_on_uniform_grid() {
        let ens = OscillatorEnsemble::uniform_grid(10_000, 1.0);
        let g = gain(&ens, |t| 0.56 * t.sin());
        assert!(!g.degenerate);
        assert!((g.kappa1 - 0.56).abs() < 1e-12);
        assert!(g.kappa2.abs() < 1e-12);
        assert!((g.v(0.3) - 0.56 * 0.3f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn gain_vanishes_for_constant_sensor() {
        let ens = OscillatorEnsemble::init(300, 1.0, 0.1, &mut stream(2, Stream::ParticleInit)).unwrap();
        let g = gain(&ens, |_| 0.3);
        assert!(g.kappa1.abs() < 1e-13 && g.kappa2.abs() < 1e-13);
    }

    #[test]
    fn gain_flags_synchronized_ensemble() {
        let ens = OscillatorEnsemble::from_parts(vec![0.0; 64], vec![1.0; 64]);
        let g = gain(&ens, |t| 0.56 * t.sin());
        assert!(g.degenerate);
        assert_eq!((g.kappa1, g.kappa2), (0.0, 0.0));
        assert_eq!(g.v(1.0), 0.0);
    }

    #[test]
    fn estimate_samples() {
        let e = OscillatorEnsemble::from_parts(vec![1.2; 5], vec![1.0; 5]).estimate();
        assert!((e.mean.unwrap() - 1.2).abs() < 1e-12 && (e.resultant - 1.0).abs() < 1e-12);

        let e = OscillatorEnsemble::from_parts(vec![0.0, 0.0, FRAC_PI_2], vec![1.0; 3]).estimate();
        assert!((e.mean.unwrap() - (1.0f64 / 3.0).atan2(2.0 / 3.0)).abs() < 1e-12);
        assert!((e.mean.unwrap() - 0.46365).abs() < 1e-5);
        assert!((e.resultant - 5f64.sqrt() / 3.0).abs() < 1e-12);

        let e = OscillatorEnsemble::from_parts(vec![0.0, PI], vec![1.0; 2]).estimate();
        assert!(e.mean.is_none());
        assert!(e.resultant < MIN_RESULTANT);
    }

    #[test]
    fn zero_gain_step_is_free_rotation() {
        let mut ens = OscillatorEnsemble::init(20, 1.0, 0.12, &mut stream(3, Stream::ParticleInit)).unwrap();
        let before = ens.clone();
        let g = GainSolution { kappa1: 0.0, kappa2: 0.0, h_mean: 0.1, degenerate: true };
        fpf_step(&mut ens, &g, |t| t.sin(), 123.0, 0.01, 0.1).unwrap();
        for i in 0..ens.len() {
            let expected = wrap_phase(before.theta()[i] + before.omega()[i] * 0.01);
            assert!((ens.theta()[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn consistent_observation_gives_pure_rotation() {
        let theta = 0.7;
        let pm = PhaseModel::default();
        let mut ens = OscillatorEnsemble::from_parts(vec![theta; 10], vec![1.0; 10]);
        let g = GainSolution { kappa1: 0.4, kappa2: -0.2, h_mean: pm.h(theta), degenerate: false };
        let dt = 0.01;
        fpf_step(&mut ens, &g, |t| pm.h(t), pm.h(theta) * dt, dt, 0.1).unwrap();
        assert!(ens.theta().iter().all(|&t| (t - (theta + dt)).abs() < 1e-14));
    }

    #[test]
    fn nonfinite_update_names_particle() {
        let mut ens = OscillatorEnsemble::from_parts(vec![0.0, 1.0], vec![1.0, f64::NAN]);
        let g = GainSolution { kappa1: 0.0, kappa2: 0.0, h_mean: 0.0, degenerate: true };
        let err = fpf_step(&mut ens, &g, |t| t.sin(), 0.0, 0.01, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteParticle { index: 1 }));
    }

    #[test]
    fn filter_struct_matches_free_functions() {
        let pm = PhaseModel::default();
        let ens = OscillatorEnsemble::init(200, 1.0, 0.12, &mut stream(4, Stream::ParticleInit)).unwrap();
        let mut filter = FeedbackParticleFilter::new(ens.clone(), pm, 0.1, 0.01);
        let mut reference = ens;
        for k in 0..200 {
            let dz = 0.01 * (0.01 * k as f64).sin() * 0.5;
            let g_ref = gain(&reference, |t| pm.h(t));
            fpf_step(&mut reference, &g_ref, |t| pm.h(t), dz, 0.01, 0.1).unwrap();
            let g = filter.update(dz).unwrap();
            assert!((g.kappa1 - g_ref.kappa1).abs() < 1e-12);
        }
        for (a, b) in filter.ensemble().theta().iter().zip(reference.theta()) {
            assert!((a - b).abs() < 1e-9);
        }
        let h = filter.harmonics();
        let direct = reference.harmonics();
        assert!((h.cos2 - direct.cos2).abs() < 1e-9 && (h.sin2 - direct.sin2).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn ensemble() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0f64..TAU, 3..60)
        }

        proptest! {
            /// The Galerkin equations hold exactly for ψ ∈ {sin, cos} for any
            /// sensor in span{1, sin, cos, sin 2θ, cos 2θ}.
            #[test]
            fn galerkin_residuals_vanish(theta in ensemble(), coef in prop::array::uniform5(-2.0f64..2.0)) {
                let n = theta.len();
                let ens = OscillatorEnsemble::from_parts(theta.clone(), vec![1.0; n]);
                let h = |t: f64| coef[0] + coef[1] * t.sin() + coef[2] * t.cos() + coef[3] * (2.0 * t).sin() + coef[4] * (2.0 * t).cos();
                let g = gain(&ens, h);
                prop_assume!(!g.degenerate);
                let nf = n as f64;
                let h_mean = theta.iter().map(|&t| h(t)).sum::<f64>() / nf;
                // ψ = sin: ψ′ = cos; ψ = cos: ψ′ = −sin.
                let r_sin = theta.iter().map(|&t| g.v(t) * t.cos() - (h(t) - h_mean) * t.sin()).sum::<f64>() / nf;
                let r_cos = theta.iter().map(|&t| -g.v(t) * t.sin() - (h(t) - h_mean) * t.cos()).sum::<f64>() / nf;
                let scale = 1.0 + g.kappa1.abs() + g.kappa2.abs();
                prop_assert!(r_sin.abs() <= 1e-12 * scale, "sin residual {}", r_sin);
                prop_assert!(r_cos.abs() <= 1e-12 * scale, "cos residual {}", r_cos);
            }

            #[test]
            fn phases_stay_wrapped(theta in ensemble(), dz in -0.5f64..0.5, seed in 0u64..1000) {
                let n = theta.len();
                let omega = (0..n).map(|i| 0.9 + 0.2 * ((seed as usize + i) % 7) as f64 / 7.0).collect();
                let mut ens = OscillatorEnsemble::from_parts(theta, omega);
                let pm = PhaseModel::default();
                let g = gain(&ens, |t| pm.h(t));
                fpf_step(&mut ens, &g, |t| pm.h(t), dz, 0.01, 0.1).unwrap();
                prop_assert!(ens.theta().iter().all(|t| (0.0..TAU).contains(t)));
            }

            /// The correction scales like 1/σ_W², so the deviation from free
            /// rotation shrinks by 100 when σ_W grows by 10.
            #[test]
            fn large_noise_reduces_to_free_rotation(theta in ensemble(), dz in -0.05f64..0.05) {
                let n = theta.len();
                let ens = OscillatorEnsemble::from_parts(theta, vec![1.0; n]);
                let pm = PhaseModel::default();
                let g = gain(&ens, |t| pm.h(t));
                let dev = |sigma: f64| {
                    let mut e = ens.clone();
                    fpf_step(&mut e, &g, |t| pm.h(t), dz, 0.01, sigma).unwrap();
                    e.theta().iter().zip(ens.theta()).map(|(a, b)| {
                        let d = a - wrap_phase(b + 0.01);
                        (d + PI).rem_euclid(TAU) - PI
                    }).fold(0.0f64, |m, d| m.max(d.abs()))
                };
                let (d1, d2) = (dev(10.0), dev(100.0));
                prop_assert!(d2 <= d1 / 100.0 * 1.01 + 1e-12, "{} vs {}", d1, d2);
            }
        }
    }
}
