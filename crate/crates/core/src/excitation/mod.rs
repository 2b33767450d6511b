//! Source time functions, point and plane-wave sources, receivers and
//! seismograms.

mod points;
mod receivers;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

pub use points::{
    build_plane_wave_array, locate_point, plane_wave_amplitude, InjectedSource, PlaneWaveSpec, PointSource,
    SourceKind, LOCATE_TOLERANCE,
};
pub use receivers::{read_csv, Channel, LocatedReceiver, ReceiverSpec, Seismogram};

use crate::gll::gll_rule;

/// Default Tukey taper fraction.
pub const DEFAULT_TUKEY_ALPHA: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ExcitationError {
    #[error("invalid source time function: {0}")]
    InvalidStf(String),
    #[error("{what} '{name}' at {position:?} lies outside the mesh")]
    Placement { what: &'static str, name: String, position: [f64; 3] },
    #[error("{what} '{name}' lies in element {element}, which is {found}; expected {expected}")]
    DomainMismatch { what: &'static str, name: String, element: usize, found: &'static str, expected: &'static str },
    #[error("plane-wave spacing {spacing} m exceeds a quarter wavelength ({max} m)")]
    SpacingTooLarge { spacing: f64, max: f64 },
    #[error("plane wave: {0}")]
    PlaneWave(String),
}

/// Tukey-windowed sine burst s(t) = A·w(t − t_d)·sin(2π f0 (t − t_d)) on
/// [t_d, t_d + n_cycles/f0], zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTimeFunction {
    pub f0: f64,
    pub n_cycles: f64,
    pub window_length: f64,
    pub tukey_alpha: f64,
    pub amplitude: f64,
    pub delay: f64,
}

impl SourceTimeFunction {
    pub fn tone_burst(f0: f64, n_cycles: f64, tukey_alpha: f64) -> Result<Self, ExcitationError> {
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(ExcitationError::InvalidStf(format!("f0 must be positive, got {f0}")));
        }
        if !(n_cycles >= 1.0 && n_cycles.is_finite()) {
            return Err(ExcitationError::InvalidStf(format!("n_cycles must be at least 1, got {n_cycles}")));
        }
        if !(0.0..=1.0).contains(&tukey_alpha) {
            return Err(ExcitationError::InvalidStf(format!("tukey_alpha must lie in [0, 1], got {tukey_alpha}")));
        }
        Ok(SourceTimeFunction { f0, n_cycles, window_length: n_cycles / f0, tukey_alpha, amplitude: 1.0, delay: 0.0 })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    /// Tukey window on [0, T]; zero outside.
    pub fn window(&self, tau: f64) -> f64 {
        let t = self.window_length;
        if tau <= 0.0 || tau >= t {
            return 0.0;
        }
        let taper = 0.5 * self.tukey_alpha * t;
        if tau < taper {
            0.5 * (1.0 - (std::f64::consts::PI * tau / taper).cos())
        } else if t - tau < taper {
            0.5 * (1.0 - (std::f64::consts::PI * (t - tau) / taper).cos())
        } else {
            1.0
        }
    }

    /// Unit-amplitude burst at local time τ = t − delay.
    fn unit(&self, tau: f64) -> f64 {
        let w = self.window(tau);
        if w == 0.0 {
            0.0
        } else {
            w * (2.0 * std::f64::consts::PI * self.f0 * tau).sin()
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * self.unit(t - self.delay)
    }

    /// S₂(t) = ∫₀^t (t − τ) s(τ) dτ, the second time integral of s, by
    /// composite GLL quadrature split at the taper joints.
    pub fn second_integral(&self, t: f64) -> f64 {
        let tau_t = t - self.delay;
        if tau_t <= 0.0 {
            return 0.0;
        }
        let total = self.window_length;
        let end = tau_t.min(total);
        let taper = 0.5 * self.tukey_alpha * total;
        let mut joints = vec![0.0, taper, total - taper, total];
        joints.retain(|&x| x < end);
        joints.push(end);
        joints.dedup();
        let rule = gll_rule(10).expect("degree 10 is supported");
        // About 8 sub-intervals per cycle keep the rule at machine precision.
        let per_cycle = 8.0;
        let mut sum = 0.0;
        for w in joints.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let pieces = ((b - a) * self.f0 * per_cycle).ceil().max(1.0) as usize;
            let h = (b - a) / pieces as f64;
            for p in 0..pieces {
                let lo = a + p as f64 * h;
                for (x, wq) in rule.nodes().iter().zip(rule.weights()) {
                    let tau = lo + 0.5 * h * (x + 1.0);
                    sum += 0.5 * h * wq * (tau_t - tau) * self.unit(tau);
                }
            }
        }
        self.amplitude * sum
    }
}

/// One-sided DFT magnitude of a sampled time function.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub df: f64,
    pub amplitude: Vec<f64>,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.df
    }

    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (i, &a) in self.amplitude.iter().enumerate() {
            if a > self.amplitude[best] {
                best = i;
            }
        }
        best
    }

    /// First local minima below and above the peak.
    pub fn first_nulls(&self) -> (Option<usize>, Option<usize>) {
        let a = &self.amplitude;
        let p = self.peak_bin();
        let below = (1..p).rev().find(|&i| a[i] <= a[i - 1] && a[i] <= a[i + 1]);
        let above = (p + 1..a.len().saturating_sub(1)).find(|&i| a[i] <= a[i - 1] && a[i] <= a[i + 1]);
        (below, above)
    }
}

/// Magnitude spectrum of `stf` sampled at `dt` over `record_length`
/// seconds (n = round(record_length/dt) samples, resolution 1/(n·dt)).
pub fn stf_spectrum(stf: &SourceTimeFunction, dt: f64, record_length: f64) -> Spectrum {
    let n = ((record_length / dt).round() as usize).max(2);
    let mut buf: Vec<Complex<f64>> = (0..n).map(|k| Complex::new(stf.value(k as f64 * dt), 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Spectrum { df: 1.0 / (n as f64 * dt), amplitude: buf[..n / 2 + 1].iter().map(|c| c.norm()).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_shape() {
        let s = SourceTimeFunction::tone_burst(40e3, 4.0, 0.5).unwrap();
        assert_eq!(s.window_length, 1e-4);
        assert_eq!(s.value(0.0), 0.0);
        assert_eq!(s.value(1e-4), 0.0);
        assert_eq!(s.value(-1e-6), 0.0);
        assert_eq!(s.value(2e-4), 0.0);
        assert!((s.value(5.625e-5) - 1.0).abs() < 1e-12);
        assert!(SourceTimeFunction::tone_burst(0.0, 4.0, 0.5).is_err());
        assert!(SourceTimeFunction::tone_burst(1.0, 0.5, 0.5).is_err());
        assert!(SourceTimeFunction::tone_burst(1.0, 4.0, 1.5).is_err());
        let rect = SourceTimeFunction::tone_burst(40e3, 4.0, 0.0).unwrap();
        assert_eq!(rect.value(1e-4), 0.0);
    }

    #[test]
    fn second_integral_matches_trapezoid_oracle() {
        // Independent oracle: fine trapezoid sums of s, then of ∫s.
        let s = SourceTimeFunction::tone_burst(40e3, 4.0, 0.5).unwrap().with_amplitude(3.0).with_delay(1e-5);
        let n = 400_000;
        let h = 1.5e-4 / n as f64;
        let mut v = 0.0;
        let mut x = 0.0;
        let mut prev_s = s.value(0.0);
        for k in 1..=n {
            let t = k as f64 * h;
            let cur = s.value(t);
            let v_new = v + 0.5 * h * (prev_s + cur);
            x += 0.5 * h * (v + v_new);
            v = v_new;
            prev_s = cur;
            if k % 50_000 == 0 {
                let q = s.second_integral(t);
                let scale = 3.0 * 1e-4 / (2.0 * std::f64::consts::PI * 40e3);
                assert!((q - x).abs() <= 1e-6 * scale, "t={t}: {q} vs {x}");
            }
        }
        assert_eq!(s.second_integral(0.5e-5), 0.0);
    }

    #[test]
    fn spectrum_peak_and_nulls() {
        let s = SourceTimeFunction::tone_burst(40e3, 4.0, DEFAULT_TUKEY_ALPHA).unwrap();
        let sp = stf_spectrum(&s, 2.5e-7, 7e-4);
        let peak = sp.frequency(sp.peak_bin());
        assert!((peak - 40e3).abs() <= sp.df);
        let (lo, hi) = sp.first_nulls();
        assert!((sp.frequency(lo.unwrap()) - 30e3).abs() <= sp.df);
        assert!((sp.frequency(hi.unwrap()) - 50e3).abs() <= sp.df);
        // Doubling the window halves the null offset.
        let s8 = SourceTimeFunction::tone_burst(40e3, 8.0, DEFAULT_TUKEY_ALPHA).unwrap();
        let sp8 = stf_spectrum(&s8, 2.5e-7, 1.4e-3);
        let (lo8, hi8) = sp8.first_nulls();
        assert!((sp8.frequency(lo8.unwrap()) - 35e3).abs() <= sp8.df);
        assert!((sp8.frequency(hi8.unwrap()) - 45e3).abs() <= sp8.df);
    }
}
