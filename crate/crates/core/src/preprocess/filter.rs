//! Butterworth IIR filters as cascaded second-order sections.
//!
//! Design follows the textbook route: analog prototype poles, frequency
//! transformation (low/high/band), bilinear transform with pre-warping, then
//! pairing of conjugate poles into biquads. Zero-phase application runs the
//! cascade forward and backward over an odd-reflected extension of the input
//! with steady-state initial conditions.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Bandpass,
    Lowpass,
    Highpass,
}

/// Filter parameters. A low-pass uses `high_hz` as its cutoff, a high-pass uses `low_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_hz: Option<f64>,
    pub order: u8,
    pub zero_phase: bool,
}

impl FilterSpec {
    pub fn bandpass(low_hz: f64, high_hz: f64, order: u8) -> Self {
        Self {
            kind: FilterKind::Bandpass,
            low_hz: Some(low_hz),
            high_hz: Some(high_hz),
            order,
            zero_phase: true,
        }
    }

    pub fn lowpass(cutoff_hz: f64, order: u8) -> Self {
        Self {
            kind: FilterKind::Lowpass,
            low_hz: None,
            high_hz: Some(cutoff_hz),
            order,
            zero_phase: true,
        }
    }

    pub fn highpass(cutoff_hz: f64, order: u8) -> Self {
        Self {
            kind: FilterKind::Highpass,
            low_hz: Some(cutoff_hz),
            high_hz: None,
            order,
            zero_phase: true,
        }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let nyquist = sample_rate / 2.0;
        if !(1..=8).contains(&self.order) {
            return Err(Error::Config(format!("filter order must be in 1..=8, got {}", self.order)));
        }
        let edge = |name: &str, v: Option<f64>| -> Result<f64> {
            let v = v.ok_or_else(|| Error::Config(format!("{:?} filter needs {name}", self.kind)))?;
            if !(v.is_finite() && v > 0.0 && v < nyquist) {
                return Err(Error::Config(format!(
                    "{name} = {v} Hz must lie in (0, {nyquist}) at {sample_rate} Hz sampling"
                )));
            }
            Ok(v)
        };
        match self.kind {
            FilterKind::Bandpass => {
                let lo = edge("low_hz", self.low_hz)?;
                let hi = edge("high_hz", self.high_hz)?;
                if lo >= hi {
                    return Err(Error::Config(format!("band-pass needs low_hz < high_hz, got {lo} >= {hi}")));
                }
            }
            FilterKind::Lowpass => {
                edge("high_hz", self.high_hz)?;
            }
            FilterKind::Highpass => {
                edge("low_hz", self.low_hz)?;
            }
        }
        Ok(())
    }

    /// Designs the digital filter for `sample_rate`.
    pub fn design(&self, sample_rate: f64) -> Result<Sos> {
        self.validate(sample_rate)?;
        let n = usize::from(self.order);
        let fs2 = 2.0 * sample_rate;
        let warp = |f: f64| fs2 * (PI * f / sample_rate).tan();

        let proto: Vec<Complex64> = (1..=n)
            .map(|k| Complex64::from_polar(1.0, PI * (2 * k + n - 1) as f64 / (2 * n) as f64))
            .collect();

        let (s_poles, z_zeros, z_ref): (Vec<Complex64>, Vec<f64>, Complex64) = match self.kind {
            FilterKind::Lowpass => {
                let wc = warp(self.high_hz.unwrap());
                (proto.iter().map(|p| p * wc).collect(), vec![-1.0; n], Complex64::new(1.0, 0.0))
            }
            FilterKind::Highpass => {
                let wc = warp(self.low_hz.unwrap());
                (proto.iter().map(|p| wc / p).collect(), vec![1.0; n], Complex64::new(-1.0, 0.0))
            }
            FilterKind::Bandpass => {
                let w1 = warp(self.low_hz.unwrap());
                let w2 = warp(self.high_hz.unwrap());
                let w0 = (w1 * w2).sqrt();
                let bw = w2 - w1;
                let mut poles = Vec::with_capacity(2 * n);
                for p in &proto {
                    let a = p * (bw / 2.0);
                    let root = (a * a - w0 * w0).sqrt();
                    poles.push(a + root);
                    poles.push(a - root);
                }
                let zeros = (0..2 * n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
                let omega0 = 2.0 * (w0 / fs2).atan();
                (poles, zeros, Complex64::from_polar(1.0, omega0))
            }
        };

        let z_poles: Vec<Complex64> = s_poles.iter().map(|s| (fs2 + s) / (fs2 - s)).collect();

        // |H(z_ref)| with unit gain, used to normalise the passband.
        let num: Complex64 = z_zeros.iter().map(|z| z_ref - z).product();
        let den: Complex64 = z_poles.iter().map(|p| z_ref - p).product();
        let gain = (den / num).norm();

        let mut sections = pair_sections(&z_poles, &z_zeros);
        for b in &mut sections[0].coeffs[..3] {
            *b *= gain;
        }
        Ok(Sos { sections })
    }
}

/// Groups poles into conjugate pairs (or real pairs) and zeros alongside.
fn pair_sections(poles: &[Complex64], zeros: &[f64]) -> Vec<Section> {
    const IM_TOL: f64 = 1e-10;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > IM_TOL).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= IM_TOL).map(|p| p.re).collect();
    // Poles closest to the unit circle last, so the sharpest sections see already-attenuated input.
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    // (a1, a2, first_order)
    let mut denominators: Vec<(f64, f64, bool)> =
        complex.iter().map(|p| (-2.0 * p.re, p.norm_sqr(), false)).collect();
    for pair in real.chunks(2) {
        match pair {
            [a, b] => denominators.push((-(a + b), a * b, false)),
            [a] => denominators.push((-a, 0.0, true)),
            _ => unreachable!(),
        }
    }

    let mut zero_iter = zeros.iter().copied();
    let mut sections = Vec::with_capacity(denominators.len());
    for (a1, a2, first_order) in denominators {
        let num = if first_order {
            let z = zero_iter.next().unwrap_or(0.0);
            [1.0, -z, 0.0]
        } else {
            let z1 = zero_iter.next().unwrap_or(0.0);
            let z2 = zero_iter.next().unwrap_or(0.0);
            [1.0, -(z1 + z2), z1 * z2]
        };
        sections.push(Section {
            coeffs: [num[0], num[1], num[2], 1.0, a1, a2],
            first_order,
        });
    }
    sections
}

#[derive(Debug, Clone, PartialEq)]
struct Section {
    coeffs: [f64; 6],
    first_order: bool,
}

/// A cascade of biquads `[b0, b1, b2, a0, a1, a2]` with `a0 == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    sections: Vec<Section>,
}

impl Sos {
    pub fn n_sections(&self) -> usize {
        self.sections.len()
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &[f64; 6]> {
        self.sections.iter().map(|s| &s.coeffs)
    }

    /// Effective order of the cascade.
    pub fn order(&self) -> usize {
        self.sections.iter().map(|s| if s.first_order { 1 } else { 2 }).sum()
    }

    /// Default odd-extension length: three samples per unit of filter order per section.
    pub fn default_padlen(&self) -> usize {
        3 * self.order() * self.sections.len()
    }

    /// Complex frequency response at normalised angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        self.coefficients()
            .map(|s| (s[0] + s[1] * z1 + s[2] * z2) / (s[3] + s[4] * z1 + s[5] * z2))
            .product()
    }

    /// Steady-state section states for a unit step input.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.coefficients()
            .map(|s| {
                let dc = (s[0] + s[1] + s[2]) / (1.0 + s[4] + s[5]);
                let zi = [scale * (dc - s[0]), scale * (s[2] - s[5] * dc)];
                scale *= dc;
                zi
            })
            .collect()
    }

    /// Causal filtering, transposed direct form II per section.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let zi = self.step_states();
        let x0 = x.first().copied().unwrap_or(0.0);
        self.run(x, &zi, x0)
    }

    fn run(&self, x: &[f64], zi: &[[f64; 2]], x0: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        for (s, z) in self.coefficients().zip(zi) {
            let (b0, b1, b2, a1, a2) = (s[0], s[1], s[2], s[4], s[5]);
            let mut z0 = z[0] * x0;
            let mut z1 = z[1] * x0;
            for v in y.iter_mut() {
                let xin = *v;
                let out = b0 * xin + z0;
                z0 = b1 * xin - a1 * out + z1;
                z1 = b2 * xin - a2 * out;
                *v = out;
            }
        }
        y
    }

    /// Forward-backward filtering over an odd extension of `padlen` samples
    /// (clamped to `x.len() - 1`).
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = padlen.min(n - 1);
        let first = x[0];
        let last = x[n - 1];
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.step_states();
        let mut y = self.run(&ext, &zi, ext[0]);
        y.reverse();
        let mut y = self.run(&y, &zi, y[0]);
        y.reverse();
        y.drain(..pad);
        y.truncate(n);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analytic squared magnitude of a bilinear-transformed Butterworth filter.
    fn butterworth_mag2(spec: &FilterSpec, fs: f64, f: f64) -> f64 {
        let n = i32::from(spec.order);
        let w = (PI * f / fs).tan();
        let ratio = match spec.kind {
            FilterKind::Lowpass => w / (PI * spec.high_hz.unwrap() / fs).tan(),
            FilterKind::Highpass => (PI * spec.low_hz.unwrap() / fs).tan() / w,
            FilterKind::Bandpass => {
                let w1 = (PI * spec.low_hz.unwrap() / fs).tan();
                let w2 = (PI * spec.high_hz.unwrap() / fs).tan();
                (w * w - w1 * w2) / (w * (w2 - w1))
            }
        };
        1.0 / (1.0 + ratio.powi(2 * n))
    }

    #[test]
    fn designs_match_analytic_magnitude() {
        let cases = [
            (FilterSpec::bandpass(1.0, 45.0, 4), 250.0),
            (FilterSpec::bandpass(0.5, 8.0, 2), 128.0),
            (FilterSpec::bandpass(2.0, 10.0, 3), 100.0),
            (FilterSpec::lowpass(1.0, 2), 128.0),
            (FilterSpec::lowpass(0.05, 2), 128.0),
            (FilterSpec::lowpass(10.0, 5), 128.0),
            (FilterSpec::highpass(0.5, 3), 128.0),
        ];
        for (spec, fs) in cases {
            let sos = spec.design(fs).unwrap();
            for k in 1..200 {
                let f = fs / 2.0 * k as f64 / 200.0;
                let got = sos.response(2.0 * PI * f / fs).norm_sqr();
                let want = butterworth_mag2(&spec, fs, f);
                assert!((got - want).abs() < 1e-8, "{spec:?} at {f} Hz: {got} vs {want}");
            }
        }
    }

    #[test]
    fn odd_order_lowpass_has_first_order_section() {
        let sos = FilterSpec::lowpass(10.0, 3).design(100.0).unwrap();
        assert_eq!(sos.n_sections(), 2);
        assert_eq!(sos.order(), 3);
    }

    #[test]
    fn validation() {
        assert!(FilterSpec::bandpass(45.0, 1.0, 4).validate(250.0).is_err());
        assert!(FilterSpec::bandpass(1.0, 130.0, 4).validate(250.0).is_err());
        assert!(FilterSpec::lowpass(1.0, 0).validate(250.0).is_err());
        assert!(FilterSpec::lowpass(1.0, 9).validate(250.0).is_err());
        let mut hp = FilterSpec::highpass(1.0, 2);
        hp.low_hz = None;
        assert!(hp.validate(250.0).is_err());
    }

    #[test]
    fn filtfilt_keeps_constants_and_lines() {
        let sos = FilterSpec::lowpass(1.0, 2).design(128.0).unwrap();
        let x = vec![3.5; 500];
        let y = sos.filtfilt(&x, sos.default_padlen());
        assert!(y.iter().all(|v| (v - 3.5).abs() < 1e-12));

        let hp = FilterSpec::highpass(1.0, 2).design(128.0).unwrap();
        let y = hp.filtfilt(&x, hp.default_padlen());
        assert!(y.iter().all(|v| v.abs() < 1e-12));
    }
}
