use std::io::{self, Write};

use nalgebra::DMatrix;

use super::FrameworkError;
use crate::linalg::min_sym_eigenvalue;

/// Windowed excitation certificate: for each window start `t`,
/// `δ(t) = λ_min ∫_t^{t+T} Φ1ᵀ Φ1 ds`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeReport {
    pub window: f64,
    pub times: Vec<f64>,
    pub delta_series: Vec<f64>,
    pub delta_min: f64,
}

impl PeReport {
    /// `true` when every window certifies `δ ≥ threshold > 0`.
    pub fn excited(&self, threshold: f64) -> bool {
        self.delta_min >= threshold && self.delta_min > 0.0
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,delta")?;
        for (t, d) in self.times.iter().zip(&self.delta_series) {
            writeln!(w, "{t:.16e},{d:.16e}")?;
        }
        Ok(())
    }
}

/// Trapezoidal Gram integrals over sliding windows of length `window`.
///
/// Windows start at every sample whose window fits inside the series.
/// Negative eigenvalues from round-off are clamped to zero.
pub fn pe_monitor(samples: &[DMatrix<f64>], dt: f64, window: f64) -> Result<PeReport, FrameworkError> {
    if !(dt > 0.0) || !(window >= dt) {
        return Err(FrameworkError::InvalidArgument(format!(
            "need window >= dt > 0, got window {window}, dt {dt}"
        )));
    }
    let steps = (window / dt).round() as usize;
    if samples.len() < steps + 1 {
        return Err(FrameworkError::InvalidArgument(format!(
            "series of {} samples is shorter than one window ({} steps)",
            samples.len(),
            steps
        )));
    }
    let n = samples[0].ncols();
    let grams: Vec<DMatrix<f64>> = samples.iter().map(|p| p.transpose() * p).collect();
    let mut cumulative = Vec::with_capacity(grams.len());
    let mut acc = DMatrix::zeros(n, n);
    cumulative.push(acc.clone());
    for w in grams.windows(2) {
        acc += (&w[0] + &w[1]) * (0.5 * dt);
        cumulative.push(acc.clone());
    }
    let mut times = Vec::new();
    let mut delta_series = Vec::new();
    for start in 0..=(samples.len() - 1 - steps) {
        let integral = &cumulative[start + steps] - &cumulative[start];
        times.push(start as f64 * dt);
        delta_series.push(min_sym_eigenvalue(&integral).max(0.0));
    }
    let delta_min = delta_series.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PeReport {
        window: steps as f64 * dt,
        times,
        delta_series,
        delta_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_regressor_has_no_excitation() {
        let s = vec![DMatrix::zeros(2, 2); 101];
        let r = pe_monitor(&s, 0.01, 0.5).unwrap();
        assert_eq!(r.delta_min, 0.0);
        assert!(!r.excited(0.0));
    }

    #[test]
    fn identity_regressor_gives_window_length() {
        let s = vec![DMatrix::identity(2, 2); 201];
        let r = pe_monitor(&s, 0.01, 1.0).unwrap();
        assert!((r.delta_min - 1.0).abs() < 1e-12);
        assert_eq!(r.times.len(), 101);
        assert!(r.delta_series.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn rank_one_regressor_is_not_excited() {
        let s = vec![DMatrix::from_row_slice(1, 2, &[1.0, 1.0]); 50];
        let r = pe_monitor(&s, 0.1, 1.0).unwrap();
        assert!(r.delta_min < 1e-12);
    }

    #[test]
    fn rotating_rank_one_regressor_is_excited() {
        // Φ1(t) = [cos t, sin t]: ∫ over 2π of Φ1ᵀΦ1 = π I
        let dt = 1e-3;
        let s: Vec<_> = (0..=10_000)
            .map(|k| {
                let t = k as f64 * dt;
                DMatrix::from_row_slice(1, 2, &[t.cos(), t.sin()])
            })
            .collect();
        let r = pe_monitor(&s, dt, 2.0 * std::f64::consts::PI).unwrap();
        assert!((r.delta_min - std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn short_series_is_rejected() {
        let s = vec![DMatrix::identity(1, 1); 5];
        assert!(pe_monitor(&s, 0.1, 1.0).is_err());
        assert!(pe_monitor(&s, 0.1, 0.01).is_err());
    }
}
