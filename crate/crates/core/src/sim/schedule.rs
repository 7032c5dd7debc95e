use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::SimError;

/// Value of one schedule piece.
#[derive(Clone)]
pub enum Input {
    Constant(DVector<f64>),
    /// Evaluated at absolute time.
    Function(Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>),
}

impl fmt::Debug for Input {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Input::Constant(v) => write!(f, "Constant({:?})", v.as_slice()),
            Input::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Piecewise input signal over `[0, horizon]`.
#[derive(Clone, Debug)]
pub struct InputSchedule {
    dim: usize,
    pieces: Vec<(f64, Input)>,
    horizon: f64,
}

impl InputSchedule {
    pub fn new(dim: usize, pieces: Vec<(f64, Input)>, horizon: f64) -> Result<Self, SimError> {
        if pieces.is_empty() {
            return Err(SimError::Schedule("no pieces".into()));
        }
        if pieces[0].0 != 0.0 {
            return Err(SimError::Schedule(format!(
                "first piece must start at 0, starts at {}",
                pieces[0].0
            )));
        }
        for w in pieces.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(SimError::Schedule("piece start times must increase".into()));
            }
        }
        if let Some((last, _)) = pieces.last() {
            if *last > horizon {
                return Err(SimError::Schedule(format!(
                    "piece starting at {last} lies beyond horizon {horizon}"
                )));
            }
        }
        for (start, piece) in &pieces {
            if let Input::Constant(v) = piece {
                if v.len() != dim {
                    return Err(SimError::Schedule(format!(
                        "piece at {start} has dimension {}, expected {dim}",
                        v.len()
                    )));
                }
            }
        }
        Ok(Self { dim, pieces, horizon })
    }

    pub fn constant(value: DVector<f64>, horizon: f64) -> Self {
        Self {
            dim: value.len(),
            pieces: vec![(0.0, Input::Constant(value))],
            horizon,
        }
    }

    /// Zero-dimensional schedule for autonomous systems.
    pub fn none(horizon: f64) -> Self {
        Self::constant(DVector::zeros(0), horizon)
    }

    pub fn function<F>(dim: usize, horizon: f64, f: F) -> Self
    where
        F: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            pieces: vec![(0.0, Input::Function(Arc::new(f)))],
            horizon,
        }
    }

    /// Piecewise-constant scalar schedule from `(start, value)` pairs.
    pub fn steps(points: &[(f64, f64)], horizon: f64) -> Result<Self, SimError> {
        let pieces = points
            .iter()
            .map(|&(t, v)| (t, Input::Constant(DVector::from_element(1, v))))
            .collect();
        Self::new(1, pieces, horizon)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn pieces(&self) -> &[(f64, Input)] {
        &self.pieces
    }

    /// Start times of every piece after the first.
    pub fn switch_times(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|(t, _)| *t).collect()
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        let idx = self.pieces.partition_point(|(start, _)| *start <= t);
        let (_, piece) = &self.pieces[idx.saturating_sub(1)];
        match piece {
            Input::Constant(v) => v.clone(),
            Input::Function(f) => {
                let v = f(t);
                debug_assert_eq!(v.len(), self.dim);
                v
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_lookup() {
        let s = InputSchedule::steps(&[(0.0, 25.0), (0.2, 30.0), (0.4, 15.0)], 1.0).unwrap();
        assert_eq!(s.at(0.0)[0], 25.0);
        assert_eq!(s.at(0.1999)[0], 25.0);
        assert_eq!(s.at(0.2)[0], 30.0);
        assert_eq!(s.at(0.9)[0], 15.0);
        assert_eq!(s.switch_times(), vec![0.2, 0.4]);
    }

    #[test]
    fn rejects_malformed_schedules() {
        assert!(InputSchedule::steps(&[(0.1, 1.0)], 1.0).is_err());
        assert!(InputSchedule::steps(&[(0.0, 1.0), (0.0, 2.0)], 1.0).is_err());
        assert!(InputSchedule::steps(&[(0.0, 1.0), (2.0, 2.0)], 1.0).is_err());
        assert!(InputSchedule::new(2, vec![(0.0, Input::Constant(DVector::zeros(1)))], 1.0).is_err());
    }
}
