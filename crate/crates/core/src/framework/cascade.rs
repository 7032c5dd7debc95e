use std::sync::Arc;

use nalgebra::DVector;

use super::FrameworkError;
use crate::sim::{Block, Feed, VectorField};

/// Dimensions of a cascade description.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub m: usize,
}

/// A plant together with a partial change of coordinates `z = φ(x, y)` such
/// that `ż = h(y, u)` and `x = φᴸ(z, y)`.
///
/// The plant state is arbitrary; [`Cascade::split`] extracts the unmeasured
/// part `x` and the measured part `y`. Plant coordinates that are neither
/// (e.g. the rotor speed when only currents are measured) are simply ignored.
pub trait Cascade: Send + Sync {
    fn dims(&self) -> Dims;

    fn plant(&self) -> Arc<dyn VectorField>;

    /// `(x, y)` from the full plant state.
    fn split(&self, state: &DVector<f64>) -> (DVector<f64>, DVector<f64>);

    fn phi(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;

    fn phi_left(&self, z: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, FrameworkError>;

    fn h(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    fn x_labels(&self) -> Vec<String> {
        (0..self.dims().nx).map(|i| format!("x{i}")).collect()
    }

    fn y_labels(&self) -> Vec<String> {
        (0..self.dims().ny).map(|i| format!("y{i}")).collect()
    }

    /// Estimation error `x̂ − x`. Plants with periodic coordinates override this.
    fn x_error(&self, x_hat: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        x_hat - x
    }

    /// `z = φ(x, y)` evaluated on a full plant state.
    fn z_of(&self, state: &DVector<f64>) -> DVector<f64> {
        let (x, y) = self.split(state);
        self.phi(&x, &y)
    }
}

/// The plant of a cascade exposed as a block whose output is the measurement `y`.
pub struct PlantBlock {
    cascade: Arc<dyn Cascade>,
    field: Arc<dyn VectorField>,
}

impl PlantBlock {
    pub fn new(cascade: Arc<dyn Cascade>) -> Self {
        let field = cascade.plant();
        Self { cascade, field }
    }
}

impl VectorField for PlantBlock {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn input_dim(&self) -> usize {
        self.field.input_dim()
    }

    fn eval(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.field.eval(t, x, u)
    }

    fn labels(&self) -> Vec<String> {
        self.field.labels()
    }

    fn output_dim(&self) -> usize {
        self.cascade.dims().ny
    }

    fn output(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.cascade.split(x).1
    }

    fn output_labels(&self) -> Vec<String> {
        self.cascade.y_labels()
    }
}

/// The dynamic extension `χ̇ = h(y, u)`; input is `col(y, u)`.
pub struct ExtensionField {
    cascade: Arc<dyn Cascade>,
}

impl ExtensionField {
    pub fn new(cascade: Arc<dyn Cascade>) -> Self {
        Self { cascade }
    }
}

impl VectorField for ExtensionField {
    fn dim(&self) -> usize {
        self.cascade.dims().nz
    }

    fn input_dim(&self) -> usize {
        let d = self.cascade.dims();
        d.ny + d.m
    }

    fn eval(&self, _t: f64, _x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let ny = self.cascade.dims().ny;
        let y = u.rows(0, ny).into_owned();
        let input = u.rows(ny, u.len() - ny).into_owned();
        self.cascade.h(&y, &input)
    }

    fn labels(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("chi{i}")).collect()
    }
}

/// Builds the dynamic-extension block reading `y` from block `plant` and `u`
/// from `input`. Along any plant trajectory `z(t) − χ(t) = z(0) − χ(0)`.
pub fn extend(
    cascade: Arc<dyn Cascade>,
    chi0: DVector<f64>,
    plant: usize,
    input: Feed,
) -> Result<Block, FrameworkError> {
    let nz = cascade.dims().nz;
    if chi0.len() != nz {
        return Err(FrameworkError::Dimension(format!(
            "chi0 has dimension {}, expected {nz}",
            chi0.len()
        )));
    }
    Ok(Block::new("chi", Arc::new(ExtensionField::new(cascade)), chi0)
        .feed(Feed::Output(plant))
        .feed(input))
}

/// `x̂ = φᴸ(χ + θ̂, y)`.
pub fn recover_state(
    cascade: &dyn Cascade,
    chi: &DVector<f64>,
    theta_hat: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>, FrameworkError> {
    let d = cascade.dims();
    if chi.len() != d.nz || theta_hat.len() != d.nz || y.len() != d.ny {
        return Err(FrameworkError::Dimension(format!(
            "chi {}, theta_hat {}, y {} against nz {}, ny {}",
            chi.len(),
            theta_hat.len(),
            y.len(),
            d.nz,
            d.ny
        )));
    }
    cascade.phi_left(&(chi + theta_hat), y)
}
