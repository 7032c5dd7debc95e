//! Structural analysis of linear plants `ẋ = A11 x + A12 y + B1 u`,
//! `ẏ = A21 x + A22 y + B2 u`: observability, solvability of the linear
//! cascade `z = T1 x + T2 y`, and identifiability of the resulting offset.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};

use crate::framework::{Cascade, Dims, FrameworkError, LinearRegression};
use crate::linalg::{pinv, rank, RANK_RTOL};
use crate::sim::VectorField;

/// Tolerance of the cascade residual `T1 A11 + T2 A21`, relative to `max(1, |A|)`.
pub const CASCADE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LtiSystem {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(
        a11: DMatrix<f64>,
        a12: DMatrix<f64>,
        a21: DMatrix<f64>,
        a22: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
    ) -> Result<Self, FrameworkError> {
        let nx = a11.nrows();
        let ny = a22.nrows();
        let m = b1.ncols();
        let shapes = [
            ("A11", a11.shape(), (nx, nx)),
            ("A12", a12.shape(), (nx, ny)),
            ("A21", a21.shape(), (ny, nx)),
            ("A22", a22.shape(), (ny, ny)),
            ("B1", b1.shape(), (nx, m)),
            ("B2", b2.shape(), (ny, m)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(FrameworkError::Dimension(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        Ok(Self {
            a11,
            a12,
            a21,
            a22,
            b1,
            b2,
        })
    }

    /// Plant with `A12 = 0`, `A22 = 0` and no input.
    pub fn autonomous(a11: DMatrix<f64>, a21: DMatrix<f64>) -> Result<Self, FrameworkError> {
        let (nx, ny) = (a11.nrows(), a21.nrows());
        Self::new(
            a11,
            DMatrix::zeros(nx, ny),
            a21,
            DMatrix::zeros(ny, ny),
            DMatrix::zeros(nx, 0),
            DMatrix::zeros(ny, 0),
        )
    }

    pub fn nx(&self) -> usize {
        self.a11.nrows()
    }

    pub fn ny(&self) -> usize {
        self.a22.nrows()
    }

    pub fn m(&self) -> usize {
        self.b1.ncols()
    }

    /// Observable, cascade-infeasible example: `A11 = diag(a1, a2)`, `A21 = [a b]`.
    pub fn c1(a1: f64, a2: f64, a: f64, b: f64) -> Self {
        Self::autonomous(
            DMatrix::from_diagonal(&DVector::from_vec(vec![a1, a2])),
            DMatrix::from_row_slice(1, 2, &[a, b]),
        )
        .expect("consistent shapes")
    }

    /// Unobservable, cascade-feasible example: scalar `A11 = 0`, `A21 = 0`.
    pub fn c2() -> Self {
        Self::autonomous(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)).expect("consistent shapes")
    }
}

/// PBH rank of `[sI − A11; A21]` at one eigenvalue `s` of `A11`.
#[derive(Clone, Debug, PartialEq)]
pub struct PbhWitness {
    pub eigenvalue: Complex<f64>,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbhReport {
    pub observable: bool,
    pub witnesses: Vec<PbhWitness>,
}

/// Popov–Belevitch–Hautus test of the pair `(A11, A21)`.
pub fn pbh_observable(sys: &LtiSystem) -> PbhReport {
    let nx = sys.nx();
    let ny = sys.ny();
    let eig = sys.a11.complex_eigenvalues();
    let witnesses: Vec<PbhWitness> = eig
        .iter()
        .map(|&s| {
            let mut pencil = DMatrix::<Complex<f64>>::zeros(nx + ny, nx);
            for i in 0..nx {
                for j in 0..nx {
                    let d = if i == j { s } else { Complex::new(0.0, 0.0) };
                    pencil[(i, j)] = d - Complex::new(sys.a11[(i, j)], 0.0);
                }
            }
            for i in 0..ny {
                for j in 0..nx {
                    pencil[(nx + i, j)] = Complex::new(sys.a21[(i, j)], 0.0);
                }
            }
            PbhWitness {
                eigenvalue: s,
                rank: rank(&pencil),
            }
        })
        .collect();
    PbhReport {
        observable: witnesses.iter().all(|w| w.rank == nx),
        witnesses,
    }
}

/// A solution of `T1 A11 + T2 A21 = 0` with `rank T1 = n_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiCascade {
    pub t1: DMatrix<f64>,
    pub t2: DMatrix<f64>,
}

impl LtiCascade {
    /// `T1† = (T1ᵀ T1)⁻¹ T1ᵀ`.
    pub fn t1_pinv(&self) -> DMatrix<f64> {
        pinv(&self.t1)
    }

    pub fn residual(&self, sys: &LtiSystem) -> f64 {
        (&self.t1 * &sys.a11 + &self.t2 * &sys.a21).amax()
    }

    /// Checks the residual and the rank condition.
    pub fn validate(&self, sys: &LtiSystem) -> Result<(), FrameworkError> {
        let scale = 1.0f64.max(sys.a11.amax()).max(sys.a21.amax());
        let res = self.residual(sys);
        if res > CASCADE_TOL * scale {
            return Err(FrameworkError::InvalidArgument(format!(
                "T1 A11 + T2 A21 has entries up to {res:e}"
            )));
        }
        if rank(&self.t1) != sys.nx() {
            return Err(FrameworkError::InvalidArgument(format!(
                "rank T1 = {} < n_x = {}",
                rank(&self.t1),
                sys.nx()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CascadeSolution {
    Feasible(LtiCascade),
    /// No solution reaches `rank T1 = n_x`; `max_rank` is the best achievable.
    Infeasible { max_rank: usize },
}

impl CascadeSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self, CascadeSolution::Feasible(_))
    }

    pub fn cascade(&self) -> Option<&LtiCascade> {
        match self {
            CascadeSolution::Feasible(c) => Some(c),
            CascadeSolution::Infeasible { .. } => None,
        }
    }
}

/// Orthonormal basis (as rows) of `{ r : r M = 0 }`.
fn left_null_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad Mᵀ to a square matrix so the decomposition returns a full set of right vectors
    let mut sq = DMatrix::zeros(n, n);
    sq.view_mut((0, 0), (m.ncols(), n)).copy_from(&m.transpose());
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let rows: Vec<usize> = (0..n)
        .filter(|&i| max == 0.0 || svd.singular_values[i] < RANK_RTOL * max)
        .collect();
    DMatrix::from_fn(rows.len(), n, |r, c| vt[(rows[r], c)])
}

/// Solves `T1 A11 + T2 A21 = 0` for `[T1 T2]` with `n_z` rows.
///
/// Every row of `[T1 T2]` lies in the left null space of `[A11; A21]`. Basis
/// rows are picked greedily by the norm of their `T1` part after projecting
/// out the already chosen ones (column pivoting). When `n_x` of them have
/// independent `T1` parts the selection is normalised to `T1 = I` and `T2`
/// is replaced by its minimum-norm equivalent `−A11 A21⁺`; further rows,
/// if `n_z > n_x`, come from the unused basis rows and then zeros.
pub fn solve_cascade(sys: &LtiSystem, nz: usize) -> Result<CascadeSolution, FrameworkError> {
    let (nx, ny) = (sys.nx(), sys.ny());
    if nz < nx {
        return Err(FrameworkError::InvalidArgument(format!(
            "n_z = {nz} must be at least n_x = {nx}"
        )));
    }
    let mut stacked = DMatrix::zeros(nx + ny, nx);
    stacked.view_mut((0, 0), (nx, nx)).copy_from(&sys.a11);
    stacked.view_mut((nx, 0), (ny, nx)).copy_from(&sys.a21);
    let basis = left_null_basis(&stacked);
    let top = basis.columns(0, nx).into_owned();

    let scale = top.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut residual: Vec<DVector<f64>> = (0..basis.nrows()).map(|r| top.row(r).transpose()).collect();
    let mut chosen = Vec::new();
    while chosen.len() < nx {
        let best = (0..residual.len())
            .filter(|r| !chosen.contains(r))
            .max_by(|&a, &b| residual[a].norm().total_cmp(&residual[b].norm()));
        let Some(best) = best else { break };
        let norm = residual[best].norm();
        if scale == 0.0 || norm <= RANK_RTOL.sqrt() * scale {
            break;
        }
        let q = &residual[best] / norm;
        for r in residual.iter_mut() {
            let c = r.dot(&q);
            *r -= &q * c;
        }
        chosen.push(best);
    }
    if chosen.len() < nx {
        return Ok(CascadeSolution::Infeasible {
            max_rank: chosen.len(),
        });
    }

    // With T1 = I the selection's T2 solves T2 A21 = −A11, so its minimum-norm
    // form is −A11 A21⁺. Forming it directly avoids inverting the selected T1
    // block, which amplifies rounding in the basis when it is ill-conditioned.
    let t2_min = -(&sys.a11 * pinv(&sys.a21));

    let mut t1 = DMatrix::zeros(nz, nx);
    let mut t2 = DMatrix::zeros(nz, ny);
    t1.view_mut((0, 0), (nx, nx)).fill_with_identity();
    t2.view_mut((0, 0), (nx, ny)).copy_from(&t2_min);
    let spare: Vec<usize> = (0..basis.nrows()).filter(|r| !chosen.contains(r)).collect();
    for (k, &r) in spare.iter().take(nz - nx).enumerate() {
        for c in 0..nx {
            t1[(nx + k, c)] = basis[(r, c)];
        }
        for c in 0..ny {
            t2[(nx + k, c)] = basis[(r, nx + c)];
        }
    }
    let cascade = LtiCascade { t1, t2 };
    cascade.validate(sys)?;
    Ok(CascadeSolution::Feasible(cascade))
}

/// `θ` is identifiable from the regression iff `n_y ≥ n_z` and `rank A21 = n_x`.
pub fn identifiable(sys: &LtiSystem, cascade: &LtiCascade) -> bool {
    sys.ny() >= cascade.t1.nrows() && rank(&sys.a21) == sys.nx()
}

/// Plant dynamics over `(x, y)`.
#[derive(Clone, Debug)]
pub struct LtiPlant {
    pub sys: LtiSystem,
}

impl VectorField for LtiPlant {
    fn dim(&self) -> usize {
        self.sys.nx() + self.sys.ny()
    }

    fn input_dim(&self) -> usize {
        self.sys.m()
    }

    fn eval(&self, _t: f64, s: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (nx, ny) = (self.sys.nx(), self.sys.ny());
        let x = s.rows(0, nx);
        let y = s.rows(nx, ny);
        let mut d = DVector::zeros(nx + ny);
        d.rows_mut(0, nx)
            .copy_from(&(&self.sys.a11 * x + &self.sys.a12 * y + &self.sys.b1 * u));
        d.rows_mut(nx, ny)
            .copy_from(&(&self.sys.a21 * x + &self.sys.a22 * y + &self.sys.b2 * u));
        d
    }
}

/// The linear cascade `z = T1 x + T2 y` together with its regression
/// `ẏ = A21 T1† χ + (A22 − A21 T1† T2) y + B2 u + A21 T1† θ`.
#[derive(Clone, Debug)]
pub struct LtiCascadeForm {
    pub sys: LtiSystem,
    pub cascade: LtiCascade,
    t1_pinv: DMatrix<f64>,
}

pub fn lti_regression(sys: &LtiSystem, cascade: &LtiCascade) -> Result<Arc<LtiCascadeForm>, FrameworkError> {
    cascade.validate(sys)?;
    Ok(Arc::new(LtiCascadeForm {
        sys: sys.clone(),
        cascade: cascade.clone(),
        t1_pinv: cascade.t1_pinv(),
    }))
}

impl LtiCascadeForm {
    pub fn plant_state(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let (nx, ny) = (self.sys.nx(), self.sys.ny());
        let mut s = DVector::zeros(nx + ny);
        s.rows_mut(0, nx).copy_from(x);
        s.rows_mut(nx, ny).copy_from(y);
        s
    }

    /// `Φ1 = A21 T1†`.
    pub fn regressor(&self) -> DMatrix<f64> {
        &self.sys.a21 * &self.t1_pinv
    }
}

impl Cascade for LtiCascadeForm {
    fn dims(&self) -> Dims {
        Dims {
            nx: self.sys.nx(),
            ny: self.sys.ny(),
            nz: self.cascade.t1.nrows(),
            m: self.sys.m(),
        }
    }

    fn plant(&self) -> Arc<dyn VectorField> {
        Arc::new(LtiPlant { sys: self.sys.clone() })
    }

    fn split(&self, s: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (nx, ny) = (self.sys.nx(), self.sys.ny());
        (s.rows(0, nx).into_owned(), s.rows(nx, ny).into_owned())
    }

    fn phi(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        &self.cascade.t1 * x + &self.cascade.t2 * y
    }

    fn phi_left(&self, z: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, FrameworkError> {
        Ok(&self.t1_pinv * (z - &self.cascade.t2 * y))
    }

    fn h(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (t1, t2) = (&self.cascade.t1, &self.cascade.t2);
        (t1 * &self.sys.a12 + t2 * &self.sys.a22) * y + (t1 * &self.sys.b1 + t2 * &self.sys.b2) * u
    }
}

impl LinearRegression for LtiCascadeForm {
    fn rows(&self) -> usize {
        self.sys.ny()
    }

    fn nz(&self) -> usize {
        self.cascade.t1.nrows()
    }

    fn phi0(&self, chi: &DVector<f64>, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let k = self.regressor();
        &k * chi + (&self.sys.a22 - &k * &self.cascade.t2) * y + &self.sys.b2 * u
    }

    fn phi1(&self, _chi: &DVector<f64>, _y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.regressor()
    }
}

/// Outcome of checking that identifiability implies observability on a
/// batch of systems.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepReport {
    pub systems: usize,
    pub feasible: usize,
    pub identifiable: usize,
    pub observable: usize,
    /// Indices of systems that are identifiable but not observable.
    pub counterexamples: Vec<usize>,
}

/// Runs the identifiability ⇒ observability check with `n_z = n_x`.
pub fn identifiability_sweep(systems: &[LtiSystem]) -> Result<SweepReport, FrameworkError> {
    let mut rep = SweepReport {
        systems: systems.len(),
        ..SweepReport::default()
    };
    for (k, sys) in systems.iter().enumerate() {
        let obs = pbh_observable(sys).observable;
        rep.observable += usize::from(obs);
        if let CascadeSolution::Feasible(c) = solve_cascade(sys, sys.nx())? {
            rep.feasible += 1;
            if identifiable(sys, &c) {
                rep.identifiable += 1;
                if !obs {
                    rep.counterexamples.push(k);
                }
            }
        }
    }
    Ok(rep)
}
