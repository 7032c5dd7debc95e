use nalgebra::DVector;

use crate::sim::VectorField;

/// Result of the regularity test at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct RankCheck {
    pub state: DVector<f64>,
    pub input: DVector<f64>,
    /// Rank of `col(f_u(X), (h_u)_i(X))` for each component `i`.
    pub ranks: Vec<usize>,
    pub pass: bool,
}

/// Checks `rank col(f_u(X), (h_u)_i(X)) = 1` for every component of `h` at
/// each `(X, u)`. A stacked vector with sup-norm `≤ tol` counts as rank 0,
/// which happens exactly at equilibria where `h` also vanishes.
pub fn frobenius_rank_check<H>(
    field: &dyn VectorField,
    h: H,
    points: &[(DVector<f64>, DVector<f64>)],
    tol: f64,
) -> Vec<RankCheck>
where
    H: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    points
        .iter()
        .map(|(x, u)| {
            let f = field.eval(0.0, x, u);
            let hv = h(x, u);
            let f_norm = f.amax();
            let ranks: Vec<usize> = hv
                .iter()
                .map(|hi| usize::from(f_norm.max(hi.abs()) > tol))
                .collect();
            let pass = ranks.iter().all(|&r| r == 1);
            RankCheck {
                state: x.clone(),
                input: u.clone(),
                ranks,
                pass,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::FnField;

    #[test]
    fn joint_zero_fails_elsewhere_passes() {
        let field = FnField {
            dim: 1,
            input_dim: 0,
            f: |_t: f64, x: &DVector<f64>, _u: &DVector<f64>| x.clone(),
        };
        let h = |x: &DVector<f64>, _u: &DVector<f64>| DVector::from_element(1, x[0] * x[0]);
        let pts = vec![
            (DVector::from_element(1, 0.0), DVector::zeros(0)),
            (DVector::from_element(1, 0.5), DVector::zeros(0)),
        ];
        let r = frobenius_rank_check(&field, h, &pts, 1e-12);
        assert!(!r[0].pass);
        assert_eq!(r[0].ranks, vec![0]);
        assert!(r[1].pass);
    }

    #[test]
    fn nonzero_field_always_passes() {
        let field = FnField {
            dim: 2,
            input_dim: 0,
            f: |_t: f64, _x: &DVector<f64>, _u: &DVector<f64>| DVector::from_vec(vec![1.0, 0.0]),
        };
        let h = |_x: &DVector<f64>, _u: &DVector<f64>| DVector::zeros(3);
        let pts = vec![(DVector::zeros(2), DVector::zeros(0))];
        assert!(frobenius_rank_check(&field, h, &pts, 1e-12)[0].pass);
    }
}
