//! Interconnections of subsystems: composition, the compositionality
//! conditions, composite gains and the moment error bound.

mod bound;
mod compose;
mod conditions;
mod monte_carlo;

pub use bound::{composite_gains, error_bound, ErrorBound, NetworkGains};
pub use compose::{compose, shared_rates, simulate_explicit};
pub use conditions::{
    check_interconnection_lmi, check_matching_condition, interconnection_matrix,
    permutation_matrix, solve_abstract_coupling, CouplingSolution, Interconnection,
    MatchingReport,
};
pub use monte_carlo::{monte_carlo_error, network_storage, MonteCarloResult, MonteCarloSetup};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid_model::JumpDiffusionSystem;
    use crate::matrix_analysis::{Mat, Vector};

    #[test]
    fn single_block_permutation_is_identity() {
        assert_eq!(permutation_matrix(&[2], &[3]).unwrap(), Mat::identity(5, 5));
    }

    #[test]
    fn two_block_permutation_interleaves() {
        let s = permutation_matrix(&[1, 1], &[1, 1]).unwrap();
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]); // [w1; w2; h1; h2]
        assert_eq!(&s * v, Vector::from_vec(vec![1.0, 3.0, 2.0, 4.0]));
        assert_eq!(s.transpose() * &s, Mat::identity(4, 4));
    }

    #[test]
    fn single_uncoupled_composition() {
        let sys = JumpDiffusionSystem::linear(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.5]),
            Mat::from_row_slice(2, 1, &[0.0, 1.0]),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            Mat::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let closed = compose(std::slice::from_ref(&sys), &Mat::zeros(1, 1)).unwrap();
        assert_eq!(closed.a, sys.a);
        assert_eq!(closed.b, sys.b);
        assert_eq!(closed.p(), 0);
        assert!(compose(&[sys], &Mat::zeros(2, 1)).is_err());
    }

    #[test]
    fn mismatched_jump_rates_rejected() {
        let base = JumpDiffusionSystem::linear(
            Mat::zeros(1, 1),
            Mat::zeros(1, 0),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
        )
        .unwrap();
        let a = base.clone().with_jumps(vec![Vector::from_element(1, 1.0)], vec![1.0]).unwrap();
        let b = base.clone().with_jumps(vec![Vector::from_element(1, 1.0)], vec![2.0]).unwrap();
        assert!(shared_rates(&[a.clone(), base.clone()]).is_ok());
        assert!(shared_rates(&[a, b]).is_err());
    }

    #[test]
    fn trivial_coupling_solution() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let i = Mat::identity(2, 2);
        let sol = solve_abstract_coupling(&i, &m, &i, &i, 1e-10).unwrap();
        assert!(sol.feasible && sol.unique);
        assert!((sol.abstract_coupling - &m).norm() < 1e-12);

        let zero = Mat::zeros(2, 2);
        let sol = solve_abstract_coupling(&i, &m, &i, &zero, 1e-10).unwrap();
        assert!(!sol.feasible);
        assert!((sol.residual - m.norm()).abs() < 1e-12);
    }
}
