mod common;

use common::*;
use mot_core::hardness::{build_primal_constraints, incidence_matrix, sufficient_tu, tu_check, IntMatrix, TuVerdict};
use mot_core::oracle::{build_lp, solve_exact_lp, solve_exact_lp_rational, LpStatus};
use num_traits::ToPrimitive;
use rand::Rng;

/// True when some square submatrix has a determinant outside {-1, 0, 1},
/// found by cofactor expansion over every row and column subset.
fn brute_non_tu(m: &[Vec<i64>]) -> bool {
    let (r, c) = (m.len(), m[0].len());
    for rows in 1u32..(1 << r) {
        let ri: Vec<usize> = (0..r).filter(|i| rows >> i & 1 == 1).collect();
        for cols in 1u32..(1 << c) {
            if cols.count_ones() != rows.count_ones() {
                continue;
            }
            let ci: Vec<usize> = (0..c).filter(|j| cols >> j & 1 == 1).collect();
            let sub: Vec<Vec<i64>> = ri.iter().map(|&i| ci.iter().map(|&j| m[i][j]).collect()).collect();
            if cofactor_det(&sub).abs() >= 2 {
                return true;
            }
        }
    }
    false
}

#[test]
fn tu_check_agrees_with_exhaustive_minors() {
    let mut g = rng(3);
    for _ in 0..60 {
        let (r, c) = (g.gen_range(2..5), g.gen_range(2..6));
        let rows: Vec<Vec<i64>> = (0..r).map(|_| (0..c).map(|_| g.gen_range(-1..=1)).collect()).collect();
        let m = IntMatrix::from_rows(&rows).unwrap();
        let verdict = tu_check(&m, None).unwrap();
        assert_eq!(verdict.witness().is_some(), brute_non_tu(&rows), "{rows:?}");
        if let Some(w) = verdict.witness() {
            let sub: Vec<Vec<i64>> = w.rows.iter().map(|&i| w.cols.iter().map(|&j| rows[i - 1][j - 1]).collect()).collect();
            assert_eq!(cofactor_det(&sub) as i128, w.det);
        }
    }
}

#[test]
fn network_matrices_are_tu() {
    let mut g = rng(11);
    for _ in 0..20 {
        let nodes = g.gen_range(2..5);
        let arcs: Vec<(usize, usize)> = (0..g.gen_range(1..6))
            .map(|_| {
                let u = g.gen_range(0..nodes);
                let v = (u + g.gen_range(1..nodes)) % nodes;
                (u, v)
            })
            .collect();
        let m = incidence_matrix(nodes, &arcs).unwrap();
        assert!(sufficient_tu(&m));
        assert!(!brute_non_tu(&m.to_rows()));
        assert!(matches!(tu_check(&m, None).unwrap(), TuVerdict::TuUpToOrder { .. }));
    }
}

#[test]
fn constraint_matrix_rank() {
    // m(n-1)+1 independent marginal constraints
    for (n, m) in [(2, 2), (2, 3), (3, 2), (3, 3), (2, 4)] {
        let a = build_primal_constraints(n, m).unwrap();
        assert_eq!(a.rank(), m * (n - 1) + 1, "n = {n}, m = {m}");
        assert_eq!(a.cols(), n.pow(m as u32));
    }
}

#[test]
fn two_marginal_constraint_matrices_are_tu() {
    for n in 2..4 {
        let a = build_primal_constraints(n, 2).unwrap();
        assert!(sufficient_tu(&a));
        assert!(tu_check(&a, None).unwrap().witness().is_none());
    }
}

#[test]
fn oracle_matches_basis_enumeration_on_three_marginals() {
    for seed in 0..8 {
        let mut g = rng(500 + seed);
        let inst = random_instance(&mut g, 3, 2);
        let lp = build_lp(&inst).unwrap();
        let best = enumerate_bfs(&lp.a, &lp.b, &lp.c).expect("feasible");
        let (sol, exact) = solve_exact_lp_rational(&inst).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(exact, best);
        let float = solve_exact_lp(&inst).unwrap();
        assert!((float.value - best.to_f64().unwrap()).abs() < 1e-10);
        assert!(brute_violation(&float.plan, inst.marginals()) < 1e-10);
    }
}

#[test]
fn oracle_value_is_below_any_feasible_plan() {
    let mut g = rng(8);
    let inst = random_instance(&mut g, 3, 3);
    let sol = solve_exact_lp(&inst).unwrap();
    // the independent coupling is always feasible
    let product = mot_core::DenseTensor::outer_product(inst.marginals()).unwrap();
    assert!(sol.value <= inst.cost().inner(&product).unwrap() + 1e-12);
    assert!(sol.plan.data().iter().all(|&v| v >= -1e-12));
}
