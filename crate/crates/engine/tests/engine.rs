use dflp_engine::{
    solve_lp, solve_mip, CutCallback, EngineError, LinearProgram, LpSolution, MipConfig, MixedIntegerProgram, Relation, Row,
    Sense, Status, VarMeta, VarKind,
};
use proptest::prelude::*;

#[path = "support/dense.rs"]
mod dense;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lagrangian dual bound implied by the reported duals (maximization view).
/// Returns `None` when the duals have the wrong sign for some row.
fn dual_bound(lp: &LinearProgram, sol: &LpSolution) -> Option<f64> {
    let s = if lp.sense == Sense::Maximize { 1.0 } else { -1.0 };
    let mut bound = 0.0;
    let mut reduced: Vec<f64> = lp.objective.iter().map(|c| s * c).collect();
    for (row, &y) in lp.rows.iter().zip(&sol.duals) {
        let y = s * y;
        let ok = match row.relation {
            Relation::Le => y >= -1e-7,
            Relation::Ge => y <= 1e-7,
            Relation::Eq => true,
        };
        if !ok {
            return None;
        }
        bound += y * row.rhs;
        for &(j, a) in &row.coeffs {
            reduced[j] -= y * a;
        }
    }
    for (j, r) in reduced.iter().enumerate() {
        if r.abs() <= 1e-9 {
            continue;
        }
        let at = if *r > 0.0 { lp.upper[j] } else { lp.lower[j] };
        if !at.is_finite() {
            return None;
        }
        bound += r * at;
    }
    Some(s * bound)
}

fn assert_certified(lp: &LinearProgram, sol: &LpSolution) {
    assert_eq!(sol.status, Status::Optimal);
    assert!(lp.max_violation(&sol.x) <= 1e-7, "residual {}", lp.max_violation(&sol.x));
    let cx = lp.objective_value(&sol.x);
    assert!((sol.objective - cx).abs() <= 1e-7 * (1.0 + sol.objective.abs()));
    let dual = dual_bound(lp, sol).expect("dual infeasible");
    assert!(
        (dual - sol.objective).abs() <= 1e-6 * (1.0 + dual.abs()),
        "primal {} dual {}",
        sol.objective,
        dual
    );
    for (row, &y) in lp.rows.iter().zip(&sol.duals) {
        let slack = (row.activity(&sol.x) - row.rhs).abs();
        assert!(slack * y.abs() <= 1e-6 * (1.0 + y.abs()), "complementary slackness");
    }
}

#[test]
fn single_variable_bound_row() {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let x = lp.add_var(1.0, 0.0, f64::INFINITY);
    lp.add_row(Row::le(vec![(x, 1.0)], 1.0));
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-12);
    assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    assert_certified(&lp, &sol);
}

#[test]
fn degenerate_symmetric_optimum_is_deterministic() {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let x = lp.add_var(1.0, 0.0, f64::INFINITY);
    let y = lp.add_var(1.0, 0.0, f64::INFINITY);
    lp.add_row(Row::le(vec![(x, 1.0), (y, 1.0)], 1.0));
    let a = solve_lp(&lp).unwrap();
    let b = solve_lp(&lp).unwrap();
    assert!((a.objective - 1.0).abs() < 1e-12);
    assert_eq!(a, b);
    assert_certified(&lp, &a);
}

#[test]
fn infeasible_and_unbounded() {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let x = lp.add_var(1.0, 0.0, f64::INFINITY);
    lp.add_row(Row::ge(vec![(x, 1.0)], 2.0));
    assert_eq!(solve_lp(&lp).unwrap().status, Status::Unbounded);
    lp.add_row(Row::le(vec![(x, 1.0)], 1.0));
    assert_eq!(solve_lp(&lp).unwrap().status, Status::Infeasible);
}

#[test]
fn minimization_with_free_and_mirrored_variables() {
    // min x - y  s.t. x + y >= -2, x - y >= -4, x free, y <= 3
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
    let y = lp.add_var(-1.0, f64::NEG_INFINITY, 3.0);
    lp.add_row(Row::ge(vec![(x, 1.0), (y, 1.0)], -2.0));
    lp.add_row(Row::ge(vec![(x, 1.0), (y, -1.0)], -4.0));
    let sol = solve_lp(&lp).unwrap();
    assert!((sol.objective + 4.0).abs() < 1e-9);
    assert_certified(&lp, &sol);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let mut lp = LinearProgram::new(Sense::Maximize);
    lp.add_var(1.0, 0.0, 1.0);
    lp.add_row(Row::le(vec![(3, 1.0)], 1.0));
    assert!(solve_lp(&lp).is_err());
}

#[test]
fn small_knapsack_mip() {
    let mut mip = MixedIntegerProgram::new(Sense::Maximize);
    let a = mip.add_binary(3.0, VarMeta::new(VarKind::Y));
    let b = mip.add_binary(2.0, VarMeta::new(VarKind::Y));
    mip.add_row(Row::le(vec![(a, 1.0), (b, 1.0)], 1.0));
    let sol = solve_mip(&mip, &MipConfig::default(), None).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 3.0).abs() < 1e-9);
}

#[test]
fn lazy_cut_callback_is_honoured() {
    // max a + b over binaries; callback forbids a + b > 1 lazily.
    let mut mip = MixedIntegerProgram::new(Sense::Maximize);
    let a = mip.add_binary(1.0, VarMeta::new(VarKind::Y));
    let b = mip.add_binary(1.5, VarMeta::new(VarKind::Y));
    let mut calls = 0;
    let mut cb = |x: &[f64]| {
        calls += 1;
        if x[a] + x[b] > 1.0 + 1e-9 {
            Ok(vec![Row::le(vec![(a, 1.0), (b, 1.0)], 1.0)])
        } else {
            Ok(vec![])
        }
    };
    let sol = solve_mip(&mip, &MipConfig::default(), Some(&mut cb)).unwrap();
    assert!((sol.objective - 1.5).abs() < 1e-9);
    assert_eq!(sol.cuts_added, 1);
    assert!(calls >= 2);
}

#[test]
fn malformed_cut_is_contract_violation() {
    let mut mip = MixedIntegerProgram::new(Sense::Maximize);
    mip.add_binary(1.0, VarMeta::new(VarKind::Y));
    let mut cb = |_: &[f64]| Ok(vec![Row::le(vec![(7, 1.0)], 0.0)]);
    assert!(solve_mip(&mip, &MipConfig::default(), Some(&mut cb)).is_err());
}

fn random_mip(rng: &mut ChaCha8Rng) -> MixedIntegerProgram {
    let n = rng.gen_range(1..=8);
    let mut mip = MixedIntegerProgram::new(if rng.gen_bool(0.5) {
        Sense::Maximize
    } else {
        Sense::Minimize
    });
    for _ in 0..n {
        mip.add_binary(rng.gen_range(-5..=9) as f64, VarMeta::new(VarKind::Y));
    }
    for _ in 0..rng.gen_range(1..=5) {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                coeffs.push((j, rng.gen_range(-3..=6) as f64));
            }
        }
        let rel = match rng.gen_range(0..3) {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Le,
        };
        let rhs = rng.gen_range(-2..=8) as f64;
        mip.add_row(Row::new(coeffs, rel, rhs));
    }
    mip
}

fn enumerate(mip: &MixedIntegerProgram) -> Option<f64> {
    let n = mip.num_vars();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        if mip.lp.max_violation(&x) > 1e-9 {
            continue;
        }
        let v = mip.lp.objective_value(&x);
        best = Some(match (best, mip.lp.sense) {
            (None, _) => v,
            (Some(b), Sense::Maximize) => b.max(v),
            (Some(b), Sense::Minimize) => b.min(v),
        });
    }
    best
}

#[test]
fn random_tiny_mips_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 20 {
        let mip = random_mip(&mut rng);
        let oracle = enumerate(&mip);
        let sol = solve_mip(&mip, &MipConfig::default(), None).unwrap();
        match oracle {
            None => assert_eq!(sol.status, Status::Infeasible),
            Some(v) => {
                assert_eq!(sol.status, Status::Optimal);
                assert!((sol.objective - v).abs() < 1e-6, "{} vs {}", sol.objective, v);
                let relax = solve_lp(&mip.lp).unwrap();
                match mip.lp.sense {
                    Sense::Maximize => assert!(sol.objective <= relax.objective + 1e-6),
                    Sense::Minimize => assert!(sol.objective >= relax.objective - 1e-6),
                }
                checked += 1;
            }
        }
    }
}

#[test]
fn resolve_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let mip = random_mip(&mut rng);
        let a = solve_mip(&mip, &MipConfig::default(), None).unwrap();
        let b = solve_mip(&mip, &MipConfig::default(), None).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}

fn arb_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-5i32..6, n),
            prop::collection::vec((prop::collection::vec(-4i32..5, n), 0u8..3, -3i32..10), m),
            prop::collection::vec(0i32..4, n),
        )
            .prop_map(move |(c, rows, ub)| {
                let mut lp = LinearProgram::new(Sense::Maximize);
                for (j, &cj) in c.iter().enumerate() {
                    let hi = if ub[j] == 0 { 5.0 } else { ub[j] as f64 + 0.5 };
                    lp.add_var(cj as f64, 0.0, hi);
                }
                for (coeffs, rel, rhs) in rows {
                    let rel = match rel {
                        0 => Relation::Le,
                        1 => Relation::Ge,
                        _ => Relation::Eq,
                    };
                    let coeffs = coeffs.iter().enumerate().map(|(j, &a)| (j, a as f64)).collect();
                    lp.add_row(Row::new(coeffs, rel, rhs as f64));
                }
                lp
            })
    })
}

proptest! {
    #[test]
    fn optimal_lps_carry_a_dual_certificate(lp in arb_lp()) {
        let sol = solve_lp(&lp).unwrap();
        prop_assert!(sol.status != Status::Unbounded);
        if sol.status == Status::Optimal {
            assert_certified(&lp, &sol);
        }
    }
}

/// Programs with free, half-bounded and boxed variables in both senses.
fn arb_general_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..7, 0usize..7, any::<bool>()).prop_flat_map(|(n, m, maximize)| {
        (
            prop::collection::vec(-5i32..6, n),
            prop::collection::vec((prop::collection::vec(-4i32..5, n), 0u8..3, -6i32..10), m),
            prop::collection::vec((0u8..4, -3i32..3, 0i32..4), n),
        )
            .prop_map(move |(c, rows, bounds)| {
                let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
                let mut lp = LinearProgram::new(sense);
                for (j, &cj) in c.iter().enumerate() {
                    let (kind, lo, width) = bounds[j];
                    let (lo, hi) = match kind {
                        0 => (lo as f64, lo as f64 + width as f64),
                        1 => (lo as f64, f64::INFINITY),
                        2 => (f64::NEG_INFINITY, lo as f64),
                        _ => (f64::NEG_INFINITY, f64::INFINITY),
                    };
                    lp.add_var(cj as f64, lo, hi);
                }
                for (coeffs, rel, rhs) in rows {
                    let rel = match rel {
                        0 => Relation::Le,
                        1 => Relation::Ge,
                        _ => Relation::Eq,
                    };
                    let coeffs = coeffs.iter().enumerate().map(|(j, &a)| (j, a as f64)).collect();
                    lp.add_row(Row::new(coeffs, rel, rhs as f64));
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn simplex_agrees_with_dense_oracle(lp in arb_general_lp()) {
        let sol = solve_lp(&lp).unwrap();
        let oracle = dense::solve_dense(&lp).unwrap();
        prop_assert_eq!(sol.status, oracle.status);
        if sol.status == Status::Optimal {
            prop_assert!((sol.objective - oracle.objective).abs() <= 1e-6 * (1.0 + oracle.objective.abs()),
                "objective {} vs oracle {}", sol.objective, oracle.objective);
            assert_certified(&lp, &sol);
        }
    }
}

/// Proposes one fixed point at every fractional node.
struct Proposer {
    point: Vec<f64>,
    calls: usize,
}

impl CutCallback for Proposer {
    fn separate(&mut self, _x: &[f64]) -> Result<Vec<Row>, EngineError> {
        Ok(Vec::new())
    }

    fn heuristic_point(&mut self, _x: &[f64]) -> Option<Vec<f64>> {
        self.calls += 1;
        Some(self.point.clone())
    }
}

fn knapsack() -> MixedIntegerProgram {
    // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4; optimum a = c = 1 (value 8).
    let mut mip = MixedIntegerProgram::new(Sense::Maximize);
    for v in [5.0, 4.0, 3.0] {
        mip.add_binary(v, VarMeta::new(VarKind::Y));
    }
    mip.add_row(Row::le(vec![(0, 2.0), (1, 3.0), (2, 1.0)], 4.0));
    mip.add_row(Row::le(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 2.5));
    mip
}

#[test]
fn infeasible_heuristic_points_are_ignored() {
    let mip = knapsack();
    let mut cb = Proposer {
        point: vec![1.0, 1.0, 1.0],
        calls: 0,
    };
    let sol = solve_mip(&mip, &MipConfig::default(), Some(&mut cb)).unwrap();
    assert!(cb.calls > 0);
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 8.0).abs() < 1e-9);
}

#[test]
fn feasible_heuristic_point_becomes_incumbent() {
    let mip = knapsack();
    let mut cb = Proposer {
        point: vec![1.0, 0.0, 1.0],
        calls: 0,
    };
    let sol = solve_mip(&mip, &MipConfig::default(), Some(&mut cb)).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(sol.x, vec![1.0, 0.0, 1.0]);
    assert!((sol.objective - 8.0).abs() < 1e-9);
}

#[test]
fn expired_time_limit_reports_open_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mip = MixedIntegerProgram::new(Sense::Maximize);
    let n = 40;
    for _ in 0..n {
        mip.add_binary(rng.gen_range(10..100) as f64, VarMeta::new(VarKind::Y));
    }
    let weights: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(10..100) as f64)).collect();
    mip.add_row(Row::le(weights, 1000.0));
    let config = MipConfig::with_time_limit(std::time::Duration::from_nanos(1));
    let sol = solve_mip(&mip, &config, None).unwrap();
    assert_eq!(sol.status, Status::TimeLimit);
    assert!(!sol.has_incumbent());
    assert_eq!(sol.bound, f64::INFINITY);
}
