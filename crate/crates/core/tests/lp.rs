mod common;

use fmdp_core::planners::{build_alp, solve_alp, solve_lp, Basis, LinearProgram, VarBound};
use fmdp_core::solve::{solve_average_reward, DEFAULT_MAX_ITERS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All constraints as `a.x >= b`, bounds included.
fn halfspaces(lp: &LinearProgram) -> Vec<(Vec<f64>, f64)> {
    let n = lp.num_vars();
    let mut out: Vec<_> = lp.rows.iter().cloned().zip(lp.rhs.iter().copied()).collect();
    for (j, b) in lp.bounds.iter().enumerate() {
        if let VarBound::Boxed { lo, hi } = *b {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            if lo.is_finite() {
                out.push((e.clone(), lo));
            }
            if hi.is_finite() {
                out.push((e.iter().map(|v| -v).collect(), -hi));
            }
        }
    }
    out
}

/// Minimum over every vertex: each choice of `n` tight constraints.
fn vertex_oracle(lp: &LinearProgram) -> f64 {
    let n = lp.num_vars();
    let hs = halfspaces(lp);
    let mut best = f64::INFINITY;
    let mut pick = Vec::new();
    fn rec(
        start: usize,
        n: usize,
        hs: &[(Vec<f64>, f64)],
        pick: &mut Vec<usize>,
        lp: &LinearProgram,
        best: &mut f64,
    ) {
        if pick.len() == n {
            let a = pick.iter().map(|&k| hs[k].0.clone()).collect();
            let b = pick.iter().map(|&k| hs[k].1).collect();
            if let Some(x) = common::solve_dense(a, b) {
                if hs.iter().all(|(row, rhs)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() >= rhs - 1e-9) {
                    *best = best.min(lp.value(&x));
                }
            }
            return;
        }
        for k in start..hs.len() {
            pick.push(k);
            rec(k + 1, n, hs, pick, lp, best);
            pick.pop();
        }
    }
    rec(0, n, &hs, &mut pick, lp, &mut best);
    best
}

fn random_lp(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> LinearProgram {
    let objective = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let bounds = (0..n)
        .map(|_| VarBound::Boxed {
            lo: -rng.gen_range(1.0..4.0),
            hi: rng.gen_range(1.0..4.0),
        })
        .collect();
    let mut lp = LinearProgram::new(objective, bounds).unwrap();
    // Every row is satisfied at the origin, so the program is feasible.
    for _ in 0..rows {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        lp.add_row(row, -rng.gen_range(0.0..2.0)).unwrap();
    }
    lp
}

#[test]
fn small_programs_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let n = rng.gen_range(1..=3);
        let rows = rng.gen_range(0..=5);
        let lp = random_lp(&mut rng, n, rows);
        let sol = solve_lp(&lp, 1e-10).unwrap();
        assert!(lp.max_violation(&sol.x) < 1e-8);
        let oracle = vertex_oracle(&lp);
        assert!((sol.objective - oracle).abs() < 1e-7, "{} vs {oracle}", sol.objective);
    }
}

#[test]
fn free_variables_and_infeasibility() {
    // min x subject to x >= 2 and -x >= -5
    let mut lp = LinearProgram::new(vec![1.0], vec![VarBound::Free]).unwrap();
    lp.add_row(vec![1.0], 2.0).unwrap();
    lp.add_row(vec![-1.0], -5.0).unwrap();
    assert!((solve_lp(&lp, 1e-10).unwrap().objective - 2.0).abs() < 1e-10);
    lp.add_row(vec![-1.0], -1.0).unwrap();
    assert!(solve_lp(&lp, 1e-10).is_err());
    // min x with x free and no rows is unbounded.
    assert!(solve_lp(&LinearProgram::new(vec![1.0], vec![VarBound::Free]).unwrap(), 1e-10).is_err());
}

#[test]
fn alp_is_an_upper_bound_on_the_optimal_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let m = common::random_fmdp(&mut rng, &[2, 3, 2], &[2], 1);
        let opt = solve_average_reward(&m.flatten().unwrap(), 1e-10, DEFAULT_MAX_ITERS).unwrap().gain();
        for basis in [Basis::Linear, Basis::Indicator] {
            let lp = build_alp(&m, basis).unwrap();
            let sol = solve_alp(&m, basis, 1e-9).unwrap();
            // The certificate: a feasible point whose objective is at least the optimum.
            let mut x = vec![sol.gain];
            x.extend(&sol.weights);
            assert!(lp.max_violation(&x) < 1e-7);
            assert!(sol.gain >= opt - 1e-7, "{} < {opt}", sol.gain);
        }
    }
}
