//! Acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use byzsw::harness::{csv_string, preset, rate_bound, run_fr, run_vr, three_sensor_law, StrategySpec, Summary};
use byzsw::par::Execution;
use byzsw::prob::{JointPmf, SubsetView};
use byzsw::region::{
    fixed_rate_region_contains, max_entropy_with_marginals, r_star_perfect, FixedKind, HonestCollection, InfoModel,
};
use byzsw::source::derive_rng;
use common::entropy_oracle;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn random_law(m: usize, seed: u64, index: u64) -> JointPmf {
    let mut rng = derive_rng(seed, "acceptance-law", index);
    let w: Vec<f64> = (0..1 << m).map(|_| rng.gen_range(0.05..1.0)).collect();
    JointPmf::from_weights(vec![2; m], w).expect("positive weights")
}

fn h(p: &JointPmf, idx: &[usize]) -> f64 {
    entropy_oracle(p, idx.iter().fold(0, |acc, &i| acc | 1 << i))
}

/// `I(A; B | C)` from oracle entropies.
fn cmi(p: &JointPmf, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    let cat = |xs: &[&[usize]]| xs.concat();
    h(p, &cat(&[a, c])) + h(p, &cat(&[b, c])) - h(p, &cat(&[a, b, c])) - h(p, c)
}

fn region_golden() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let p = random_law(3, 101, k);
        let joint = h(&p, &[0, 1, 2]);
        let max_cmi = cmi(&p, &[0], &[1], &[2]).max(cmi(&p, &[0], &[2], &[1])).max(cmi(&p, &[1], &[2], &[0]));
        let t1 = r_star_perfect(&p, &HonestCollection::threshold(3, 1).unwrap()).map_err(|e| e.to_string())?.r_star;
        let t2 = r_star_perfect(&p, &HonestCollection::threshold(3, 2).unwrap()).map_err(|e| e.to_string())?.r_star;
        let t0 = r_star_perfect(&p, &HonestCollection::no_traitors(3)).map_err(|e| e.to_string())?.r_star;
        let singles: f64 = (0..3).map(|i| h(&p, &[i])).sum();
        ensure((t1 - (joint + max_cmi)).abs() <= 1e-6, format!("law {k}: one traitor {t1} vs {}", joint + max_cmi))?;
        ensure((t2 - singles).abs() <= 1e-6, format!("law {k}: two traitors {t2} vs {singles}"))?;
        ensure((t0 - joint).abs() <= 1e-9, format!("law {k}: no traitors {t0} vs {joint}"))?;
        worst = worst.max((t1 - joint - max_cmi).abs()).max((t2 - singles).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1} s"))?;
    Ok(format!("20 laws, worst deviation {worst:.1e}, {secs:.2} s"))
}

/// Maximizes `H(q)` subject to `A q = A p` by gradient steps projected on
/// the null space of `A`, starting from `p`.
fn entropy_oracle_max(p: &JointPmf, sets: &[Vec<usize>]) -> f64 {
    let cells = p.cells();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for s in sets {
        let k = 1usize << s.len();
        let mut block = vec![vec![0.0; cells]; k];
        for cell in 0..cells {
            let x = p.symbols_of(cell);
            let key = s.iter().enumerate().fold(0, |acc, (b, &i)| acc | x[i] << b);
            block[key][cell] = 1.0;
        }
        rows.extend(block);
    }
    let a = DMatrix::from_fn(rows.len(), cells, |r, c| rows[r][c]);
    let eig = (a.transpose() * &a).symmetric_eigen();
    let mut proj = DMatrix::zeros(cells, cells);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() < 1e-9 {
            let v = eig.eigenvectors.column(k);
            proj += &v * v.transpose();
        }
    }
    let ent = |q: &DVector<f64>| q.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum::<f64>();
    let mut q = DVector::from_column_slice(p.mass());
    let mut val = ent(&q);
    for _ in 0..50_000 {
        let g = q.map(|x| -(x.ln() + 1.0) / std::f64::consts::LN_2);
        let d = &proj * g;
        let slope = d.dot(&d);
        if slope < 1e-22 {
            break;
        }
        let mut t = q.iter().zip(d.iter()).filter(|(_, &di)| di < 0.0).map(|(&qi, &di)| -0.99 * qi / di).fold(1.0, f64::min);
        loop {
            let next = &q + &d * t;
            let nv = ent(&next);
            if nv >= val + 1e-4 * t * slope || t < 1e-16 {
                q = next;
                val = nv;
                break;
            }
            t *= 0.5;
        }
    }
    val
}

fn diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| usize::from(x != y)).collect()
}

fn ipf_structure() -> Outcome {
    let start = Instant::now();
    let p = random_law(3, 202, 0);
    let v = vec![SubsetView::new(vec![0, 1], 3).unwrap(), SubsetView::new(vec![1, 2], 3).unwrap()];
    let fit = max_entropy_with_marginals(&p, &v).map_err(|e| e.to_string())?;
    let marg = |keep: &dyn Fn(&[usize]) -> bool, x: &[usize]| -> f64 {
        (0..8).filter(|&c| keep(&diff(&p.symbols_of(c), x))).map(|c| p.prob(c)).sum()
    };
    let mut worst_cell: f64 = 0.0;
    for cell in 0..8 {
        let x = p.symbols_of(cell);
        let p01 = marg(&|d| d[0] == 0 && d[1] == 0, &x);
        let p12 = marg(&|d| d[1] == 0 && d[2] == 0, &x);
        let p1 = marg(&|d| d[1] == 0, &x);
        worst_cell = worst_cell.max((fit.q.prob(cell) - p01 * p12 / p1).abs());
    }
    ensure(worst_cell <= 1e-7, format!("chain factorization off by {worst_cell:.2e}"))?;

    let sets = vec![vec![0, 1, 2], vec![2, 3, 4], vec![0, 4, 5]];
    let views: Vec<SubsetView> = sets.iter().map(|s| SubsetView::new(s.clone(), 6).unwrap()).collect();
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let p = random_law(6, 203, k);
        let fit = max_entropy_with_marginals(&p, &views).map_err(|e| e.to_string())?;
        let oracle = entropy_oracle_max(&p, &sets);
        ensure((fit.value - oracle).abs() <= 1e-4, format!("law {k}: fitting {} vs oracle {oracle}", fit.value))?;
        worst = worst.max((fit.value - oracle).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!("chain cells within {worst_cell:.1e}, cyclic family within {worst:.1e} of oracle, {secs:.2} s"))
}

/// The pairwise constraints written out one by one.
fn pairwise_literal(r: &[f64], p: &JointPmf) -> bool {
    let tol = 1e-9;
    let cond = |i: usize, j: usize| h(p, &[i, j]) - h(p, &[j]);
    (0..3).all(|i| (0..3).filter(|&j| j != i).all(|j| r[i] >= cond(i, j) - tol))
        && r[0] + r[1] >= h(p, &[0, 1]) - tol
        && r[0] + r[2] >= h(p, &[0, 2]) - tol
        && r[1] + r[2] >= h(p, &[1, 2]) - tol
}

/// Least `R1 + R2 + R3` over the pairwise constraints, by enumerating the
/// vertices of the polyhedron.
fn pairwise_min_sum(p: &JointPmf) -> f64 {
    let mut cons: Vec<([f64; 3], f64)> = Vec::new();
    for i in 0..3 {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        cons.push((e, 0.0));
        for j in (0..3).filter(|&j| j != i) {
            cons.push((e, h(p, &[i, j]) - h(p, &[j])));
        }
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        e[j] = 1.0;
        cons.push((e, h(p, &[i, j])));
    }
    let mut best = f64::INFINITY;
    for a in 0..cons.len() {
        for b in a + 1..cons.len() {
            for c in b + 1..cons.len() {
                let m = DMatrix::from_fn(3, 3, |r, k| [&cons[a], &cons[b], &cons[c]][r].0[k]);
                let rhs = DVector::from_vec(vec![cons[a].1, cons[b].1, cons[c].1]);
                let Some(x) = m.lu().solve(&rhs) else { continue };
                if cons.iter().all(|(e, bound)| e[0] * x[0] + e[1] * x[1] + e[2] * x[2] >= bound - 1e-9) {
                    best = best.min(x.sum());
                }
            }
        }
    }
    best
}

fn fixed_region_logic() -> Outcome {
    let h1 = HonestCollection::threshold(3, 1).unwrap();
    let mut points = 0;
    for p in [three_sensor_law(), random_law(3, 303, 0), random_law(3, 303, 1)] {
        let info = InfoModel::perfect(&h1, p.sizes());
        for a in 0..10 {
            for b in 0..10 {
                for c in 0..10 {
                    let r = [a as f64 * 0.125, b as f64 * 0.125, c as f64 * 0.125];
                    let det = fixed_rate_region_contains(&r, &p, &h1, &info, FixedKind::Deterministic)
                        .map_err(|e| e.to_string())?;
                    let ran = fixed_rate_region_contains(&r, &p, &h1, &info, FixedKind::Randomized)
                        .map_err(|e| e.to_string())?;
                    let trivial = (0..3).all(|i| r[i] >= h(&p, &[i]) - 1e-9);
                    ensure(det == trivial, format!("deterministic check at {r:?}: {det}, expected {trivial}"))?;
                    ensure(ran == pairwise_literal(&r, &p), format!("randomized check at {r:?}: {ran}"))?;
                    ensure(!det || ran, format!("deterministic outside randomized at {r:?}"))?;
                    points += 1;
                }
            }
        }
    }

    let mut mass = vec![0.0; 8];
    for cell in [0b000, 0b001, 0b010, 0b100] {
        mass[cell] = 0.25;
    }
    let p = JointPmf::new(vec![2; 3], mass).map_err(|e| e.to_string())?;
    let i12_3 = cmi(&p, &[0], &[1], &[2]);
    let i123 = cmi(&p, &[0, 1], &[2], &[]);
    ensure(i123 > i12_3, format!("constructed law has I(12;3)={i123} <= I(1;2|3)={i12_3}"))?;
    let closed = h(&p, &[0, 1, 2]) + 0.5 * (i12_3 + i123);
    let half_pairs = 0.5 * (h(&p, &[0, 1]) + h(&p, &[0, 2]) + h(&p, &[1, 2]));
    let lp = pairwise_min_sum(&p);
    let r_star = r_star_perfect(&p, &h1).map_err(|e| e.to_string())?.r_star;
    ensure((lp - closed).abs() <= 1e-6, format!("least pairwise sum {lp} vs {closed}"))?;
    ensure((half_pairs - closed).abs() <= 1e-6, format!("half pair sum {half_pairs} vs {closed}"))?;
    ensure(lp > r_star + 1e-6, format!("fixed-rate sum {lp} does not exceed variable-rate {r_star}"))?;
    Ok(format!("{points} grid points agree; fixed-rate least sum {lp:.6} > variable-rate {r_star:.6}"))
}

fn vr_no_traitors() -> Outcome {
    let start = Instant::now();
    let exp = preset("pair").and_then(|f| f.build()).map_err(|e| e.to_string())?;
    let run = run_vr(&exp, 100, exp.file.seed, Execution::Parallel).map_err(|e| e.to_string())?;
    let s = Summary::from_rows("vr", &run.rows, rate_bound(&exp).map_err(|e| e.to_string())?);
    let pr = &exp.params;
    let limit = s.rate_bound + 2.0 * (2.0 * pr.eps + pr.nu) + 0.1;
    ensure(s.error_rate <= 0.05, format!("error rate {:.3}", s.error_rate))?;
    ensure(s.mean_sum_rate <= limit, format!("mean rate {:.3} above {limit:.3}", s.mean_sum_rate))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, format!("took {secs:.0} s"))?;
    Ok(format!("error {:.3}, mean rate {:.3} <= {limit:.3}, {secs:.1} s", s.error_rate, s.mean_sum_rate))
}

fn vr_under_attack() -> Outcome {
    let start = Instant::now();
    let exp = preset("three-sensor").and_then(|f| f.build()).map_err(|e| e.to_string())?;
    let run = run_vr(&exp, 100, exp.file.seed, Execution::Parallel).map_err(|e| e.to_string())?;
    let s = Summary::from_rows("vr", &run.rows, rate_bound(&exp).map_err(|e| e.to_string())?);
    let pr = &exp.params;
    let m = exp.scenario.m();
    let limit = s.rate_bound + m as f64 * (2.0 * pr.eps + pr.nu) + 0.2;
    ensure(s.error_rate <= 0.05, format!("error rate {:.3}", s.error_rate))?;
    ensure(s.mean_sum_rate <= limit, format!("mean rate {:.3} above {limit:.3}", s.mean_sum_rate))?;
    ensure(s.max_over_budget_rounds <= m, format!("{} over-budget rounds", s.max_over_budget_rounds))?;
    ensure(s.v_ge2_fraction >= 0.9, format!("|V| >= 2 in only {:.2} of trials", s.v_ge2_fraction))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 600.0, format!("took {secs:.0} s"))?;
    Ok(format!(
        "error {:.3}, mean rate {:.3} <= {limit:.3}, over-budget max {}, |V| >= 2 in {:.2}, {secs:.1} s",
        s.error_rate, s.mean_sum_rate, s.max_over_budget_rounds, s.v_ge2_fraction
    ))
}

fn fixed_rate() -> Outcome {
    let start = Instant::now();
    let base = preset("three-sensor").map_err(|e| e.to_string())?;
    let strategies = [
        StrategySpec::Honest,
        StrategySpec::BlackHole,
        StrategySpec::FakeDistribution { qbar: None },
        StrategySpec::FixedRateAmbiguity { target: None },
    ];
    let mut worst: (f64, &str) = (0.0, "");
    for strategy in strategies {
        let mut file = base.clone();
        file.strategy = strategy;
        let exp = file.build().map_err(|e| e.to_string())?;
        let rows = run_fr(&exp, 200, exp.file.seed, Execution::Parallel).map_err(|e| e.to_string())?;
        let s = Summary::from_rows("fr", &rows, 0.0);
        if s.error_rate >= worst.0 {
            worst = (s.error_rate, exp.scenario.strategy.name());
        }
    }
    ensure(worst.0 <= 0.1, format!("randomized error {:.3} under {}", worst.0, worst.1))?;

    let exp = preset("three-sensor-converse").and_then(|f| f.build()).map_err(|e| e.to_string())?;
    let rows = run_fr(&exp, 200, exp.file.seed, Execution::Parallel).map_err(|e| e.to_string())?;
    let conv = Summary::from_rows("fr", &rows, 0.0);
    ensure(conv.error_rate >= 0.2, format!("deterministic code below the region errs only {:.3}", conv.error_rate))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 600.0, format!("took {secs:.0} s"))?;
    Ok(format!(
        "randomized worst {:.3} ({}), deterministic below region {:.3}, {secs:.1} s",
        worst.0, worst.1, conv.error_rate
    ))
}

fn determinism() -> Outcome {
    let vr = preset("three-sensor").and_then(|f| f.build()).map_err(|e| e.to_string())?;
    let a = csv_string(&run_vr(&vr, 12, 7, Execution::Parallel).map_err(|e| e.to_string())?.rows);
    let b = csv_string(&run_vr(&vr, 12, 7, Execution::Parallel).map_err(|e| e.to_string())?.rows);
    let c = csv_string(&run_vr(&vr, 12, 7, Execution::Sequential).map_err(|e| e.to_string())?.rows);
    ensure(a == b, "variable-rate CSV differs between runs".into())?;
    ensure(a == c, "variable-rate CSV differs between sequential and parallel".into())?;
    let fr = preset("three-sensor-converse").and_then(|f| f.build()).map_err(|e| e.to_string())?;
    let d = csv_string(&run_fr(&fr, 40, 7, Execution::Parallel).map_err(|e| e.to_string())?);
    let e = csv_string(&run_fr(&fr, 40, 7, Execution::Sequential).map_err(|e| e.to_string())?);
    ensure(d == e, "fixed-rate CSV differs between sequential and parallel".into())?;
    Ok(format!("{} + {} CSV bytes identical", a.len(), d.len()))
}

fn properties() -> Outcome {
    let checks = common::all();
    for (name, check) in &checks {
        check().map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} properties x {} cases", checks.len(), common::CASES))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("region golden values", region_golden),
        ("max-entropy structure", ipf_structure),
        ("fixed-rate region logic", fixed_region_logic),
        ("variable rate, no traitors", vr_no_traitors),
        ("variable rate under attack", vr_under_attack),
        ("fixed-rate achievability and converse", fixed_rate),
        ("determinism", determinism),
        ("property suites", properties),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
