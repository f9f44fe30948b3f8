//! Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
//! limit. Exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use unlearn::data::{gen_synthetic_dataset, Dataset, Model, Update, UpdateEffect};
use unlearn::distributed::{dist_learn, reservoir_update, Change, DistConfig, PointId, PointStore};
use unlearn::harness::{emit_report, run_chain, run_experiment, verify_unlearning_certificate, ChainConfig, ChainMode, ExperimentConfig, Prepared};
use unlearn::linalg::dist;
use unlearn::losses::{closed_form_ridge_optimizer, DataBounds, DataPoint, LossModel, ParamSpace};
use unlearn::mechanism::{boosting_copies, modified_count_bound};
use unlearn::optimizer::{pgd_observed, GdConfig};
use unlearn::rng::{Seeds, StreamKind};
use unlearn::unlearn::{weak_schedule, Mode, Privacy, UnlearnConfig, UnlearnParams};

type Outcome = Result<String, String>;

const LAMBDA: f64 = 0.1;
const RADIUS: f64 = 4.0;
const REL: f64 = 1e-9;

fn bounds() -> DataBounds {
    DataBounds::new(1.0, 1.0).unwrap()
}

fn ridge(d: usize) -> LossModel {
    LossModel::ridge(ParamSpace::new(d, RADIUS).unwrap(), bounds(), LAMBDA).unwrap()
}

fn synthetic(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = Seeds::new(seed).stream(StreamKind::Data, 0);
    gen_synthetic_dataset(n, d, Model::Linear { noise: 0.2 }, &bounds(), &mut rng).unwrap().dataset
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Minimizer of `½ mean (θᵀx − y)² + λ/2 ‖θ‖²` by Gauss–Jordan elimination
/// with partial pivoting, independent of the library's Cholesky path.
fn ridge_minimizer(data: &[DataPoint], lambda: f64) -> Vec<f64> {
    let d = data[0].x.len();
    let n = data.len() as f64;
    let mut a = vec![vec![0.0; d + 1]; d];
    for z in data {
        for r in 0..d {
            for c in 0..d {
                a[r][c] += z.x[r] * z.x[c] / n;
            }
            a[r][d] += z.x[r] * z.y / n;
        }
    }
    for (r, row) in a.iter_mut().enumerate() {
        row[r] += lambda;
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..d {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..d).map(|r| a[r][d] / a[r][r]).collect()
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for inst in 0..50u64 {
        let d = [1, 5, 20][(inst % 3) as usize];
        let loss = ridge(d);
        let data = synthetic(200, d, 1000 + inst);
        let star = closed_form_ridge_optimizer(data.points(), LAMBDA, loss.space()).map_err(|e| e.to_string())?;
        let independent = ridge_minimizer(data.points(), LAMBDA);
        ensure(dist(&star, &independent) <= 1e-10, || format!("instance {inst}: oracles disagree by {:e}", dist(&star, &independent)))?;
        let gamma = loss.constants().contraction().unwrap();
        let mut rng = Seeds::new(inst).stream(StreamKind::Noise, 0);
        let theta0 = loss.space().project(&(0..d).map(|_| rng.rng.random_range(-RADIUS..RADIUS)).collect::<Vec<_>>());
        let d0 = dist(&theta0, &star);
        let mut violation = None;
        pgd_observed(&loss, data.points(), &theta0, &GdConfig::strongly_convex(&loss, 50).unwrap(), |t, th| {
            let ratio = dist(th, &star) / (gamma.powi(t as i32) * d0);
            worst = worst.max(ratio);
            if ratio > 1.0 + REL && violation.is_none() {
                violation = Some((t, ratio));
            }
        })
        .map_err(|e| e.to_string())?;
        if let Some((t, r)) = violation {
            return Err(format!("instance {inst} (d={d}) T={t}: distance / bound = {r}"));
        }
    }
    Ok(format!("50 instances x T=1..50, max distance/bound = {worst:.4}"))
}

fn criterion_2() -> Outcome {
    let n = 100;
    let d = 5;
    let loss = ridge(d);
    let c = loss.constants();
    let bound = 2.0 * c.lipschitz / (c.strong_convexity * n as f64);
    let mut worst: f64 = 0.0;
    for pair in 0..1000u64 {
        let data = synthetic(n, d, 5000 + pair);
        let mut rng = Seeds::new(pair).stream(StreamKind::Updates, 0);
        let update = if rng.rng.random::<bool>() {
            let extra = synthetic(1, d, 900_000 + pair);
            Update::add(extra.points()[0].clone())
        } else {
            Update::delete(data.points()[rng.rng.random_range(0..n)].clone())
        };
        let next = data.apply_update(&update).map_err(|e| e.to_string())?;
        let a = ridge_minimizer(data.points(), LAMBDA);
        let b = ridge_minimizer(next.points(), LAMBDA);
        let moved = dist(&a, &b);
        worst = worst.max(moved / bound);
        ensure(moved <= bound * (1.0 + REL), || format!("pair {pair}: displacement {moved:e} > 2L/(mn) = {bound:e}"))?;
    }
    Ok(format!("1000 pairs, max displacement/bound = {worst:.4}"))
}

fn experiment(mode: Mode, n: usize, d: usize, budget: u32, length: usize) -> ExperimentConfig {
    ExperimentConfig {
        n,
        d,
        iterations: budget,
        update_length: length,
        mode: ChainMode::Single(mode),
        lambda: LAMBDA,
        radius: RADIUS,
        epsilon: 1.0,
        delta: 1e-5,
        ..Default::default()
    }
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    for budget in [1, 3, 5] {
        let p = experiment(Mode::StrongSecret, 500, 5, budget, 100).prepare().map_err(|e| e.to_string())?;
        let rep = verify_unlearning_certificate(&p, 20).map_err(|e| e.to_string())?;
        let violations: usize = rep.rounds.iter().map(|r| r.gap_violations + r.drift_violations).sum();
        ensure(rep.rounds.len() == 101, || format!("I={budget}: {} rounds", rep.rounds.len()))?;
        ensure(rep.passed, || {
            format!("I={budget}: {violations} violations in rounds {:?}, certified eps {}", rep.failed_rounds, rep.certified_epsilon)
        })?;
        let max_drift = rep.rounds.iter().map(|r| r.max_drift).fold(0.0, f64::max);
        notes.push(format!(
            "I={budget}: gap {:.2e}/{:.2e}, drift {:.2e}/{:.2e}, eps {:.3}",
            rep.max_gap, rep.gap_bound, max_drift, rep.residual_bound, rep.epsilon_at_max_gap
        ));
    }
    Ok(notes.join("; "))
}

fn criterion_4() -> Outcome {
    let cfg = ExperimentConfig { delta: 1e-3, measure_gap: false, ..experiment(Mode::StrongPerfect, 500, 5, 28, 100) };
    let p = cfg.prepare().map_err(|e| e.to_string())?;
    let ChainConfig::Single(uc) = &p.chain else { unreachable!() };
    let bound = uc.residual_bound();
    let trials = 200;
    let per_trial = p.config.execution.try_map(trials, |t| run_chain(&p, t)).map_err(|e| e.to_string())?;
    let held = per_trial.iter().filter(|recs| recs.iter().all(|r| r.drift <= bound * (1.0 + REL))).count();
    let max_drift = per_trial.iter().flatten().map(|r| r.drift).fold(0.0, f64::max);
    let need = (1.0 - uc.params.privacy.delta / 2.0) * trials as f64;
    ensure(held as f64 >= need, || format!("{held}/{trials} trials within bound, need {need}"))?;
    Ok(format!("{held}/{trials} trials within {bound:.3e} (max drift {max_drift:.3e}, I=28)"))
}

fn criterion_5() -> Outcome {
    let base = ridge(5);
    let privacy = Privacy::new(1.0, 1e-5).unwrap();
    for xi in [1.0, 2.0] {
        let cfg = UnlearnConfig::new(UnlearnParams { mode: Mode::RegularizedWeak, privacy, budget: 3, xi }, &base, 1000).map_err(|e| e.to_string())?;
        for i in 1..=100usize {
            let expect = i.pow(2 * xi as u32) * 3;
            ensure(cfg.round_iterations(i) == expect && weak_schedule(i, xi, 3) == expect, || format!("xi={xi} i={i}: {} != {expect}", cfg.round_iterations(i)))?;
        }
    }
    for (mode, budget) in [(Mode::StrongSecret, 3), (Mode::StrongPerfect, 40), (Mode::RegularizedStrong, 3)] {
        let cfg = UnlearnConfig::new(UnlearnParams { mode, privacy, budget, xi: 1.0 }, &base, 1000).map_err(|e| e.to_string())?;
        let t1 = cfg.round_iterations(1) as f64;
        for i in 1..=10_000usize {
            let r = cfg.round_iterations(i) as f64 / t1;
            ensure(r <= 1.0 + (i as f64).log2(), || format!("{mode:?} i={i}: T_i/T_1 = {r}"))?;
        }
    }
    Ok("weak T_i = i^(2xi) I for i<=100, xi in {1,2}; strong T_i/T_1 <= 1+log2 i for i<=1e4".into())
}

fn criterion_6() -> Outcome {
    let n = 50;
    let b = 100;
    let replays = 100_000u64;
    let base = synthetic(n, 3, 77);
    let fresh = synthetic(2, 3, 78);
    let dup = base.points()[7].clone();
    let prefix = [
        Update::add(dup.clone()),
        Update::delete(base.points()[3].clone()),
        Update::add(fresh.points()[0].clone()),
        Update::delete(dup),
        Update::add(fresh.points()[1].clone()),
    ];

    let mut store = PointStore::default();
    let initial: Vec<PointId> = base.points().iter().map(|z| store.intern(z)).collect();
    let mut data = base.clone();
    let mut pool = initial.clone();
    let mut changes = Vec::new();
    for u in &prefix {
        let change = match data.apply(u).map_err(|e| e.to_string())? {
            UpdateEffect::Added => {
                let id = store.intern(&u.point);
                pool.push(id);
                Change::Added(id)
            }
            UpdateEffect::Removed { multiplicity } => {
                let id = store.lookup(&u.point).unwrap();
                pool.remove(pool.iter().rposition(|&p| p == id).unwrap());
                Change::Deleted { id, multiplicity }
            }
            UpdateEffect::Absent => return Err("prefix contains an absent delete".into()),
        };
        changes.push((change, pool.clone()));
    }

    let positions: Vec<usize> = (0..20).map(|k| k * b / 20 + k % 5).collect();
    let ids = store.len();
    let counts = unlearn::exec::Execution::default().map(replays as usize, |r| {
        let mut rng = Seeds::new(r as u64).stream(StreamKind::Reservoir, 0);
        let mut sample: Vec<PointId> = (0..b).map(|_| initial[rng.rng.random_range(0..n)]).collect();
        for (change, pool) in &changes {
            reservoir_update(&mut sample, *change, pool, &mut rng).unwrap();
        }
        positions.iter().map(|&p| sample[p]).collect::<Vec<_>>()
    });
    let mut table = vec![vec![0u64; ids]; positions.len()];
    for row in &counts {
        for (k, &id) in row.iter().enumerate() {
            table[k][id as usize] += 1;
        }
    }
    let mut mult = vec![0usize; ids];
    for &id in &pool {
        mult[id as usize] += 1;
    }
    let support: Vec<usize> = (0..ids).filter(|&i| mult[i] > 0).collect();
    let total = pool.len() as f64;
    let chi = ChiSquared::new((support.len() - 1) as f64).unwrap();
    let critical = chi.inverse_cdf(1.0 - 0.01 / positions.len() as f64);
    let mut worst: f64 = 0.0;
    for (k, row) in table.iter().enumerate() {
        let off_support: u64 = (0..ids).filter(|&i| mult[i] == 0).map(|i| row[i]).sum();
        ensure(off_support == 0, || format!("position {}: {off_support} draws of deleted points", positions[k]))?;
        let stat: f64 = support
            .iter()
            .map(|&i| {
                let e = replays as f64 * mult[i] as f64 / total;
                (row[i] as f64 - e).powi(2) / e
            })
            .sum();
        worst = worst.max(stat);
        ensure(stat <= critical, || format!("position {}: chi2 {stat:.1} > {critical:.1}", positions[k]))?;
    }
    Ok(format!("20 positions, max chi2 {worst:.1} <= {critical:.1} (df {})", support.len() - 1))
}

fn criterion_7() -> Outcome {
    let (n, b) = (100, 100);
    let delta_prime = (-2f64).exp();
    let cap = modified_count_bound(b, n, delta_prime);
    let trials = 10_000;
    let base = synthetic(n + 1, 2, 404);
    let mut store = PointStore::default();
    let ids: Vec<PointId> = base.points().iter().map(|z| store.intern(z)).collect();
    let (initial, extra) = (&ids[..n], ids[n]);
    let within = unlearn::exec::Execution::default()
        .map(trials, |t| {
            let mut rng = Seeds::new(t as u64).stream(StreamKind::Reservoir, 0);
            let mut sample: Vec<PointId> = (0..b).map(|_| initial[rng.rng.random_range(0..n)]).collect();
            let changed = if t % 2 == 0 {
                let mut pool = initial.to_vec();
                pool.push(extra);
                reservoir_update(&mut sample, Change::Added(extra), &pool, &mut rng).unwrap()
            } else {
                let victim = initial[rng.rng.random_range(0..n)];
                let pool: Vec<PointId> = initial.iter().copied().filter(|&p| p != victim).collect();
                reservoir_update(&mut sample, Change::Deleted { id: victim, multiplicity: 1 }, &pool, &mut rng).unwrap()
            };
            changed.len() as f64 <= cap
        })
        .into_iter()
        .filter(|&ok| ok)
        .count();
    let freq = within as f64 / trials as f64;
    ensure(freq >= 1.0 - delta_prime, || format!("frequency {freq} < {}", 1.0 - delta_prime))?;
    Ok(format!("P(s_i <= {cap:.0}) = {freq:.4} >= {:.4}", 1.0 - delta_prime))
}

fn dist_prepared(n: usize, d: usize, beta: f64, length: usize, seed: u64) -> Result<Prepared, String> {
    let cfg = ExperimentConfig {
        seed,
        n,
        d,
        xi: 1.0,
        beta,
        delta: 1e-3,
        update_length: length,
        mode: ChainMode::Distributed,
        lambda: LAMBDA,
        radius: RADIUS,
        ..Default::default()
    };
    cfg.prepare().map_err(|e| e.to_string())
}

fn dist_config(p: &Prepared) -> &DistConfig {
    match &p.chain {
        ChainConfig::Distributed(c) => c,
        ChainConfig::Single(_) => unreachable!(),
    }
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slack_used = 0usize;
    for seed in 0..2u64 {
        let p = dist_prepared(400, 5, 0.3, 50, seed)?;
        let cfg = dist_config(&p);
        ensure((cfg.bootstrap, cfg.partitions, cfg.copies) == (400, 20, 3), || {
            format!("B, K, C = {}, {}, {}", cfg.bootstrap, cfg.partitions, cfg.copies)
        })?;
        let inputs = p.trial(0).map_err(|e| e.to_string())?;
        let mut state = dist_learn(inputs.dataset, cfg, &inputs.seeds).map_err(|e| e.to_string())?;
        let (k, c) = (cfg.partitions, cfg.copies);
        let residual = |state: &unlearn::distributed::PartitionedState, l: usize, j: usize| {
            let part = state.partition(l, j, cfg);
            dist(&state.params(l)[j], &closed_form_ridge_optimizer(&part, LAMBDA, cfg.loss.space()).unwrap())
        };
        let learn_bound = cfg.learn_residual_bound();
        for l in 0..c {
            for j in 0..k {
                let r = residual(&state, l, j);
                worst = worst.max(r / learn_bound);
                ensure(r <= learn_bound * (1.0 + REL), || format!("seed {seed} learn copy {l} part {j}: {r:e} > {learn_bound:e}"))?;
            }
        }
        let mut replaced = vec![vec![0usize; k]; c];
        for u in &inputs.updates.updates {
            let before: Vec<Vec<Vec<f64>>> = (0..c).map(|l| state.params(l).to_vec()).collect();
            let round = state.unlearn(u, cfg).map_err(|e| e.to_string())?;
            let i = round.round;
            for (l, cr) in round.copies.iter().enumerate() {
                let cap = cfg.round_gradient_cap(i, cr.affected);
                ensure(cr.gradients as f64 <= cap, || format!("seed {seed} round {i} copy {l}: {} gradients > {cap}", cr.gradients))?;
                if cr.gradients as f64 > cfg.n as f64 * cfg.round_budget(i) {
                    slack_used += 1;
                }
                for j in 0..k {
                    replaced[l][j] += cr.replaced[j];
                    if cr.replaced[j] == 0 {
                        ensure(state.params(l)[j] == before[l][j], || format!("seed {seed} round {i}: untouched partition {l}/{j} changed"))?;
                    }
                    let bound = cfg.residual_recursion_bound(i, replaced[l][j]);
                    let r = residual(&state, l, j);
                    worst = worst.max(r / bound);
                    ensure(r <= bound * (1.0 + REL), || format!("seed {seed} round {i} copy {l} part {j}: {r:e} > {bound:e} (S={})", replaced[l][j]))?;
                }
            }
        }
    }
    Ok(format!("2 seeds x 50 rounds, max residual/bound = {worst:.3e}; rounds using ceil slack: {slack_used}"))
}

fn criterion_9() -> Outcome {
    let beta = 0.1;
    let copies = ((2.0 / beta as f64).ln() / 2f64.ln()).ceil() as usize;
    ensure(boosting_copies(beta) == copies && copies == 5, || format!("C = {}", boosting_copies(beta)))?;
    let trials = 500;
    let rows = unlearn::exec::Execution::default().try_map(trials, |t| -> Result<(f64, Vec<f64>), String> {
        let p = dist_prepared(100, 3, beta, 0, 10_000 + t as u64)?;
        let cfg = dist_config(&p).clone().with_execution(unlearn::exec::Execution::Sequential);
        let inputs = p.trial(0).map_err(|e| e.to_string())?;
        let star = closed_form_ridge_optimizer(inputs.dataset.points(), LAMBDA, cfg.loss.space()).map_err(|e| e.to_string())?;
        let state = dist_learn(inputs.dataset, &cfg, &inputs.seeds).map_err(|e| e.to_string())?;
        let sq: Vec<f64> = (0..cfg.copies).map(|l| dist(&state.average(l), &star).powi(2)).collect();
        Ok((sq[state.best()], sq))
    })?;
    let (b, k) = {
        let p = dist_prepared(100, 3, beta, 0, 0)?;
        (dist_config(&p).bootstrap, dist_config(&p).partitions)
    };
    ensure((b, k) == (100, 10), || format!("B, K = {b}, {k}"))?;
    let all: Vec<f64> = rows.iter().flat_map(|(_, sq)| sq.iter().copied()).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let good = rows.iter().filter(|(best, _)| *best < 2.0 * mean).count();
    let frac = good as f64 / trials as f64;
    ensure(frac >= 0.9, || format!("best copy under 2x mean in {good}/{trials}"))?;
    Ok(format!("C={copies}: best-copy sq. distance < 2 x {mean:.3e} in {good}/{trials} trials"))
}

fn steady_excess(cfg: ExperimentConfig) -> Result<f64, String> {
    let p = cfg.prepare().map_err(|e| e.to_string())?;
    let recs = run_experiment(&p).map_err(|e| e.to_string())?;
    let tail: Vec<f64> = recs.iter().filter(|r| r.round > 25).map(|r| r.excess_risk).collect();
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

fn criterion_10() -> Outcome {
    let base = |n: usize, budget: u32| ExperimentConfig { trials: 20, measure_gap: false, ..experiment(Mode::StrongSecret, n, 5, budget, 50) };
    let by_budget = [1u32, 2, 4, 8, 16].iter().map(|&b| steady_excess(base(500, b))).collect::<Result<Vec<_>, _>>()?;
    ensure(by_budget.windows(2).all(|w| w[1] < w[0]), || format!("not decreasing in I: {by_budget:?}"))?;
    let by_n = [250usize, 500, 1000].iter().map(|&n| steady_excess(base(n, 4))).collect::<Result<Vec<_>, _>>()?;
    ensure(by_n.windows(2).all(|w| w[1] < w[0]), || format!("not decreasing in n: {by_n:?}"))?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" > ");
    Ok(format!("I=1..16: {}; n=250..1000: {}", fmt(&by_budget), fmt(&by_n)))
}

fn criterion_11() -> Outcome {
    use unlearn::exec::Execution;
    let configs = [
        ExperimentConfig { trials: 3, ..experiment(Mode::StrongPerfect, 200, 3, 28, 20) },
        ExperimentConfig { trials: 2, update_length: 10, ..ExperimentConfig { execution: Execution::Parallel, ..dist_prepared(100, 3, 0.3, 10, 5)?.config } },
    ];
    for cfg in configs {
        let mut outputs = Vec::new();
        for execution in [Execution::Parallel, Execution::Parallel, Execution::Sequential] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let p = ExperimentConfig { execution, ..cfg.clone() }.prepare().map_err(|e| e.to_string())?;
            emit_report(&run_experiment(&p).map_err(|e| e.to_string())?, dir.path()).map_err(|e| e.to_string())?;
            let bytes = ["records.jsonl", "summary.json"].map(|f| std::fs::read(dir.path().join(f)).unwrap());
            outputs.push(bytes);
        }
        ensure(outputs.windows(2).all(|w| w[0] == w[1]), || format!("{:?}: reports differ", cfg.mode))?;
    }
    Ok("repeated and sequential-vs-parallel runs give byte-identical reports".into())
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        ("1 contraction", Duration::from_secs(10), criterion_1),
        ("2 sensitivity", Duration::from_secs(30), criterion_2),
        ("3 drift certificate", Duration::from_secs(120), criterion_3),
        ("4 perfect-mode drift", Duration::from_secs(300), criterion_4),
        ("5 iteration schedules", Duration::from_secs(1), criterion_5),
        ("6 reservoir marginals", Duration::from_secs(120), criterion_6),
        ("7 modified-count bound", Duration::from_secs(30), criterion_7),
        ("8 distributed drift", Duration::from_secs(300), criterion_8),
        ("9 boosting", Duration::from_secs(120), criterion_9),
        ("10 accuracy trend", Duration::from_secs(600), criterion_10),
        ("11 determinism", Duration::from_secs(60), criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > limit => Err(format!("{detail}; exceeded {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{:.2}s] {detail}", took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} [{:.2}s] {why}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
