//! Acceptance gate. Runs every criterion, prints one line each, and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use shardsim::adaptive::{classify_age, dyadic_scales, fractal_dimension, forecast, ForecastConfig, HeatTier, LoadHistory, WindowConfig};
use shardsim::config::{parse_config, ScenarioConfig};
use shardsim::event::EventKind;
use shardsim::report::{cmd_compare, cmd_run};
use shardsim::resilience::regenerate;
use shardsim::rng::rng_stream;
use shardsim::sim::{run_scenario, ClusterEvent, Simulation};
use shardsim::strategies::{hash_locate, ring_add, ring_locate, HashRing, KeyHasher, StrategyKind};
use shardsim::workload::{arrival_times, Pattern, WorkloadSpec, ZipfTable};
use shardsim::{Key, NodeId, SimTime};
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenario(name: &str) -> ScenarioConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "examples", "scenarios", name].iter().collect();
    parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn dominance() -> Outcome {
    let cfg = scenario("skewed.toml");
    let seeds: Vec<u64> = (1..=5).collect();

    let mut adaptive = cfg.clone();
    adaptive.strategy = StrategyKind::Adaptive;
    let t = Instant::now();
    run_scenario(&adaptive, 1).map_err(|e| e.to_string())?;
    let single = t.elapsed();
    ensure(single <= Duration::from_secs(60), format!("one adaptive run took {single:.1?}"))?;

    let report = cmd_compare(&cfg, &StrategyKind::ALL, &seeds).map_err(|e| e.to_string())?;
    let table = report.normalized.as_ref().ok_or("compare produced no normalized scores")?;
    let ours = &table.rows[&StrategyKind::Adaptive];
    for (kind, row) in &table.rows {
        if *kind == StrategyKind::Adaptive {
            continue;
        }
        ensure(
            ours.scalability >= row.scalability && ours.performance >= row.performance,
            format!("{kind:?} ties or beats adaptive: {row:?} vs {ours:?}"),
        )?;
        ensure(
            ours.fault_tolerance > row.fault_tolerance && ours.adaptability > row.adaptability,
            format!("adaptive not strictly ahead of {kind:?}: {row:?} vs {ours:?}"),
        )?;
    }
    let raw = &report.raw_scores.as_ref().expect("compare has raw scores")[&StrategyKind::Adaptive];
    Ok(format!(
        "adaptive raw scal {:.3} perf {:.3} ft {:.3} adapt {:.3}; single run {single:.1?}",
        raw.scalability, raw.performance, raw.fault_tolerance, raw.adaptability
    ))
}

fn ring_movement() -> Outcome {
    const KEYS: u64 = 100_000;
    let mut notes = Vec::new();
    for n in [4u32, 8, 16] {
        let mut ring = HashRing::with_nodes((0..n).map(NodeId), 128, KeyHasher::new(0));
        let before: Vec<NodeId> = (0..KEYS).map(|k| ring_locate(k, &ring).unwrap()).collect();
        ring_add(&mut ring, NodeId(n)).map_err(|e| e.to_string())?;
        let mut moved = 0u64;
        for k in 0..KEYS {
            let now = ring_locate(k, &ring).unwrap();
            if now != before[k as usize] {
                ensure(now == NodeId(n), format!("key {k} moved to {now:?}, not the new node"))?;
                moved += 1;
            }
        }
        let frac = moved as f64 / KEYS as f64;
        let ideal = 1.0 / (n as f64 + 1.0);
        ensure(
            (frac - ideal).abs() <= 0.2 * ideal,
            format!("n={n}: moved {frac:.4}, ideal {ideal:.4}"),
        )?;
        notes.push(format!("n={n} {frac:.4}/{ideal:.4}"));
    }
    Ok(notes.join(", "))
}

fn modulus_pathology() -> Outcome {
    let h = KeyHasher::new(0);
    let moved = (0..10_000u64)
        .filter(|&k| hash_locate(k, 10, &h) != hash_locate(k, 11, &h))
        .count();
    let frac = moved as f64 / 10_000.0;
    ensure(frac >= 0.8, format!("only {frac:.3} of keys moved"))?;
    Ok(format!("{frac:.3} of keys moved"))
}

fn zipf_fit() -> Outcome {
    const DRAWS: usize = 100_000;
    let mut notes = Vec::new();
    for (i, (keys, s)) in [(3u64, 1.0f64), (100, 1.2), (1000, 0.8)].into_iter().enumerate() {
        let table = ZipfTable::new(keys, s);
        let mut rng = rng_stream(1000 + i as u64, "zipf-fit");
        let mut counts = vec![0u64; keys as usize];
        for _ in 0..DRAWS {
            counts[table.sample(&mut rng) as usize] += 1;
        }
        // Analytic pmf, independent of the sampler's table.
        let norm: f64 = (1..=keys).map(|r| (r as f64).powf(-s)).sum();
        let expected: Vec<f64> = (1..=keys).map(|r| DRAWS as f64 * (r as f64).powf(-s) / norm).collect();
        // Pool the tail so every cell expects at least 5.
        let (mut cells, mut obs_acc, mut exp_acc) = (Vec::new(), 0.0, 0.0);
        for (o, e) in counts.iter().zip(&expected) {
            obs_acc += *o as f64;
            exp_acc += e;
            if exp_acc >= 5.0 {
                cells.push((obs_acc, exp_acc));
                obs_acc = 0.0;
                exp_acc = 0.0;
            }
        }
        if exp_acc > 0.0 {
            let last = cells.last_mut().expect("at least one cell");
            last.0 += obs_acc;
            last.1 += exp_acc;
        }
        let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
        let df = (cells.len() - 1) as f64;
        let p = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
        ensure(p >= 0.01, format!("(n={keys}, s={s}): chi2 {stat:.1} df {df}, p {p:.4}"))?;
        notes.push(format!("({keys},{s}) p={p:.3}"));
    }
    Ok(notes.join(", "))
}

fn poisson_count() -> Outcome {
    let spec = WorkloadSpec {
        base_rate: Some(10.0),
        pattern: Pattern::Uniform,
        ..WorkloadSpec::default()
    };
    let mut counts = Vec::new();
    for seed in 0..10 {
        let mut rng = rng_stream(seed, "workload");
        let n = arrival_times(&spec, SimTime::from_secs(1000), &mut rng).len();
        ensure(
            (n as f64 - 10_000.0).abs() <= 3.0 * 10_000f64.sqrt(),
            format!("seed {seed}: {n} arrivals"),
        )?;
        counts.push(n);
    }
    Ok(format!("counts {counts:?}"))
}

fn replica_placement() -> Outcome {
    let mut checks = 0;
    let mut degraded = 0;
    for name in ["skewed.toml", "periodic.toml"] {
        let mut cfg = scenario(name);
        cfg.strategy = StrategyKind::Adaptive;
        ensure(cfg.replication.rf == 2 && cfg.regions >= 2, format!("{name} is not rf=2 over 2+ regions"))?;
        for seed in 1..=3 {
            let trace = run_scenario(&cfg, seed).map_err(|e| e.to_string())?;
            let a = trace.audit;
            ensure(a.checks > 0, format!("{name} seed {seed}: no audits"))?;
            ensure(
                a.copy_collisions == 0,
                format!("{name} seed {seed}: {} same-node copies", a.copy_collisions),
            )?;
            ensure(
                a.region_collisions == 0,
                format!("{name} seed {seed}: {} same-region copies outside degraded placement", a.region_collisions),
            )?;
            checks += a.checks;
            degraded += trace.warnings.iter().filter(|w| w.kind == "DegradedPlacement").count();
        }
    }
    Ok(format!("{checks} audits clean, {degraded} degraded-placement warnings"))
}

/// Random rf=2 layout of 1000 keys over 4 nodes with damage on one node;
/// every damaged key keeps an intact copy elsewhere.
fn regen_fixture(i: u64) -> Outcome {
    let mut rng = rng_stream(i, "regen-fixture");
    let hasher = KeyHasher::new(i);
    let victim = NodeId(rng.below(4) as u32);
    let q = 0.05 + 0.55 * rng.unit();
    let mut held: BTreeMap<NodeId, BTreeSet<Key>> = BTreeMap::new();
    let mut damaged = Vec::new();
    let mut other_damage: BTreeMap<NodeId, BTreeSet<Key>> = BTreeMap::new();
    for k in 0..1000u64 {
        let a = rng.below(4) as u32;
        let b = (a + 1 + rng.below(3) as u32) % 4;
        let (a, b) = (NodeId(a), NodeId(b));
        held.entry(a).or_default().insert(k);
        held.entry(b).or_default().insert(k);
        if (a == victim || b == victim) && rng.unit() < q {
            damaged.push((k, hasher.hash_key(k)));
        } else if a != victim && b != victim && rng.unit() < 0.1 {
            other_damage.entry(a).or_default().insert(k);
        }
    }
    let sources: BTreeMap<NodeId, BTreeSet<Key>> = held
        .iter()
        .filter(|(n, _)| **n != victim)
        .map(|(n, ks)| {
            let bad = other_damage.get(n).cloned().unwrap_or_default();
            (*n, ks.difference(&bad).copied().collect())
        })
        .collect();
    let plan = regenerate(victim, &damaged, &sources, 1000.0);

    let oracle: BTreeSet<Key> = damaged
        .iter()
        .map(|&(k, _)| k)
        .filter(|k| sources.values().any(|s| s.contains(k)))
        .collect();
    let restored: BTreeSet<Key> = plan.steps.iter().flat_map(|s| s.keys.iter().copied()).collect();
    ensure(oracle.len() == damaged.len(), format!("fixture {i}: oracle misses a key"))?;
    ensure(restored == oracle, format!("fixture {i}: restored {} of {}", restored.len(), oracle.len()))?;
    ensure(plan.unrecoverable.is_empty(), format!("fixture {i}: unrecoverable keys"))?;
    for s in &plan.steps {
        ensure(
            s.keys.iter().all(|k| sources[&s.source].contains(k)),
            format!("fixture {i}: step copies from a source lacking the key"),
        )?;
    }
    Ok(String::new())
}

/// Corruption injected into a running cluster is fully repaired before the
/// run ends.
fn regen_in_run(i: u64) -> Outcome {
    let mut cfg = ScenarioConfig::new(4, 60.0, StrategyKind::Adaptive);
    cfg.regions = 2;
    cfg.workload.key_count = 1000;
    cfg.replication.rf = 2;
    let mut rng = rng_stream(i, "regen-run");
    let victim = NodeId(rng.below(4) as u32);
    let fraction = 0.05 + 0.55 * rng.unit();
    let mut sim = Simulation::empty(&cfg, i).map_err(|e| e.to_string())?;
    sim.schedule(
        SimTime::from_secs(1),
        EventKind::Corruption {
            node: victim,
            fraction,
            pick_seed: i,
        },
    )
    .map_err(|e| e.to_string())?;
    sim.run_until(cfg.duration_time()).map_err(|e| e.to_string())?;
    let left = sim.state().node(victim).damaged().len();
    let trace = sim.trace();
    let hit = trace
        .events
        .iter()
        .find_map(|e| match e.event {
            ClusterEvent::Corruption { damaged, .. } => Some(damaged),
            _ => None,
        })
        .unwrap_or(0);
    ensure(hit > 0, format!("run {i}: corruption damaged nothing"))?;
    ensure(left == 0 && trace.lost_keys == 0, format!("run {i}: {left} of {hit} keys still damaged at end"))?;
    Ok(String::new())
}

fn regeneration() -> Outcome {
    for i in 0..100 {
        regen_fixture(i)?;
        regen_in_run(i)?;
    }
    Ok("100 fixtures match the reachability oracle; 100 in-run repairs complete".into())
}

fn fractal() -> Outcome {
    let mut rng = rng_stream(8, "fractal");
    let uniform: Vec<f64> = (0..20_000).map(|_| rng.unit()).collect();
    let dyadic = dyadic_scales(8);
    let uniform_fit = fractal_dimension(&uniform, &dyadic).map_err(|e| e.to_string())?;
    let d_uniform = uniform_fit.dimension;
    ensure((d_uniform - 1.0).abs() <= 0.05, format!("uniform D = {d_uniform:.4}"))?;

    let single_fit = fractal_dimension(&[0.4375; 500], &dyadic).map_err(|e| e.to_string())?;
    let single = single_fit.dimension;
    ensure(single <= 0.05, format!("singleton D = {single:.4}"))?;

    // Midpoints of the 2^8 intervals left by the level-8 middle-third
    // construction, boxed at its own scales 3^-1 .. 3^-8.
    let mut cantor = vec![0.5f64];
    let mut width = 1.0;
    for _ in 0..8 {
        width /= 3.0;
        cantor = cantor.iter().flat_map(|&x| [x - width, x + width]).collect();
    }
    let triadic: Vec<f64> = (1..=8).map(|j| 3f64.powi(-j)).collect();
    let cantor_fit = fractal_dimension(&cantor, &triadic).map_err(|e| e.to_string())?;
    let d_cantor = cantor_fit.dimension;
    let analytic = 2f64.ln() / 3f64.ln();
    ensure(
        (d_cantor - analytic).abs() <= 0.05,
        format!("Cantor D = {d_cantor:.4}, analytic {analytic:.4}"),
    )?;
    for (name, fit) in [("uniform", &uniform_fit), ("singleton", &single_fit), ("Cantor", &cantor_fit)] {
        ensure(fit.residual < 0.1, format!("{name} fit residual {:.4}", fit.residual))?;
    }
    Ok(format!("uniform {d_uniform:.4}, singleton {single:.4}, Cantor {d_cantor:.4} vs {analytic:.4}"))
}

fn forecasting() -> Outcome {
    let cfg = |alpha, beta| ForecastConfig {
        alpha,
        beta,
        horizon: 1,
        ..ForecastConfig::default()
    };
    let flat = forecast(&LoadHistory::from_values(&[42.0; 8]), &cfg(0.5, 0.3)).map_err(|e| e.to_string())?;
    ensure((flat - 42.0).abs() <= 1e-9, format!("constant history predicted {flat}"))?;
    let ramp: Vec<f64> = (1..=6).map(|i| 5.0 * i as f64).collect();
    let next = forecast(&LoadHistory::from_values(&ramp), &cfg(1.0, 1.0)).map_err(|e| e.to_string())?;
    ensure((next - 35.0).abs() <= 1e-9, format!("ramp predicted {next}, expected 35"))?;
    Ok(format!("constant {flat}, ramp {next}"))
}

fn determinism() -> Outcome {
    let t = Instant::now();
    let cfg = scenario("skewed.toml");
    let a = cmd_run(&cfg, Some(11)).map_err(|e| e.to_string())?.to_json();
    let b = cmd_run(&cfg, Some(11)).map_err(|e| e.to_string())?.to_json();
    ensure(a == b, "two runs with seed 11 differ".into())?;
    for name in ["uniform.toml", "skewed.toml", "periodic.toml", "seasonal.toml"] {
        cmd_compare(&scenario(name), &StrategyKind::ALL, &[1]).map_err(|e| format!("{name}: {e}"))?;
    }
    let elapsed = t.elapsed();
    ensure(
        elapsed < Duration::from_secs(300),
        format!("scenarios took {elapsed:.1?}"),
    )?;
    Ok(format!("identical {}-byte reports; four scenario comparisons in {elapsed:.1?}", a.len()))
}

fn heat_boundaries() -> Outcome {
    let w = WindowConfig::default();
    let cases = [(1800, HeatTier::Hot), (3600, HeatTier::Warm), (172_800, HeatTier::Cold)];
    for (age, want) in cases {
        let got = classify_age(SimTime::from_secs(age), &w);
        ensure(got == want, format!("age {age}s classified {got:?}, expected {want:?}"))?;
    }
    Ok("1800s hot, 3600s warm, 172800s cold".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("adaptive dominates baselines on the skewed scenario", dominance),
        ("consistent ring moves ~1/(n+1) of keys, all to the new node", ring_movement),
        ("hash modulus 10->11 moves at least 80% of keys", modulus_pathology),
        ("Zipf sampler fits its pmf (chi-square, 0.01)", zipf_fit),
        ("Poisson arrival counts within 3 sigma", poisson_count),
        ("no shared node or region between copies", replica_placement),
        ("regeneration restores every reachable key", regeneration),
        ("box-counting dimension of reference sets", fractal),
        ("Holt forecast is exact on constant and ramp", forecasting),
        ("fixed-seed runs are byte-identical and fast", determinism),
        ("heat tier boundaries", heat_boundaries),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
