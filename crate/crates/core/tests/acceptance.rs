//! Acceptance gate. Each test prints one `PASS`/`FAIL` line and fails when
//! its criterion is not met.

mod common;

use std::sync::OnceLock;

use common::{check_forced_recovery, waxman_instance};
use rpsel::bench::{build_instance, run_compare, run_simulate, search_config, CompareReport, ExperimentConfig};
use rpsel::graph::Graph;
use rpsel::metrics::{auto_bounds, MulticastGroup, RpInstance};
use rpsel::selectors::{neighborhood, select, select_ddvca, select_vns, Algorithm, VnsConfig};
use rpsel::session::{generate_trace, SessionSetup, TraceParams};
use rpsel::topology::{waxman_generate, WaxmanParams};

fn report(name: &str, ok: bool, detail: &str) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn compare_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn compare_report() -> &'static CompareReport {
    static REPORT: OnceLock<CompareReport> = OnceLock::new();
    REPORT.get_or_init(|| run_compare(&compare_config(), 1).unwrap())
}

/// Exhaustive minimum fitness over all nodes.
fn exhaustive_min(inst: &RpInstance<'_>) -> f64 {
    (0..inst.graph().node_count())
        .filter_map(|v| inst.evaluate(v).ok())
        .map(|e| e.fitness)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn vns_exhaustive_optimality() {
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 0..50 {
        let (g, grp) = waxman_instance(12, seed, 0.3, 1);
        let b = auto_bounds(&g, &grp).unwrap();
        let inst = RpInstance::new(&g, &grp, b);
        let n = g.node_count();
        let cfg = VnsConfig {
            max_total_iters: 10 * n,
            max_stable_iters: 10 * n,
            rng_seed: seed,
            ..VnsConfig::for_size(n)
        };
        let r = select_vns(&inst, &cfg).unwrap();
        if r.eval.fitness == exhaustive_min(&inst) {
            hits += 1;
        } else {
            misses.push(seed);
        }
    }
    report("vns_exhaustive_optimality", hits == 50, &format!("{hits}/50 optimal, misses {misses:?}"));
}

/// Variation of RP `rp` from independent pairwise shortest-path queries.
fn pairwise_variation(g: &Graph, grp: &MulticastGroup, rp: usize) -> Option<(f64, f64)> {
    let mut pairs = Vec::new();
    for &s in grp.sources() {
        let up = g.shortest_delay_path(s, rp)?.total_delay;
        for &d in grp.receivers() {
            pairs.push(up + g.shortest_delay_path(rp, d)?.total_delay);
        }
    }
    let max = pairs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = pairs.iter().copied().fold(f64::INFINITY, f64::min);
    Some((max, max - min))
}

#[test]
fn ddvca_exact_variation() {
    let mut exact = 0;
    let mut misses = Vec::new();
    for seed in 0..100 {
        let (g, grp) = waxman_instance(30, 1000 + seed, 0.3, 1);
        let b = auto_bounds(&g, &grp).unwrap();
        let inst = RpInstance::new(&g, &grp, b);
        let want = (0..g.node_count())
            .filter_map(|v| pairwise_variation(&g, &grp, v))
            .filter(|&(max, _)| max <= b.delay_bound)
            .map(|(_, var)| var)
            .fold(f64::INFINITY, f64::min);
        let got = select_ddvca(&inst).unwrap().eval.delay_variation;
        if got == want {
            exact += 1;
        } else {
            misses.push(seed);
        }
    }
    report("ddvca_exact_variation", exact == 100, &format!("{exact}/100 exact, misses {misses:?}"));
}

#[test]
fn qualitative_ordering() {
    let rep = compare_report();
    let summary = rep.summary();
    let mut violations = Vec::new();
    let mut strictly_better = 0;
    let sizes = &rep.config.network_sizes;
    for &size in sizes {
        let cell = |a: Algorithm| summary.iter().find(|s| s.size == size && s.algo == a).unwrap();
        let vns = cell(Algorithm::Vns);
        for other in [Algorithm::Tabu, Algorithm::Ddvca, Algorithm::AkcVariant, Algorithm::Random] {
            let o = cell(other);
            for (metric, v, x) in [
                ("fitness", vns.fitness.mean, o.fitness.mean),
                ("cost", vns.cost.mean, o.cost.mean),
                ("max_delay", vns.max_delay.mean, o.max_delay.mean),
                ("delay_variation", vns.delay_variation.mean, o.delay_variation.mean),
            ] {
                if v > x {
                    violations.push(format!("n={size} {metric} vns {v:.4} > {other} {x:.4}"));
                }
            }
        }
        if vns.fitness.mean < cell(Algorithm::Random).fitness.mean {
            strictly_better += 1;
        }
    }
    let ratio = strictly_better as f64 / sizes.len() as f64;
    let ok = violations.is_empty() && ratio >= 0.9;
    report(
        "qualitative_ordering",
        ok,
        &format!(
            "vns strictly better than random at {strictly_better}/{} sizes; {} violations {violations:?}",
            sizes.len(),
            violations.len()
        ),
    );
}

#[test]
fn waxman_mean_degree() {
    let mut total = 0.0;
    for seed in 0..100 {
        let p = WaxmanParams {
            alpha: 0.2,
            beta: 0.2,
            ..WaxmanParams::new(100, seed)
        };
        let g = waxman_generate(&p).unwrap().graph;
        total += 2.0 * g.link_count() as f64 / g.node_count() as f64;
    }
    let mean = total / 100.0;
    report("waxman_mean_degree", (3.0..=4.0).contains(&mean), &format!("grand mean degree {mean:.4}"));
}

#[test]
fn invariant_suites() {
    let rep = compare_report();
    let mut failures = Vec::new();

    let mut identity_checked = 0;
    for row in &rep.rows {
        if let Ok((_, e)) = &row.outcome {
            identity_checked += 1;
            if e.delay_variation != e.max_delay - e.min_delay {
                failures.push(format!("identity {} {}", row.instance, row.algo));
            }
        }
    }

    let (mut traces, mut certificates) = (0, 0);
    let cfg = &rep.config;
    for &size in &cfg.network_sizes {
        for index in 0..cfg.instances_per_size {
            let inst = build_instance(cfg, size, index).unwrap();
            let Ok(b) = inst.bounds.clone() else { continue };
            let ri = RpInstance::new(&inst.graph, &inst.group, b);
            let sc = search_config(&inst);
            for &algo in &cfg.algorithms {
                let Ok(r) = select(algo, &ri, &sc) else { continue };
                traces += 1;
                if r.trace.windows(2).any(|w| w[1].fitness > w[0].fitness) {
                    failures.push(format!("trace {} {algo}", inst.id));
                }
                if algo == Algorithm::Vns {
                    certificates += 1;
                    if neighborhood(&inst.graph, r.rp, 1).into_iter().any(|u| ri.rank(u) < ri.rank(r.rp)) {
                        failures.push(format!("local optimum {}", inst.id));
                    }
                }
            }
        }
    }

    let mut forced = 0;
    let params = TraceParams {
        link_fail_rate: 0.2,
        node_fail_rate: 0.1,
        ..TraceParams::default()
    };
    for seed in 0..100 {
        let inst = build_instance(cfg, 40, seed).unwrap();
        let Ok(b) = inst.bounds.clone() else { continue };
        let trace = generate_trace(&inst.graph, &inst.group, &params, seed as u64);
        let setup = SessionSetup::new(Algorithm::Vns, search_config(&inst), b);
        match check_forced_recovery(&inst.graph, &inst.group, &trace, &setup) {
            Ok(k) => forced += k,
            Err(e) => failures.push(format!("recovery {}: {e}", inst.id)),
        }
    }

    report(
        "invariant_suites",
        failures.is_empty(),
        &format!(
            "{identity_checked} evaluations, {traces} traces, {certificates} certificates, 100 sessions with {forced} forced recoveries; failures {failures:?}"
        ),
    );
}

#[test]
fn mobility_sweep() {
    let levels = [0.5, 1.0, 2.0, 4.0];
    let cfg = ExperimentConfig {
        network_sizes: vec![50],
        instances_per_size: 20,
        session: Some(TraceParams::default()),
        mobility_sweep: levels.to_vec(),
        ..ExperimentConfig::default()
    };
    let summary = run_simulate(&cfg, 1).unwrap().summary();
    let mean = |algo: Algorithm, m: f64| {
        summary
            .iter()
            .find(|s| s.algo == algo && s.mobility == m)
            .unwrap()
            .disruption
            .mean
    };
    let mut violations = Vec::new();
    for &algo in &cfg.algorithms {
        let series: Vec<f64> = levels.iter().map(|&m| mean(algo, m)).collect();
        if series.windows(2).any(|w| w[1] < w[0]) {
            violations.push(format!("{algo} not monotone {series:?}"));
        }
    }
    for &m in &levels {
        let (v, r) = (mean(Algorithm::Vns, m), mean(Algorithm::Random, m));
        if v > r {
            violations.push(format!("mobility {m}: vns {v} > random {r}"));
        }
    }
    let vns: Vec<f64> = levels.iter().map(|&m| mean(Algorithm::Vns, m)).collect();
    let random: Vec<f64> = levels.iter().map(|&m| mean(Algorithm::Random, m)).collect();
    report(
        "mobility_sweep",
        violations.is_empty(),
        &format!("vns {vns:?} random {random:?}; violations {violations:?}"),
    );
}

#[test]
fn deterministic_compare() {
    let first = compare_report().to_csv(None);
    let again = run_compare(&compare_config(), 1).unwrap().to_csv(None);
    let parallel = run_compare(&compare_config(), 4).unwrap().to_csv(None);
    let ok = first == again && first == parallel;
    report(
        "deterministic_compare",
        ok,
        &format!("{} bytes, rerun identical {}, 4 jobs identical {}", first.len(), first == again, first == parallel),
    );
}
