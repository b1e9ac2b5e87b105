//! Seeded benchmark sweeps: one-shot selector comparison and session
//! simulation over generated Waxman instances, with CSV/JSONL output.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, NodeId};
use crate::metrics::{auto_bounds, MulticastGroup, QosBounds, RpInstance, TreeEvaluation};
use crate::selectors::{select, Algorithm, VnsConfig};
use crate::session::{generate_trace, run_session, RecoveryConfig, SessionMetrics, SessionSetup, TraceParams};
use crate::topology::{sample_group, waxman_generate, WaxmanParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundsPolicy {
    /// 1.5 times the best achievable maximum delay and delay variation.
    #[serde(rename = "auto_1p5x")]
    Auto1p5x,
    #[serde(rename = "fixed")]
    Fixed { alpha: f64, beta: f64 },
    #[serde(rename = "unbounded")]
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network_sizes: Vec<usize>,
    pub instances_per_size: usize,
    /// `n` and `seed` are replaced per instance.
    pub waxman: WaxmanParams,
    pub group_fraction: f64,
    pub n_sources: usize,
    pub bounds_policy: BoundsPolicy,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub session: Option<TraceParams>,
    pub recovery: RecoveryConfig,
    /// Values of `mobility_speed_proxy` swept by `simulate`.
    pub mobility_sweep: Vec<f64>,
    pub sessions_per_instance: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network_sizes: vec![20, 40, 60, 80, 100],
            instances_per_size: 30,
            waxman: WaxmanParams::new(0, 0),
            group_fraction: 0.1,
            n_sources: 1,
            bounds_policy: BoundsPolicy::Auto1p5x,
            algorithms: Algorithm::ALL.to_vec(),
            seed: 1,
            session: None,
            recovery: RecoveryConfig::default(),
            mobility_sweep: vec![1.0],
            sessions_per_instance: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.network_sizes.is_empty() || self.network_sizes.iter().any(|&n| n < 2) {
            return Err("network_sizes must be non-empty and each at least 2".into());
        }
        if self.instances_per_size == 0 {
            return Err("instances_per_size must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return Err("algorithms must be non-empty".into());
        }
        if !(self.group_fraction > 0.0 && self.group_fraction <= 1.0) {
            return Err(format!("group_fraction {} not in (0, 1]", self.group_fraction));
        }
        if self.n_sources == 0 {
            return Err("n_sources must be at least 1".into());
        }
        if let BoundsPolicy::Fixed { alpha, beta } = self.bounds_policy {
            QosBounds::new(alpha, beta)?;
        }
        if self.mobility_sweep.iter().any(|m| m.is_nan() || *m < 0.0) {
            return Err("mobility_sweep values must be non-negative".into());
        }
        let mut w = self.waxman.clone();
        w.n = 2;
        w.validate().map_err(|e| e.to_string())
    }

    /// The config as `#`-prefixed JSON.
    pub fn header(&self) -> String {
        format!(
            "# config: {}\n",
            serde_json::to_string(self).expect("config serializes")
        )
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One generated benchmark instance: the largest connected component of a
/// Waxman graph with a sampled group.
#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub id: String,
    pub size: usize,
    pub index: usize,
    pub seed: u64,
    pub graph: Graph,
    pub group: MulticastGroup,
    pub bounds: Result<QosBounds, String>,
}

pub fn build_instance(cfg: &ExperimentConfig, size: usize, index: usize) -> Result<BenchInstance, String> {
    let seed = mix_seed(mix_seed(cfg.seed, size as u64), index as u64);
    let mut wp = cfg.waxman.clone();
    wp.n = size;
    wp.seed = seed;
    let topo = waxman_generate(&wp).map_err(|e| e.to_string())?;
    let (lcc, _) = topo.largest_component();
    let group = sample_group(&lcc.graph, cfg.group_fraction, cfg.n_sources.min(lcc.graph.node_count()), mix_seed(seed, 1))
        .map_err(|e| e.to_string())?;
    let bounds = match cfg.bounds_policy {
        BoundsPolicy::Auto1p5x => auto_bounds(&lcc.graph, &group).map_err(|e| e.to_string()),
        BoundsPolicy::Fixed { alpha, beta } => QosBounds::new(alpha, beta),
        BoundsPolicy::Unbounded => Ok(QosBounds::unbounded()),
    };
    Ok(BenchInstance {
        id: format!("n{size}-i{index}"),
        size,
        index,
        seed,
        graph: lcc.graph,
        group,
        bounds,
    })
}

/// Selector configuration for a cell: default budget for the instance size,
/// seeded per instance.
pub fn search_config(inst: &BenchInstance) -> VnsConfig {
    VnsConfig {
        rng_seed: mix_seed(inst.seed, 2),
        ..VnsConfig::for_size(inst.graph.node_count())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub instance: String,
    pub size: usize,
    pub algo: Algorithm,
    pub outcome: Result<(NodeId, TreeEvaluation), String>,
}

impl CompareRow {
    pub fn csv(&self) -> String {
        match &self.outcome {
            Ok((rp, e)) => e.csv_row(&self.instance, self.algo.name(), *rp),
            Err(_) => format!("{},{},error,,,,,,", self.instance, self.algo.name()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub config: ExperimentConfig,
    /// Per-instance bounds (or the reason none exist), in instance order.
    pub bounds: Vec<(String, Result<QosBounds, String>)>,
    /// Ordered by size, instance index, then algorithm as configured.
    pub rows: Vec<CompareRow>,
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

fn instances(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    cfg.network_sizes
        .iter()
        .flat_map(|&s| (0..cfg.instances_per_size).map(move |i| (s, i)))
        .collect()
}

fn compare_instance(cfg: &ExperimentConfig, size: usize, index: usize) -> (String, Result<QosBounds, String>, Vec<CompareRow>) {
    let row = |id: &str, algo, outcome| CompareRow {
        instance: id.to_string(),
        size,
        algo,
        outcome,
    };
    let inst = match build_instance(cfg, size, index) {
        Ok(i) => i,
        Err(e) => {
            let id = format!("n{size}-i{index}");
            let rows = cfg.algorithms.iter().map(|&a| row(&id, a, Err(e.clone()))).collect();
            return (id, Err(e), rows);
        }
    };
    let rows = cfg
        .algorithms
        .iter()
        .map(|&algo| {
            let outcome = inst.bounds.clone().and_then(|b| {
                let problem = RpInstance::new(&inst.graph, &inst.group, b);
                select(algo, &problem, &search_config(&inst))
                    .map(|r| (r.rp, r.eval))
                    .map_err(|e| e.to_string())
            });
            row(&inst.id, algo, outcome)
        })
        .collect();
    (inst.id, inst.bounds, rows)
}

/// Runs every (size, instance, algorithm) cell on `jobs` worker threads.
pub fn run_compare(cfg: &ExperimentConfig, jobs: usize) -> Result<CompareReport, String> {
    cfg.validate()?;
    let results: Vec<_> = pool(jobs).install(|| {
        instances(cfg)
            .into_par_iter()
            .map(|(s, i)| compare_instance(cfg, s, i))
            .collect()
    });
    let mut report = CompareReport {
        config: cfg.clone(),
        bounds: Vec::new(),
        rows: Vec::new(),
    };
    for (id, b, rows) in results {
        report.bounds.push((id, b));
        report.rows.extend(rows);
    }
    Ok(report)
}

fn bounds_text(b: &Result<QosBounds, String>) -> String {
    match b {
        Ok(b) => format!("delay_bound={} variation_bound={}", b.delay_bound, b.variation_bound),
        Err(e) => format!("error: {e}"),
    }
}

impl CompareReport {
    pub fn error_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Per-row CSV. `stamp`, when given, becomes a leading `# generated:` line.
    pub fn to_csv(&self, stamp: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(t) = stamp {
            writeln!(s, "# generated: {t}").unwrap();
        }
        s.push_str(&self.config.header());
        for (id, b) in &self.bounds {
            writeln!(s, "# bounds {id}: {}", bounds_text(b)).unwrap();
        }
        writeln!(s, "{}", TreeEvaluation::csv_header()).unwrap();
        for r in &self.rows {
            writeln!(s, "{}", r.csv()).unwrap();
            if let Err(e) = &r.outcome {
                writeln!(s, "# error {} {}: {e}", r.instance, r.algo).unwrap();
            }
        }
        s
    }

    /// Mean and sample standard deviation per size and algorithm.
    pub fn summary(&self) -> Vec<CompareSummary> {
        let mut out = Vec::new();
        for &size in &self.config.network_sizes {
            for &algo in &self.config.algorithms {
                let evals: Vec<&TreeEvaluation> = self
                    .rows
                    .iter()
                    .filter(|r| r.size == size && r.algo == algo)
                    .filter_map(|r| r.outcome.as_ref().ok().map(|(_, e)| e))
                    .collect();
                let stat = |f: fn(&TreeEvaluation) -> f64| Stat::of(evals.iter().map(|e| f(e)));
                out.push(CompareSummary {
                    size,
                    algo,
                    count: evals.len(),
                    cost: stat(|e| e.cost),
                    max_delay: stat(|e| e.max_delay),
                    delay_variation: stat(|e| e.delay_variation),
                    fitness: stat(|e| e.fitness),
                    feasible_rate: Stat::of(evals.iter().map(|e| f64::from(u8::from(e.feasible)))).mean,
                });
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut s = self.config.header();
        writeln!(s, "{}", CompareSummary::CSV_HEADER).unwrap();
        for row in self.summary() {
            writeln!(s, "{}", row.csv()).unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; NaN with fewer than two values.
    pub sd: f64,
}

impl Stat {
    pub fn of(xs: impl Iterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() < 2 {
            f64::NAN
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    pub size: usize,
    pub algo: Algorithm,
    pub count: usize,
    pub cost: Stat,
    pub max_delay: Stat,
    pub delay_variation: Stat,
    pub fitness: Stat,
    pub feasible_rate: f64,
}

impl CompareSummary {
    pub const CSV_HEADER: &'static str = "size,algo,count,mean_cost,sd_cost,mean_max_delay,sd_max_delay,mean_delay_variation,sd_delay_variation,mean_fitness,sd_fitness,feasible_rate";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.size,
            self.algo,
            self.count,
            self.cost.mean,
            self.cost.sd,
            self.max_delay.mean,
            self.max_delay.sd,
            self.delay_variation.mean,
            self.delay_variation.sd,
            self.fitness.mean,
            self.fitness.sd,
            self.feasible_rate
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub instance: String,
    pub size: usize,
    pub algo: Algorithm,
    pub mobility: f64,
    pub session: usize,
    pub outcome: Result<SessionMetrics, String>,
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub config: ExperimentConfig,
    /// Ordered by size, instance, mobility, session, then algorithm.
    pub records: Vec<SessionRecord>,
}

fn simulate_instance(cfg: &ExperimentConfig, params: &TraceParams, size: usize, index: usize) -> Vec<SessionRecord> {
    let mut out = Vec::new();
    let inst = build_instance(cfg, size, index);
    for &mobility in &cfg.mobility_sweep {
        for session in 0..cfg.sessions_per_instance {
            for &algo in &cfg.algorithms {
                let outcome = inst.as_ref().map_err(Clone::clone).and_then(|inst| {
                    let bounds = inst.bounds.clone()?;
                    let p = TraceParams {
                        mobility_speed_proxy: mobility,
                        ..*params
                    };
                    // The trace depends on the session index only, so every
                    // algorithm and mobility level replays the same arrivals.
                    let trace = generate_trace(&inst.graph, &inst.group, &p, mix_seed(inst.seed, 100 + session as u64));
                    let setup = SessionSetup {
                        policy: cfg.recovery,
                        ..SessionSetup::new(algo, search_config(inst), bounds)
                    };
                    run_session(&inst.graph, &inst.group, &trace, &setup).map_err(|e| e.to_string())
                });
                out.push(SessionRecord {
                    instance: format!("n{size}-i{index}"),
                    size,
                    algo,
                    mobility,
                    session,
                    outcome,
                });
            }
        }
    }
    out
}

/// Runs one session per (instance, mobility, session, algorithm).
pub fn run_simulate(cfg: &ExperimentConfig, jobs: usize) -> Result<SimulateReport, String> {
    cfg.validate()?;
    let params = cfg.session.ok_or("simulate needs session parameters")?;
    let records = pool(jobs).install(|| {
        instances(cfg)
            .into_par_iter()
            .flat_map_iter(|(s, i)| simulate_instance(cfg, &params, s, i))
            .collect()
    });
    Ok(SimulateReport {
        config: cfg.clone(),
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub size: usize,
    pub mobility: f64,
    pub algo: Algorithm,
    pub count: usize,
    pub disruption: Stat,
    pub handover_latency: Stat,
    pub reselections: Stat,
    pub mean_fitness: Stat,
}

impl SimulateReport {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn summary(&self) -> Vec<SimulateSummary> {
        let mut out = Vec::new();
        for &size in &self.config.network_sizes {
            for &mobility in &self.config.mobility_sweep {
                for &algo in &self.config.algorithms {
                    let ms: Vec<&SessionMetrics> = self
                        .records
                        .iter()
                        .filter(|r| r.size == size && r.mobility == mobility && r.algo == algo)
                        .filter_map(|r| r.outcome.as_ref().ok())
                        .collect();
                    out.push(SimulateSummary {
                        size,
                        mobility,
                        algo,
                        count: ms.len(),
                        disruption: Stat::of(ms.iter().map(|m| m.disruption_units)),
                        handover_latency: Stat::of(
                            ms.iter().flat_map(|m| m.handover_latency_proxy.iter().map(|&h| h as f64)),
                        ),
                        reselections: Stat::of(ms.iter().map(|m| m.reselections as f64)),
                        mean_fitness: Stat::of(ms.iter().map(|m| m.mean_fitness())),
                    });
                }
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut s = self.config.header();
        s.push_str("size,mobility,algo,count,mean_disruption,sd_disruption,mean_handover_hops,sd_handover_hops,mean_reselections,sd_reselections,mean_fitness,sd_fitness\n");
        for r in self.summary() {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.size,
                r.mobility,
                r.algo,
                r.count,
                r.disruption.mean,
                r.disruption.sd,
                r.handover_latency.mean,
                r.handover_latency.sd,
                r.reselections.mean,
                r.reselections.sd,
                r.mean_fitness.mean,
                r.mean_fitness.sd
            )
            .unwrap();
        }
        s
    }
}
