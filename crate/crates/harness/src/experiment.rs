//! Experiment configuration and the solve / sweep drivers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use pfss_core::io::{generate, load_any, DatasetSpec, TimeDistribution};
use pfss_core::schedule::gap_percent;
use pfss_core::Instance;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::methods::{Method, MethodParams, Solver};
use crate::report::{Report, ReportMeta, ReportRow, TrialDetail};
use crate::HarnessError;

/// Where instances come from: a file (dataset, Taillard or VRF text) or a
/// generator specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    File { path: PathBuf },
    Generated(DatasetSpec),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Vec<Instance>, HarnessError> {
        match self {
            Self::File { path } => load_any(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display()))),
            Self::Generated(spec) => Ok(generate(spec)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: Option<DatasetSource>,
    pub methods: Vec<String>,
    /// One trial per seed.
    pub seeds: Vec<u64>,
    /// Method whose makespans define a zero gap.
    pub expert: String,
    /// Baseline for signed-rank tests; defaults to the expert.
    pub reference: Option<String>,
    pub params: MethodParams,
    pub output: Option<PathBuf>,
    /// Average trials into one row per method (otherwise one row per seed).
    pub average_trials: bool,
    /// Solve instances concurrently; timings then measure the whole batch.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            methods: vec!["neh".into(), "rs".into(), "ils".into(), "ig".into()],
            seeds: vec![0, 1, 2],
            expert: "neh".into(),
            reference: None,
            params: MethodParams::default(),
            output: None,
            average_trials: true,
            parallel: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::Usage("at least one method is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Usage("at least one seed is required".into()));
        }
        for m in self.methods.iter().chain([&self.expert]).chain(self.reference.as_ref()) {
            m.parse::<Method>()?;
        }
        Ok(())
    }

    /// Short content hash identifying the configuration in reports.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn meta(&self, command: &str) -> ReportMeta {
        ReportMeta { command: command.into(), expert: self.expert.clone(), config_hash: self.hash(), git_revision: git_revision() }
    }
}

fn git_revision() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "--short", "HEAD"]).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

/// Seed of instance `index` within the trial seeded by `trial`.
pub fn instance_seed(trial: u64, index: usize) -> u64 {
    trial.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64
}

/// Makespans of `solver` on every instance plus the wall-clock time spent.
fn solve_all(solver: &Solver, instances: &[Instance], trial: u64, parallel: bool) -> Result<(Vec<f64>, f64), HarnessError> {
    let start = Instant::now();
    let spans = if parallel {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        let chunk = instances.len().div_ceil(workers).max(1);
        std::thread::scope(|scope| {
            let handles: Vec<_> = instances
                .chunks(chunk)
                .enumerate()
                .map(|(c, part)| {
                    scope.spawn(move || {
                        part.iter()
                            .enumerate()
                            .map(|(k, inst)| solver.solve(inst, instance_seed(trial, c * chunk + k)).map(|s| s.1))
                            .collect::<Result<Vec<f64>, HarnessError>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect::<Result<Vec<_>, _>>()
        })?
        .concat()
    } else {
        instances.iter().enumerate().map(|(i, inst)| solver.solve(inst, instance_seed(trial, i)).map(|s| s.1)).collect::<Result<_, _>>()?
    };
    Ok((spans, start.elapsed().as_secs_f64()))
}

fn common_size(instances: &[Instance]) -> (usize, usize) {
    let first = instances.first().map_or((0, 0), |i| (i.jobs(), i.machines()));
    if instances.iter().all(|i| (i.jobs(), i.machines()) == first) {
        first
    } else {
        (0, first.1)
    }
}

/// Rows for every method of `cfg` on `instances`, labelled with `group`.
fn solve_rows(instances: &[Instance], cfg: &ExperimentConfig, group: &str) -> Result<Vec<ReportRow>, HarnessError> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(HarnessError::Data("the dataset has no instances".into()));
    }
    let expert_method: Method = cfg.expert.parse()?;
    let expert = Solver::new(&expert_method, &cfg.params)?;
    let (expert_spans, _) = solve_all(&expert, instances, cfg.seeds[0], cfg.parallel)?;
    let (n, m) = common_size(instances);
    let mut rows = Vec::new();
    for name in &cfg.methods {
        let method: Method = name.parse()?;
        let solver = Solver::new(&method, &cfg.params)?;
        let mut trials = Vec::with_capacity(cfg.seeds.len());
        for &seed in &cfg.seeds {
            log::info!("{group} {method} seed {seed}");
            let (spans, time_s) = solve_all(&solver, instances, seed, cfg.parallel)?;
            let gaps = spans.iter().zip(&expert_spans).map(|(&s, &e)| gap_percent(s, e)).collect::<Result<Vec<_>, _>>()?;
            let count = spans.len() as f64;
            trials.push(TrialDetail {
                seed,
                makespan: spans.iter().sum::<f64>() / count,
                gap_pct: gaps.iter().sum::<f64>() / count,
                time_s,
                makespans: spans,
            });
        }
        let label = method.to_string();
        if cfg.average_trials {
            rows.push(ReportRow::from_trials(&label, n, m, group, trials));
        } else {
            for t in trials {
                let g = if group.is_empty() { format!("seed={}", t.seed) } else { format!("{group};seed={}", t.seed) };
                rows.push(ReportRow::from_trials(&label, n, m, &g, vec![t]));
            }
        }
    }
    Ok(rows)
}

fn finish(mut report: Report, cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let reference: Method = cfg.reference.as_deref().unwrap_or(&cfg.expert).parse()?;
    if cfg.average_trials {
        report.add_significance(&reference.to_string());
    }
    Ok(report)
}

/// Runs every method and seed on `instances` and scores against the expert.
pub fn run_solve(instances: &[Instance], cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let rows = solve_rows(instances, cfg, "")?;
    finish(Report { meta: cfg.meta("solve"), rows, significance: Vec::new() }, cfg)
}

/// Size and seed of the per-point test sets of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub count: usize,
    pub jobs: usize,
    pub machines: usize,
    pub seed: u64,
}

fn fmt_value(v: f64) -> String {
    let s = format!("{v}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

/// Compares two methods on Normal(6, sigma) test sets, one group per sigma.
pub fn sweep_sigma(
    sigmas: &[f64],
    method_a: &str,
    method_b: &str,
    sweep: &SweepSpec,
    cfg: &ExperimentConfig,
) -> Result<Report, HarnessError> {
    if sigmas.is_empty() {
        return Err(HarnessError::Usage("the sigma list is empty".into()));
    }
    let point_cfg = ExperimentConfig { methods: vec![method_a.into(), method_b.into()], ..cfg.clone() };
    let mut rows = Vec::new();
    for &sigma in sigmas {
        let spec = DatasetSpec {
            count: sweep.count,
            jobs: sweep.jobs,
            machines: sweep.machines,
            distribution: TimeDistribution::normal_sweep(sigma),
            seed: sweep.seed,
        };
        let instances = generate(&spec)?;
        rows.extend(solve_rows(&instances, &point_cfg, &format!("sigma={}", fmt_value(sigma)))?);
    }
    finish(Report { meta: point_cfg.meta("sweep-sigma"), rows, significance: Vec::new() }, &point_cfg)
}

/// Runs `cfg.methods` on Gamma test sets for each machine count. A `{m}` in
/// a policy path is replaced by the machine count.
pub fn sweep_machines(machines: &[usize], sweep: &SweepSpec, cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    if machines.is_empty() {
        return Err(HarnessError::Usage("the machine list is empty".into()));
    }
    let mut rows = Vec::new();
    for &m in machines {
        let point_cfg = ExperimentConfig {
            methods: cfg.methods.iter().map(|s| s.replace("{m}", &m.to_string())).collect(),
            ..cfg.clone()
        };
        let spec = DatasetSpec { count: sweep.count, jobs: sweep.jobs, machines: m, distribution: TimeDistribution::GAMMA_DEFAULT, seed: sweep.seed };
        rows.extend(solve_rows(&generate(&spec)?, &point_cfg, &format!("m={m}"))?);
    }
    finish(Report { meta: cfg.meta("sweep-machines"), rows, significance: Vec::new() }, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(methods: &[&str]) -> ExperimentConfig {
        ExperimentConfig {
            methods: methods.iter().map(|s| s.to_string()).collect(),
            params: MethodParams { rs_iterations: 50, ils_iterations: 5, ig_iterations: 5, ..Default::default() },
            ..Default::default()
        }
    }

    fn gamma(count: usize, jobs: usize, machines: usize) -> Vec<Instance> {
        generate(&DatasetSpec { count, jobs, machines, distribution: TimeDistribution::GAMMA_DEFAULT, seed: 4 }).unwrap()
    }

    #[test]
    fn expert_alone_has_zero_gap() {
        let r = run_solve(&gamma(10, 8, 3), &small_cfg(&["neh"])).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].gap_pct, 0.0);
        assert!(r.rows[0].trials.iter().all(|t| t.gap_pct == 0.0));
    }

    #[test]
    fn gaps_match_recomputation_and_runs_repeat() {
        let insts = gamma(8, 7, 3);
        let cfg = small_cfg(&["neh", "rs", "ig"]);
        let a = run_solve(&insts, &cfg).unwrap();
        let b = run_solve(&insts, &cfg).unwrap();
        let expert = &a.row("neh", "").unwrap().trials[0].makespans;
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!((ra.makespan, ra.gap_pct), (rb.makespan, rb.gap_pct));
            for t in &ra.trials {
                let gaps: Vec<f64> = t.makespans.iter().zip(expert).map(|(s, e)| gap_percent(*s, *e).unwrap()).collect();
                assert_eq!(t.gap_pct, gaps.iter().sum::<f64>() / gaps.len() as f64);
            }
        }
        assert_eq!(a.significance.len(), 2);
    }

    #[test]
    fn per_seed_rows_and_parallel_agree() {
        let insts = gamma(6, 6, 2);
        let seq = run_solve(&insts, &ExperimentConfig { average_trials: false, ..small_cfg(&["rs"]) }).unwrap();
        assert_eq!(seq.rows.len(), 3);
        assert_eq!(seq.rows[1].group, "seed=1");
        let par = run_solve(&insts, &ExperimentConfig { average_trials: false, parallel: true, ..small_cfg(&["rs"]) }).unwrap();
        for (a, b) in seq.rows.iter().zip(&par.rows) {
            assert_eq!(a.trials[0].makespans, b.trials[0].makespans);
        }
    }

    #[test]
    fn sigma_sweep_groups_and_zero_point() {
        let sweep = SweepSpec { count: 6, jobs: 6, machines: 3, seed: 1 };
        let r = sweep_sigma(&[0.0, 2.0, 4.0, 6.0], "neh", "rs", &sweep, &small_cfg(&[])).unwrap();
        let groups: std::collections::BTreeSet<_> = r.rows.iter().map(|r| r.group.clone()).collect();
        assert_eq!(groups.len(), 4);
        assert_eq!(r.row("rs", "sigma=0").unwrap().gap_pct, 0.0);
        assert_eq!(r.row("neh", "sigma=0").unwrap().gap_pct, 0.0);
        let same = sweep_sigma(&[0.0, 3.0], "neh", "neh", &sweep, &small_cfg(&[])).unwrap();
        assert!(same.rows.iter().all(|r| r.gap_pct == 0.0));
    }

    #[test]
    fn machine_sweep_groups() {
        let sweep = SweepSpec { count: 4, jobs: 6, machines: 0, seed: 2 };
        let r = sweep_machines(&[2, 4], &sweep, &small_cfg(&["neh", "rs"])).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.row("rs", "m=4").unwrap().m, 4);
    }

    #[test]
    fn config_parsing_and_validation() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            methods = ["neh", "rs"]
            seeds = [7]
            [dataset]
            count = 3
            jobs = 5
            machines = 2
            seed = 9
            distribution = { kind = "gamma", shape = 1.0, scale = 2.0 }
            [params]
            rs_iterations = 25
            "#,
        )
        .unwrap();
        assert_eq!(cfg.params.rs_iterations, 25);
        assert_eq!(cfg.params.ils_strength, 2);
        assert!(matches!(cfg.dataset, Some(DatasetSource::Generated(_))));
        assert_eq!(cfg.dataset.as_ref().unwrap().load().unwrap().len(), 3);
        let file = ExperimentConfig::from_toml("[dataset]\npath = \"x.pfss\"").unwrap();
        assert_eq!(file.dataset, Some(DatasetSource::File { path: "x.pfss".into() }));
        assert!(ExperimentConfig::from_toml("methods = []").is_err());
        assert!(ExperimentConfig::from_toml("methods = [\"tabu\"]").is_err());
        assert!(ExperimentConfig::from_toml("seeds = []").is_err());
        assert_ne!(cfg.hash(), file.hash());
    }
}
