//! Desk-scale behavior cloning run: NEH traces on Gamma instances, then the
//! validation gap per epoch.
//!
//! `cargo run --release -p pfss-policy --example desk_train -- [traces] [epochs] [jobs]`

use pfss_core::heuristics::neh;
use pfss_core::io::{generate, DatasetSpec, TimeDistribution};
use pfss_core::mdp::TraceSet;
use pfss_policy::{train, PolicyConfig, TrainConfig, Validation};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let count = args.first().copied().unwrap_or(2000);
    let epochs = args.get(1).copied().unwrap_or(20);
    let jobs = args.get(2).copied().unwrap_or(20);
    let spec = |count, seed| DatasetSpec { count, jobs, machines: 5, distribution: TimeDistribution::GAMMA_DEFAULT, seed };
    let traces = TraceSet::record(generate(&spec(count, 1)).unwrap(), "neh", neh).unwrap();
    let validation = Validation::from_expert(generate(&spec(200, 2)).unwrap(), neh);
    let tc = TrainConfig { epochs, ..Default::default() };
    let out = train(PolicyConfig::for_machines(5), &tc, &traces, Some(&validation)).unwrap();
    for r in &out.log {
        println!("{}", serde_json::to_string(r).unwrap());
    }
}
