use std::path::PathBuf;

use pfss_core::heuristics::neh;
use pfss_core::io::{
    generate, load_any, load_dataset, parse_taillard, parse_vrf, save_dataset, DatasetSpec, TimeDistribution,
};
use pfss_core::mdp::TraceSet;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn gamma_pooled_mean() {
    let spec = DatasetSpec { count: 1000, jobs: 100, machines: 10, distribution: TimeDistribution::GAMMA_DEFAULT, seed: 2024 };
    let all: Vec<f64> = generate(&spec).unwrap().iter().flat_map(|i| i.times().to_vec()).collect();
    assert_eq!(all.len(), 1_000_000);
    assert!(all.iter().all(|&t| t >= 0.0));
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    assert!((1.98..=2.02).contains(&mean), "mean {mean}");
}

#[test]
fn normal_clamp_mass_matches_left_tail() {
    let spec = DatasetSpec { count: 1000, jobs: 100, machines: 10, distribution: TimeDistribution::NORMAL_DEFAULT, seed: 7 };
    let all: Vec<f64> = generate(&spec).unwrap().iter().flat_map(|i| i.times().to_vec()).collect();
    let zeros = all.iter().filter(|&&t| t == 0.0).count() as f64 / all.len() as f64;
    // Phi(-1)
    assert!((zeros - 0.158_655_253_9).abs() <= 0.01, "zero fraction {zeros}");
    assert!(all.iter().all(|&t| t >= 0.0));
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DatasetSpec { count: 100, jobs: 20, machines: 5, distribution: TimeDistribution::GAMMA_DEFAULT, seed: 1 };
    let insts = generate(&spec).unwrap();
    let path = dir.path().join("g.pfss");
    save_dataset(&path, &insts, Some(&spec)).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back.len(), 100);
    for (a, b) in insts.iter().zip(&back) {
        assert_eq!(a.times().iter().map(|t| t.to_bits()).collect::<Vec<_>>(), b.times().iter().map(|t| t.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.meta, b.meta);
    }
    let empty = dir.path().join("e.pfss");
    save_dataset(&empty, &[], None).unwrap();
    assert!(load_dataset(&empty).unwrap().is_empty());
}

#[test]
fn trace_set_round_trip() {
    let spec = DatasetSpec { count: 5, jobs: 7, machines: 3, distribution: TimeDistribution::GAMMA_DEFAULT, seed: 3 };
    let set = TraceSet::record(generate(&spec).unwrap(), "neh", neh).unwrap();
    let back = TraceSet::decode(&set.encode()).unwrap();
    assert_eq!(back.traces, set.traces);
    assert_eq!(back.expert, "neh");
    for (a, b) in set.instances.iter().zip(&back.instances) {
        assert_eq!(a.times(), b.times());
    }
    let mut bytes = set.encode();
    bytes[8] = 9;
    assert!(TraceSet::decode(&bytes).is_err());
}

#[test]
fn taillard_fixture() {
    let bytes = std::fs::read(fixture("tai20_5_first2.txt")).unwrap();
    assert_eq!(sha256_hex(&bytes), "45c032c11d1945f34d33088508873b55dc53f0ec89d0545adbb55584f4d733a7");
    let insts = parse_taillard(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(insts.len(), 2);
    let ta001 = &insts[0];
    assert_eq!((ta001.jobs(), ta001.machines()), (20, 5));
    assert!(ta001.times().iter().all(|&t| (1.0..=99.0).contains(&t) && t.fract() == 0.0));
    assert_eq!(ta001.row(0)[..5], [54.0, 83.0, 15.0, 71.0, 77.0]);
    assert_eq!(ta001.meta.seed, Some(873_654_221));
    // NEH lands 0.6 % above the best known 1278
    let (_, span) = neh(ta001);
    assert!((1278.0..=1300.0).contains(&span), "NEH on ta001: {span}");
    assert_eq!(load_any(fixture("tai20_5_first2.txt")).unwrap(), insts);
}

#[test]
fn vrf_fixture() {
    let bytes = std::fs::read(fixture("vrf_10_5_synthetic.txt")).unwrap();
    assert_eq!(sha256_hex(&bytes), "7e8312bdc0adcdee19de458c30bcbba5d5da22b3ce45f52da4002f8260bb378b");
    let insts = parse_vrf(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(insts.len(), 1);
    assert_eq!((insts[0].jobs(), insts[0].machines()), (10, 5));
    assert!(insts[0].times().iter().all(|&t| (1.0..=99.0).contains(&t)));
    assert_eq!(insts[0].job_column(0), vec![71.0, 95.0, 31.0, 34.0, 65.0]);
    assert_eq!(load_any(fixture("vrf_10_5_synthetic.txt")).unwrap(), insts);
}
