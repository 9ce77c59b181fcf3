use pfss_core::heuristics::neh;
use pfss_core::Instance;
use pfss_policy::{gradient_check, Aggregation, JobGraph, Mode, Norm, Policy, PolicyConfig, TraceStep};

fn tiny_instances() -> Vec<Instance> {
    vec![
        Instance::from_rows(&[vec![1.3, 3.7, 0.4], vec![2.9, 0.6, 4.1]]).unwrap(),
        Instance::from_rows(&[vec![2.2, 0.8, 1.9], vec![0.3, 3.1, 1.4]]).unwrap(),
    ]
}

fn check(layers: usize, norm: Norm, aggregation: Aggregation, mode: Mode) {
    let cfg = PolicyConfig { hidden_dim: 4, layers, heads: 2, machines: 2, norm, aggregation, ..Default::default() };
    let p = Policy::new(cfg, 41).unwrap();
    let insts = tiny_instances();
    let graphs: Vec<JobGraph> = insts.iter().map(|i| p.graph(i).unwrap()).collect();
    let refs: Vec<&JobGraph> = graphs.iter().collect();
    let traces: Vec<Vec<usize>> = insts.iter().map(|i| neh(i).0.into_vec()).collect();
    let steps: Vec<TraceStep<'_>> = traces
        .iter()
        .enumerate()
        .flat_map(|(g, tr)| (0..tr.len()).map(move |t| TraceStep { graph: g, prefix: &tr[..t], target: tr[t] }))
        .collect();
    let report = gradient_check(&p, &refs, &steps, mode, 1e-5).unwrap();
    assert_eq!(report.len(), p.params.tensors.len());
    for r in &report {
        assert!(r.relative_error < 1e-4, "{layers} layers {norm:?} {aggregation:?}: {r:?}");
    }
    // the decoder and first-layer weights always carry signal
    for name in ["node_embed", "attention.query", "logit.key", "layer0.b"] {
        let r = report.iter().find(|r| r.name == name).unwrap();
        assert!(r.analytic_norm > 1e-8, "{name} has no gradient");
    }
}

#[test]
fn finite_differences_batch_norm() {
    check(1, Norm::Batch, Aggregation::Mean, Mode::Train);
}

#[test]
fn finite_differences_layer_norm() {
    check(1, Norm::Layer, Aggregation::Mean, Mode::Train);
}

#[test]
fn finite_differences_two_layers_reach_edge_updates() {
    check(2, Norm::Batch, Aggregation::Mean, Mode::Train);
    check(2, Norm::Layer, Aggregation::Mean, Mode::Train);
    check(2, Norm::None, Aggregation::Sum, Mode::Train);
    check(2, Norm::Batch, Aggregation::Max, Mode::Eval);
}
