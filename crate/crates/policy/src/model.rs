//! The policy network: a gated graph encoder over the job graph followed by a
//! context-query attention decoder with clipped logits.
//!
//! Several instances are processed together by stacking their graphs into
//! one block-diagonal graph. Decoding attends over all stacked nodes with a
//! mask that keeps each query inside its own instance.

use std::rc::Rc;

use ndarray::Array2;
use pfss_core::mdp::ScheduleState;
use pfss_core::{Instance, Permutation};

use crate::autodiff::{Mat, Reduce, Tape, Var};
use crate::config::{Aggregation, Norm, PolicyConfig};
use crate::graph::{graph_for, JobGraph};
use crate::params::{LayerStats, NormIdx, PolicyParams, RunningStats, BN_MOMENTUM};
use crate::PolicyError;

const NORM_EPS: f64 = 1e-5;

/// Whether batch normalization uses minibatch statistics or running ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Several job graphs stacked into one.
pub struct GraphBatch {
    features: Mat,
    /// `offsets[g]..offsets[g + 1]` are the nodes of graph `g`.
    offsets: Vec<usize>,
    edge_src: Rc<[usize]>,
    edge_dst: Rc<[usize]>,
    edge_dist: Mat,
    inv_degree: Rc<[f64]>,
    node_graph: Rc<[usize]>,
    inv_size: Rc<[f64]>,
}

impl GraphBatch {
    pub fn new(graphs: &[&JobGraph]) -> Self {
        let m = graphs.first().map_or(0, |g| g.machines());
        let total: usize = graphs.iter().map(|g| g.jobs()).sum();
        let mut features = Mat::zeros((total, m));
        let mut offsets = vec![0];
        let (mut src, mut dst, mut dist) = (Vec::new(), Vec::new(), Vec::new());
        let mut inv_degree = Vec::with_capacity(total);
        let mut node_graph = Vec::with_capacity(total);
        let mut inv_size = Vec::with_capacity(graphs.len());
        for (g, graph) in graphs.iter().enumerate() {
            let base = *offsets.last().unwrap();
            features.slice_mut(ndarray::s![base..base + graph.jobs(), ..]).assign(&graph.features);
            for (j, (nbrs, ds)) in graph.neighbors.iter().zip(&graph.distances).enumerate() {
                for (&k, &dd) in nbrs.iter().zip(ds) {
                    src.push(base + j);
                    dst.push(base + k);
                    dist.push(dd);
                }
                inv_degree.push(1.0 / nbrs.len().max(1) as f64);
                node_graph.push(g);
            }
            inv_size.push(1.0 / graph.jobs() as f64);
            offsets.push(base + graph.jobs());
        }
        let edges = dist.len();
        Self {
            features,
            offsets,
            edge_src: src.into(),
            edge_dst: dst.into(),
            edge_dist: Mat::from_shape_vec((edges, 1), dist).expect("one distance per edge"),
            inv_degree: inv_degree.into(),
            node_graph: node_graph.into(),
            inv_size: inv_size.into(),
        }
    }

    pub fn graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn edges(&self) -> usize {
        self.edge_src.len()
    }
}

/// Minibatch statistics gathered by one training-mode encoder pass.
#[derive(Debug, Clone, Default)]
pub struct BatchStats {
    /// `(layer, is_edge_site, mean, var, count)`
    pub sites: Vec<(usize, bool, Vec<f64>, Vec<f64>, usize)>,
}

impl BatchStats {
    pub fn apply(&self, stats: &mut [LayerStats]) {
        for (layer, edge, mean, var, count) in &self.sites {
            let target = if *edge { &mut stats[*layer].edge } else { &mut stats[*layer].node };
            target.update(mean, var, *count, BN_MOMENTUM);
        }
    }
}

/// Encoder outputs on a tape.
pub struct Encoded {
    /// Final node embeddings of all stacked graphs.
    pub nodes: Var,
    /// Mean node embedding per graph.
    pub graph: Var,
    /// Node embeddings entering each layer, plus the final ones.
    pub node_layers: Vec<Var>,
    /// Edge embeddings entering each layer.
    pub edge_layers: Vec<Var>,
    pub offsets: Vec<usize>,
    pub stats: BatchStats,
}

/// One decoding query: which stacked graph, its first and last scheduled
/// jobs (local indices), and which of its jobs are still selectable.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub graph: usize,
    pub first: Option<usize>,
    pub last: Option<usize>,
    pub unscheduled: Vec<bool>,
}

impl Query {
    pub fn from_state(graph: usize, state: &ScheduleState) -> Self {
        Self {
            graph,
            first: state.scheduled().first().copied(),
            last: state.scheduled().last().copied(),
            unscheduled: state.mask().to_vec(),
        }
    }
}

/// Step-independent decoder inputs.
struct Keys {
    /// Node embeddings followed by the two placeholder rows.
    table: Var,
    graph: Var,
    att_key: Var,
    att_value: Var,
    logit_key: Var,
    offsets: Vec<usize>,
}

/// Decoder parameters that act on the per-step query.
#[derive(Clone, Copy)]
struct QueryParams {
    att_query: Var,
    att_out: Var,
    logit_query: Var,
}

/// Encoder activations of a single instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    /// Node embeddings entering each layer, plus the final ones (`L + 1`).
    pub nodes: Vec<Mat>,
    /// Edge embeddings entering each layer (`L`), in the graph's neighbor order.
    pub edges: Vec<Mat>,
    pub graph: Vec<f64>,
    /// Placeholders for the first decoding step.
    pub first_placeholder: Vec<f64>,
    pub last_placeholder: Vec<f64>,
}

/// Result of one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Clipped logits; scheduled jobs are `-inf`.
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// One expert decision in a behavior-cloning batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<'a> {
    /// Index into the graphs passed to [`Policy::bc_loss`].
    pub graph: usize,
    /// Jobs already scheduled, in order.
    pub prefix: &'a [usize],
    pub target: usize,
}

/// Loss value and gradients for every parameter tensor.
pub struct BcLoss {
    pub loss: f64,
    pub grads: Vec<Mat>,
    pub stats: BatchStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub config: PolicyConfig,
    pub params: PolicyParams,
}

fn check_finite(tape: &Tape, v: Var, stage: impl FnOnce() -> String) -> Result<(), PolicyError> {
    if tape.value(v).iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PolicyError::NonFinite { stage: stage() })
    }
}

impl Policy {
    pub fn new(config: PolicyConfig, seed: u64) -> Result<Self, PolicyError> {
        config.validate()?;
        let params = PolicyParams::init(&config, seed);
        Ok(Self { config, params })
    }

    pub fn from_parts(config: PolicyConfig, params: PolicyParams) -> Result<Self, PolicyError> {
        config.validate()?;
        let expected = PolicyParams::init(&config, 0);
        let shapes_match = expected.names == params.names
            && expected.tensors.iter().zip(&params.tensors).all(|(a, b)| a.dim() == b.dim())
            && expected.stats.len() == params.stats.len();
        if !shapes_match {
            return Err(PolicyError::Config("parameter tensors do not match the configuration".into()));
        }
        Ok(Self { config, params })
    }

    pub fn machines(&self) -> usize {
        self.config.machines
    }

    pub fn graph(&self, inst: &Instance) -> Result<JobGraph, PolicyError> {
        graph_for(inst, &self.config)
    }

    /// Puts every parameter tensor on `tape` as a leaf.
    pub fn leaves(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
    }

    fn normalize(
        &self,
        tape: &mut Tape,
        x: Var,
        site: Option<NormIdx>,
        pv: &[Var],
        mode: Mode,
        running: &RunningStats,
        record: (usize, bool, &mut BatchStats),
    ) -> Var {
        let Some(site) = site else { return x };
        let (gamma, beta) = (pv[site.gamma], pv[site.beta]);
        match (self.config.norm, mode) {
            (Norm::None, _) => x,
            (Norm::Layer, _) => tape.row_norm(x, gamma, beta, NORM_EPS),
            (Norm::Batch, Mode::Train) => {
                let count = tape.value(x).nrows();
                let (y, mean, var) = tape.column_norm(x, gamma, beta, None, NORM_EPS);
                let (layer, edge, stats) = record;
                stats.sites.push((layer, edge, mean, var, count));
                y
            }
            (Norm::Batch, Mode::Eval) => {
                tape.column_norm(x, gamma, beta, Some((&running.mean, &running.var)), NORM_EPS).0
            }
        }
    }

    /// Runs the graph encoder over a stack of graphs.
    pub fn encode(&self, tape: &mut Tape, pv: &[Var], batch: &GraphBatch, mode: Mode) -> Result<Encoded, PolicyError> {
        let lay = &self.params.layout;
        let mut stats = BatchStats::default();
        let x = tape.leaf(batch.features.clone());
        let mut h = tape.matmul(x, pv[lay.node_embed]);
        let dist = tape.leaf(batch.edge_dist.clone());
        let mut e = tape.matmul(dist, pv[lay.edge_embed]);
        check_finite(tape, h, || "input embedding".into())?;
        let mut node_layers = vec![h];
        let mut edge_layers = Vec::new();
        let layers = lay.layers.len();
        for (l, idx) in lay.layers.iter().enumerate() {
            edge_layers.push(e);
            let running = &self.params.stats[l];
            // node update: h + ReLU(Nm(B h_j + Agg_k(sigmoid(e_jk) * C h_k)))
            let self_term = tape.matmul(h, pv[idx.b]);
            let ch = tape.matmul(h, pv[idx.c]);
            let ch_dst = tape.gather_rows(ch, batch.edge_dst.clone());
            let gate = tape.sigmoid(e);
            let msg = tape.mul(gate, ch_dst);
            let agg = match self.config.aggregation {
                Aggregation::Sum => tape.segment_reduce(msg, batch.edge_src.clone(), batch.nodes(), Reduce::Sum),
                Aggregation::Max => tape.segment_reduce(msg, batch.edge_src.clone(), batch.nodes(), Reduce::Max),
                Aggregation::Mean => {
                    let s = tape.segment_reduce(msg, batch.edge_src.clone(), batch.nodes(), Reduce::Sum);
                    tape.scale_rows(s, batch.inv_degree.clone())
                }
            };
            let pre = tape.add(self_term, agg);
            let normed = self.normalize(tape, pre, idx.node_norm, pv, mode, &running.node, (l, false, &mut stats));
            let act = tape.relu(normed);
            let h_next = tape.add(h, act);
            check_finite(tape, h_next, || format!("encoder layer {l} nodes"))?;
            // the last layer's edge embeddings feed nothing downstream
            if l + 1 < layers {
                let de = tape.matmul(e, pv[idx.d]);
                let eh = tape.matmul(h, pv[idx.e]);
                let fh = tape.matmul(h, pv[idx.f]);
                let eh_src = tape.gather_rows(eh, batch.edge_src.clone());
                let fh_dst = tape.gather_rows(fh, batch.edge_dst.clone());
                let pre = tape.add(de, eh_src);
                let pre = tape.add(pre, fh_dst);
                let normed = self.normalize(tape, pre, idx.edge_norm, pv, mode, &running.edge, (l, true, &mut stats));
                let act = tape.relu(normed);
                e = tape.add(e, act);
                check_finite(tape, e, || format!("encoder layer {l} edges"))?;
            }
            h = h_next;
            node_layers.push(h);
        }
        let sums = tape.segment_reduce(h, batch.node_graph.clone(), batch.graphs(), Reduce::Sum);
        let graph = tape.scale_rows(sums, batch.inv_size.clone());
        Ok(Encoded { nodes: h, graph, node_layers, edge_layers, offsets: batch.offsets.clone(), stats })
    }

    fn keys(&self, tape: &mut Tape, pv: &[Var], nodes: Var, graph: Var, offsets: Vec<usize>) -> Keys {
        let lay = &self.params.layout;
        let table = tape.concat_rows(&[nodes, pv[lay.first_placeholder], pv[lay.last_placeholder]]);
        let att_key = tape.matmul(nodes, pv[lay.att_key]);
        let att_value = tape.matmul(nodes, pv[lay.att_value]);
        let logit_key = tape.matmul(nodes, pv[lay.logit_key]);
        Keys { table, graph, att_key, att_value, logit_key, offsets }
    }

    fn query_params(&self, pv: &[Var]) -> QueryParams {
        let lay = &self.params.layout;
        QueryParams { att_query: pv[lay.att_query], att_out: pv[lay.att_out], logit_query: pv[lay.logit_query] }
    }

    /// Clipped logits for every query over all stacked nodes, with the mask of
    /// selectable entries.
    fn logits(&self, tape: &mut Tape, qp: QueryParams, keys: &Keys, queries: &[Query]) -> Result<(Var, Array2<bool>), PolicyError> {
        let d = self.config.hidden_dim;
        let heads = self.config.heads;
        let dk = d / heads;
        let total = *keys.offsets.last().unwrap();
        let (first_ph, last_ph) = (total, total + 1);
        let mut own = Array2::from_elem((queries.len(), total), false);
        let mut allowed = Array2::from_elem((queries.len(), total), false);
        let mut graph_rows = Vec::with_capacity(queries.len());
        let mut first_rows = Vec::with_capacity(queries.len());
        let mut last_rows = Vec::with_capacity(queries.len());
        for (s, q) in queries.iter().enumerate() {
            let base = keys.offsets[q.graph];
            let n = keys.offsets[q.graph + 1] - base;
            if q.unscheduled.len() != n {
                return Err(PolicyError::Config(format!("query mask has {} entries for {n} jobs", q.unscheduled.len())));
            }
            if !q.unscheduled.iter().any(|&u| u) {
                return Err(PolicyError::NoSelectableJob);
            }
            for j in 0..n {
                own[[s, base + j]] = true;
                allowed[[s, base + j]] = q.unscheduled[j];
            }
            graph_rows.push(q.graph);
            first_rows.push(q.first.map_or(first_ph, |j| base + j));
            last_rows.push(q.last.map_or(last_ph, |j| base + j));
        }
        let g = tape.gather_rows(keys.graph, graph_rows.into());
        let f = tape.gather_rows(keys.table, first_rows.into());
        let l = tape.gather_rows(keys.table, last_rows.into());
        let context = tape.concat_cols(&[g, f, l]);
        let q = tape.matmul(context, qp.att_query);
        let mut head_out = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = tape.slice_cols(q, h * dk, dk);
            let kh = tape.slice_cols(keys.att_key, h * dk, dk);
            let vh = tape.slice_cols(keys.att_value, h * dk, dk);
            let scores = tape.matmul_t(qh, kh);
            let scores = tape.scale(scores, 1.0 / (dk as f64).sqrt());
            let weights = tape.masked_softmax(scores, &own);
            head_out.push(tape.matmul(weights, vh));
        }
        let heads_cat = if heads == 1 { head_out[0] } else { tape.concat_cols(&head_out) };
        let refined = tape.matmul(heads_cat, qp.att_out);
        let lq = tape.matmul(refined, qp.logit_query);
        let compat = tape.matmul_t(lq, keys.logit_key);
        let compat = tape.scale(compat, 1.0 / (d as f64).sqrt());
        let squashed = tape.tanh(compat);
        let logits = tape.scale(squashed, self.config.logit_clip);
        check_finite(tape, logits, || "decoder logits".into())?;
        Ok((logits, allowed))
    }

    /// Mean cross-entropy of the expert's choices, with gradients.
    pub fn bc_loss(&self, graphs: &[&JobGraph], steps: &[TraceStep<'_>], mode: Mode) -> Result<BcLoss, PolicyError> {
        if steps.is_empty() {
            return Err(PolicyError::EmptyData("behavior-cloning batch has no steps".into()));
        }
        let mut tape = Tape::new();
        let pv = self.leaves(&mut tape);
        let batch = GraphBatch::new(graphs);
        let enc = self.encode(&mut tape, &pv, &batch, mode)?;
        let keys = self.keys(&mut tape, &pv, enc.nodes, enc.graph, enc.offsets.clone());
        let mut queries = Vec::with_capacity(steps.len());
        let mut targets = Vec::with_capacity(steps.len());
        for (i, st) in steps.iter().enumerate() {
            let n = graphs[st.graph].jobs();
            let state = ScheduleState::from_actions(n, st.prefix)?;
            if st.target >= n || !state.is_unscheduled(st.target) {
                return Err(PolicyError::MaskedTarget { step: i, job: st.target });
            }
            queries.push(Query::from_state(st.graph, &state));
            targets.push(enc.offsets[st.graph] + st.target);
        }
        let (logits, allowed) = self.logits(&mut tape, self.query_params(&pv), &keys, &queries)?;
        let loss = tape.masked_nll(logits, &allowed, targets.into());
        let value = tape.value(loss)[[0, 0]];
        if !value.is_finite() {
            return Err(PolicyError::NonFinite { stage: "loss".into() });
        }
        let grads = tape.backward(loss);
        let grads = pv.iter().zip(&self.params.tensors).map(|(&v, t)| grads.get_or_zeros(v, t)).collect();
        Ok(BcLoss { loss: value, grads, stats: enc.stats })
    }

    /// Encoder activations of one instance.
    pub fn activations(&self, inst: &Instance, mode: Mode) -> Result<Activations, PolicyError> {
        let graph = self.graph(inst)?;
        let mut tape = Tape::new();
        let pv = self.leaves(&mut tape);
        let enc = self.encode(&mut tape, &pv, &GraphBatch::new(&[&graph]), mode)?;
        let lay = &self.params.layout;
        Ok(Activations {
            nodes: enc.node_layers.iter().map(|&v| tape.value(v).clone()).collect(),
            edges: enc.edge_layers.iter().map(|&v| tape.value(v).clone()).collect(),
            graph: tape.value(enc.graph).row(0).to_vec(),
            first_placeholder: self.params.tensors[lay.first_placeholder].row(0).to_vec(),
            last_placeholder: self.params.tensors[lay.last_placeholder].row(0).to_vec(),
        })
    }

    /// The `3d` decoder context: graph embedding, then the first and the most
    /// recent scheduled job (placeholders before the first step).
    pub fn context(&self, acts: &Activations, state: &ScheduleState) -> Vec<f64> {
        let nodes = acts.nodes.last().expect("at least the input embedding");
        let pick = |job: Option<&usize>, placeholder: &[f64]| job.map_or_else(|| placeholder.to_vec(), |&j| nodes.row(j).to_vec());
        let mut out = acts.graph.clone();
        out.extend(pick(state.scheduled().first(), &acts.first_placeholder));
        out.extend(pick(state.scheduled().last(), &acts.last_placeholder));
        out
    }

    /// Job probabilities in `state` given precomputed activations.
    pub fn decode_step(&self, acts: &Activations, state: &ScheduleState) -> Result<StepOutput, PolicyError> {
        let nodes = acts.nodes.last().expect("at least the input embedding");
        if state.jobs() != nodes.nrows() {
            return Err(PolicyError::Config(format!("state has {} jobs, activations {}", state.jobs(), nodes.nrows())));
        }
        let mut tape = Tape::new();
        let pv = self.leaves(&mut tape);
        let n = tape.leaf(nodes.clone());
        let g = tape.leaf(Mat::from_shape_vec((1, acts.graph.len()), acts.graph.clone()).expect("row vector"));
        let keys = self.keys(&mut tape, &pv, n, g, vec![0, nodes.nrows()]);
        let (logits, allowed) = self.logits(&mut tape, self.query_params(&pv), &keys, &[Query::from_state(0, state)])?;
        let probs = tape.masked_softmax(logits, &allowed);
        let lv = tape.value(logits);
        Ok(StepOutput {
            logits: (0..nodes.nrows()).map(|j| if allowed[[0, j]] { lv[[0, j]] } else { f64::NEG_INFINITY }).collect(),
            probs: tape.value(probs).row(0).to_vec(),
        })
    }

    /// Greedy decoding: always the most probable job, ties to the lowest index.
    pub fn rollout_greedy(&self, inst: &Instance) -> Result<Permutation, PolicyError> {
        Ok(self.rollout_greedy_batch(std::slice::from_ref(inst))?.pop().expect("one instance in, one out"))
    }

    /// Greedy decoding of several instances in lockstep (evaluation mode).
    pub fn rollout_greedy_batch(&self, instances: &[Instance]) -> Result<Vec<Permutation>, PolicyError> {
        for inst in instances {
            if inst.machines() != self.config.machines {
                return Err(PolicyError::MachineMismatch { expected: self.config.machines, found: inst.machines() });
            }
        }
        let mut out: Vec<Option<Permutation>> = vec![None; instances.len()];
        let mut active = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            if inst.jobs() < 2 {
                out[i] = Some(Permutation::identity(inst.jobs()));
            } else {
                active.push(i);
            }
        }
        if !active.is_empty() {
            let graphs = active.iter().map(|&i| self.graph(&instances[i])).collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&JobGraph> = graphs.iter().collect();
            let batch = GraphBatch::new(&refs);
            // encode once; decoder keys become constants for the per-step tapes
            let mut tape = Tape::new();
            let pv = self.leaves(&mut tape);
            let enc = self.encode(&mut tape, &pv, &batch, Mode::Eval)?;
            let keys = self.keys(&mut tape, &pv, enc.nodes, enc.graph, enc.offsets.clone());
            let frozen = [keys.table, keys.graph, keys.att_key, keys.att_value, keys.logit_key].map(|v| tape.value(v).clone());
            let lay = &self.params.layout;
            let qp_values = [lay.att_query, lay.att_out, lay.logit_query].map(|i| self.params.tensors[i].clone());
            drop(tape);
            let mut states: Vec<ScheduleState> = graphs.iter().map(|g| ScheduleState::new(g.jobs())).collect();
            let longest = graphs.iter().map(|g| g.jobs()).max().unwrap_or(0);
            for _ in 0..longest {
                let live: Vec<usize> = (0..states.len()).filter(|&s| !states[s].is_terminal()).collect();
                let mut step_tape = Tape::new();
                let [table, graph, att_key, att_value, logit_key] = frozen.clone().map(|m| step_tape.leaf(m));
                let [att_query, att_out, logit_query] = qp_values.clone().map(|m| step_tape.leaf(m));
                let step_keys = Keys { table, graph, att_key, att_value, logit_key, offsets: enc.offsets.clone() };
                let qp = QueryParams { att_query, att_out, logit_query };
                let queries: Vec<Query> = live.iter().map(|&s| Query::from_state(s, &states[s])).collect();
                let (logits, allowed) = self.logits(&mut step_tape, qp, &step_keys, &queries)?;
                let lv = step_tape.value(logits);
                for (row, &s) in live.iter().enumerate() {
                    let base = enc.offsets[s];
                    let mut best: Option<(usize, f64)> = None;
                    for j in 0..states[s].jobs() {
                        if allowed[[row, base + j]] && best.is_none_or(|(_, b)| lv[[row, base + j]] > b) {
                            best = Some((j, lv[[row, base + j]]));
                        }
                    }
                    states[s].apply(best.expect("a selectable job exists").0)?;
                }
            }
            for (s, &i) in active.iter().enumerate() {
                out[i] = states[s].permutation();
            }
        }
        Ok(out.into_iter().map(|p| p.expect("every rollout completes")).collect())
    }

    /// Adds `grads` scaled by `-lr` directly (plain gradient descent), used by
    /// tests that need a single deterministic step.
    pub fn sgd_step(&mut self, grads: &[Mat], lr: f64) {
        for (t, g) in self.params.tensors.iter_mut().zip(grads) {
            t.scaled_add(-lr, g);
        }
    }
}
