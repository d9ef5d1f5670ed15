//! Comparison of minimal-depth witnesses against the baseline on seeded
//! random LTSs.
//!
//! Instance `i` of a run with seed `seed` draws everything from ChaCha8
//! stream `i` of `seed`: the state count, uniform in
//! `[min_states, max_states]`, then `round(density * states)` uniform
//! transitions over `actions` labels, then the sampled pairs. Both formulas
//! of a pair are made irreducible before they are measured.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cleaveland::{cleaveland_formula, cleaveland_refine, SplitterStrategy};
use crate::distinguish::{Distinguisher, Mode};
use crate::equivalences::refine_sequence;
use crate::hml::{reduce_irreducible_with, Evaluator, FormulaStore, NodeId};
use crate::lts::{gen_random, Lts, StateId};

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub instances: usize,
    pub min_states: usize,
    pub max_states: usize,
    pub actions: usize,
    pub density: f64,
    /// Inequivalent pairs sampled per instance.
    pub pairs: usize,
    pub seed: u64,
    pub strategy: SplitterStrategy,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            instances: 200,
            min_states: 50,
            max_states: 200,
            actions: 2,
            density: 2.0,
            pairs: 5,
            seed: 1,
            strategy: SplitterStrategy::Latest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaStats {
    pub depth: usize,
    pub size: BigUint,
    pub negdepth: usize,
    /// The formula holds in exactly one state of the pair.
    pub sound: bool,
}

#[derive(Clone, Debug)]
pub struct PairResult {
    pub s: StateId,
    pub t: StateId,
    pub dist: u32,
    pub ours: FormulaStats,
    pub baseline: FormulaStats,
}

#[derive(Clone, Debug)]
pub struct InstanceResult {
    pub instance: usize,
    pub states: usize,
    pub transitions: usize,
    pub pairs: Vec<PairResult>,
}

/// One CSV row: per-instance maxima and averages of both methods.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub instance: usize,
    pub states: usize,
    pub transitions: usize,
    pub pairs: usize,
    pub max_depth_ours: usize,
    pub max_depth_cleaveland: usize,
    pub max_size_ours: String,
    pub max_size_cleaveland: String,
    pub max_negdepth_ours: usize,
    pub max_negdepth_cleaveland: usize,
    pub avg_depth_ours: f64,
    pub avg_depth_cleaveland: f64,
    pub avg_size_ours: f64,
    pub avg_size_cleaveland: f64,
    pub avg_negdepth_ours: f64,
    pub avg_negdepth_cleaveland: f64,
}

fn stats(store: &FormulaStore, eval: &mut Evaluator<'_>, f: NodeId, s: StateId, t: StateId) -> FormulaStats {
    let m = store.metrics(f);
    FormulaStats {
        depth: m.depth,
        size: m.size,
        negdepth: m.negdepth,
        sound: eval.contains(store, f, s) != eval.contains(store, f, t),
    }
}

fn sample_pairs(
    rng: &mut ChaCha8Rng,
    lts: &Lts,
    apart: impl Fn(StateId, StateId) -> bool,
    wanted: usize,
) -> Vec<(StateId, StateId)> {
    let n = lts.num_states();
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    for _ in 0..wanted * 20 {
        if out.len() == wanted {
            break;
        }
        let s = StateId::from(rng.gen_range(0..n));
        let t = StateId::from(rng.gen_range(0..n));
        if apart(s, t) && !out.contains(&(s, t)) {
            out.push((s, t));
        }
    }
    out
}

/// Runs one instance; deterministic in `(config, instance)`.
pub fn run_instance(config: &BenchConfig, instance: usize) -> InstanceResult {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(instance as u64);
    let states = rng.gen_range(config.min_states..=config.max_states);
    let lts = gen_random(&mut rng, states, config.actions, config.density);
    let seq = refine_sequence(&lts);
    let log = cleaveland_refine(&lts, config.strategy);
    let pairs = sample_pairs(&mut rng, &lts, |s, t| !seq.dist(s, t).is_infinite(), config.pairs);

    let mut ours = Distinguisher::new(&lts, &seq);
    let mut raw = Vec::with_capacity(pairs.len());
    for &(s, t) in &pairs {
        let i = seq.dist(s, t).finite().expect("sampled pairs are apart") as usize;
        let dd = ours.dirdist_table();
        let (p, q) = if dd.dirdist(i, t, s) < dd.dirdist(i, s, t) {
            (t, s)
        } else {
            (s, t)
        };
        raw.push(ours.witness(Mode::DepthAndNegation, p, q).expect("pair is apart"));
    }
    let mut store = ours.into_store();
    let mut eval = Evaluator::new(&lts);
    let mut results = Vec::with_capacity(pairs.len());
    for (&(s, t), f) in pairs.iter().zip(raw) {
        let reduced = reduce_irreducible_with(&mut store, &mut eval, f, s, t).expect("witness distinguishes");
        let ours_stats = stats(&store, &mut eval, reduced, s, t);
        let (bstore, bf, _) = cleaveland_formula(&lts, &log, s, t).expect("pair is apart");
        let mut beval = Evaluator::new(&lts);
        let base_stats = stats(&bstore, &mut beval, bf, s, t);
        results.push(PairResult {
            s,
            t,
            dist: seq.dist(s, t).finite().unwrap(),
            ours: ours_stats,
            baseline: base_stats,
        });
    }
    InstanceResult {
        instance,
        states,
        transitions: lts.num_transitions(),
        pairs: results,
    }
}

/// Runs all instances, in parallel, returned in instance order.
pub fn run(config: &BenchConfig) -> Vec<InstanceResult> {
    (0..config.instances)
        .into_par_iter()
        .map(|i| run_instance(config, i))
        .collect()
}

fn avg(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

impl InstanceResult {
    pub fn row(&self) -> BenchRow {
        let ours = || self.pairs.iter().map(|p| &p.ours);
        let base = || self.pairs.iter().map(|p| &p.baseline);
        let size_f = |x: &FormulaStats| x.size.to_f64().unwrap_or(f64::INFINITY);
        BenchRow {
            instance: self.instance,
            states: self.states,
            transitions: self.transitions,
            pairs: self.pairs.len(),
            max_depth_ours: ours().map(|x| x.depth).max().unwrap_or(0),
            max_depth_cleaveland: base().map(|x| x.depth).max().unwrap_or(0),
            max_size_ours: ours().map(|x| x.size.clone()).max().unwrap_or_default().to_string(),
            max_size_cleaveland: base().map(|x| x.size.clone()).max().unwrap_or_default().to_string(),
            max_negdepth_ours: ours().map(|x| x.negdepth).max().unwrap_or(0),
            max_negdepth_cleaveland: base().map(|x| x.negdepth).max().unwrap_or(0),
            avg_depth_ours: avg(ours().map(|x| x.depth as f64)),
            avg_depth_cleaveland: avg(base().map(|x| x.depth as f64)),
            avg_size_ours: avg(ours().map(size_f)),
            avg_size_cleaveland: avg(base().map(size_f)),
            avg_negdepth_ours: avg(ours().map(|x| x.negdepth as f64)),
            avg_negdepth_cleaveland: avg(base().map(|x| x.negdepth as f64)),
        }
    }
}

/// The rows of `results` as CSV with a header line.
pub fn to_csv(results: &[InstanceResult]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(r.row())?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Averages over all pairs of all instances, as `(ours, baseline)` triples
/// of depth, size and negation depth.
pub fn overall_averages(results: &[InstanceResult]) -> ([f64; 3], [f64; 3]) {
    let all = || results.iter().flat_map(|r| r.pairs.iter());
    let triple = |pick: fn(&PairResult) -> &FormulaStats| {
        [
            avg(all().map(|p| pick(p).depth as f64)),
            avg(all().map(|p| pick(p).size.to_f64().unwrap_or(f64::INFINITY))),
            avg(all().map(|p| pick(p).negdepth as f64)),
        ]
    };
    (triple(|p| &p.ours), triple(|p| &p.baseline))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        BenchConfig {
            instances: 6,
            min_states: 10,
            max_states: 30,
            pairs: 3,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn deterministic_and_ordered() {
        let cfg = small();
        let a = to_csv(&run(&cfg)).unwrap();
        let b = to_csv(&run(&cfg)).unwrap();
        assert_eq!(a, b);
        let first = a.lines().next().unwrap();
        assert!(first.starts_with("instance,states,transitions,pairs,max_depth_ours,max_depth_cleaveland"));
        assert_eq!(a.lines().count(), cfg.instances + 1);
    }

    #[test]
    fn ours_is_never_deeper() {
        for r in run(&small()) {
            for p in &r.pairs {
                assert!(p.ours.sound && p.baseline.sound);
                assert_eq!(p.ours.depth, p.dist as usize);
                assert!(p.ours.depth <= p.baseline.depth);
            }
        }
    }
}
