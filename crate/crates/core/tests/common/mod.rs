#![allow(dead_code)]

use hmldist::hml::{FormulaStore, NodeId};
use hmldist::lts::{gen_random, ActionId, Lts};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random LTS with `1..=max_states` states and `1..=max_actions`
/// actions; instance `i` uses ChaCha8 stream `i`.
pub fn random_lts(seed: u64, i: u64, max_states: usize, max_actions: usize) -> Lts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    let states = rng.gen_range(1..=max_states);
    let actions = rng.gen_range(1..=max_actions);
    let density = rng.gen_range(0.3..3.0);
    gen_random(&mut rng, states, actions, density)
}

pub fn corpus(seed: u64, count: u64, max_states: usize, max_actions: usize) -> Vec<Lts> {
    (0..count)
        .map(|i| random_lts(seed, i, max_states, max_actions))
        .collect()
}

pub fn arb_lts(max_states: usize, max_actions: usize) -> impl Strategy<Value = Lts> {
    (any::<u64>(), 1..=max_states, 1..=max_actions, 0.3f64..3.0).prop_map(|(seed, states, actions, density)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gen_random(&mut rng, states, actions, density)
    })
}

/// Random formula over the actions of `lts` with modal depth at most `depth`.
pub fn random_formula(rng: &mut impl Rng, store: &mut FormulaStore, lts: &Lts, depth: usize) -> NodeId {
    let pick = if depth == 0 {
        [0, 0, 4][rng.gen_range(0..3)]
    } else {
        rng.gen_range(0..6)
    };
    match pick {
        0 | 1 => store.mk_true(),
        2 | 3 => {
            let a = ActionId(rng.gen_range(0..lts.num_actions().max(1)) as u32);
            let inner = random_formula(rng, store, lts, depth - 1);
            store.mk_diamond(a, inner)
        }
        4 => {
            let inner = random_formula(rng, store, lts, depth);
            store.mk_neg(inner)
        }
        _ => {
            let l = random_formula(rng, store, lts, depth);
            let r = random_formula(rng, store, lts, depth);
            store.conjoin([l, r])
        }
    }
}
