// SPDX-License-Identifier: Apache-2.0

//! Random connected test networks: a ring plus chords, with random
//! impedances, charging, transformers, shunts, loads and generators.

use drohs_core::{Branch, Bus, BusType, Cost, Gen, NetworkCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_case(seed: u64, nb: usize) -> NetworkCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buses = (0..nb)
        .map(|k| Bus {
            id: (k + 1) as u32 * 3,
            bus_type: if k == 0 { BusType::Ref } else { BusType::Pq },
            pd: rng.random_range(0.0..1.0),
            qd: rng.random_range(-0.2..0.4),
            gs: if rng.random_bool(0.2) { rng.random_range(0.0..0.05) } else { 0.0 },
            bs: if rng.random_bool(0.2) { rng.random_range(-0.1..0.2) } else { 0.0 },
            vmin: 0.9,
            vmax: 1.1,
            base_kv: 138.0,
        })
        .collect::<Vec<_>>();
    let mut pairs: Vec<(usize, usize)> = (0..nb).map(|k| (k, (k + 1) % nb)).collect();
    if nb == 2 {
        pairs.truncate(1);
    }
    for _ in 0..nb / 2 {
        let a = rng.random_range(0..nb);
        let b = rng.random_range(0..nb);
        if a != b && !pairs.iter().any(|&(p, q)| (p, q) == (a, b) || (p, q) == (b, a)) {
            pairs.push((a, b));
        }
    }
    let branches = pairs
        .iter()
        .map(|&(a, b)| {
            let xfmr = rng.random_bool(0.25);
            Branch {
                from: buses[a].id,
                to: buses[b].id,
                r: rng.random_range(0.0..0.05),
                x: rng.random_range(0.02..0.3),
                b: if xfmr { 0.0 } else { rng.random_range(0.0..0.3) },
                tap: if xfmr { rng.random_range(0.9..1.1) } else { 0.0 },
                shift: if xfmr && rng.random_bool(0.3) { rng.random_range(-10.0..10.0) } else { 0.0 },
                rate_a: if rng.random_bool(0.7) { rng.random_range(0.5..3.0) } else { 0.0 },
                status: 1,
            }
        })
        .collect();
    let ng = 1 + nb / 3;
    let gens: Vec<Gen> =
        (0..ng).map(|m| Gen { bus: buses[(m * 3) % nb].id, pmin: 0.0, pmax: rng.random_range(1.0..4.0), qmin: -1.0, qmax: 1.0, status: 1 }).collect();
    let costs = (0..ng).map(|m| Cost { gen: m, a: rng.random_range(0.0..0.1), b: rng.random_range(5.0..40.0), c: 0.0 }).collect();
    NetworkCase { name: format!("random{seed}"), base_mva: 100.0, buses, branches, gens, costs }.normalized().unwrap()
}
