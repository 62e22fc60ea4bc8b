use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xor3::packed::PackedMachine;

const SIM: u32 = 512;

fn distinct_values(rng: &mut ChaCha8Rng, len: usize, ell: u32) -> Vec<u64> {
    let mut all: Vec<u64> = (0..1u64 << ell).collect();
    all.partial_shuffle(rng, len).0.to_vec()
}

#[test]
fn sort_and_intersection_match_scalar() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut m = PackedMachine::new(SIM).unwrap();
    for ell in [4u32, 8, 12] {
        for k in 2..=32usize {
            let k = k.min(1 << ell);
            for _ in 0..20 {
                let a: Vec<u64> = (0..k).map(|_| rng.gen_range(0..1u64 << ell)).collect();
                let pa = m.pack_to(&a, k.next_power_of_two() as u32, ell).unwrap();
                let sorted = m.bitonic_sort(&pa).unwrap();
                let mut expect = a.clone();
                expect.sort_unstable();
                assert_eq!(sorted.unpack(), expect, "k={k} ell={ell}");
                for f in sorted.fields().iter().filter(|f| !f.pad) {
                    assert_eq!(a[f.index], f.payload);
                }

                let xs = distinct_values(&mut rng, k, ell);
                let ylen = rng.gen_range(1..=k);
                let mut ys = distinct_values(&mut rng, ylen, ell);
                // force some overlap
                for i in 0..ylen / 3 {
                    if !ys.contains(&xs[i]) {
                        ys[i] = xs[i];
                    }
                }
                let kk = k.next_power_of_two() as u32;
                let px = m.pack_to(&xs, kk, ell).unwrap();
                let py = m.pack_to(&ys, kk, ell).unwrap();
                let mut got = m.intersect_listing(&px, &py).unwrap();
                got.sort_unstable();
                let mut expect = Vec::new();
                for (i, x) in xs.iter().enumerate() {
                    for (j, y) in ys.iter().enumerate() {
                        if x == y {
                            expect.push((i, j));
                        }
                    }
                }
                assert_eq!(got, expect, "xs={xs:?} ys={ys:?}");
            }
        }
    }
}

proptest! {
    #[test]
    fn broadcast_is_linear(vals in prop::collection::vec(0u64..1 << 10, 1..32), v in 0u64..1 << 10, u in 0u64..1 << 10) {
        let mut m = PackedMachine::new(SIM).unwrap();
        let pa = m.pack(&vals, 10).unwrap();
        let x = m.xor_broadcast(&pa, v).unwrap();
        prop_assert_eq!(x.unpack(), vals.iter().map(|a| a ^ v).collect::<Vec<_>>());
        let xu = m.xor_broadcast(&x, u).unwrap();
        prop_assert_eq!(xu, m.xor_broadcast(&pa, u ^ v).unwrap());
    }

    #[test]
    fn round_trip(vals in prop::collection::vec(0u64..1 << 12, 0..64)) {
        let m = PackedMachine::new(SIM).unwrap();
        prop_assert_eq!(m.pack(&vals, 12).unwrap().unpack(), vals);
    }
}

#[test]
fn intersection_ops_grow_like_log_squared() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut m = PackedMachine::new(SIM).unwrap();
    let mut cost = Vec::new();
    for k in [4usize, 8, 16, 32] {
        let a = distinct_values(&mut rng, k, 8);
        let b = distinct_values(&mut rng, k, 8);
        let pa = m.pack(&a, 8).unwrap();
        let pb = m.pack(&b, 8).unwrap();
        m.reset_ops();
        m.intersect_listing(&pa, &pb).unwrap();
        let lg = (2 * k).ilog2() as u64;
        cost.push(m.ops() as f64 / (lg * lg) as f64);
    }
    let (lo, hi) = cost
        .iter()
        .fold((f64::MAX, 0f64), |(l, h), &c| (l.min(c), h.max(c)));
    assert!(hi / lo < 3.0, "ops per log²(2k): {cost:?}");
}

#[test]
fn mismatched_machines_are_rejected() {
    let mut a = PackedMachine::new(256).unwrap();
    let b = PackedMachine::new(128).unwrap();
    let pa = b.pack(&[1, 2], 4).unwrap();
    assert!(a.bitonic_sort(&pa).is_err());
    assert!(PackedMachine::new(1024).is_err());
}
