mod common;

use common::{naive_contract, outer, random_tensor, rel_err};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use ttembed::linalg::norm2;
use ttembed::tensor::{contract, tensorize, vectorize};
use ttembed::tt::{reconstruct, tt_svd, TtConfig};

fn dims_strategy(max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1..=max_dim, 1..=max_order)
}

proptest! {
    #[test]
    fn tensorize_vectorize_round_trip((dims, x) in dims_strategy(4, 5).prop_flat_map(|dims| {
        let n = dims.iter().product::<usize>();
        (Just(dims), proptest::collection::vec(any::<f64>(), n))
    })) {
        let t = tensorize(&x, &dims).unwrap();
        let back = vectorize(&t);
        prop_assert_eq!(back.len(), x.len());
        for (a, b) in back.iter().zip(&x) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn mode_one_unfolding_is_the_flat_data(dims in dims_strategy(4, 5), seed in any::<u64>()) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let t = random_tensor(&mut rng, dims);
        let m = t.matricize(1).unwrap();
        prop_assert_eq!(m.as_slice(), t.data());
    }

    #[test]
    fn contract_matches_index_loop(
        da in dims_strategy(4, 5),
        db in dims_strategy(4, 5),
        ka in 0usize..4,
        kb in 0usize..4,
        seed in any::<u64>(),
    ) {
        let ka = ka % da.len();
        let kb = kb % db.len();
        let mut db = db;
        db[kb] = da[ka];
        let mut rng = Pcg64::seed_from_u64(seed);
        let a = random_tensor(&mut rng, da);
        let b = random_tensor(&mut rng, db);
        let c = contract(&a, &b, ka + 1, kb + 1).unwrap();
        let (dims, oracle) = naive_contract(&a, &b, ka, kb);
        prop_assert_eq!(c.dims(), &dims[..]);
        prop_assert!(rel_err(&oracle, c.data()) <= 1e-12);
    }

    #[test]
    fn tt_svd_output_ranks_are_feasible(dims in dims_strategy(5, 5), eps in 0.0f64..0.6, cap in 1usize..5, seed in any::<u64>()) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let x: Vec<f64> = (0..dims.iter().product::<usize>()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = TtConfig::uniform(dims.clone(), cap, eps).unwrap();
        let mps = tt_svd(&x, &cfg).unwrap();
        let r = mps.ranks();
        prop_assert_eq!(r[0], 1);
        prop_assert_eq!(r[dims.len()], 1);
        for k in 1..dims.len() {
            let right: usize = dims[k..].iter().product();
            prop_assert!(r[k] <= (r[k - 1] * dims[k - 1]).min(right));
            prop_assert!(r[k] <= cap);
        }
        prop_assert_eq!(reconstruct(&mps).len(), x.len());
    }
}

#[test]
fn raising_caps_never_increases_error() {
    let mut rng = Pcg64::seed_from_u64(21);
    for _ in 0..30 {
        let order = rng.random_range(3..=5);
        let dims: Vec<usize> = (0..order).map(|_| rng.random_range(2..=5)).collect();
        let n: usize = dims.iter().product();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut previous = f64::INFINITY;
        for cap in 1..=25 {
            let mps = tt_svd(&x, &TtConfig::uniform(dims.clone(), cap, 0.0).unwrap()).unwrap();
            let err = rel_err(&x, &reconstruct(&mps));
            assert!(err <= previous + 1e-12, "dims {dims:?} cap {cap}: {err} > {previous}");
            previous = err;
        }
        assert!(previous <= 1e-10);
    }
}

#[test]
fn separable_inputs_are_exact_at_any_epsilon() {
    let mut rng = Pcg64::seed_from_u64(8);
    for _ in 0..50 {
        let order = rng.random_range(2..=5);
        let dims: Vec<usize> = (0..order).map(|_| rng.random_range(1..=6)).collect();
        let factors: Vec<Vec<f64>> = dims
            .iter()
            .map(|&n| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let x = outer(&factors);
        if norm2(&x) == 0.0 {
            continue;
        }
        let eps = rng.random_range(0.0..0.9);
        let mps = tt_svd(&x, &TtConfig::uncapped(dims.clone(), eps).unwrap()).unwrap();
        assert!(mps.ranks().iter().all(|&r| r == 1), "{dims:?}: {:?}", mps.ranks());
        let err = rel_err(&x, &reconstruct(&mps));
        assert!(err <= 1e-10, "{dims:?} eps {eps}: {err}");
    }
}
