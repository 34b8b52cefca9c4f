use proptest::prelude::*;
use sleepcast_kernel::ops::{conv1d_forward, rmse_loss};
use sleepcast_kernel::{AdamConfig, AdamState, ParamStore, Rng, Tape, Tensor};

proptest! {
    #[test]
    fn conv_preserves_length(b in 1usize..4, c in 1usize..4, t in 1usize..12, o in 1usize..4, seed in 0u64..1000) {
        let mut rng = Rng::new(seed);
        let x = Tensor::new(&[b, c, t], (0..b * c * t).map(|_| rng.normal()).collect()).unwrap();
        let w = Tensor::new(&[o, c, 3], (0..o * c * 3).map(|_| rng.normal()).collect()).unwrap();
        let y = conv1d_forward(&x, &w, &Tensor::zeros(&[o])).unwrap();
        prop_assert_eq!(y.shape(), &[b, o, t]);
        prop_assert!(y.is_finite());
    }

    #[test]
    fn rmse_of_self_is_tiny(v in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
        let a = Tensor::from_vec(v);
        prop_assert!(rmse_loss(&a, &a).unwrap() <= 1e-5);
    }

    #[test]
    fn eval_dropout_is_identity(v in proptest::collection::vec(-10f64..10.0, 1..50), p in 0.0f64..0.99) {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(v));
        let y = tape.dropout(x, p, false, None).unwrap();
        prop_assert_eq!(tape.value(y), tape.value(x));
    }
}

/// Two identically seeded optimization runs must agree bit for bit.
#[test]
fn seeded_trajectories_are_bit_identical() {
    fn run(seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed);
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::new(&[3, 2], (0..6).map(|_| rng.normal()).collect()).unwrap());
        let mut state = AdamState::new(&store);
        for _ in 0..20 {
            store.zero_grad();
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(&[4, 3], (0..12).map(|_| rng.normal()).collect()).unwrap());
            let wv = tape.param(&store, w);
            let y = tape.matmul(x, wv).unwrap();
            let y = tape.dropout(y, 0.3, true, Some(&mut rng)).unwrap();
            let loss = tape.rmse_loss(y, &Tensor::zeros(&[4, 2])).unwrap();
            tape.backward_into(loss, &mut store).unwrap();
            state.step(&mut store, &AdamConfig::default()).unwrap();
        }
        store.params()[0].value.data().to_vec()
    }
    let a = run(5);
    let b = run(5);
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_ne!(a, run(6));
}
