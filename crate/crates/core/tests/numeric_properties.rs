use proptest::prelude::*;
use wuglab::numerics::tensor::{log_softmax, softmax};
use wuglab::numerics::{AdadeltaConfig, AdadeltaState, Tensor};

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..4, vals in proptest::collection::vec(-50.0f64..50.0, 12)) {
        let cols = vals.len() / rows;
        let t = Tensor::matrix(rows, cols, vals[..rows * cols].to_vec()).unwrap();
        let s = softmax(&t, None).unwrap();
        for r in 0..rows {
            let sum: f64 = s.row_slice(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.row_slice(r).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        let ls = log_softmax(&t);
        for (a, b) in ls.data().iter().zip(s.data()) {
            prop_assert!((a.exp() - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adadelta_accumulators_stay_non_negative(gs in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
        let mut x = vec![Tensor::row(&[0.5, -2.0])];
        let mut opt = AdadeltaState::new(&x, AdadeltaConfig::default());
        for g in gs {
            opt.step(&mut x, &[Tensor::row(&[g, -g])]).unwrap();
            prop_assert!(opt.sq_grad[0].data().iter().chain(opt.sq_update[0].data()).all(|&v| v >= 0.0));
            prop_assert!(x[0].is_finite());
        }
    }
}
