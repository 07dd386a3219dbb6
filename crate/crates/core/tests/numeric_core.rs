mod common;

use proptest::prelude::*;

use dppn::autodiff::{Elementwise, Graph};
use dppn::gradcheck::finite_diff_check;
use dppn::nn::{Binder, Dense};
use dppn::optim::{adam_step, AdamState};
use dppn::pcc::{category_gate, CategoryPrototypeSet};
use dppn::tensor::Tensor;

use common::{randn, rng};

const TOL: f64 = 1e-5;
const H: f64 = 1e-5;

#[test]
fn matmul_hand_values() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());
    let b = g.constant(Tensor::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]).unwrap());
    let i = g.constant(Tensor::identity(2));
    let z = g.constant(Tensor::zeros(&[2, 3]));
    let ab = g.matmul(a, b).unwrap();
    assert_eq!(g.value(ab).data(), &[19.0, 22.0, 43.0, 50.0]);
    let ia = g.matmul(i, a).unwrap();
    assert_eq!(g.value(ia), g.value(a));
    let az = g.matmul(a, z).unwrap();
    assert!(g.value(az).data().iter().all(|&v| v == 0.0));
    let e = g.matmul(a, z).and_then(|_| g.matmul(z, a)).unwrap_err();
    assert!(
        e.to_string().contains("[2, 3]") && e.to_string().contains("[2, 2]"),
        "{e}"
    );
}

#[test]
fn matmul_matches_loop_oracle() {
    let (a, b) = (randn(&[4, 5], 1), randn(&[5, 3], 2));
    let mut g = Graph::new();
    let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
    let p = g.matmul(va, vb).unwrap();
    assert!(g.value(p).max_abs_diff(&common::matmul(&a, &b)) < 1e-12);
}

#[test]
fn softmax_hand_values() {
    let mut g = Graph::new();
    let z = g.constant(Tensor::zeros(&[4, 2]));
    let s = g.softmax_cols(z).unwrap();
    assert!(g.value(s).data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    let c = g.constant(Tensor::column_vector(vec![0.0, 3f64.ln()]).unwrap());
    let s = g.softmax_cols(c).unwrap();
    assert!((g.value(s).data()[0] - 0.25).abs() < 1e-15);
    assert!((g.value(s).data()[1] - 0.75).abs() < 1e-15);
    let big = g.constant(Tensor::column_vector(vec![1e6, 1e6]).unwrap());
    let s = g.softmax_cols(big).unwrap();
    assert_eq!(g.value(s).data(), &[0.5, 0.5]);
}

#[test]
fn concat_and_elementwise_definitions() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::column_vector(vec![1.0, 2.0]).unwrap());
    let b = g.constant(Tensor::column_vector(vec![3.0, 4.0]).unwrap());
    let c = g.concat_cols(&[a, b]).unwrap();
    assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(g.value(c).shape(), &[4, 1]);
    let single = g.concat_cols(&[a]).unwrap();
    assert_eq!(g.value(single), g.value(a));
    assert!(g.concat_cols(&[]).is_err());
    let odd = g.constant(Tensor::column_vector(vec![1.0]).unwrap());
    assert!(g.concat_cols(&[a, odd]).is_err());

    let x = g.constant(Tensor::column_vector(vec![-1.0, 0.0, 2.0]).unwrap());
    let r = g.relu(x).unwrap();
    assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
    let zero = g.constant(Tensor::scalar(0.0));
    let s = g.sigmoid(zero).unwrap();
    assert_eq!(g.value(s).item(), 0.5);
    let ones = g.constant(Tensor::filled(&[3, 1], 1.0));
    let m = g.elementwise(Elementwise::Mul, x, Some(ones)).unwrap();
    assert_eq!(g.value(m), g.value(x));
    assert!(g.add(x, a).is_err());
}

#[test]
fn sq_l2_and_cross_entropy_hand_values() {
    let mut g = Graph::new();
    let o = g.constant(Tensor::column_vector(vec![0.0, 0.0]).unwrap());
    let t = g.constant(Tensor::column_vector(vec![3.0, 4.0]).unwrap());
    let d = g.sq_l2(o, t).unwrap();
    assert_eq!(g.value(d).item(), 25.0);
    let d0 = g.sq_l2(t, t).unwrap();
    assert_eq!(g.value(d0).item(), 0.0);

    let l = g.constant(Tensor::column_vector(vec![1.0, 2.0, 3.0]).unwrap());
    let ce = g.cross_entropy_logits(l, 2).unwrap();
    assert!((g.value(ce).item() - common::cross_entropy(&[1.0, 2.0, 3.0], 2)).abs() < 1e-12);
    assert!((g.value(ce).item() - 0.4076).abs() < 5e-5);
    let u = g.constant(Tensor::filled(&[5, 1], 0.3));
    let ce = g.cross_entropy_logits(u, 1).unwrap();
    assert!((g.value(ce).item() - 5f64.ln()).abs() < 1e-12);
    let peak = g.constant(Tensor::column_vector(vec![0.0, 1e6, 0.0]).unwrap());
    let ce = g.cross_entropy_logits(peak, 1).unwrap();
    assert!(g.value(ce).item().abs() < 1e-12);
    assert!(g.cross_entropy_logits(l, 3).is_err());
}

#[test]
fn backward_basics() {
    let mut g = Graph::new();
    let w = g.param(Tensor::column_vector(vec![3.0]).unwrap());
    let unused = g.param(Tensor::column_vector(vec![1.0, 2.0]).unwrap());
    let z = g.constant(Tensor::column_vector(vec![0.0]).unwrap());
    let loss = g.sq_l2(w, z).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(w).data(), &[6.0]);
    assert_eq!(grads.get(unused).data(), &[0.0, 0.0]);
    assert!(g.backward(unused).is_err());
}

#[test]
fn shared_parameter_gets_summed_gradient() {
    let (w0, t1, t2) = (randn(&[3, 1], 3), randn(&[3, 1], 4), randn(&[3, 1], 5));
    let grad_of = |paths: &[&Tensor]| {
        let mut g = Graph::new();
        let w = g.param(w0.clone());
        let terms: Vec<_> = paths
            .iter()
            .map(|t| {
                let c = g.constant((*t).clone());
                g.sq_l2(w, c).unwrap()
            })
            .collect();
        let l = g.sum(&terms).unwrap();
        g.backward(l).unwrap().get(w)
    };
    let both = grad_of(&[&t1, &t2]);
    let (g1, g2) = (grad_of(&[&t1]), grad_of(&[&t2]));
    let sum: Vec<f64> = g1
        .data()
        .iter()
        .zip(g2.data())
        .map(|(a, b)| a + b)
        .collect();
    for (a, b) in both.data().iter().zip(sum) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn adam_hand_evaluation() {
    let mut p = Tensor::column_vector(vec![1.0, -2.0]).unwrap();
    let mut st = AdamState::new(&[2, 1], 0.01);
    adam_step(
        &mut p,
        &Tensor::column_vector(vec![0.0, 0.0]).unwrap(),
        &mut st,
    )
    .unwrap();
    assert_eq!(p.data(), &[1.0, -2.0]);

    let mut st = AdamState::new(&[2, 1], 0.01);
    adam_step(
        &mut p,
        &Tensor::column_vector(vec![0.5, -3.0]).unwrap(),
        &mut st,
    )
    .unwrap();
    // Step 1: m̂ = g, v̂ = g², so the move is lr·g/(|g| + ε).
    let expect = [
        1.0 - 0.01 * 0.5 / (0.5 + 1e-8),
        -2.0 + 0.01 * 3.0 / (3.0 + 1e-8),
    ];
    for (a, b) in p.data().iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
    st.step = 5;
    adam_step(
        &mut p,
        &Tensor::column_vector(vec![0.1, 0.1]).unwrap(),
        &mut st,
    )
    .unwrap();
    assert_eq!(st.step, 6);
    assert!(adam_step(&mut p, &Tensor::zeros(&[3, 1]), &mut st).is_err());
}

#[test]
fn per_op_gradients_match_finite_differences() {
    // softmax_cols
    let target = randn(&[4, 3], 20);
    let err = finite_diff_check(
        |g, x| {
            let s = g.softmax_cols(x)?;
            let t = g.constant(target.clone());
            g.sq_l2(s, t)
        },
        &randn(&[4, 3], 21),
        H,
    )
    .unwrap();
    assert!(err < TOL, "softmax_cols {err}");

    // concat of two halves of the input
    let t = randn(&[8, 1], 22);
    let err = finite_diff_check(
        |g, x| {
            let a = g.column(x, 0)?;
            let b = g.column(x, 1)?;
            let c = g.concat_cols(&[b, a])?;
            let t = g.constant(t.clone());
            g.sq_l2(c, t)
        },
        &randn(&[4, 2], 23),
        H,
    )
    .unwrap();
    assert!(err < TOL, "concat {err}");

    // sq_l2 on both arguments
    let other = randn(&[5, 1], 24);
    let err = finite_diff_check(
        |g, x| {
            let o = g.constant(other.clone());
            g.sq_l2(o, x)
        },
        &randn(&[5, 1], 25),
        H,
    )
    .unwrap();
    assert!(err < TOL, "sq_l2 {err}");

    // cross-entropy
    let err =
        finite_diff_check(|g, x| g.cross_entropy_logits(x, 2), &randn(&[4, 1], 26), H).unwrap();
    assert!(err < TOL, "cross_entropy {err}");

    // f_ar: two dense layers with a relu, gradient w.r.t. the input columns
    let mut r = rng(27);
    let (l1, l2) = (Dense::init(6, 6, &mut r), Dense::init(6, 6, &mut r));
    let t = randn(&[6, 3], 28);
    let err = finite_diff_check(
        |g, x| {
            let (v1, v2) = {
                let mut b = Binder::new(g);
                (l1.bind(&mut b, "l1"), l2.bind(&mut b, "l2"))
            };
            let h = v1.apply(g, x)?;
            let h = g.relu(h)?;
            let o = v2.apply(g, h)?;
            let t = g.constant(t.clone());
            g.sq_l2(o, t)
        },
        &randn(&[6, 3], 29),
        H,
    )
    .unwrap();
    assert!(err < TOL, "f_ar {err}");

    // f_cs: channel gate applied to the prototypes it is computed from
    let (s1, s2) = (Dense::init(8, 4, &mut r), Dense::init(4, 8, &mut r));
    let t = randn(&[8, 3], 30);
    let err = finite_diff_check(
        |g, x| {
            let vars = {
                let mut b = Binder::new(g);
                (s1.bind(&mut b, "s1"), s2.bind(&mut b, "s2"))
            };
            let c = CategoryPrototypeSet::new(g, x, 0)?;
            let gamma = category_gate(g, &c, &vars)?;
            let gated = g.mul_col(x, gamma)?;
            let t = g.constant(t.clone());
            g.sq_l2(gated, t)
        },
        &randn(&[8, 3], 31),
        H,
    )
    .unwrap();
    assert!(err < TOL, "f_cs {err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_columns_sum_to_one(rows in 1usize..9, cols in 1usize..6, seed in any::<u64>(), scale in 0.1f64..50.0) {
        let x = randn(&[rows, cols], seed).map(|v| v * scale);
        let mut g = Graph::new();
        let v = g.constant(x);
        let s = g.softmax_cols(v).unwrap();
        let s = g.value(s);
        for j in 0..cols {
            let col = s.column(j);
            prop_assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(col.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn concat_gradient_slices_back(parts in 1usize..5, d in 1usize..5, seed in any::<u64>()) {
        let upstream = randn(&[parts * d, 1], seed);
        let mut g = Graph::new();
        let leaves: Vec<_> = (0..parts).map(|i| g.param(randn(&[d, 1], seed ^ (i as u64 + 1)))).collect();
        let c = g.concat_cols(&leaves).unwrap();
        let u = g.constant(upstream.clone());
        // d/dc of <c, u> is u, so each leaf must receive its slice of u.
        let prod = g.mul(c, u).unwrap();
        let ones = g.constant(Tensor::filled(&[1, parts * d], 1.0));
        let l = g.matmul(ones, prod).unwrap();
        let grads = g.backward(l).unwrap();
        for (i, &leaf) in leaves.iter().enumerate() {
            let got = grads.get(leaf);
            prop_assert_eq!(got.data(), &upstream.data()[i * d..(i + 1) * d]);
        }
    }

    #[test]
    fn adam_zero_gradient_is_bit_identical(seed in any::<u64>(), steps in 1usize..5) {
        let p0 = randn(&[3, 2], seed);
        let mut p = p0.clone();
        let mut st = AdamState::new(&[3, 2], 1e-3);
        for _ in 0..steps {
            adam_step(&mut p, &Tensor::zeros(&[3, 2]), &mut st).unwrap();
        }
        prop_assert_eq!(p, p0);
    }

    #[test]
    fn sq_l2_is_symmetric(seed in any::<u64>(), n in 1usize..8) {
        let (a, b) = (randn(&[n, 1], seed), randn(&[n, 1], seed.wrapping_add(1)));
        let mut g = Graph::new();
        let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
        let ab = g.sq_l2(va, vb).unwrap();
        let ba = g.sq_l2(vb, va).unwrap();
        prop_assert_eq!(g.value(ab).item(), g.value(ba).item());
        prop_assert!((g.value(ab).item() - common::sq_l2(a.data(), b.data())).abs() < 1e-10);
    }
}
