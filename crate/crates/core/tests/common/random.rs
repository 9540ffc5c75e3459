use gosvm::qp::QpProblem;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random strictly convex QP with a known feasible point, `n_var ≤ 6` and at
/// most 8 constraints in total (inequalities, equalities and finite bounds).
pub fn convex_qp(rng: &mut impl Rng) -> QpProblem {
    let n = rng.random_range(1..=6);
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = b.transpose() * &b + DMatrix::identity(n, n) * 0.1;
    let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));

    let total = rng.random_range(0..=8usize);
    let n_eq = if n > 1 {
        rng.random_range(0..=total.min(n - 1).min(2))
    } else {
        0
    };
    let mut remaining = total - n_eq;
    let n_bounds = rng.random_range(0..=remaining.min(n));
    remaining -= n_bounds;
    let n_ineq = remaining;

    let a = DMatrix::from_fn(n_ineq, n, |_, _| rng.random_range(-1.0..1.0));
    // A mix of tight and loose rows so some constraints bind.
    let slack = DVector::from_fn(n_ineq, |_, _| rng.random_range(0.0..0.5));
    let bvec = &a * &x0 + slack;
    let e = DMatrix::from_fn(n_eq, n, |_, _| rng.random_range(-1.0..1.0));
    let d = &e * &x0;

    let mut p = QpProblem::new(q, c).with_ineq(a, bvec).with_eq(e, d);
    if n_bounds > 0 {
        let mut lower = DVector::from_element(n, f64::NEG_INFINITY);
        let mut upper = DVector::from_element(n, f64::INFINITY);
        for j in 0..n_bounds {
            if rng.random_bool(0.5) {
                lower[j] = x0[j] - rng.random_range(0.0..0.5);
            } else {
                upper[j] = x0[j] + rng.random_range(0.0..0.5);
            }
        }
        p = p.with_bounds(Some(lower), Some(upper));
    }
    p
}

/// Noisy linearly separable-ish cloud: label from the sign of a fixed
/// direction plus noise, oracle the (distinct) distance to the boundary.
/// Both classes are always present.
pub fn labeled_cloud(rng: &mut impl Rng, n: usize, dim: usize, noise: f64) -> gosvm::data::Dataset {
    use gosvm::data::{Dataset, Label, LabeledSample};
    assert!(n >= 2);
    let dir: Vec<f64> = (0..dim).map(|k| 1.0 / (k + 1) as f64).collect();
    let samples = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s: f64 = x.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>()
                + noise * rng.random_range(-1.0..1.0);
            let label = match i {
                0 => Label::Positive,
                1 => Label::Negative,
                _ if s > 0.0 => Label::Positive,
                _ => Label::Negative,
            };
            let oracle = s.abs() + 1e-6 * rng.random::<f64>();
            LabeledSample::new(x, label, Some(oracle))
        })
        .collect();
    Dataset::new(samples, dim).unwrap()
}

/// The same samples in a random order.
pub fn shuffled(
    rng: &mut impl Rng,
    ds: &gosvm::data::Dataset,
) -> (gosvm::data::Dataset, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(rng);
    (ds.subset(&idx), idx)
}
