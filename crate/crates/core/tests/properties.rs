use cfcost::cf_core::{derive_admissible, division_step, expand, reconstruct, AlgorithmKind, BranchWord, Rational};
use cfcost::costs::{lattice_detect, total_cost, word_cost, CostFunction, LatticeKind, TailRule};
use cfcost::diophantine::{periodic_point, rational_word_cost, strongly_dio_report, DigitTuple, Verdict};
use cfcost::ensemble::{histogram, EnsembleSpec, Enumerator, Weighting};
use cfcost::limit_lab::{ensemble_histogram, kernel_hat, kernel_hat_quadrature, llt_interval, sandwich, CenteringSpec};
use cfcost::transfer_op::{build, OperatorConfig};
use cfcost::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn algorithm() -> impl Strategy<Value = AlgorithmKind> {
    prop_oneof![Just(AlgorithmKind::Ordinary), Just(AlgorithmKind::Centered), Just(AlgorithmKind::Odd)]
}

fn coprime_pair(max_q: u64) -> impl Strategy<Value = (u64, u64)> {
    (1..=max_q).prop_flat_map(|q| (1..=q, Just(q))).prop_filter("coprime", |&(p, q)| gcd(p, q) == 1)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(cases) }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn word(alg: AlgorithmKind, len: usize) -> impl Strategy<Value = BranchWord> {
    let branches = derive_admissible(alg, 12);
    prop::collection::vec(prop::sample::select(branches), 1..=len).prop_map(|bs| BranchWord::new(bs).unwrap())
}

fn small_hist() -> &'static Enumerator {
    static CELL: OnceLock<Enumerator> = OnceLock::new();
    CELL.get_or_init(|| Enumerator::new(&EnsembleSpec::new(400, CostFunction::log())).unwrap())
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn expansion_round_trips((p, q) in coprime_pair(1_000_000), alg in algorithm()) {
        let e = expand(Rational::new(p, q).unwrap(), alg);
        let back = reconstruct(&e).unwrap();
        prop_assert_eq!((back.p(), back.q()), (p, q));
        prop_assert_eq!(e.constraint_violations(), 0);
    }

    #[test]
    fn integer_division_reaches_zero_in_depth_steps((p, q) in coprime_pair(100_000), alg in algorithm()) {
        let e = expand(Rational::new(p, q).unwrap(), alg);
        let (mut a, mut b, mut steps) = (p, q, 0usize);
        let mut digits = Vec::new();
        loop {
            let (m, _, r) = division_step(alg, a, b);
            digits.push(m);
            steps += 1;
            if r == 0 {
                break;
            }
            (a, b) = (r, a);
        }
        prop_assert_eq!(steps, e.depth());
        prop_assert_eq!(digits, e.digits);
    }

    #[test]
    fn branch_words_are_unimodular(w in algorithm().prop_flat_map(|a| word(a, 10))) {
        prop_assert_eq!(w.determinant().abs(), 1);
    }

    #[test]
    fn long_ordinary_words_contract(w in word(AlgorithmKind::Ordinary, 12)) {
        prop_assume!(w.len() >= 2);
        let rate = w.sup_derivative().powf(1.0 / w.len() as f64);
        prop_assert!(rate < 1.0, "rate {rate}");
    }

    #[test]
    fn word_cost_is_additive(u in word(AlgorithmKind::Ordinary, 6), v in word(AlgorithmKind::Ordinary, 6)) {
        let c = CostFunction::log();
        let uv = u.concat(&v).unwrap();
        let lhs = word_cost(&uv, &c).unwrap();
        let rhs = word_cost(&u, &c).unwrap() + word_cost(&v, &c).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn unit_cost_counts_steps((p, q) in coprime_pair(1_000_000), alg in algorithm()) {
        let e = expand(Rational::new(p, q).unwrap(), alg);
        prop_assert_eq!(total_cost(&e, &CostFunction::one()).unwrap(), e.depth() as f64);
    }

    #[test]
    fn lattice_table_recovers_span_and_shift(span in 1u32..6, shift in 0u32..5, picks in prop::collection::vec(0u32..7, 8)) {
        let (span, shift) = (span as f64 * 0.5, shift as f64 * 0.25);
        prop_assume!(shift < span);
        let mut values: Vec<f64> = picks.iter().map(|&k| shift + span * k as f64).collect();
        values[0] = shift;
        values[1] = shift + span;
        let c = CostFunction::table("t", values.clone(), TailRule::Constant { value: shift }).unwrap();
        match lattice_detect(&c, values.len() as u64 + 4).unwrap().kind {
            LatticeKind::Lattice { span: l, shift: l0 } => {
                prop_assert!((l - span).abs() < 1e-12, "span {l} vs {span}");
                prop_assert!((l0 - shift).abs() < 1e-12, "shift {l0} vs {shift}");
            }
            other => prop_assert!(false, "classified as {other:?}"),
        }
    }

    #[test]
    fn histogram_blocks_merge_in_any_order(cuts in prop::collection::btree_set(2u64..400, 1..6), rev in any::<bool>()) {
        let e = small_hist();
        let mut bounds: Vec<u64> = std::iter::once(1).chain(cuts.iter().copied()).chain([401]).collect();
        bounds.dedup();
        let mut blocks: Vec<_> = bounds.windows(2).map(|w| e.histogram_range(w[0], w[1] - 1, |_| 1)).collect();
        if rev {
            blocks.reverse();
        }
        let merged = blocks.iter().skip(1).fold(blocks[0].clone(), |acc, b| acc.merge(b));
        let whole = e.histogram(Weighting::Plain);
        prop_assert_eq!(merged.entries, whole.entries);
        prop_assert_eq!(merged.total, whole.total);
    }

    #[test]
    fn char_fn_is_bounded(tau in -50.0f64..50.0) {
        let h = small_hist().histogram(Weighting::Plain);
        prop_assert!(h.char_fn(tau).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn unit_cost_char_fn_is_2pi_periodic(tau in -10.0f64..10.0, k in -3i32..=3) {
        static H: OnceLock<cfcost::ensemble::CostHistogram> = OnceLock::new();
        let h = H.get_or_init(|| histogram(&EnsembleSpec::new(300, CostFunction::one())).unwrap());
        let shifted = h.char_fn(tau + 2.0 * PI * k as f64);
        prop_assert!((shifted - h.char_fn(tau)).norm() < 1e-11);
    }

    #[test]
    fn kernel_transform_matches_quadrature(delta in 0.05f64..2.0, tau in -8.0f64..8.0) {
        prop_assert!((kernel_hat_quadrature(delta, tau) - kernel_hat(delta, tau)).abs() < 1e-10);
    }

    #[test]
    fn sandwich_brackets_indicator(a in -2.0f64..0.0, width in 0.2f64..3.0, smooth in 0.01f64..0.2) {
        let b = a + width;
        prop_assume!(2.0 * smooth < width);
        let (lo, hi) = sandwich(a, b, smooth).unwrap();
        for i in 0..=2000 {
            let y = a - 1.0 + (width + 2.0) * i as f64 / 2000.0;
            let chi = if y > a && y <= b { 1.0 } else { 0.0 };
            prop_assert!(lo.eval(y) <= chi + 1e-15 && chi <= hi.eval(y) + 1e-15, "y={y}");
        }
        prop_assert!((lo.integral() - width).abs() <= 4.0 * smooth.sqrt());
        prop_assert!((hi.integral() - width).abs() <= 4.0 * smooth.sqrt());
    }

    #[test]
    fn llt_target_peaks_at_zero(x in -4.0f64..4.0) {
        static H: OnceLock<cfcost::ensemble::CostHistogram> = OnceLock::new();
        let h = H.get_or_init(|| ensemble_histogram(&EnsembleSpec::new(200, CostFunction::one()), None).unwrap());
        let at = |x| llt_interval(h, &CenteringSpec::new(x, 200, 0.84, 0.72).unwrap(), -0.5, 0.5).unwrap().target;
        prop_assert!(at(x) <= at(0.0));
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn periodic_points_are_fixed_exactly(digits in prop::collection::vec(1u64..=6, 1..=4)) {
        let t = DigitTuple::new(digits).unwrap();
        prop_assume!(t.is_primitive());
        let orbit = periodic_point(&t).unwrap();
        prop_assert!(orbit.verify_fixed().unwrap());
        prop_assert!((orbit.a - orbit.a_word).abs() < 1e-12);
        prop_assert!((orbit.a - orbit.a_mobius).abs() < 1e-12);
    }

    #[test]
    fn orbit_cost_matches_rational_with_same_digits(digits in prop::collection::vec(1u64..=6, 1..=4)) {
        let t = DigitTuple::new(digits).unwrap();
        prop_assume!(t.is_primitive());
        let c = CostFunction::log();
        if let Some(v) = rational_word_cost(&t, &c).unwrap() {
            prop_assert!((v - periodic_point(&t).unwrap().cost(&c).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_costs_always_fail(value in 0.5f64..3.0, extra in prop::collection::vec(1u64..=5, 2..=3)) {
        let tuples = [vec![1], vec![2], vec![3], extra].map(|d| DigitTuple::new(d).unwrap());
        prop_assume!(tuples[3].is_primitive() && (0..3).all(|j| !tuples[j].same_orbit(&tuples[3])));
        let rep = strongly_dio_report(&tuples, &CostFunction::constant(value).unwrap(), 3.0, 100).unwrap();
        prop_assert!(rep.l.iter().all(|l| l.value == 0.0));
        prop_assert_eq!(rep.verdict, Verdict::Fail);
        for j in 0..3 {
            for k in 0..3 {
                prop_assert_eq!(rep.l_tilde[j][k], -rep.l_tilde[k][j]);
            }
        }
    }
}

fn unit_operator() -> &'static cfcost::transfer_op::DiscretizedOperator {
    static CELL: OnceLock<cfcost::transfer_op::DiscretizedOperator> = OnceLock::new();
    CELL.get_or_init(|| build(Complex64::new(1.0, 0.0), 0.0, &CostFunction::one(), &OperatorConfig::default()).unwrap())
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn operator_preserves_lebesgue_integral(coeffs in prop::collection::vec(-1.0f64..1.0, 4)) {
        let op = unit_operator();
        let u: Vec<Complex64> = op
            .grid
            .nodes
            .iter()
            .map(|&x| Complex64::new(coeffs.iter().enumerate().map(|(k, c)| c * x.powi(k as i32)).sum::<f64>() + 2.0, 0.0))
            .collect();
        let before = op.integrate(&u);
        let after = op.integrate(&op.apply(&u));
        prop_assert!((before - after).norm() < 1e-9 * before.norm().max(1.0), "{before} vs {after}");
    }
}
