// SPDX-License-Identifier: Apache-2.0
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pud_core::codegen::SubarrayConfig;
use pud_core::logic::{eval_netlist, LogicFn};
use pud_core::ops::*;
use pud_core::synthesis::Effort;
use pud_core::Error;

fn mask(w: usize) -> u64 {
    if w == 64 {
        u64::MAX
    } else {
        (1 << w) - 1
    }
}

/// Plain host arithmetic, written separately from the library's oracle.
fn reference(spec: &OpSpec, x: &[u64]) -> (u64, Option<bool>) {
    let w = spec.width;
    let m = mask(w);
    let (a, b) = (x[0], x.get(1).copied().unwrap_or(0));
    match spec.kind {
        OpKind::AndN => (x.iter().fold(m, |acc, v| acc & v), None),
        OpKind::OrN => (x.iter().fold(0, |acc, v| acc | v), None),
        OpKind::XorN => (x.iter().fold(0, |acc, v| acc ^ v), None),
        OpKind::Eq => ((a == b) as u64, None),
        OpKind::Neq => ((a != b) as u64, None),
        OpKind::Gt => ((a > b) as u64, None),
        OpKind::Ge => ((a >= b) as u64, None),
        OpKind::Max => (a.max(b), None),
        OpKind::Min => (a.min(b), None),
        OpKind::Add => {
            let s = a as u128 + b as u128;
            ((s as u64) & m, Some(s >> w & 1 == 1))
        }
        OpKind::Sub => (a.wrapping_sub(b) & m, Some(a < b)),
        OpKind::Mul => (((a as u128 * b as u128) as u64) & m, None),
        OpKind::Div => (if b == 0 { m } else { a / b }, None),
        OpKind::IfThenElse => (if x[0] == 1 { x[1] } else { x[2] }, None),
        OpKind::Bitcount => (a.count_ones() as u64, None),
        OpKind::Relu => (if a >> (w - 1) & 1 == 1 { 0 } else { a }, None),
    }
}

fn cfg() -> SubarrayConfig {
    SubarrayConfig::with_rows(512, 4096).unwrap()
}

/// Every operand combination of `spec`, one per lane.
fn all_lanes(spec: &OpSpec) -> Vec<Vec<u64>> {
    let widths = spec.operand_widths();
    let total: usize = widths.iter().sum();
    let mut lanes = vec![Vec::new(); widths.len()];
    for k in 0u64..1 << total {
        let mut rest = k;
        for (i, &w) in widths.iter().enumerate() {
            lanes[i].push(rest & mask(w));
            rest >>= w;
        }
    }
    lanes
}

fn random_lanes(spec: &OpSpec, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u64>> {
    spec.operand_widths()
        .iter()
        .map(|&w| (0..count).map(|_| rng.gen::<u64>() & mask(w)).collect())
        .collect()
}

fn check_lanes(op: &CompiledOp, lanes: &[Vec<u64>], cfg: &SubarrayConfig) {
    let out = execute_op(op, lanes, cfg).unwrap();
    for i in 0..lanes[0].len() {
        let args: Vec<u64> = lanes.iter().map(|l| l[i]).collect();
        let (value, flag) = reference(&op.spec, &args);
        assert_eq!(
            out.values[i], value,
            "{} {:?} on {args:?}",
            op.spec, op.effort
        );
        assert_eq!(
            out.flags.as_ref().map(|f| f[i] == 1),
            flag,
            "{} flag on {args:?}",
            op.spec
        );
        assert_eq!(oracle(&op.spec, &args), Lane { value, flag });
    }
}

#[test]
fn sixteen_kinds() {
    assert_eq!(OpKind::ALL.len(), 16);
    for k in OpKind::ALL {
        assert_eq!(k.name().parse::<OpKind>().unwrap(), k);
    }
    assert!(matches!(
        "nosuch".parse::<OpKind>(),
        Err(Error::Unsupported(_))
    ));
    assert!(OpSpec::new(OpKind::Add, 0).is_err());
    assert!(OpSpec::new(OpKind::Add, 65).is_err());
    assert!(OpSpec::with_inputs(OpKind::AndN, 4, 1).is_err());
    assert_eq!(
        OpSpec::new(OpKind::XorN, 4).unwrap().n_inputs,
        DEFAULT_N_INPUTS
    );
}

#[test]
fn exhaustive_small_widths() {
    let cfg = cfg();
    for width in 1..=4 {
        for kind in OpKind::ALL {
            let spec = OpSpec::new(kind, width).unwrap();
            let lanes = all_lanes(&spec);
            for effort in [Effort::None, Effort::Fixpoint] {
                let op = compile_op(&spec, &cfg, effort).unwrap();
                assert!(op.verification.exhaustive);
                check_lanes(&op, &lanes, &cfg);
            }
        }
    }
}

#[test]
fn n_input_counts() {
    let cfg = cfg();
    for kind in [OpKind::AndN, OpKind::OrN, OpKind::XorN] {
        for n in 2..=5 {
            let spec = OpSpec::with_inputs(kind, 2, n).unwrap();
            let op = compile_op(&spec, &cfg, Effort::Fixpoint).unwrap();
            check_lanes(&op, &all_lanes(&spec), &cfg);
        }
    }
    // 4-input AND at width 1: one lane per assignment
    let spec = OpSpec::with_inputs(OpKind::AndN, 1, 4).unwrap();
    let op = compile_op(&spec, &cfg, Effort::Fixpoint).unwrap();
    let out = execute_op(&op, &all_lanes(&spec), &cfg).unwrap();
    assert_eq!(out.values.iter().filter(|&&v| v == 1).count(), 1);
    assert_eq!(out.values[15], 1);
}

#[test]
fn documented_examples() {
    let cfg = SubarrayConfig::with_rows(512, 64).unwrap();
    let run = |kind, width, lanes: &[&[u64]]| {
        let spec = OpSpec::new(kind, width).unwrap();
        let op = compile_op(&spec, &cfg, Effort::Fixpoint).unwrap();
        execute_op(
            &op,
            &lanes.iter().map(|l| l.to_vec()).collect::<Vec<_>>(),
            &cfg,
        )
        .unwrap()
    };
    let add = run(OpKind::Add, 4, &[&[5, 0, 15], &[6, 0, 1]]);
    assert_eq!(add.values, [11, 0, 0]);
    assert_eq!(add.flags, Some(vec![0, 0, 1]));
    assert_eq!(
        run(OpKind::IfThenElse, 8, &[&[1, 0], &[9, 9], &[4, 4]]).values,
        [9, 4]
    );
    assert_eq!(run(OpKind::Max, 4, &[&[3, 12], &[7, 2]]).values, [7, 12]);
    assert_eq!(run(OpKind::Eq, 4, &[&[7], &[7]]).values, [1]);
    assert_eq!(run(OpKind::Relu, 4, &[&[0b1010]]).values, [0]);
    assert_eq!(run(OpKind::Bitcount, 8, &[&[0xff]]).values, [8]);
    assert_eq!(run(OpKind::Div, 4, &[&[9], &[0]]).values, [15]);
    assert_eq!(run(OpKind::Sub, 4, &[&[3], &[5]]).values, [14]);

    let x3 = OpSpec::new(OpKind::XorN, 1).unwrap();
    assert_eq!(oracle(&x3, &[1, 1, 1]).value, 1);
    assert_eq!(
        oracle(&OpSpec::new(OpKind::Div, 4).unwrap(), &[9, 0]).value,
        15
    );
    assert_eq!(
        oracle(&OpSpec::new(OpKind::Sub, 4).unwrap(), &[3, 5]),
        Lane {
            value: 14,
            flag: Some(true)
        }
    );
}

#[test]
fn netlists_match_reference() {
    for kind in OpKind::ALL {
        let spec = OpSpec::new(kind, 3).unwrap();
        let n = build_netlist(&spec);
        assert_eq!(n.input_count(), spec.input_bits());
        assert_eq!(n.output_count(), spec.output_bits());
        let lanes = all_lanes(&spec);
        for i in 0..lanes[0].len() {
            let args: Vec<u64> = lanes.iter().map(|l| l[i]).collect();
            let bits: Vec<bool> = args
                .iter()
                .zip(spec.operand_widths())
                .flat_map(|(&v, w)| (0..w).map(move |b| v >> b & 1 == 1))
                .collect();
            let out = eval_netlist(&n, &bits).unwrap();
            let value: u64 = out[..spec.value_width()]
                .iter()
                .enumerate()
                .map(|(b, &x)| (x as u64) << b)
                .sum();
            let (want, flag) = reference(&spec, &args);
            assert_eq!(value, want, "{spec} {args:?}");
            assert_eq!(spec.has_flag().then(|| out[spec.value_width()]), flag);
        }
    }
}

#[test]
fn mul8_random() {
    let cfg = cfg();
    let op = compile_op(
        &OpSpec::new(OpKind::Mul, 8).unwrap(),
        &cfg,
        Effort::Fixpoint,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    check_lanes(&op, &random_lanes(&op.spec, 4096, &mut rng), &cfg);
}

#[test]
fn width8_random_all_kinds() {
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for kind in OpKind::ALL {
        let op = compile_op(&OpSpec::new(kind, 8).unwrap(), &cfg, Effort::Fixpoint).unwrap();
        assert_eq!(
            op.verification.exhaustive,
            op.spec.input_bits() <= EXHAUSTIVE_BITS
        );
        check_lanes(&op, &random_lanes(&op.spec, 4096, &mut rng), &cfg);
    }
}

#[test]
fn wide_naive_programs() {
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(1632);
    for width in [16, 32] {
        for kind in OpKind::ALL {
            let op = compile_op(&OpSpec::new(kind, width).unwrap(), &cfg, Effort::None).unwrap();
            let bits = op.spec.input_bits();
            let want = if bits <= EXHAUSTIVE_BITS {
                Verification {
                    lanes: 1 << bits,
                    exhaustive: true,
                }
            } else {
                Verification {
                    lanes: SAMPLED_LANES,
                    exhaustive: false,
                }
            };
            assert_eq!(op.verification, want);
            check_lanes(&op, &random_lanes(&op.spec, 512, &mut rng), &cfg);
        }
    }
}

#[test]
fn lane_errors() {
    let cfg = SubarrayConfig::with_rows(512, 8).unwrap();
    let op = compile_op(&OpSpec::new(OpKind::Add, 4).unwrap(), &cfg, Effort::None).unwrap();
    assert!(matches!(
        execute_op(&op, &[vec![1; 9], vec![1; 9]], &cfg),
        Err(Error::Capacity(_))
    ));
    assert!(matches!(
        execute_op(&op, &[vec![1; 3], vec![1; 2]], &cfg),
        Err(Error::Data(_))
    ));
    assert!(matches!(
        execute_op(&op, &[vec![1]], &cfg),
        Err(Error::Data(_))
    ));
    assert!(matches!(
        execute_op(&op, &[vec![16], vec![1]], &cfg),
        Err(Error::Data(_))
    ));
    let empty = execute_op(&op, &[vec![], vec![]], &cfg).unwrap();
    assert!(empty.values.is_empty());

    let tiny = SubarrayConfig::with_rows(20, 8).unwrap();
    let spec = OpSpec::new(OpKind::Mul, 8).unwrap();
    assert!(matches!(
        compile_op(&spec, &tiny, Effort::None),
        Err(Error::Capacity(_))
    ));
}

#[test]
fn compilation_is_deterministic() {
    let cfg = SubarrayConfig::default();
    for kind in [OpKind::Add, OpKind::Div, OpKind::Bitcount] {
        let spec = OpSpec::new(kind, 6).unwrap();
        let a = compile_op(&spec, &cfg, Effort::Fixpoint).unwrap();
        let b = compile_op(&spec, &cfg, Effort::Fixpoint).unwrap();
        assert_eq!(a.program.to_string(), b.program.to_string());
        assert_eq!(a.program.op, kind.name());
        assert!(a.activations() <= compile_op(&spec, &cfg, Effort::None).unwrap().activations());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lanes_are_independent(kind_ix in 0usize..16, width in 1usize..=6, count in 1usize..=20, seed in any::<u64>()) {
        let cfg = SubarrayConfig::with_rows(512, 64).unwrap();
        let spec = OpSpec::new(OpKind::ALL[kind_ix], width).unwrap();
        let op = compile_op(&spec, &cfg, Effort::Single).unwrap();
        let lanes = random_lanes(&spec, count, &mut ChaCha8Rng::seed_from_u64(seed));
        let together = execute_op(&op, &lanes, &cfg).unwrap();
        for i in 0..count {
            let one: Vec<Vec<u64>> = lanes.iter().map(|l| vec![l[i]]).collect();
            let alone = execute_op(&op, &one, &cfg).unwrap();
            prop_assert_eq!(alone.values[0], together.values[i]);
            prop_assert_eq!(alone.flags.map(|f| f[0]), together.flags.as_ref().map(|f| f[i]));
            prop_assert_eq!(alone.report, together.report);
        }
    }
}
