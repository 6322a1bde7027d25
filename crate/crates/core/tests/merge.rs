use mergedse::analysis::build_call_graph;
use mergedse::corpus;
use mergedse::ir::random::{random_function, GenConfig};
use mergedse::ir::{interpret, print_function, validate_module, Memory, Module, Opcode, Operand, Value, DEFAULT_FUEL};
use mergedse::merge::{merge_pair, verify_merge, MergeOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample() -> Module {
    corpus::get("sample").unwrap().module()
}

#[test]
fn sample_parents_behave_as_listed() {
    let m = sample();
    let mut mem = Memory::new();
    let (v, t) = interpret(&m, "f1", &[Value::I32(2), Value::I32(3), Value::I1(true)], &mut mem, DEFAULT_FUEL).unwrap();
    assert_eq!(v, Some(Value::I32(3)));
    assert_eq!(t.function("f1").unwrap().self_counts.get(Opcode::Add), 1);
    assert_eq!(t.function("f1").unwrap().self_counts.get(Opcode::Mul), 0);
    assert_eq!(t.calls_between("f1", "f3"), 1);
    let (v, t) =
        interpret(&m, "f2", &[Value::I32(2), Value::I32(3), Value::I32(7), Value::I1(true)], &mut mem, DEFAULT_FUEL)
            .unwrap();
    assert_eq!(v, Some(Value::I32(6)));
    assert_eq!(t.function("f2").unwrap().self_counts.get(Opcode::Mul), 1);
    let cg = build_call_graph(&m).unwrap();
    assert_eq!(cg.callees("f1").iter().collect::<Vec<_>>(), ["f3"]);
    assert!(cg.callees("f2").is_empty());
}

#[test]
fn sample_merge_has_the_listed_shape() {
    let mut m = sample();
    let merged = merge_pair(&m, "f1", "f2", "f12", &MergeOptions::default()).unwrap();
    let f = &merged.function;
    println!("{}", print_function(f));
    let count = |op| f.insts().filter(|i| i.opcode == op).count();
    assert_eq!(count(Opcode::Add), 1);
    assert_eq!(count(Opcode::Mul), 1);
    assert_eq!(count(Opcode::Call), 1);
    // operand select on the add (a vs d) and a condition select (sum vs not mult)
    assert_eq!(merged.stats.selects, 2);
    let params: Vec<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(params, ["a", "b", "sum", "d", "f_sel"]);
    let add = f.insts().find(|i| i.opcode == Opcode::Add).unwrap();
    let sel = f.insts().find(|i| i.opcode == Opcode::Select && Some(&i.dest.clone().unwrap()) == add.operands[0].as_reg()).unwrap();
    assert_eq!(sel.operands[1], Operand::reg("a"));
    assert_eq!(sel.operands[2], Operand::reg("d"));
    assert!(f.insts().any(|i| i.opcode == Opcode::Xor));
    m.add_function(merged.function.clone());
    validate_module(&m).unwrap();
    let r = verify_merge(&m, "f1", "f2", "f12", 200, 1);
    assert!(r.passed, "{r:?}");
    assert_eq!(r.trials, 400);
}

#[test]
fn self_merge_reproduces_the_function() {
    let mut m = sample();
    let mut copy = m.functions["f2"].clone();
    copy.name = "f2copy".into();
    m.add_function(copy);
    let merged = merge_pair(&m, "f2", "f2copy", "f22", &MergeOptions::default()).unwrap();
    assert_eq!(merged.alignment.aligned_fraction(), 1.0);
    assert_eq!(merged.stats.selects, 0);
    let mut expect = m.functions["f2"].clone();
    expect.params.push(mergedse::ir::Param { name: mergedse::ir::Reg::new("f_sel"), ty: mergedse::ir::Type::I1 });
    let mut got = merged.function.clone();
    got.name = expect.name.clone();
    got.provenance = expect.provenance;
    assert_eq!(got, expect);
}

#[test]
fn corrupted_merge_is_caught() {
    let mut m = sample();
    let mut merged = merge_pair(&m, "f1", "f2", "f12", &MergeOptions::default()).unwrap().function;
    for b in &mut merged.blocks {
        for i in &mut b.insts {
            if i.opcode == Opcode::Select && i.ty == Some(mergedse::ir::Type::I32) {
                i.operands.swap(1, 2);
            }
        }
    }
    m.add_function(merged);
    let r = verify_merge(&m, "f1", "f2", "f12", 200, 1);
    assert!(!r.passed);
    assert!(r.counterexample.is_some());
}

#[test]
fn random_pairs_merge_equivalently() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut merged_count = 0;
    for case in 0..150 {
        let cfg = GenConfig { int_params: 1 + case % 3, with_ptr: case % 2 == 0, ..GenConfig::default() };
        let cfg2 = GenConfig { int_params: 1 + (case / 3) % 3, with_ptr: case % 3 != 0, ..GenConfig::default() };
        let a = random_function("a", &cfg, &mut rng);
        let b = random_function("b", &cfg2, &mut rng);
        let mut m = Module { functions: Default::default(), entry: "a".into() };
        m.add_function(a);
        m.add_function(b);
        let merged = match merge_pair(&m, "a", "b", "ab", &MergeOptions::default()) {
            Ok(x) => x,
            Err(mergedse::merge::MergeError::BelowThreshold { .. }) => continue,
            Err(e) => panic!("case {case}: {e}"),
        };
        m.add_function(merged.function.clone());
        let r = verify_merge(&m, "a", "b", "ab", 30, case as u64);
        assert!(r.passed, "case {case}: {r:?}\n{}\n{}\n{}", print_function(&m.functions["a"]), print_function(&m.functions["b"]), print_function(&m.functions["ab"]));
        merged_count += 1;
    }
    assert!(merged_count >= 140, "{merged_count}");
}

mod properties {
    use mergedse::merge::{align_by, align_exhaustive, AlignEntry};
    use proptest::prelude::*;

    fn weight(x: &u8) -> f64 {
        if *x == 0 {
            4.0
        } else {
            1.0
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn alignment_is_optimal_and_well_formed(
            s1 in proptest::collection::vec(0u8..4, 1..=7),
            s2 in proptest::collection::vec(0u8..4, 1..=7),
            gap in prop_oneof![Just(0.0), Just(0.1), Just(0.5)],
        ) {
            let a = align_by(&s1, &s2, |x, y| x == y, weight, gap);
            let best = align_exhaustive(&s1, &s2, |x, y| x == y, weight, gap);
            prop_assert_eq!(a.score, best);
            let (mut i, mut j) = (0, 0);
            let mut score = 0.0;
            for e in &a.entries {
                match *e {
                    AlignEntry::Aligned(x, y) => {
                        prop_assert_eq!((x, y), (i, j));
                        prop_assert_eq!(s1[x], s2[y]);
                        score += weight(&s1[x]);
                        i += 1;
                        j += 1;
                    }
                    AlignEntry::Gap2(x) => {
                        prop_assert_eq!(x, i);
                        score -= gap;
                        i += 1;
                    }
                    AlignEntry::Gap1(y) => {
                        prop_assert_eq!(y, j);
                        score -= gap;
                        j += 1;
                    }
                }
            }
            prop_assert_eq!((i, j), (s1.len(), s2.len()));
            prop_assert!((score - a.score).abs() < 1e-9);
        }

        #[test]
        fn self_alignment_has_no_gaps(s in proptest::collection::vec(0u8..6, 1..40)) {
            let a = align_by(&s, &s, |x, y| x == y, weight, 0.1);
            prop_assert_eq!(a.gap_count(), 0);
            prop_assert_eq!(a.aligned_fraction(), 1.0);
        }
    }
}
