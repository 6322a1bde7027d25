use std::collections::BTreeSet;

use mergedse::analysis::{
    build_call_graph, extract_loops, extract_loops_with_report, fingerprint, natural_loops, rank_pairs, similarity,
    Fingerprint, MIN_PAIR_SIZE,
};
use mergedse::corpus::PROGRAMS;
use mergedse::ir::random::{random_args, random_function, GenConfig};
use mergedse::ir::{interpret, parse_module, validate_module, Memory, Module, Provenance, Type, DEFAULT_FUEL, NUM_OPCODES};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn sample_call_graph() {
    let m = mergedse::corpus::get("sample").unwrap().module();
    let cg = build_call_graph(&m).unwrap();
    assert_eq!(cg.callees("f1"), &set(&["f3"]));
    assert!(cg.callees("f2").is_empty());
    assert!(cg.callees("f3").is_empty());
    assert_eq!(cg.callees("main"), &set(&["f1", "f2", "f3"]));
    assert_eq!(cg.direct_callees("main"), &set(&["f1", "f2"]));
}

#[test]
fn chain_closure_and_lone_function() {
    let m = parse_module(
        "func @a() -> void { e: call void @b()\n ret }
         func @b() -> void { e: call void @c()\n ret }
         func @c() -> void { e: ret }",
    )
    .unwrap();
    let cg = build_call_graph(&m).unwrap();
    assert_eq!(cg.callees("a"), &set(&["b", "c"]));
    let order: Vec<&str> = cg.bottom_up().collect();
    assert_eq!(order, vec!["c", "b", "a"]);
    let one = parse_module("func @f() -> void { e: ret }").unwrap();
    assert!(build_call_graph(&one).unwrap().callees("f").is_empty());
}

#[test]
fn corpus_closures_are_transitive_and_irreflexive() {
    for p in PROGRAMS {
        let m = p.module();
        let cg = build_call_graph(&m).unwrap();
        let pos = |f: &str| cg.topo.iter().position(|g| g == f).unwrap();
        for f in m.names() {
            assert!(!cg.callees(f).contains(f), "{}: {f}", p.name);
            let mut expect = BTreeSet::new();
            let mut stack: Vec<&str> = cg.direct_callees(f).iter().map(String::as_str).collect();
            while let Some(g) = stack.pop() {
                if expect.insert(g.to_owned()) {
                    stack.extend(cg.direct_callees(g).iter().map(String::as_str));
                }
            }
            assert_eq!(cg.callees(f), &expect, "{}: {f}", p.name);
            for g in cg.direct_callees(f) {
                assert!(pos(f) < pos(g), "{}: {f} -> {g} out of order", p.name);
            }
        }
    }
}

const NESTED: &str = "func @f(%n: i32) -> i32 {
entry:
  %s = const i32 0
  %i = const i32 0
  jmp outer
outer:
  %c = icmp slt i32 %i, %n
  br i1 %c, init, done
init:
  %j = const i32 0
  jmp inner
inner:
  %d = icmp slt i32 %j, %i
  br i1 %d, step, next
step:
  %s = add i32 %s, %j
  %j = add i32 %j, 1
  jmp inner
next:
  %i = add i32 %i, 1
  jmp outer
done:
  ret i32 %s
}";

#[test]
fn loop_forests_by_hand() {
    let straight = parse_module("func @f(%a: i32) -> i32 { e: %b = add i32 %a, 1\n ret i32 %b }").unwrap();
    assert!(natural_loops(&straight.functions["f"]).loops.is_empty());

    let m = parse_module(NESTED).unwrap();
    let f = &m.functions["f"];
    let forest = natural_loops(f);
    assert!(!forest.irreducible);
    assert_eq!(forest.loops.len(), 2);
    let label = |b: usize| f.blocks[b].label.as_str();
    let outer = &forest.loops[0];
    let inner = &forest.loops[1];
    assert_eq!((label(outer.header), outer.depth), ("outer", 1));
    assert_eq!((label(inner.header), inner.depth), ("inner", 2));
    assert_eq!(inner.parent, Some(0));
    let inner_blocks: Vec<&str> = inner.blocks.iter().map(|&b| label(b)).collect();
    assert_eq!(inner_blocks, vec!["inner", "step"]);
    assert!(inner.blocks.iter().all(|b| outer.contains(*b)));
    assert_eq!(forest.outermost().count(), 1);
}

#[test]
fn sibling_loops_become_two_functions_in_order() {
    let m = parse_module(
        "func @f(%p: ptr, %n: i64) -> i64 {
entry:
  %i = const i64 0
  jmp h1
h1:
  %c = icmp slt i64 %i, %n
  br i1 %c, b1, mid
b1:
  %q = gep %p, %i
  store i64 %i, %q
  %i = add i64 %i, 1
  jmp h1
mid:
  %s = const i64 0
  %i = const i64 0
  jmp h2
h2:
  %d = icmp slt i64 %i, %n
  br i1 %d, b2, out
b2:
  %q = gep %p, %i
  %v = load i64 %q
  %s = add i64 %s, %v
  %i = add i64 %i, 1
  jmp h2
out:
  ret i64 %s
}",
    )
    .unwrap();
    let (x, report) = extract_loops_with_report(&m);
    validate_module(&x).unwrap();
    let names: Vec<&str> = report.extracted.iter().map(|(_, n)| n.as_str()).collect();
    assert_eq!(names, vec!["f_loop0", "f_loop1"]);
    let calls: Vec<&str> = x.functions["f"].call_sites().collect();
    assert_eq!(calls, vec!["f_loop0", "f_loop1"]);
    for n in names {
        assert_eq!(x.functions[n].provenance, Provenance::ExtractedLoop);
    }
    for n in [0i64, 1, 5] {
        let mut mem = Memory::new();
        let p = mem.push_region(&[0u8; 64]);
        let args = [mergedse::ir::Value::Ptr(p), mergedse::ir::Value::I64(n)];
        let mut mem2 = mem.clone();
        let a = interpret(&m, "f", &args, &mut mem, DEFAULT_FUEL).unwrap().0;
        let b = interpret(&x, "f", &args, &mut mem2, DEFAULT_FUEL).unwrap().0;
        assert_eq!(a, b);
        assert_eq!(mem.bytes(), mem2.bytes());
    }
}

#[test]
fn nested_loops_travel_with_their_parent() {
    let m = parse_module(NESTED).unwrap();
    let (x, report) = extract_loops_with_report(&m);
    assert_eq!(report.extracted.len(), 1);
    let callee = &x.functions[&report.extracted[0].1];
    let depths: Vec<usize> = natural_loops(callee).loops.iter().map(|l| l.depth).collect();
    assert_eq!(depths, vec![1, 2]);
    assert!(natural_loops(&x.functions["f"]).loops.is_empty());
}

#[test]
fn extraction_never_deletes_work() {
    for p in PROGRAMS {
        let m = p.module();
        let x = extract_loops(&m);
        validate_module(&x).unwrap_or_else(|e| panic!("{}: {e:?}", p.name));
        let before: usize = m.functions.values().map(|f| f.size()).sum();
        let after: usize = x.functions.values().map(|f| f.size()).sum();
        assert!(after >= before, "{}: {after} < {before}", p.name);
        assert_eq!(extract_loops(&m), x, "{}: not deterministic", p.name);
    }
}

#[test]
fn sample_similarity_by_hand_count() {
    let m = mergedse::corpus::get("sample").unwrap().module();
    // f1: br add jmp mul jmp call ret; f2: br mul jmp add jmp ret
    let a = fingerprint(&m.functions["f1"]);
    let b = fingerprint(&m.functions["f2"]);
    assert_eq!((a.size, b.size), (7, 6));
    assert_eq!(similarity(&a, &b), 6.0 / 7.0);
    let ranked = rank_pairs(&m);
    assert_eq!((ranked[0].first.as_str(), ranked[0].second.as_str()), ("f1", "f2"));
    // f3 has two instructions and never appears
    assert!(ranked.iter().all(|p| p.first != "f3" && p.second != "f3"));
}

#[test]
fn renamed_copy_ranks_first_with_score_one() {
    let src = mergedse::corpus::get("vecops").unwrap().source;
    let mut m = parse_module(src).unwrap();
    let mut copy = m.functions["vdot"].clone();
    copy.name = "vdot_copy".into();
    m.add_function(copy);
    let ranked = rank_pairs(&m);
    assert_eq!(ranked[0].similarity, 1.0);
    assert_eq!((ranked[0].first.as_str(), ranked[0].second.as_str()), ("vdot", "vdot_copy"));
    let disjoint = parse_module(
        "func @a(%x: i32) -> i32 { e: %y = add i32 %x, 1\n %z = add i32 %y, 1\n %w = add i32 %z, 1\n %v = add i32 %w, 1\n ret i32 %v }
         func @b(%x: f64) -> f64 { e: %y = fmul f64 %x, %x\n %z = fmul f64 %y, %x\n %w = fmul f64 %z, %x\n %v = fmul f64 %w, %x\n ret f64 %v }",
    )
    .unwrap();
    let fa = fingerprint(&disjoint.functions["a"]);
    let fb = fingerprint(&disjoint.functions["b"]);
    assert_eq!(fa.size, 5);
    // only the `ret` is shared
    assert_eq!(similarity(&fa, &fb), 1.0 / 5.0);
}

#[test]
fn ranking_covers_every_eligible_pair_in_order() {
    for p in PROGRAMS {
        let m = p.module();
        let x = extract_loops(&m);
        let n = x.functions.values().filter(|f| f.size() >= MIN_PAIR_SIZE).count();
        let ranked = rank_pairs(&x);
        assert_eq!(ranked.len(), n * (n - 1) / 2, "{}", p.name);
        for w in ranked.windows(2) {
            let key = |r: &mergedse::analysis::RankedPair| (r.first.clone(), r.second.clone());
            assert!(
                w[0].similarity > w[1].similarity || (w[0].similarity == w[1].similarity && key(&w[0]) < key(&w[1])),
                "{}: {:?} before {:?}",
                p.name,
                w[0],
                w[1]
            );
        }
        assert!(ranked.iter().all(|r| r.first < r.second && (0.0..=1.0).contains(&r.similarity)));
    }
}

fn arb_fingerprint() -> impl Strategy<Value = Fingerprint> {
    proptest::collection::vec(0u32..6, NUM_OPCODES).prop_map(|v| {
        let mut counts = [0u32; NUM_OPCODES];
        counts.copy_from_slice(&v);
        Fingerprint { counts, size: counts.iter().sum() }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn similarity_is_symmetric_and_bounded(a in arb_fingerprint(), b in arb_fingerprint()) {
        let s = similarity(&a, &b);
        prop_assert_eq!(s, similarity(&b, &a));
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s == 1.0, a == b && a.size > 0);
    }

    #[test]
    fn extraction_preserves_random_functions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_function("g", &GenConfig::default(), &mut rng);
        let mut m = Module { functions: Default::default(), entry: "g".into() };
        m.add_function(f);
        let x = extract_loops(&m);
        prop_assert!(validate_module(&x).is_ok());
        let types: Vec<Type> = m.functions["g"].params.iter().map(|p| p.ty).collect();
        for _ in 0..5 {
            let mut mem = Memory::new();
            let args = random_args(&types, &mut mem, &mut rng);
            let mut mem2 = mem.clone();
            let a = interpret(&m, "g", &args, &mut mem, DEFAULT_FUEL).map(|r| r.0);
            let b = interpret(&x, "g", &args, &mut mem2, DEFAULT_FUEL).map(|r| r.0);
            prop_assert_eq!(a.map_err(|e| e.kind()), b.map_err(|e| e.kind()));
            prop_assert_eq!(mem.bytes(), mem2.bytes());
        }
    }
}
