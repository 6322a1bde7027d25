use mergedse::analysis::build_call_graph;
use mergedse::corpus::PROGRAMS;
use mergedse::cost::{
    estimate_costs, estimate_profitability, extract_features, hierarchical_features, hw_latency, oracle_noise_free,
    own_features, sw_latency, synthetic_dataset, synthetic_hls_oracle, train_area_model, AreaModel, CostError, Dataset,
    FeatureVector, LatencyTable, ModelKind, DEFAULT_CLOCK, ORACLE_FLOOR, TRAIN_FRACTION,
};
use mergedse::ir::{interpret, parse_module, FunctionProfile, Memory, Module, OpCounts, Opcode, Trace, Type, DEFAULT_FUEL};
use proptest::prelude::*;

fn corpus_trace(m: &Module, images: &[mergedse::ir::HeapImage]) -> Trace {
    let types: Vec<Type> = m.entry_function().params.iter().map(|p| p.ty).collect();
    let mut total = Trace::default();
    for img in images {
        let (mut mem, args) = img.instantiate(&types).unwrap();
        let (_, t) = interpret(m, &m.entry, &args, &mut mem, DEFAULT_FUEL).unwrap();
        total.accumulate(&t);
    }
    total
}

// Recomputed from call sites directly, without the call graph.
fn hier_by_hand(m: &Module, f: &str) -> FeatureVector {
    let mut v = own_features(&m.functions[f]);
    for callee in m.functions[f].call_sites() {
        v = v + hier_by_hand(m, callee);
    }
    v
}

#[test]
fn hierarchical_features_match_an_independent_recursion() {
    for p in PROGRAMS {
        let m = mergedse::analysis::extract_loops(&p.module());
        let cg = build_call_graph(&m).unwrap();
        let all = hierarchical_features(&m, &cg);
        for f in m.names() {
            let want = hier_by_hand(&m, f);
            assert_eq!(all[f], want, "{}: {f}", p.name);
            assert_eq!(extract_features(&m, f, &cg), want, "{}: {f}", p.name);
        }
    }
}

#[test]
fn hundred_adds_take_a_tenth_of_a_microsecond() {
    let mut counts = OpCounts::default();
    counts.0[Opcode::Add.index()] = 100;
    let mut t = Trace::default();
    t.functions.insert("f".into(), FunctionProfile { self_counts: counts, inclusive_counts: counts, invocations: 1 });
    t.total = 100;
    let sw = sw_latency(&t, "f", &LatencyTable::default(), 1e-9).unwrap();
    assert!((sw - 1e-7).abs() < 1e-20, "{sw}");
    assert_eq!(sw_latency(&t, "absent", &LatencyTable::default(), 1e-9).unwrap(), 0.0);
}

#[test]
fn callee_run_ten_times_is_summed_flat() {
    let m = parse_module(
        "func @f(%n: i32) -> i32 {
e:
  %i = const i32 0
  %s = const i32 0
  jmp h
h:
  %c = icmp slt i32 %i, 10
  br i1 %c, b, x
b:
  %v = call i32 @g(%i)
  %s = add i32 %s, %v
  %i = add i32 %i, 1
  jmp h
x:
  ret i32 %s
}
func @g(%a: i32) -> i32 { e: %r = mul i32 %a, %a\n ret i32 %r }",
    )
    .unwrap();
    let (_, t) = interpret(&m, "f", &[mergedse::ir::Value::I32(0)], &mut Memory::new(), DEFAULT_FUEL).unwrap();
    assert_eq!(t.functions["g"].invocations, 10);
    let table = LatencyTable::default();
    let mut flat = OpCounts::default();
    for p in t.functions.values() {
        flat.add(&p.self_counts);
    }
    let want = table.cycles(mergedse::cost::LatencySide::Sw, &flat).unwrap() as f64 * DEFAULT_CLOCK;
    assert_eq!(sw_latency(&t, "f", &table, DEFAULT_CLOCK).unwrap(), want);
}

#[test]
fn latencies_are_linear_in_the_trace() {
    let table = LatencyTable::default();
    for p in PROGRAMS {
        let m = p.module();
        let t = corpus_trace(&m, &p.heap_images());
        let mut twice = t.clone();
        twice.accumulate(&t);
        for f in t.functions.keys() {
            let (s1, s2) = (sw_latency(&t, f, &table, 1e-9).unwrap(), sw_latency(&twice, f, &table, 1e-9).unwrap());
            let (h1, h2) = (hw_latency(&t, f, &table, 1e-9).unwrap(), hw_latency(&twice, f, &table, 1e-9).unwrap());
            assert_eq!(s2, 2.0 * s1, "{}: {f}", p.name);
            assert_eq!(h2, 2.0 * h1, "{}: {f}", p.name);
        }
    }
}

#[test]
fn estimates_cover_every_function() {
    let model = AreaModel::bundled();
    for p in PROGRAMS {
        let m = p.module();
        let cg = build_call_graph(&m).unwrap();
        let t = corpus_trace(&m, &p.heap_images());
        let costs = estimate_costs(&m, &cg, &t, &model, &LatencyTable::default(), DEFAULT_CLOCK).unwrap();
        assert_eq!(costs.len(), m.functions.len());
        let e = &costs[&m.entry];
        assert!(e.sw > 0.0 && e.own_sw <= e.sw && e.own_hw <= e.hw, "{}: {e:?}", p.name);
        for (f, c) in &costs {
            assert!(c.area >= 0.0 && c.own_area >= 0.0, "{}: {f}", p.name);
            assert!(c.own_sw <= c.sw + 1e-18, "{}: {f}", p.name);
        }
    }
}

#[test]
fn missing_latency_is_an_error() {
    let mut table = LatencyTable::default();
    table.set(mergedse::cost::LatencySide::Sw, Opcode::Mul, None);
    let mut counts = OpCounts::default();
    counts.0[Opcode::Mul.index()] = 1;
    assert_eq!(table.cycles(mergedse::cost::LatencySide::Sw, &counts), Err(CostError::MissingLatency("mul".into())));
    assert!(table.apply_override("sw.mul", "4").is_ok());
    assert_eq!(table.cycles(mergedse::cost::LatencySide::Sw, &counts), Ok(4));
    assert!(table.apply_override("gpu.mul", "4").is_err());
    assert!(table.apply_override("sw.frobnicate", "4").is_err());
}

#[test]
fn profitability_examples() {
    let ep = estimate_profitability(100.0, 50.0, 40.0, 20.0, 70.0, 1000.0).unwrap();
    assert!((ep - 0.02).abs() < 1e-15);
    // equal savings on both sides, merged as costly as both parents
    let ep = estimate_profitability(80.0, 60.0, 50.0, 30.0, 80.0, 100.0).unwrap();
    assert!((ep - 0.30).abs() < 1e-15 && ep > 0.0);
    let ep = estimate_profitability(100.0, 50.0, 40.0, 20.0, 40.0 + 50.0, 1000.0).unwrap();
    assert!(ep.abs() < 1e-15);
    assert_eq!(estimate_profitability(1.0, 1.0, 0.0, 0.0, 0.0, 0.0), Err(CostError::NonPositiveTotal(0.0)));
}

#[test]
fn oracle_is_floored_and_noise_is_bounded() {
    let d = synthetic_dataset(200, 3);
    for x in &d.x {
        let clean = oracle_noise_free(x);
        assert!(clean >= ORACLE_FLOOR);
        let noisy = synthetic_hls_oracle(x, 3);
        assert!((noisy / clean - 1.0).abs() <= 0.05 + 1e-12);
        assert_eq!(noisy, synthetic_hls_oracle(x, 3));
    }
    assert!(d.y.iter().all(|y| *y >= ORACLE_FLOOR * 0.95));
}

#[test]
fn split_and_prefix_stability() {
    let d = synthetic_dataset(100, 5);
    let (train, test) = d.split(TRAIN_FRACTION);
    assert_eq!((train.len(), test.len()), (80, 20));
    let small = synthetic_dataset(40, 5);
    assert_eq!(small.x[..], d.x[..40]);
}

#[test]
fn models_train_deterministically_and_round_trip() {
    let d = synthetic_dataset(120, 9);
    let (train, test) = d.split(TRAIN_FRACTION);
    for kind in [ModelKind::Lasso, ModelKind::Mlp] {
        let a = train_area_model(kind, &train, 4).unwrap();
        let b = train_area_model(kind, &train, 4).unwrap();
        assert_eq!(a.to_text(), b.to_text(), "{kind}");
        let back = AreaModel::from_text(&a.to_text()).unwrap();
        for x in &test.x {
            assert_eq!(a.predict(x).to_bits(), back.predict(x).to_bits(), "{kind}");
        }
    }
    assert!(AreaModel::from_text("not a model").is_err());
}

#[test]
fn bundled_model_is_an_mlp_that_beats_a_constant() {
    let m = AreaModel::bundled();
    assert_eq!(m.kind(), "mlp");
    let d = synthetic_dataset(600, 7);
    let (_, test) = d.split(TRAIN_FRACTION);
    let f: Vec<f64> = test.x.iter().map(|x| m.predict(x)).collect();
    assert!(mergedse::cost::r2(&test.y, &f) > 0.9);
    assert!(mergedse::cost::mre(&test.y, &f).unwrap() < 0.3);
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..30, any::<u64>()).prop_map(|(n, seed)| synthetic_dataset(n, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn profitability_is_swap_symmetric(
        sw1 in 0.0f64..1e3, sw2 in 0.0f64..1e3, h1 in 0.0f64..1.0, h2 in 0.0f64..1.0,
        hw12 in 0.0f64..2e3, total in 1e-3f64..1e4,
    ) {
        let (hw1, hw2) = (sw1 * h1, sw2 * h2);
        let a = estimate_profitability(sw1, sw2, hw1, hw2, hw12, total).unwrap();
        let b = estimate_profitability(sw2, sw1, hw2, hw1, hw12, total).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dataset_csv_round_trips(d in arb_dataset()) {
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        prop_assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn area_predictions_are_never_negative(d in arb_dataset()) {
        let m = AreaModel::bundled();
        for x in &d.x {
            prop_assert!(m.predict(x) >= 0.0);
        }
        prop_assert!(m.predict(&FeatureVector::default()) >= 0.0);
    }
}
