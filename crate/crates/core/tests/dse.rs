use mergedse::corpus;
use mergedse::cost::{AreaModel, LatencySide};
use mergedse::dse::*;
use mergedse::ir::{parse_module, HeapImage};
use mergedse::partition::{solve_knapsack, Assignment, PartitionSolution, Platform};

fn model() -> AreaModel {
    AreaModel::bundled()
}

fn prep(name: &str, c: Configuration) -> Prepared {
    let p = corpus::get(name).unwrap();
    let cfg = PipelineConfig { configuration: c, ..Default::default() };
    prepare(&p.module(), &p.heap_images(), &cfg, &model()).unwrap()
}

const HOT: &str = "
entry @main
func @main(%n: i32) -> i32 {
e:
  %r = call i32 @hot(%n)
  %r = add i32 %r, 1
  ret i32 %r
}
func @hot(%n: i32) -> i32 {
e:
  %s = const i32 0
  %i = const i32 0
  jmp h
h:
  %c = icmp slt i32 %i, %n
  br i1 %c, b, x
b:
  %t = mul i32 %i, %i
  %s = add i32 %s, %t
  %i = add i32 %i, 1
  jmp h
x:
  ret i32 %s
}
";

#[test]
fn single_hot_function_moves_to_hardware() {
    let m = parse_module(HOT).unwrap();
    let inputs = HeapImage::parse_many("arg 0 = 50\n").unwrap();
    let platform = Platform { budget_luts: 1_000_000, latency_cycles: 25.0, bandwidth: f64::INFINITY, clock: 1e-9 };
    let cfg = PipelineConfig { configuration: Configuration::Fe, platform, ..Default::default() };
    let (prep, point) = run_pipeline(&m, &inputs, &cfg, &model()).unwrap();
    assert_eq!(point.hardware, vec!["hot"]);
    assert_eq!(point.software, vec!["main"]);

    // hand totals from the per-opcode counts
    let t = &prep.profile.trace;
    let lat = &cfg.latency;
    let own = |f: &str, side| lat.cycles(side, &t.function(f).unwrap().self_counts).unwrap();
    let sw_main = own("main", LatencySide::Sw);
    let sw_hot = own("hot", LatencySide::Sw);
    let hw_hot = own("hot", LatencySide::Hw);
    // 50 iterations: 51 compares and branches, 50 mul/add/add/jmp, two consts, a jmp and a ret;
    // in hardware consts, branches, jumps and ret are free
    assert_eq!(sw_hot, 51 + 51 + 50 * (3 + 1 + 1 + 1) + 2 + 1 + 1);
    assert_eq!(hw_hot, 51 + 50 * (3 + 1 + 1));
    let objective_cycles = sw_main + hw_hot + 25;
    let expected = (sw_main + sw_hot) as f64 / objective_cycles as f64;
    assert!((point.speedup - expected).abs() < 1e-12, "{} vs {expected}", point.speedup);
    assert!((point.objective_s - objective_cycles as f64 * 1e-9).abs() < 1e-18);
}

#[test]
fn zero_budget_is_the_software_baseline_everywhere() {
    for p in corpus::PROGRAMS {
        for c in Configuration::ALL {
            let cfg = PipelineConfig {
                configuration: c,
                platform: Platform { budget_luts: 0, ..Platform::default() },
                ..Default::default()
            };
            let (_, point) = run_pipeline(&p.module(), &p.heap_images(), &cfg, &model()).unwrap();
            assert_eq!(point.speedup, 1.0, "{} {c}", p.name);
            assert_eq!(point.area_used, 0);
        }
    }
}

#[test]
fn merging_never_loses_and_funnel_narrows() {
    let grid = SweepGrid { budgets: preset_budgets(7), ..Default::default() };
    for name in ["vecops", "quant", "matrix"] {
        let preps: Vec<Prepared> = Configuration::ALL.iter().map(|&c| prep(name, c)).collect();
        let rows = sweep(&preps, &grid, 50_000_000).unwrap();
        let per = grid.platforms().len();
        assert_eq!(rows.len(), 4 * per);
        for k in 0..per {
            let (fe, fle, fem, flem) = (&rows[k], &rows[per + k], &rows[2 * per + k], &rows[3 * per + k]);
            assert!(fem.objective_s <= fe.objective_s, "{name} {fem:?} {fe:?}");
            assert!(flem.objective_s <= fle.objective_s, "{name} {flem:?} {fle:?}");
        }
        for p in &preps {
            let f = p.funnel;
            assert!(f.ranked >= f.aligned && f.aligned >= f.verified && f.verified >= f.area_win);
            assert!(f.area_win >= f.ep_positive);
            assert_eq!(f.ep_positive, p.records.iter().filter(|r| r.accepted).count());
        }
    }
}

#[test]
fn selected_merges_are_verified() {
    for p in corpus::PROGRAMS {
        let pr = prep(p.name, Configuration::FleMerging);
        let big = Platform { budget_luts: 1_000_000, ..Platform::default() };
        let (point, _) = evaluate_point(&pr, big, 50_000_000).unwrap();
        for k in &point.hardware_merged {
            let rec = pr.records.iter().find(|r| &r.name == k).unwrap();
            assert_eq!(rec.verified, Some(true));
            assert!(rec.verify_trials >= 400, "{k}: {}", rec.verify_trials);
        }
    }
}

#[test]
fn loop_extraction_keeps_the_software_results() {
    for p in corpus::PROGRAMS {
        let fe = prep(p.name, Configuration::Fe);
        let fle = prep(p.name, Configuration::Fle);
        assert_eq!(fe.profile.results, fle.profile.results, "{}", p.name);
    }
}

#[test]
fn redirected_program_behaves_like_the_original() {
    let p = corpus::get("vecops").unwrap();
    let pr = prep("vecops", Configuration::FeMerging);
    assert!(!pr.merges.parents.is_empty());
    for k in pr.merges.parents.keys() {
        let trace = &pr.merged_traces[k];
        // every covered root's calls now go through k
        for root in pr.merges.covered_roots(k) {
            assert!(trace.function(&root).is_none(), "{k} still calls {root}");
        }
        assert!(trace.function(k).is_some());
    }
    let base = profile(&p.module(), &p.heap_images()).unwrap();
    assert_eq!(base.results, pr.profile.results);
}

#[test]
fn sweep_rows_and_csv() {
    let preps = vec![prep("stats", Configuration::Fe), prep("stats", Configuration::FeMerging)];
    let grid = SweepGrid { budgets: vec![1000, 10_000, 100_000], latencies: vec![25.0], bandwidths: vec![1e9], clock: 1e-9 };
    let rows = sweep(&preps, &grid, 50_000_000).unwrap();
    assert_eq!(rows.len(), 3 * 2);
    for w in rows.chunks(3) {
        assert!(w[0].speedup <= w[1].speedup && w[1].speedup <= w[2].speedup);
    }
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows).unwrap();
    assert_eq!(read_sweep_csv(&buf[..]).unwrap().len(), 6);

    let mut empty = Vec::new();
    write_sweep_csv(&mut empty, &[]).unwrap();
    assert_eq!(String::from_utf8(empty).unwrap(), CSV_HEADER.join(",") + "\n");
}

#[test]
fn free_communication_matches_the_knapsack_decomposition() {
    for name in ["sample", "decoder", "sorting", "checksums"] {
        for c in Configuration::ALL {
            let pr = prep(name, c);
            for budget in [500, 2_000, 8_000, 40_000] {
                let pl = Platform { budget_luts: budget, latency_cycles: 0.0, bandwidth: f64::INFINITY, clock: 1e-9 };
                let (_, s) = evaluate_point(&pr, pl, 50_000_000).unwrap();
                let mut p = pr.problem.clone();
                p.set_platform(pl);
                assert_eq!(s.objective_ps, solve_knapsack(&p).unwrap(), "{name} {c} {budget}");
            }
        }
    }
}

#[test]
fn communication_share_grows_with_latency() {
    let pr = prep("decoder", Configuration::FleMerging);
    let low = Platform { budget_luts: 20_000, latency_cycles: 25.0, bandwidth: 4e9, clock: 1e-9 };
    let high = Platform { latency_cycles: 500.0, ..low };
    let (_, s) = evaluate_point(&pr, low, 50_000_000).unwrap();
    let mut pl = pr.problem.clone();
    pl.set_platform(low);
    let (a_sw, a_hw, a_comm) = s.breakdown(&pl);
    let mut ph = pr.problem.clone();
    ph.set_platform(high);
    let fixed = PartitionSolution::evaluate(&ph, s.assignment.clone());
    let (b_sw, b_hw, b_comm) = fixed.breakdown(&ph);
    assert_eq!((a_sw, a_hw), (b_sw, b_hw));
    let share = |c: u64, t: u64| c as f64 / t as f64;
    assert!(share(b_comm, b_sw + b_hw + b_comm) >= share(a_comm, a_sw + a_hw + a_comm));
    assert!(s.assignment.iter().any(|a| *a == Assignment::Hardware));
}

#[test]
fn breakdown_adds_up_to_the_objective() {
    let pr = prep("quant", Configuration::FleMerging);
    for budget in preset_budgets(5) {
        let pl = Platform { budget_luts: budget, latency_cycles: 25.0, bandwidth: 4e9, clock: 1e-9 };
        let (point, s) = evaluate_point(&pr, pl, 50_000_000).unwrap();
        let mut p = pr.problem.clone();
        p.set_platform(pl);
        let (a, b, c) = s.breakdown(&p);
        assert_eq!(a + b + c, s.objective_ps);
        assert!((point.sw_pct + point.hw_pct + point.comm_pct - 100.0).abs() < 1e-9);
    }
}

#[test]
fn report_round_trips_through_the_validator() {
    let p = corpus::get("decoder").unwrap();
    let mut configs = Vec::new();
    for c in Configuration::ALL {
        let cfg = PipelineConfig { configuration: c, ..Default::default() };
        let (pr, point) = run_pipeline(&p.module(), &p.heap_images(), &cfg, &model()).unwrap();
        configs.push(ConfigReport::new(&pr, &point));
    }
    let report = DseReport::new("decoder", 7, "bundled", configs);
    let json = report.to_json();
    assert!(json.contains("\"bandwidth\": null"));
    let back = validate_report(&json).unwrap();
    assert_eq!(back, report);

    let mut broken = report.clone();
    broken.configs[2].funnel.aligned = broken.configs[2].funnel.ranked + 1;
    broken.schema = "dse-report/v0".into();
    let errs = validate_report(&broken.to_json()).unwrap_err();
    assert_eq!(errs.len(), 2, "{errs:?}");
}

#[test]
fn preparation_is_deterministic() {
    let a = prep("checksums", Configuration::FleMerging);
    let b = prep("checksums", Configuration::FleMerging);
    assert_eq!(a.records, b.records);
    assert_eq!(a.problem, b.problem);
}

#[test]
fn configuration_names_parse() {
    for c in Configuration::ALL {
        assert_eq!(c.name().parse::<Configuration>().unwrap(), c);
    }
    assert!("FE+merging".parse::<Configuration>().is_ok());
    assert!("merging".parse::<Configuration>().is_err());
}
