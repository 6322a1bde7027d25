use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use mergedse::analysis::{
    build_call_graph, extract_loops_with_report, fingerprint, natural_loops, rank_pairs, similarity,
};
use mergedse::cost::{
    evaluate_model, model_selection, mre, r2, synthetic_dataset, train_area_model, AreaModel, Dataset, ModelKind, TRAIN_FRACTION,
};
use mergedse::dse::{
    evaluate_point, prepare, profile, sweep, validate_report, write_sweep_csv, ConfigReport, Configuration, DseReport,
    PipelineConfig, Prepared, SweepGrid, PRESET_BANDWIDTHS, PRESET_LATENCIES,
};
use mergedse::ir::{parse_module, print_module, HeapImage, Module};
use mergedse::merge::{merge_pair, verify_merge, MergeOptions};
use mergedse::partition::Platform;

use crate::config::{Mode, ToolConfig};
use crate::{Cli, Command, Common};

/// Presets swept when the budget is not given.
pub const PRESET_BUDGET_POINTS: usize = 13;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Internal(String),
}


impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Input(m) => f.write_str(m),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Config file first, then flags on top.
pub fn resolve(common: &Common) -> Result<ToolConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
            ToolConfig::parse(&text).map_err(|e| input(format!("{}: {e}", path.display())))?
        }
        None => ToolConfig::default(),
    };
    let flags = [
        ("budget", &common.budget),
        ("latency", &common.latency),
        ("bandwidth", &common.bandwidth),
        ("clock", &common.clock),
        ("mode", &common.mode),
        ("seed", &common.seed),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|m| input(format!("--{key}: {m}")))?;
        }
    }
    if let Some(m) = &common.model {
        cfg.model = Some(m.clone());
    }
    Ok(cfg)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Module, CliError> {
    parse_module(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_inputs(path: &Path) -> Result<Vec<HeapImage>, CliError> {
    let images = HeapImage::parse_many(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    if images.is_empty() {
        return Err(input(format!("{}: no input images", path.display())));
    }
    Ok(images)
}

fn load_model(cfg: &ToolConfig) -> Result<(AreaModel, String), CliError> {
    match &cfg.model {
        Some(p) => {
            let m = AreaModel::from_text(&read(p)?).map_err(|e| input(format!("{}: {e}", p.display())))?;
            Ok((m, p.display().to_string()))
        }
        None => Ok((AreaModel::bundled(), "bundled".to_owned())),
    }
}

fn load_dataset(p: &Path) -> Result<Dataset, CliError> {
    let f = fs::File::open(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
    Dataset::read_csv(f).map_err(|e| input(format!("{}: {e}", p.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(internal)
        }
    }
}

fn seed(cfg: &ToolConfig) -> u64 {
    cfg.seed.unwrap_or(7)
}

fn platform(cfg: &ToolConfig) -> Platform {
    let d = Platform::default();
    Platform {
        budget_luts: cfg.budget.unwrap_or(d.budget_luts),
        latency_cycles: cfg.latency.unwrap_or(d.latency_cycles),
        bandwidth: cfg.bandwidth.unwrap_or(d.bandwidth),
        clock: cfg.clock.unwrap_or(d.clock),
    }
}

fn pipeline(cfg: &ToolConfig, configuration: Configuration) -> PipelineConfig {
    let d = PipelineConfig::default();
    PipelineConfig {
        configuration,
        platform: platform(cfg),
        similarity_cutoff: cfg.similarity.unwrap_or(d.similarity_cutoff),
        max_pairs: cfg.max_pairs.unwrap_or(d.max_pairs),
        merge_depth: cfg.merge_depth.unwrap_or(d.merge_depth),
        verify_trials: cfg.trials.unwrap_or(d.verify_trials),
        seed: seed(cfg),
        latency: cfg.latency_table.clone(),
        ..d
    }
}

fn grid(cfg: &ToolConfig) -> SweepGrid {
    SweepGrid {
        budgets: cfg
            .budgets
            .clone()
            .or(cfg.budget.map(|b| vec![b]))
            .unwrap_or_else(|| mergedse::dse::preset_budgets(PRESET_BUDGET_POINTS)),
        latencies: cfg.latencies.clone().or(cfg.latency.map(|l| vec![l])).unwrap_or(PRESET_LATENCIES.to_vec()),
        bandwidths: cfg.bandwidths.clone().or(cfg.bandwidth.map(|b| vec![b])).unwrap_or(PRESET_BANDWIDTHS.to_vec()),
        clock: platform(cfg).clock,
    }
}

fn configurations(cfg: &ToolConfig) -> Vec<Configuration> {
    match cfg.mode {
        Some(Mode::Single(c)) => vec![c],
        _ => Configuration::ALL.to_vec(),
    }
}

fn prepare_all(
    m: &Module,
    inputs: &[HeapImage],
    cfg: &ToolConfig,
    model: &AreaModel,
) -> Result<Vec<(Prepared, PipelineConfig)>, CliError> {
    configurations(cfg)
        .into_iter()
        .map(|c| {
            let pc = pipeline(cfg, c);
            info!("preparing {c}");
            let p = prepare(m, inputs, &pc, model).map_err(input)?;
            info!("{c}: funnel {:?}", p.funnel);
            Ok((p, pc))
        })
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "program".into())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common)?;
    if let Some(j) = cli.common.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let out = cli.common.output.as_deref();
    match cli.command {
        Command::Analyze { program, inputs, callgraph, loops, top } => {
            let all = !callgraph && !loops;
            let sections = Sections { table: all, callgraph: all || callgraph, loops: all || loops, pairs: all };
            analyze(&program, inputs.as_deref(), sections, top, out)
        }
        Command::Transform { program, extract_loops } => {
            let m = load_program(&program)?;
            if !extract_loops {
                return emit(out, &print_module(&m));
            }
            let (x, report) = extract_loops_with_report(&m);
            for (parent, new) in &report.extracted {
                info!("extracted @{new} from @{parent}");
            }
            for (f, why) in &report.skipped {
                info!("kept @{f}: {why}");
            }
            emit(out, &print_module(&x))
        }
        Command::Merge { program, pair, all, min_similarity, seeds, verify, trials, csv } => {
            if pair.is_none() && !all {
                return Err(CliError::Usage("merge needs --pair F1,F2 or --all".into()));
            }
            let m = load_program(&program)?;
            let pairs: Vec<(String, String, f64)> = if let Some(p) = pair {
                let (a, b) = p
                    .split_once(',')
                    .ok_or_else(|| CliError::Usage(format!("--pair expects `first,second`, got `{p}`")))?;
                let (a, b) = (a.trim().to_owned(), b.trim().to_owned());
                for f in [&a, &b] {
                    if m.function(f).is_none() {
                        return Err(input(format!("no function @{f} in {}", program.display())));
                    }
                }
                let s = similarity(&fingerprint(&m.functions[&a]), &fingerprint(&m.functions[&b]));
                vec![(a, b, s)]
            } else {
                rank_pairs(&m)
                    .into_iter()
                    .filter(|p| p.similarity >= min_similarity)
                    .map(|p| (p.first, p.second, p.similarity))
                    .collect()
            };
            merge_cmd(&m, &pairs, seeds, verify.then_some(trials), seed(&cfg), out, csv.as_deref())
        }
        Command::Train { samples, data, dump_data } => {
            let kind = match &cli.common.model {
                Some(k) => k.to_string_lossy().parse::<ModelKind>().map_err(CliError::Usage)?,
                None => ModelKind::Mlp,
            };
            let d = match &data {
                Some(p) => {
                    load_dataset(p)?
                }
                None => synthetic_dataset(samples, seed(&cfg)),
            };
            if let Some(p) = &dump_data {
                let f = fs::File::create(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
                d.write_csv(f).map_err(input)?;
            }
            let (train, test) = d.split(TRAIN_FRACTION);
            let model = train_area_model(kind, &train, seed(&cfg)).map_err(input)?;
            if !test.is_empty() {
                let r = evaluate_model(|x| model.predict(x), &train, &test).map_err(input)?;
                eprintln!(
                    "{kind}: r2 train {:.4} test {:.4}, MRE train {:.4} test {:.4}",
                    r.r2_train, r.r2_test, r.mre_train, r.mre_test
                );
            }
            emit(out, &model.to_text())
        }
        Command::Eval { samples, test } => {
            let mut text = String::new();
            if cfg.model.is_some() {
                let (model, label) = load_model(&cfg)?;
                let test = match &test {
                    Some(p) => load_dataset(p)?,
                    None => synthetic_dataset(samples, seed(&cfg)).split(TRAIN_FRACTION).1,
                };
                if test.is_empty() {
                    return Err(input("empty test set"));
                }
                let f: Vec<f64> = test.x.iter().map(|x| model.predict(x)).collect();
                let e = mre(&test.y, &f).map_err(input)?;
                writeln!(text, "model,samples,r2_test,mre_test").unwrap();
                writeln!(text, "{label},{},{:.6},{e:.6}", test.len(), r2(&test.y, &f)).unwrap();
            } else if test.is_some() {
                return Err(CliError::Usage("--test needs --model".into()));
            } else {
                let rows = model_selection(samples, seed(&cfg)).map_err(input)?;
                writeln!(text, "model,samples,r2_train,r2_test,mre_train,mre_test").unwrap();
                for r in rows {
                    let e = r.report;
                    writeln!(
                        text,
                        "{},{},{:.6},{:.6},{:.6},{:.6}",
                        r.kind, r.samples, e.r2_train, e.r2_test, e.mre_train, e.mre_test
                    )
                    .unwrap();
                }
            }
            emit(out, &text)
        }
        Command::Partition { program, inputs } => {
            let c = match cfg.mode {
                Some(Mode::Single(c)) => c,
                Some(Mode::Sweep) => return Err(CliError::Usage("partition needs a single configuration".into())),
                None => Configuration::FeMerging,
            };
            let m = load_program(&program)?;
            let images = load_inputs(&inputs)?;
            let (model, _) = load_model(&cfg)?;
            let pc = pipeline(&cfg, c);
            let prep = prepare(&m, &images, &pc, &model).map_err(input)?;
            let (p, _) = evaluate_point(&prep, pc.platform, pc.node_limit).map_err(internal)?;
            let bw = if p.platform.bandwidth.is_finite() { format!("{}", p.platform.bandwidth) } else { "inf".into() };
            let mut text = String::new();
            writeln!(
                text,
                "configuration {c}, budget {} LUTs, latency {} cycles, bandwidth {bw} B/s",
                p.platform.budget_luts, p.platform.latency_cycles
            )
            .unwrap();
            writeln!(
                text,
                "objective {:.6e} s, speedup {:.4}, area {} LUTs{}",
                p.objective_s,
                p.speedup,
                p.area_used,
                if p.optimal { "" } else { " (node limit reached)" }
            )
            .unwrap();
            writeln!(text, "time: sw {:.2}%, hw {:.2}%, comm {:.2}%", p.sw_pct, p.hw_pct, p.comm_pct).unwrap();
            writeln!(text, "software: {}", p.software.join(" ")).unwrap();
            writeln!(text, "hardware: {}", p.hardware.join(" ")).unwrap();
            writeln!(text, "merged hardware: {}", p.hardware_merged.join(" ")).unwrap();
            emit(out, &text)
        }
        Command::Dse { program, inputs } => dse(&program, &inputs, &cfg, out),
        Command::Sweep { program, inputs } => {
            let m = load_program(&program)?;
            let images = load_inputs(&inputs)?;
            let (model, _) = load_model(&cfg)?;
            let preps: Vec<Prepared> = prepare_all(&m, &images, &cfg, &model)?.into_iter().map(|(p, _)| p).collect();
            let rows = sweep(&preps, &grid(&cfg), PipelineConfig::default().node_limit).map_err(internal)?;
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &rows).map_err(internal)?;
            emit(out, &String::from_utf8(buf).map_err(internal)?)
        }
        Command::Verify { program, first, second, merged, trials, report } => {
            if let Some(r) = report {
                let json = read(&r)?;
                return match validate_report(&json) {
                    Ok(rep) => {
                        emit(out, &format!("{}: valid {} report, {} configurations\n", r.display(), rep.schema, rep.configs.len()))
                    }
                    Err(errs) => Err(input(format!("{}: {}", r.display(), errs.join("; ")))),
                };
            }
            let (Some(program), Some(f1), Some(f2), Some(f12)) = (program, first, second, merged) else {
                return Err(CliError::Usage("verify needs PROGRAM FIRST SECOND MERGED, or --report".into()));
            };
            let m = load_program(&program)?;
            let v = verify_merge(&m, &f1, &f2, &f12, trials, seed(&cfg));
            if let Some(e) = v.error {
                return Err(input(e));
            }
            let mut text = format!("@{f12} vs @{f1}/@{f2}: {} trials, {} skipped\n", v.trials, v.skipped);
            match &v.counterexample {
                None => text.push_str("equivalent on every trial\n"),
                Some(c) => writeln!(text, "counterexample: {c:?}").unwrap(),
            }
            emit(out, &text)?;
            if v.passed {
                Ok(())
            } else {
                Err(input(format!("@{f12} is not equivalent to its parents")))
            }
        }
    }
}

pub struct Sections {
    pub table: bool,
    pub callgraph: bool,
    pub loops: bool,
    pub pairs: bool,
}

fn analyze(
    program: &Path,
    inputs: Option<&Path>,
    show: Sections,
    top: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let m = load_program(program)?;
    let cg = build_call_graph(&m).map_err(input)?;
    let mut text = String::new();
    writeln!(text, "{}: {} functions, entry @{}", program.display(), m.functions.len(), m.entry).unwrap();
    if show.table {
        writeln!(text, "\nfunction,size,blocks,loops,provenance").unwrap();
        for (name, f) in &m.functions {
            let n = natural_loops(f).loops.len();
            writeln!(text, "{name},{},{},{n},{}", f.size(), f.blocks.len(), f.provenance.name()).unwrap();
        }
    }
    if show.callgraph {
        writeln!(text, "\nfunction,direct_callees,all_callees").unwrap();
        for name in m.names() {
            let direct: Vec<&str> = cg.direct_callees(name).iter().map(String::as_str).collect();
            let all: Vec<&str> = cg.callees(name).iter().map(String::as_str).collect();
            writeln!(text, "{name},{},{}", direct.join(" "), all.join(" ")).unwrap();
        }
        let order: Vec<&str> = cg.bottom_up().collect();
        writeln!(text, "bottom-up: {}", order.join(" ")).unwrap();
    }
    if show.loops {
        writeln!(text, "\nfunction,header,blocks,depth").unwrap();
        for (name, f) in &m.functions {
            let forest = natural_loops(f);
            if forest.irreducible {
                writeln!(text, "{name},irreducible,,").unwrap();
            }
            for l in &forest.loops {
                let blocks: Vec<&str> = l.blocks.iter().map(|&b| f.blocks[b].label.as_str()).collect();
                writeln!(text, "{name},{},{},{}", f.blocks[l.header].label, blocks.join(" "), l.depth).unwrap();
            }
        }
    }
    if show.pairs {
        writeln!(text, "\nfirst,second,similarity").unwrap();
        for p in rank_pairs(&m).into_iter().take(top) {
            writeln!(text, "{},{},{:.4}", p.first, p.second, p.similarity).unwrap();
        }
    }
    if let Some(path) = inputs {
        let images = load_inputs(path)?;
        let prof = profile(&m, &images).map_err(input)?;
        writeln!(text, "\nfunction,invocations,self_instructions,inclusive_instructions").unwrap();
        for (name, fp) in &prof.trace.functions {
            writeln!(text, "{name},{},{},{}", fp.invocations, fp.self_counts.total(), fp.inclusive_counts.total())
                .unwrap();
        }
        for (i, (value, _)) in prof.results.iter().enumerate() {
            let v = value.map(|v| v.to_string()).unwrap_or_else(|| "void".into());
            writeln!(text, "input {i}: returns {v}").unwrap();
        }
    }
    emit(out, &text)
}

fn merge_cmd(
    m: &Module,
    pairs: &[(String, String, f64)],
    seeds: u64,
    trials: Option<usize>,
    seed: u64,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let opts = MergeOptions { seeds, ..MergeOptions::default() };
    let mut with = m.clone();
    let mut table = String::from("first,second,merged,similarity,aligned_fraction,verified,rejected\n");
    let mut failed = Vec::new();
    for (a, b, s) in pairs {
        let mut name = format!("{a}__{b}");
        while with.function(&name).is_some() {
            name.push('_');
        }
        match merge_pair(m, a, b, &name, &opts) {
            Ok(merged) => {
                with.add_function(merged.function.clone());
                let verified = match trials {
                    Some(t) => {
                        let v = verify_merge(&with, a, b, &name, t, seed);
                        if !v.passed {
                            failed.push(name.clone());
                        }
                        if v.passed { "yes" } else { "no" }
                    }
                    None => "",
                };
                let frac = merged.alignment.aligned_fraction();
                writeln!(table, "{a},{b},{name},{s:.4},{frac:.4},{verified},").unwrap();
            }
            Err(e) => {
                info!("@{a} + @{b}: {e}");
                if pairs.len() == 1 {
                    return Err(input(e));
                }
                writeln!(table, "{a},{b},,{s:.4},,,{}", e.to_string().replace(',', ";")).unwrap();
            }
        }
    }
    emit(out, &print_module(&with))?;
    let csv_path = csv.map(Path::to_path_buf).or_else(|| out.map(|o| o.with_extension("csv")));
    match csv_path {
        Some(p) => fs::write(&p, table).map_err(|e| input(format!("{}: {e}", p.display())))?,
        None => eprint!("{table}"),
    }
    if !failed.is_empty() {
        return Err(internal(format!("merged functions disagree with their parents: {}", failed.join(" "))));
    }
    Ok(())
}

fn dse(program: &Path, inputs: &Path, cfg: &ToolConfig, out: Option<&Path>) -> Result<(), CliError> {
    let m = load_program(program)?;
    let images = load_inputs(inputs)?;
    let (model, label) = load_model(cfg)?;
    let preps = prepare_all(&m, &images, cfg, &model)?;
    let mut configs = Vec::new();
    for (p, pc) in &preps {
        let (point, _) = evaluate_point(p, pc.platform, pc.node_limit).map_err(internal)?;
        configs.push(ConfigReport::new(p, &point));
    }
    let name = stem(program);
    let report = DseReport::new(&name, seed(cfg), &label, configs);
    let json = report.to_json();
    if let Err(errs) = validate_report(&json) {
        return Err(internal(format!("report failed validation: {}", errs.join("; "))));
    }
    let sweeping =
        cfg.mode == Some(Mode::Sweep) || cfg.budget.is_none() || cfg.latency.is_none() || cfg.bandwidth.is_none();
    let csv = if sweeping {
        info!("budget, latency or bandwidth not fixed: sweeping presets");
        let only: Vec<Prepared> = preps.into_iter().map(|(p, _)| p).collect();
        let rows = sweep(&only, &grid(cfg), PipelineConfig::default().node_limit).map_err(internal)?;
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).map_err(internal)?;
        Some(String::from_utf8(buf).map_err(internal)?)
    } else {
        None
    };
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
            let json_path: PathBuf = dir.join(format!("{name}.report.json"));
            fs::write(&json_path, &json).map_err(|e| input(format!("{}: {e}", json_path.display())))?;
            if let Some(csv) = csv {
                let csv_path = dir.join(format!("{name}.sweep.csv"));
                fs::write(&csv_path, csv).map_err(|e| input(format!("{}: {e}", csv_path.display())))?;
            }
            Ok(())
        }
        None => emit(None, &json),
    }
}
