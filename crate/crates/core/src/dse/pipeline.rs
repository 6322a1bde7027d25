use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DseError;
use crate::analysis::{build_call_graph, extract_loops_with_report, fingerprint, similarity};
use crate::cost::{estimate_costs, extract_features, estimate_profitability, AreaModel, CostEstimate, LatencyTable};
use crate::ir::{validate_module, HeapImage, Interpreter, Memory, Module, Operand, Provenance, Trace, Type, Value, DEFAULT_FUEL};
use crate::merge::{merge_pair, verify_merge, MergeOptions, MergedFunction, ParamMap, Side};
use crate::partition::{
    build_problem, solve_with, MergeGraph, PartitionProblem, PartitionSolution, Platform, SolveOptions, PS_PER_SECOND,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Configuration {
    #[serde(rename = "FE")]
    Fe,
    #[serde(rename = "FLE")]
    Fle,
    #[serde(rename = "FE+Merging")]
    FeMerging,
    #[serde(rename = "FLE+Merging")]
    FleMerging,
}

impl Configuration {
    pub const ALL: [Configuration; 4] =
        [Configuration::Fe, Configuration::Fle, Configuration::FeMerging, Configuration::FleMerging];

    pub fn extracts_loops(self) -> bool {
        matches!(self, Configuration::Fle | Configuration::FleMerging)
    }

    pub fn merges(self) -> bool {
        matches!(self, Configuration::FeMerging | Configuration::FleMerging)
    }

    pub fn name(self) -> &'static str {
        match self {
            Configuration::Fe => "FE",
            Configuration::Fle => "FLE",
            Configuration::FeMerging => "FE+Merging",
            Configuration::FleMerging => "FLE+Merging",
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Configuration {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Configuration::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown configuration `{s}` (FE, FLE, FE+Merging, FLE+Merging)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub configuration: Configuration,
    pub platform: Platform,
    /// Fingerprint similarity a pair needs to be considered.
    pub similarity_cutoff: f64,
    /// Ranked pairs taken forward to alignment.
    pub max_pairs: usize,
    /// 1 merges originals only; 2 also merges pairs of merged functions.
    pub merge_depth: usize,
    pub merge: MergeOptions,
    pub verify_trials: usize,
    pub seed: u64,
    pub latency: LatencyTable,
    pub node_limit: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            configuration: Configuration::FeMerging,
            platform: Platform::default(),
            similarity_cutoff: 0.5,
            max_pairs: 64,
            merge_depth: 2,
            merge: MergeOptions::default(),
            verify_trials: 200,
            seed: 7,
            latency: LatencyTable::default(),
            node_limit: SolveOptions::default().node_limit,
        }
    }
}

/// Candidate counts after each filter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub ranked: usize,
    pub aligned: usize,
    pub verified: usize,
    pub area_win: usize,
    pub ep_positive: usize,
    pub selected: usize,
}

/// How far one merge candidate got.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub name: String,
    pub parents: (String, String),
    pub depth: usize,
    pub similarity: f64,
    pub aligned_fraction: Option<f64>,
    pub verified: Option<bool>,
    pub verify_trials: usize,
    pub counterexample: Option<String>,
    pub area_merged: Option<f64>,
    pub area_parents: Option<f64>,
    pub ep: Option<f64>,
    pub accepted: bool,
}

/// Outputs of the all-software runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub trace: Trace,
    /// Return value and final heap of every input.
    pub results: Vec<(Option<Value>, Vec<u8>)>,
}

pub fn profile(m: &Module, inputs: &[HeapImage]) -> Result<Profile, DseError> {
    if inputs.is_empty() {
        return Err(DseError::NoInputs);
    }
    let interp = Interpreter::new(m);
    let types: Vec<Type> = m.entry_function().params.iter().map(|p| p.ty).collect();
    let mut trace = Trace::default();
    let mut results = Vec::new();
    for (index, img) in inputs.iter().enumerate() {
        let (mut mem, args): (Memory, Vec<Value>) =
            img.instantiate(&types).map_err(|message| DseError::Input { index, message })?;
        let exec = interp.run(&m.entry, &args, &mut mem, DEFAULT_FUEL).map_err(|error| DseError::Execution { index, error })?;
        trace.accumulate(&exec.trace);
        results.push((exec.value, mem.bytes().to_vec()));
    }
    Ok(Profile { trace, results })
}

/// Everything that does not depend on budget, latency or bandwidth.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub configuration: Configuration,
    /// Originals (after extraction) plus accepted merged functions.
    pub module: Module,
    pub profile: Profile,
    pub costs: BTreeMap<String, CostEstimate>,
    pub merges: MergeGraph,
    pub merged_traces: BTreeMap<String, Trace>,
    pub records: Vec<MergeRecord>,
    pub funnel: Funnel,
    /// All-software time of the entry function, in seconds.
    pub sw_total: f64,
    pub extracted: Vec<(String, String)>,
    pub problem: PartitionProblem,
}

struct Accepted {
    merged: MergedFunction,
    covers: BTreeSet<String>,
}

/// Replaces every call to a function covered by `k` with a call to `k`,
/// adapting arguments through each merge level.
pub fn redirect_calls(m: &Module, k: &str, graph: &MergeGraph, params: &BTreeMap<String, ParamMap>) -> Module {
    // for each covered original: the (merged, side) steps up to `k`
    let mut routes: BTreeMap<String, Vec<(String, Side)>> = BTreeMap::new();
    fn walk(
        f: &str,
        graph: &MergeGraph,
        path: &mut Vec<(String, Side)>,
        routes: &mut BTreeMap<String, Vec<(String, Side)>>,
    ) {
        match graph.parents.get(f) {
            None => {
                let mut p = path.clone();
                p.reverse();
                routes.insert(f.to_owned(), p);
            }
            Some((a, b)) => {
                for (parent, side) in [(a, Side::First), (b, Side::Second)] {
                    path.push((f.to_owned(), side));
                    walk(parent, graph, path, routes);
                    path.pop();
                }
            }
        }
    }
    walk(k, graph, &mut Vec::new(), &mut routes);
    let types_of = |name: &str| -> Vec<Type> {
        m.functions[name].params.iter().map(|p| p.ty).collect()
    };
    let mut out = m.clone();
    for (fname, f) in out.functions.iter_mut() {
        if fname == k {
            continue;
        }
        for inst in f.blocks.iter_mut().flat_map(|b| b.insts.iter_mut()) {
            let Some(callee) = inst.callee.clone() else { continue };
            let Some(route) = routes.get(&callee) else { continue };
            let mut args: Vec<Operand> = inst.operands.clone();
            for (merged, side) in route {
                let (p1, p2) = &graph.parents[merged];
                args = params[merged].adapt_args(*side, &args, &types_of(p1), &types_of(p2));
            }
            inst.callee = Some(k.to_owned());
            inst.operands = args;
        }
    }
    out
}

fn unique_name(m: &Module, base: String) -> String {
    if !m.functions.contains_key(&base) {
        return base;
    }
    (2..).map(|i| format!("{base}_{i}")).find(|n| !m.functions.contains_key(n)).unwrap()
}

fn errstr(e: impl fmt::Display) -> DseError {
    DseError::Module(e.to_string())
}

/// Runs stages A and B: optional loop extraction, profiling, cost
/// estimation and (for merging configurations) the candidate funnel.
pub fn prepare(m: &Module, inputs: &[HeapImage], cfg: &PipelineConfig, model: &AreaModel) -> Result<Prepared, DseError> {
    validate_module(m).map_err(|e| errstr(e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")))?;
    let (base, extracted) = if cfg.configuration.extracts_loops() {
        let (x, report) = extract_loops_with_report(m);
        (x, report.extracted)
    } else {
        (m.clone(), Vec::new())
    };
    let prof = profile(&base, inputs)?;
    let cg = build_call_graph(&base).map_err(errstr)?;
    let clock = cfg.platform.clock;
    let base_costs = estimate_costs(&base, &cg, &prof.trace, model, &cfg.latency, clock)?;
    let sw_total = base_costs[&base.entry].sw;

    let mut module = base.clone();
    let mut costs = base_costs.clone();
    let mut merges = MergeGraph::default();
    let mut merged_traces = BTreeMap::new();
    let mut records = Vec::new();
    let mut funnel = Funnel::default();

    if cfg.configuration.merges() {
        let mut params: BTreeMap<String, ParamMap> = BTreeMap::new();
        let mut accepted: Vec<Accepted> = Vec::new();

        // depth 1: ranked pairs of executed non-entry functions
        let eligible: Vec<&str> = base
            .functions
            .iter()
            .filter(|(n, f)| {
                **n != base.entry && f.provenance != Provenance::Merged && prof.trace.function(n).is_some()
            })
            .map(|(n, _)| n.as_str())
            .collect();
        let fps: Vec<_> = eligible.iter().map(|n| fingerprint(&base.functions[*n])).collect();
        let mut pairs = Vec::new();
        for (i, j, s) in crate::analysis::rank_fingerprints(&fps) {
            let (a, b) = (eligible[i as usize], eligible[j as usize]);
            let fa = &base.functions[a];
            let fb = &base.functions[b];
            if s < cfg.similarity_cutoff || fa.ret != fb.ret {
                continue;
            }
            if cg.callees(a).contains(b) || cg.callees(b).contains(a) {
                continue;
            }
            pairs.push((a.to_owned(), b.to_owned(), s));
            if pairs.len() == cfg.max_pairs {
                break;
            }
        }
        let level1 = run_level(&base, inputs, &pairs, 1, cfg, model, &prof, &base_costs, &module, sw_total, &merges, &params)?;
        for (rec, acc, trace, cost) in level1 {
            absorb(rec, acc, trace, cost, &mut records, &mut accepted, &mut funnel, &mut module, &mut merges, &mut merged_traces, &mut costs, &mut params);
        }

        if cfg.merge_depth >= 2 {
            let mut pairs2 = Vec::new();
            for i in 0..accepted.len() {
                for j in i + 1..accepted.len() {
                    let (x, y) = (&accepted[i], &accepted[j]);
                    if !x.covers.is_disjoint(&y.covers) || x.merged.function.ret != y.merged.function.ret {
                        continue;
                    }
                    let reach = |c: &BTreeSet<String>, other: &BTreeSet<String>| {
                        c.iter().any(|f| cg.callees(f).iter().any(|g| other.contains(g)))
                    };
                    if reach(&x.covers, &y.covers) || reach(&y.covers, &x.covers) {
                        continue;
                    }
                    let s = similarity(&fingerprint(&x.merged.function), &fingerprint(&y.merged.function));
                    if s >= cfg.similarity_cutoff {
                        pairs2.push((x.merged.function.name.clone(), y.merged.function.name.clone(), s));
                    }
                }
            }
            pairs2.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| (&a.0, &a.1).cmp(&(&b.0, &b.1))));
            pairs2.truncate(cfg.max_pairs);
            let snapshot = module.clone();
            let level2 =
                run_level(&snapshot, inputs, &pairs2, 2, cfg, model, &prof, &costs, &module, sw_total, &merges, &params)?;
            for (rec, acc, trace, cost) in level2 {
                absorb(rec, acc, trace, cost, &mut records, &mut accepted, &mut funnel, &mut module, &mut merges, &mut merged_traces, &mut costs, &mut params);
            }
        }
    }

    let mut problem = build_problem(&module, &costs, &prof.trace, &merges, &merged_traces, cfg.platform)?;
    problem.set_platform(cfg.platform);
    Ok(Prepared {
        configuration: cfg.configuration,
        module,
        profile: prof,
        costs,
        merges,
        merged_traces,
        records,
        funnel,
        sw_total,
        extracted,
        problem,
    })
}

type LevelResult = (MergeRecord, Option<Accepted>, Option<Trace>, Option<CostEstimate>);

#[allow(clippy::too_many_arguments)]
fn absorb(
    rec: MergeRecord,
    acc: Option<Accepted>,
    trace: Option<Trace>,
    cost: Option<CostEstimate>,
    records: &mut Vec<MergeRecord>,
    accepted: &mut Vec<Accepted>,
    funnel: &mut Funnel,
    module: &mut Module,
    merges: &mut MergeGraph,
    merged_traces: &mut BTreeMap<String, Trace>,
    costs: &mut BTreeMap<String, CostEstimate>,
    params: &mut BTreeMap<String, ParamMap>,
) {
    funnel.ranked += 1;
    funnel.aligned += usize::from(rec.aligned_fraction.is_some());
    funnel.verified += usize::from(rec.verified == Some(true));
    funnel.area_win += usize::from(rec.area_merged.zip(rec.area_parents).is_some_and(|(m, p)| m < p) && rec.verified == Some(true));
    funnel.ep_positive += usize::from(rec.accepted);
    records.push(rec);
    if let (Some(acc), Some(trace), Some(cost)) = (acc, trace, cost) {
        let name = acc.merged.function.name.clone();
        let (a, b) = acc.merged.parents.clone();
        merges.add(name.clone(), a, b);
        params.insert(name.clone(), acc.merged.params.clone());
        module.add_function(acc.merged.function.clone());
        merged_traces.insert(name.clone(), trace);
        costs.insert(name, cost);
        accepted.push(acc);
    }
}

/// Aligns, merges, verifies and filters one batch of candidate pairs.
/// Pairs are independent, so they run in parallel; results keep pair order.
#[allow(clippy::too_many_arguments)]
fn run_level(
    source: &Module,
    inputs: &[HeapImage],
    pairs: &[(String, String, f64)],
    depth: usize,
    cfg: &PipelineConfig,
    model: &AreaModel,
    prof: &Profile,
    parent_costs: &BTreeMap<String, CostEstimate>,
    current: &Module,
    sw_total: f64,
    merges: &MergeGraph,
    params: &BTreeMap<String, ParamMap>,
) -> Result<Vec<LevelResult>, DseError> {
    // names are fixed up front so parallel work stays deterministic
    let mut taken = current.clone();
    let mut names = Vec::new();
    for (a, b, _) in pairs {
        let n = unique_name(&taken, format!("{a}__{b}"));
        taken.add_function(crate::ir::Function {
            name: n.clone(),
            params: vec![],
            ret: None,
            blocks: vec![],
            provenance: Provenance::Merged,
        });
        names.push(n);
    }
    let inputs_results = &prof.results;
    let results: Vec<Result<LevelResult, DseError>> = pairs
        .par_iter()
        .zip(names.par_iter())
        .enumerate()
        .map(|(idx, ((a, b, s), name))| {
            let mut rec = MergeRecord {
                name: name.clone(),
                parents: (a.clone(), b.clone()),
                depth,
                similarity: *s,
                aligned_fraction: None,
                verified: None,
                verify_trials: 0,
                counterexample: None,
                area_merged: None,
                area_parents: None,
                ep: None,
                accepted: false,
            };
            let merged = match merge_pair(source, a, b, name, &cfg.merge) {
                Ok(mf) => mf,
                Err(_) => return Ok((rec, None, None, None)),
            };
            rec.aligned_fraction = Some(merged.alignment.aligned_fraction());

            // differential check of the function itself
            let mut with = current.clone();
            with.add_function(merged.function.clone());
            if let Err(e) = validate_module(&with) {
                rec.verified = Some(false);
                rec.counterexample = Some(format!("invalid merged function: {}", e[0]));
                return Ok((rec, None, None, None));
            }
            let seed = cfg.seed ^ ((depth as u64) << 32) ^ idx as u64;
            let v = verify_merge(&with, a, b, name, cfg.verify_trials, seed);
            rec.verify_trials = v.trials;
            if !v.passed {
                rec.verified = Some(false);
                rec.counterexample = v.counterexample.map(|c| format!("{c:?}")).or(v.error);
                return Ok((rec, None, None, None));
            }

            // whole-program check with every covered call redirected
            let mut graph = merges.clone();
            graph.add(name.clone(), a.clone(), b.clone());
            let mut pmap = params.clone();
            pmap.insert(name.clone(), merged.params.clone());
            let redirected = redirect_calls(&with, name, &graph, &pmap);
            let rprof = match profile(&redirected, inputs) {
                Ok(p) if p.results == *inputs_results => p,
                Ok(_) => {
                    rec.verified = Some(false);
                    rec.counterexample = Some("program results differ after redirecting calls".into());
                    return Ok((rec, None, None, None));
                }
                Err(e) => {
                    rec.verified = Some(false);
                    rec.counterexample = Some(format!("redirected program failed: {e}"));
                    return Ok((rec, None, None, None));
                }
            };
            rec.verified = Some(true);

            // area win on hierarchical features
            let rcg = build_call_graph(&with).map_err(errstr)?;
            let area_k = model.predict(&extract_features(&with, name, &rcg));
            let area_p = model.predict(&extract_features(&with, a, &rcg)) + model.predict(&extract_features(&with, b, &rcg));
            rec.area_merged = Some(area_k);
            rec.area_parents = Some(area_p);
            if area_k >= area_p {
                return Ok((rec, None, None, None));
            }

            // estimated profitability
            let kcg = build_call_graph(&redirected).map_err(errstr)?;
            let kcosts = estimate_costs(&redirected, &kcg, &rprof.trace, model, &cfg.latency, cfg.platform.clock)?;
            let side = |p: &str| -> (f64, f64) {
                if merges.is_merged(p) {
                    let sw: f64 = merges.covered_roots(p).iter().map(|r| parent_costs[r].sw).sum();
                    (sw, parent_costs[p].hw)
                } else {
                    (parent_costs[p].sw, parent_costs[p].hw)
                }
            };
            let (sw1, hw1) = side(a);
            let (sw2, hw2) = side(b);
            let ep = estimate_profitability(sw1, sw2, hw1, hw2, kcosts[name].hw, sw_total)?;
            rec.ep = Some(ep);
            if !(ep > 0.0) {
                return Ok((rec, None, None, None));
            }
            rec.accepted = true;
            let covers = graph.covered_roots(name);
            Ok((rec, Some(Accepted { merged, covers }), Some(rprof.trace), Some(kcosts[name])))
        })
        .collect();
    results.into_iter().collect()
}

/// Budget-, latency- and bandwidth-specific outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub platform: Platform,
    pub objective_s: f64,
    pub speedup: f64,
    pub area_used: u64,
    pub sw_pct: f64,
    pub hw_pct: f64,
    pub comm_pct: f64,
    pub software: Vec<String>,
    pub hardware: Vec<String>,
    pub hardware_merged: Vec<String>,
    pub optimal: bool,
}

impl PointResult {
    pub fn n_merged_selected(&self) -> usize {
        self.hardware_merged.len()
    }
}

pub fn evaluate_point(prep: &Prepared, platform: Platform, node_limit: u64) -> Result<(PointResult, PartitionSolution), DseError> {
    let mut p = prep.problem.clone();
    p.set_platform(platform);
    let s = solve_with(&p, &SolveOptions { node_limit })?;
    let base = p.all_software_ps();
    let (sw, hw, comm) = s.breakdown(&p);
    let obj = s.objective_ps;
    let pct = |x: u64| if obj == 0 { 0.0 } else { 100.0 * x as f64 / obj as f64 };
    let speedup = if obj == 0 { 1.0 } else { base as f64 / obj as f64 };
    let names = |v: Vec<&str>| v.into_iter().map(str::to_owned).collect::<Vec<_>>();
    Ok((
        PointResult {
            platform,
            objective_s: obj as f64 / PS_PER_SECOND,
            speedup,
            area_used: s.area_used(&p),
            sw_pct: pct(sw),
            hw_pct: pct(hw),
            comm_pct: pct(comm),
            software: names(s.software_set(&p)),
            hardware: names(s.hardware_originals(&p)),
            hardware_merged: names(s.hardware_merged(&p)),
            optimal: s.optimal,
        },
        s,
    ))
}

/// `prepare` then `evaluate_point` at the configured platform.
pub fn run_pipeline(
    m: &Module,
    inputs: &[HeapImage],
    cfg: &PipelineConfig,
    model: &AreaModel,
) -> Result<(Prepared, PointResult), DseError> {
    let prep = prepare(m, inputs, cfg, model)?;
    let (point, _) = evaluate_point(&prep, cfg.platform, cfg.node_limit)?;
    Ok((prep, point))
}
