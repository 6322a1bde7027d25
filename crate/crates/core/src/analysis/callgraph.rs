use std::collections::{BTreeMap, BTreeSet};

use crate::ir::Module;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("recursive call cycle: {}", .0.join(" -> "))]
pub struct CycleError(pub Vec<String>);

/// Direct and transitive callee sets of every function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallGraph {
    pub direct: BTreeMap<String, BTreeSet<String>>,
    /// `C_i`: every function reachable through one or more calls.
    pub transitive: BTreeMap<String, BTreeSet<String>>,
    /// Static call-site multiplicity per (caller, callee).
    pub sites: BTreeMap<String, BTreeMap<String, usize>>,
    /// Callers before callees.
    pub topo: Vec<String>,
}

impl CallGraph {
    pub fn callees(&self, f: &str) -> &BTreeSet<String> {
        &self.transitive[f]
    }

    pub fn direct_callees(&self, f: &str) -> &BTreeSet<String> {
        &self.direct[f]
    }

    pub fn site_count(&self, caller: &str, callee: &str) -> usize {
        self.sites.get(caller).and_then(|m| m.get(callee)).copied().unwrap_or(0)
    }

    /// Callees before callers.
    pub fn bottom_up(&self) -> impl Iterator<Item = &str> {
        self.topo.iter().rev().map(String::as_str)
    }

    pub fn callers_of(&self, f: &str) -> Vec<&str> {
        self.direct.iter().filter(|(_, cs)| cs.contains(f)).map(|(c, _)| c.as_str()).collect()
    }
}

pub fn build_call_graph(m: &Module) -> Result<CallGraph, CycleError> {
    if let Some(cycle) = crate::ir::find_call_cycle(m) {
        return Err(CycleError(cycle));
    }
    let mut direct = BTreeMap::new();
    let mut sites = BTreeMap::new();
    for (name, f) in &m.functions {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for c in f.call_sites() {
            *counts.entry(c.to_owned()).or_default() += 1;
        }
        direct.insert(name.clone(), counts.keys().cloned().collect::<BTreeSet<_>>());
        sites.insert(name.clone(), counts);
    }
    // Depth-first post-order gives callees before callers.
    let mut post = Vec::new();
    let mut seen = BTreeSet::new();
    fn visit<'a>(
        v: &'a str,
        direct: &'a BTreeMap<String, BTreeSet<String>>,
        seen: &mut BTreeSet<&'a str>,
        post: &mut Vec<String>,
    ) {
        if !seen.insert(v) {
            return;
        }
        for w in &direct[v] {
            visit(w, direct, seen, post);
        }
        post.push(v.to_owned());
    }
    for name in direct.keys() {
        visit(name, &direct, &mut seen, &mut post);
    }
    let mut transitive: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for v in &post {
        let mut all = BTreeSet::new();
        for w in &direct[v] {
            all.insert(w.clone());
            all.extend(transitive[w].iter().cloned());
        }
        transitive.insert(v.clone(), all);
    }
    post.reverse();
    Ok(CallGraph { direct, transitive, sites, topo: post })
}
