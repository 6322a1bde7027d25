use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::{hierarchical_features, own_features};
use super::latency::Side;
use super::{AreaModel, CostError, LatencyTable};
use crate::analysis::CallGraph;
use crate::ir::{Module, Trace};

/// Per-function costs over one profile. Times are in seconds and cover every
/// invocation in the profile; `sw`/`hw`/`area` include callees, the `own_`
/// variants only the function's body.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostEstimate {
    pub area: f64,
    pub own_area: f64,
    pub sw: f64,
    pub hw: f64,
    pub own_sw: f64,
    pub own_hw: f64,
}

pub fn estimate_costs(
    m: &Module,
    cg: &CallGraph,
    trace: &Trace,
    area: &AreaModel,
    table: &LatencyTable,
    clock: f64,
) -> Result<BTreeMap<String, CostEstimate>, CostError> {
    let hier = hierarchical_features(m, cg);
    let mut out = BTreeMap::new();
    for (name, f) in &m.functions {
        let mut e = CostEstimate { area: area.predict(&hier[name]), own_area: area.predict(&own_features(f)), ..Default::default() };
        if let Some(p) = trace.function(name) {
            e.sw = table.cycles(Side::Sw, &p.inclusive_counts)? as f64 * clock;
            e.hw = table.cycles(Side::Hw, &p.inclusive_counts)? as f64 * clock;
            e.own_sw = table.cycles(Side::Sw, &p.self_counts)? as f64 * clock;
            e.own_hw = table.cycles(Side::Hw, &p.self_counts)? as f64 * clock;
        }
        out.insert(name.clone(), e);
    }
    Ok(out)
}
