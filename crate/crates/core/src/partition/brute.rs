use super::{Assignment, PartitionError, PartitionProblem, PartitionSolution};

pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Exhaustive search: every set of pairwise-disjoint merged functions in
/// hardware, then every software/hardware split of the uncovered roots.
pub fn solve_bruteforce(p: &PartitionProblem) -> Result<PartitionSolution, PartitionError> {
    if p.len() > BRUTE_FORCE_LIMIT {
        return Err(PartitionError::TooLarge { size: p.len(), limit: BRUTE_FORCE_LIMIT });
    }
    let merged: Vec<usize> = (0..p.len()).filter(|&i| p.merged[i]).collect();
    let mut best: Option<PartitionSolution> = None;
    let mut nodes = 0u64;
    for mmask in 0u32..(1 << merged.len()) {
        let mut a = vec![Assignment::Unused; p.len()];
        let mut covered = vec![false; p.len()];
        let mut ok = true;
        for (b, &k) in merged.iter().enumerate() {
            if mmask >> b & 1 == 1 {
                a[k] = Assignment::Hardware;
                for &r in &p.covers[k] {
                    ok &= !covered[r];
                    covered[r] = true;
                }
            }
        }
        if !ok {
            continue;
        }
        let free: Vec<usize> = p.roots.iter().copied().filter(|&r| !covered[r]).collect();
        for rmask in 0u32..(1 << free.len()) {
            nodes += 1;
            for (b, &r) in free.iter().enumerate() {
                a[r] = if rmask >> b & 1 == 1 { Assignment::Hardware } else { Assignment::Software };
            }
            let area: u64 = (0..p.len()).filter(|&i| a[i] == Assignment::Hardware).map(|i| p.area[i]).sum();
            if area > p.platform.budget_luts || (0..p.len()).any(|i| p.software_only[i] && a[i] == Assignment::Hardware) {
                continue;
            }
            let eq5 = (0..p.len())
                .filter(|&i| a[i] == Assignment::Hardware)
                .all(|i| p.callees[i].iter().all(|&j| a[j] != Assignment::Software));
            if !eq5 {
                continue;
            }
            let s = PartitionSolution::evaluate(p, a.clone());
            if best.as_ref().map_or(true, |b| s.objective_ps < b.objective_ps) {
                best = Some(s);
            }
        }
    }
    let mut s = best.ok_or(PartitionError::Infeasible)?;
    s.nodes = nodes;
    Ok(s)
}
